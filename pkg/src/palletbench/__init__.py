"""Deterministic benchmark suite for language-conditioned box rearrangement.

Everything around the neural policy: seeded warehouse scenes, 11 constraint
families with an oracle planner and a referee, synthetic labeled point
clouds, mask-space action decoding, closed-loop rollouts under two execution
modes, metrics, and supervision-dataset emission.
"""

__version__ = "0.1.0"

from .world import (  # noqa: F401
    Action,
    BoxItem,
    CellSlot,
    Color,
    Distractor,
    ExecutionMode,
    FreeCellTarget,
    SceneState,
    StackTopTarget,
    Surface,
    SurfaceKind,
    WorldConfig,
    accessible_boxes,
    apply_action,
    free_cells,
    placed_boxes,
    stacked_boxes,
    unplaced_boxes,
)
from .scenegen import SceneConfig, generate_scene  # noqa: F401
from .tasks import (  # noqa: F401
    ALL_VARIANTS,
    ConstraintMemory,
    TaskInstance,
    Variant,
    action_valid,
    goal_satisfied,
    heldout_templates,
    sample_task,
)
from .oracle import OracleChoice, oracle_next, oracle_rollout  # noqa: F401
from .perception import (  # noqa: F401
    ActionMaskPair,
    LabeledPointCloud,
    freeform_putdown_point,
    gt_action_masks,
    mask_iou,
    mask_to_instance,
    synthesize_cloud,
)
from .dbscan import dbscan_largest_cluster  # noqa: F401
from .camera import (  # noqa: F401
    CameraIntrinsics,
    backproject_2d,
    camera_rig,
    render_topdown_depth,
    topdown_camera,
)
from .pairselect import QueryOutputs, decide_done, pair_scores, select_action_pair  # noqa: F401
from .harness import (  # noqa: F401
    DecodeParams,
    EpisodeRecord,
    SuiteConfig,
    build_task_scene,
    evaluate_suite,
    run_episode,
)
from .policies import NoisyOraclePolicy, OraclePolicy, RandomValidPolicy, parse_policy_spec  # noqa: F401
from .dataset import DatasetConfig, Paraphraser, SubprocessParaphraser, emit_dataset, load_dataset  # noqa: F401
from .metrics import ablation_delta, build_report, render_text  # noqa: F401
