"""Closed-loop episode execution and suite evaluation.

Each step: synthesize the cloud, ask the policy for an action-mask pair,
check the done signal, DBSCAN-filter both masks, decode the pickup by mask
coverage and the target by coverage (snap-to-target) or mask centroid
(free-form), validate against the task referee, then execute.  Episodes are
independent and deterministic given the master seed.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

from . import metrics as metrics_mod
from .dbscan import filter_mask_largest_cluster
from .encoding import bytes_digest
from .errors import SceneError
from .oracle import oracle_next
from .pairselect import decide_done
from .perception import (
    DEFAULT_RESOLUTION,
    LabeledPointCloud,
    freeform_putdown_point,
    gt_action_masks,
    mask_iou,
    mask_to_instance,
    synthesize_cloud,
)
from .policies import Policy, StepObservation, parse_policy_spec
from .rng import derive_seed, make_rng
from .scenegen import SceneConfig, generate_scene
from .tasks import (
    ALL_VARIANTS,
    ConstraintMemory,
    TaskInstance,
    Variant,
    action_valid,
    advance_memory,
    goal_satisfied,
    sample_task,
    task_feasible,
)
from .world import (
    Action,
    ExecutionMode,
    FreeCellTarget,
    SceneState,
    StackTopTarget,
    apply_action,
    scene_digest,
    snap_freeform_point,
)

OUTCOME_SUCCESS = "success"
OUTCOME_INVALID = "invalid-action"
OUTCOME_WRONG_DONE = "wrong-done"
OUTCOME_STEP_LIMIT = "step-limit"
OUTCOME_DECODE_FAILURE = "decode-failure"

STEP_CAP_SLACK = 5


@dataclass(frozen=True)
class DecodeParams:
    resolution: float = DEFAULT_RESOLUTION
    dbscan_eps_factor: float = 3.0  # eps = factor * resolution
    dbscan_min_pts: int = 5
    done_threshold: float = 0.5

    @property
    def eps(self) -> float:
        return self.dbscan_eps_factor * self.resolution

    def to_dict(self) -> dict:
        return {
            "resolution": self.resolution,
            "dbscan_eps_factor": self.dbscan_eps_factor,
            "dbscan_min_pts": self.dbscan_min_pts,
            "done_threshold": self.done_threshold,
        }


@dataclass
class StepRecord:
    step: int
    cloud_digest: str
    point_count: int
    done_probability: float
    done: bool = False
    decoded_action: dict | None = None
    predicted_point: list[float] | None = None
    valid: bool | None = None
    violations: tuple[str, ...] = ()
    executed: bool = False
    gt_action: dict | None = None
    target_kind: str | None = None
    pick_iou: float | None = None
    target_iou: float | None = None
    placement_error: float | None = None
    state_digest: str | None = None

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "cloud_digest": self.cloud_digest,
            "point_count": self.point_count,
            "done_probability": self.done_probability,
            "done": self.done,
            "decoded_action": self.decoded_action,
            "predicted_point": self.predicted_point,
            "valid": self.valid,
            "violations": list(self.violations),
            "executed": self.executed,
            "gt_action": self.gt_action,
            "target_kind": self.target_kind,
            "pick_iou": self.pick_iou,
            "target_iou": self.target_iou,
            "placement_error": self.placement_error,
            "state_digest": self.state_digest,
        }


@dataclass
class EpisodeRecord:
    episode_id: int
    task: dict
    scene_config: dict
    scene_digest: str
    policy: dict
    policy_spec: str
    mode: str
    decode: dict
    seed: int
    n_boxes: int
    bucket: str
    step_cap: int
    steps: list[StepRecord] = field(default_factory=list)
    outcome: str = OUTCOME_STEP_LIMIT

    @property
    def n_actions(self) -> int:
        return sum(1 for s in self.steps if s.executed)

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "task": self.task,
            "scene_config": self.scene_config,
            "scene_digest": self.scene_digest,
            "policy": self.policy,
            "policy_spec": self.policy_spec,
            "mode": self.mode,
            "decode": self.decode,
            "seed": self.seed,
            "n_boxes": self.n_boxes,
            "bucket": self.bucket,
            "step_cap": self.step_cap,
            "steps": [s.to_dict() for s in self.steps],
            "outcome": self.outcome,
        }


def bucket_label(n_boxes: int) -> str:
    if n_boxes <= 10:
        return "1-10"
    if n_boxes <= 20:
        return "11-20"
    return "21-30"


def _decode_pick(cloud: LabeledPointCloud, mask) -> tuple[int | None, str | None]:
    ref, _coverage = mask_to_instance(cloud, mask)
    if ref[0] != "box":
        return None, "pickup-not-a-box"
    return ref[1], None


def _decode_target_snap(cloud: LabeledPointCloud, mask):
    ref, _coverage = mask_to_instance(cloud, mask)
    if ref[0] == "cell":
        return FreeCellTarget(surface_id=ref[1], cell_index=ref[2], layer=ref[3]), None
    if ref[0] == "box":
        return StackTopTarget(base_box_id=ref[1]), None
    return None, "target-not-a-slot"


def run_episode(
    task: TaskInstance,
    scene: SceneState,
    policy: Policy,
    mode: ExecutionMode = ExecutionMode.SNAP,
    *,
    seed: int = 0,
    episode_id: int = 0,
    decode: DecodeParams = DecodeParams(),
    scene_config: dict | None = None,
    policy_spec: str = "",
    step_cap: int | None = None,
    compute_gt: bool = True,
) -> EpisodeRecord:
    """Roll one episode to termination and log every step."""
    n_boxes = len(scene.boxes)
    cap = step_cap if step_cap is not None else n_boxes + STEP_CAP_SLACK
    policy.begin_episode(episode_id)  # external policies handshake here
    record = EpisodeRecord(
        episode_id=episode_id,
        task=task.to_dict(),
        scene_config=scene_config or {},
        scene_digest=scene_digest(scene),
        policy=policy.describe(),
        policy_spec=policy_spec,
        mode=mode.value,
        decode=decode.to_dict(),
        seed=seed,
        n_boxes=n_boxes,
        bucket=bucket_label(n_boxes),
        step_cap=cap,
    )
    state = scene
    memory = ConstraintMemory()
    for step in range(cap + 1):
        cloud = synthesize_cloud(state, decode.resolution, seed=derive_seed(seed, "cloud", episode_id, step))
        obs = StepObservation(
            episode_id=episode_id,
            step=step,
            goal_text=task.goal_text,
            cloud=cloud,
            state=state,
            task=task,
            memory=memory,
        )
        masks = policy.act(obs)
        step_rec = StepRecord(
            step=step,
            cloud_digest=bytes_digest(cloud.to_bytes()),
            point_count=len(cloud),
            done_probability=masks.done_probability,
        )
        record.steps.append(step_rec)

        if decide_done(masks.done_probability, decode.done_threshold):
            step_rec.done = True
            record.outcome = OUTCOME_SUCCESS if goal_satisfied(task, state) else OUTCOME_WRONG_DONE
            return record
        if step == cap:  # cap actions executed, no done signal
            break

        gt_choice = oracle_next(task, state, memory) if compute_gt else None
        if gt_choice is not None:
            step_rec.gt_action = gt_choice.action.to_dict()
            step_rec.target_kind = (
                "cell" if isinstance(gt_choice.action.putdown, FreeCellTarget) else "box"
            )
            gt_masks = gt_action_masks(cloud, gt_choice.action)
            step_rec.pick_iou = mask_iou(masks.pick_mask, gt_masks.pick_mask)
            step_rec.target_iou = mask_iou(masks.target_mask, gt_masks.target_mask)

        pick_f, pick_noise = filter_mask_largest_cluster(
            cloud.points, masks.pick_mask, decode.eps, decode.dbscan_min_pts
        )
        target_f, target_noise = filter_mask_largest_cluster(
            cloud.points, masks.target_mask, decode.eps, decode.dbscan_min_pts
        )
        if pick_noise or target_noise:
            step_rec.valid = False
            step_rec.violations = ("decode-failure",)
            record.outcome = OUTCOME_DECODE_FAILURE
            return record

        pickup_id, pick_err = _decode_pick(cloud, pick_f)
        freeform_point = None
        if mode == ExecutionMode.FREEFORM:
            point = freeform_putdown_point(cloud, target_f)
            freeform_point = (float(point[0]), float(point[1]), float(point[2]))
            step_rec.predicted_point = list(freeform_point)
            putdown = snap_freeform_point(state, freeform_point)
            target_err = "freeform-out-of-tolerance" if putdown is None else None
        else:
            putdown, target_err = _decode_target_snap(cloud, target_f)

        if pick_err or target_err:
            step_rec.valid = False
            step_rec.violations = tuple(e for e in (pick_err, target_err) if e)
            record.outcome = OUTCOME_INVALID
            return record

        action = Action(pickup_id=pickup_id, putdown=putdown)
        step_rec.decoded_action = action.to_dict()
        verdict = action_valid(task, state, action, memory)
        step_rec.valid = verdict.valid
        step_rec.violations = verdict.violations
        if not verdict.valid:
            record.outcome = OUTCOME_INVALID
            return record

        if gt_choice is not None and freeform_point is not None:
            gx, gy, _ = _insertion_center(state, gt_choice.action)
            step_rec.placement_error = math.hypot(freeform_point[0] - gx, freeform_point[1] - gy)

        state = apply_action(state, action, mode, freeform_point)
        memory = advance_memory(memory, task, state, action)
        step_rec.executed = True
        step_rec.state_digest = scene_digest(state)
    record.outcome = OUTCOME_STEP_LIMIT
    return record


def _insertion_center(state: SceneState, action: Action) -> tuple[float, float, float]:
    from .world import resolve_putdown

    cell = resolve_putdown(state, action.putdown, pickup_id=action.pickup_id)
    return cell.insertion_center(state.config.box_size)


# ---------------------------------------------------------------------------
# Task-aware scene construction
# ---------------------------------------------------------------------------

_ESCALATION = ((1, 0), (1, 1), (2, 1), (3, 1), (3, 2))
_ALL_LARGE = {"pallet-small": 0.0, "pallet-large": 1.0, "shelf-small": 0.0, "shelf-large": 1.0}


def _color_count_candidates(n: int, start: tuple[int, int, int]):
    """All (r, b, y) compositions of n, nearest to ``start`` first."""
    all_counts = [
        (r, b, n - r - b) for r in range(n + 1) for b in range(n - r + 1)
    ]
    all_counts.sort(key=lambda c: (sum(abs(a - b) for a, b in zip(c, start)), c))
    return all_counts


def build_task_scene(task: TaskInstance, n_boxes: int, seed: int, num_distractors: int = 0) -> tuple[SceneConfig, SceneState]:
    """Generate a scene on which the task is provably completable.

    Surface loadouts escalate deterministically until capacity (under the
    task height limit) suffices; for the fragile variants the box color
    multiset is re-drawn to the nearest feasible composition.
    """
    plan_rng = make_rng(seed, "scene-plan")
    sampled = (int(plan_rng.integers(0, 4)), int(plan_rng.integers(0, 3)))
    attempts = [(sampled, None)] + [(counts, _ALL_LARGE) for counts in _ESCALATION]
    for attempt, ((n_pallets, n_shelves), mix) in enumerate(attempts):
        if n_pallets == 0 and n_shelves == 0:
            continue
        kwargs = {"size_mix": dict(mix)} if mix else {}
        cfg = SceneConfig(
            seed=derive_seed(seed, "scene", attempt),
            num_boxes=n_boxes,
            num_pallets=n_pallets,
            num_shelves=n_shelves,
            num_distractors=num_distractors,
            require_capacity=False,
            **kwargs,
        )
        try:
            scene = generate_scene(cfg)
        except SceneError:
            continue
        if task_feasible(task, scene):
            return cfg, scene
        # Try to repair the color multiset before escalating the loadout.
        if task.variant in (
            Variant.HOMOGENEOUS_STACKS,
            Variant.BOX_TYPE_SEGREGATION,
            Variant.BOX_ACCESSIBILITY,
        ):
            current = _actual_color_counts(scene)
            for counts in _color_count_candidates(n_boxes, current):
                candidate_cfg = replace(cfg, color_counts=counts)
                candidate = generate_scene(candidate_cfg)
                if task_feasible(task, candidate):
                    return candidate_cfg, candidate
    raise SceneError(
        f"no feasible scene for {task.variant.value} (H={task.max_height}) with {n_boxes} boxes"
    )


def _actual_color_counts(scene: SceneState) -> tuple[int, int, int]:
    from .world import COLOR_ORDER

    return tuple(sum(1 for b in scene.boxes if b.color == c) for c in COLOR_ORDER)


# ---------------------------------------------------------------------------
# Suite evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SuiteConfig:
    n_scenes: int = 200
    variants: tuple[Variant, ...] = ALL_VARIANTS
    modes: tuple[ExecutionMode, ...] = (ExecutionMode.SNAP,)
    master_seed: int = 0
    policy_spec: str = "oracle"
    resolution: float = DEFAULT_RESOLUTION
    min_boxes: int = 1
    max_boxes: int = 30
    num_distractors_max: int = 2
    template_pool: str = "train"
    workers: int = 1

    def to_dict(self) -> dict:
        return {
            "n_scenes": self.n_scenes,
            "variants": [v.value for v in self.variants],
            "modes": [m.value for m in self.modes],
            "master_seed": self.master_seed,
            "policy_spec": self.policy_spec,
            "resolution": self.resolution,
            "min_boxes": self.min_boxes,
            "max_boxes": self.max_boxes,
            "num_distractors_max": self.num_distractors_max,
            "template_pool": self.template_pool,
        }


_BUCKET_RANGES = ((1, 10), (11, 20), (21, 30))


@dataclass(frozen=True)
class EpisodePlan:
    episode_id: int
    variant: Variant
    n_boxes: int
    num_distractors: int
    task_seed: int
    scene_seed: int
    run_seed: int


def plan_episodes(config: SuiteConfig) -> list[EpisodePlan]:
    """Deterministic episode grid: variants round-robin, buckets cycled."""
    plans = []
    n_variants = len(config.variants)
    for j in range(config.n_scenes):
        variant = config.variants[j % n_variants]
        lo, hi = _BUCKET_RANGES[(j // n_variants) % len(_BUCKET_RANGES)]
        lo = max(lo, config.min_boxes)
        hi = min(hi, config.max_boxes)
        rng = make_rng(config.master_seed, "episode", j)
        n_boxes = int(rng.integers(lo, hi + 1)) if hi >= lo else config.min_boxes
        n_distractors = int(rng.integers(0, config.num_distractors_max + 1))
        plans.append(
            EpisodePlan(
                episode_id=j,
                variant=variant,
                n_boxes=n_boxes,
                num_distractors=n_distractors,
                task_seed=derive_seed(config.master_seed, "task", j),
                scene_seed=derive_seed(config.master_seed, "scene", j),
                run_seed=derive_seed(config.master_seed, "run", j),
            )
        )
    return plans


def _run_planned_episode(args: tuple) -> list[tuple[str, dict]]:
    plan, config = args
    task = sample_task(plan.variant, plan.task_seed, pool=config.template_pool)
    scene_cfg, scene = build_task_scene(
        task, plan.n_boxes, plan.scene_seed, num_distractors=plan.num_distractors
    )
    policy = parse_policy_spec(config.policy_spec, seed=derive_seed(config.master_seed, "policy"))
    decode = DecodeParams(resolution=config.resolution)
    out = []
    try:
        for mode in config.modes:
            rec = run_episode(
                task,
                scene,
                policy,
                mode,
                seed=plan.run_seed,
                episode_id=plan.episode_id,
                decode=decode,
                scene_config=scene_cfg.to_dict(),
                policy_spec=config.policy_spec,
            )
            out.append((mode.value, rec.to_dict()))
    finally:
        policy.close()
    return out


def evaluate_suite(config: SuiteConfig) -> tuple[dict, dict[str, list[EpisodeRecord]]]:
    """Run the episode grid and aggregate a metrics report.

    Returns (report dict, records by mode).  Deterministic given the master
    seed; episodes are independent, so worker count never changes results.
    """
    plans = plan_episodes(config)
    by_mode: dict[str, list[EpisodeRecord]] = {m.value: [] for m in config.modes}
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_planned_episode, [(p, config) for p in plans]))
    else:
        results = [_run_planned_episode((p, config)) for p in plans]
    for episode_results in results:
        for mode_value, rec_dict in episode_results:
            by_mode[mode_value].append(_record_from_dict(rec_dict))
    report = metrics_mod.build_report(
        by_mode,
        suite_config=config.to_dict(),
        policy=(
            by_mode[config.modes[0].value][0].policy
            if by_mode[config.modes[0].value]
            else {"name": config.policy_spec, "privileged": False}
        ),
    )
    return report, by_mode


def _record_from_dict(d: dict) -> EpisodeRecord:
    rec = EpisodeRecord(
        episode_id=d["episode_id"],
        task=d["task"],
        scene_config=d["scene_config"],
        scene_digest=d["scene_digest"],
        policy=d["policy"],
        policy_spec=d["policy_spec"],
        mode=d["mode"],
        decode=d["decode"],
        seed=d["seed"],
        n_boxes=d["n_boxes"],
        bucket=d["bucket"],
        step_cap=d["step_cap"],
        outcome=d["outcome"],
    )
    for s in d["steps"]:
        rec.steps.append(
            StepRecord(
                step=s["step"],
                cloud_digest=s["cloud_digest"],
                point_count=s["point_count"],
                done_probability=s["done_probability"],
                done=s["done"],
                decoded_action=s["decoded_action"],
                predicted_point=s["predicted_point"],
                valid=s["valid"],
                violations=tuple(s["violations"]),
                executed=s["executed"],
                gt_action=s["gt_action"],
                target_kind=s["target_kind"],
                pick_iou=s["pick_iou"],
                target_iou=s["target_iou"],
                placement_error=s["placement_error"],
                state_digest=s["state_digest"],
            )
        )
    return rec


def replay_episode(record: EpisodeRecord) -> list[str]:
    """Re-execute a logged episode and verify digests; returns mismatches."""
    if record.policy_spec.startswith("external:"):
        return ["replay requires a builtin policy"]
    task = TaskInstance.from_dict(record.task)
    scene = generate_scene(SceneConfig.from_dict(record.scene_config))
    mismatches: list[str] = []
    if scene_digest(scene) != record.scene_digest:
        mismatches.append("scene digest mismatch")
    policy = parse_policy_spec(record.policy_spec, seed=derive_seed(record.seed, "policy"))
    fresh = run_episode(
        task,
        scene,
        policy,
        ExecutionMode(record.mode),
        seed=record.seed,
        episode_id=record.episode_id,
        decode=DecodeParams(
            resolution=record.decode["resolution"],
            dbscan_eps_factor=record.decode["dbscan_eps_factor"],
            dbscan_min_pts=record.decode["dbscan_min_pts"],
            done_threshold=record.decode["done_threshold"],
        ),
        scene_config=record.scene_config,
        policy_spec=record.policy_spec,
        step_cap=record.step_cap,
    )
    if fresh.outcome != record.outcome:
        mismatches.append(f"outcome {fresh.outcome} != {record.outcome}")
    if len(fresh.steps) != len(record.steps):
        mismatches.append(f"step count {len(fresh.steps)} != {len(record.steps)}")
    for a, b in zip(fresh.steps, record.steps):
        if a.cloud_digest != b.cloud_digest:
            mismatches.append(f"step {a.step}: cloud digest mismatch")
        if a.state_digest != b.state_digest:
            mismatches.append(f"step {a.step}: state digest mismatch")
    return mismatches
