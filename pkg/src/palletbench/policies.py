"""Policy ports for the rollout harness.

Built-in policies are privileged (they read ground truth); the oracle and its
noisy variant anchor the referee's self-consistency checks, and random-valid
is labeled privileged and excluded from headline metrics.  External policies
speak the NDJSON wire protocol (see ``wire``) and observe only the cloud and
the goal text.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PalletBenchError
from .oracle import oracle_next
from .perception import ActionMaskPair, LabeledPointCloud, gt_action_masks
from .rng import make_rng
from .tasks import ConstraintMemory, TaskEvalContext, TaskInstance, goal_satisfied
from .world import Action, SceneState


@dataclass
class StepObservation:
    episode_id: int
    step: int
    goal_text: str
    cloud: LabeledPointCloud
    # Ground-truth context, visible to built-in policies only.
    state: SceneState
    task: TaskInstance
    memory: ConstraintMemory


class Policy:
    name = "policy"
    privileged = False

    def begin_episode(self, episode_id: int) -> None:
        pass

    def act(self, obs: StepObservation) -> ActionMaskPair:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def describe(self) -> dict:
        return {"name": self.name, "privileged": self.privileged}


def _empty_masks(cloud: LabeledPointCloud, done: float) -> ActionMaskPair:
    n = len(cloud)
    return ActionMaskPair(
        pick_mask=np.zeros(n, dtype=bool),
        target_mask=np.zeros(n, dtype=bool),
        done_probability=done,
    )


class OraclePolicy(Policy):
    """Emits ground-truth masks for the oracle's next action."""

    name = "oracle"

    def act(self, obs: StepObservation) -> ActionMaskPair:
        choice = oracle_next(obs.task, obs.state, obs.memory)
        if choice is None:
            return _empty_masks(obs.cloud, done=1.0)
        return gt_action_masks(obs.cloud, choice.action, done_probability=0.0)


class NoisyOraclePolicy(Policy):
    """Oracle masks whose pick mask is corrupted with probability p.

    Corruption swaps the pick mask for the points of a uniformly random
    non-pickup instance.  Draws are keyed by (seed, episode, step) so the
    corruption pattern is identical across execution modes.
    """

    def __init__(self, corruption: float, seed: int = 0):
        if not (0.0 <= corruption <= 1.0):
            raise PalletBenchError("corruption probability must be in [0, 1]")
        self.corruption = corruption
        self.seed = seed
        self.name = f"noisy-oracle(p={corruption:g})"

    def act(self, obs: StepObservation) -> ActionMaskPair:
        choice = oracle_next(obs.task, obs.state, obs.memory)
        if choice is None:
            return _empty_masks(obs.cloud, done=1.0)
        masks = gt_action_masks(obs.cloud, choice.action, done_probability=0.0)
        rng = make_rng(self.seed, "noisy", obs.episode_id, obs.step)
        if rng.random() < self.corruption:
            pickup_row = obs.cloud.instance_row(("box", choice.action.pickup_id))
            others = [i for i in range(len(obs.cloud.instances)) if i != pickup_row]
            row = others[int(rng.integers(0, len(others)))]
            masks.pick_mask = obs.cloud.instance_index == row
        return masks


class RandomValidPolicy(Policy):
    """Uniform choice among referee-valid actions; privileged baseline."""

    privileged = True
    name = "random-valid"

    def __init__(self, seed: int = 0):
        self.seed = seed

    def act(self, obs: StepObservation) -> ActionMaskPair:
        if goal_satisfied(obs.task, obs.state):
            return _empty_masks(obs.cloud, done=1.0)
        ctx = TaskEvalContext(obs.task, obs.state, obs.memory)
        actions: list[Action] = []
        for box in obs.state.boxes:
            if box.is_placed:
                continue
            for slot in ctx.open_slots:
                if ctx.rule_violation(box.color, slot) is not None:
                    continue
                if ctx.guard_violation(box.color, slot) is not None:
                    continue
                actions.append(Action(pickup_id=box.id, putdown=slot.target))
        if not actions:
            return _empty_masks(obs.cloud, done=1.0)
        rng = make_rng(self.seed, "random-valid", obs.episode_id, obs.step)
        action = actions[int(rng.integers(0, len(actions)))]
        return gt_action_masks(obs.cloud, action, done_probability=0.0)


def parse_policy_spec(spec: str, seed: int = 0) -> Policy:
    """Build a policy from its CLI spec string.

    Accepted forms: ``oracle``, ``noisy:<p>``, ``random-valid``,
    ``external:<command>``.
    """
    if spec == "oracle":
        return OraclePolicy()
    if spec == "random-valid":
        return RandomValidPolicy(seed=seed)
    if spec.startswith("noisy:"):
        return NoisyOraclePolicy(corruption=float(spec.split(":", 1)[1]), seed=seed)
    if spec.startswith("external:"):
        from .wire import ExternalPolicy

        return ExternalPolicy(command=spec.split(":", 1)[1])
    raise PalletBenchError(f"unknown policy spec {spec!r}")
