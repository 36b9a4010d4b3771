"""Supervision dataset emission and the consuming loader.

On-disk layout (all JSON canonical, all files digest-tracked):

    out/
      manifest.json
      episodes/ep-00000/
        scene.json            initial scene snapshot
        clouds/step-000.bin   binary labeled cloud per snapshot
        samples.ndjson        one sample object per line

Per oracle step one action sample is emitted; with probability ``aux_rate``
an auxiliary sample (one of the five scene predicates) shares the snapshot;
each episode ends with a terminal sample whose done probability is 1.  The
test split is disjoint by scene.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .encoding import SCHEMA_VERSION, bytes_digest, canonical_dumps, mask_to_rle
from .errors import CorruptSampleError, DatasetError, SchemaMismatchError
from .camera import camera_rig
from .harness import build_task_scene
from .oracle import oracle_rollout
from .perception import AUX_PREDICATES, LabeledPointCloud, aux_predicate_mask, gt_action_masks, synthesize_cloud
from .rng import derive_seed, make_rng
from .tasks import ALL_VARIANTS, Variant, sample_task
from .world import scene_to_snapshot

GROUNDING_SUFFIX = "selected pickup box, selected putdown object"

# Fixed instruction texts for the five auxiliary scene queries.
AUX_INSTRUCTIONS = {
    "free-cells": "Identify all free placement cells.",
    "placed-boxes": "Identify all placed boxes.",
    "stacked-boxes": "Identify boxes in stacks.",
    "accessible-boxes": "Identify accessible boxes.",
    "unplaced-boxes": "Identify all unplaced boxes.",
}

DEFAULT_AUX_RATE = 0.10
DEFAULT_TEST_FRACTION = 0.23  # reproduces the 2.2K / 9.5K holdout ratio


@dataclass(frozen=True)
class DatasetConfig:
    episodes: int
    seed: int
    aux_rate: float = DEFAULT_AUX_RATE
    test_fraction: float = DEFAULT_TEST_FRACTION
    resolution: float = 0.05
    variants: tuple[Variant, ...] = ALL_VARIANTS
    min_boxes: int = 2
    max_boxes: int = 10
    num_distractors_max: int = 2
    template_pool: str = "train"

    def to_dict(self) -> dict:
        return {
            "episodes": self.episodes,
            "seed": self.seed,
            "aux_rate": self.aux_rate,
            "test_fraction": self.test_fraction,
            "resolution": self.resolution,
            "variants": [v.value for v in self.variants],
            "min_boxes": self.min_boxes,
            "max_boxes": self.max_boxes,
            "num_distractors_max": self.num_distractors_max,
            "template_pool": self.template_pool,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetConfig":
        d = dict(d)
        d["variants"] = tuple(Variant(v) for v in d.get("variants", [v.value for v in ALL_VARIANTS]))
        return cls(**d)


class Paraphraser:
    """External text-transformation endpoint: text in, up to 3 variants out."""

    def expand(self, text: str) -> list[str]:  # pragma: no cover - interface
        raise NotImplementedError


class SubprocessParaphraser(Paraphraser):
    """Paraphrase provider over a request/response byte stream.

    One JSON object per line on the child's stdin/stdout:
    {"text": ...} -> {"variants": ["...", ...]} (at most 3 are used).
    """

    def __init__(self, command: str):
        import shlex
        import subprocess

        self._proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )

    def expand(self, text: str) -> list[str]:
        assert self._proc.stdin is not None and self._proc.stdout is not None
        self._proc.stdin.write(json.dumps({"text": text}) + "\n")
        self._proc.stdin.flush()
        line = self._proc.stdout.readline()
        if not line:
            raise DatasetError("paraphrase provider closed its stream")
        reply = json.loads(line)
        return list(reply.get("variants", []))

    def close(self) -> None:
        if self._proc.stdin is not None:
            self._proc.stdin.close()
        self._proc.wait(timeout=5)


def apply_paraphrase_hook(sample: dict, provider: Paraphraser | None) -> list[dict]:
    """Augmented copies of a sample sharing every field except the goal text.

    Without a provider this is an identity passthrough with a recorded flag;
    provider failures keep the sample unaugmented and flag it.
    """
    base_goal = sample["goal_text"]
    if base_goal.endswith(" " + GROUNDING_SUFFIX):
        base_goal = base_goal[: -len(" " + GROUNDING_SUFFIX)]
    if provider is None:
        sample["paraphrase_status"] = "no-provider"
        return []
    try:
        variants = provider.expand(base_goal)[:3]
    except Exception:
        sample["paraphrase_status"] = "provider-failure"
        return []
    out = []
    for i, text in enumerate(variants):
        if not isinstance(text, str) or not text.strip():
            sample["paraphrase_status"] = "provider-rejected"
            continue
        copy = dict(sample)
        copy["sample_id"] = f"{sample['sample_id']}-p{i}"
        copy["goal_text"] = f"{text.strip()} {GROUNDING_SUFFIX}"
        copy["paraphrase_of"] = sample["sample_id"]
        out.append(copy)
    sample.setdefault("paraphrase_status", "ok")
    return out


def emit_dataset(
    config: DatasetConfig, out_dir: str | Path, provider: Paraphraser | None = None
) -> dict:
    """Generate and write the dataset; returns the manifest dict."""
    out = Path(out_dir)
    if (out / "manifest.json").exists() or (out / "episodes").exists():
        raise DatasetError(f"output directory {out} already holds a dataset")
    (out / "episodes").mkdir(parents=True, exist_ok=True)

    counts = {"action": 0, "auxiliary": 0, "terminal": 0, "paraphrase": 0}
    splits: dict[str, list[str]] = {"train": [], "test": []}
    episodes_meta: list[dict] = []
    file_digests: dict[str, str] = {}

    rig = [
        {"intrinsics": intr.to_dict(), "cam_to_world": [[float(x) for x in row] for row in pose]}
        for intr, pose in camera_rig()
    ]

    for ep in range(config.episodes):
        variant = config.variants[ep % len(config.variants)]
        task = sample_task(variant, derive_seed(config.seed, "task", ep), pool=config.template_pool)
        ep_rng = make_rng(config.seed, "episode", ep)
        n_boxes = int(ep_rng.integers(config.min_boxes, config.max_boxes + 1))
        n_distractors = int(ep_rng.integers(0, config.num_distractors_max + 1))
        scene_cfg, scene = build_task_scene(
            task, n_boxes, derive_seed(config.seed, "scene", ep), num_distractors=n_distractors
        )
        rollout = oracle_rollout(task, scene)
        split = "test" if make_rng(config.seed, "split", ep).random() < config.test_fraction else "train"

        ep_id = f"ep-{ep:05d}"
        ep_dir = out / "episodes" / ep_id
        (ep_dir / "clouds").mkdir(parents=True)
        ep_files: dict[str, str] = {}

        scene_bytes = (canonical_dumps(scene_to_snapshot(scene)) + "\n").encode()
        (ep_dir / "scene.json").write_bytes(scene_bytes)
        ep_files["scene.json"] = bytes_digest(scene_bytes)

        goal = f"{task.goal_text} {GROUNDING_SUFFIX}"
        aux_rng = make_rng(config.seed, "aux", ep)
        sample_lines: list[str] = []

        def write_cloud(step_idx: int, cloud: LabeledPointCloud) -> str:
            rel = f"clouds/step-{step_idx:03d}.bin"
            data = cloud.to_bytes()
            (ep_dir / rel).write_bytes(data)
            ep_files[rel] = bytes_digest(data)
            return rel

        def add_sample(sample: dict) -> None:
            kind = sample["kind"]
            counts["action" if kind == "action" else "auxiliary" if kind == "auxiliary" else "terminal"] += 1
            sample_lines.append(canonical_dumps(sample))
            for extra in apply_paraphrase_hook(sample, provider):
                counts["paraphrase"] += 1
                sample_lines.append(canonical_dumps(extra))

        for t, step in enumerate(rollout.steps):
            cloud = synthesize_cloud(
                step.state, config.resolution, seed=derive_seed(config.seed, "cloud", ep, t)
            )
            cloud_ref = write_cloud(t, cloud)
            masks = gt_action_masks(cloud, step.choice.action)
            add_sample(
                {
                    "sample_id": f"{ep_id}-s{t:03d}-action",
                    "episode": ep_id,
                    "step": t,
                    "kind": "action",
                    "split": split,
                    "goal_text": goal,
                    "cloud_ref": cloud_ref,
                    "point_count": len(cloud),
                    "pick_mask_rle": mask_to_rle(masks.pick_mask),
                    "target_mask_rle": mask_to_rle(masks.target_mask),
                    "done_probability": 0.0,
                    "action": step.choice.action.to_dict(),
                    "oracle_distance": step.choice.distance,
                }
            )
            if aux_rng.random() < config.aux_rate:
                predicate = AUX_PREDICATES[int(aux_rng.integers(0, len(AUX_PREDICATES)))]
                mask = aux_predicate_mask(cloud, step.state, predicate)
                add_sample(
                    {
                        "sample_id": f"{ep_id}-s{t:03d}-aux",
                        "episode": ep_id,
                        "step": t,
                        "kind": "auxiliary",
                        "split": split,
                        "predicate": predicate,
                        "goal_text": f"{AUX_INSTRUCTIONS[predicate]} {GROUNDING_SUFFIX}",
                        "cloud_ref": cloud_ref,
                        "point_count": len(cloud),
                        "answer_mask_rle": mask_to_rle(mask),
                        "done_probability": 0.0,
                    }
                )

        t_final = len(rollout.steps)
        final_cloud = synthesize_cloud(
            rollout.final_state, config.resolution, seed=derive_seed(config.seed, "cloud", ep, t_final)
        )
        cloud_ref = write_cloud(t_final, final_cloud)
        add_sample(
            {
                "sample_id": f"{ep_id}-s{t_final:03d}-terminal",
                "episode": ep_id,
                "step": t_final,
                "kind": "terminal",
                "split": split,
                "goal_text": goal,
                "cloud_ref": cloud_ref,
                "point_count": len(final_cloud),
                "done_probability": 1.0,
            }
        )

        samples_bytes = ("\n".join(sample_lines) + "\n").encode()
        (ep_dir / "samples.ndjson").write_bytes(samples_bytes)
        ep_files["samples.ndjson"] = bytes_digest(samples_bytes)

        splits[split].append(ep_id)
        episodes_meta.append(
            {
                "id": ep_id,
                "variant": variant.value,
                "n_boxes": n_boxes,
                "n_steps": len(rollout.steps),
                "split": split,
                "task": task.to_dict(),
                "scene_config": scene_cfg.to_dict(),
                "files": ep_files,
            }
        )
        for rel, digest in ep_files.items():
            file_digests[f"episodes/{ep_id}/{rel}"] = digest

    manifest = {
        "schema_version": SCHEMA_VERSION,
        "config": config.to_dict(),
        "grounding_suffix": GROUNDING_SUFFIX,
        "camera_rig": rig,
        "counts": {**counts, "total": sum(counts.values())},
        "splits": splits,
        "episodes": episodes_meta,
        "file_digests": file_digests,
    }
    (out / "manifest.json").write_bytes((canonical_dumps(manifest) + "\n").encode())
    return manifest


@dataclass
class LoadedDataset:
    root: Path
    manifest: dict
    _samples: list[dict] = field(default_factory=list)

    @property
    def counts(self) -> dict:
        return self.manifest["counts"]

    def samples(self):
        return iter(self._samples)

    def sample_count(self) -> int:
        return len(self._samples)

    def load_cloud(self, sample: dict) -> LabeledPointCloud:
        path = self.root / "episodes" / sample["episode"] / sample["cloud_ref"]
        return LabeledPointCloud.from_bytes(path.read_bytes())


def load_dataset(path: str | Path, verify_digests: bool = True) -> LoadedDataset:
    """Schema-validating loader; raises on version or integrity mismatches."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"no manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise SchemaMismatchError(
            f"dataset schema {manifest.get('schema_version')!r}, supported {SCHEMA_VERSION!r}"
        )
    ds = LoadedDataset(root=root, manifest=manifest)
    counted = {"action": 0, "auxiliary": 0, "terminal": 0, "paraphrase": 0}
    for ep_meta in manifest["episodes"]:
        ep_dir = root / "episodes" / ep_meta["id"]
        for rel, digest in ep_meta["files"].items():
            fp = ep_dir / rel
            if not fp.exists():
                raise CorruptSampleError(f"missing file {fp}")
            if verify_digests and bytes_digest(fp.read_bytes()) != digest:
                raise CorruptSampleError(f"digest mismatch for {fp}")
        for line in (ep_dir / "samples.ndjson").read_text().splitlines():
            sample = json.loads(line)
            if "paraphrase_of" in sample:
                counted["paraphrase"] += 1
            else:
                counted[sample["kind"]] += 1
            ds._samples.append(sample)
    for key, n in counted.items():
        if manifest["counts"].get(key, 0) != n:
            raise CorruptSampleError(f"count mismatch for {key}: manifest {manifest['counts'].get(key)} vs {n}")
    return ds
