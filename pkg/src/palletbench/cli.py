"""Operator command line.

Subcommands: gen-scene, gen-dataset, oracle-rollout, evaluate, replay,
report.  Every run writes a reproducibility header (tool version, seed,
config digest) beside its outputs.  Exit codes: 0 ok, 2 policy protocol
violation, 3 runtime error, 64 usage, 65 validation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .encoding import canonical_digest, canonical_dumps
from .errors import PalletBenchError, ProtocolError
from .harness import (
    DecodeParams,
    EpisodeRecord,
    SuiteConfig,
    _record_from_dict,
    build_task_scene,
    evaluate_suite,
    replay_episode,
    run_episode,
)
from .metrics import ablation_delta, render_text, report_rows
from .oracle import oracle_rollout
from .perception import synthesize_cloud
from .scenegen import SceneConfig, generate_scene
from .tasks import ALL_VARIANTS, Variant, sample_task
from .world import ExecutionMode, scene_to_snapshot

EXIT_OK = 0
EXIT_PROTOCOL = 2
EXIT_RUNTIME = 3
EXIT_USAGE = 64
EXIT_VALIDATION = 65


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse default exits 2; we reserve that
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_run_header(out_dir: Path, args: argparse.Namespace, config_obj) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    header = {
        "tool_version": __version__,
        "command": args.command,
        "seed": getattr(args, "seed", None),
        "config_digest": canonical_digest(config_obj),
    }
    (out_dir / "run.json").write_text(canonical_dumps(header) + "\n")


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    text = Path(path).read_text()
    return json.loads(text)


def _modes(arg: str) -> tuple[ExecutionMode, ...]:
    if arg == "snap":
        return (ExecutionMode.SNAP,)
    if arg == "freeform":
        return (ExecutionMode.FREEFORM,)
    return (ExecutionMode.SNAP, ExecutionMode.FREEFORM)


def build_parser() -> _Parser:
    parser = _Parser(prog="palletbench", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", help="generate a scene snapshot (and optional cloud)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="SceneConfig JSON file; flags override")
    p.add_argument("--num-boxes", type=int)
    p.add_argument("--num-pallets", type=int)
    p.add_argument("--num-shelves", type=int)
    p.add_argument("--num-distractors", type=int)
    for kind in ("pallet-small", "pallet-large", "shelf-small", "shelf-large"):
        p.add_argument(f"--weight-{kind}", type=float, dest=f"weight_{kind.replace('-', '_')}")
    p.add_argument("--surface-region", nargs=4, type=float, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    p.add_argument("--object-region", nargs=4, type=float, metavar=("XMIN", "XMAX", "YMIN", "YMAX"))
    p.add_argument("--color-counts", nargs=3, type=int, metavar=("RED", "BLUE", "YELLOW"))
    p.add_argument("--no-require-capacity", action="store_true")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--cloud", action="store_true", help="also write a labeled cloud")
    p.add_argument("--cloud-ndjson", action="store_true", help="write the cloud in its NDJSON debug form")
    p.add_argument("--resolution", type=float, default=0.05)

    p = sub.add_parser("gen-dataset", help="emit a supervision dataset")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="DatasetConfig JSON file; flags override")
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--aux-rate", type=float)
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--resolution", type=float)
    p.add_argument("--min-boxes", type=int)
    p.add_argument("--max-boxes", type=int)
    p.add_argument("--variants", help="comma-separated variant names")
    p.add_argument("--out", required=True)

    p = sub.add_parser("oracle-rollout", help="print an oracle plan for one task")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", default="basic-placement", choices=[v.value for v in ALL_VARIANTS])
    p.add_argument("--num-boxes", type=int, default=5)
    p.add_argument("--goal-pool", default="train", choices=["train", "heldout"])
    p.add_argument("--out", help="optional output directory")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("evaluate", help="run a policy over the episode grid")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--policy", default="oracle", help="oracle | noisy:<p> | random-valid | external:<cmd>")
    p.add_argument("--mode", default="snap", choices=["snap", "freeform", "both"])
    p.add_argument("-n", "--n-scenes", type=int, default=200)
    p.add_argument("--variants", help="comma-separated variant names (default all 11)")
    p.add_argument("--resolution", type=float, default=0.05)
    p.add_argument("--min-boxes", type=int, default=1)
    p.add_argument("--max-boxes", type=int, default=30)
    p.add_argument("--heldout-goals", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--json", action="store_true", help="print the report JSON")
    p.add_argument("--out", required=True)

    p = sub.add_parser("replay", help="re-execute a logged episode and verify digests")
    p.add_argument("--records", required=True, help="episodes.json from an evaluate run")
    p.add_argument("--episode", type=int, default=None, help="episode id (default: all)")
    p.add_argument("--mode", default=None, help="restrict to one execution mode")

    p = sub.add_parser("report", help="render tables and figures from a report JSON")
    p.add_argument("--report", required=True)
    p.add_argument("--compare", help="second report; prints percentage-point deltas")
    p.add_argument("--out", required=True)
    p.add_argument("--json", action="store_true")
    return parser


def _cmd_gen_scene(args) -> int:
    base = _load_config_file(args.config)
    base.setdefault("seed", args.seed)
    base.setdefault("num_boxes", 5)
    for key in ("num_boxes", "num_pallets", "num_shelves", "num_distractors"):
        value = getattr(args, key)
        if value is not None:
            base[key] = value
    mix = dict(base.get("size_mix") or {})
    for kind in ("pallet-small", "pallet-large", "shelf-small", "shelf-large"):
        w = getattr(args, f"weight_{kind.replace('-', '_')}")
        if w is not None:
            mix[kind] = w
    if mix:
        base["size_mix"] = {**{k: 1.0 for k in ("pallet-small", "pallet-large", "shelf-small", "shelf-large")}, **mix}
    if args.surface_region:
        base["surface_region"] = args.surface_region
    if args.object_region:
        base["object_region"] = args.object_region
    if args.color_counts:
        base["color_counts"] = args.color_counts
    if args.no_require_capacity:
        base["require_capacity"] = False
    config = SceneConfig.from_dict(base)
    scene = generate_scene(config)
    out = Path(args.out)
    _write_run_header(out, args, config.to_dict())
    snapshot = scene_to_snapshot(scene)
    (out / "scene.json").write_text(canonical_dumps(snapshot) + "\n")
    if args.cloud or args.cloud_ndjson:
        cloud = synthesize_cloud(scene, args.resolution, seed=config.seed)
        if args.cloud:
            (out / "cloud.bin").write_bytes(cloud.to_bytes())
        if args.cloud_ndjson:
            (out / "cloud.ndjson").write_text(cloud.to_ndjson())
    print(f"scene written to {out / 'scene.json'} (digest {canonical_digest(snapshot)[:12]})")
    return EXIT_OK


def _cmd_gen_dataset(args) -> int:
    from .dataset import DatasetConfig, emit_dataset

    base = _load_config_file(args.config)
    base.setdefault("seed", args.seed)
    base.setdefault("episodes", args.episodes)
    for key in ("aux_rate", "test_fraction", "resolution", "min_boxes", "max_boxes"):
        value = getattr(args, key)
        if value is not None:
            base[key] = value
    if args.variants:
        base["variants"] = [v.strip() for v in args.variants.split(",")]
    config = DatasetConfig.from_dict(base)
    out = Path(args.out)
    _write_run_header(out, args, config.to_dict())
    manifest = emit_dataset(config, out)
    print(
        f"dataset written to {out}: "
        f"{manifest['counts']['action']} action / {manifest['counts']['auxiliary']} aux / "
        f"{manifest['counts']['terminal']} terminal samples"
    )
    return EXIT_OK


def _cmd_oracle_rollout(args) -> int:
    variant = Variant(args.variant)
    task = sample_task(variant, args.seed, pool=args.goal_pool)
    _, scene = build_task_scene(task, args.num_boxes, args.seed)
    rollout = oracle_rollout(task, scene)
    payload = {
        "task": task.to_dict(),
        "n_steps": len(rollout.steps),
        "steps": [
            {
                "action": s.choice.action.to_dict(),
                "distance": s.choice.distance,
                "candidates": s.choice.candidate_count,
            }
            for s in rollout.steps
        ],
    }
    if args.out:
        out = Path(args.out)
        _write_run_header(out, args, task.to_dict())
        (out / "rollout.json").write_text(canonical_dumps(payload) + "\n")
    if args.json:
        print(canonical_dumps(payload))
    else:
        print(f"goal: {task.goal_text}")
        for i, step in enumerate(payload["steps"]):
            print(f"  step {i}: {step['action']} (d={step['distance']:.3f}, {step['candidates']} candidates)")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    variants = (
        tuple(Variant(v.strip()) for v in args.variants.split(",")) if args.variants else ALL_VARIANTS
    )
    config = SuiteConfig(
        n_scenes=args.n_scenes,
        variants=variants,
        modes=_modes(args.mode),
        master_seed=args.seed,
        policy_spec=args.policy,
        resolution=args.resolution,
        min_boxes=args.min_boxes,
        max_boxes=args.max_boxes,
        template_pool="heldout" if args.heldout_goals else "train",
        workers=args.workers,
    )
    out = Path(args.out)
    _write_run_header(out, args, config.to_dict())
    report, by_mode = evaluate_suite(config)
    (out / "report.json").write_text(canonical_dumps(report) + "\n")
    records_payload = {
        mode: [rec.to_dict() for rec in recs] for mode, recs in sorted(by_mode.items())
    }
    (out / "episodes.json").write_text(canonical_dumps(records_payload) + "\n")
    text = render_text(report)
    (out / "report.txt").write_text(text)
    if args.json:
        print(canonical_dumps(report))
    else:
        print(text, end="")
    return EXIT_OK


def _cmd_replay(args) -> int:
    payload = json.loads(Path(args.records).read_text())
    total = verified = 0
    for mode, recs in sorted(payload.items()):
        if args.mode and mode != args.mode:
            continue
        for rec_dict in recs:
            if args.episode is not None and rec_dict["episode_id"] != args.episode:
                continue
            record = _record_from_dict(rec_dict)
            mismatches = replay_episode(record)
            total += 1
            if mismatches:
                print(f"episode {record.episode_id} [{mode}]: MISMATCH: {mismatches[0]}")
            else:
                verified += 1
                print(f"episode {record.episode_id} [{mode}]: verified")
    if total == 0:
        print("no matching episodes", file=sys.stderr)
        return EXIT_VALIDATION
    if verified != total:
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_report(args) -> int:
    from .plots import render_report_figures

    report = json.loads(Path(args.report).read_text())
    out = Path(args.out)
    _write_run_header(out, args, report.get("suite_config", {}))
    text = render_text(report)
    (out / "report.txt").write_text(text)
    rows = report_rows(report)
    (out / "report.csv").write_text("\n".join(",".join(row) for row in rows) + "\n")
    figures = render_report_figures(report, out / "figures")
    if args.compare:
        other = json.loads(Path(args.compare).read_text())
        delta = ablation_delta(report, other)
        (out / "delta.json").write_text(canonical_dumps(delta) + "\n")
        print("percentage-point deltas (this - other):")
        for key, value in delta.items():
            print(f"  {key}: {value:+.2f}")
    if args.json:
        print(canonical_dumps({"figures": [str(f) for f in figures]}))
    else:
        print(text, end="")
        print(f"figures: {', '.join(f.name for f in figures)}")
    return EXIT_OK


_COMMANDS = {
    "gen-scene": _cmd_gen_scene,
    "gen-dataset": _cmd_gen_dataset,
    "oracle-rollout": _cmd_oracle_rollout,
    "evaluate": _cmd_evaluate,
    "replay": _cmd_replay,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ProtocolError as e:
        print(f"protocol violation: {e}", file=sys.stderr)
        return EXIT_PROTOCOL
    except PalletBenchError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:  # pragma: no cover - defensive
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
