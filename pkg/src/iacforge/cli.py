"""Command-line entry point.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any

from .errors import IacForgeError, LlmUnavailable
from .config import ToolConfig, load_config

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

log = logging.getLogger("iacforge")


class _Usage(Exception):
    pass


def _emit(args: argparse.Namespace, doc: Any, human: str) -> None:
    if args.json:
        sys.stdout.write(json.dumps(doc, sort_keys=True, ensure_ascii=False) + "\n")
    else:
        sys.stdout.write(human.rstrip("\n") + "\n")


def _read(path: str) -> str:
    p = Path(path)
    if not p.is_file():
        raise _Usage(f"no such file: {path}")
    return p.read_text(encoding="utf-8")


def _read_config_arg(path: str) -> str:
    """A .tf file, or a module directory whose .tf files are concatenated."""
    from .hcl import concat_module

    p = Path(path)
    if p.is_dir():
        files = [(f.name, f.read_text(encoding="utf-8")) for f in sorted(p.glob("*.tf"))]
        if not files:
            raise _Usage(f"no .tf files in {path}")
        return concat_module(files)
    return _read(path)


def _load_policy(path: str):
    from .policy import load_policy

    if not Path(path).is_file():
        raise _Usage(f"no such file: {path}")
    return load_policy(path)


def _llm(cfg: ToolConfig, args: argparse.Namespace):
    from .repair.llm import HttpChatClient, ReplayClient, RecordingClient

    if getattr(args, "replay", None):
        return ReplayClient(args.replay)
    if not cfg.llm_url:
        raise _Usage("no LLM endpoint configured (set llm_url or IACFORGE_LLM_URL, or pass --replay)")
    client = HttpChatClient(cfg.llm_url, cfg.llm_model)
    if getattr(args, "record", None):
        return RecordingClient(client, args.record)
    return client


def _params(cfg: ToolConfig):
    from .repair.llm import GenerationParams

    return GenerationParams(cfg.temperature, cfg.max_tokens, cfg.llm_model)


# ---------------------------------------------------------------- commands


def cmd_validate(args, cfg) -> int:
    oracles = cfg.build_oracles()
    report, _ = oracles.compile(_read_config_arg(args.path))
    _emit(args, report.to_dict(), ("PASS" if report.passed else "FAIL") + "\n" + report.certificate())
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_plan(args, cfg) -> int:
    oracles = cfg.build_oracles()
    report, doc = oracles.deploy(_read_config_arg(args.path))
    body = report.to_dict()
    if doc is not None:
        body["plan"] = doc.to_dict()
        if args.out:
            Path(args.out).write_text(doc.to_json() + "\n", encoding="utf-8")
    human = ("PASS" if report.passed else "FAIL") + "\n" + report.certificate()
    if doc is not None:
        human += f"\n{len(doc.resources)} resources, {len(doc.edges)} edges, providers: {', '.join(sorted(doc.providers))}"
    _emit(args, body, human)
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_policy_eval(args, cfg) -> int:
    from .verify import PlanDocument

    oracles = cfg.build_oracles()
    policy = _load_policy(args.policy)
    if args.plan:
        doc = PlanDocument.from_dict(json.loads(_read(args.plan)))
    else:
        report, doc = oracles.deploy(_read_config_arg(args.config))
        if not report.passed:
            _emit(args, report.to_dict(), "FAIL (configuration does not plan)\n" + report.certificate())
            return EXIT_FAILED
    results = oracles.comply(policy, doc)
    human = results.certificate()
    _emit(args, results.to_dict() | {"passed": results.passed}, human)
    return EXIT_OK if results.passed else EXIT_FAILED


def cmd_reward(args, cfg) -> int:
    from .reward import compute_reward

    breakdown = compute_reward(_read_config_arg(args.config), _load_policy(args.policy), cfg.build_oracles())
    human = f"reward {breakdown.reward:g} ({breakdown.tier.value}, {breakdown.rules_passed}/{breakdown.rules_total} rules)"
    _emit(args, breakdown.to_dict(), human)
    return EXIT_OK


def cmd_repair(args, cfg) -> int:
    from .repair.loop import Outcome, RepairStage, run_repair_loop
    from .repair.templates import example_slots

    oracles = cfg.build_oracles()
    stage = RepairStage(args.stage)
    text = _read_config_arg(args.path)
    if stage == RepairStage.FV1:
        verifier = lambda a: oracles.compile(a)[0]  # noqa: E731
    elif stage == RepairStage.FV2:
        verifier = lambda a: oracles.deploy(a)[0]  # noqa: E731
    else:
        raise _Usage("repair supports --stage FV1 or FV2")
    try:
        transcript = run_repair_loop(
            text, verifier, _llm(cfg, args), cfg.max_turns, stage=stage, slots=example_slots(), params=_params(cfg)
        )
    except LlmUnavailable as exc:
        if args.transcript and exc.transcript is not None:
            Path(args.transcript).write_text(exc.transcript.to_json() + "\n", encoding="utf-8")
        raise
    if args.transcript:
        Path(args.transcript).write_text(transcript.to_json() + "\n", encoding="utf-8")
    if args.out and transcript.outcome != Outcome.EXHAUSTED:
        Path(args.out).write_text(transcript.final_artifact.rstrip("\n") + "\n", encoding="utf-8")
    _emit(
        args,
        {"outcome": transcript.outcome.value, "turns_used": transcript.turns_used},
        f"{transcript.outcome.value} after {transcript.turns_used} turn(s)",
    )
    return EXIT_FAILED if transcript.outcome == Outcome.EXHAUSTED else EXIT_OK


def cmd_curate(args, cfg) -> int:
    from .curate import SplitSpec, ingest, ingest_manifest, run_curation

    modules = ingest_manifest(args.manifest) if args.manifest else ingest(args.tree)
    stats = run_curation(
        modules,
        _llm(cfg, args),
        args.out,
        kind=args.kind,
        spec=SplitSpec(cfg.seed, args.test_size),
        oracles=cfg.build_oracles(),
        max_turns=cfg.max_turns,
        workers=cfg.workers,
        params=_params(cfg),
    )
    lines = [f"{name}: {row['n']} records" for name, row in stats.items() if isinstance(row, dict) and "n" in row]
    lines.append(f"dropped: {sum(stats.get('drops', {}).values())}")
    _emit(args, stats, "\n".join(lines))
    return EXIT_OK


def cmd_split(args, cfg) -> int:
    from .curate import SplitSpec, load_records, split, write_jsonl

    records = load_records(args.records)
    train, test = split(records, SplitSpec(cfg.seed, args.test_size))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.records).name.split(".")[0]
    write_jsonl(out / f"{stem}.train.jsonl", train)
    write_jsonl(out / f"{stem}.test.jsonl", test)
    _emit(args, {"train": len(train), "test": len(test)}, f"train {len(train)}, test {len(test)}")
    return EXIT_OK


def cmd_eval(args, cfg) -> int:
    from .evalharness import external_adapters_from_env, run_benchmark

    linter, scanner = external_adapters_from_env()
    report = run_benchmark(
        args.dataset, args.candidates, args.out, oracles=cfg.build_oracles(), workers=cfg.workers,
        linter=linter, scanner=scanner,
    )
    _emit(args, report.to_dict(), report.render())
    return EXIT_OK


def cmd_mutation_stats(args, cfg) -> int:
    import csv

    from .analysis import classify_mutation, complexity_distribution
    from .curate import MutnRecord, load_records

    records = [r for r in load_records(args.records) if isinstance(r, MutnRecord)]
    points = [float(x) for x in args.cdf.split(",")] if args.cdf else [160.0, 1200.0]
    summary = complexity_distribution(records, points)
    doc = summary.to_dict()
    out = Path(args.out) if args.out else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
        (out / "complexity.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if args.csv:
            with open(out / "distances.csv", "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["id", "distance", "class"])
                for rec, d in zip(records, summary.distances):
                    writer.writerow([rec.id, d, classify_mutation(d).value])
    human = "\n".join(f"{k}: {summary.counts[k]} ({summary.percentages[k]:.2f}%)" for k in summary.counts)
    _emit(args, doc, human)
    return EXIT_OK


def cmd_serve(args, cfg) -> int:
    import os

    from .service import serve

    serve(cfg, host=args.host, token=os.environ.get("IACFORGE_SERVICE_TOKEN"))
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config-file", help="path to iacforge.toml")
    common.add_argument("--backend", choices=["builtin", "external"])
    common.add_argument("--max-turns", type=int)
    common.add_argument("--timeout-secs", type=float)
    common.add_argument("--workers", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--json", action="store_true", help="machine-readable JSON on stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="iacforge", description="Verifier-guided Terraform tooling.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="compilability check (FV1)")
    p.add_argument("path", help=".tf file or module directory")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plan", parents=[common], help="deployability check (FV2)")
    p.add_argument("path")
    p.add_argument("--out", help="write the plan document JSON here")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("policy-eval", parents=[common], help="evaluate a policy (FV3)")
    p.add_argument("--policy", required=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config")
    src.add_argument("--plan", help="plan document JSON")
    p.set_defaults(func=cmd_policy_eval)

    p = sub.add_parser("reward", parents=[common], help="tiered reward for a candidate")
    p.add_argument("--config", required=True)
    p.add_argument("--policy", required=True)
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("repair", parents=[common], help="run the LLM repair loop on a configuration")
    p.add_argument("path")
    p.add_argument("--stage", default="FV2", choices=["FV1", "FV2"])
    p.add_argument("--out", help="write the repaired configuration here")
    p.add_argument("--transcript", help="write the transcript JSON here")
    p.add_argument("--replay", help="serve LLM responses from a replay log")
    p.add_argument("--record", help="append LLM exchanges to a replay log")
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("curate", parents=[common], help="build TF-Gen or TF-Mutn records")
    p.add_argument("kind", choices=["gen", "mutn"])
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--tree", help="directory whose subdirectories are repositories")
    src.add_argument("--manifest", help="CSV of repo_id,path")
    p.add_argument("--out", required=True)
    p.add_argument("--test-size", type=int, default=0)
    p.add_argument("--replay")
    p.add_argument("--record")
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("split", parents=[common], help="repository-disjoint train/test split")
    p.add_argument("records")
    p.add_argument("--test-size", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("eval", parents=[common], help="score candidates against a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--candidates", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mutation-stats", parents=[common], help="edit-distance complexity of mutation records")
    p.add_argument("records")
    p.add_argument("--out")
    p.add_argument("--cdf", help="comma-separated distances at which to sample the CDF")
    p.add_argument("--csv", action="store_true", help="also write per-record distances")
    p.set_defaults(func=cmd_mutation_stats)

    p = sub.add_parser("serve", parents=[common], help="run the HTTP reward service")
    p.add_argument("--port", type=int)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config_file).with_overrides(
            backend=args.backend,
            max_turns=args.max_turns,
            timeout_secs=args.timeout_secs,
            workers=args.workers,
            seed=args.seed,
            port=getattr(args, "port", None),
        )
        return args.func(args, cfg)
    except _Usage as exc:
        print(f"iacforge: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LlmUnavailable as exc:
        print(f"iacforge: LLM unavailable: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IacForgeError as exc:
        print(f"iacforge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
