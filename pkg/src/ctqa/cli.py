"""Command-line entry point.

Subcommands: synth, qa, report, eval, corpus build, serve. All honor
--config; exit code 0 on success, 1 on engine errors, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .build import build_engine
from .config import EngineConfig
from .errors import CtqaError
from .evaluation import AbnormalityLexicon, default_lexicon, metrics_report
from .features import generate_synthetic_volume, load_volume, save_volume
from .memory import HttpEmbeddingClient, MockEmbedder, RegionSplitter, build_corpus


def _load_config(args) -> EngineConfig:
    if getattr(args, "config", None):
        cfg = EngineConfig.from_file(args.config)
    else:
        cfg = EngineConfig.from_dict({})
    if getattr(args, "mock", False):
        cfg.mock = True
    return cfg


def _cmd_synth(args) -> int:
    vf = generate_synthetic_volume(
        seed=args.seed, T=args.slices, N=args.tokens, d=args.dim,
        H=args.heads, d_k=args.key_dim, study_id=Path(args.out).stem,
    )
    save_volume(vf, args.out)
    print(f"wrote {args.out}: T={vf.T} N={vf.N} d={vf.d} H={vf.H} d_k={vf.d_k}")
    return 0


def _engine_for_study(args):
    cfg = _load_config(args)
    study_path = Path(args.study)
    if study_path.is_file():
        vf = load_volume(study_path)
        engine = build_engine(cfg, feature_dim=vf.d)
        engine.studies.put(vf)
        return engine, vf.study_id
    engine = build_engine(cfg)
    return engine, args.study  # assume an id resolvable via the config's study_dir


def _cmd_qa(args) -> int:
    engine, study_id = _engine_for_study(args)
    result = engine.run_qa(args.question, study_id, session=args.session)
    print(f"region: {', '.join(r.value for r in result.regions)}")
    print(f"trace:  {result.trace_id}")
    print(result.answer)
    return 0


def _cmd_report(args) -> int:
    engine, study_id = _engine_for_study(args)
    result = engine.run_report(study_id, session=args.session)
    print(f"trace: {result.trace_id}  exemplars: {len(result.exemplars)}")
    for finding in result.findings:
        print(f"  {finding.region.value}: {finding.statement}")
    print(result.report)
    return 0


def _cmd_eval(args) -> int:
    lexicon = AbnormalityLexicon.from_file(args.lexicon) if args.lexicon else default_lexicon()
    pairs = []
    with open(args.pairs, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            pairs.append((row["generated"], row["reference"]))
    report = metrics_report(pairs, lexicon)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def _cmd_corpus_build(args) -> int:
    cfg = _load_config(args)
    reports = []
    with open(args.reports, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                reports.append(json.loads(line)["report"])
    if cfg.mock or not cfg.embedder_endpoint:
        embedder = MockEmbedder(dim=cfg.embedder_dim, seed=cfg.seed)
    else:
        embedder = HttpEmbeddingClient(cfg.embedder_endpoint, dim=cfg.embedder_dim)
    result = build_corpus(reports, RegionSplitter(), embedder)
    result.store.save(args.out)
    print(
        f"wrote {args.out}: {result.accepted} records "
        f"({result.skipped_unsplittable} unsplittable, {result.skipped_embedding} embed failures)"
    )
    return 0


def _cmd_serve(args) -> int:
    from .service import serve

    cfg = _load_config(args)
    if args.host:
        cfg.host = args.host
    if args.port:
        cfg.port = args.port
    serve(cfg)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctqa", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic feature volume")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--slices", "-T", type=int, default=4)
    p.add_argument("--tokens", "-N", type=int, default=16)
    p.add_argument("--dim", "-d", type=int, default=32)
    p.add_argument("--heads", "-H", type=int, default=4)
    p.add_argument("--key-dim", type=int, default=32)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_synth)

    for name, func in (("qa", _cmd_qa), ("report", _cmd_report)):
        p = sub.add_parser(name, help=f"run a {name} episode")
        p.add_argument("--study", required=True, help="CTFV file or study id")
        if name == "qa":
            p.add_argument("--question", required=True)
        p.add_argument("--session", default="cli")
        p.add_argument("--config")
        p.add_argument("--mock", action="store_true", help="force the offline mock stack")
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="score generated/reference pairs")
    p.add_argument("--pairs", required=True, help="JSONL of {generated, reference}")
    p.add_argument("--lexicon", help="JSON {category: [aliases]}; default built-in")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("corpus", help="exemplar corpus operations")
    corpus_sub = p.add_subparsers(dest="corpus_command", required=True)
    pb = corpus_sub.add_parser("build", help="build a CTES store from reports")
    pb.add_argument("--reports", required=True, help="JSONL of {report}")
    pb.add_argument("--out", required=True)
    pb.add_argument("--config")
    pb.add_argument("--mock", action="store_true")
    pb.set_defaults(func=_cmd_corpus_build)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--mock", action="store_true")
    p.set_defaults(func=_cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CtqaError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
