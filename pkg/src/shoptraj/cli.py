"""Command-line entry point: synth, augment, translate, eval, validate, serve, fixtures."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .config import ConfigError, SplitSpec, config_from_dict, load_config
from .gateway import BackendConfig, Gateway

log = logging.getLogger("shoptraj")

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


def bundled_map_path(name: str) -> str:
    """Resolve 'seen'/'unseen' shorthands to the bundled fixture maps."""
    if name in ("seen", "unseen"):
        return str(resources.files("shoptraj.data.maps").joinpath(f"{name}.json"))
    return name


def _add_backend_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--fixture-dir", help="mock backend fixture directory")
    parser.add_argument("--endpoint", help="live backend chat-completion URL")
    parser.add_argument("--model", default="mock-model", help="model name")
    parser.add_argument("--api-key-env", help="environment variable holding the API key")


def _backend_from_args(args: argparse.Namespace) -> BackendConfig:
    if args.fixture_dir:
        return BackendConfig(kind="mock", fixture_dir=args.fixture_dir, model_name=args.model)
    if args.endpoint:
        return BackendConfig(
            kind="live",
            endpoint=args.endpoint,
            api_key_env=args.api_key_env or "SHOPTRAJ_API_KEY",
            model_name=args.model,
        )
    raise ConfigError("provide either --fixture-dir (mock) or --endpoint (live)")


def cmd_synth(args: argparse.Namespace) -> int:
    from .pipeline import synth

    try:
        if args.config:
            overrides = {
                "n_samples": args.n,
                "paraphrases": args.paraphrases,
                "seed": args.seed,
                "out_dir": args.out,
                "map_path": bundled_map_path(args.map) if args.map else None,
            }
            config = load_config(args.config, overrides)
        else:
            if not args.map:
                raise ConfigError("--map is required without a config file")
            n = args.n if args.n is not None else 80
            if args.train is not None:
                split = {"train": args.train, "val": args.val or (n - args.train)}
            else:
                split = 0.8
            config = config_from_dict(
                {
                    "map_path": bundled_map_path(args.map),
                    "backend": vars(_backend_from_args(args)),
                    "n_samples": n,
                    "split": split,
                    "paraphrases": args.paraphrases or 0,
                    "seed": args.seed or 0,
                    "out_dir": args.out or "out",
                }
            )
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    result = synth(config)
    log.info("manifest: %s", json.dumps(result.manifest["counts"]))
    return EXIT_PARTIAL if result.failures else EXIT_OK


def cmd_fixtures(args: argparse.Namespace) -> int:
    from .mockdata import build_mock_corpus
    from .storemap import load_map_file

    store = load_map_file(bundled_map_path(args.map))
    ks = tuple(int(k) for k in args.paraphrases.split(",")) if args.paraphrases else (2, 4, 8)
    summary = build_mock_corpus(store, args.out, n=args.n, paraphrase_ks=ks, seed=args.seed)
    log.info("wrote %d fixture files to %s", summary.files_written, args.out)
    return EXIT_OK


def cmd_augment(args: argparse.Namespace) -> int:
    from .augment import augment_dataset
    from .translate import read_dataset, write_dataset

    try:
        gateway = Gateway(_backend_from_args(args))
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    records = read_dataset(args.dataset)
    out = augment_dataset(gateway, records, args.k)
    write_dataset(out, args.out)
    log.info("wrote %d records to %s", len(out), args.out)
    return EXIT_OK


def cmd_translate(args: argparse.Namespace) -> int:
    from .storemap import load_map_file
    from .translate import build_record, read_trajectories, write_dataset

    store = load_map_file(bundled_map_path(args.map))
    trajs = read_trajectories(args.trajectories)
    captions = {}
    with open(args.captions, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                doc = json.loads(line)
                captions[doc["caption_id"]] = doc["caption"]
    records = []
    for traj in trajs:
        caption = captions.get(traj.caption_id)
        if caption is None:
            log.warning("no caption for trajectory %s; skipped", traj.caption_id)
            continue
        records.append(
            build_record(traj, caption, store, threshold=args.threshold, sample_id=traj.caption_id)
        )
    write_dataset(records, args.out)
    log.info("wrote %d records to %s", len(records), args.out)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    from .evaluation import (
        AblationMode,
        apply_ablation,
        evaluate,
        format_table,
        report_rows,
        ExternalScorer,
    )
    from .storemap import load_map_file
    from .translate import build_record, read_dataset, read_trajectories

    records = read_dataset(args.dataset)
    with open(args.hyps, "r", encoding="utf-8") as fh:
        hyps = [line.rstrip("\n") for line in fh if line.strip()]
    if len(hyps) != len(records):
        log.error("alignment mismatch: %d hypotheses vs %d records", len(hyps), len(records))
        return EXIT_CONFIG
    refs = [r.reference_caption for r in records]
    scorer = ExternalScorer(args.scorer.split()) if args.scorer else None

    rows = [report_rows("base", evaluate(hyps, refs, external_scorer=scorer))]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    regenerated: dict[str, list[str]] = {}
    for spec in args.ablate or []:
        mode = AblationMode.parse(spec)
        rng = np.random.default_rng(args.seed)
        if mode.mode == "noise":
            if not (args.trajectories and args.map):
                log.error("noise ablation needs --trajectories and --map")
                return EXIT_CONFIG
            store = load_map_file(bundled_map_path(args.map))
            trajs = apply_ablation(read_trajectories(args.trajectories), mode, rng, store)
            captions = {r.sample_id: r.reference_caption for r in records}
            ablated = [
                build_record(t, captions.get(t.caption_id, "-"), store, sample_id=t.caption_id)
                for t in trajs
            ]
        else:
            ablated = apply_ablation(records, mode, rng)
        regenerated[mode.label] = [r.input_text for r in ablated]
        rows.append(report_rows(mode.label, evaluate(hyps, refs, external_scorer=scorer)))

    report = {"rows": rows, "n_pairs": len(hyps)}
    with open(out_dir / "report.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report, fh, sort_keys=True, indent=2)
        fh.write("\n")
    table = format_table(rows)
    (out_dir / "report.txt").write_text(table, encoding="utf-8")
    for label, inputs in regenerated.items():
        safe = label.replace("/", "").replace("%", "pct").replace(" ", "_")
        with open(out_dir / f"inputs_{safe}.jsonl", "w", encoding="utf-8", newline="\n") as fh:
            for text in inputs:
                fh.write(json.dumps({"input_text": text}, sort_keys=True) + "\n")
    sys.stdout.write(table)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    from .pipeline import validate_paths

    report = validate_paths(
        dataset_path=args.dataset,
        trajectories_path=args.trajectories,
        map_path=bundled_map_path(args.map) if args.map else None,
    )
    by_subject: dict[str, list[str]] = {}
    for issue in report.issues:
        by_subject.setdefault(issue.subject, []).append(f"{issue.check}: {issue.detail}")
    passed = report.checked - len(by_subject)
    for subject in sorted(by_subject):
        print(f"FAIL {subject}: " + "; ".join(by_subject[subject]))
    print(f"validate: {passed}/{report.checked} passed")
    return EXIT_OK if report.ok else EXIT_PARTIAL


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app
    from .service.sessions import CaptionSet, SessionStore
    from .storemap import load_map_file

    maps = {}
    labels = {}
    for spec in args.map:
        label, _, path = spec.partition("=")
        if not path:
            path, label = bundled_map_path(label), label
        store = load_map_file(bundled_map_path(path))
        maps[store.map_id] = store
        labels[store.map_id] = label
    captions = CaptionSet.from_file(args.captions)
    store_dir = Path(args.data_dir)
    session_store = SessionStore(store_dir, maps)
    app = create_app(session_store, captions, labels, ui_dir=args.ui_dir, seed=args.seed)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shoptraj", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="synthesize a captioned trajectory dataset")
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--map", help="map path or 'seen'/'unseen'")
    p.add_argument("--n", type=int, help="number of caption/trajectory pairs")
    p.add_argument("--train", type=int, help="train split count")
    p.add_argument("--val", type=int, help="val split count")
    p.add_argument("--paraphrases", type=int, help="paraphrases per train record")
    p.add_argument("--seed", type=int, help="dataset seed")
    p.add_argument("--out", help="output directory")
    _add_backend_args(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("fixtures", help="build the mock fixture corpus for a map")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=80)
    p.add_argument("--paraphrases", default="2,4,8", help="comma-separated k values")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_fixtures)

    p = sub.add_parser("augment", help="add paraphrase records to a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, required=True)
    _add_backend_args(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("translate", help="render trajectories into model-input records")
    p.add_argument("--trajectories", required=True)
    p.add_argument("--captions", required=True, help="JSONL of {caption_id, caption}")
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.15)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("eval", help="score hypotheses against dataset references")
    p.add_argument("--dataset", required=True)
    p.add_argument("--hyps", required=True, help="one hypothesis per line, aligned")
    p.add_argument("--out", default="eval-out")
    p.add_argument("--ablate", action="append", help="drop_traj|drop_item|shuffle_traj|shuffle_item|noise:f[:m]")
    p.add_argument("--trajectories", help="trajectory file (noise ablation)")
    p.add_argument("--map", help="map path (noise ablation)")
    p.add_argument("--scorer", help="external semantic scorer command")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("validate", help="run the invariant suite over output files")
    p.add_argument("--dataset")
    p.add_argument("--trajectories")
    p.add_argument("--map")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("serve", help="launch the collection service")
    p.add_argument("--map", action="append", required=True, help="label=path, repeatable (seen=..., unseen=...)")
    p.add_argument("--captions", required=True, help="JSONL caption set")
    p.add_argument("--data-dir", default="sessions")
    p.add_argument("--ui-dir", help="built UI bundle to host under /app")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
