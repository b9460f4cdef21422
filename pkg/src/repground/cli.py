"""Command-line entry point: ``repground <subcommand> ...``.

JSON reports are wrapped in an envelope carrying the command, toolkit
version, fully resolved config and a ``timestamp`` field (the only part that
differs between identical reruns).  TSV outputs get a ``<out>.meta.json``
sidecar with the same envelope minus the report body.

Exit status: 0 success, 1 invalid input or degenerate data, 2 I/O failure.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, cca, dcorr, evalsuite, repstore, synth
from .corrstats import unit_rows
from .errors import ToolkitError, ValidationError

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2
DEFAULT_PAIRS = ("bleu:img_r10", "bleu:sts", "bleu:train_size")


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return "inf" if value > 0 else ("-inf" if value < 0 else "nan")
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def _config(args: argparse.Namespace) -> dict:
    return _jsonable({k: v for k, v in sorted(vars(args).items()) if k != "func"})


def _envelope(args, report=None) -> dict:
    env = {
        "command": args.command,
        "version": __version__,
        "config": _config(args),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if report is not None:
        env["report"] = _jsonable(report)
    return env


def _write(path: Path | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def emit(args, report: dict, tsv: str | None = None) -> None:
    """Write ``report`` as JSON, or ``tsv`` plus a metadata sidecar when ``--format tsv``."""
    if getattr(args, "format", "json") == "tsv" and tsv is not None:
        _write(args.out, tsv)
        if args.out is not None:
            meta = args.out.with_name(args.out.name + ".meta.json")
            meta.write_text(json.dumps(_envelope(args), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return
    _write(args.out, json.dumps(_envelope(args, report), indent=2, sort_keys=True) + "\n")


def _load(path, name=None):
    return repstore.load_representation_set(path, name=name)


def _normalize(reps: repstore.RepresentationSet, how: str) -> repstore.RepresentationSet:
    if how == "none":
        return reps
    return repstore.RepresentationSet(reps.name, reps.ids, unit_rows(reps.vectors, f"{reps.name} row"))


def _paired(args, left_path, right_path) -> repstore.PairedDataset:
    left = _normalize(_load(left_path), args.normalize)
    right = _normalize(_load(right_path), args.normalize)
    id_map = repstore.load_id_map(args.pairs) if args.pairs else None
    return repstore.align_pairs(left, right, id_map)


# ------------------------------------------------------------ subcommands


def cmd_pool(args) -> None:
    items = repstore.load_token_sequences(args.tokens)
    reps = repstore.pool_sequences(items, name=args.name or args.tokens.stem)
    repstore.save_representation_set(reps, args.reps_out, args.reps_format)
    emit(args, {"n": reps.n, "dim": reps.dim, "output": str(args.reps_out)})


def cmd_fit_cca(args) -> None:
    pairs = _paired(args, args.left, args.right)
    if args.test_ids:
        pairs, _ = repstore.split(pairs, repstore.load_id_list(args.test_ids))
    model = cca.fit(pairs, args.epsilon, args.cca_k)
    cca.save_model(model, args.model_out)
    emit(args, {**model.summary(), "model_path": str(args.model_out)})


def cmd_eval_retrieval(args) -> None:
    explicit = [args.train_left, args.train_right, args.test_left, args.test_right]
    if all(p is not None for p in explicit):
        train = _paired(args, args.train_left, args.train_right)
        test = _paired(args, args.test_left, args.test_right)
    elif any(p is not None for p in explicit):
        raise ValidationError("--train-left/--train-right/--test-left/--test-right must be given together")
    elif args.left and args.right and args.test_ids:
        train, test = repstore.split(_paired(args, args.left, args.right), repstore.load_id_list(args.test_ids))
    else:
        raise ValidationError("give either the four train/test files or --left, --right and --test-ids")
    args.k = list(args.k or evalsuite.DEFAULT_K_VALUES)
    report = evalsuite.image_retrieval_eval(
        train, test, args.epsilon, args.cca_k, args.k,
        args.direction, not args.unweighted,
    )
    if args.model_out:
        cca.save_model(report.model, args.model_out)
    body = report.to_dict()
    body["n_train"] = train.n
    tsv = "k\trecall\n" + "".join(f"{k}\t{r!r}\n" for k, r in zip(report.k_values, report.recalls))
    emit(args, body, tsv)


def cmd_eval_sts(args) -> None:
    reps = _load(args.reps)
    gold = repstore.load_sts_gold(args.gold)
    model = None
    if args.mode == "cca_projected":
        if not args.model:
            raise ValidationError("--mode cca_projected requires --model")
        model = cca.load_model(args.model)
        reps = _normalize(reps, args.normalize)
    report = evalsuite.sts_eval(reps, gold, args.mode, model)
    emit(args, report.to_dict(), f"mode\tspearman\tn_pairs\n{report.mode}\t{report.spearman!r}\t{report.n_pairs}\n")


def cmd_dcorr_matrix(args) -> None:
    sets = [_load(p) for p in args.sets]
    if args.ids:
        ids = repstore.load_id_list(args.ids)
        sets = [s.select(ids) for s in sets]
    labels = args.label or None
    result = dcorr.dcorr_matrix(sets, labels, args.max_n, args.seed)
    emit(args, result.to_dict(), result.to_tsv())


def _parse_pair(text: str) -> tuple[str, str]:
    parts = text.split(":")
    if len(parts) != 2 or not all(parts):
        raise argparse.ArgumentTypeError(f"expected COLUMN:COLUMN, got {text!r}")
    return parts[0], parts[1]


def cmd_correlate_metrics(args) -> None:
    table = evalsuite.load_metrics_table(args.table)
    pairs = args.pair or [_parse_pair(p) for p in DEFAULT_PAIRS]
    args.pair = pairs
    report = evalsuite.metric_correlation_report(table, pairs, args.group_by, args.label_column)
    if args.scatter_out:
        args.scatter_out.write_text(report.scatter_tsv(), encoding="utf-8")
    body = report.to_dict()
    body["scatter"] = [dict(s) for s in report.scatter]
    emit(args, body, report.entries_tsv())


def cmd_synth(args) -> None:
    spec = synth.SynthSpec(
        n=args.n, dim_left=args.dim_left, dim_right=args.dim_right, seed=args.seed,
        rho=tuple(args.rho or ()), snr=args.snr, noise=args.noise,
    )
    args.out_dir.mkdir(parents=True, exist_ok=True)
    ext = ".tsv" if args.reps_format == "tsv" else ".reps"
    produced = synth.GENERATORS[args.kind](spec)
    if args.kind == "planted-retrieval":
        train, test = produced
        parts = {"train.left": train.left, "train.right": train.right,
                 "test.left": test.left, "test.right": test.right}
    else:
        parts = {"left": produced.left, "right": produced.right}
    files = {}
    for stem, reps in parts.items():
        path = args.out_dir / f"{stem}{ext}"
        repstore.save_representation_set(reps, path, args.reps_format)
        files[stem] = path.name
    manifest = {"kind": args.kind, "spec": spec.manifest(), "files": files, "version": __version__}
    (args.out_dir / "spec.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    emit(args, manifest)


# ----------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser, formats=("json",)) -> None:
    p.add_argument("--out", type=Path, help="report destination (default: stdout)")
    p.add_argument("--format", choices=formats, default="json")


def _cca_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epsilon", type=float, default=cca.DEFAULT_EPSILON,
                   help="ridge strength relative to the mean covariance diagonal")
    p.add_argument("--cca-k", type=int, default=None, help="canonical components to keep")
    p.add_argument("--pairs", type=Path, help="TSV mapping left ids to right ids (default: equal ids)")
    p.add_argument("--normalize", choices=("none", "l2"), default="none",
                   help="row normalization applied before CCA")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repground", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pool", help="mean-pool token states into sentence vectors")
    p.add_argument("--tokens", type=Path, required=True, help="JSON-lines token file")
    p.add_argument("--reps-out", type=Path, required=True)
    p.add_argument("--reps-format", choices=repstore.FORMATS, default=None)
    p.add_argument("--name")
    _common(p)
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("fit-cca", help="fit CCA between paired text and image vectors")
    p.add_argument("--left", type=Path, required=True)
    p.add_argument("--right", type=Path, required=True)
    p.add_argument("--test-ids", type=Path, help="ids held out from the fit")
    p.add_argument("--model-out", type=Path, required=True)
    _cca_flags(p)
    _common(p)
    p.set_defaults(func=cmd_fit_cca)

    p = sub.add_parser("eval-retrieval", help="CCA image retrieval, recall@k")
    for name in ("train-left", "train-right", "test-left", "test-right", "left", "right", "test-ids"):
        p.add_argument(f"--{name}", type=Path)
    p.add_argument("--k", type=int, action="append", help="recall cutoff (repeatable; default 1, 5, 10)")
    p.add_argument("--direction", choices=evalsuite.DIRECTIONS, default="text-to-image")
    p.add_argument("--unweighted", action="store_true",
                   help="do not scale canonical components by their correlation")
    p.add_argument("--model-out", type=Path)
    _cca_flags(p)
    _common(p, ("json", "tsv"))
    p.set_defaults(func=cmd_eval_retrieval)

    p = sub.add_parser("eval-sts", help="Spearman correlation of cosine similarity with gold scores")
    p.add_argument("--reps", type=Path, required=True)
    p.add_argument("--gold", type=Path, required=True)
    p.add_argument("--mode", choices=evalsuite.STS_MODES, default="raw")
    p.add_argument("--model", type=Path, help="CCA model for cca_projected mode")
    p.add_argument("--normalize", choices=("none", "l2"), default="none",
                   help="must match the normalization the model was fitted with")
    _common(p, ("json", "tsv"))
    p.set_defaults(func=cmd_eval_sts)

    p = sub.add_parser("dcorr-matrix", help="pairwise distance correlation between representation sets")
    p.add_argument("sets", type=Path, nargs="+")
    p.add_argument("--label", action="append", help="label per set (repeatable; default file stem)")
    p.add_argument("--ids", type=Path, help="restrict every set to these ids, in this order")
    p.add_argument("--max-n", type=int, default=dcorr.DEFAULT_MAX_N)
    p.add_argument("--seed", type=int, default=None, help="subsample seed when n exceeds --max-n")
    _common(p, ("json", "tsv"))
    p.set_defaults(func=cmd_dcorr_matrix)

    p = sub.add_parser("correlate-metrics", help="Pearson correlation between metric columns")
    p.add_argument("--table", type=Path, required=True)
    p.add_argument("--pair", type=_parse_pair, action="append",
                   help="COLUMN:COLUMN (repeatable; default bleu against img_r10, sts, train_size)")
    p.add_argument("--group-by", help="compute correlations separately per value of this column")
    p.add_argument("--label-column", default="model_name")
    p.add_argument("--scatter-out", type=Path, help="write x/y/label scatter TSV here")
    _common(p, ("json", "tsv"))
    p.set_defaults(func=cmd_correlate_metrics)

    p = sub.add_parser("synth", help="write seeded synthetic representation sets")
    p.add_argument("kind", choices=sorted(synth.GENERATORS))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim-left", type=int, default=1)
    p.add_argument("--dim-right", type=int, default=1)
    p.add_argument("--rho", type=float, action="append")
    p.add_argument("--snr", type=float, default=math.inf)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", type=Path, required=True)
    p.add_argument("--reps-format", choices=repstore.FORMATS, default="binary")
    _common(p)
    p.set_defaults(func=cmd_synth)
    return parser


def _fail(status: int, exc: BaseException) -> int:
    line = json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}, "exit_status": status})
    print(line, file=sys.stderr)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ToolkitError as exc:
        return _fail(EXIT_INVALID, exc)
    except OSError as exc:
        return _fail(EXIT_IO, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
