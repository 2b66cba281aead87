"""Command-line interface.

Exit codes: 0 ok, 2 usage, 3 missing input, 4 data error, 5 numeric failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from . import metrics
from .errors import MissingInputError, SdmError, UsageError
from .nn import TrainConfig
from .pipeline import REPORT, STAGES, PipelineConfig, load_config, run_stages, write_config
from .synthetic import SyntheticWorldSpec, generate_synthetic_world


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _ratios(text):
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("need exactly three ratios (train,val,test)")
    return vals


def _config_args(p: argparse.ArgumentParser, stage: str):
    p.add_argument("--config", required=True, type=Path, help="experiment INI file")
    p.add_argument("--seed", type=int, help="override the run seed")
    p.add_argument("--force", action="store_true", help="re-run even if the manifest says up to date")
    p.add_argument("--output", type=Path, help="override the output directory")
    if stage in ("split", "run"):
        p.add_argument("--min-dist-km", type=float, help="clustering distance threshold")
        p.add_argument("--ratios", type=_ratios, help="train,val,test fractions")
    if stage in ("train", "train-gbrt", "predict", "run"):
        p.add_argument("--model", choices=("mean", "gbrt", "cnn"), help="model family")
    if stage in ("train-gbrt", "run"):
        p.add_argument("--rounds", type=int, help="boosting rounds")
        p.add_argument("--depth", type=int, help="maximum tree depth")
        p.add_argument("--shrinkage", type=float, help="learning rate of the boosting updates")
    if stage in ("mask", "run"):
        p.add_argument("--mode", choices=("none", "hard", "soft"), help="mask mode")
    if stage in ("eval", "run"):
        p.add_argument("--topk-denominator", choices=metrics.DENOMINATORS,
                       help="divide top-k overlap by min(k, #observed) or by k")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="birdsdm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="generate a synthetic world and a starter config")
    s.add_argument("out", type=Path, help="output directory")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n-hotspots", type=int, default=300)
    s.add_argument("--n-species", type=int, default=40)
    s.add_argument("--n-regions", type=int, default=4)
    s.add_argument("--patch-size", type=int, default=16)
    s.add_argument("--vagrant-prob", type=float, default=0.0)

    helps = {
        "build": "compute the encounter-rate table",
        "split": "cluster hotspots and assign train/val/test",
        "train": "fit the configured model",
        "train-gbrt": "fit the gradient boosted baseline",
        "predict": "predict encounter rates for the evaluation split",
        "mask": "apply range-map or soft masking to predictions",
        "eval": "score predictions against the evaluation split",
        "run": "run every stage in order",
    }
    for name, text in helps.items():
        _config_args(sub.add_parser(name, help=text, description=text), name)

    r = sub.add_parser("report", help="print summary rows for finished runs")
    r.add_argument("runs", nargs="+", type=Path, help="run directories (or report.json files)")
    return parser


def _load(args) -> PipelineConfig:
    over = {"seed": args.seed, "output": args.output}
    for key in ("min_dist_km", "ratios", "model", "topk_denominator"):
        over[key] = getattr(args, key, None)
    over["mask"] = getattr(args, "mode", None)
    if args.command == "train-gbrt":
        over["model"] = "gbrt"
    cfg = load_config(args.config)
    gbrt = {k: v for k, v in (("rounds", getattr(args, "rounds", None)), ("max_depth", getattr(args, "depth", None)),
                              ("shrinkage", getattr(args, "shrinkage", None))) if v is not None}
    fields = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}
    fields.update({k: v for k, v in over.items() if v is not None})
    if gbrt:
        fields["gbrt"] = dataclasses.replace(cfg.gbrt, **gbrt)
    fields["train"] = dataclasses.replace(cfg.train)
    return PipelineConfig(**fields)


def format_report_rows(names, reports) -> list[str]:
    cols = ["run", "MSE[1e-3]", "MAE[1e-2]", "Top-k", "Top-30", "Top-10"]
    rows = []
    for name, rep in zip(names, reports):
        vals = metrics.table_row(rep)
        rows.append([name] + ["-" if vals[c] is None else f"{vals[c]:.2f}" for c in cols[1:]])
    widths = [max(len(r[i]) for r in [cols] + rows) for i in range(len(cols))]
    fmt = lambda r: "  ".join(v.ljust(w) if i == 0 else v.rjust(w)  # noqa: E731
                              for i, (v, w) in enumerate(zip(r, widths)))
    return [fmt(cols)] + [fmt(r) for r in rows]


def _report(paths) -> list[str]:
    reports = []
    for p in paths:
        f = p / REPORT if p.is_dir() else p
        if not f.exists():
            raise MissingInputError(f"no report found at {f}")
        reports.append(metrics.EvalReport.from_json(f.read_text()))
    return format_report_rows([str(p) for p in paths], reports)


def _synth(args):
    spec = SyntheticWorldSpec(n_hotspots=args.n_hotspots, n_species=args.n_species, n_regions=args.n_regions,
                              patch_size=args.patch_size, vagrant_prob=args.vagrant_prob, seed=args.seed)
    paths = generate_synthetic_world(spec, args.out)
    cfg = PipelineConfig(checklists=Path("checklists.csv"), species=Path("species.txt"), output=Path("run"),
                         patches=Path("patches"), rangemaps=Path("rangemaps.csv"),
                         crop_size=args.patch_size, seed=args.seed,
                         train=TrainConfig(batch_size=16, learning_rate=3e-3, seed=args.seed))
    write_config(args.out / "experiment.ini", cfg)
    print(f"wrote synthetic world to {args.out} ({len(paths)} artifacts) and {args.out / 'experiment.ini'}")


def main(argv=None) -> int:
    try:
        parser = build_parser()
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:  # --help
            return int(exc.code or 0)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "synth":
            _synth(args)
        elif args.command == "report":
            print("\n".join(_report(args.runs)))
        else:
            cfg = _load(args)
            stage = {"train-gbrt": "train"}.get(args.command, args.command)
            ran = run_stages(cfg, STAGES if stage == "run" else (stage,), args.force)
            for name, did in ran.items():
                print(f"{name}: {'done' if did else 'up to date'}")
            if stage in ("run", "eval"):
                print("\n".join(_report([cfg.output])))
        return 0
    except SdmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return MissingInputError.exit_code
