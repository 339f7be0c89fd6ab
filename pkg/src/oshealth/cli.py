"""Command line: mine, prepare, synth, tune, evaluate, report.

Exit codes: 0 success, 1 usage, 2 data error, 3 network/auth.
"""
from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import logging
import shutil
import sys
from pathlib import Path

from . import __version__
from .analysis import summarize
from .data import (
    IndicatorId,
    InsufficientDataError,
    load_dataset,
    project_filename,
    read_series_csv,
    validate_series,
    write_series_csv,
)
from .decart import DEConfig, write_tuning_log
from .harness import ExperimentPlan, read_outcomes_csv, run_experiment, tune_dataset
from .learners import LEARNER_ORDER, LearnerKind
from .synthetic import SyntheticSpec, generate_synthetic

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NETWORK = 0, 1, 2, 3

log = logging.getLogger("oshealth")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _csv_list(convert):
    def parse(text: str):
        try:
            return tuple(convert(part) for part in text.split(",") if part.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _run_dir(args, name: str) -> Path:
    if args.out:
        return Path(args.out)
    stamp = dt.datetime.now().strftime("%Y%m%dT%H%M%S")
    seed = getattr(args, "seed", None)
    return Path("runs") / (f"{name}-{stamp}-seed{seed}" if seed is not None else f"{name}-{stamp}")


def _digests(directory: Path, pattern: str = "*.csv") -> dict:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.glob(pattern))}


def _write_manifest(out: Path, args, extra: dict | None = None) -> None:
    flags = {k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(args).items()
             if k not in ("func",) and not callable(v)}
    flags = {k: ([x.value if hasattr(x, "value") else x for x in v] if isinstance(v, list) else v)
             for k, v in flags.items()}
    manifest = {"version": __version__, "command": args.command, "flags": flags, **(extra or {})}
    out.mkdir(parents=True, exist_ok=True)
    text = json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n"
    (out / "cli_manifest.json").write_text(text, encoding="utf-8")


# --- subcommands --------------------------------------------------------

def cmd_mine(args) -> int:
    from .ingest import aggregate_monthly, mine
    from .ingest.mining import token_from_env

    token = token_from_env(args.token_env)
    out = _run_dir(args, "mine")
    data_dir = out / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    cache = Path(args.cache)
    repos = list(args.repos)
    if args.repo_list:
        repos += [ln.strip() for ln in Path(args.repo_list).read_text().splitlines()
                  if ln.strip() and not ln.startswith("#")]
    if not repos:
        raise UsageError("mine: give repositories as arguments or with --repo-list")
    for repo in repos:
        stream = mine(repo, token, cache, offline=args.offline)
        stream.save(cache / f"{project_filename(stream.project_id)[:-4]}.events.json")
        series = aggregate_monthly(stream)
        write_series_csv(series, data_dir / project_filename(series.project_id))
        log.info("%s: %d months", series.project_id, series.n_months)
    _write_manifest(out, args, {"outputs": _digests(data_dir)})
    return EXIT_OK


def cmd_prepare(args) -> int:
    src = Path(args.data)
    out = _run_dir(args, "prepare")
    out.mkdir(parents=True, exist_ok=True)
    kept, dropped = [], {}
    for path in sorted(src.glob("*.csv")):
        try:
            series = read_series_csv(path)
        except ValueError as exc:
            dropped[path.name] = [str(exc)]
            continue
        report = validate_series(series)
        if not report.ok:
            dropped[path.name] = [f.message for f in report.findings]
        elif series.n_months < args.min_months:
            dropped[path.name] = [f"only {series.n_months} months (< {args.min_months})"]
        else:
            shutil.copyfile(path, out / path.name)
            kept.append(path.name)
    for name, reasons in dropped.items():
        log.warning("dropped %s: %s", name, "; ".join(reasons))
    _write_manifest(out, args, {"inputs": _digests(src), "kept": kept, "dropped": dropped})
    return EXIT_OK


def cmd_synth(args) -> int:
    out = _run_dir(args, "synth")
    out.mkdir(parents=True, exist_ok=True)
    spec = SyntheticSpec(args.projects, args.months, args.noise, args.seed)
    for series in generate_synthetic(spec):
        write_series_csv(series, out / project_filename(series.project_id))
    _write_manifest(out, args, {"outputs": _digests(out)})
    return EXIT_OK


def cmd_tune(args) -> int:
    series = load_dataset(args.data)
    if not series:
        raise InsufficientDataError(f"no project CSV files in {args.data}")
    cfg = DEConfig(args.np, args.cf, args.f, args.lives)
    result = tune_dataset(series, args.indicators, args.horizon, args.seed, cfg)
    out = _run_dir(args, "tune")
    out.mkdir(parents=True, exist_ok=True)
    (out / "tuned.json").write_text(json.dumps(result, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    if args.verbose:
        from .data import split_horizon
        from .decart import decart_tune
        from .harness import task_seed
        logs = out / "tuning_logs"
        logs.mkdir(exist_ok=True)
        for s in series:
            for ind in args.indicators:
                try:
                    split = split_horizon(s, ind, args.horizon)
                    res = decart_tune(split.train, cfg, task_seed(args.seed, s.project_id, ind, args.horizon,
                                                                  LearnerKind.DECART))
                except InsufficientDataError:
                    continue
                with open(logs / f"{project_filename(s.project_id)[:-4]}__{ind.value}.csv", "w",
                          encoding="utf-8", newline="") as fh:
                    write_tuning_log(res.log, fh)
    _write_manifest(out, args, {"inputs": _digests(Path(args.data))})
    return EXIT_OK


def cmd_evaluate(args) -> int:
    plan = ExperimentPlan(
        dataset_dir=str(args.data),
        indicators=args.indicators,
        horizons=args.horizons,
        learners=args.learners,
        master_seed=args.seed,
        midway_mode=args.midway,
        de_config=DEConfig(args.np, args.cf, args.f, args.lives),
        jobs=args.jobs,
    )
    out = _run_dir(args, "evaluate")
    result = run_experiment(plan, out_dir=out)
    _write_manifest(out, args, {"inputs": _digests(Path(args.data))})
    log.info("%d outcomes, %d skipped tasks -> %s", len(result.outcomes), len(result.skips), out)
    if args.verbose and result.reports is not None:
        print(result.reports.to_text())
    return EXIT_OK


def cmd_report(args) -> int:
    outcomes = read_outcomes_csv(args.outcomes)
    if not outcomes:
        raise InsufficientDataError(f"{args.outcomes} holds no outcomes")
    tables = summarize(outcomes)
    out = Path(args.out) if args.out else Path(args.outcomes).parent / "reports"
    tables.write(out)
    _write_manifest(out, args, {"inputs": _digests(Path(args.outcomes).parent, "outcomes.csv")})
    print(tables.to_text())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="oshealth", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, seed_required: bool):
        sp.add_argument("--out", help="output directory (default: runs/<command>-<timestamp>-seed<seed>)")
        sp.add_argument("--seed", type=int, required=seed_required)
        sp.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    def de_flags(sp):
        sp.add_argument("--np", type=int, default=20)
        sp.add_argument("--cf", type=float, default=0.75)
        sp.add_argument("--f", type=float, default=0.3)
        sp.add_argument("--lives", type=int, default=10)

    indicators = _csv_list(IndicatorId.parse)
    all_indicators = tuple(IndicatorId)

    sp = sub.add_parser("mine", help="fetch events and write monthly project CSVs")
    common(sp, seed_required=False)
    sp.add_argument("repos", nargs="*")
    sp.add_argument("--repo-list")
    sp.add_argument("--cache", default=".oshealth-cache")
    sp.add_argument("--token-env", default="HEALTH_TOKEN", help="environment variable holding the API token")
    sp.add_argument("--offline", action="store_true", help="serve every request from the cache")
    sp.set_defaults(func=cmd_mine)

    sp = sub.add_parser("prepare", help="validate project CSVs and keep the usable ones")
    common(sp, seed_required=False)
    sp.add_argument("--data", required=True)
    sp.add_argument("--min-months", type=int, default=3)
    sp.set_defaults(func=cmd_prepare)

    sp = sub.add_parser("synth", help="write a synthetic dataset")
    common(sp, seed_required=True)
    sp.add_argument("--projects", type=int, default=50)
    sp.add_argument("--months", type=int, default=60)
    sp.add_argument("--noise", type=float, default=0.15)
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("tune", help="DECART hyperparameters per project")
    common(sp, seed_required=True)
    de_flags(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--indicators", type=indicators, default=all_indicators)
    sp.add_argument("--horizon", type=int, default=1)
    sp.set_defaults(func=cmd_tune)

    sp = sub.add_parser("evaluate", help="run the forecasting experiment")
    common(sp, seed_required=True)
    de_flags(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--indicators", type=indicators, default=all_indicators)
    sp.add_argument("--horizons", type=_csv_list(int), default=(1, 3, 6, 12))
    sp.add_argument("--learners", type=_csv_list(LearnerKind.parse), default=LEARNER_ORDER)
    sp.add_argument("--midway", action="store_true", help="train on months 1..N/2, test month N/2+12")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("report", help="re-render report tables from an outcomes CSV")
    sp.add_argument("--outcomes", required=True)
    sp.add_argument("--out")
    sp.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    from .ingest.events import NoDataError
    from .ingest.mining import MiningError
    from .harness import ConfigurationError

    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except MiningError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except (InsufficientDataError, NoDataError, ConfigurationError, ValueError, OSError) as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
