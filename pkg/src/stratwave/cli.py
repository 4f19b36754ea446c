"""Command-line interface.

One subcommand per core operation, plus `replay` to run a recorded
script of subcommand lines and `serve` to start the HTTP design service.
Tables go to `--out` as full-precision CSV, or to standard output as an
aligned listing with floats at two decimals (`--precision full` turns
the rounding off).

Exit codes: 0 on success, 2 for usage problems, 3 for data errors, 4 for
infeasible designs.
"""

from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
from pathlib import Path

from . import io as tableio
from .allocation import (
    StratumSummary,
    allocate_wave,
    estimator_variance,
    optimum_allocation,
    wave_history,
)
from .errors import DataError, InfeasibleDesign, StratwaveError
from .influence import fisher_information, fit_logistic, influence_functions
from .persistence import load_workflow, save_workflow
from .sampling import extract_sampled_ids, sample_strata
from .strata import SplitSpec, merge_strata, split_strata
from .workflow import (
    apply_multiwave,
    get_slot,
    merge_samples,
    new_multiwave,
    set_slot,
    workflow_summary,
)

__all__ = ["main"]

SEED_ENV_VAR = "STRATWAVE_SEED"


class _UsageError(Exception):
    pass


def _emit(table, args) -> None:
    if getattr(args, "out", None):
        tableio.write_units(table, args.out)
    else:
        sys.stdout.write(tableio.render_table(table, args.precision))


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    from_env = os.environ.get(SEED_ENV_VAR)
    if from_env is None:
        raise _UsageError(
            f"no seed: pass --seed or set {SEED_ENV_VAR} in the environment"
        )
    try:
        return int(from_env)
    except ValueError:
        raise _UsageError(f"{SEED_ENV_VAR} must be an integer, got {from_env!r}") from None


def _parse_number(token: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise DataError(f"--split-at expects numbers, got {token!r}") from None


def _parse_entry(token: str) -> tuple[str, object]:
    if "=" not in token:
        raise _UsageError(f"expected key=value, got {token!r}")
    key, raw = token.split("=", 1)
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def _cmd_split(args) -> int:
    units = tableio.read_units(args.input)
    if args.type == "categorical":
        split_at = [
            tuple(tok.split(",")) if "," in tok else tok for tok in args.split_at
        ]
    else:
        split_at = [_parse_number(tok) for tok in args.split_at]
    trunc = args.trunc
    if trunc is not None:
        try:
            trunc = int(trunc)
        except ValueError:
            pass  # a plain replacement string
    spec = SplitSpec(
        strata_col=args.strata,
        split_var=args.split_var,
        split_type=args.type,
        split_at=split_at,
        targets=args.targets,
        trunc=trunc,
    )
    _emit(split_strata(units, spec), args)
    return 0


def _cmd_merge(args) -> int:
    units = tableio.read_units(args.input)
    _emit(merge_strata(units, args.strata, args.merge, args.name), args)
    return 0


def _cmd_allocate(args) -> int:
    units = tableio.read_units(args.input)
    design = optimum_allocation(
        units,
        method=args.method,
        strata_col=args.strata,
        y_col=args.y,
        sd_col=args.sd_col,
        npop_col=args.npop_col,
        nsample=args.nsample,
        allow_small=args.allow_small,
    )
    _emit(design, args)
    if args.with_variance:
        if "stratum_size" not in design.columns:
            raise _UsageError("--with-variance needs --nsample to fix stratum sizes")
        summaries = [
            StratumSummary(label=row.strata, npop=int(row.npop), sd=float(row.sd))
            for row in design.itertuples(index=False)
        ]
        allocation = dict(zip(design["strata"], (int(n) for n in design["stratum_size"])))
        variance = estimator_variance(summaries, allocation).variance
        sys.stdout.write(f"variance: {variance!r}\n")
    return 0


def _cmd_wave_allocate(args) -> int:
    units = tableio.read_units(args.input)
    summaries, prior = wave_history(
        units,
        strata_col=args.strata,
        y_col=args.y,
        already_sampled=args.already_sampled,
    )
    design = allocate_wave(summaries, prior, args.nsample, detailed=args.detailed)
    _emit(design, args)
    return 0


def _cmd_sample(args) -> int:
    units = tableio.read_units(args.input)
    design = tableio.read_units(args.design)
    sampled = sample_strata(
        units,
        strata_col=args.strata,
        id_col=args.id,
        design=design,
        seed=_resolve_seed(args),
        design_strata_col=args.design_strata,
        n_col=args.n_col,
        already_sampled=args.already_sampled,
    )
    _emit(sampled, args)
    if args.ids_out:
        ids = extract_sampled_ids(sampled, args.id)
        Path(args.ids_out).write_text(
            "".join(f"{i}\n" for i in ids), encoding="utf-8"
        )
    return 0


def _cmd_influence(args) -> int:
    units = tableio.read_units(args.input)
    matrix = tableio.build_model_matrix(
        units, args.covariates, intercept=not args.no_intercept
    )
    if args.y not in units.columns:
        raise DataError(f"column {args.y!r} not found in unit table")
    fit = fit_logistic(matrix, units[args.y].to_numpy())
    information = fisher_information(matrix, fit.fitted)
    table = influence_functions(matrix, fit.residuals, information)
    if args.id is not None:
        if args.id not in units.columns:
            raise DataError(f"column {args.id!r} not found in unit table")
        table.insert(0, args.id, units[args.id].to_numpy())
    _emit(table, args)
    return 0


def _cmd_workflow_init(args) -> int:
    path = Path(args.file)
    if path.exists():
        raise DataError(f"{path} already exists; move it aside before init")
    save_workflow(new_multiwave(args.phases, args.waves), path)
    return 0


def _cmd_workflow_set(args) -> int:
    doc = load_workflow(args.file)
    sources = [s for s in (args.entry, args.from_csv, args.ids, args.ids_file) if s]
    if len(sources) != 1:
        raise _UsageError(
            "give exactly one of --entry, --from-csv, --ids, or --ids-file"
        )
    if args.entry:
        if args.slot != "metadata":
            raise _UsageError("--entry only writes metadata slots")
        current = dict(get_slot(doc, "metadata", phase=args.phase, wave=args.wave))
        for token in args.entry:
            key, value = _parse_entry(token)
            current[key] = value
        doc = set_slot(doc, "metadata", current, phase=args.phase, wave=args.wave)
    elif args.from_csv:
        if args.slot not in ("design", "sampled_data", "data"):
            raise _UsageError("--from-csv writes design, sampled_data, or data slots")
        table = tableio.read_units(args.from_csv)
        doc = set_slot(doc, args.slot, table, phase=args.phase, wave=args.wave)
    else:
        if args.slot != "samples":
            raise _UsageError("ids only go into the samples slot")
        if args.ids:
            ids = [_typed_id(i) for i in args.ids]
        else:
            lines = Path(args.ids_file).read_text(encoding="utf-8").splitlines()
            ids = [_typed_id(line.strip()) for line in lines if line.strip()]
        doc = set_slot(doc, "samples", ids, phase=args.phase, wave=args.wave)
    save_workflow(doc, args.file)
    return 0


def _typed_id(token: str):
    try:
        return int(token)
    except ValueError:
        return token


def _cmd_workflow_get(args) -> int:
    doc = load_workflow(args.file)
    value = get_slot(doc, args.slot, phase=args.phase, wave=args.wave)
    if args.slot == "metadata":
        sys.stdout.write(json.dumps(value, indent=2, sort_keys=True) + "\n")
    elif args.slot == "samples":
        sys.stdout.write("".join(f"{i}\n" for i in value))
    else:
        _emit(value, args)
    return 0


def _cmd_workflow_apply(args) -> int:
    doc = load_workflow(args.file)
    call_args = dict(_parse_entry(token) for token in args.arg or [])
    doc = apply_multiwave(doc, args.phase, args.wave, args.fun, call_args)
    save_workflow(doc, args.file)
    return 0


def _cmd_workflow_merge(args) -> int:
    doc = load_workflow(args.file)
    doc = merge_samples(
        doc, args.phase, args.wave, id_col=args.id, sampled_ind=args.sampled_ind
    )
    save_workflow(doc, args.file)
    return 0


def _cmd_workflow_status(args) -> int:
    doc = load_workflow(args.file)
    sys.stdout.write(workflow_summary(doc, format=args.format))
    return 0


def _cmd_replay(args) -> int:
    try:
        lines = Path(args.script).read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise DataError(f"no such script: {args.script}") from None
    for number, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        code = main(shlex.split(stripped))
        if code != 0:
            sys.stderr.write(f"replay: line {number} failed with exit code {code}\n")
            return code
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        max_body_bytes=args.max_body_bytes,
        snapshot_dir=args.snapshot_dir,
    )
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _add_output_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", help="write the result table to this CSV file")
    parser.add_argument(
        "--precision",
        choices=["2", "full"],
        default="2",
        help="float rendering on standard output (default: 2 decimals)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stratwave",
        description="stratified survey design: split, allocate, sample, iterate",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("split", help="partition strata on a variable")
    p.add_argument("--input", required=True)
    p.add_argument("--strata", required=True)
    p.add_argument("--split-var", required=True)
    p.add_argument(
        "--type",
        required=True,
        choices=["global_quantile", "local_quantile", "value", "categorical"],
    )
    p.add_argument("--split-at", required=True, nargs="+")
    p.add_argument("--targets", nargs="+")
    p.add_argument("--trunc")
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_split)

    p = sub.add_parser("merge", help="collapse strata into one")
    p.add_argument("--input", required=True)
    p.add_argument("--strata", required=True)
    p.add_argument("--merge", required=True, nargs="+")
    p.add_argument("--name", required=True)
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_merge)

    p = sub.add_parser("allocate", help="optimal allocation across strata")
    p.add_argument("--input", required=True)
    p.add_argument("--strata", required=True)
    p.add_argument("--y", help="outcome column (unit-level input)")
    p.add_argument("--sd-col", help="sd column (summary-level input)")
    p.add_argument("--npop-col", help="population-size column (summary-level input)")
    p.add_argument("--nsample", type=int)
    p.add_argument("--method", default="WrightII")
    p.add_argument("--allow-small", action="store_true")
    p.add_argument(
        "--with-variance",
        action="store_true",
        help="also print the design's estimator variance",
    )
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_allocate)

    p = sub.add_parser("wave-allocate", help="allocate the next wave given prior sampling")
    p.add_argument("--input", required=True)
    p.add_argument("--strata", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--already-sampled", required=True)
    p.add_argument("--nsample", required=True, type=int)
    p.add_argument("--detailed", action="store_true")
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_wave_allocate)

    p = sub.add_parser("sample", help="draw the allocated sample within each stratum")
    p.add_argument("--input", required=True)
    p.add_argument("--design", required=True)
    p.add_argument("--strata", required=True)
    p.add_argument("--id", required=True)
    p.add_argument("--design-strata", default="strata")
    p.add_argument("--n-col")
    p.add_argument("--seed", type=int)
    p.add_argument("--already-sampled")
    p.add_argument("--ids-out", help="also write the selected ids, one per line")
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_sample)

    p = sub.add_parser("influence", help="influence functions for a logistic coefficient")
    p.add_argument("--input", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--covariates", required=True, nargs="+")
    p.add_argument("--no-intercept", action="store_true")
    p.add_argument("--id", help="carry this id column into the output")
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_influence)

    wf = sub.add_parser("workflow", help="create and drive workflow files")
    wfsub = wf.add_subparsers(dest="workflow_command")

    p = wfsub.add_parser("init", help="create an empty workflow file")
    p.add_argument("--file", required=True)
    p.add_argument("--phases", required=True, type=int)
    p.add_argument("--waves", required=True, type=int, nargs="+")
    p.set_defaults(handler=_cmd_workflow_init)

    p = wfsub.add_parser("set", help="write a slot")
    p.add_argument("--file", required=True)
    p.add_argument("--slot", required=True)
    p.add_argument("--phase", type=int)
    p.add_argument("--wave", type=int)
    p.add_argument("--entry", action="append", help="key=value metadata entry (repeatable)")
    p.add_argument("--from-csv", help="CSV file for a table slot")
    p.add_argument("--ids", nargs="+", help="ids for the samples slot")
    p.add_argument("--ids-file", help="file of ids, one per line")
    p.set_defaults(handler=_cmd_workflow_set)

    p = wfsub.add_parser("get", help="read a slot")
    p.add_argument("--file", required=True)
    p.add_argument("--slot", required=True)
    p.add_argument("--phase", type=int)
    p.add_argument("--wave", type=int)
    _add_output_flags(p)
    p.set_defaults(handler=_cmd_workflow_get)

    p = wfsub.add_parser("apply", help="run an operation into a wave")
    p.add_argument("--file", required=True)
    p.add_argument("--phase", required=True, type=int)
    p.add_argument("--wave", required=True, type=int)
    p.add_argument(
        "--fun",
        required=True,
        choices=["optimum_allocation", "allocate_wave", "sample_strata"],
    )
    p.add_argument("--arg", action="append", help="key=value argument (repeatable)")
    p.set_defaults(handler=_cmd_workflow_apply)

    p = wfsub.add_parser("merge-samples", help="fold collected data into the wave")
    p.add_argument("--file", required=True)
    p.add_argument("--phase", required=True, type=int)
    p.add_argument("--wave", required=True, type=int)
    p.add_argument("--id")
    p.add_argument("--sampled-ind")
    p.set_defaults(handler=_cmd_workflow_merge)

    p = wfsub.add_parser("status", help="show the document structure")
    p.add_argument("--file", required=True)
    p.add_argument("--format", choices=["text", "dot"], default="text")
    p.set_defaults(handler=_cmd_workflow_status)

    p = sub.add_parser("replay", help="run a recorded script of subcommands")
    p.add_argument("script")
    p.set_defaults(handler=_cmd_replay)

    p = sub.add_parser("serve", help="start the HTTP design service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8787)
    p.add_argument("--max-body-bytes", type=int, default=20_000_000)
    p.add_argument("--snapshot-dir")
    p.set_defaults(handler=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(sys.argv[1:] if argv is None else list(argv))
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = getattr(args, "handler", None)
    if handler is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return handler(args)
    except _UsageError as err:
        sys.stderr.write(f"usage error: {err}\n")
        return 2
    except InfeasibleDesign as err:
        sys.stderr.write(f"error: {type(err).__name__}: {err}\n")
        return 4
    except StratwaveError as err:
        sys.stderr.write(f"error: {type(err).__name__}: {err}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
