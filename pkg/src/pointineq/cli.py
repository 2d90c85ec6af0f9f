"""Command-line interface.

Each invocation writes ``report.json`` and ``manifest.json`` (plus any CSV or
config artifacts) into ``<out>/<command>-<seed>-<hash>``.  The manifest
stores the fully resolved argument vector and copies of the input files, so
``pointineq rerun <manifest>`` reproduces the report byte for byte.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from pointineq import __version__, serialize
from pointineq.errors import InputError, NumericalError, ToolkitError
from pointineq.forms import eval_forms
from pointineq.geometry import (
    PointConfig,
    SphereConfig,
    kelvin_transform,
    load_config,
    stereographic_lift,
)
from pointineq.optimize import (
    EVIDENCE_LABEL,
    SearchOptions,
    report_options,
    cluster_far_stress,
    min_augmented_ratio,
    min_critical_residual,
    min_ratio_over_configs,
    min_ratio_over_U,
    min_sigma_over_configs,
    stress_csv,
)
from pointineq.systems import (
    augmented_ratio,
    circle_system,
    critical_residuals,
    sign_matrix,
    sphere_system,
    spectrum,
)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

RANDOM_COMMANDS = {"min-u", "estimate-c", "search-sigma", "min-critical", "augmented", "stress"}
PATH_OPTIONS = ("config",)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated floats, got {text!r}") from exc


def _build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", default="runs", help="directory for run folders (default ./runs)")
    common.add_argument("--json", action="store_true", help="print the report document to stdout")
    common.add_argument("--quiet", action="store_true", help="suppress the human summary")

    search = _Parser(add_help=False)
    search.add_argument("--seed", type=int)
    search.add_argument("--restarts", type=int)
    search.add_argument("--iters", type=int, dest="max_iters")
    search.add_argument("--step", type=float, dest="step_init")
    search.add_argument("--min-sep", type=float, dest="min_separation")
    search.add_argument("--max-diam", type=float, dest="max_diameter")
    search.add_argument("--temperature", type=float, dest="initial_temperature")
    search.add_argument("--decay", type=float)
    search.add_argument("--tolerance", type=float)
    search.add_argument("--inner-restarts", type=int)
    search.add_argument("--inner-iters", type=int)
    search.add_argument("--min-chord", type=float)
    search.add_argument("--workers", type=int)
    search.add_argument("--softmax", type=float, dest="softmax_temperature")

    parser = _Parser(prog="pointineq", description="Inverse-distance inequality toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", parents=[common], help="evaluate I1, I2 and their ratio")
    p.add_argument("--config", required=True)
    p.add_argument("--u", type=_floats, required=True)
    p.add_argument("--check", action="store_true", help="cross-check I1 against the gradient-tensor form")

    p = sub.add_parser("min-u", parents=[common, search], help="minimise the ratio over weights")
    p.add_argument("--config", required=True)

    p = sub.add_parser("estimate-c", parents=[common, search], help="anneal over configurations")
    p.add_argument("-p", type=int, required=True)
    p.add_argument("-m", type=int, required=True)

    p = sub.add_parser("sphere-sigma", parents=[common], help="spectrum of the sphere system")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--config")
    g.add_argument("--angles", type=_floats)
    p.add_argument("--null-rtol", type=float, default=1e-9)

    p = sub.add_parser("search-sigma", parents=[common, search], help="anneal for small sigma_min on S^m")
    p.add_argument("-p", type=int, required=True)
    p.add_argument("-m", type=int, required=True)

    p = sub.add_parser("critical-residual", parents=[common], help="residuals of the critical system")
    p.add_argument("--config", required=True)
    p.add_argument("--u", type=_floats, required=True)

    p = sub.add_parser("min-critical", parents=[common, search], help="minimise the critical residual")
    p.add_argument("--config", required=True)

    p = sub.add_parser("augmented", parents=[common, search], help="quotient with a point at infinity")
    p.add_argument("--config", required=True)
    p.add_argument("--u", type=_floats)
    p.add_argument("--up", type=float)
    p.add_argument("--minimize", action="store_true")

    p = sub.add_parser("sign-matrix", parents=[common], help="exact det and rank of sgn(k-s)")
    p.add_argument("-p", type=int, required=True)

    p = sub.add_parser("kelvin", parents=[common], help="Kelvin transform of a configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--center", type=_floats, required=True)

    p = sub.add_parser("lift", parents=[common], help="stereographic lift onto the unit sphere")
    p.add_argument("--config", required=True)

    p = sub.add_parser("stress", parents=[common, search], help="far-cluster stress table")
    p.add_argument("-p", type=int, required=True)
    p.add_argument("-m", type=int, required=True)
    p.add_argument("--separations", type=_floats, required=True)

    p = sub.add_parser("rerun", parents=[common], help="re-execute a stored manifest")
    p.add_argument("manifest")
    return parser


_SEARCH_KEYS = (
    "restarts",
    "max_iters",
    "step_init",
    "min_separation",
    "max_diameter",
    "initial_temperature",
    "decay",
    "tolerance",
    "inner_restarts",
    "inner_iters",
    "min_chord",
    "workers",
    "softmax_temperature",
)


def _search_options(args) -> SearchOptions:
    given = {k: getattr(args, k) for k in _SEARCH_KEYS if getattr(args, k, None) is not None}
    return SearchOptions(seed=args.seed, **given)


# -- command bodies: each returns (report dict, summary lines, extra artifacts) --


def _cmd_eval(args):
    cfg = load_config(args.config)
    ev = eval_forms(cfg, args.u, check=args.check)
    summary = [f"I1 = {ev.i1:.12g}", f"I2 = {ev.i2:.12g}", f"ratio = {ev.ratio:.12g} (sup at index {ev.sup_index})"]
    return ev.to_dict(), summary, {}


def _cmd_min_u(args):
    cfg = load_config(args.config)
    opts = _search_options(args)
    u, value = min_ratio_over_U(cfg, opts)
    report = {"seed": opts.seed, "value": value, "weights": u, "options": report_options(opts), "label": EVIDENCE_LABEL}
    return report, [f"min ratio over U: {value:.12g}"], {}


def _search_artifacts(rep):
    return rep.to_dict(), [f"best {rep.objective_kind} value: {rep.best_value:.12g}"], {
        "history.csv": rep.history_csv(),
        "best_config.json": rep.best_config,
    }


def _cmd_estimate_c(args):
    return _search_artifacts(min_ratio_over_configs(args.p, args.m, _search_options(args)))


def _cmd_search_sigma(args):
    return _search_artifacts(min_sigma_over_configs(args.p, args.m, _search_options(args)))


def _cmd_sphere_sigma(args):
    if args.angles is not None:
        mat = circle_system(args.angles)
    else:
        doc = serialize.read_document(args.config)
        mat = sphere_system(SphereConfig.from_dict(doc))
    rep = spectrum(mat)
    report = rep.to_dict()
    report["has_null_vector"] = rep.has_null_vector(args.null_rtol)
    report["null_rtol"] = args.null_rtol
    return report, [f"sigma_min = {rep.sigma_min:.12g}", f"residual = {rep.residual_norm:.3g}"], {}


def _cmd_critical(args):
    res = critical_residuals(load_config(args.config), args.u)
    return res.to_dict(), [f"|r1|^2 + |r2|^2 = {res.squared_norm():.12g}"], {}


def _cmd_min_critical(args):
    opts = _search_options(args)
    u, value = min_critical_residual(load_config(args.config), opts)
    report = {"seed": opts.seed, "value": value, "weights": u, "options": report_options(opts), "label": EVIDENCE_LABEL}
    return report, [f"min |r1|^2 + |r2|^2 over unit u: {value:.12g}"], {}


def _cmd_augmented(args):
    cfg = load_config(args.config)
    if args.minimize:
        opts = _search_options(args)
        z, value = min_augmented_ratio(cfg, opts)
        report = {
            "seed": opts.seed,
            "value": value,
            "weights": z[:-1],
            "up_tilde": float(z[-1]),
            "options": report_options(opts),
            "label": EVIDENCE_LABEL,
        }
        return report, [f"min augmented quotient: {value:.12g}"], {}
    if args.u is None or args.up is None:
        raise InputError("augmented needs --u and --up, or --minimize")
    value = augmented_ratio(cfg, args.u, args.up)
    return {"value": value, "weights": args.u, "up_tilde": args.up}, [f"augmented quotient: {value:.12g}"], {}


def _cmd_sign_matrix(args):
    sm = sign_matrix(args.p)
    report = sm.to_dict()
    report["matrix"] = [list(r) for r in sm.c]
    return report, [f"p = {sm.p}: det = {sm.det}, rank = {sm.rank}"], {}


def _cmd_kelvin(args):
    out = kelvin_transform(load_config(args.config), args.center)
    return out.to_dict(), [f"Kelvin image of {out.p} points written to config.json"], {"config.json": out}


def _cmd_lift(args):
    out = stereographic_lift(load_config(args.config))
    return out.to_dict(), [f"lifted {out.p} points onto S^{out.m}"], {"config.json": out}


def _cmd_stress(args):
    opts = _search_options(args)
    rows = cluster_far_stress(args.p, args.m, args.separations, opts)
    report = {
        "seed": opts.seed,
        "p": args.p,
        "m": args.m,
        "rows": [[s, v] for s, v in rows],
        "options": report_options(opts),
        "label": EVIDENCE_LABEL,
    }
    summary = [f"separation {s:g}: {v:.12g}" for s, v in rows]
    return report, summary, {"stress.csv": stress_csv(rows)}


COMMANDS = {
    "eval": _cmd_eval,
    "min-u": _cmd_min_u,
    "estimate-c": _cmd_estimate_c,
    "sphere-sigma": _cmd_sphere_sigma,
    "search-sigma": _cmd_search_sigma,
    "critical-residual": _cmd_critical,
    "min-critical": _cmd_min_critical,
    "augmented": _cmd_augmented,
    "sign-matrix": _cmd_sign_matrix,
    "kelvin": _cmd_kelvin,
    "lift": _cmd_lift,
    "stress": _cmd_stress,
}


# -- run persistence -------------------------------------------------------


def _resolved(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "json", "quiet")}


def _to_argv(command: str, options: dict) -> list[str]:
    """Rebuild a canonical argument vector from resolved options."""
    parser = _build_parser()
    subparser = parser._subparsers._group_actions[0].choices[command]
    argv = [command]
    for action in subparser._actions:
        if not action.option_strings or action.dest not in options:
            continue
        value = options[action.dest]
        if value is None or value is False:
            continue
        flag = action.option_strings[-1]
        if value is True:
            argv.append(flag)
            continue
        if isinstance(value, list):
            text = ",".join(serialize.format_float(v) for v in value)
        elif isinstance(value, float):
            text = serialize.format_float(value)
        else:
            text = str(value)
        # "--flag=value" keeps negative numbers from parsing as options
        argv += [f"{flag}={text}"] if flag.startswith("--") else [flag, text]
    return argv


def _run_dir(out: Path, command: str, options: dict, inputs: dict) -> Path:
    h = hashlib.sha256()
    h.update(serialize.dumps({"command": command, "options": options}, indent=0).encode())
    for name in sorted(inputs):
        h.update(inputs[name])
    seed = options.get("seed")
    return out / f"{command}-{seed if seed is not None else 'none'}-{h.hexdigest()[:10]}"


def _now() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S%z")


def _execute(args, out_stream, err_stream) -> int:
    started = _now()
    if args.command in RANDOM_COMMANDS and getattr(args, "seed", None) is None:
        if args.command != "augmented" or args.minimize:
            args.seed = secrets.randbits(63)
            print(f"seed: {args.seed}", file=err_stream)

    inputs = {}
    for key in PATH_OPTIONS:
        path = getattr(args, key, None)
        if path is not None:
            try:
                inputs[key] = Path(path).read_bytes()
            except OSError as exc:
                raise InputError(f"cannot read {path}: {exc.strerror}") from exc

    report, summary, extras = COMMANDS[args.command](args)

    options = _resolved(args)
    if "restarts" in options and options.get("seed") is not None:
        options.update(_search_options(args).to_dict())
    run_dir = _run_dir(Path(args.out), args.command, {k: v for k, v in options.items() if k not in inputs}, inputs)
    run_dir.mkdir(parents=True, exist_ok=True)
    stored = {}
    for key, data in inputs.items():
        name = f"input_{key}.json"
        (run_dir / name).write_bytes(data)
        stored[key] = name

    artifacts = {"report": "report.json"}
    serialize.write_document(run_dir / "report.json", report)
    for name, payload in extras.items():
        if isinstance(payload, (PointConfig, SphereConfig)):
            serialize.write_document(run_dir / name, payload.to_dict())
        else:
            (run_dir / name).write_text(payload)
        artifacts[Path(name).stem] = name

    replay = dict(options)
    replay.update(stored)
    manifest = {
        "command": args.command,
        "argv": _to_argv(args.command, replay),
        "options": options,
        "seed": options.get("seed"),
        "inputs": stored,
        "artifacts": artifacts,
        "started_at": started,
        "finished_at": _now(),
        "version": __version__,
    }
    serialize.write_document(run_dir / "manifest.json", manifest)

    if args.json:
        out_stream.write(serialize.dumps(report) + "\n")
    elif not args.quiet:
        for line in summary:
            print(line, file=out_stream)
        print(f"run directory: {run_dir}", file=out_stream)
    return EXIT_OK


def _rerun(args, out_stream, err_stream) -> int:
    manifest_path = Path(args.manifest)
    try:
        manifest = json.loads(manifest_path.read_text())
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read manifest {manifest_path}: {exc}") from exc
    base = manifest_path.parent
    argv = []
    for tok in manifest["argv"]:
        flag, sep, value = tok.partition("=")
        if sep and flag.lstrip("-") in PATH_OPTIONS:
            tok = f"{flag}={base / value}"
        argv.append(tok)
    argv += ["--out", args.out]
    if args.json:
        argv.append("--json")
    if args.quiet:
        argv.append("--quiet")
    return run_command(argv, out_stream, err_stream)


def run_command(argv, out_stream=None, err_stream=None) -> int:
    """Parse ``argv``, run the subcommand, persist artifacts; return the exit code."""
    out_stream = out_stream or sys.stdout
    err_stream = err_stream or sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(list(argv))
    except _UsageError as exc:
        print(str(exc), file=err_stream)
        return EXIT_INPUT
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        if args.command == "rerun":
            return _rerun(args, out_stream, err_stream)
        return _execute(args, out_stream, err_stream)
    except InputError as exc:
        print(f"error: {exc}", file=err_stream)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=err_stream)
        return EXIT_NUMERIC
    except ToolkitError as exc:
        print(f"error: {exc}", file=err_stream)
        return EXIT_NUMERIC
    except (OSError, ValueError, KeyError) as exc:
        # unreadable or malformed input documents
        print(f"error: {type(exc).__name__}: {exc}", file=err_stream)
        return EXIT_INPUT
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=err_stream)
        return EXIT_NUMERIC


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
