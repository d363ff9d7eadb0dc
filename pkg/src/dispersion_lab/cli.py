"""Command-line front end: ``dispersion-lab <command> [flags]``.

Exit status is 0 on success, 1 for invalid input and 2 for numerical
failures. Artifacts are written to ``--out`` (stdout when omitted).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from dispersion_lab import io as dio
from dispersion_lab.errors import DataError, DispersionLabError, ValidationError
from dispersion_lab.fields import FieldGrid
from dispersion_lab.kdv_limit import TABLE1_BETAS, TABLE1_ETAS, classify_kdv_sign, emit_table1, phi_kdv_quad
from dispersion_lab.nls_limit import (
    TABLE2_BETAS,
    TABLE2_LAMBDAS,
    check_nls_condition,
    emit_table2,
    phi_nls_quad,
    soliton_lattice,
)
from dispersion_lab.profiles import KdvBetaWell, NlsBetaWell
from dispersion_lab.quadrature import DEFAULT_REL_TOL, SCHEMES
from dispersion_lab.reports import SCHEMA_VERSION

log = logging.getLogger("dispersion_lab")


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# helpers


def _grid(lo, hi, steps):
    if steps < 1:
        raise ValidationError("--steps must be at least 1")
    if steps == 1:
        return [lo]
    return [lo + (hi - lo) * i / (steps - 1) for i in range(steps)]


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from exc


def _emit(args, csv_text_fn, payload_fn):
    if args.format == "json":
        payload = {"schema_version": SCHEMA_VERSION, "command": args.command}
        payload.update(payload_fn())
        dio.write_json(args.out, payload)
    else:
        dio.write_text(args.out, csv_text_fn())


def _need_beta(args):
    if args.beta is None:
        raise ValidationError("--beta or --profile is required")
    return args.beta


def _kdv_profile(args):
    if getattr(args, "profile", None):
        well = dio.read_kdv_profile(args.profile)
        well.require_valid()
        return well, float("nan")
    return KdvBetaWell(_need_beta(args)), args.beta


def _nls_profile(args):
    if getattr(args, "profile", None):
        well = dio.read_nls_profile(args.profile)
        problems = well.problems()
        if problems:
            raise DataError("sampled profile is not a single well: " + "; ".join(str(q) for q in problems))
        return well, float("nan")
    return NlsBetaWell(_need_beta(args)), args.beta


# ---------------------------------------------------------------------------
# commands


def cmd_phi(args):
    rows = []
    if args.flow == "kdv":
        profile, beta = _kdv_profile(args)
        lo = 0.1 if args.min is None else args.min
        hi = 0.9 if args.max is None else args.max
        for e in _grid(lo, hi, args.steps):
            r = phi_kdv_quad(profile, e, args.tol, args.quad_scheme)
            rows.append((beta, e, r.value, r.error_estimate))
        header = ["beta", "eta", "phi", "err"]
    else:
        profile, beta = _nls_profile(args)
        lo = profile.lambda_min if args.min is None else args.min
        hi = 0.9 if args.max is None else args.max
        for lam in _grid(lo, hi, args.steps):
            r = phi_nls_quad(profile, lam, args.tol, args.quad_scheme)
            rows.append((beta, lam, r.value, r.error_estimate))
        header = ["beta", "lambda", "phi", "err"]
    _emit(args, lambda: dio.csv_text(header, rows, args.precision),
          lambda: {"columns": header, "rows": rows})


def _table(args, tables, grid_name, quantity):
    def payload():
        return {"quantity": quantity, "grid_name": grid_name,
                "tables": [{"beta": t.beta, grid_name: t.grid, quantity: t.values,
                            "err": t.error_estimates} for t in tables]}
    _emit(args, lambda: dio.table_csv(tables, grid_name, quantity, args.precision, args.layout), payload)


def cmd_table1(args):
    betas = _floats(args.betas) if args.betas else TABLE1_BETAS
    _table(args, emit_table1(betas, TABLE1_ETAS, args.tol, args.quad_scheme), "eta", "phi")


def cmd_table2(args):
    betas = _floats(args.betas) if args.betas else TABLE2_BETAS
    _table(args, emit_table2(betas, TABLE2_LAMBDAS, args.tol, args.quad_scheme), "lambda", "g")


def cmd_sign(args):
    if args.flow == "kdv":
        profile, _ = _kdv_profile(args)
        grid = _floats(args.grid) if args.grid else list(TABLE1_ETAS)
        report = classify_kdv_sign(profile, grid, tol=args.tol)
    else:
        profile, _ = _nls_profile(args)
        grid = _floats(args.grid) if args.grid else list(TABLE2_LAMBDAS)
        report = check_nls_condition(profile, grid, tol=args.tol)
    payload = report.to_dict()
    payload["beta"] = args.beta
    dio.write_json(args.out, payload)


def cmd_lattice(args):
    profile = NlsBetaWell(_need_beta(args))
    x_range = None
    if args.x_min is not None or args.x_max is not None:
        if args.x_min is None or args.x_max is None:
            raise ValidationError("give both --x-min and --x-max")
        x_range = (args.x_min, args.x_max)
    lat = soliton_lattice(profile, args.epsilon, args.time, x_range, args.samples)
    x = lat.field.axis(0)
    _emit(args, lambda: dio.csv_text(["x", "rho"], zip(x, lat.field.values), args.precision),
          lambda: {"epsilon": lat.epsilon, "time": lat.time, "wavenumbers": lat.wavenumbers,
                   "invariants": lat.check_invariants().to_dict()})


def cmd_simulate(args):
    from dispersion_lab.semiclassical import Grid1D, kdv_max_dt, solve_kdv, solve_nls

    grid = Grid1D(args.length, args.grid_n)
    beta = _need_beta(args)
    steps = int(round(args.t_final / args.dt))
    snap = args.snap_every
    if args.flow == "kdv":
        profile = KdvBetaWell(beta)
        dt = args.dt
        log.info("KdV stability limit %.3e", kdv_max_dt(profile.u0(grid.x), grid))
        traj = solve_kdv(profile.u0, args.epsilon, grid, dt, args.t_final, snap, strict=args.strict)
    else:
        profile = NlsBetaWell(beta)
        traj = solve_nls(profile.amplitude, profile.phase, args.epsilon, grid, args.dt, args.t_final,
                         snap, strict=args.strict)
    out = Path(args.out or "run")
    # frames feed later commands (wigner, prop1), so they are always written losslessly
    manifest = dio.write_trajectory(out, traj, "full")
    report = traj.conservation_report()
    log.info("%d steps, manifest %s, conservation %s", steps, manifest, "ok" if report.passed else "drifted")
    dio.write_json(out / "conservation.json", report.to_dict())


def cmd_wigner(args):
    from dispersion_lab.wigner import wigner_space, wigner_time

    field = dio.read_field(args.input)
    if args.mode == "space":
        w = wigner_space(field, args.window)
        base, dual = w.base_axes[0], w.dual_axes[0]
        names = ("x", "k")
    else:
        from dispersion_lab.wigner import gaussian_theta

        theta = gaussian_theta(args.window) if args.window else None
        w = wigner_time(field.values, field.spacing[0], theta, t0=field.origin[0])
        base, dual = w.base_axes[0], w.dual_axes[0]
        names = ("t", "tau")
    vals = w.values
    if np.iscomplexobj(vals):
        header = [*names, "re", "im"]
        rows = ((b, k, vals[i, j].real, vals[i, j].imag) for i, b in enumerate(base) for j, k in enumerate(dual))
    else:
        header = [*names, "value"]
        rows = ((b, k, vals[i, j]) for i, b in enumerate(base) for j, k in enumerate(dual))
    _emit(args, lambda: dio.csv_text(header, rows, args.precision),
          lambda: {"mode": w.mode, "window": w.window, names[0]: base, names[1]: dual,
                   "values": vals.real, **({"imag": vals.imag} if np.iscomplexobj(vals) else {})})


def cmd_decompose(args):
    from dispersion_lab.wigner import tracefree_decompose

    S = dio.read_field2d(args.s_field, dio.TENSOR_NAMES, (2, 2))
    u = dio.read_field2d(args.u_field, dio.VECTOR_NAMES, (2,))
    res = tracefree_decompose(S, u, args.eps_basis, method=args.derivative)
    nu = res.nu_turb.values
    delta = res.delta.values
    rnorm = np.sqrt(np.sum(res.residual.values**2, axis=(-2, -1)))
    out = FieldGrid(np.stack([nu, delta, rnorm], axis=-1), S.spacing, S.origin)
    _emit(args, lambda: dio.field2d_csv(out, ["nu", "delta", "residual"], args.precision),
          lambda: {"nu": nu, "delta": delta, "residual_norm": rnorm,
                   "masked_nu": int(res.nu_turb.mask.sum()), "masked_delta": int(res.delta.mask.sum())})


def cmd_prop1(args):
    from dispersion_lab.wigner import prop1_report

    path = Path(args.runs)
    try:
        meta = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    base = path.parent
    try:
        members = [dio.read_trajectory(base / m) for m in meta["members"]]
        limit = dio.read_trajectory(base / meta["limit"])
    except KeyError as exc:
        raise DataError(f"{path} lacks {exc}") from exc
    nu_spec = meta.get("nu", 0.0)
    if isinstance(nu_spec, (int, float)):
        nu = np.full(limit.frames.shape, float(nu_spec))
    else:
        nu = np.asarray(dio.read_trajectory(base / nu_spec).frames, dtype=float)
    runs = np.stack([m.frames for m in members])
    horizon = args.horizon if args.horizon is not None else meta.get("horizon")
    report = prop1_report(runs, limit.frames, nu, limit.times, (limit.grid.dx,), horizon, tol=args.diag_tol)
    dio.write_json(args.out, report.to_dict())


# ---------------------------------------------------------------------------
# parser


def _common(p):
    p.add_argument("--tol", type=float, default=DEFAULT_REL_TOL, help="quadrature relative tolerance")
    p.add_argument("--out", default=None, help="output path (stdout when omitted)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--precision", choices=dio.PRECISIONS, default="table",
                   help="table: 5 decimals; full: 17 significant digits")
    p.add_argument("--quad-scheme", choices=SCHEMES, default="de")
    p.add_argument("--seed", type=int, default=0, help="seed for stochastic features (none at present)")
    p.add_argument("--config", default=None, help="key = value file; explicit flags win")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dispersion-lab", description="Weak limits of small-dispersion KdV and NLS flows.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phi", help="Whitham density on a grid")
    p.add_argument("flow", choices=("kdv", "nls"))
    p.add_argument("--beta", type=float)
    p.add_argument("--profile", help="sampled profile CSV instead of --beta")
    p.add_argument("--eta-min", "--lambda-min", dest="min", type=float)
    p.add_argument("--eta-max", "--lambda-max", dest="max", type=float)
    p.add_argument("--steps", type=int, default=9)
    _common(p)
    p.set_defaults(func=cmd_phi)

    for name, func, help_text in (("table1", cmd_table1, "KdV phi table"), ("table2", cmd_table2, "NLS g table")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--betas", help="comma-separated betas (default: the standard set)")
        p.add_argument("--layout", choices=("long", "wide"), default="long")
        _common(p)
        p.set_defaults(func=func)

    p = sub.add_parser("sign", help="sign of the turbulent viscosity (JSON report)")
    p.add_argument("flow", choices=("kdv", "nls"))
    p.add_argument("--beta", type=float)
    p.add_argument("--profile")
    p.add_argument("--grid", help="comma-separated eta or lambda values")
    _common(p)
    p.set_defaults(func=cmd_sign)

    p = sub.add_parser("lattice", help="dark-soliton lattice |u|^2 samples")
    p.add_argument("--beta", type=float)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--time", type=float, required=True)
    p.add_argument("--x-min", type=float)
    p.add_argument("--x-max", type=float)
    p.add_argument("--samples", type=int)
    _common(p)
    p.set_defaults(func=cmd_lattice)

    p = sub.add_parser("simulate", help="pseudo-spectral run; writes frames and manifest.json")
    p.add_argument("flow", choices=("kdv", "nls"))
    p.add_argument("--beta", type=float)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--grid-n", type=int, default=1024)
    p.add_argument("--length", type=float, default=60.0)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--t-final", type=float, required=True)
    p.add_argument("--snap-every", type=int, default=0)
    p.add_argument("--strict", action="store_true", help="fail (exit 2) when conservation drifts")
    _common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("wigner", help="Wigner transform of a 1-D field or time series")
    p.add_argument("mode", choices=("space", "time"))
    p.add_argument("--input", required=True, help="CSV x,value or x,re,im (x is time in time mode)")
    p.add_argument("--window", type=float, help="Gaussian window width in the shift variable")
    _common(p)
    p.set_defaults(func=cmd_wigner)

    p = sub.add_parser("decompose", help="project a trace-free tensor on B(u) and Phi(u)")
    p.add_argument("--s-field", required=True, help="CSV x,y,s11,s12,s21,s22")
    p.add_argument("--u-field", required=True, help="CSV x,y,u1,u2")
    p.add_argument("--eps-basis", type=float, default=1e-12)
    p.add_argument("--derivative", choices=("fd", "spectral"), default="fd")
    _common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("prop1", help="strong-convergence gap versus turbulent dissipation")
    p.add_argument("--runs", required=True, help="JSON with members, limit and optional nu, horizon")
    p.add_argument("--horizon", type=float)
    p.add_argument("--diag-tol", type=float, default=1e-6)
    _common(p)
    p.set_defaults(func=cmd_prop1)
    return parser


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` starts a comment. Keys use flag spelling."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    # the config file is read before the full parse so that it can supply
    # flags the subcommand marks as required
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    early, _ = pre.parse_known_args(argv)
    choices = parser._subparsers._group_actions[0].choices
    command = next((a for a in argv if a in choices), None)
    if early.config and command:
        config = read_config(early.config)
        sub = choices[command]
        known = {a.dest: a for a in sub._actions}
        unknown = sorted(set(config) - set(known))
        if unknown:
            raise ValidationError(f"unknown config keys for {command}: {', '.join(unknown)}")
        for key, value in config.items():
            action = known[key]
            action.required = False  # supplied by the config file
            if isinstance(action, argparse._StoreTrueAction):
                value = value.lower() in ("1", "true", "yes")
            elif action.type is not None:
                try:
                    value = action.type(value)
                except ValueError as exc:
                    raise ValidationError(f"config key {key}: {exc}") from exc
            sub.set_defaults(**{key: value})
    args = parser.parse_args(argv)
    _validate(args)
    return args


def _validate(args):
    if args.tol <= 0 or not math.isfinite(args.tol):
        raise ValidationError("--tol must be positive")
    for name in ("epsilon", "time", "dt", "t_final", "length"):
        value = getattr(args, name, None)
        if value is not None and not value > 0:
            raise ValidationError(f"--{name.replace('_', '-')} must be positive")
    if getattr(args, "snap_every", 0) < 0:
        raise ValidationError("--snap-every must be nonnegative")


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        args.func(args)
    except DispersionLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
