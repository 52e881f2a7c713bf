"""Command-line front end.

Subcommands: ``resfind`` (single resonance, JSON), ``sweep`` (amplitude
sweep CSV), ``omegascan`` (frequency scan CSV), ``psieval`` (wave
reconstruction grid CSV), ``tdse`` (time-domain runs), ``selftest``.

Exit codes: 0 success, 1 invalid flags, 2 no zero found, 3 numerical
failure.  Every output embeds the resolved run configuration (JSON
header line prefixed '#' in CSV); identical configurations reproduce
byte-identical output.  ``FLOQUET_THREADS`` caps the sweep worker pool.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import selfcheck
from .errors import DrivenDeltaError, NoZeroFoundError
from .profiles import InitialWavefunction
from .reconstruct import WaveReconstructor
from .sheets import BARRIER, WELL, ModelParams, SheetConfig
from .tdse import evolve, make_grid, survival_decay
from .zeros import (Resonance, find_resonances, multiphoton_index,
                    refine_zero, residues, small_r_asymptote)
from .barrier import to_well_frame

SCHEMA = 1


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the interface contract is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _read_config_file(path):
    table = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith(("#", ";", "[")):
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            key, val = line.split("=", 1)
            table[key.strip().replace("-", "_")] = val.strip()
    return table


def _add_model_flags(p):
    p.add_argument("--omega", type=float, help="drive frequency > 0")
    p.add_argument("--r", type=float, help="drive amplitude >= 0")
    p.add_argument("--potential", choices=[WELL, BARRIER], default=WELL)
    p.add_argument("--sheet", default="usual",
                   help="'usual' or 'flip:n[,m,...]' relative to it")
    p.add_argument("--psi0", default="poly_bump",
                   choices=["poly_bump", "truncated_exponential",
                            "piecewise_cubic", "zero"])
    p.add_argument("--psi0-support", type=float, default=1.0)
    p.add_argument("--psi0-rate", type=float, default=1.0)
    p.add_argument("--psi0-knots", default=None,
                   help="CSV file (columns x, re, im) for piecewise_cubic")
    p.add_argument("--config", default=None,
                   help="key=value file merged under explicit flags")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], default=None)


def _parse_sheet(spec: str, omega: float) -> SheetConfig:
    cfg = SheetConfig.usual(omega)
    spec = spec.strip()
    if spec in ("usual", ""):
        return cfg
    if spec.startswith("flip:"):
        ns = [int(tok) for tok in spec[5:].split(",") if tok]
        return cfg.flipped(*ns)
    raise ValueError(f"unknown sheet spec {spec!r}")


def _build_psi0(args) -> InitialWavefunction:
    if args.psi0 == "poly_bump":
        return InitialWavefunction.poly_bump(support=args.psi0_support)
    if args.psi0 == "truncated_exponential":
        return InitialWavefunction.truncated_exponential(
            rate=args.psi0_rate, support=args.psi0_support)
    if args.psi0 == "zero":
        return InitialWavefunction.zero(support=args.psi0_support)
    if args.psi0_knots is None:
        raise ValueError("piecewise_cubic needs --psi0-knots")
    data = np.loadtxt(args.psi0_knots, delimiter=",", ndmin=2)
    return InitialWavefunction.piecewise_cubic(
        data[:, 0], data[:, 1] + 1j * data[:, 2])


def _model(args) -> ModelParams:
    if args.omega is None or args.r is None:
        raise ValueError("--omega and --r are required")
    if args.r < 0:
        raise ValueError("r < 0 is reserved for the internal barrier frame")
    return ModelParams(omega=args.omega, r=args.r,
                       potential_kind=args.potential)


def _frame(params: ModelParams, sheet_spec: str):
    """(solver params, solver cfg, src signs, reference cfg, e_sign)."""
    cfg_user = _parse_sheet(sheet_spec, params.omega)
    if params.potential_kind == BARRIER:
        reference = SheetConfig.usual(params.omega).flipped_all()
        cfg = cfg_user.flipped_all()
        solver = replace(params, potential_kind=WELL)
        return solver, cfg, (1.0, -1.0), reference, -1.0
    return params, cfg_user, (1.0, 1.0), SheetConfig.usual(params.omega), 1.0


def _echo(args, command):
    table = {"command": command, "schema": SCHEMA}
    for key, val in sorted(vars(args).items()):
        if key in ("func", "config") or val is None:
            continue
        table[key] = val
    return table


def _open_out(args):
    if args.out:
        return open(args.out, "w"), True
    return sys.stdout, False


def _fmt(x: float) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return repr(float(x))


def _write_csv(args, command, header, rows):
    fh, close = _open_out(args)
    try:
        fh.write("# " + json.dumps(_echo(args, command), sort_keys=True)
                 + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if not isinstance(v, str) else v
                              for v in row) + "\n")
    finally:
        if close:
            fh.close()


def _resonance_json(res: Resonance, params: ModelParams):
    out = {
        "omega": params.omega,
        "r": params.r,
        "potential": params.potential_kind,
        "sheet_id": res.sheet.sheet_id(),
        "z_star": [res.z_star.real, res.z_star.imag],
        "p_star": [res.p_star.real, res.p_star.imag],
        "gamma": res.gamma,
        "lambda_paper": [res.lambda_paper.real, res.lambda_paper.imag],
        "visible": res.visible,
        "newton_residual": res.newton_residual,
        "disk_count": res.disk_count,
    }
    if res.residues is not None:
        out["residues"] = [[int(n), res.residues[n].real,
                            res.residues[n].imag]
                           for n in res.residues.indices()]
    return out


def _parse_grid(spec: str):
    parts = spec.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    start, end, step = (float(parts[0]), float(parts[1]), float(parts[2]))
    n = int(math.floor((end - start) / step + 1e-9)) + 1
    return [start + k * step for k in range(n)]


# ---------------------------------------------------------------------------
# subcommands


def cmd_resfind(args):
    params = _model(args)
    solver, cfg, (src_sign, src_sqrt_sign), reference, _ = _frame(
        params, args.sheet)
    psi0 = _build_psi0(args)
    if args.guess:
        re_s, im_s = args.guess.split(",")
        guess = complex(float(re_s), float(im_s))
        found = [refine_zero(guess, solver, cfg, reference=reference)]
    else:
        found = find_resonances(solver, cfg, psi0=psi0, reference=reference)
    if not found:
        print("no Wronskian zero found in the search region",
              file=sys.stderr)
        return 2
    for res in found:
        if res.residues is None:
            residues(res, solver, psi0, src_sign=src_sign,
                     src_sqrt_sign=src_sqrt_sign)
    payload = [_resonance_json(res, params) for res in found]
    doc = {"config": _echo(args, "resfind"),
           "resonances": payload}
    fh, close = _open_out(args)
    try:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    finally:
        if close:
            fh.close()
    return 0


def _sweep_worker(task):
    (r, omega, potential, sheet_spec, track_seed) = task
    params = ModelParams(omega=omega, r=r, potential_kind=potential)
    solver, cfg, _, reference, _ = _frame(params, sheet_spec)
    rows = []
    status = "ok"
    count = 0
    try:
        zeros = find_resonances(solver, cfg, reference=reference)
        count = len(zeros)
        if track_seed is not None and not zeros:
            try:
                res = refine_zero(complex(*track_seed), solver, cfg,
                                  reference=reference)
                zeros = [res]
            except DrivenDeltaError:
                pass
        for res in zeros:
            rows.append((omega, r, res.sheet.sheet_id(), res.z_star.real,
                         res.z_star.imag, res.gamma, res.visible,
                         res.newton_residual, count, status))
    except DrivenDeltaError as exc:
        status = f"error:{type(exc).__name__}"
        rows.append((omega, r, sheet_spec, float("nan"), float("nan"),
                     float("nan"), False, float("nan"), 0, status))
    if not rows:
        rows.append((omega, r, sheet_spec, float("nan"), float("nan"),
                     float("nan"), False, float("nan"), 0, status))
    return rows


def cmd_sweep(args):
    params = _model(args)
    rs = np.linspace(args.r_start, args.r_end, args.r_steps)
    tasks = []
    seed = None
    for r in rs:
        tasks.append((float(r), params.omega, params.potential_kind,
                      args.sheet, None))
    threads = int(os.environ.get("FLOQUET_THREADS", "1"))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_worker, tasks))
    else:
        results = []
        seed = None
        for task in tasks:
            if args.track and seed is not None:
                task = task[:4] + (seed,)
            rows = _sweep_worker(task)
            good = [row for row in rows if not math.isnan(row[3])]
            seed = (good[-1][3], good[-1][4]) if good else seed
            results.append(rows)
    rows = [row for batch in results for row in batch]
    rows.sort(key=lambda row: (row[1], str(row[2]),
                               row[4] if not math.isnan(row[4]) else 1e9))
    _write_csv(args, "sweep",
               ["omega", "r", "sheet_id", "re_z", "im_z", "gamma",
                "visible", "newton_residual", "count", "status"], rows)
    return 0


def cmd_omegascan(args):
    if args.r is None:
        raise ValueError("--r is required")
    if args.r < 0:
        raise ValueError("r < 0 is reserved for the internal barrier frame")
    params_proto = ModelParams(omega=max(args.omega_start, 1e-6), r=args.r,
                               potential_kind=args.potential)
    omegas = np.linspace(args.omega_start, args.omega_end, args.points)
    rows = []
    for omega in omegas:
        params = ModelParams(omega=float(omega), r=params_proto.r,
                             potential_kind=params_proto.potential_kind)
        try:
            m = multiphoton_index(float(omega))
        except DrivenDeltaError:
            m = -1
        try:
            solver, cfg, _, reference, _ = _frame(params, args.sheet)
            a0 = small_r_asymptote(solver)
            res = refine_zero(a0 * params.r ** 2, solver, cfg,
                              check_simple=False, reference=reference)
            rows.append((float(omega), res.z_star.real, res.z_star.imag,
                         res.gamma, m, "ok"))
        except DrivenDeltaError as exc:
            rows.append((float(omega), float("nan"), float("nan"),
                         float("nan"), m, f"error:{type(exc).__name__}"))
    _write_csv(args, "omegascan",
               ["omega", "re_z", "im_z", "gamma", "m_estimate", "status"],
               rows)
    return 0


def cmd_psieval(args):
    params = _model(args)
    psi0 = _build_psi0(args)
    xs = _parse_grid(args.x)
    ts = _parse_grid(args.t)
    rec = WaveReconstructor(params, psi0,
                            cfg=_parse_sheet(args.sheet, params.omega)
                            if params.potential_kind == WELL else None,
                            n_modes=args.n_modes, nodes=args.nodes)
    rows = []
    for x in xs:
        for t in ts:
            d = rec.psi(x, t)
            rows.append((x, t, d.total.real, d.total.imag,
                         d.gamow.real, d.gamow.imag, abs(d.cut_sum),
                         abs(d.f_term)))
    _write_csv(args, "psieval",
               ["x", "t", "re_psi", "im_psi", "re_gamow", "im_gamow",
                "abs_cut", "abs_f"], rows)
    return 0


def cmd_tdse(args):
    params = _model(args)
    psi0 = _build_psi0(args)
    grid = make_grid(psi0, L=args.L, dx=args.dx, dt=args.dt,
                     boundary=args.boundary,
                     absorber_width=args.absorber_width,
                     absorber_strength=args.absorber_strength)
    window = None
    if args.survival:
        a, b = (float(tok) for tok in args.survival.split(","))
        window = (a, b)
    traj = evolve(grid, params, T=args.t_end, survival_window=window,
                  snapshot_stride=args.snapshot_stride,
                  check_boundary=not args.no_boundary_check)
    if args.survival_out and traj.survival is not None:
        sub = argparse.Namespace(**vars(args))
        sub.out = args.survival_out
        _write_csv(sub, "tdse-survival", ["t", "P_ab"],
                   list(zip(traj.times, traj.survival)))
    rows = []
    stride = max(1, args.x_stride)
    if traj.snapshots:
        for t, snap in traj.snapshots:
            for j in range(0, snap.size, stride):
                rows.append((t, traj.snapshot_x[j], snap[j].real,
                             snap[j].imag))
    else:
        step = max(1, int(round(args.sample_dt / grid.dt)))
        for m in range(0, traj.center.size, step):
            rows.append((traj.center_times[m], 0.0, traj.center[m].real,
                         traj.center[m].imag))
    _write_csv(args, "tdse", ["t", "x", "re_psi", "im_psi"], rows)
    if window is not None and args.fit_decay:
        fit = survival_decay(traj)
        print(f"# decay_rate={fit.rate!r} r_squared={fit.r_squared!r} "
              f"ok={fit.ok}", file=sys.stderr)
    return 0


def cmd_selftest(args):
    results = selfcheck.run(level=args.level)
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        if not ok:
            failed += 1
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 4


# ---------------------------------------------------------------------------


def build_parser():
    parser = _Parser(prog="drivendelta",
                     description="Resonances and wave reconstruction for "
                                 "the periodically driven delta potential")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("resfind", help="locate one resonance (JSON)")
    _add_model_flags(p)
    p.add_argument("--guess", default=None, help="re,im seed for Newton")
    p.set_defaults(func=cmd_resfind)

    p = sub.add_parser("sweep", help="amplitude sweep (CSV)")
    _add_model_flags(p)
    p.add_argument("--r-start", type=float, required=True)
    p.add_argument("--r-end", type=float, required=True)
    p.add_argument("--r-steps", type=int, required=True)
    p.add_argument("--track", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("omegascan", help="frequency scan (CSV)")
    _add_model_flags(p)
    p.add_argument("--omega-start", type=float, required=True)
    p.add_argument("--omega-end", type=float, required=True)
    p.add_argument("--points", type=int, required=True)
    p.set_defaults(func=cmd_omegascan)

    p = sub.add_parser("psieval", help="reconstructed psi grid (CSV)")
    _add_model_flags(p)
    p.add_argument("--x", default="0.0", help="grid a:b:step or value")
    p.add_argument("--t", required=True, help="grid a:b:step or value")
    p.add_argument("--n-modes", type=int, default=32)
    p.add_argument("--nodes", type=int, default=64)
    p.set_defaults(func=cmd_psieval)

    p = sub.add_parser("tdse", help="Crank-Nicolson run (CSV)")
    _add_model_flags(p)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--L", type=float, default=40.0)
    p.add_argument("--dx", type=float, default=0.02)
    p.add_argument("--dt", type=float, default=2e-4)
    p.add_argument("--boundary", default="reflecting",
                   choices=["reflecting", "absorbing_layer"])
    p.add_argument("--absorber-width", type=float, default=None)
    p.add_argument("--absorber-strength", type=float, default=1.0)
    p.add_argument("--survival", default=None, help="a,b window")
    p.add_argument("--survival-out", default=None)
    p.add_argument("--snapshot-stride", type=int, default=None)
    p.add_argument("--x-stride", type=int, default=50)
    p.add_argument("--sample-dt", type=float, default=0.05)
    p.add_argument("--fit-decay", action="store_true")
    p.add_argument("--no-boundary-check", action="store_true")
    p.set_defaults(func=cmd_tdse)

    p = sub.add_parser("selftest", help="run the invariant suite")
    p.add_argument("--level", choices=["fast", "full"], default="fast")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # pre-scan for a config file so its values become defaults
    if "--config" in argv:
        path = argv[argv.index("--config") + 1]
        table = _read_config_file(path)
    else:
        table = {}
    parser = build_parser()
    if table:
        for action in parser._subparsers._group_actions[0].choices.values():
            valid = {a.dest for a in action._actions}
            action.set_defaults(**{k: _coerce(v) for k, v in table.items()
                                   if k in valid})
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"drivendelta: error: {exc}", file=sys.stderr)
        return 1
    except NoZeroFoundError as exc:
        print(f"drivendelta: {exc}", file=sys.stderr)
        return 2
    except DrivenDeltaError as exc:
        json.dump({"error": str(exc), "type": type(exc).__name__},
                  sys.stdout, sort_keys=True)
        sys.stdout.write("\n")
        return 3


def _coerce(text: str):
    for caster in (int, float):
        try:
            return caster(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


if __name__ == "__main__":
    sys.exit(main())
