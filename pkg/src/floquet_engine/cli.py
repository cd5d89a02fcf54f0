"""Command-line interface.

Four subcommands: ``limit-cycle`` writes one period of the closed-form
cycle as CSV with a JSON summary sidecar, ``simulate`` propagates the
moment equations and writes the trace with cumulative work and heat
columns, ``sweep`` maps efficiency and power over cycle durations with a
process pool, and ``validate`` runs the built-in consistency batteries.

Every output comes with a run manifest (same path plus
``.manifest.json``).  All files are deterministic: CSV uses comma
separators, '.' decimals and LF line endings; JSON is UTF-8 with sorted
keys.  Exit codes: 0 success, 1 error or failed validation, 2 requested
cycle is unstable, 3 propagation diverged.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (
    SecondMoments,
    _stroke_of,
    convergence_report,
    period_map,
    propagate,
    stroboscopic_fixed_point,
)
from .errors import FloquetEngineError, ProtocolError
from .floquet import limit_cycle_moments, solve_frames, stability
from .protocols import BUILTIN_DEFAULTS, as_bosonic, load_protocol
from .thermo import energy, work_heat_ledger

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSTABLE = 2
EXIT_DIVERGED = 3

LIMIT_CYCLE_COLUMNS = ("t,Omega,omega,lambda_re,lambda_im,gamma,N,M_re,M_im,"
                       "n,m_re,m_im,energy")
SIMULATE_COLUMNS = ("t,Omega,omega,gamma,n,m_re,m_im,energy,"
                    "work_cum,heat_hot_cum,heat_cold_cum")


def _fmt(x):
    x = float(x)
    if x == 0.0:
        x = 0.0  # normalize negative zero
    return f"{x:.12g}"


def _write_json(path, obj):
    path = Path(path)
    path.write_text(json.dumps(obj, sort_keys=True, indent=2,
                               ensure_ascii=False) + "\n", encoding="utf-8")
    return str(path)


def _finite_or_none(x):
    if x is None:
        return None
    x = float(x)
    return x if np.isfinite(x) else None


def _resolve_config(arg):
    """Accept a builtin name or a JSON file path; return the config dict."""
    if arg in BUILTIN_DEFAULTS:
        return {"builtin": arg}
    path = Path(arg)
    if path.exists():
        try:
            return json.loads(path.read_text())
        except json.JSONDecodeError as err:
            raise ProtocolError(f"config is not valid JSON: {err}") from None
    raise ProtocolError(
        f"config {arg!r} is neither a builtin "
        f"({sorted(BUILTIN_DEFAULTS)}) nor an existing file")


def _manifest(command, args, config, outputs, tolerances):
    return {
        "command": command,
        "config": config,
        "deterministic": True,
        "outputs": [str(o) for o in outputs],
        "package_version": __version__,
        "parameters": {k: _finite_or_none(v) if isinstance(v, float) else v
                       for k, v in args.items()},
        "tolerances": tolerances,
    }


def _stability_summary(frames):
    rep = stability(frames)
    return {
        "Lambda_bar_re": float(np.real(frames.Lambda_bar)),
        "Lambda_bar_im": float(np.imag(frames.Lambda_bar)),
        "gamma_bar": float(frames.gamma_bar),
        "phase": frames.unitary.phase_label,
        "sigma": "1" if frames.unitary.sigma == 1 else "i",
        "stable": rep.stable,
        "margin": _finite_or_none(rep.margin),
        "ratio": _finite_or_none(rep.ratio),
        "note": rep.note,
    }, rep


# ---------------------------------------------------------------------------
# limit-cycle

def cmd_limit_cycle(args):
    config = _resolve_config(args.config)
    proto = load_protocol(config, period_override=args.period)
    bos = as_bosonic(proto)
    frames = solve_frames(bos, tol=args.tol)
    summary, rep = _stability_summary(frames)

    T = bos.period
    ts = np.linspace(0.0, T, args.samples, endpoint=False)
    n, m, mbar = limit_cycle_moments(frames, ts)
    om = np.real(bos.omega(ts))
    lam = np.asarray(bos.lam(ts), dtype=complex)
    gam = np.real(bos.gamma(ts))
    bN = np.real(bos.bath_N(ts))
    bM = np.asarray(bos.bath_M(ts), dtype=complex)
    Omega = bos.mechanical_frequency(ts)
    e = energy(np.array([n, m, mbar]), om, lam)

    out = Path(args.out or "limit_cycle.csv")
    lines = [LIMIT_CYCLE_COLUMNS]
    for i in range(len(ts)):
        lines.append(",".join(_fmt(v) for v in (
            ts[i], Omega[i], om[i], lam[i].real, lam[i].imag, gam[i],
            bN[i], bM[i].real, bM[i].imag, n[i].real, m[i].real, m[i].imag,
            e[i])))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")

    sidecar = _write_json(str(out) + ".json", summary)
    _write_json(str(out) + ".manifest.json", _manifest(
        "limit-cycle", {"period": bos.period, "samples": args.samples},
        config, [out, sidecar], {"frames": args.tol}))
    print(f"wrote {out} ({args.samples} rows) and {sidecar}")
    if rep.stable is False:
        print("warning: cycle is unstable; the table is the formal cycle, "
              "not an attractor")
        return EXIT_UNSTABLE
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate

def _gl_nodes(order=16):
    return np.polynomial.legendre.leggauss(order)


def _simulate_grid(bos, n_periods, samples_per_period):
    T = bos.period
    base = np.linspace(0.0, T, samples_per_period, endpoint=False)
    ts = np.concatenate([base + k * T for k in range(n_periods)]
                        + [[n_periods * T]])
    edges = np.concatenate([bos.boundaries[:-1] + k * T
                            for k in range(n_periods)]
                           + [[n_periods * T]])
    grid = np.unique(np.concatenate([ts, edges]))
    return grid


def _flux_rows(bos, traj, a, b, x, w):
    """Work and heat flux integrals over [a, b] (single-stroke interval)."""
    k, shift = _stroke_of(bos, 0.5 * (a + b))
    ts = 0.5 * (a + b) + 0.5 * (b - a) * x
    tb = ts - shift
    om = np.real(bos.omega.pieces[k].value(tb))
    dom = np.real(bos.omega.pieces[k].deriv(tb))
    lam = np.asarray(bos.lam.pieces[k].value(tb), dtype=complex)
    dlam = np.asarray(bos.lam.pieces[k].deriv(tb), dtype=complex)
    gam = np.real(bos.gamma.pieces[k].value(tb))
    bN = np.real(bos.bath_N.pieces[k].value(tb))
    bM = np.asarray(bos.bath_M.pieces[k].value(tb), dtype=complex)
    v = traj(ts)
    nn, mm, mb = v[0], v[1], v[2]
    w_flux = dom * (np.real(nn) + 0.5) \
        + np.real(dlam * mm + np.conj(dlam) * mb) / 2.0
    dn = 1j * lam * mm - 1j * np.conj(lam) * mb - gam * nn + gam * bN
    dm = -(2j * om + gam) * mm - 1j * np.conj(lam) * (2.0 * nn + 1.0) + gam * bM
    dmb = (2j * om - gam) * mb + 1j * lam * (2.0 * nn + 1.0) \
        + gam * np.conj(bM)
    q_flux = om * np.real(dn) + np.real(lam * dm + np.conj(lam) * dmb) / 2.0
    half = 0.5 * (b - a)
    return half * float(w @ w_flux), half * float(w @ q_flux), k


def cmd_simulate(args):
    config = _resolve_config(args.config)
    proto = load_protocol(config, period_override=args.period)
    bos = as_bosonic(proto)
    n_periods = args.periods
    out = Path(args.out or "simulate.csv")

    if n_periods == 0:
        out.write_text(SIMULATE_COLUMNS + "\n", encoding="utf-8",
                       newline="\n")
        _write_json(str(out) + ".manifest.json", _manifest(
            "simulate", {"periods": 0, "samples": args.samples},
            config, [out], {"propagation": args.tol}))
        print(f"wrote {out} (0 rows)")
        return EXIT_OK

    T = bos.period
    t_end = n_periods * T
    traj = propagate(SecondMoments.thermal(args.initial_n), bos, 0.0, t_end,
                     tol=args.tol)
    grid = _simulate_grid(bos, n_periods, args.samples)

    temps = bos.meta.get("temperatures")
    hot = cold = None
    if temps and any(tt is not None for tt in temps):
        hot = max(tt for tt in temps if tt is not None)
        cold = min(tt for tt in temps if tt is not None)

    x16, w16 = _gl_nodes(16)
    work_cum = np.zeros(len(grid))
    qh_cum = np.zeros(len(grid))
    qc_cum = np.zeros(len(grid))
    for i in range(1, len(grid)):
        a, b = grid[i - 1], grid[i]
        dW, dQ, k = _flux_rows(bos, traj, a, b, x16, w16)
        work_cum[i] = work_cum[i - 1] + dW
        tk = temps[k] if temps else None
        into_hot = (tk is not None and tk == hot) if hot is not None else dQ > 0
        qh_cum[i] = qh_cum[i - 1] + (dQ if into_hot else 0.0)
        qc_cum[i] = qc_cum[i - 1] + (0.0 if into_hot else dQ)

    v = traj(grid)
    om = np.real(bos.omega(grid % T))
    lam = np.asarray(bos.lam(grid % T), dtype=complex)
    gam = np.real(bos.gamma(grid % T))
    Omega = bos.mechanical_frequency(grid % T)
    e = energy(v, om, lam)

    lines = [SIMULATE_COLUMNS]
    for i in range(len(grid)):
        lines.append(",".join(_fmt(val) for val in (
            grid[i], Omega[i], om[i], gam[i], v[0, i].real, v[1, i].real,
            v[1, i].imag, e[i], work_cum[i], qh_cum[i], qc_cum[i])))
    out.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")

    strobo = traj.stroboscopic()
    rep = convergence_report(strobo)
    defect = float(np.linalg.norm(strobo[-1] - strobo[-2])) \
        if len(strobo) >= 2 else None
    summary = {
        "converged": rep.converged,
        "diverging": rep.growing,
        "final_stroboscopic_defect": defect,
        "contraction_ratio_per_period": _finite_or_none(rep.ratio),
        "growth_rate": (float(np.log(rep.ratio) / T)
                        if rep.growing and rep.ratio > 0 else None),
        "periods": n_periods,
        "work_total": float(work_cum[-1]),
        "heat_hot_total": float(qh_cum[-1]),
        "heat_cold_total": float(qc_cum[-1]),
    }
    sidecar = _write_json(str(out) + ".json", summary)
    _write_json(str(out) + ".manifest.json", _manifest(
        "simulate", {"periods": n_periods, "samples": args.samples,
                     "initial_n": args.initial_n},
        config, [out, sidecar], {"propagation": args.tol}))
    print(f"wrote {out} ({len(grid)} rows) and {sidecar}")
    if rep.growing:
        print(f"warning: moments diverge, growth rate "
              f"{summary['growth_rate']:.4g} per unit time")
        return EXIT_DIVERGED
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

def _parse_periods(text):
    if ":" in text:
        parts = text.split(":")
        if len(parts) == 2:
            a, b = float(parts[0]), float(parts[1])
            num = 20
        elif len(parts) == 3:
            a, b, num = float(parts[0]), float(parts[1]), int(parts[2])
        else:
            raise ProtocolError("period range must be start:stop[:count]")
        if num < 1 or b <= a:
            raise ProtocolError("period range must be increasing, count >= 1")
        return list(np.linspace(a, b, num))
    vals = [float(p) for p in text.split(",") if p.strip()]
    return vals


def _sweep_point(config, period, tol):
    try:
        proto = load_protocol(config, period_override=period)
        bos = as_bosonic(proto)
        frames = solve_frames(bos, tol=tol)
        rep = stability(frames)
        row = {"period": period, "stable": rep.stable,
               "ratio": _finite_or_none(rep.ratio)}
        if rep.stable is False:
            row.update(efficiency=None, power=None)
            return row
        led = work_heat_ledger(frames, bos)
        row.update(efficiency=led.efficiency, power=led.power)
        return row
    except Exception as err:  # reported inline, sweep carries on
        return {"period": period, "error": f"{type(err).__name__}: {err}"}


def _thread_count(args_threads, n_jobs):
    if args_threads is not None:
        n = args_threads
    else:
        env = os.environ.get("FLOQUET_ENGINE_THREADS")
        n = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(n, max(1, n_jobs)))


def cmd_sweep(args):
    config = _resolve_config(args.config)
    periods = sorted(_parse_periods(args.periods)) if args.periods else []
    out = Path(args.out or "sweep.json")
    workers = _thread_count(args.threads, len(periods))

    if not periods:
        rows = []
    elif workers == 1 or len(periods) == 1:
        rows = [_sweep_point(config, p, args.tol) for p in periods]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, [config] * len(periods),
                                 periods, [args.tol] * len(periods)))
    rows.sort(key=lambda r: r["period"])
    _write_json(out, rows)
    _write_json(str(out) + ".manifest.json", _manifest(
        "sweep", {"periods": periods, "workers": workers},
        config, [out], {"frames": args.tol}))
    n_err = sum(1 for r in rows if "error" in r)
    print(f"wrote {out} ({len(rows)} points, {n_err} errors)")
    return EXIT_OK if n_err == 0 else EXIT_ERROR


# ---------------------------------------------------------------------------
# validate

def _validate_closed_form(tol, nmax):
    from .protocols import CycleProtocol, constant_control
    b = np.array([0.0, 2.0])
    p = CycleProtocol(
        period=2.0, boundaries=b, labels=["const"],
        omega=constant_control(b, 1.0), lam=constant_control(b, 0.3),
        gamma=constant_control(b, 0.1), bath_N=constant_control(b, 0.5),
        bath_M=constant_control(b, 0.1j))
    lam = 0.3 + 0j
    A = np.array([[-0.1, 1j * lam, -1j * np.conj(lam)],
                  [-2j * np.conj(lam), -(2j + 0.1), 0.0],
                  [2j * lam, 0.0, 2j - 0.1]])
    bb = np.array([0.1 * 0.5, 0.1 * 0.1j - 1j * np.conj(lam),
                   0.1 * (-0.1j) + 1j * lam])
    direct = np.linalg.solve(A, -bb)
    frames = solve_frames(p, tol=tol)
    n, m, mbar = limit_cycle_moments(frames, np.array([0.0, 0.7, 1.4]))
    d1 = max(np.max(np.abs(n - direct[0])), np.max(np.abs(m - direct[1])),
             np.max(np.abs(mbar - direct[2])))
    fixed = stroboscopic_fixed_point(p).vector()
    d2 = float(np.max(np.abs(fixed - direct)))
    worst = max(d1, d2)
    return worst < 1e-8, f"max pairwise deviation {worst:.3e}"


def _validate_stability_battery(tol, nmax):
    from .protocols import (MechanicalProtocol, Piece, PiecewiseControl,
                            constant_control)
    worst_ok = True
    details = []
    for eps in (0.3, 0.5):
        period = np.pi
        b = np.array([0.0, period])

        def val(t, eps=eps):
            return np.sqrt(1.0 + eps * np.cos(2.0 * np.asarray(t)))

        def der(t, eps=eps):
            t = np.asarray(t)
            return -eps * np.sin(2.0 * t) / np.sqrt(1.0 + eps * np.cos(2.0 * t))

        Om = PiecewiseControl(b, [Piece(value=val, deriv=der, kind="custom")])

        def build(g):
            return as_bosonic(MechanicalProtocol(
                period=period, boundaries=b, labels=["drive"], Omega=Om,
                eta=1.0, gamma=constant_control(b, g), temperatures=[1.0]))

        frames = solve_frames(build(0.0), tol=tol, dissipative=False)
        thr = 2.0 * abs(float(np.imag(frames.Lambda_bar)))
        for factor, want_stable in ((1.1, True), (0.9, False)):
            pm = period_map(build(factor * thr), tol=1e-11)
            verdict = pm.spectral_radius < 1.0
            ok = verdict == want_stable
            worst_ok = worst_ok and ok
            details.append(f"eps={eps} x{factor}: "
                           f"{'ok' if ok else 'WRONG'}")
    return worst_ok, "; ".join(details)


def _validate_residual_audits(tol, nmax):
    from .dynamics import fock_oracle, fock_oracle_spectrum
    from .floquet import dissipative_residuals, unitary_residuals
    from .protocols import build_carnot_protocol
    proto = as_bosonic(build_carnot_protocol(300.0))
    frames = solve_frames(proto, tol=tol)
    B = unitary_residuals(proto, frames.unitary)
    C = dissipative_residuals(proto, frames.unitary, frames.dissipative)
    lam_bar = frames.Lambda_bar
    gb = frames.gamma_bar
    worst = max(
        float(np.max(np.abs(B[0].values - lam_bar))),
        B[1].max_abs(), B[2].max_abs(),
        float(np.max(np.abs(C[0].values - gb))),
        C[1].max_abs(), C[2].max_abs(), C[3].max_abs())
    # rotating-frame spectrum against the ladder formula on the low sectors
    eigs = fock_oracle_spectrum(
        fock_oracle(nmax).liouvillian(float(np.real(lam_bar)), 0.0, gb,
                                      0.0, 0.0))
    spec_defect = 0.0
    for nlev in range(5):
        for k2 in range(-nlev, nlev + 1, 2):
            want = -gb * nlev / 2.0 + 1j * float(np.real(lam_bar)) * k2
            spec_defect = max(spec_defect,
                              float(np.min(np.abs(eigs - want))))
    ok = worst < 1e-8 and spec_defect < 1e-8
    return ok, f"worst residual {worst:.3e}, spectrum defect {spec_defect:.3e}"


def cmd_validate(args):
    checks = [
        ("closed-form consistency", _validate_closed_form),
        ("stability battery", _validate_stability_battery),
        ("residual and spectrum audits", _validate_residual_audits),
    ]
    all_ok = True
    for name, fn in checks:
        try:
            ok, detail = fn(args.tol, args.nmax)
        except Exception as err:
            ok, detail = False, f"{type(err).__name__}: {err}"
        all_ok = all_ok and ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all_ok else EXIT_ERROR


# ---------------------------------------------------------------------------
# parser

def build_parser():
    ap = argparse.ArgumentParser(
        prog="floquet-engine",
        description="Limit cycles, stability and thermodynamics of a "
                    "periodically driven damped bosonic mode.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, tol_default):
        p.add_argument("--config", default="carnot-fig2",
                       help="builtin protocol name or JSON config path")
        p.add_argument("--out", default=None, help="output file path")
        p.add_argument("--tol", type=float, default=tol_default,
                       help="solver tolerance")

    p = sub.add_parser("limit-cycle",
                       help="closed-form limit cycle over one period")
    common(p, 1e-12)
    p.add_argument("--period", type=float, default=None,
                   help="override the cycle duration")
    p.add_argument("--samples", type=int, default=512,
                   help="rows over one period")
    p.set_defaults(fn=cmd_limit_cycle)

    p = sub.add_parser("simulate",
                       help="propagate the moment equations from a "
                            "thermal state")
    common(p, 1e-10)
    p.add_argument("--period", type=float, default=None,
                   help="override the cycle duration")
    p.add_argument("--periods", type=int, default=12,
                   help="number of periods to propagate")
    p.add_argument("--samples", type=int, default=128,
                   help="rows per period")
    p.add_argument("--initial-n", type=float, default=0.0,
                   help="initial thermal occupation")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("sweep",
                       help="efficiency and power over cycle durations")
    common(p, 1e-12)
    p.add_argument("--periods", default=None,
                   help="comma list '300,500,700' or range "
                        "'start:stop[:count]'")
    p.add_argument("--threads", type=int, default=None,
                   help="worker processes (default: FLOQUET_ENGINE_THREADS "
                        "or CPU count)")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("validate",
                       help="run the built-in consistency batteries")
    common(p, 1e-12)
    p.add_argument("--nmax", type=int, default=15,
                   help="Fock cutoff for spectral checks")
    p.set_defaults(fn=cmd_validate)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (FloquetEngineError, ProtocolError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
