"""Work and heat accounting along a cycle, and quasi-static references.

The mean energy of the mode is

    <H> = omega (n + 1/2) + (lambda m + lambda* mbar) / 2.

Work flows through the controls,  dW/dt = omega' (n + 1/2) + (lambda' m +
lambda'* mbar) / 2,  with the control derivatives taken analytically from
the protocol (never by differencing samples), and heat is the residual of
the energy balance per stroke.  The quasi-static reference cycle has
closed forms for every corner and stroke; the finite-time ledger is
compared against it.
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import MomentTrajectory, SecondMoments
from .errors import FloquetEngineError, ProtocolError
from .floquet import FloquetFrames, limit_cycle_moments
from .protocols import as_bosonic, coth


def energy(state, omega, lam):
    """Mean energy for moments ``state`` at control values (omega, lambda).

    ``state`` may be a :class:`SecondMoments`, a (3,) vector or a (3, N)
    array of (n, m, mbar).  The imaginary residue (conjugation drift) is
    discarded.
    """
    if isinstance(state, SecondMoments):
        v = state.vector()
    else:
        v = np.asarray(state, dtype=complex)
    lam = np.asarray(lam, dtype=complex)
    val = omega * (np.real(v[0]) + 0.5) \
        + np.real(lam * v[1] + np.conj(lam) * v[2]) / 2.0
    return float(val) if np.ndim(val) == 0 else val


def _gauss_integrate(f, a, b, tol=1e-11):
    """Definite integral with doubling Gauss-Legendre and defect estimate."""
    prev = None
    val = 0.0
    defect = np.inf
    for order in (24, 48, 96, 192, 384):
        x, w = np.polynomial.legendre.leggauss(order)
        ts = 0.5 * (a + b) + 0.5 * (b - a) * x
        val = 0.5 * (b - a) * float(w @ f(ts))
        if prev is not None:
            defect = abs(val - prev)
            if defect <= tol * max(1.0, abs(val)):
                return val, defect
        prev = val
    return val, defect


def _moments_fn(traj, protocol):
    """Normalize trajectory input to a vectorized t -> (3, N) callable."""
    if isinstance(traj, FloquetFrames):
        frames = traj

        def fn(ts):
            n, m, mbar = limit_cycle_moments(frames, ts)
            return np.array([n, m, mbar])

        return fn, 0.0, protocol.period
    if isinstance(traj, MomentTrajectory):
        return traj, traj.t0, traj.t1
    if callable(traj):
        return traj, 0.0, protocol.period
    raise TypeError(f"not a moments trajectory: {type(traj).__name__}")


@dataclass
class ThermoLedger:
    """Per-stroke work and heat over an integer number of periods.

    Sign convention: ``work`` is done on the system, heats are absorbed by
    the system, so an engine has work < 0 and power > 0.  ``efficiency``
    is None outside engine operation (no heat drawn from the hot side).
    """

    stroke_labels: list
    stroke_work: np.ndarray
    stroke_heat: np.ndarray
    work: float
    heat_hot: float
    heat_cold: float
    power: float
    n_periods: int
    window: tuple
    boundary_times: np.ndarray
    boundary_energies: np.ndarray
    closure_defect: float
    quadrature_defect: float
    adiabatic_defect: float
    efficiency: float = field(init=False)

    def __post_init__(self):
        self.efficiency = (-self.work / self.heat_hot
                           if self.heat_hot > 0 else None)

    @property
    def first_law_defect(self):
        """|Delta E - W - Q| over the window; zero by construction of Q."""
        dE = self.boundary_energies[-1] - self.boundary_energies[0]
        return abs(dE - self.work - float(np.sum(self.stroke_heat)))


def _stroke_temperatures(protocol):
    temps = protocol.meta.get("temperatures")
    if temps is None:
        return None
    return list(temps)


def work_heat_ledger(traj, protocol, tol=1e-11, adiabatic_tol=1e-7):
    """Work and heat ledger of a trajectory over whole periods.

    ``traj`` is a :class:`MomentTrajectory`, a :class:`FloquetFrames`
    (ledger of the limit cycle over one period), or a vectorized callable
    t -> (3, N).  The trajectory must span an integer number of periods
    starting at a period boundary.  Per-stroke work integrals use the
    analytic control derivatives; heat is the per-stroke energy residual,
    checked to vanish on undamped strokes.  Heats are attributed to the
    hot and cold baths through the protocol's stroke temperatures when it
    has them, otherwise by sign.
    """
    protocol = as_bosonic(protocol)
    T = protocol.period
    edges = protocol.boundaries
    fn, t0, t1 = _moments_fn(traj, protocol)
    n_periods = int(round((t1 - t0) / T))
    if n_periods < 1 or abs(t1 - t0 - n_periods * T) > 1e-9 * T:
        raise ProtocolError("trajectory must span a whole number of periods")
    if abs((t0 - edges[0]) % T) > 1e-9 * T \
            and abs((t0 - edges[0]) % T - T) > 1e-9 * T:
        raise ProtocolError("trajectory must start at a period boundary")

    n_strokes = len(protocol.labels)
    stroke_work = np.zeros(n_strokes)
    stroke_heat = np.zeros(n_strokes)
    boundary_times = [t0]
    boundary_energies = []
    quad_defect = 0.0
    adiabatic_defect = 0.0

    def controls_end_of(k, tb):
        """omega, lambda at stroke k's own endpoint (one-sided limit)."""
        return (float(protocol.omega.pieces[k].value(tb)),
                complex(protocol.lam.pieces[k].value(tb)))

    e_prev = None
    for j in range(n_periods):
        shift = t0 - edges[0] + j * T
        for k in range(n_strokes):
            a, b = edges[k] + shift, edges[k + 1] + shift
            om_p = protocol.omega.pieces[k]
            lam_p = protocol.lam.pieces[k]

            if e_prev is None:
                w0, l0 = controls_end_of(k, edges[k])
                e_prev = energy(fn(np.array([a]))[:, 0], w0, l0)
                boundary_energies.append(e_prev)

            def dW(ts, k=k, shift=shift, om_p=om_p, lam_p=lam_p):
                tb = ts - shift
                v = fn(ts)
                dom = np.asarray(om_p.deriv(tb), dtype=float)
                dlam = np.asarray(lam_p.deriv(tb), dtype=complex)
                return dom * (np.real(v[0]) + 0.5) \
                    + np.real(dlam * v[1] + np.conj(dlam) * v[2]) / 2.0

            W, d = _gauss_integrate(dW, a, b, tol)
            quad_defect = max(quad_defect, d)

            wb, lb = controls_end_of(k, edges[k + 1])
            e_next = energy(fn(np.array([b]))[:, 0], wb, lb)
            Q = e_next - e_prev - W
            g_samples = np.real(protocol.gamma.pieces[k].value(
                np.linspace(edges[k], edges[k + 1], 33)))
            if np.max(np.abs(g_samples)) == 0.0:
                adiabatic_defect = max(adiabatic_defect, abs(Q))
                if abs(Q) > adiabatic_tol * max(1.0, abs(e_next)):
                    raise FloquetEngineError(
                        f"heat {Q:.3e} on undamped stroke "
                        f"{protocol.labels[k]!r}; quadrature defect {d:.3e}")
                Q = 0.0
            stroke_work[k] += W
            stroke_heat[k] += Q
            boundary_times.append(b)
            boundary_energies.append(e_next)
            e_prev = e_next

    temps = _stroke_temperatures(protocol)
    if temps is not None and any(tt is not None for tt in temps):
        hot = max(tt for tt in temps if tt is not None)
        cold = min(tt for tt in temps if tt is not None)
        heat_hot = float(sum(stroke_heat[k] for k, tt in enumerate(temps)
                             if tt is not None and tt == hot))
        heat_cold = 0.0 if cold == hot else float(
            sum(stroke_heat[k] for k, tt in enumerate(temps)
                if tt is not None and tt == cold))
    else:
        heat_hot = float(np.sum(stroke_heat[stroke_heat > 0]))
        heat_cold = float(np.sum(stroke_heat[stroke_heat < 0]))

    work = float(np.sum(stroke_work))
    be = np.asarray(boundary_energies)
    return ThermoLedger(
        stroke_labels=list(protocol.labels), stroke_work=stroke_work,
        stroke_heat=stroke_heat, work=work, heat_hot=heat_hot,
        heat_cold=heat_cold, power=-work / (t1 - t0), n_periods=n_periods,
        window=(t0, t1), boundary_times=np.asarray(boundary_times),
        boundary_energies=be,
        closure_defect=abs(be[-1] - be[0]),
        quadrature_defect=quad_defect, adiabatic_defect=adiabatic_defect)


# ---------------------------------------------------------------------------
# quasi-static reference cycle

def _thermal_energy(Omega, T):
    return 0.5 * Omega * coth(Omega / (2.0 * T))


def _isothermal_work(T, Omega_i, Omega_f):
    return T * np.log(np.sinh(Omega_f / (2.0 * T))
                      / np.sinh(Omega_i / (2.0 * T)))


@dataclass
class QuasistaticCycle:
    """Closed forms for the reversible reference of the four-stroke cycle.

    Corner order follows the protocol: a (start of the hot isotherm),
    b, c, d.  When the bath temperatures violate the reversibility
    constraint T_cold / T_hot = Omega_c / Omega_b the adiabats land off
    the isotherms and the corner relaxation heats are nonzero; they are
    reported, counted into the heats, and the efficiency drops below
    Carnot's.
    """

    Delta: float
    delta: float
    T_hot: float
    T_cold: float
    corner_freqs: np.ndarray          # [a, b, c, d]
    corner_energies: np.ndarray       # thermal energies at the corners
    stroke_works: np.ndarray          # [ab, bc, cd, da]
    relaxation_heats: tuple           # corner a, corner c
    heat_hot: float
    heat_cold: float
    work: float
    efficiency: float
    eta_carnot: float
    constraint_defects: tuple

    @property
    def reversible(self):
        return max(abs(d) for d in self.constraint_defects) < 1e-12

    def isotherm_energy(self, Omega, hot=True):
        return _thermal_energy(np.asarray(Omega, dtype=float),
                               self.T_hot if hot else self.T_cold)

    def energy_at(self, stroke, Omega):
        """Dashed-cycle energy at frequency ``Omega`` on stroke 0..3."""
        Omega = np.asarray(Omega, dtype=float)
        Wa, Wb, Wc, Wd = self.corner_freqs
        if stroke == 0:
            return _thermal_energy(Omega, self.T_hot)
        if stroke == 1:
            return 0.5 * Omega * coth(Wb / (2.0 * self.T_hot))
        if stroke == 2:
            return _thermal_energy(Omega, self.T_cold)
        if stroke == 3:
            return 0.5 * Omega * coth(Wd / (2.0 * self.T_cold))
        raise ValueError("stroke index must be 0..3")

    def cycle_curve(self, n_per_stroke=200):
        """(Omega, energy, stroke) samples tracing the reference cycle."""
        Wa, Wb, Wc, Wd = self.corner_freqs
        spans = [(Wa, Wb), (Wb, Wc), (Wc, Wd), (Wd, Wa)]
        oms, es, ks = [], [], []
        for k, (w0, w1) in enumerate(spans):
            om = np.linspace(w0, w1, n_per_stroke)
            oms.append(om)
            es.append(self.energy_at(k, om))
            ks.append(np.full(n_per_stroke, k))
        return np.concatenate(oms), np.concatenate(es), np.concatenate(ks)


def quasistatic_reference(Delta=1.0, delta=0.85, T_hot=1.0, T_cold=None):
    """Reversible reference of the cubic-cosine cycle, in closed form.

    ``T_cold`` defaults to the reversibility choice Delta T_hot /
    (Delta + delta); pass another value to see the irreversible corner
    relaxations and the efficiency loss.
    """
    if Delta <= 0 or delta <= 0 or T_hot <= 0:
        raise ProtocolError("need positive Delta, delta, T_hot")
    if T_cold is None:
        T_cold = Delta * T_hot / (Delta + delta)
    if T_cold <= 0 or T_cold >= T_hot:
        raise ProtocolError("need 0 < T_cold < T_hot")

    Wa = Delta + delta
    Wb = Delta
    Wc = Delta * Delta / (Delta + delta)
    Wd = Delta
    corner_freqs = np.array([Wa, Wb, Wc, Wd])

    Ea = _thermal_energy(Wa, T_hot)
    Eb = _thermal_energy(Wb, T_hot)
    Ec = _thermal_energy(Wc, T_cold)
    Ed = _thermal_energy(Wd, T_cold)

    # adiabats freeze the occupation at the isotherm they leave
    Ec_frozen = 0.5 * Wc * coth(Wb / (2.0 * T_hot))
    Ea_frozen = 0.5 * Wa * coth(Wd / (2.0 * T_cold))

    W_ab = _isothermal_work(T_hot, Wa, Wb)
    W_bc = Ec_frozen - Eb
    W_cd = _isothermal_work(T_cold, Wc, Wd)
    W_da = Ea_frozen - Ed

    Q_relax_c = Ec - Ec_frozen        # equilibration with the cold bath
    Q_relax_a = Ea - Ea_frozen        # equilibration with the hot bath
    Q_ab = Eb - Ea - W_ab
    Q_cd = Ed - Ec - W_cd

    heat_hot = Q_ab + Q_relax_a
    heat_cold = Q_cd + Q_relax_c
    work = W_ab + W_bc + W_cd + W_da
    eta_carnot = 1.0 - T_cold / T_hot
    efficiency = -work / heat_hot if heat_hot > 0 else None

    ratio = T_cold / T_hot
    return QuasistaticCycle(
        Delta=Delta, delta=delta, T_hot=T_hot, T_cold=T_cold,
        corner_freqs=corner_freqs,
        corner_energies=np.array([Ea, Eb, Ec, Ed]),
        stroke_works=np.array([W_ab, W_bc, W_cd, W_da]),
        relaxation_heats=(Q_relax_a, Q_relax_c),
        heat_hot=heat_hot, heat_cold=heat_cold, work=work,
        efficiency=efficiency, eta_carnot=eta_carnot,
        constraint_defects=(ratio - Wc / Wb, ratio - Wd / Wa))


# ---------------------------------------------------------------------------
# reversibility of a protocol's geometry

@dataclass
class ReversibilityReport:
    temperature_ratio: float
    corner_ratios: tuple
    defects: tuple

    @property
    def reversible(self):
        return max(abs(d) for d in self.defects) < 1e-9


def reversibility_check(mech):
    """Corner-frequency ratios against the bath temperature ratio.

    A four-stroke cycle alternating damped and undamped strokes closes
    reversibly only if T_cold / T_hot equals both Omega_c / Omega_b and
    Omega_d / Omega_a.  Returns the two defects; both vanish for the
    cubic-cosine cycle and are nonzero for the two-isochore cycle.
    """
    if not hasattr(mech, "Omega"):
        raise ProtocolError("reversibility check needs the mechanical form "
                            "(frequency and stroke temperatures)")
    if len(mech.labels) != 4:
        raise ProtocolError("reversibility check expects a four-stroke cycle")
    temps = [tt for tt in mech.temperatures if tt is not None]
    if not temps or max(temps) <= min(temps):
        raise ProtocolError("need two distinct bath temperatures")
    ratio = min(temps) / max(temps)
    b = mech.boundaries
    Wa, Wb, Wc, Wd = (float(mech.Omega(b[k])) for k in range(4))
    corner_ratios = (Wc / Wb, Wd / Wa)
    return ReversibilityReport(
        temperature_ratio=ratio, corner_ratios=corner_ratios,
        defects=(ratio - corner_ratios[0], ratio - corner_ratios[1]))
