"""Driving protocols: time-periodic controls for one bosonic mode.

A protocol fixes, over one period, the mode frequency, the squeezing drive,
the bath coupling rate and the bath occupation/squeezing.  Two surface
representations exist:

* mechanical: an oscillator frequency ``Omega(t) > 0`` with a constant gap
  parameter ``eta``, a coupling rate and per-stroke bath temperatures; this
  is the natural way to write piston-style engine cycles, and
  :func:`mechanical_to_bosonic` maps it onto the bosonic controls,
* bosonic: the controls ``omega(t)``, ``lambda(t)``, ``gamma(t)``,
  ``N(t)``, ``M(t)`` given directly.

All controls are piecewise smooth with declared stroke boundaries, carry
analytic derivatives (nothing in the package differentiates sampled data to
build thermodynamic integrands), and evaluate with one-sided limits at the
boundaries when addressed per segment.
"""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from . import _cheb
from .errors import ProtocolError

VALIDATOR_SAMPLES = 512


# ---------------------------------------------------------------------------
# smooth pieces

@dataclass
class Piece:
    """One smooth branch of a control, with value and derivative in global time."""
    value: object  # vectorized callable t -> values
    deriv: object  # vectorized callable t -> d(value)/dt
    kind: str = "custom"
    params: dict = field(default_factory=dict)


def _const_piece(v):
    v = complex(v) if isinstance(v, complex) else float(v)

    def val(t, v=v):
        return np.full(np.shape(t), v)

    def der(t):
        return np.zeros(np.shape(t))

    return Piece(val, der, "const", {"value": v})


def _cos3_piece(base, amp, period, origin=0.0):
    w = 2.0 * math.pi / period

    def val(t):
        return base + amp * np.cos(w * (np.asarray(t) - origin)) ** 3

    def der(t):
        th = w * (np.asarray(t) - origin)
        return -3.0 * amp * w * np.cos(th) ** 2 * np.sin(th)

    return Piece(val, der, "cos3",
                 {"base": base, "amp": amp, "period": period, "origin": origin})


def _linear_piece(v0, v1, a, b):
    slope = (v1 - v0) / (b - a)

    def val(t):
        return v0 + slope * (np.asarray(t) - a)

    def der(t):
        return np.full(np.shape(t), slope)

    return Piece(val, der, "linear", {"from": v0, "to": v1})


def _cosine_ramp_piece(v0, v1, a, b):
    d = b - a

    def val(t):
        return v0 + (v1 - v0) * 0.5 * (1.0 - np.cos(np.pi * (np.asarray(t) - a) / d))

    def der(t):
        return (v1 - v0) * (np.pi / (2.0 * d)) * np.sin(np.pi * (np.asarray(t) - a) / d)

    return Piece(val, der, "cosine-ramp", {"from": v0, "to": v1})


def _table_piece(times, values, a, b):
    times = np.asarray(times, dtype=float)
    values = np.asarray(values)
    if times.ndim != 1 or len(times) != len(values) or len(times) < 2:
        raise ProtocolError("table piece needs matching times/values, len >= 2")
    if np.any(np.diff(times) <= 0):
        raise ProtocolError("table times must be strictly increasing")
    if times[0] > a + 1e-12 * (b - a) or times[-1] < b - 1e-12 * (b - a):
        raise ProtocolError(
            f"table must cover its stroke [{a:g}, {b:g}]")
    spline = CubicSpline(times, values)
    dspline = spline.derivative()
    return Piece(lambda t: spline(np.asarray(t)),
                 lambda t: dspline(np.asarray(t)),
                 "table", {"times": times, "values": values})


def _mapped_piece(piece, fval, fder, kind="mapped"):
    """Compose a piece with a scalar map: value g(p(t)), derivative g'(p) p'."""

    def val(t):
        return fval(piece.value(t))

    def der(t):
        return fder(piece.value(t)) * piece.deriv(t)

    return Piece(val, der, kind, {"inner": piece.kind})


# ---------------------------------------------------------------------------
# piecewise control

class PiecewiseControl:
    """Scalar control over one period, smooth between declared boundaries.

    Point evaluation wraps time into the period and assigns each boundary to
    the stroke it starts ([a, b) convention); per-segment evaluation takes
    one-sided limits instead.
    """

    def __init__(self, boundaries, pieces):
        self.boundaries = np.asarray(boundaries, dtype=float)
        if len(pieces) != len(self.boundaries) - 1:
            raise ValueError("need one piece per stroke")
        self.pieces = list(pieces)
        self.period = float(self.boundaries[-1] - self.boundaries[0])

    @property
    def nseg(self):
        return len(self.pieces)

    def _route(self, t):
        t = np.asarray(t, dtype=float)
        tw = self.boundaries[0] + np.mod(t - self.boundaries[0], self.period)
        idx = np.searchsorted(self.boundaries[1:-1], tw, side="right")
        return tw, idx

    def _eval(self, t, which):
        scalar = np.ndim(t) == 0
        tw, idx = self._route(np.atleast_1d(t))
        out = None
        for k in np.unique(idx):
            mask = idx == k
            fn = self.pieces[k].value if which == "value" else self.pieces[k].deriv
            if fn is None:
                raise ProtocolError(
                    f"control has no analytic {which} on stroke {k}")
            vals = np.asarray(fn(tw[mask]))
            if out is None:
                out = np.zeros(tw.shape, dtype=np.promote_types(vals.dtype, float))
            out = out.astype(np.promote_types(out.dtype, vals.dtype), copy=False)
            out[mask] = vals
        return out[0] if scalar else out

    def __call__(self, t):
        return self._eval(t, "value")

    def derivative(self, t):
        return self._eval(t, "deriv")

    def segment_values(self):
        """Per-segment value callables (one-sided limits at boundaries)."""
        return [p.value for p in self.pieces]

    def segment_derivs(self):
        return [p.deriv for p in self.pieces]

    def max_abs(self, samples=129):
        m = 0.0
        for k in range(self.nseg):
            a, b = self.boundaries[k], self.boundaries[k + 1]
            ts = np.linspace(a, b, samples)
            m = max(m, float(np.max(np.abs(self.pieces[k].value(ts)))))
        return m

    def integral(self):
        """Integral over one period (spectral per-segment quadrature)."""
        total = 0.0 + 0.0j
        for k in range(self.nseg):
            a, b = self.boundaries[k], self.boundaries[k + 1]
            _, _, c = _cheb.resolve(
                lambda t: np.asarray(self.pieces[k].value(t), dtype=complex),
                a, b, 1e-13)
            total += _cheb.definite_integral(c, a, b)
        return total if abs(total.imag) > 1e-13 * max(1.0, abs(total)) else total.real


def constant_control(boundaries, value):
    b = np.asarray(boundaries, dtype=float)
    return PiecewiseControl(b, [_const_piece(value)] * (len(b) - 1))


# ---------------------------------------------------------------------------
# protocols

@dataclass
class CycleProtocol:
    """Bosonic-representation protocol: all five controls given directly."""

    period: float
    boundaries: np.ndarray
    labels: list
    omega: PiecewiseControl
    lam: PiecewiseControl
    gamma: PiecewiseControl
    bath_N: PiecewiseControl
    bath_M: PiecewiseControl
    meta: dict = field(default_factory=dict)

    def gamma_bar(self):
        """Period average of the coupling rate."""
        return float(np.real(self.gamma.integral())) / self.period

    def mechanical_frequency(self, t):
        """sqrt(omega^2 - |lambda|^2), the gap of the instantaneous Hamiltonian."""
        w = self.omega(t)
        l = self.lam(t)
        return np.sqrt(np.real(w) ** 2 - np.abs(l) ** 2)

    def lam_is_zero(self):
        return self.lam.max_abs() <= 1e-15 * max(1.0, self.omega.max_abs())


@dataclass
class MechanicalProtocol:
    """Mechanical-representation protocol: frequency schedule plus baths."""

    period: float
    boundaries: np.ndarray
    labels: list
    Omega: PiecewiseControl
    eta: float
    gamma: PiecewiseControl
    temperatures: list  # per stroke; None where the stroke is undamped
    meta: dict = field(default_factory=dict)

    def gamma_bar(self):
        return float(np.real(self.gamma.integral())) / self.period


def coth(x):
    return 1.0 / np.tanh(x)


def thermal_bath_params(omega, lam, temperature):
    """Bath occupation and squeezing that make a thermal state stationary.

    For mode frequency ``omega``, squeezing drive ``lam`` (may be complex)
    and bath temperature ``T > 0`` the stationary thermal state at the gap
    ``Omega = sqrt(omega^2 - |lam|^2)`` requires

        N + 1/2 = (omega / 2 Omega) coth(Omega / 2 T),
        M       = -(lam  / 2 Omega) coth(Omega / 2 T).

    Returns ``(N, M)``; vectorized.  Physicality N(N+1) > |M|^2 holds
    whenever omega^2 > |lam|^2, which is enforced.
    """
    omega = np.asarray(omega, dtype=float)
    lam = np.asarray(lam, dtype=complex)
    temperature = float(temperature)
    if temperature <= 0:
        raise ProtocolError("bath temperature must be positive")
    gap2 = omega ** 2 - np.abs(lam) ** 2
    if np.any(gap2 <= 0):
        raise ProtocolError("frequency constraint omega^2 > |lambda|^2 violated")
    gap = np.sqrt(gap2)
    c = coth(gap / (2.0 * temperature))
    N = omega / (2.0 * gap) * c - 0.5
    M = -lam / (2.0 * gap) * c
    if np.ndim(N) == 0:
        return float(N), complex(M)
    return N, M


def mechanical_to_bosonic(mech):
    """Convert a mechanical protocol to the bosonic control representation.

    With the constant gap parameter ``eta``:

        omega = (eta^2 + Omega^2) / (2 eta),
        lam   = (Omega^2 - eta^2) / (2 eta),

    so omega - lam = eta and omega^2 - lam^2 = Omega^2.  On damped strokes
    the bath controls are the thermal values at the local gap.
    """
    eta = float(mech.eta)
    if eta <= 0:
        raise ProtocolError("eta must be positive")
    omega_pieces, lam_pieces, n_pieces, m_pieces = [], [], [], []
    for k, piece in enumerate(mech.Omega.pieces):
        omega_pieces.append(_mapped_piece(
            piece, lambda x: (eta ** 2 + x ** 2) / (2 * eta),
            lambda x: x / eta, kind="omega-of-Omega"))
        lam_pieces.append(_mapped_piece(
            piece, lambda x: (x ** 2 - eta ** 2) / (2 * eta),
            lambda x: x / eta, kind="lambda-of-Omega"))
        temp = mech.temperatures[k]
        if temp is None:
            n_pieces.append(_const_piece(0.0))
            m_pieces.append(_const_piece(0.0))
        else:
            def nval(t, piece=piece, temp=temp):
                Om = np.asarray(piece.value(t))
                om = (eta ** 2 + Om ** 2) / (2 * eta)
                return om / (2 * Om) * coth(Om / (2 * temp)) - 0.5

            def mval(t, piece=piece, temp=temp):
                Om = np.asarray(piece.value(t))
                lm = (Om ** 2 - eta ** 2) / (2 * eta)
                return -lm / (2 * Om) * coth(Om / (2 * temp))

            n_pieces.append(Piece(nval, None, "thermal-N", {"T": temp}))
            m_pieces.append(Piece(mval, None, "thermal-M", {"T": temp}))

    b = mech.boundaries
    return CycleProtocol(
        period=mech.period, boundaries=b.copy(), labels=list(mech.labels),
        omega=PiecewiseControl(b, omega_pieces),
        lam=PiecewiseControl(b, lam_pieces),
        gamma=mech.gamma,
        bath_N=PiecewiseControl(b, n_pieces),
        bath_M=PiecewiseControl(b, m_pieces),
        meta={**mech.meta, "representation": "mechanical", "eta": eta,
              "temperatures": list(mech.temperatures)})


def as_bosonic(protocol):
    """Pass through a CycleProtocol, convert a MechanicalProtocol."""
    if isinstance(protocol, CycleProtocol):
        return protocol
    if isinstance(protocol, MechanicalProtocol):
        return mechanical_to_bosonic(protocol)
    raise TypeError(f"not a protocol: {type(protocol).__name__}")


# ---------------------------------------------------------------------------
# builders

def build_carnot_protocol(period, Delta=1.0, delta=0.85, T_hot=1.0,
                          gamma0=0.03):
    """Finite-time Carnot-style cycle for the mechanical oscillator.

    The frequency follows ``Omega(t) = Delta + delta_t cos^3(2 pi t / T)``
    with the modulation depth ``delta_t`` equal to ``delta`` on the first and
    last quarter-periods and ``Delta delta / (Delta + delta)`` on the middle
    two, which makes Omega continuous.  Strokes: hot isotherm (damped, T_hot),
    adiabatic expansion, cold isotherm (damped, T_cold), adiabatic
    compression.  The cold temperature ``T_cold = Delta T_hot / (Delta +
    delta)`` is chosen so the isotherm endpoints line up with the adiabats of
    the quasi-static cycle and the reversible efficiency is Carnot's.
    """
    period = float(period)
    if period <= 0 or Delta <= 0 or delta <= 0 or T_hot <= 0 or gamma0 < 0:
        raise ProtocolError("carnot cycle needs positive period, Delta, delta, "
                            "T_hot and non-negative gamma0")
    T_cold = Delta * T_hot / (Delta + delta)
    delta_mid = Delta * delta / (Delta + delta)
    b = np.array([0.0, period / 4, period / 2, 3 * period / 4, period])
    amps = [delta, delta_mid, delta_mid, delta]
    Om = PiecewiseControl(
        b, [_cos3_piece(Delta, a, period) for a in amps])
    gam = PiecewiseControl(
        b, [_const_piece(gamma0), _const_piece(0.0),
            _const_piece(gamma0), _const_piece(0.0)])
    labels = ["isothermal-hot", "adiabatic-expansion",
              "isothermal-cold", "adiabatic-compression"]
    corners = {
        "a": Delta + delta, "b": Delta,
        "c": Delta * Delta / (Delta + delta), "d": Delta,
    }
    return MechanicalProtocol(
        period=period, boundaries=b, labels=labels, Omega=Om, eta=Delta,
        gamma=gam, temperatures=[T_hot, None, T_cold, None],
        meta={"kind": "carnot", "Delta": Delta, "delta": delta,
              "T_hot": T_hot, "T_cold": T_cold, "gamma0": gamma0,
              "corner_frequencies": corners})


def build_otto_protocol(period, Omega_hot=2.0, Omega_cold=1.0, T_hot=2.0,
                        T_cold=0.5, gamma_hot=0.05, gamma_cold=0.05,
                        fractions=(0.25, 0.25, 0.25, 0.25), ramp="cosine",
                        eta=None):
    """Otto-style cycle: two isochores joined by undamped frequency ramps.

    Strokes: hot isochore at ``Omega_hot`` (damped, ``T_hot``), expansion
    ramp down to ``Omega_cold`` (undamped), cold isochore (damped,
    ``T_cold``), compression ramp back up.  ``ramp`` selects the sweep shape
    on the undamped strokes: "cosine" (smooth at both ends) or "linear".
    ``fractions`` are the stroke durations as fractions of the period.  The
    gap parameter defaults to ``eta = Omega_hot`` so the squeezing drive
    vanishes on the hot isochore.
    """
    period = float(period)
    if period <= 0 or Omega_hot <= 0 or Omega_cold <= 0:
        raise ProtocolError("otto cycle needs positive period and frequencies")
    if T_hot <= 0 or T_cold <= 0 or gamma_hot < 0 or gamma_cold < 0:
        raise ProtocolError("otto cycle needs positive temperatures and "
                            "non-negative coupling rates")
    fr = np.asarray(fractions, dtype=float)
    if fr.shape != (4,) or np.any(fr <= 0) or abs(fr.sum() - 1.0) > 1e-12:
        raise ProtocolError("fractions must be 4 positive numbers summing to 1")
    if eta is None:
        eta = Omega_hot
    b = np.concatenate([[0.0], np.cumsum(fr) * period])
    b[-1] = period

    def ramp_piece(v0, v1, a, bb):
        if ramp == "cosine":
            return _cosine_ramp_piece(v0, v1, a, bb)
        if ramp == "linear":
            return _linear_piece(v0, v1, a, bb)
        raise ProtocolError(f"unknown ramp shape: {ramp!r}")

    Om = PiecewiseControl(b, [
        _const_piece(Omega_hot),
        ramp_piece(Omega_hot, Omega_cold, b[1], b[2]),
        _const_piece(Omega_cold),
        ramp_piece(Omega_cold, Omega_hot, b[3], b[4]),
    ])
    gam = PiecewiseControl(b, [
        _const_piece(gamma_hot), _const_piece(0.0),
        _const_piece(gamma_cold), _const_piece(0.0)])
    labels = ["isochore-hot", "ramp-down", "isochore-cold", "ramp-up"]
    return MechanicalProtocol(
        period=period, boundaries=b, labels=labels, Omega=Om, eta=float(eta),
        gamma=gam, temperatures=[T_hot, None, T_cold, None],
        meta={"kind": "otto", "Omega_hot": Omega_hot, "Omega_cold": Omega_cold,
              "T_hot": T_hot, "T_cold": T_cold, "ramp": ramp})


BUILTIN_DEFAULTS = {
    "carnot-fig2": {"builder": build_carnot_protocol,
                    "args": {"period": 1000.0, "Delta": 1.0, "delta": 0.85,
                             "T_hot": 1.0, "gamma0": 0.03}},
    "otto-demo": {"builder": build_otto_protocol,
                  "args": {"period": 400.0}},
}


# ---------------------------------------------------------------------------
# config loading

def _want(d, key, typ, path, optional=False, default=None):
    if key not in d:
        if optional:
            return default
        raise ProtocolError(f"missing field {path}.{key}")
    v = d[key]
    if typ is float:
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ProtocolError(f"{path}.{key} must be a number")
        return float(v)
    if typ is str and not isinstance(v, str):
        raise ProtocolError(f"{path}.{key} must be a string")
    return v


def _as_complex(v, path):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2 and \
            all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(v[0], v[1])
    raise ProtocolError(f"{path} must be a number or [re, im]")


def _funcspec_to_piece(spec, a, b, period, path, allow_complex=False):
    if isinstance(spec, (list, tuple)) and not allow_complex:
        raise ProtocolError(f"{path} must be real-valued")
    if isinstance(spec, (int, float, list, tuple)) and not isinstance(spec, bool):
        v = _as_complex(spec, path) if allow_complex else float(spec)
        if isinstance(v, complex) and v.imag == 0:
            v = v.real
        return _const_piece(v)
    if not isinstance(spec, dict):
        raise ProtocolError(f"{path} must be a number or an object with 'kind'")
    kind = _want(spec, "kind", str, path)
    if kind == "const":
        v = spec.get("value")
        if v is None:
            raise ProtocolError(f"missing field {path}.value")
        v = _as_complex(v, f"{path}.value") if allow_complex else float(v)
        if isinstance(v, complex) and v.imag == 0:
            v = v.real
        return _const_piece(v)
    if kind == "cos3":
        return _cos3_piece(_want(spec, "base", float, path),
                           _want(spec, "amp", float, path),
                           _want(spec, "period", float, path, optional=True,
                                 default=period),
                           _want(spec, "origin", float, path, optional=True,
                                 default=0.0))
    if kind == "linear":
        return _linear_piece(_want(spec, "from", float, path),
                             _want(spec, "to", float, path), a, b)
    if kind == "cosine-ramp":
        return _cosine_ramp_piece(_want(spec, "from", float, path),
                                  _want(spec, "to", float, path), a, b)
    if kind == "table":
        times = spec.get("times")
        values = spec.get("values")
        if times is None or values is None:
            raise ProtocolError(f"{path} table needs 'times' and 'values'")
        if allow_complex and values and isinstance(values[0], (list, tuple)):
            values = [complex(v[0], v[1]) for v in values]
        return _table_piece(times, values, a, b)
    raise ProtocolError(f"unknown kind {kind!r} at {path}.kind")


def load_protocol(source, period_override=None):
    """Build a protocol from a JSON config (dict, JSON text, or file path).

    Two top-level shapes are accepted: ``{"builtin": name, "overrides":
    {...}}`` expands a named builtin, and a full description gives the
    period, the representation and a list of strokes.  The result is
    validated; violations raise :class:`ProtocolError`.
    """
    if isinstance(source, Path):
        source = source.read_text()
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as err:
            raise ProtocolError(f"config is not valid JSON: {err}") from None
    if not isinstance(source, dict):
        raise ProtocolError("config must be a JSON object")

    if "builtin" in source:
        name = source["builtin"]
        extra = set(source) - {"builtin", "overrides"}
        if extra:
            raise ProtocolError(f"unexpected fields next to 'builtin': "
                                f"{sorted(extra)}")
        if name not in BUILTIN_DEFAULTS:
            raise ProtocolError(
                f"unknown builtin {name!r}; have {sorted(BUILTIN_DEFAULTS)}")
        entry = BUILTIN_DEFAULTS[name]
        args = dict(entry["args"])
        overrides = source.get("overrides", {})
        if not isinstance(overrides, dict):
            raise ProtocolError("'overrides' must be an object")
        unknown = set(overrides) - set(args)
        if unknown:
            raise ProtocolError(f"unknown override(s) for {name}: "
                                f"{sorted(unknown)}")
        args.update(overrides)
        if period_override is not None:
            args["period"] = float(period_override)
        proto = entry["builder"](**args)
    else:
        proto = _load_explicit(source, period_override)

    violations = validate_protocol(proto)
    if violations:
        raise ProtocolError("invalid protocol:\n" + "\n".join(
            f"  t={v.time:g}: {v.constraint}: {v.message}" for v in violations))
    return proto


def _load_explicit(cfg, period_override):
    period = float(period_override) if period_override is not None else \
        _want(cfg, "period", float, "config")
    if period <= 0:
        raise ProtocolError("config.period must be positive")
    rep = _want(cfg, "representation", str, "config", optional=True,
                default="mechanical")
    if rep not in ("mechanical", "bosonic"):
        raise ProtocolError("config.representation must be 'mechanical' or "
                            "'bosonic'")
    strokes = cfg.get("strokes")
    if not isinstance(strokes, list) or not strokes:
        raise ProtocolError("config.strokes must be a non-empty list")

    fracs = []
    for i, s in enumerate(strokes):
        if not isinstance(s, dict):
            raise ProtocolError(f"strokes[{i}] must be an object")
        fracs.append(_want(s, "duration", float, f"strokes[{i}]"))
    fracs = np.asarray(fracs)
    if np.any(fracs <= 0):
        raise ProtocolError("stroke durations must be positive")
    # durations are interpreted as fractions of the period when they sum to 1,
    # otherwise as absolute times that must sum to the period
    if abs(fracs.sum() - 1.0) < 1e-9:
        edges = np.concatenate([[0.0], np.cumsum(fracs) * period])
    elif abs(fracs.sum() - period) < 1e-9 * period:
        edges = np.concatenate([[0.0], np.cumsum(fracs)])
    else:
        raise ProtocolError("stroke durations must sum to 1 (fractions) or to "
                            "the period")
    edges[-1] = period

    labels, gam_pieces = [], []
    for i, s in enumerate(strokes):
        labels.append(str(s.get("label", f"stroke-{i}")))
        a, b = edges[i], edges[i + 1]
        gam_pieces.append(_funcspec_to_piece(
            s.get("gamma", 0.0), a, b, period, f"strokes[{i}].gamma"))
    gamma = PiecewiseControl(edges, gam_pieces)

    if rep == "mechanical":
        eta = _want(cfg, "eta", float, "config")
        om_pieces, temps = [], []
        for i, s in enumerate(strokes):
            a, b = edges[i], edges[i + 1]
            if "Omega" not in s:
                raise ProtocolError(f"missing field strokes[{i}].Omega")
            om_pieces.append(_funcspec_to_piece(
                s["Omega"], a, b, period, f"strokes[{i}].Omega"))
            temps.append(s.get("temperature"))
            if temps[-1] is not None:
                temps[-1] = float(temps[-1])
        return MechanicalProtocol(
            period=period, boundaries=edges, labels=labels,
            Omega=PiecewiseControl(edges, om_pieces), eta=eta, gamma=gamma,
            temperatures=temps, meta={"kind": "config"})

    controls = {}
    for name, allow_c in (("omega", False), ("lambda", True),
                          ("N", False), ("M", True)):
        pieces = []
        for i, s in enumerate(strokes):
            a, b = edges[i], edges[i + 1]
            spec = s.get(name)
            if spec is None:
                if name in ("N", "M"):
                    spec = 0.0  # bath controls default to vacuum values
                else:
                    raise ProtocolError(f"missing field strokes[{i}].{name}")
            pieces.append(_funcspec_to_piece(
                spec, a, b, period, f"strokes[{i}].{name}", allow_complex=allow_c))
        controls[name] = PiecewiseControl(edges, pieces)
    return CycleProtocol(
        period=period, boundaries=edges, labels=labels,
        omega=controls["omega"], lam=controls["lambda"], gamma=gamma,
        bath_N=controls["N"], bath_M=controls["M"], meta={"kind": "config"})


# ---------------------------------------------------------------------------
# validation

@dataclass
class Violation:
    time: float
    constraint: str
    message: str


def _sample_stroke(control, k, n):
    a, b = control.boundaries[k], control.boundaries[k + 1]
    ts = np.linspace(a, b, n)
    return ts, np.asarray(control.pieces[k].value(ts))


def validate_protocol(protocol, samples_per_stroke=VALIDATOR_SAMPLES):
    """Check physical validity on a dense grid; returns a list of violations.

    Strokes are sampled one-sidedly (each stroke's own branch at its
    endpoints).  Checks: positive period; frequency constraint
    omega^2 > |lambda|^2; gamma >= 0 with some dissipation over the cycle;
    bath physicality N(N+1) > |M|^2 wherever gamma > 0; for mechanical
    protocols additionally Omega > 0, continuity of Omega at stroke
    boundaries, eta > 0 and positive temperatures on damped strokes.
    """
    out = []
    n = int(samples_per_stroke)
    if protocol.period <= 0:
        out.append(Violation(0.0, "period", "period must be positive"))
        return out

    if isinstance(protocol, MechanicalProtocol):
        if protocol.eta <= 0:
            out.append(Violation(0.0, "eta", "gap parameter must be positive"))
        edge_vals = []
        for k in range(protocol.Omega.nseg):
            ts, om = _sample_stroke(protocol.Omega, k, n)
            if np.any(om <= 0):
                j = int(np.argmax(om <= 0))
                out.append(Violation(float(ts[j]), "frequency",
                                     f"Omega <= 0 on stroke {k}"))
            if not np.all(np.isfinite(om)):
                out.append(Violation(float(ts[0]), "finite",
                                     f"non-finite Omega on stroke {k}"))
            edge_vals.append((om[0], om[-1]))
            _, g = _sample_stroke(protocol.gamma, k, n)
            if np.any(g < 0):
                out.append(Violation(float(ts[0]), "coupling",
                                     f"gamma < 0 on stroke {k}"))
            if np.any(np.real(g) > 0):
                temp = protocol.temperatures[k]
                if temp is None or temp <= 0:
                    out.append(Violation(
                        float(ts[0]), "bath",
                        f"damped stroke {k} needs a positive temperature"))
        scale = max(1.0, protocol.Omega.max_abs())
        for k in range(len(edge_vals)):
            nxt = (k + 1) % len(edge_vals)
            jump = abs(edge_vals[k][1] - edge_vals[nxt][0])
            if jump > 1e-9 * scale:
                out.append(Violation(
                    float(protocol.boundaries[k + 1] % protocol.period),
                    "continuity",
                    f"Omega jumps by {jump:.3g} between strokes {k} and {nxt}"))
        if protocol.gamma_bar() <= 0:
            out.append(Violation(0.0, "coupling",
                                 "no dissipation anywhere in the cycle"))
        return out

    p = protocol
    for k in range(p.omega.nseg):
        ts, om = _sample_stroke(p.omega, k, n)
        _, lm = _sample_stroke(p.lam, k, n)
        _, g = _sample_stroke(p.gamma, k, n)
        _, Nv = _sample_stroke(p.bath_N, k, n)
        _, Mv = _sample_stroke(p.bath_M, k, n)
        for name, arr in (("omega", om), ("lambda", lm), ("gamma", g),
                          ("N", Nv), ("M", Mv)):
            if not np.all(np.isfinite(arr)):
                out.append(Violation(float(ts[0]), "finite",
                                     f"non-finite {name} on stroke {k}"))
        bad = np.real(om) ** 2 - np.abs(lm) ** 2 <= 0
        if np.any(bad):
            j = int(np.argmax(bad))
            out.append(Violation(float(ts[j]), "frequency",
                                 "omega^2 > |lambda|^2 violated on "
                                 f"stroke {k}"))
        if np.any(np.real(g) < 0):
            j = int(np.argmax(np.real(g) < 0))
            out.append(Violation(float(ts[j]), "coupling",
                                 f"gamma < 0 on stroke {k}"))
        damped = np.real(g) > 0
        physical = np.real(Nv) * (np.real(Nv) + 1.0) - np.abs(Mv) ** 2
        # the T -> 0 limit saturates to exact equality in floating point,
        # so only a genuinely negative margin counts as a violation
        slack = 1e-12 * max(1.0, float(np.max(np.abs(Nv))) ** 2)
        bad = damped & (physical < -slack)
        if np.any(bad):
            j = int(np.argmax(bad))
            out.append(Violation(float(ts[j]), "bath",
                                 "bath squeezing bound N(N+1) > |M|^2 "
                                 f"violated on stroke {k}"))
    if p.gamma_bar() <= 0:
        out.append(Violation(0.0, "coupling",
                             "no dissipation anywhere in the cycle"))
    return out
