"""Closed-form limit cycles through time-periodic frame transformations.

The pipeline has two stages.  A drive-eliminating (unitary) frame removes
the two-photon terms from the generator: it is built from a periodic
solution ``r2`` of a scalar Riccati equation, a companion linear variable
``r1`` and an accumulated phase ``r0``.  In that frame the coherent part of
the dynamics rotates at a constant effective complex frequency, the period
average ``Lambda_bar`` of ``Lambda(t) = omega + 2i lambda r2``.  A second,
dissipative frame then absorbs the remaining periodically modulated bath
couplings into three more scalar periodic solutions ``G2``, ``g3~``,
``g4~``.  Combining both frames yields the generator parameters of the
stroboscopic dynamics and, in closed form, the second moments of the limit
cycle at every phase of the drive.

Everything here works segment-wise on the protocol's smooth strokes and at
spectral accuracy; the only time-stepping is the one-period fundamental
matrix of the 2x2 linearization behind the Riccati equation.
"""

import cmath
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _cheb
from .errors import (
    DegenerateSteadyStateError,
    FloquetEngineError,
    FrameLogarithmError,
    ParametricResonanceError,
    ProtocolError,
)
from .periodic_ode import Trajectory, monodromy_2x2, periodic_linear_solution
from .protocols import as_bosonic

DEFAULT_TOL = 1e-12
US_THRESHOLD = 1e-9  # |Im Lambda_bar| below this (relative) means oscillatory


# ---------------------------------------------------------------------------
# result containers

@dataclass
class UnitaryFrame:
    """Drive-eliminating frame data over one period."""

    r2: Trajectory
    Lambda: Trajectory
    Lambda_bar: complex
    sigma: complex             # 1 in the oscillatory phase, 1j in the hyperbolic
    branch: int                # index of the kept Riccati branch
    branch_Lambdas: tuple      # period-averaged Lambda of both candidates
    multiplier: complex = None  # one-period eigenvalue of the kept branch
    r1: Trajectory = None
    r0: Trajectory = None
    J: Trajectory = None       # 1 + 8 r1 r2
    z: Trajectory = None       # (1 + J) / 2
    r1p: Trajectory = None     # r2 * z

    @property
    def is_oscillatory(self):
        return self.sigma == 1

    @property
    def phase_label(self):
        return "US" if self.is_oscillatory else "UU"


@dataclass
class TildeBath:
    """Bath parameters as seen from the drive-eliminating frame."""

    N_half: Trajectory  # occupation + 1/2
    M: Trajectory
    Mp: Trajectory


@dataclass
class DissipativeFrame:
    """Dissipation-absorbing frame data over one period."""

    gamma_bar: float
    G2: Trajectory
    g3t: Trajectory
    g4t: Trajectory
    tilde: TildeBath


@dataclass
class FloquetFrames:
    """Both frames plus the protocol they were solved for."""

    protocol: object           # CycleProtocol
    unitary: UnitaryFrame
    dissipative: DissipativeFrame = None

    @property
    def Lambda_bar(self):
        return self.unitary.Lambda_bar

    @property
    def gamma_bar(self):
        return self.dissipative.gamma_bar if self.dissipative is not None \
            else self.protocol.gamma_bar()


@dataclass
class FloquetParams:
    """Generator parameters of the stroboscopic dynamics, at given times."""

    t: np.ndarray
    gamma_bar: float
    omega_F: np.ndarray
    lambda_F: np.ndarray
    lambda_Fp: np.ndarray
    N_F_half: np.ndarray       # occupation-like parameter + 1/2
    M_F: np.ndarray
    M_Fp: np.ndarray


@dataclass
class StabilityReport:
    """Spectral verdict on the limit cycle."""

    gamma_bar: float
    Lambda_bar: complex
    sigma: complex
    im_Lambda_bar: float
    margin: float              # gamma_bar - 2 |Im Lambda_bar|
    stable: object             # True/False, or None when gamma_bar == 0
    note: str = ""

    @property
    def ratio(self):
        """gamma_bar / (2 |Im Lambda_bar|); inf in the oscillatory phase."""
        if self.im_Lambda_bar == 0.0:
            return math.inf
        return self.gamma_bar / (2.0 * self.im_Lambda_bar)


# ---------------------------------------------------------------------------
# unitary frame

def _mobius_fixed_points(Phi, scale_tol=1e-10):
    """Fixed points of r -> (Phi00 r + Phi01) / (Phi10 r + Phi11)."""
    a, b = Phi[0, 0], Phi[0, 1]
    c, d = Phi[1, 0], Phi[1, 1]
    scale = max(abs(a), abs(b), abs(c), abs(d))
    disc = (d - a) ** 2 + 4.0 * b * c
    if abs(disc) < scale_tol * scale * scale:
        raise ParametricResonanceError(
            "degenerate one-period propagator: the two periodic branches "
            f"collide (|discriminant| = {abs(disc):.2e})")
    sq = cmath.sqrt(disc)
    B = d - a
    if abs(B + sq) < abs(B - sq):
        sq = -sq
    if abs(c) < 1e-14 * scale:
        # linear degeneration: one branch escapes to infinity
        if abs(B) < 1e-14 * scale:
            raise ParametricResonanceError("one-period propagator is scalar")
        return [b / B]
    u = -(B + sq) / 2.0
    return [u / c, -b / u]  # roots of c r^2 + B r - b = 0


def _resolve_branch(protocol, mono, root, tol):
    """Riccati branch trajectory through one period plus its Lambda data."""
    edges = protocol.boundaries
    om_segs = protocol.omega.segment_values()
    lm_segs = protocol.lam.segment_values()

    def r2_fun(t):
        Phi = mono(t)
        den = Phi[1, 0] * root + Phi[1, 1]
        if np.any(np.abs(den) < 1e-12):
            raise FloquetEngineError("Riccati branch passes through a pole")
        return (Phi[0, 0] * root + Phi[0, 1]) / den

    r2 = Trajectory.from_function(r2_fun, edges, tol=tol,
                                  period=protocol.period)
    Lam = Trajectory.from_function(
        [lambda t, k=k: np.asarray(om_segs[k](t), dtype=complex)
         + 2j * np.asarray(lm_segs[k](t), dtype=complex) * r2.eval_segment(k, t)
         for k in range(len(edges) - 1)],
        edges, tol=tol, period=protocol.period)
    Lambda_bar = Lam.integral() / protocol.period
    multiplier = mono.end[1, 0] * root + mono.end[1, 1]
    return r2, Lam, Lambda_bar, multiplier


def _classify_sigma(Lambda_bar):
    if abs(Lambda_bar.imag) < US_THRESHOLD * max(1.0, abs(Lambda_bar)):
        return 1
    return 1j


def solve_r2(protocol, tol=DEFAULT_TOL, branch=None):
    """Periodic Riccati branch of the drive-elimination problem.

    Integrates the one-period fundamental matrix of the 2x2 linearization,
    finds the fixed points of the induced Moebius map, and keeps the branch
    whose period-averaged effective frequency has ``Re Lambda_bar >= 0``
    (ties broken toward ``Im Lambda_bar >= 0``).  Pass ``branch=0`` or ``1``
    to force a candidate (0 is the one the rule prefers).

    Returns a :class:`UnitaryFrame` with the r2-level fields populated.
    """
    protocol = as_bosonic(protocol)
    edges = protocol.boundaries

    if protocol.lam_is_zero():
        # no two-photon drive: the frame is trivial
        zero = Trajectory.from_function(0.0, edges, tol=tol,
                                        period=protocol.period)
        Lam = Trajectory.from_function(
            [(lambda t, f=f: np.asarray(f(t), dtype=complex))
             for f in protocol.omega.segment_values()],
            edges, tol=tol, period=protocol.period)
        Lambda_bar = Lam.integral() / protocol.period
        return UnitaryFrame(
            r2=zero, Lambda=Lam, Lambda_bar=Lambda_bar,
            sigma=_classify_sigma(Lambda_bar), branch=0,
            branch_Lambdas=(Lambda_bar, -Lambda_bar),
            multiplier=cmath.exp(1j * Lambda_bar * protocol.period))

    om_segs = protocol.omega.segment_values()
    lm_segs = protocol.lam.segment_values()
    seg_A = []
    for k in range(len(edges) - 1):
        def A(t, om=om_segs[k], lm=lm_segs[k]):
            w = complex(om(t))
            l = complex(lm(t))
            return np.array([[-1j * w, -0.5 * np.conj(l)], [-2.0 * l, 1j * w]])
        seg_A.append(A)

    mono = monodromy_2x2(seg_A, protocol.period, tol=min(tol, 1e-12),
                         breakpoints=edges[1:-1])
    roots = _mobius_fixed_points(mono.end)

    ok = []
    for r in roots:
        try:
            ok.append(_resolve_branch(protocol, mono, r, tol))
        except FloquetEngineError:
            continue
    if not ok:
        raise ParametricResonanceError(
            "no periodic Riccati branch could be resolved")

    def rule_key(c):
        lb = c[2]
        return (round(lb.real / max(1.0, abs(lb)), 9),
                round(lb.imag / max(1.0, abs(lb)), 9))

    ok.sort(key=rule_key, reverse=True)
    if branch is None:
        chosen = ok[0]
    else:
        if branch >= len(ok):
            raise ParametricResonanceError(
                f"branch {branch} not available ({len(ok)} resolved)")
        chosen = ok[branch]
    r2, Lam, Lambda_bar, multiplier = chosen
    return UnitaryFrame(
        r2=r2, Lambda=Lam, Lambda_bar=Lambda_bar,
        sigma=_classify_sigma(Lambda_bar),
        branch=0 if branch is None else branch,
        branch_Lambdas=tuple(c[2] for c in ok),
        multiplier=multiplier)


def lambda_bar_crosscheck(frame):
    """Mismatch between the two independent routes to ``Lambda_bar``.

    The period average of ``Lambda(t)`` (a quadrature) must exponentiate to
    the one-period eigenvalue of the kept branch (a time-stepping result):
    ``e^{i Lambda_bar T} = multiplier``.  Returns the absolute difference.
    """
    if frame.multiplier is None:
        return 0.0
    period = frame.Lambda.period
    return abs(cmath.exp(1j * frame.Lambda_bar * period) - frame.multiplier)


def solve_r1_r0(protocol, frame, tol=DEFAULT_TOL):
    """Extend an r2-level frame with r1, r0 and the derived combinations.

    ``r0`` is the accumulated detuning ``int_0^t (Lambda_bar - Lambda)`` and
    ``r1`` the periodic solution of its linear companion equation, whose
    homogeneous rate is ``-2i Lambda(t)``; the combinations J = 1 + 8 r1 r2,
    z = (1 + J)/2 and r1' = r2 z complete the frame.
    """
    protocol = as_bosonic(protocol)
    edges = protocol.boundaries
    nseg = len(edges) - 1
    Lam, r2 = frame.Lambda, frame.r2

    r0 = Trajectory.map(lambda L: frame.Lambda_bar - L, Lam).antiderivative()
    r0.period = protocol.period

    if protocol.lam_is_zero():
        r1 = Trajectory.from_function(0.0, edges, tol=tol,
                                      period=protocol.period)
    else:
        lm_segs = protocol.lam.segment_values()
        p_segs = [(lambda t, k=k: -2j * Lam.eval_segment(k, t))
                  for k in range(nseg)]
        q_segs = [(lambda t, k=k:
                   -0.5 * np.asarray(lm_segs[k](t), dtype=complex))
                  for k in range(nseg)]
        r1 = periodic_linear_solution(p_segs, q_segs, protocol.period,
                                      tol=tol, boundaries=edges)
    J = Trajectory.map(lambda a, b: 1.0 + 8.0 * a * b, r1, r2, tol=tol)
    z = Trajectory.map(lambda j: (1.0 + j) / 2.0, J, tol=tol)
    r1p = Trajectory.map(lambda a, b: a * b, r2, z, tol=tol)
    return replace(frame, r1=r1, r0=r0, J=J, z=z, r1p=r1p)


def unitary_frame(protocol, tol=DEFAULT_TOL, branch=None):
    """Full drive-eliminating frame for a protocol."""
    protocol = as_bosonic(protocol)
    return solve_r1_r0(protocol, solve_r2(protocol, tol=tol, branch=branch),
                       tol=tol)


# ---------------------------------------------------------------------------
# dissipative frame

def tilde_bath_params(protocol, frame, tol=DEFAULT_TOL):
    """Bath parameters transported into the drive-eliminating frame.

        N~ + 1/2 = J (N + 1/2) + 2i M r1 - 2i M* r1',
        M~  = [M - 4i r2 (N + 1/2) - 4 M* r2^2] e^{-2i r0},
        M~' = [M* z^2 + 4i r1 z (N + 1/2) - 4 M r1^2] e^{+2i r0}.

    Values on undamped strokes use the protocol's placeholder bath controls;
    they never enter any driving term there because gamma = 0.
    """
    protocol = as_bosonic(protocol)
    edges = protocol.boundaries
    nseg = len(edges) - 1
    N_segs = protocol.bath_N.segment_values()
    M_segs = protocol.bath_M.segment_values()
    uf = frame

    def seg_fun(expr):
        return [(lambda t, k=k: expr(
            np.asarray(N_segs[k](t), dtype=float) + 0.5,
            np.asarray(M_segs[k](t), dtype=complex),
            uf.r1.eval_segment(k, t), uf.r2.eval_segment(k, t),
            uf.r1p.eval_segment(k, t), uf.J.eval_segment(k, t),
            uf.z.eval_segment(k, t), uf.r0.eval_segment(k, t)))
            for k in range(nseg)]

    N_half = Trajectory.from_function(
        seg_fun(lambda Nh, M, r1, r2, r1p, J, z, r0:
                J * Nh + 2j * M * r1 - 2j * np.conj(M) * r1p),
        edges, tol=tol, period=protocol.period)
    Mt = Trajectory.from_function(
        seg_fun(lambda Nh, M, r1, r2, r1p, J, z, r0:
                (M - 4j * r2 * Nh - 4 * np.conj(M) * r2 ** 2)
                * np.exp(-2j * r0)),
        edges, tol=tol, period=protocol.period)
    Mtp = Trajectory.from_function(
        seg_fun(lambda Nh, M, r1, r2, r1p, J, z, r0:
                (np.conj(M) * z ** 2 + 4j * r1 * z * Nh - 4 * M * r1 ** 2)
                * np.exp(2j * r0)),
        edges, tol=tol, period=protocol.period)
    return TildeBath(N_half=N_half, M=Mt, Mp=Mtp)


def solve_dissipative_frame(protocol, frame, tol=DEFAULT_TOL):
    """Periodic solutions absorbing the modulated dissipation.

    Solves, with periodic boundary conditions,

        G2'  + gamma G2              = gamma (N~ + 1/2),   G2 = occupation-like
        g3~' + (gamma + 2i Lambda) g3~ = gamma M~ e^{+2i r0},
        g4~' + (gamma - 2i Lambda) g4~ = gamma M~' e^{-2i r0}.

    Requires net dissipation over the cycle (gamma_bar > 0).
    """
    protocol = as_bosonic(protocol)
    gamma_bar = protocol.gamma_bar()
    if gamma_bar <= 0:
        raise ProtocolError("dissipative frame needs gamma_bar > 0")
    edges = protocol.boundaries
    nseg = len(edges) - 1
    g_segs = protocol.gamma.segment_values()
    tilde = tilde_bath_params(protocol, frame, tol=tol)
    uf = frame
    N_segs = protocol.bath_N.segment_values()
    M_segs = protocol.bath_M.segment_values()

    def gamma_arr(k, t):
        return np.asarray(g_segs[k](t), dtype=complex)

    G2 = periodic_linear_solution(
        [(lambda t, k=k: gamma_arr(k, t)) for k in range(nseg)],
        [(lambda t, k=k: gamma_arr(k, t) * tilde.N_half.eval_segment(k, t))
         for k in range(nseg)],
        protocol.period, tol=tol, boundaries=edges)

    # driving terms written directly in protocol + frame variables
    def q3(k, t):
        Nh = np.asarray(N_segs[k](t), dtype=float) + 0.5
        M = np.asarray(M_segs[k](t), dtype=complex)
        r2 = uf.r2.eval_segment(k, t)
        return gamma_arr(k, t) * (M - 4j * r2 * Nh - 4 * np.conj(M) * r2 ** 2)

    def q4(k, t):
        Nh = np.asarray(N_segs[k](t), dtype=float) + 0.5
        M = np.asarray(M_segs[k](t), dtype=complex)
        r1 = uf.r1.eval_segment(k, t)
        z = uf.z.eval_segment(k, t)
        return gamma_arr(k, t) * (np.conj(M) * z ** 2 + 4j * r1 * z * Nh
                                  - 4 * M * r1 ** 2)

    g3t = periodic_linear_solution(
        [(lambda t, k=k: gamma_arr(k, t) + 2j * uf.Lambda.eval_segment(k, t))
         for k in range(nseg)],
        [(lambda t, k=k: q3(k, t)) for k in range(nseg)],
        protocol.period, tol=tol, boundaries=edges)
    g4t = periodic_linear_solution(
        [(lambda t, k=k: gamma_arr(k, t) - 2j * uf.Lambda.eval_segment(k, t))
         for k in range(nseg)],
        [(lambda t, k=k: q4(k, t)) for k in range(nseg)],
        protocol.period, tol=tol, boundaries=edges)
    return DissipativeFrame(gamma_bar=gamma_bar, G2=G2, g3t=g3t, g4t=g4t,
                            tilde=tilde)


def solve_frames(protocol, tol=DEFAULT_TOL, branch=None, dissipative=True):
    """Solve both frames for a protocol and bundle the results."""
    protocol = as_bosonic(protocol)
    uf = unitary_frame(protocol, tol=tol, branch=branch)
    df = None
    if dissipative and protocol.gamma_bar() > 0:
        df = solve_dissipative_frame(protocol, uf, tol=tol)
    return FloquetFrames(protocol=protocol, unitary=uf, dissipative=df)


# ---------------------------------------------------------------------------
# frame outputs

def _require_dissipative(frames):
    if frames.dissipative is None:
        raise ProtocolError("this operation needs the dissipative frame "
                            "(protocol has gamma_bar <= 0)")


def floquet_parameters(frames, t):
    """Generator parameters of the stroboscopic dynamics at times t."""
    _require_dissipative(frames)
    uf, df = frames.unitary, frames.dissipative
    t = np.atleast_1d(np.asarray(t, dtype=float))
    Lb, gb = uf.Lambda_bar, df.gamma_bar
    r1, r2, r1p = uf.r1(t), uf.r2(t), uf.r1p(t)
    J, z = uf.J(t), uf.z(t)
    G2, g3, g4 = df.G2(t), df.g3t(t), df.g4t(t)
    cp = gb + 2j * Lb
    cm = gb - 2j * Lb
    return FloquetParams(
        t=t, gamma_bar=gb,
        omega_F=Lb * J,
        lambda_F=4j * Lb * r1,
        lambda_Fp=-4j * Lb * r1p,
        N_F_half=J * G2 - (2j / gb) * (r1 * z * cp * g3 - r2 * cm * g4),
        M_F=4j * r1p * G2 + (z ** 2 * cp * g3 - 4.0 * r2 ** 2 * cm * g4) / gb,
        M_Fp=-4j * r1 * G2 + (-4.0 * r1 ** 2 * cp * g3 + cm * g4) / gb,
    )


def limit_cycle_moments(frames, t):
    """Second moments of the limit cycle at times t (closed form).

    Returns arrays ``(n, m)`` with ``n = <a^dag a>`` and ``m = <a a>``; the
    third moment is ``conj(m)`` whenever the input protocol is physical.
    """
    _require_dissipative(frames)
    uf, df = frames.unitary, frames.dissipative
    t = np.atleast_1d(np.asarray(t, dtype=float))
    r1, r2, r1p = uf.r1(t), uf.r2(t), uf.r1p(t)
    J, z = uf.J(t), uf.z(t)
    G2, g3, g4 = df.G2(t), df.g3t(t), df.g4t(t)
    n = J * G2 - 2j * r1 * z * g3 + 2j * r2 * g4 - 0.5
    m = 4j * r1p * G2 + z ** 2 * g3 - 4.0 * r2 ** 2 * g4
    mbar = -4j * r1 * G2 - 4.0 * r1 ** 2 * g3 + g4
    return n, m, mbar


def steady_state_covariances(fp):
    """Stationary second moments of the frozen stroboscopic generator.

    Evaluates the closed-form quotient for each time in the
    :class:`FloquetParams` bundle; on the limit cycle this reproduces
    :func:`limit_cycle_moments`.
    """
    gb = fp.gamma_bar
    oF, lF, lFp = fp.omega_F, fp.lambda_F, fp.lambda_Fp
    Nh, MF, MFp = fp.N_F_half, fp.M_F, fp.M_Fp
    den = gb * gb + 4.0 * oF * oF - 4.0 * lF * lFp
    scale = gb * gb + 4.0 * np.abs(oF) ** 2 + 4.0 * np.abs(lF * lFp)
    if np.any(np.abs(den) < 1e-12 * np.maximum(scale, 1e-30)):
        raise DegenerateSteadyStateError(
            "vanishing denominator in the stationary covariances")
    n = (Nh * (gb * gb + 4.0 * oF * oF)
         + MF * lF * (2.0 * oF + 1j * gb)
         + MFp * lFp * (2.0 * oF - 1j * gb)) / den - 0.5
    m = (MF * (gb * gb - 2j * gb * oF - 2.0 * lF * lFp)
         - 2.0 * MFp * lFp ** 2
         - lFp * 2.0 * Nh * (2.0 * oF + 1j * gb)) / den
    mbar = (MFp * (gb * gb + 2j * gb * oF - 2.0 * lF * lFp)
            - 2.0 * MF * lF ** 2
            - lF * 2.0 * Nh * (2.0 * oF - 1j * gb)) / den
    return n, m, mbar


def stability(frames):
    """Spectral stability verdict: damping must beat the hyperbolic growth.

    The limit cycle attracts iff ``gamma_bar > 2 |Im Lambda_bar|``.  With no
    dissipation at all the question is undefined and ``stable`` is None.
    """
    uf = frames.unitary
    gb = frames.gamma_bar
    im = abs(uf.Lambda_bar.imag)
    if uf.sigma == 1:
        im = 0.0  # below the classification threshold: exact oscillatory phase
    margin = gb - 2.0 * im
    if gb <= 0:
        return StabilityReport(gamma_bar=gb, Lambda_bar=uf.Lambda_bar,
                               sigma=uf.sigma, im_Lambda_bar=im, margin=margin,
                               stable=None,
                               note="no dissipation: stability undefined")
    return StabilityReport(gamma_bar=gb, Lambda_bar=uf.Lambda_bar,
                           sigma=uf.sigma, im_Lambda_bar=im, margin=margin,
                           stable=bool(margin > 0))


def rotating_frame_spectrum(Lambda_bar, gamma_bar, n_max):
    """Eigenvalues of the constant rotated generator, by sector.

    Sector n holds n+1 eigenvalues ``-gamma_bar n/2 + 2i Lambda_bar k`` with
    k running from -n/2 to n/2 in unit steps.  Returns a list of
    ``(n, k, eigenvalue)`` tuples.
    """
    out = []
    for n in range(int(n_max) + 1):
        for j in range(n + 1):
            k = -n / 2.0 + j
            out.append((n, k, -gamma_bar * n / 2.0 + 2j * Lambda_bar * k))
    return out


# ---------------------------------------------------------------------------
# reductions and cross-checks

def dissipative_only_limit_cycle(protocol, tol=DEFAULT_TOL):
    """Limit cycle for protocols with no coherent part (omega = lambda = 0).

    The occupation and squeezing relax independently:
    ``n' + gamma n = gamma N`` and ``m' + gamma m = gamma M``.  Returns the
    pair of periodic trajectories ``(n, m)``.
    """
    protocol = as_bosonic(protocol)
    if protocol.omega.max_abs() > 1e-14 or not protocol.lam_is_zero():
        raise ProtocolError("pure-dissipation reduction needs omega = lambda = 0")
    edges = protocol.boundaries
    nseg = len(edges) - 1
    g_segs = protocol.gamma.segment_values()
    N_segs = protocol.bath_N.segment_values()
    M_segs = protocol.bath_M.segment_values()
    n = periodic_linear_solution(
        [(lambda t, k=k: np.asarray(g_segs[k](t), dtype=complex))
         for k in range(nseg)],
        [(lambda t, k=k: np.asarray(g_segs[k](t), dtype=complex)
          * np.asarray(N_segs[k](t), dtype=float)) for k in range(nseg)],
        protocol.period, tol=tol, boundaries=edges)
    m = periodic_linear_solution(
        [(lambda t, k=k: np.asarray(g_segs[k](t), dtype=complex))
         for k in range(nseg)],
        [(lambda t, k=k: np.asarray(g_segs[k](t), dtype=complex)
          * np.asarray(M_segs[k](t), dtype=complex)) for k in range(nseg)],
        protocol.period, tol=tol, boundaries=edges)
    return n, m


@dataclass
class PinneyReport:
    sigma: complex
    max_ep_residual: float = None
    max_J_mismatch: float = None
    max_r2_modulus_defect: float = None


def pinney_crosscheck(mech, frames=None, tol=DEFAULT_TOL):
    """Check the frame against the amplitude equation of the classical
    oscillator.

    In the oscillatory phase the Riccati branch encodes a real amplitude
    ``xi(t)`` satisfying the Ermakov-Pinney equation
    ``xi'' + Omega(t)^2 xi = eta^2 / xi^3``, and ``J`` equals
    ``(1/xi^2 + xi^2 + xi'^2/eta^2) / 2``.  Both are checked pointwise.  In
    the hyperbolic phase no real amplitude exists; the branch is instead
    pinned to the circle ``|2 r2| = 1``, which is checked.
    """
    if not hasattr(mech, "eta"):
        raise ProtocolError("the amplitude cross-check needs a protocol in "
                            "mechanical form (frequency gap + stiffness)")
    if frames is None:
        frames = solve_frames(mech, tol=tol, dissipative=False)
    uf = frames.unitary
    eta = float(mech.eta)
    ts = np.concatenate([np.linspace(a, b, 64, endpoint=False)
                         for a, b in zip(mech.boundaries[:-1],
                                         mech.boundaries[1:])])

    if uf.sigma != 1:
        defect = np.abs(2.0 * np.abs(uf.r2(ts)) - 1.0)
        return PinneyReport(sigma=uf.sigma,
                            max_r2_modulus_defect=float(np.max(defect)))

    # invert r2 -> (u, v) = (xi^2, xi xi') from the real 2x2 system
    u, v = _uv_from_r2(uf, ts, eta)
    w = uf.r2(ts) - 0.5j
    wr, wi = w.real, w.imag
    # direct residuals of the defining 2x2 system, as a guard on the algebra
    res1 = np.max(np.abs(u * (1.0 + wi) - wr * v / eta + wi))
    res2 = np.max(np.abs(-u * wr - wi * v / eta - wr))
    if max(res1, res2) > 1e-9 * max(1.0, float(np.max(np.abs(u)))):
        raise FloquetEngineError("amplitude reconstruction failed")
    if np.any(u <= 0):
        raise FloquetEngineError("amplitude reconstruction gave xi^2 <= 0")

    xi = np.sqrt(u)
    xid = v / xi
    J_ref = 0.5 * (1.0 / u + u + xid ** 2 / eta ** 2)
    J_mismatch = float(np.max(np.abs(uf.J(ts) - J_ref)))

    # Ermakov-Pinney residual with derivatives taken spectrally from u, v
    edges = mech.boundaries
    u_traj = Trajectory.from_function(
        lambda t: _uv_from_r2(uf, t, eta)[0], edges, tol=1e-11,
        period=mech.period)
    v_traj = Trajectory.from_function(
        lambda t: _uv_from_r2(uf, t, eta)[1], edges, tol=1e-11,
        period=mech.period)
    du = u_traj.derivative()(ts)   # = 2 xi xi'
    dv = v_traj.derivative()(ts)   # = xi'^2 + xi xi''
    xidd = (dv - xid ** 2) / xi
    ep_res = xidd + mech.Omega(ts) ** 2 * xi - eta ** 2 / xi ** 3
    # du is redundant given v; use it as an extra consistency term
    ep_aux = np.max(np.abs(du - 2.0 * v))
    return PinneyReport(sigma=uf.sigma,
                        max_ep_residual=float(max(np.max(np.abs(ep_res)),
                                                  ep_aux)),
                        max_J_mismatch=J_mismatch)


def _uv_from_r2(uf, t, eta):
    """Squared amplitude u = xi^2 and v = xi xi' encoded in the branch.

    From  r2 = i/2 + u / (i (1 + u) + v / eta):  splitting into real and
    imaginary parts gives a real 2x2 linear system for (u, v) with solution
    u = |w|^2 / D,  v = eta wr / D,  D = -wi (1 + wi) - wr^2,  w = r2 - i/2.
    """
    w = uf.r2(t) - 0.5j
    wr, wi = w.real, w.imag
    D = -wi * (1.0 + wi) - wr * wr
    if np.any(np.abs(D) < 1e-13):
        raise FloquetEngineError("amplitude reconstruction is singular")
    u = (wr * wr + wi * wi) / D
    v = eta * wr / D
    return u, v


# ---------------------------------------------------------------------------
# residual audits

def _seg_complex(fsegs, k):
    return lambda t: np.asarray(fsegs[k](t), dtype=complex)


def unitary_residuals(protocol, frame, tol=1e-11):
    """Defect trajectories of the drive-eliminating frame.

    All derivatives are taken spectrally from the stored trajectories, so
    the audit is independent of how the frame was constructed.  Returns
    ``(B0, B1, B2)``: B2 and B1 must vanish and B0 must equal the constant
    ``Lambda_bar``.
    """
    protocol = as_bosonic(protocol)
    edges = protocol.boundaries
    nseg = len(edges) - 1
    om = protocol.omega.segment_values()
    lm = protocol.lam.segment_values()
    uf = frame
    dr2 = uf.r2.derivative()
    dr1 = uf.r1.derivative()
    dr0 = uf.r0.derivative()

    def b2_seg(k):
        def f(t):
            w = np.asarray(om[k](t), dtype=complex)
            l = np.asarray(lm[k](t), dtype=complex)
            r2 = uf.r2.eval_segment(k, t)
            return np.exp(-2j * uf.r0.eval_segment(k, t)) * (
                dr2.eval_segment(k, t) + 2j * w * r2
                - 2.0 * l * r2 ** 2 + 0.5 * np.conj(l))
        return f

    B2 = Trajectory.from_function([b2_seg(k) for k in range(nseg)], edges,
                                  tol=tol, period=protocol.period)

    def b1_seg(k):
        def f(t):
            w = np.asarray(om[k](t), dtype=complex)
            l = np.asarray(lm[k](t), dtype=complex)
            r1 = uf.r1.eval_segment(k, t)
            r2 = uf.r2.eval_segment(k, t)
            e = np.exp(2j * uf.r0.eval_segment(k, t))
            return (-4.0 * r1 ** 2 * B2.eval_segment(k, t)
                    + e * (dr1.eval_segment(k, t) - 2j * w * r1
                           + 4.0 * l * r1 * r2 + 0.5 * l))
        return f

    B1 = Trajectory.from_function([b1_seg(k) for k in range(nseg)], edges,
                                  tol=tol, period=protocol.period)

    def b0_seg(k):
        def f(t):
            w = np.asarray(om[k](t), dtype=complex)
            l = np.asarray(lm[k](t), dtype=complex)
            r1 = uf.r1.eval_segment(k, t)
            r2 = uf.r2.eval_segment(k, t)
            e = np.exp(2j * uf.r0.eval_segment(k, t))
            return (-4j * r1 * e * B2.eval_segment(k, t)
                    + dr0.eval_segment(k, t) + w + 2j * l * r2)
        return f

    B0 = Trajectory.from_function([b0_seg(k) for k in range(nseg)], edges,
                                  tol=tol, period=protocol.period)
    return B0, B1, B2


def frame_logs(protocol, frame, dframe):
    """Scalar transformation logs (g1 .. g4) recovered from the frame data.

    g2 = -log(G2 + 1/2) (principal branch; an argument on the cut raises),
    g1 = g2 + int (gamma_bar - gamma), g3 = e^{-2i r0} g3~, g4 = e^{2i r0} g4~.
    """
    protocol = as_bosonic(protocol)
    edges = protocol.boundaries
    nseg = len(edges) - 1
    G2 = dframe.G2

    samples = np.concatenate([s[2] for s in G2._segs]) + 0.5
    if np.any((samples.real <= 0) & (np.abs(samples.imag)
                                     <= 1e-12 * np.abs(samples.real))):
        raise FrameLogarithmError("G2 + 1/2 touches the logarithm branch cut")

    g2 = Trajectory.map(lambda G: -np.log(G + 0.5), G2)
    g_segs = protocol.gamma.segment_values()
    gb = dframe.gamma_bar
    corr = Trajectory.from_function(
        [(lambda t, k=k: gb - np.asarray(g_segs[k](t), dtype=complex))
         for k in range(nseg)], edges, tol=1e-12).antiderivative()
    g1 = Trajectory.map(lambda a, b: a + b, g2, corr)
    g3 = Trajectory.map(lambda r0, g: np.exp(-2j * r0) * g, frame.r0,
                        dframe.g3t)
    g4 = Trajectory.map(lambda r0, g: np.exp(2j * r0) * g, frame.r0,
                        dframe.g4t)
    return g1, g2, g3, g4


def dissipative_residuals(protocol, frame, dframe, tol=1e-11):
    """Defect trajectories of the dissipation-absorbing frame.

    Returns ``(C1, C2, C3, C4)``: C1 must equal the constant ``gamma_bar``
    and the others must vanish.  Derivatives are spectral, from the stored
    trajectories.
    """
    protocol = as_bosonic(protocol)
    edges = protocol.boundaries
    nseg = len(edges) - 1
    g1, g2, g3, g4 = frame_logs(protocol, frame, dframe)
    g_segs = protocol.gamma.segment_values()
    gb = dframe.gamma_bar
    Lb = frame.Lambda_bar
    tilde = dframe.tilde
    dg1, dg2, dg3, dg4 = (g.derivative() for g in (g1, g2, g3, g4))

    def seg(k, expr):
        def f(t):
            gam = np.asarray(g_segs[k](t), dtype=complex)
            return expr(
                gam, g1.eval_segment(k, t), g2.eval_segment(k, t),
                g3.eval_segment(k, t), g4.eval_segment(k, t),
                dg1.eval_segment(k, t), dg2.eval_segment(k, t),
                dg3.eval_segment(k, t), dg4.eval_segment(k, t),
                tilde.N_half.eval_segment(k, t),
                tilde.M.eval_segment(k, t), tilde.Mp.eval_segment(k, t))
        return f

    def make(expr):
        return Trajectory.from_function([seg(k, expr) for k in range(nseg)],
                                        edges, tol=tol,
                                        period=protocol.period)

    C1 = make(lambda gam, G1, G2_, G3, G4, d1, d2, d3, d4, Nh, Mt, Mtp:
              d1 - d2 + gam)
    C2 = make(lambda gam, G1, G2_, G3, G4, d1, d2, d3, d4, Nh, Mt, Mtp:
              np.exp(-G1) * (d2 - gam + gam * np.exp(G2_) * (Nh + 0.5)))
    C3 = make(lambda gam, G1, G2_, G3, G4, d1, d2, d3, d4, Nh, Mt, Mtp:
              np.exp(G2_ - G1) * (d3 + (gam + 2j * Lb) * G3 - gam * Mt))
    C4 = make(lambda gam, G1, G2_, G3, G4, d1, d2, d3, d4, Nh, Mt, Mtp:
              np.exp(G2_ - G1) * (d4 + (gam - 2j * Lb) * G4 - gam * Mtp))
    return C1, C2, C3, C4
