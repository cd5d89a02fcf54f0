"""Direct propagation of the second moments, and a Fock-space oracle.

This module is the ground truth the closed-form pipeline is validated
against.  The second moments (n, m, m*) of the damped driven mode obey a
closed linear system

    n'  =  i lambda m - i lambda* mbar - gamma n + gamma N,
    m'  = -(2i omega + gamma) m - i lambda* (2n + 1) + gamma M,
    mbar' = conjugate counterpart,

which is integrated stroke by stroke with an adaptive Runge-Kutta method.
The one-period map of this affine system gives the stroboscopic fixed
point, an independent route to the limit cycle.  A truncated-Fock
superoperator oracle provides a third, representation-free route for
derivative and spectrum checks.
"""

import functools
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InstabilityError, StiffDynamicsError
from .periodic_ode import PiecewiseSolution, _solve_piece
from .protocols import as_bosonic

DEFAULT_TOL = 1e-10
HEISENBERG_TOL = 1e-9


# ---------------------------------------------------------------------------
# moment state

@dataclass
class SecondMoments:
    """Gaussian second moments of a single mode with zero mean field.

    ``mbar`` is carried separately instead of assuming ``m*`` so that
    propagation drift is detectable.
    """

    n: float
    m: complex
    mbar: complex

    @classmethod
    def vacuum(cls):
        return cls(0.0, 0.0 + 0.0j, 0.0 + 0.0j)

    @classmethod
    def thermal(cls, occupation):
        return cls(float(occupation), 0.0 + 0.0j, 0.0 + 0.0j)

    @classmethod
    def squeezed_thermal(cls, occupation, squeezing):
        return cls(float(occupation), complex(squeezing),
                   np.conj(complex(squeezing)))

    @classmethod
    def from_vector(cls, v):
        return cls(float(np.real(v[0])), complex(v[1]), complex(v[2]))

    def vector(self):
        return np.array([self.n, self.m, self.mbar], dtype=complex)

    def conjugation_defect(self):
        """|mbar - m*|, nonzero only through numerical drift."""
        return abs(self.mbar - np.conj(self.m))

    def heisenberg_margin(self):
        """n(n+1) - |m|^2; negative values beyond tolerance are unphysical."""
        return self.n * (self.n + 1.0) - abs(self.m) ** 2

    def is_physical(self, tol=HEISENBERG_TOL):
        return (self.n >= -tol
                and self.conjugation_defect() <= tol * max(1.0, abs(self.m))
                and self.heisenberg_margin() >= -tol)


def _coeffs_at(protocol, k, t):
    """Control values on stroke k at global time t (one-sided limits)."""
    return (float(protocol.omega.pieces[k].value(t)),
            complex(protocol.lam.pieces[k].value(t)),
            float(np.real(protocol.gamma.pieces[k].value(t))),
            float(np.real(protocol.bath_N.pieces[k].value(t))),
            complex(protocol.bath_M.pieces[k].value(t)))


def _system_matrices(w, l, g, N, M):
    lc = np.conj(l)
    A = np.array([[-g, 1j * l, -1j * lc],
                  [-2j * lc, -(2j * w + g), 0.0],
                  [2j * l, 0.0, 2j * w - g]])
    b = np.array([g * N, g * M - 1j * lc, g * np.conj(M) + 1j * l])
    return A, b


def moment_rhs(t, state, protocol):
    """Time derivative of the second moments under the instantaneous
    generator.

    ``state`` may be a :class:`SecondMoments` or a length-3 complex vector
    (n, m, mbar); the result has the same form.  First moments are assumed
    zero throughout (the generator has no linear drive).
    """
    protocol = as_bosonic(protocol)
    w = float(protocol.omega(t))
    l = complex(protocol.lam(t))
    g = float(np.real(protocol.gamma(t)))
    N = float(np.real(protocol.bath_N(t)))
    M = complex(protocol.bath_M(t))
    A, b = _system_matrices(w, l, g, N, M)
    if isinstance(state, SecondMoments):
        return SecondMoments.from_vector(A @ state.vector() + b)
    return A @ np.asarray(state, dtype=complex) + b


# ---------------------------------------------------------------------------
# propagation

def _span_breakpoints(protocol, t0, t1):
    """All stroke edges inside (t0, t1), across period repeats."""
    T = protocol.period
    edges = protocol.boundaries
    k0 = int(np.floor((t0 - edges[0]) / T)) - 1
    k1 = int(np.ceil((t1 - edges[0]) / T)) + 1
    pts = []
    for k in range(k0, k1 + 1):
        for e in edges[:-1]:
            te = e + k * T
            if t0 < te < t1:
                pts.append(te)
    return np.unique(np.asarray(pts, dtype=float))


def _stroke_of(protocol, t):
    """Index of the stroke containing global time t, and its period shift."""
    T = protocol.period
    edges = protocol.boundaries
    shift = np.floor((t - edges[0]) / T) * T
    tl = t - shift
    k = int(np.searchsorted(edges[1:-1], tl, side="right"))
    return k, shift


class MomentTrajectory:
    """Dense propagation result; callable, returns (3,) or (3, len(t))."""

    def __init__(self, dense, protocol, t0, t1):
        self._dense = dense
        self.protocol = protocol
        self.t0 = t0
        self.t1 = t1

    def __call__(self, t):
        return self._dense(t)

    def sample(self, t):
        return SecondMoments.from_vector(self._dense(t))

    @property
    def final(self):
        return self.sample(self.t1)

    def stroboscopic(self, n_periods=None):
        """Vectors sampled once per period, starting at t0."""
        T = self.protocol.period
        if n_periods is None:
            n_periods = int(round((self.t1 - self.t0) / T))
        ts = self.t0 + T * np.arange(n_periods + 1)
        return np.array([self._dense(t) for t in ts])


def propagate(initial, protocol, t0, t1, tol=DEFAULT_TOL, method="RK45"):
    """Integrate the moment system from t0 to t1.

    Integration restarts at every stroke boundary (including period
    repeats), so no step straddles a control discontinuity.  Returns a
    :class:`MomentTrajectory`; raises :class:`StiffDynamicsError` with the
    failure time if the integrator gives up.
    """
    protocol = as_bosonic(protocol)
    t0, t1 = float(t0), float(t1)
    if t1 < t0:
        raise ValueError("t_span must be forward in time")
    y = initial.vector() if isinstance(initial, SecondMoments) \
        else np.asarray(initial, dtype=complex)
    inner = _span_breakpoints(protocol, t0, t1)
    edges = np.concatenate(([t0], inner, [t1]))
    pieces = []
    for a, b in zip(edges[:-1], edges[1:]):
        k, shift = _stroke_of(protocol, 0.5 * (a + b))

        def rhs(t, v, k=k, shift=shift):
            w, l, g, N, M = _coeffs_at(protocol, k, t - shift)
            A, bb = _system_matrices(w, l, g, N, M)
            return A @ v + bb

        sol = _solve_piece(rhs, y, a, b, tol, method, True)
        pieces.append((a, b, sol.sol))
        y = sol.y[:, -1]
    return MomentTrajectory(PiecewiseSolution(pieces), protocol, t0, t1)


@dataclass
class ConvergenceReport:
    """Geometric-ratio fit of stroboscopic differences."""

    diffs: np.ndarray          # norms of successive stroboscopic differences
    ratio: float = field(init=False)
    converged: bool = field(init=False)
    growing: bool = field(init=False)

    def __post_init__(self):
        tail = self.diffs[-5:]
        tail = tail[tail > 0]
        self.ratio = float(np.exp(np.mean(np.diff(np.log(tail))))) \
            if len(tail) >= 2 else 0.0
        self.converged = bool(len(self.diffs) > 0
                              and self.diffs[-1] < 1e-9)
        self.growing = bool(self.ratio > 1.0 and len(self.diffs) >= 3
                            and self.diffs[-1] > self.diffs[0])


def convergence_report(strobo_samples):
    """Fit a geometric ratio to the last few stroboscopic differences."""
    v = np.asarray(strobo_samples)
    diffs = np.linalg.norm(np.diff(v, axis=0), axis=1)
    return ConvergenceReport(diffs=diffs)


# ---------------------------------------------------------------------------
# stroboscopic map

@dataclass
class PeriodMap:
    """One-period affine map  v -> linear v + offset  of the moment system."""

    t0: float
    linear: np.ndarray
    offset: np.ndarray

    @property
    def multipliers(self):
        return np.linalg.eigvals(self.linear)

    @property
    def spectral_radius(self):
        return float(np.max(np.abs(self.multipliers)))

    def fixed_point_vector(self):
        return np.linalg.solve(np.eye(3) - self.linear, self.offset)


def period_map(protocol, t0=0.0, tol=1e-12, method="DOP853"):
    """Build the stroboscopic affine map by propagating a moment basis.

    The three unit vectors and the zero state are propagated over one
    period in a single stacked solve; the linear part and offset follow by
    differencing.
    """
    protocol = as_bosonic(protocol)
    T = protocol.period
    t0 = float(t0)
    V0 = np.hstack([np.eye(3, dtype=complex), np.zeros((3, 1))])
    inner = _span_breakpoints(protocol, t0, t0 + T)
    edges = np.concatenate(([t0], inner, [t0 + T]))
    y = V0.reshape(12)
    for a, b in zip(edges[:-1], edges[1:]):
        k, shift = _stroke_of(protocol, 0.5 * (a + b))

        def rhs(t, yy, k=k, shift=shift):
            w, l, g, N, M = _coeffs_at(protocol, k, t - shift)
            A, bb = _system_matrices(w, l, g, N, M)
            V = yy.reshape(3, 4)
            return (A @ V + bb[:, None]).reshape(12)

        y = _solve_piece(rhs, y, a, b, tol, method, False).y[:, -1]
    V1 = y.reshape(3, 4)
    offset = V1[:, 3]
    linear = V1[:, :3] - offset[:, None]
    return PeriodMap(t0=t0, linear=linear, offset=offset)


def stroboscopic_fixed_point(protocol, t0=0.0, tol=1e-12):
    """Fixed point of the one-period moment map: the limit cycle at phase t0.

    Raises :class:`InstabilityError` when the map is not a contraction
    (spectral radius >= 1), in which case no attracting cycle exists.
    """
    pm = period_map(protocol, t0=t0, tol=tol)
    radius = pm.spectral_radius
    if radius >= 1.0:
        raise InstabilityError(
            f"one-period moment map is not contractive "
            f"(spectral radius {radius:.6g}); no attracting limit cycle")
    return SecondMoments.from_vector(pm.fixed_point_vector())


# ---------------------------------------------------------------------------
# truncated-Fock oracle

class FockOracle:
    """Superoperator blocks of the generator on a truncated Fock space.

    Density matrices are vectorized row-major, so  vec(A rho B) =
    kron(A, B^T) vec(rho).  All seven blocks are protocol-independent;
    the full generator is a linear combination with the control values.
    Instances are immutable and safe to share across threads.
    """

    def __init__(self, n_max):
        if n_max < 8:
            raise ValueError("cutoff too small: need n_max >= 8")
        self.n_max = int(n_max)
        d = self.n_max + 1
        self.dim = d
        a = sp.diags(np.sqrt(np.arange(1.0, d)), 1, format="csr")
        ad = a.T.tocsr()
        I = sp.identity(d, format="csr")
        self.a = a
        self.adag = ad
        self.number = (ad @ a).tocsr()

        def left(A):
            return sp.kron(A, I, format="csr")

        def right(B):
            return sp.kron(I, B.T, format="csr")

        def sandwich(A, B):
            return sp.kron(A, B.T, format="csr")

        def commutator_gen(A):
            return -1j * (left(A) - right(A))

        def dissipator(A, B):
            # A . B - {B A, .} / 2
            BA = (B @ A).tocsr()
            return sandwich(A, B) - 0.5 * (left(BA) + right(BA))

        self.H0 = commutator_gen(self.number)
        self.H1 = commutator_gen((a @ a).tocsr())
        self.H2 = commutator_gen((ad @ ad).tocsr())
        self.D1 = dissipator(a, ad)
        self.D2 = dissipator(ad, a)
        self.D3 = dissipator(ad, ad)
        self.D4 = dissipator(a, a)

    def liouvillian(self, omega, lam, gamma, N, M):
        """Generator matrix for given instantaneous control values."""
        lam = complex(lam)
        M = complex(M)
        L = (omega * self.H0 + (lam / 2.0) * self.H1
             + (np.conj(lam) / 2.0) * self.H2
             + gamma * (N + 1.0) * self.D1 + gamma * N * self.D2
             - gamma * M * self.D3 - gamma * np.conj(M) * self.D4)
        return L.tocsr()

    def liouvillian_at(self, protocol, t):
        protocol = as_bosonic(protocol)
        return self.liouvillian(
            float(protocol.omega(t)), complex(protocol.lam(t)),
            float(np.real(protocol.gamma(t))),
            float(np.real(protocol.bath_N(t))), complex(protocol.bath_M(t)))

    # -- state helpers -------------------------------------------------------

    def vec(self, rho):
        return np.asarray(rho, dtype=complex).reshape(self.dim * self.dim)

    def unvec(self, v):
        return np.asarray(v, dtype=complex).reshape(self.dim, self.dim)

    def embed(self, rho_small):
        """Embed a low-dimensional density matrix at the bottom of the space."""
        rho_small = np.asarray(rho_small, dtype=complex)
        k = rho_small.shape[0]
        if k > self.dim:
            raise ValueError("state larger than the truncated space")
        rho = np.zeros((self.dim, self.dim), dtype=complex)
        rho[:k, :k] = rho_small
        return rho

    def moments(self, rho):
        """(n, m, mbar) of a density matrix."""
        n = np.trace(self.number.toarray() @ rho)
        aa = (self.a @ self.a).toarray()
        m = np.trace(aa @ rho)
        mbar = np.trace(aa.conj().T @ rho)
        return np.array([n, m, mbar])

    def expectation_derivatives(self, rho, omega, lam, gamma, N, M):
        """d/dt (n, m, mbar) evaluated through the superoperator."""
        L = self.liouvillian(omega, lam, gamma, N, M)
        drho = self.unvec(L @ self.vec(rho))
        return self.moments(drho)

    def interior_projector(self, margin=2):
        """Projector onto |j><k| with j, k below the cutoff boundary layer."""
        keep = np.zeros((self.dim, self.dim), dtype=bool)
        keep[:self.dim - margin, :self.dim - margin] = True
        return sp.diags(keep.reshape(-1).astype(float), format="csr")


@functools.lru_cache(maxsize=8)
def fock_oracle(n_max):
    """Memoized oracle per cutoff (blocks are protocol-independent)."""
    return FockOracle(n_max)


def fock_oracle_build(protocol, t, n_max):
    """Generator matrix of the protocol frozen at time t, cutoff n_max."""
    return fock_oracle(n_max).liouvillian_at(protocol, t)


def fock_oracle_spectrum(matrix):
    """Eigenvalues of a (sparse or dense) generator matrix."""
    if sp.issparse(matrix):
        matrix = matrix.toarray()
    return np.linalg.eigvals(matrix)
