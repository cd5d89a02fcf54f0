"""Periodic linear ODE machinery.

This module provides the numerical backbone used by the frame solvers:

* :class:`Trajectory` -- a piecewise-smooth complex function of time stored
  as Chebyshev interpolants on smooth segments (never interpolating across a
  declared breakpoint),
* :func:`integrate` / :func:`integrate_dense` -- guarded initial-value
  integration that restarts at declared breakpoints,
* :func:`periodic_linear_solution` -- the unique periodic solution of a
  scalar equation  x' + p(t) x = q(t)  with piecewise-smooth periodic
  coefficients,
* :func:`monodromy_2x2` -- one-period fundamental matrix of a 2x2 linear
  system, with dense output over the whole period.

The scalar periodic solver never time-steps: it builds the integrating
factor by spectral quadrature on each smooth segment and glues segments
through their one-sided transfer relations.  When the homogeneous multiplier
grows over a period, the equation is solved in reversed time so that only
the decaying direction is ever used; this keeps the construction
well-conditioned on both sides of a stability threshold.
"""

import numpy as np
from scipy.integrate import solve_ivp

from . import _cheb
from .errors import FloquetEngineError, FloquetResonanceError, StiffDynamicsError

DEFAULT_TOL = 1e-10
RESONANCE_TOL = 1e-8


def _as_segment_callables(f, boundaries):
    """Normalize f into one callable per smooth segment.

    Accepts a plain vectorized callable, a sequence of per-segment callables,
    or a number (constant function).
    """
    nseg = len(boundaries) - 1
    if np.isscalar(f) or isinstance(f, complex):
        value = complex(f)
        return [lambda t, v=value: np.full(np.shape(t), v, dtype=complex)] * nseg
    if isinstance(f, (list, tuple)):
        if len(f) != nseg:
            raise ValueError(f"expected {nseg} segment callables, got {len(f)}")
        return list(f)
    return [f] * nseg


class Trajectory:
    """Piecewise-smooth complex-valued function of time.

    Values are stored on Chebyshev-Lobatto grids per smooth segment together
    with the coefficients of the interpolating series, so evaluation,
    differentiation and quadrature are spectrally accurate.  Interpolation
    never crosses a segment boundary.
    """

    def __init__(self, segments, period=None, meta=None):
        # segments: list of (a, b, values, coeffs) with contiguous [a, b]
        if not segments:
            raise ValueError("trajectory needs at least one segment")
        self._segs = segments
        self._edges = np.array([s[0] for s in segments] + [segments[-1][1]])
        if np.any(np.diff(self._edges) <= 0):
            raise ValueError("segment boundaries must be strictly increasing")
        self.period = period
        self.meta = dict(meta or {})

    # -- construction ------------------------------------------------------

    @classmethod
    def from_function(cls, f, boundaries, tol=1e-12, period=None, n0=16,
                      meta=None):
        """Resolve f adaptively on each smooth segment.

        ``f`` may be a vectorized callable, a number, or a list with one
        callable per segment (useful when the function has one-sided limits
        at the boundaries).
        """
        boundaries = np.asarray(boundaries, dtype=float)
        fs = _as_segment_callables(f, boundaries)
        segs = []
        for k in range(len(boundaries) - 1):
            a, b = boundaries[k], boundaries[k + 1]
            _, v, c = _cheb.resolve(fs[k], a, b, tol, n0=n0)
            segs.append((a, b, v, c))
        return cls(segs, period=period, meta=meta)

    @classmethod
    def map(cls, f, *trajectories, tol=1e-12, n0=16):
        """Pointwise function of one or more trajectories on shared segments."""
        base = trajectories[0]
        for other in trajectories[1:]:
            if len(other._edges) != len(base._edges) or \
                    not np.allclose(other._edges, base._edges):
                raise ValueError("trajectories must share segment boundaries")
        return cls.from_function(
            lambda t: f(*[traj(t) for traj in trajectories]),
            base._edges, tol=tol, period=base.period, n0=n0)

    # -- basic queries -----------------------------------------------------

    @property
    def boundaries(self):
        return self._edges.copy()

    @property
    def t0(self):
        return self._edges[0]

    @property
    def t1(self):
        return self._edges[-1]

    @property
    def grid(self):
        """Concatenated sample times of all segments."""
        return np.concatenate(
            [_cheb.lobatto_nodes(len(s[2]) - 1, s[0], s[1]) for s in self._segs])

    @property
    def values(self):
        """Samples at :attr:`grid`."""
        return np.concatenate([s[2] for s in self._segs])

    def node_counts(self):
        return [len(s[2]) - 1 for s in self._segs]

    def max_abs(self):
        return float(max(np.max(np.abs(s[2])) for s in self._segs))

    # -- evaluation --------------------------------------------------------

    def _wrap(self, t):
        t = np.asarray(t, dtype=float)
        if self.period is not None:
            t = self.t0 + np.mod(t - self.t0, self.period)
        else:
            span = self.t1 - self.t0
            if np.any(t < self.t0 - 1e-9 * span) or np.any(t > self.t1 + 1e-9 * span):
                raise ValueError("evaluation time outside trajectory domain")
            t = np.clip(t, self.t0, self.t1)
        return t

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        tt = np.atleast_1d(self._wrap(t))
        idx = np.searchsorted(self._edges[1:-1], tt, side="right")
        out = np.empty(tt.shape, dtype=complex)
        for k in np.unique(idx):
            a, b, _, c = self._segs[k]
            mask = idx == k
            out[mask] = _cheb.cheb_eval(c, a, b, tt[mask])
        return out[0] if scalar else out

    def eval_segment(self, k, t):
        """Evaluate segment k's interpolant at t (one-sided at boundaries)."""
        a, b, _, c = self._segs[k]
        return _cheb.cheb_eval(c, a, b, t)

    # -- calculus ----------------------------------------------------------

    def derivative(self):
        segs = []
        for a, b, _, c in self._segs:
            dc = _cheb.derivative_coeffs(c, a, b)
            segs.append((a, b, _cheb.coeffs_to_values(dc), dc))
        return Trajectory(segs, period=self.period)

    def antiderivative(self):
        """Continuous antiderivative F with F(t0) = 0."""
        segs = []
        offset = 0.0 + 0.0j
        for a, b, _, c in self._segs:
            ic = _cheb.antiderivative_coeffs(c, a, b)
            ic = ic.astype(complex)
            ic[0] += offset
            segs.append((a, b, _cheb.coeffs_to_values(ic), ic))
            offset = _cheb.cheb_eval(ic, a, b, b)
        return Trajectory(segs, period=None)

    def integral(self):
        """Integral over the full domain."""
        return complex(sum(_cheb.definite_integral(c, a, b)
                           for a, b, _, c in self._segs))

    def reflected(self, about=None):
        """Trajectory  t -> self(c - t)  where c defaults to t0 + t1."""
        c = (self.t0 + self.t1) if about is None else about
        segs = [(c - b, c - a, v[::-1].copy(), _cheb.values_to_coeffs(v[::-1]))
                for a, b, v, _ in reversed(self._segs)]
        return Trajectory(segs, period=self.period, meta=dict(self.meta))


class PiecewiseSolution:
    """Dense ODE output chained across breakpoints; callable and vectorized."""

    def __init__(self, pieces):
        # pieces: list of (a, b, scipy OdeSolution)
        self._pieces = pieces
        self._edges = np.array([p[0] for p in pieces] + [pieces[-1][1]])

    @property
    def t0(self):
        return self._edges[0]

    @property
    def t1(self):
        return self._edges[-1]

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        tt = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self._edges[1:-1], tt, side="right")
        n = self._pieces[0][2](self._edges[0]).shape[0]
        out = np.empty((n,) + tt.shape, dtype=complex)
        for k in np.unique(idx):
            mask = idx == k
            out[:, mask] = np.atleast_2d(self._pieces[k][2](tt[mask]))
        return out[:, 0] if scalar else out


def _split_span(t0, t1, breakpoints):
    pts = [t0, t1]
    if breakpoints is not None:
        pts.extend(b for b in np.asarray(breakpoints, dtype=float)
                   if t0 < b < t1)
    return np.unique(np.asarray(pts, dtype=float))


def _solve_piece(rhs, x0, a, b, tol, method, dense):
    sol = solve_ivp(rhs, (a, b), x0, method=method, rtol=tol,
                    atol=tol, dense_output=dense)
    if not sol.success:
        raise StiffDynamicsError(
            f"integration failed at t = {sol.t[-1]:.6g}: {sol.message}",
            t_failure=float(sol.t[-1]))
    if not np.all(np.isfinite(sol.y[:, -1])):
        raise StiffDynamicsError(
            f"non-finite state at t = {sol.t[-1]:.6g}",
            t_failure=float(sol.t[-1]))
    return sol


def integrate(rhs, x0, t_span, tol=DEFAULT_TOL, method="RK45",
              breakpoints=None):
    """Propagate x' = rhs(t, x) from t_span[0] to t_span[1].

    Integration restarts at each declared breakpoint so no step straddles a
    coefficient discontinuity.  Returns the final state.  Raises
    :class:`StiffDynamicsError` (with the failure time) if the integrator
    gives up or produces non-finite values.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 < t0:
        raise ValueError("t_span must be forward in time")
    x = np.asarray(x0, dtype=complex)
    if t1 == t0:
        return x
    edges = _split_span(t0, t1, breakpoints)
    for a, b in zip(edges[:-1], edges[1:]):
        x = _solve_piece(rhs, x, a, b, tol, method, False).y[:, -1]
    return x


def integrate_dense(rhs, x0, t_span, tol=DEFAULT_TOL, method="RK45",
                    breakpoints=None):
    """Like :func:`integrate` but returns a dense :class:`PiecewiseSolution`."""
    t0, t1 = float(t_span[0]), float(t_span[1])
    if t1 <= t0:
        raise ValueError("t_span must be forward in time")
    x = np.asarray(x0, dtype=complex)
    pieces = []
    edges = _split_span(t0, t1, breakpoints)
    for a, b in zip(edges[:-1], edges[1:]):
        sol = _solve_piece(rhs, x, a, b, tol, method, True)
        pieces.append((a, b, sol.sol))
        x = sol.y[:, -1]
    return PiecewiseSolution(pieces)


class Monodromy2x2:
    """One-period fundamental matrix of a 2x2 linear system.

    ``end`` is the matrix over the full period, ``det_defect`` the deviation
    of its determinant from 1 (zero for traceless generators), and the object
    is callable, returning the fundamental matrix at intermediate times with
    shape (2, 2) or (2, 2, len(t)).
    """

    def __init__(self, dense, det_defect, end=None):
        self._dense = dense
        self.det_defect = det_defect
        self.end = self(dense.t1) if end is None else end

    def __call__(self, t):
        y = self._dense(t)
        return y.reshape((2, 2) + y.shape[1:])


def monodromy_2x2(A, period, tol=1e-12, method="DOP853", breakpoints=None):
    """Fundamental matrix over one period of  v' = A(t) v,  A complex 2x2.

    ``A`` is a callable returning a (2, 2) array at a scalar time, or a list
    with one such callable per smooth segment (breakpoints must then match).
    Dense output is kept so the matrix can be evaluated anywhere in the
    period.
    """
    period = float(period)
    edges = _split_span(0.0, period, breakpoints)
    if isinstance(A, (list, tuple)):
        if len(A) != len(edges) - 1:
            raise ValueError(f"expected {len(edges) - 1} segment generators, "
                             f"got {len(A)}")
        seg_A = list(A)
    else:
        seg_A = [A] * (len(edges) - 1)

    x = np.eye(2, dtype=complex).reshape(4)
    pieces = []
    for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        def rhs(t, y, Ak=seg_A[k]):
            return (Ak(t) @ y.reshape(2, 2)).reshape(4)

        sol = _solve_piece(rhs, x, a, b, tol, method, True)
        pieces.append((a, b, sol.sol))
        x = sol.y[:, -1]
    dense = PiecewiseSolution(pieces)
    end = x.reshape(2, 2).copy()
    det_defect = abs(end[0, 0] * end[1, 1] - end[0, 1] * end[1, 0] - 1.0)
    return Monodromy2x2(dense, det_defect, end=end)


def _transfer_chain(alphas, betas):
    """Fold per-segment transfers x_{s+1} = alpha_s x_s + beta_s over a period."""
    A = 1.0 + 0.0j
    B = 0.0 + 0.0j
    for al, be in zip(alphas, betas):
        B = al * B + be
        A = al * A
    return A, B


def _periodic_solution_oneway(ps, qs, boundaries, tol, resonance_tol):
    """Periodic solution assuming the homogeneous multiplier does not grow.

    ``ps``/``qs`` are per-segment callables.  Returns (Trajectory, e^{P(T)}).
    """
    nseg = len(boundaries) - 1
    # Integrating-factor exponent P(t) = int_0^t p, continuous, P(0) = 0.
    p_segs, P_coeffs, P_left = [], [], []
    offset = 0.0 + 0.0j
    for k in range(nseg):
        a, b = boundaries[k], boundaries[k + 1]
        _, _, pc = _cheb.resolve(ps[k], a, b, tol)
        Pc = _cheb.antiderivative_coeffs(pc, a, b).astype(complex)
        Pc[0] += offset
        P_coeffs.append(Pc)
        P_left.append(offset)
        offset = _cheb.cheb_eval(Pc, a, b, b)
        p_segs.append((a, b))
    P_total = offset

    if P_total.real < -1e-12 * max(1.0, abs(P_total)):
        raise FloquetEngineError("growing multiplier reached one-way solver")

    # Per segment: I(t) = int_a^t e^{P - Pref} q, with Pref the segment's
    # largest Re P so the weight never exceeds 1 in magnitude.
    alphas, betas = [], []
    seg_data = []
    for k in range(nseg):
        a, b = p_segs[k]
        Pc = P_coeffs[k]

        def Pval(t, Pc=Pc, a=a, b=b):
            return _cheb.cheb_eval(Pc, a, b, t)

        nodes = _cheb.lobatto_nodes(max(16, 2 * (len(Pc) - 1)), a, b)
        Pref = np.max(Pval(nodes).real)
        if Pref - np.min(Pval(nodes).real) > 500.0:
            raise FloquetEngineError(
                f"exponent range too large on segment [{a:g}, {b:g}]")

        _, _, gc = _cheb.resolve(
            lambda t, k=k: np.exp(Pval(t) - Pref) * np.asarray(qs[k](t), dtype=complex),
            a, b, tol)
        Ic = _cheb.antiderivative_coeffs(gc, a, b)
        Pa, Pb = P_left[k], _cheb.cheb_eval(Pc, a, b, b)
        alphas.append(np.exp(-(Pb - Pa)))
        betas.append(np.exp(-(Pb - Pref)) * _cheb.cheb_eval(Ic, a, b, b))
        seg_data.append((a, b, Pval, Pref, Ic, Pa))

    A, B = _transfer_chain(alphas, betas)
    multiplier = 1.0 / A  # e^{P(T)}
    if abs(multiplier - 1.0) < resonance_tol:
        raise FloquetResonanceError(
            f"one-period multiplier within {resonance_tol:g} of 1 "
            f"(|e^P - 1| = {abs(multiplier - 1.0):.3e}): "
            "no isolated periodic solution")
    x0 = B / (1.0 - A)

    segs = []
    x_left = x0
    for k in range(nseg):
        a, b, Pval, Pref, Ic, Pa = seg_data[k]

        def xval(t, Pval=Pval, Pref=Pref, Ic=Ic, Pa=Pa, x_left=x_left, a=a, b=b):
            P = Pval(t)
            return (np.exp(Pa - P) * x_left
                    + np.exp(Pref - P) * _cheb.cheb_eval(Ic, a, b, t))

        _, v, c = _cheb.resolve(xval, a, b, tol)
        segs.append((a, b, v, c))
        x_left = alphas[k] * x_left + betas[k]

    return Trajectory(segs, period=boundaries[-1] - boundaries[0],
                      meta={"multiplier": multiplier}), multiplier


def periodic_linear_solution(p, q, period, tol=1e-12, boundaries=None,
                             resonance_tol=RESONANCE_TOL):
    """Unique periodic solution of  x'(t) + p(t) x(t) = q(t).

    ``p`` and ``q`` are piecewise-smooth and periodic: vectorized callables,
    numbers, or lists of per-segment callables matching ``boundaries``
    (default one smooth segment covering [0, period]).

    The solution is built segment by segment from the integrating factor;
    if the homogeneous multiplier grows over a period the equation is solved
    in reversed time, so the construction only ever uses the decaying
    direction.  Raises :class:`FloquetResonanceError` when
    ``|e^{P(T)} - 1| < resonance_tol`` with ``P(T)`` the integral of p over
    one period, in which case no isolated periodic solution exists.
    """
    period = float(period)
    if period <= 0:
        raise ValueError("period must be positive")
    if boundaries is None:
        boundaries = np.array([0.0, period])
    else:
        boundaries = np.asarray(boundaries, dtype=float)
        if abs(boundaries[0]) > 1e-12 * period or \
                abs(boundaries[-1] - period) > 1e-12 * period:
            raise ValueError("boundaries must span [0, period]")
    ps = _as_segment_callables(p, boundaries)
    qs = _as_segment_callables(q, boundaries)

    # Direction test: integral of p over the period.
    Ptot = 0.0 + 0.0j
    for k in range(len(boundaries) - 1):
        a, b = boundaries[k], boundaries[k + 1]
        _, _, pc = _cheb.resolve(ps[k], a, b, tol)
        Ptot += _cheb.definite_integral(pc, a, b)

    if Ptot.real >= 0.0:
        traj, _ = _periodic_solution_oneway(ps, qs, boundaries, tol,
                                            resonance_tol)
        return traj

    # Growing multiplier: solve the reflected problem y(s) = x(T - s), which
    # satisfies y' + p~ y = q~ with p~(s) = -p(T-s), q~(s) = -q(T-s).
    rb = (boundaries[-1] - boundaries[::-1])
    ps_r = [(lambda t, f=ps[k]: -np.asarray(f(period - np.asarray(t)), dtype=complex))
            for k in reversed(range(len(ps)))]
    qs_r = [(lambda t, f=qs[k]: -np.asarray(f(period - np.asarray(t)), dtype=complex))
            for k in reversed(range(len(qs)))]
    ytraj, mult_rev = _periodic_solution_oneway(ps_r, qs_r, rb, tol,
                                                resonance_tol)
    xtraj = ytraj.reflected(about=period)
    # e^{P(T)} in the original orientation is the reversed-frame 1/multiplier.
    xtraj.meta["multiplier"] = 1.0 / mult_rev
    return xtraj
