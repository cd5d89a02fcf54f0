"""Chebyshev-Lobatto toolkit for piecewise-smooth functions of time.

Functions here operate on a single smooth segment [a, b].  A segment is
represented by its values on the Chebyshev-Lobatto grid (ascending in t)
together with the coefficients of the interpolating Chebyshev series.
Differentiation, antidifferentiation and quadrature act on coefficients,
so they are spectrally accurate for analytic data.
"""

import numpy as np
from numpy.polynomial import chebyshev as _C
from scipy.fft import dct

from .errors import FloquetEngineError

# Finest grid the adaptive sampler will try before giving up.
MAX_NODES = 1 << 14


def lobatto_nodes(n, a, b):
    """Chebyshev-Lobatto grid with n+1 points on [a, b], ascending."""
    k = np.arange(n + 1)
    x = np.cos(np.pi * k / n)  # descending on [-1, 1]
    return a + (b - a) * (1.0 - x) / 2.0


def values_to_coeffs(values):
    """Chebyshev coefficients of the interpolant through Lobatto-grid values.

    ``values`` are samples at :func:`lobatto_nodes` (ascending in t).  Works
    for real or complex data.
    """
    v = np.asarray(values)
    n = v.shape[-1] - 1
    if n == 0:
        return v.copy()
    # DCT-I expects samples at x_k = cos(pi k / n), i.e. descending x.
    vd = v[..., ::-1]
    if np.iscomplexobj(vd):
        c = dct(vd.real, type=1, axis=-1) + 1j * dct(vd.imag, type=1, axis=-1)
    else:
        c = dct(vd, type=1, axis=-1)
    c = c / n
    c[..., 0] /= 2.0
    c[..., -1] /= 2.0
    return c


def coeffs_to_values(coeffs):
    """Evaluate a Chebyshev series on its own Lobatto grid (ascending in t)."""
    c = np.asarray(coeffs)
    n = len(c) - 1
    if n == 0:
        return c.copy()
    x = np.cos(np.pi * np.arange(n + 1) / n)
    return _C.chebval(x, c)[::-1]


def cheb_eval(coeffs, a, b, t):
    """Evaluate the Chebyshev series for segment [a, b] at times t."""
    x = 2.0 * (np.asarray(t) - a) / (b - a) - 1.0
    return _C.chebval(x, coeffs)


def derivative_coeffs(coeffs, a, b):
    """Coefficients of d/dt of the series on [a, b]."""
    if len(coeffs) == 1:
        return np.zeros(1, dtype=coeffs.dtype)
    return _C.chebder(coeffs) * (2.0 / (b - a))


def antiderivative_coeffs(coeffs, a, b):
    """Coefficients of the antiderivative F on [a, b] with F(a) = 0."""
    ci = _C.chebint(coeffs) * ((b - a) / 2.0)
    ci[0] -= _C.chebval(-1.0, ci)
    return ci


def definite_integral(coeffs, a, b):
    """Integral of the series over its whole segment [a, b]."""
    j = np.arange(0, len(coeffs), 2, dtype=float)
    w = 2.0 / (1.0 - j * j)  # odd-degree terms integrate to zero
    return (b - a) / 2.0 * np.dot(coeffs[::2], w)


def resolve(f, a, b, tol, n0=16, nmax=MAX_NODES):
    """Sample a smooth function on [a, b] until its Chebyshev tail is small.

    Doubles the grid until the last ~n/8 coefficients fall below
    ``tol * scale``.  Returns ``(nodes, values, coeffs)``.  Raises if the
    function fails to resolve at ``nmax`` points or returns non-finite data.
    """
    n = max(8, int(n0))
    while True:
        t = lobatto_nodes(n, a, b)
        v = np.asarray(f(t), dtype=complex)
        if v.shape != t.shape:
            raise ValueError("function must return one value per node")
        if not np.all(np.isfinite(v)):
            raise FloquetEngineError(
                f"non-finite values while sampling segment [{a:g}, {b:g}]")
        c = values_to_coeffs(v)
        scale = max(np.max(np.abs(c)), 1e-300)
        ntail = max(4, n // 8)
        if np.max(np.abs(c[-ntail:])) <= tol * max(scale, 1.0):
            return t, v, c
        if n >= nmax:
            raise FloquetEngineError(
                f"segment [{a:g}, {b:g}] not resolved at {n} nodes "
                f"(tail {np.max(np.abs(c[-ntail:])) / scale:.2e} of scale)")
        n *= 2
