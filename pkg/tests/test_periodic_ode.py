import numpy as np
import pytest
from scipy.linalg import expm

from floquet_engine import (
    FloquetResonanceError,
    StiffDynamicsError,
    Trajectory,
    integrate,
    integrate_dense,
    monodromy_2x2,
    periodic_linear_solution,
)


def max_residual(traj, p, q, ts):
    """max |x' + p x - q| with x' from the returned data, not from the solver."""
    d = traj.derivative()
    return np.max(np.abs(d(ts) + p(ts) * traj(ts) - q(ts)))


# ---------------------------------------------------------------- trajectory

def test_trajectory_calculus():
    edges = [0.0, 1.3, 2.0]
    f = Trajectory.from_function(lambda t: np.sin(2 * t) + 1j * t ** 2, edges)
    ts = np.linspace(0, 2, 101)
    assert np.max(np.abs(f(ts) - (np.sin(2 * ts) + 1j * ts ** 2))) < 1e-12
    assert np.max(np.abs(f.derivative()(ts) - (2 * np.cos(2 * ts) + 2j * ts))) < 1e-10
    F = f.antiderivative()
    exact = (1 - np.cos(2 * ts)) / 2 + 1j * ts ** 3 / 3
    assert np.max(np.abs(F(ts) - exact)) < 1e-12
    assert abs(f.integral() - ((1 - np.cos(4.0)) / 2 + 8j / 3)) < 1e-12
    assert abs(F(2.0) - f.integral()) < 1e-13


def test_trajectory_periodic_wrapping():
    f = Trajectory.from_function(lambda t: np.exp(2j * np.pi * t), [0.0, 1.0],
                                 period=1.0)
    assert abs(f(3.25) - 1j) < 1e-12
    assert abs(f(-0.25) - f(0.75)) < 1e-12


def test_trajectory_domain_guard():
    f = Trajectory.from_function(lambda t: t, [0.0, 1.0])
    with pytest.raises(ValueError):
        f(1.5)


def test_trajectory_map_and_reflect():
    edges = [0.0, 0.7, 2.0]
    a = Trajectory.from_function(lambda t: np.cos(t), edges)
    b = Trajectory.from_function(lambda t: t + 0.5, edges)
    prod = Trajectory.map(lambda x, y: x * y, a, b)
    ts = np.linspace(0, 2, 57)
    assert np.max(np.abs(prod(ts) - np.cos(ts) * (ts + 0.5))) < 1e-12
    r = a.reflected()
    assert np.max(np.abs(r(ts) - np.cos(2.0 - ts))) < 1e-12


def test_trajectory_segment_boundaries_exposed():
    f = Trajectory.from_function([lambda t: 0 * t, lambda t: 0 * t + 1],
                                 [0.0, 1.0, 2.0])
    # piecewise-constant data: one-sided values at the interior edge differ
    assert abs(f.eval_segment(0, 1.0) - 0.0) < 1e-14
    assert abs(f.eval_segment(1, 1.0) - 1.0) < 1e-14


# ----------------------------------------------------------------- integrate

def test_integrate_exponential():
    out = integrate(lambda t, y: 1j * y, [1.0 + 0j], (0.0, np.pi), tol=1e-12)
    assert abs(out[0] + 1.0) < 1e-10


def test_integrate_breakpoint_restart():
    # rate jumps from 1 to 2 at t=1; with the declared breakpoint the result
    # is clean at default tolerance
    def rhs(t, y):
        return (1.0 if t < 1.0 else 2.0) * y

    out = integrate(rhs, [1.0 + 0j], (0.0, 2.0), tol=1e-12, breakpoints=[1.0])
    assert abs(out[0] - np.exp(3.0)) < 1e-9 * np.exp(3.0)


def test_integrate_failure_carries_time():
    # finite-time blow-up: x' = x^2, x(0)=1 diverges at t=1
    with pytest.raises(StiffDynamicsError) as err:
        integrate(lambda t, y: y ** 2, [1.0 + 0j], (0.0, 2.0), tol=1e-10)
    assert err.value.t_failure is not None
    assert 0.9 < err.value.t_failure <= 2.0


def test_integrate_dense_matches_endpoint():
    sol = integrate_dense(lambda t, y: -0.3 * y + np.cos(t),
                          [0.2 + 0j], (0.0, 5.0), tol=1e-12)
    ts = np.linspace(0, 5, 40)
    # against an independent closed form
    c = 0.2 - 0.3 / (0.3 ** 2 + 1)
    exact = c * np.exp(-0.3 * ts) + (0.3 * np.cos(ts) + np.sin(ts)) / (0.3 ** 2 + 1)
    assert np.max(np.abs(sol(ts)[0] - exact)) < 1e-10


# ---------------------------------------------------- periodic linear solver

def test_periodic_solution_damped_oracle():
    # x' + (g + i w) x = c + d e^{i nu t};  closed form
    g, w, nu = 0.7, 1.3, 2 * np.pi / 3.0
    c, d = 0.4, 0.25 - 0.1j
    T = 3.0
    pfun = lambda t: (g + 1j * w) * np.ones_like(np.asarray(t, dtype=float))
    qfun = lambda t: c + d * np.exp(1j * nu * t)
    x = periodic_linear_solution(pfun, qfun, T, tol=1e-13)
    ts = np.linspace(0, T, 211)
    exact = c / (g + 1j * w) + d * np.exp(1j * nu * ts) / (g + 1j * (w + nu))
    assert np.max(np.abs(x(ts) - exact)) < 1e-11
    assert abs(x(0.0) - x(T)) < 1e-12
    assert max_residual(x, pfun, qfun, ts) < 1e-9


def test_periodic_solution_growing_multiplier():
    # anti-damped homogeneous part: same closed form with g < 0 must come out
    # of the reversed-time path
    g, nu = -0.6, 2 * np.pi / 2.0
    d = 1.0 + 0.5j
    T = 2.0
    pfun = lambda t: g * np.ones_like(np.asarray(t, dtype=float))
    qfun = lambda t: d * np.exp(1j * nu * t)
    x = periodic_linear_solution(pfun, qfun, T, tol=1e-13)
    ts = np.linspace(0, T, 101)
    exact = d * np.exp(1j * nu * ts) / (g + 1j * nu)
    assert np.max(np.abs(x(ts) - exact)) < 1e-11
    assert abs(x.meta["multiplier"] - np.exp(g * T)) < 1e-11


def test_periodic_solution_piecewise_coefficients():
    # p,q piecewise constant; transfer relations solved by hand in-line
    T = 2.0
    edges = [0.0, 1.0, 2.0]
    x = periodic_linear_solution(
        [lambda t: np.ones_like(t), lambda t: 2.0 * np.ones_like(t)],
        [lambda t: np.ones_like(t), lambda t: np.zeros_like(t)],
        T, boundaries=edges, tol=1e-13)
    e1, e2 = np.exp(-1.0), np.exp(-2.0)
    x0 = (e2 - e1 * e2) / (1 - e1 * e2)
    assert abs(x(0.0) - x0) < 1e-12
    assert abs(x(1.0) - (1 + (x0 - 1) * e1)) < 1e-12
    assert abs(x(2.0) - x0) < 1e-12


def test_periodic_solution_oscillatory_stiffish():
    # strongly damped + fast oscillation resolved to quadrature accuracy
    g, om = 4.0, 25.0
    T = 1.0
    pfun = lambda t: g + 0j * t
    qfun = lambda t: np.cos(om * t)
    x = periodic_linear_solution(pfun, qfun, T, tol=1e-13)
    ts = np.linspace(0, T, 301)
    # x(t) = e^{-g t} x0 + int_0^t e^{-g(t-s)} cos(om s) ds, x0 from x(T)=x(0)
    part = (g * np.cos(om * ts) + om * np.sin(om * ts) -
            g * np.exp(-g * ts)) / (g * g + om * om)
    xT = part[-1]
    x0 = xT / (1 - np.exp(-g * T))
    exact = np.exp(-g * ts) * x0 + part
    assert np.max(np.abs(x(ts) - exact)) < 1e-11


def test_periodic_solution_resonance_raises():
    # purely rotating multiplier returning to 1 exactly: no isolated solution
    T = 2.0
    nu = 2 * np.pi / T
    with pytest.raises(FloquetResonanceError):
        periodic_linear_solution(lambda t: 1j * nu * np.ones_like(t),
                                 lambda t: np.ones_like(t), T)


def test_periodic_solution_near_unimodular_ok():
    # multiplier on the unit circle but far from 1 is fine
    T = 2.0
    nu = 2 * np.pi / T
    pfun = lambda t: 0.5j * nu * np.ones_like(t)
    qfun = lambda t: np.exp(1j * nu * t)
    x = periodic_linear_solution(pfun, qfun, T, tol=1e-13)
    ts = np.linspace(0, T, 101)
    assert max_residual(x, pfun, qfun, ts) < 1e-9
    assert abs(x(0.0) - x(T)) < 1e-11


def test_periodic_solution_zero_q_is_zero():
    x = periodic_linear_solution(lambda t: 1.0 + np.sin(t) * 0, 0.0, 2 * np.pi)
    assert x.max_abs() < 1e-14


# ------------------------------------------------------------- monodromy 2x2

def test_monodromy_constant_generator_expm_oracle():
    A = np.array([[0.3 - 1j, 0.2], [-0.1j, -0.3 + 1j]])
    T = 1.7
    mono = monodromy_2x2(lambda t: A, T, tol=1e-12)
    assert np.max(np.abs(mono.end - expm(A * T))) < 1e-9
    # dense evaluation in the interior
    for t in (0.0, 0.4, 1.2):
        assert np.max(np.abs(mono(t) - expm(A * t))) < 1e-9


def test_monodromy_det_one_traceless():
    def A(t):
        return np.array([[1j * np.cos(t), 0.4 + 0.1 * np.sin(t)],
                         [0.3, -1j * np.cos(t)]])

    mono = monodromy_2x2(A, 2 * np.pi, tol=1e-12)
    assert mono.det_defect < 1e-10


def test_monodromy_dense_vectorized_shape():
    mono = monodromy_2x2(lambda t: np.array([[0.0, 1.0], [-1.0, 0.0]],
                                            dtype=complex), np.pi, tol=1e-12)
    ts = np.linspace(0, np.pi, 7)
    out = mono(ts)
    assert out.shape == (2, 2, 7)
    # rotation matrix at t = pi/2
    assert np.max(np.abs(mono(np.pi / 2) -
                         np.array([[0, 1], [-1, 0]], dtype=complex))) < 1e-10
