"""Frame-solver tests.

The constant-coefficient protocol is the workhorse oracle: every frame
quantity has a closed form there (quadratic roots, fixed points of the
scalar equations), and the limit cycle must match the stationary point of
the second-moment ODE computed by plain linear algebra.  Time-dependent
protocols are checked through residual audits, phase identities, the
classical-oscillator correspondence and closed-form reductions.
"""

import numpy as np
import pytest
from scipy.integrate import solve_ivp

import floquet_engine as fe
from floquet_engine import floquet as fl
from floquet_engine.protocols import (
    CycleProtocol,
    MechanicalProtocol,
    Piece,
    PiecewiseControl,
    constant_control,
)

from helpers import constant_protocol, mathieu_protocol, moment_ode_steady_state

CONST = dict(omega=1.0, lam=0.3, gamma=0.2, N=1.5, M=0.2 + 0.1j)


def constant_frame_oracle(omega, lam, gamma, N, M):
    """All frame quantities of the constant protocol, by hand.

    Built from the stationary points of the scalar equations; completely
    independent of the trajectory machinery.
    """
    lam = complex(lam)
    roots = np.roots([-2.0 * lam, 2j * omega, np.conj(lam) / 2.0])
    cands = sorted(
        [(r, omega + 2j * lam * r) for r in roots],
        key=lambda c: (round(c[1].real / max(1, abs(c[1])), 9),
                       round(c[1].imag / max(1, abs(c[1])), 9)),
        reverse=True)
    r2, Lb = cands[0]
    r1 = (-lam / 2.0) / (-2j * Lb)
    J = 1.0 + 8.0 * r1 * r2
    z = (1.0 + J) / 2.0
    r1p = r2 * z
    Nh = J * (N + 0.5) + 2j * M * r1 - 2j * np.conj(M) * r1p
    G2 = Nh
    g3 = gamma * (M - 4j * r2 * (N + 0.5) - 4.0 * np.conj(M) * r2 ** 2) \
        / (gamma + 2j * Lb)
    g4 = gamma * (np.conj(M) * z ** 2 + 4j * r1 * z * (N + 0.5)
                  - 4.0 * M * r1 ** 2) / (gamma - 2j * Lb)
    return dict(r2=r2, Lb=Lb, r1=r1, J=J, z=z, r1p=r1p, Nh=Nh, G2=G2,
                g3=g3, g4=g4)


@pytest.fixture(scope="module")
def const_frames():
    return fe.solve_frames(constant_protocol(**CONST))


@pytest.fixture(scope="module")
def carnot_frames():
    proto = fe.as_bosonic(fe.build_carnot_protocol(300.0))
    return proto, fe.solve_frames(proto)


# ---------------------------------------------------------------------------
# constant protocol: closed-form oracle

def test_constant_unitary_frame_matches_oracle(const_frames):
    ref = constant_frame_oracle(**CONST)
    uf = const_frames.unitary
    assert abs(uf.Lambda_bar - ref["Lb"]) < 1e-11
    ts = np.linspace(0.0, 2.0, 7)
    for name, traj in [("r2", uf.r2), ("r1", uf.r1), ("J", uf.J),
                       ("z", uf.z), ("r1p", uf.r1p)]:
        assert np.max(np.abs(traj(ts) - ref[name])) < 1e-11, name
    assert np.max(np.abs(uf.r0(ts))) < 1e-11
    # the gap value itself, for a real drive amplitude
    assert abs(uf.Lambda_bar - np.sqrt(1.0 - 0.3 ** 2)) < 1e-11
    assert uf.sigma == 1


def test_constant_dissipative_frame_matches_oracle(const_frames):
    ref = constant_frame_oracle(**CONST)
    df = const_frames.dissipative
    ts = np.linspace(0.0, 2.0, 7)
    assert np.max(np.abs(df.G2(ts) - ref["G2"])) < 1e-11
    assert np.max(np.abs(df.g3t(ts) - ref["g3"])) < 1e-11
    assert np.max(np.abs(df.g4t(ts) - ref["g4"])) < 1e-11
    assert np.max(np.abs(df.tilde.N_half(ts) - ref["Nh"])) < 1e-11


def test_constant_limit_cycle_equals_ode_steady_state(const_frames):
    v = moment_ode_steady_state(**CONST)
    ts = np.linspace(0.0, 2.0, 9)
    n, m, mbar = fe.limit_cycle_moments(const_frames, ts)
    assert np.max(np.abs(n - v[0])) < 1e-12
    assert np.max(np.abs(m - v[1])) < 1e-12
    assert np.max(np.abs(mbar - v[2])) < 1e-12
    assert np.max(np.abs(mbar - np.conj(m))) < 1e-12


def test_constant_quotient_route_agrees(const_frames):
    ts = np.linspace(0.0, 2.0, 9)
    n, m, mbar = fe.limit_cycle_moments(const_frames, ts)
    fp = fe.floquet_parameters(const_frames, ts)
    nq, mq, mbq = fe.steady_state_covariances(fp)
    assert np.max(np.abs(nq - n)) < 1e-12
    assert np.max(np.abs(mq - m)) < 1e-12
    assert np.max(np.abs(mbq - mbar)) < 1e-12


def test_constant_stability_report(const_frames):
    st = fe.stability(const_frames)
    assert st.stable is True
    assert st.sigma == 1
    assert st.margin == pytest.approx(0.2)
    assert st.ratio == np.inf


def test_constant_branch_forcing():
    proto = constant_protocol(**CONST)
    auto = fe.solve_r2(proto)
    other = fe.solve_r2(proto, branch=1)
    Om = np.sqrt(1.0 - 0.3 ** 2)
    assert abs(auto.Lambda_bar - Om) < 1e-11
    assert abs(other.Lambda_bar + Om) < 1e-11
    assert len(auto.branch_Lambdas) == 2
    assert auto.branch_Lambdas[0].real > auto.branch_Lambdas[1].real


def test_lambda_bar_crosscheck_small(const_frames, carnot_frames):
    assert fe.lambda_bar_crosscheck(const_frames.unitary) < 1e-11
    _, frames = carnot_frames
    assert fe.lambda_bar_crosscheck(frames.unitary) < 1e-9


# ---------------------------------------------------------------------------
# residual audits

def test_unitary_residuals_carnot(carnot_frames):
    proto, frames = carnot_frames
    B0, B1, B2 = fl.unitary_residuals(proto, frames.unitary)
    lb = frames.unitary.Lambda_bar
    assert B2.max_abs() < 1e-9
    assert B1.max_abs() < 1e-9
    assert fe.Trajectory.map(lambda x: x - lb, B0).max_abs() < 1e-9


def test_dissipative_residuals_carnot(carnot_frames):
    proto, frames = carnot_frames
    C1, C2, C3, C4 = fl.dissipative_residuals(proto, frames.unitary,
                                              frames.dissipative)
    gb = frames.dissipative.gamma_bar
    assert fe.Trajectory.map(lambda x: x - gb, C1).max_abs() < 1e-9
    assert C2.max_abs() < 1e-9
    assert C3.max_abs() < 1e-9
    assert C4.max_abs() < 1e-9


def test_oscillatory_phase_identities_carnot(carnot_frames):
    proto, frames = carnot_frames
    uf, df = frames.unitary, frames.dissipative
    ts = np.linspace(0.0, proto.period, 241)
    r1, z = uf.r1(ts), uf.z(ts)
    assert np.max(np.abs(uf.r1p(ts) - np.conj(r1))) < 1e-10
    assert np.max(np.abs(uf.J(ts).imag)) < 1e-10
    assert np.max(np.abs(df.G2(ts).imag)) < 1e-10
    assert np.max(np.abs(df.tilde.N_half(ts).imag)) < 1e-10
    G3 = z * df.g3t(ts)
    G4 = df.g4t(ts) / z
    assert np.max(np.abs(G3 - np.conj(G4))) < 1e-9
    assert np.max(np.abs(4.0 * np.abs(r1) ** 2 - (z * (z - 1.0)).real)) < 1e-10


def test_carnot_quotient_route_agrees(carnot_frames):
    proto, frames = carnot_frames
    ts = np.linspace(0.0, proto.period, 17)
    n, m, mbar = fe.limit_cycle_moments(frames, ts)
    nq, mq, mbq = fe.steady_state_covariances(fe.floquet_parameters(frames, ts))
    scale = np.max(np.abs(n))
    assert np.max(np.abs(nq - n)) < 1e-10 * scale
    assert np.max(np.abs(mq - m)) < 1e-10 * scale
    assert np.max(np.abs(mbar - np.conj(m))) < 1e-10 * scale


# ---------------------------------------------------------------------------
# hyperbolic phase and the classical-oscillator correspondence

def classical_monodromy_trace(mech):
    eta = mech.eta

    def rhs(t, y):
        x, p = y
        return [eta * p, -(float(mech.Omega(t)) ** 2 / eta) * x]

    M = np.zeros((2, 2))
    for i, v0 in enumerate(([1.0, 0.0], [0.0, 1.0])):
        s = solve_ivp(rhs, (0.0, mech.period), v0, rtol=1e-12, atol=1e-14,
                      method="DOP853")
        M[:, i] = s.y[:, -1]
    return M[0, 0] + M[1, 1]


def test_hyperbolic_phase_inside_resonance_tongue():
    mech = mathieu_protocol(1.0, 0.3)
    frames = fe.solve_frames(mech, dissipative=False)
    uf = frames.unitary
    assert uf.sigma == 1j
    assert uf.Lambda_bar.imag > 0.05
    # one-period eigenvalue pair must reproduce the classical trace
    tau = classical_monodromy_trace(mech)
    assert abs(2.0 * np.cos(uf.Lambda_bar * mech.period) - tau) < 1e-10
    ts = np.linspace(0.0, mech.period, 101)
    r1, r2, z = uf.r1(ts), uf.r2(ts), uf.z(ts)
    assert np.max(np.abs(2.0 * np.abs(r2) - 1.0)) < 1e-10
    assert np.max(np.abs(uf.J(ts).real)) < 1e-10
    assert np.max(np.abs(uf.r1p(ts) + np.conj(r1))) < 1e-10
    assert np.max(np.abs(4.0 * np.abs(r1) ** 2 + z * (z - 1.0))) < 1e-10
    rep = fe.pinney_crosscheck(mech, frames)
    assert rep.sigma == 1j
    assert rep.max_r2_modulus_defect < 1e-10


def test_oscillatory_phase_outside_resonance_tongue():
    mech = mathieu_protocol(0.6, 0.3)
    frames = fe.solve_frames(mech, dissipative=False)
    uf = frames.unitary
    assert uf.sigma == 1
    tau = classical_monodromy_trace(mech)
    assert abs(2.0 * np.cos(uf.Lambda_bar * mech.period) - tau) < 1e-10
    rep = fe.pinney_crosscheck(mech, frames)
    assert rep.max_ep_residual < 1e-8
    assert rep.max_J_mismatch < 1e-9


def test_pinney_crosscheck_constant_amplitude():
    b = np.array([0.0, 2.0])
    Om0, eta = 0.9, 0.7
    mech = MechanicalProtocol(
        period=2.0, boundaries=b, labels=["hold"],
        Omega=constant_control(b, Om0), eta=eta,
        gamma=constant_control(b, 0.0), temperatures=[None])
    frames = fe.solve_frames(mech, dissipative=False)
    rep = fe.pinney_crosscheck(mech, frames)
    assert rep.max_ep_residual < 1e-9
    assert rep.max_J_mismatch < 1e-10
    # xi^2 = eta / Omega for the static oscillator
    u, _ = fl._uv_from_r2(frames.unitary, np.linspace(0, 2, 9), eta)
    assert np.max(np.abs(u - eta / Om0)) < 1e-10
    J_expect = 0.5 * (eta / Om0 + Om0 / eta)
    assert np.max(np.abs(frames.unitary.J(np.linspace(0, 2, 9)) - J_expect)) \
        < 1e-10


def test_pinney_crosscheck_needs_mechanical_form(const_frames):
    with pytest.raises(fe.ProtocolError):
        fe.pinney_crosscheck(constant_protocol(**CONST), const_frames)


def test_stability_threshold_battery():
    mech0 = mathieu_protocol(1.0, 0.3)
    growth = fe.solve_frames(mech0, dissipative=False).Lambda_bar.imag
    threshold = 2.0 * growth
    for factor, expect in [(1.1, True), (0.9, False)]:
        mech = mathieu_protocol(1.0, 0.3, gamma=factor * threshold,
                                temperature=1.0)
        frames = fe.solve_frames(mech)
        st = fe.stability(frames)
        assert st.stable is expect, factor
        assert st.ratio == pytest.approx(factor, rel=1e-6)
        # the formal limit cycle exists on both sides of the threshold
        n, m, mbar = fe.limit_cycle_moments(frames, np.array([0.0, 1.0]))
        assert np.all(np.isfinite(n)) and np.all(np.isfinite(m))


def test_stability_undefined_without_dissipation():
    st = fe.stability(fe.solve_frames(mathieu_protocol(1.0, 0.3),
                                      dissipative=False))
    assert st.stable is None
    assert "undefined" in st.note


# ---------------------------------------------------------------------------
# reductions

def test_no_drive_reduction_matches_scalar_solutions():
    # omega varies, lambda = 0: the frame must collapse and the moments obey
    # decoupled scalar equations solvable directly
    T = 4.0
    b = np.array([0.0, T])
    nu = 2.0 * np.pi / T
    om = PiecewiseControl(b, [Piece(
        value=lambda t: 1.3 + 0.2 * np.cos(nu * np.asarray(t)),
        deriv=lambda t: -0.2 * nu * np.sin(nu * np.asarray(t)),
        kind="custom")])
    gamma, N, M = 0.4, 0.8, 0.1 - 0.2j
    proto = CycleProtocol(
        period=T, boundaries=b, labels=["mod"], omega=om,
        lam=constant_control(b, 0.0), gamma=constant_control(b, gamma),
        bath_N=constant_control(b, N), bath_M=constant_control(b, M))
    frames = fe.solve_frames(proto)
    uf = frames.unitary
    ts = np.linspace(0.0, T, 33)
    assert uf.r2.max_abs() == 0.0
    assert uf.r1.max_abs() == 0.0
    assert np.max(np.abs(uf.J(ts) - 1.0)) < 1e-12
    assert abs(uf.Lambda_bar - 1.3) < 1e-12

    n, m, _ = fe.limit_cycle_moments(frames, ts)
    n_ref = fe.periodic_linear_solution(gamma, gamma * N, T)
    m_ref = fe.periodic_linear_solution(
        lambda t: gamma + 2j * om(t), gamma * M, T)
    assert np.max(np.abs(n - n_ref(ts))) < 1e-11
    assert np.max(np.abs(m - m_ref(ts))) < 1e-11


def test_pure_dissipation_reduction():
    T = 3.0
    nu = 2.0 * np.pi / T
    g0, N0, N1, M = 0.7, 1.2, 0.4, 0.15 + 0.05j
    b = np.array([0.0, T])
    bath_N = PiecewiseControl(b, [Piece(
        value=lambda t: N0 + N1 * np.cos(nu * np.asarray(t)),
        deriv=lambda t: -N1 * nu * np.sin(nu * np.asarray(t)),
        kind="custom")])
    proto = CycleProtocol(
        period=T, boundaries=b, labels=["bath"],
        omega=constant_control(b, 0.0), lam=constant_control(b, 0.0),
        gamma=constant_control(b, g0), bath_N=bath_N,
        bath_M=constant_control(b, M))
    n_traj, m_traj = fe.dissipative_only_limit_cycle(proto)
    ts = np.linspace(0.0, T, 33)
    n_ref = N0 + N1 * g0 * (g0 * np.cos(nu * ts) + nu * np.sin(nu * ts)) \
        / (g0 ** 2 + nu ** 2)
    assert np.max(np.abs(n_traj(ts) - n_ref)) < 1e-12
    assert np.max(np.abs(m_traj(ts) - M)) < 1e-12
    # the full pipeline degenerates to the same answer
    frames = fe.solve_frames(proto)
    assert frames.Lambda_bar == pytest.approx(0.0, abs=1e-13)
    n, m, _ = fe.limit_cycle_moments(frames, ts)
    assert np.max(np.abs(n - n_ref)) < 1e-12
    assert np.max(np.abs(m - M)) < 1e-12


def test_pure_dissipation_rejects_driven_protocol(const_frames):
    with pytest.raises(fe.ProtocolError):
        fe.dissipative_only_limit_cycle(constant_protocol(**CONST))


# ---------------------------------------------------------------------------
# spectrum, degeneracies, guards

def test_rotating_frame_spectrum_instances():
    spec = fe.rotating_frame_spectrum(1.0, 1.0, 2)
    eigs = sorted((e for _, _, e in spec), key=lambda e: (e.real, e.imag))
    expect = sorted([0.0, -0.5 + 1j, -0.5 - 1j, -1.0, -1.0 + 2j, -1.0 - 2j],
                    key=lambda e: (e.real, e.imag))
    assert np.allclose(eigs, expect)
    # sector sizes: n + 1 eigenvalues in sector n, decay rate set by n alone
    lb, gb = 0.7 + 0.1j, 0.5
    spec10 = fe.rotating_frame_spectrum(lb, gb, 10)
    assert len(spec10) == sum(n + 1 for n in range(11))
    for n, k, e in spec10:
        assert e == pytest.approx(-gb * n / 2.0 + 2j * lb * k)
    n7 = [k for n, k, _ in spec10 if n == 7]
    assert n7 == pytest.approx(np.arange(-3.5, 4.0, 1.0))


def test_parametric_resonance_raises():
    Om = np.sqrt(0.91)
    T = float(np.pi / Om)
    proto = constant_protocol(1.0, 0.3, 0.1, 0.5, 0.0, period=T)
    with pytest.raises(fe.ParametricResonanceError):
        fe.solve_r2(proto)


def test_degenerate_steady_state_raises():
    fp = fe.FloquetParams(
        t=np.array([0.0]), gamma_bar=2.0,
        omega_F=np.array([0.0 + 0j]), lambda_F=np.array([1.0 + 0j]),
        lambda_Fp=np.array([1.0 + 0j]), N_F_half=np.array([1.0 + 0j]),
        M_F=np.array([0.0 + 0j]), M_Fp=np.array([0.0 + 0j]))
    with pytest.raises(fe.DegenerateSteadyStateError):
        fe.steady_state_covariances(fp)


def test_frame_log_branch_cut_guard(const_frames):
    proto = constant_protocol(**CONST)
    bad_G2 = fe.Trajectory.from_function(-1.0, proto.boundaries, period=2.0)
    zero = fe.Trajectory.from_function(0.0, proto.boundaries, period=2.0)
    df = fl.DissipativeFrame(gamma_bar=0.2, G2=bad_G2, g3t=zero, g4t=zero,
                             tilde=const_frames.dissipative.tilde)
    with pytest.raises(fe.FrameLogarithmError):
        fl.frame_logs(proto, const_frames.unitary, df)


def test_frame_logs_roundtrip(const_frames):
    proto = constant_protocol(**CONST)
    uf, df = const_frames.unitary, const_frames.dissipative
    g1, g2, g3, g4 = fl.frame_logs(proto, uf, df)
    ts = np.linspace(0.0, 2.0, 9)
    assert np.max(np.abs(np.exp(-g2(ts)) - 0.5 - df.G2(ts))) < 1e-12
    # constant coupling: g1 and g2 coincide
    assert np.max(np.abs(g1(ts) - g2(ts))) < 1e-12


def test_floquet_parameters_constant_values(const_frames):
    ref = constant_frame_oracle(**CONST)
    fp = fe.floquet_parameters(const_frames, np.array([0.3, 1.7]))
    assert np.allclose(fp.omega_F, ref["Lb"] * ref["J"], atol=1e-11)
    assert np.allclose(fp.lambda_F, 4j * ref["Lb"] * ref["r1"], atol=1e-11)
    assert np.allclose(fp.lambda_Fp, -4j * ref["Lb"] * ref["r1p"], atol=1e-11)


def test_operations_requiring_dissipative_frame():
    frames = fe.solve_frames(mathieu_protocol(1.0, 0.3), dissipative=False)
    with pytest.raises(fe.ProtocolError):
        fe.limit_cycle_moments(frames, np.array([0.0]))
    with pytest.raises(fe.ProtocolError):
        fe.floquet_parameters(frames, np.array([0.0]))
