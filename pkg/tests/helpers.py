"""Protocol builders and closed-form references shared across test modules."""

import numpy as np

from floquet_engine.protocols import (
    CycleProtocol,
    MechanicalProtocol,
    Piece,
    PiecewiseControl,
    constant_control,
)


def constant_protocol(omega, lam, gamma, N, M, period=2.0):
    b = np.array([0.0, period])
    return CycleProtocol(
        period=period, boundaries=b, labels=["const"],
        omega=constant_control(b, omega), lam=constant_control(b, lam),
        gamma=constant_control(b, gamma), bath_N=constant_control(b, N),
        bath_M=constant_control(b, M))


def mathieu_protocol(Omega0, eps, eta=1.0, nu=2.0, gamma=0.0,
                     temperature=None):
    """Oscillator with a sinusoidally modulated squared frequency."""
    period = 2.0 * np.pi / nu
    b = np.array([0.0, period])

    def val(t):
        return Omega0 * np.sqrt(1.0 + eps * np.cos(nu * np.asarray(t)))

    def der(t):
        t = np.asarray(t)
        return (-Omega0 * eps * nu * np.sin(nu * t)
                / (2.0 * np.sqrt(1.0 + eps * np.cos(nu * t))))

    Om = PiecewiseControl(b, [Piece(value=val, deriv=der, kind="custom")])
    return MechanicalProtocol(
        period=period, boundaries=b, labels=["drive"], Omega=Om, eta=eta,
        gamma=constant_control(b, gamma), temperatures=[temperature])


def moment_ode_steady_state(omega, lam, gamma, N, M):
    """Stationary point of the closed second-moment ODE (linear algebra)."""
    lam = complex(lam)
    A = np.array([
        [-gamma, 1j * lam, -1j * np.conj(lam)],
        [-2j * np.conj(lam), -(2j * omega + gamma), 0.0],
        [2j * lam, 0.0, 2j * omega - gamma]])
    b = np.array([gamma * N,
                  gamma * M - 1j * np.conj(lam),
                  gamma * np.conj(M) + 1j * lam])
    return np.linalg.solve(A, -b)
