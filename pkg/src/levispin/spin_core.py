"""Spin-1 operators, rotation operators, and time-ordered state propagation.

Operators are plain complex 3x3 ``numpy`` arrays in the basis
(m_s = +1, 0, -1); states are complex 3-vectors in the same ordering.
Hamiltonians handed to :func:`propagate` must be Hermitian and expressed in
angular-frequency units (rad/s, hbar = 1), so the Schrodinger equation reads
``dpsi/dt = -i H(t) psi``.
"""

import numpy as np

from .errors import NonHermitian, StepTooLarge

BASIS_MS = np.array([1.0, 0.0, -1.0])  # fixed ordering (+1, 0, -1)

_SQRT2 = np.sqrt(2.0)

S_Z = np.diag([1.0, 0.0, -1.0]).astype(complex)
S_X = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / _SQRT2
S_Y = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / _SQRT2
S_PLUS = S_X + 1j * S_Y
S_MINUS = S_X - 1j * S_Y


def spin1_operators():
    """Return the standard spin-1 operator set as a dict of fresh copies.

    Keys: ``S_x``, ``S_y``, ``S_z``, ``S_plus``, ``S_minus``.
    """
    return {
        "S_x": S_X.copy(),
        "S_y": S_Y.copy(),
        "S_z": S_Z.copy(),
        "S_plus": S_PLUS.copy(),
        "S_minus": S_MINUS.copy(),
    }


def is_hermitian(m, tol=1e-12):
    """Elementwise Hermiticity check, tolerance relative to the matrix scale."""
    m = np.asarray(m)
    scale = max(1.0, float(np.abs(m).max()))
    return bool(np.abs(m - m.conj().T).max() <= tol * scale)


def is_unitary(u, tol=1e-10):
    u = np.asarray(u)
    return bool(np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() <= tol)


def expm_hermitian(h, t=1.0):
    """exp(-i h t) for Hermitian h, via eigendecomposition (exact for 3x3)."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def rotation_operator(axis, angle):
    """Spin-1 rotation operator exp(-i angle n.S) about ``axis`` in {'y','z'}.

    The z rotation is diagonal, diag(e^{-i angle}, 1, e^{i angle}); the y
    rotation is evaluated by Hermitian eigendecomposition of S_y.
    """
    if not np.isfinite(angle):
        raise ValueError("rotation angle must be finite")
    if axis == "z":
        return np.diag(np.exp(-1j * BASIS_MS * angle))
    if axis == "y":
        return expm_hermitian(S_Y, angle)
    raise ValueError(f"axis must be 'y' or 'z', got {axis!r}")


def _spectral_norm(h):
    return float(np.abs(np.linalg.eigvalsh(h)).max())


def propagate(hamiltonian_of_t, psi0, t_grid, hermiticity_tol=1e-9):
    """Integrate dpsi/dt = -i H(t) psi with classic fourth-order Runge-Kutta.

    One RK4 step is taken per interval of ``t_grid``; the caller chooses the
    step so that ||H|| * dt stays below 0.5 rad (validated per step).  No
    per-step renormalization is applied: residual norm drift is the caller's
    error metric.

    Args:
        hamiltonian_of_t: callable t -> Hermitian 3x3 array in rad/s.
        psi0: initial 3-component state at ``t_grid[0]``.
        t_grid: strictly increasing sample times in seconds.

    Returns:
        Array of shape (len(t_grid), 3) with the state at each grid time.

    Raises:
        StepTooLarge: a step violates the ||H|| * dt < 0.5 rad bound.
        NonHermitian: H(t) fails the Hermiticity check at a stage point.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 1:
        raise ValueError("t_grid must be a 1-d array of at least one time")
    if len(t_grid) > 1 and not np.all(np.diff(t_grid) > 0):
        raise ValueError("t_grid must be strictly increasing")

    def h_checked(t):
        h = np.asarray(hamiltonian_of_t(t), dtype=complex)
        if not is_hermitian(h, hermiticity_tol):
            raise NonHermitian(f"H(t={t:g}) is not Hermitian")
        return h

    psi = np.asarray(psi0, dtype=complex).copy()
    out = np.empty((len(t_grid), 3), dtype=complex)
    out[0] = psi
    for k in range(len(t_grid) - 1):
        t = t_grid[k]
        dt = t_grid[k + 1] - t
        h0 = h_checked(t)
        if _spectral_norm(h0) * dt >= 0.5:
            raise StepTooLarge(
                f"||H||*dt = {_spectral_norm(h0) * dt:.3g} rad >= 0.5 at t={t:g}"
            )
        h_mid = h_checked(t + 0.5 * dt)
        h_end = h_checked(t + dt)
        k1 = -1j * (h0 @ psi)
        k2 = -1j * (h_mid @ (psi + 0.5 * dt * k1))
        k3 = -1j * (h_mid @ (psi + 0.5 * dt * k2))
        k4 = -1j * (h_end @ (psi + dt * k3))
        psi = psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = psi
    return out


def uniform_grid(t_final, n_steps, t_start=0.0):
    """Convenience: n_steps equal RK4 intervals covering [t_start, t_final]."""
    return np.linspace(t_start, t_final, n_steps + 1)
