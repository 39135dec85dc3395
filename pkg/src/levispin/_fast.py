"""Batched RK4 kernels for driven NV spin propagation.

The propagation oracles (resonance sweeps, Rabi traces) integrate many
independent spin-1 systems whose Hamiltonians share one structure:

    H_n(t) = A_n * exp(-i dM (phi0_n + omphi_n t))  (elementwise)
             + Hs_n
             + amp_n cos(omega_n t) W_n

where dM[i, j] = m_i - m_j for the basis (+1, 0, -1).  The first term is the
rotating body-frame part (a z rotation acts as an elementwise phase mask),
``Hs`` collects static terms (Zeeman, constant energy shifts), and the last
term is the microwave drive.  The kernels perform classic RK4 on the state
vector, matching :func:`levispin.spin_core.propagate` step for step.

A numba implementation is used when available; a vectorized numpy fallback
produces identical results (same arithmetic order per system).
"""

import warnings

import numpy as np

try:
    from numba import njit, prange

    # harmless threading-layer fallback notice on some hosts
    warnings.filterwarnings("ignore", message=".*TBB.*")
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

# dM[i, j] = m_i - m_j for basis ordering (+1, 0, -1)
_MJ = np.array([1.0, 0.0, -1.0])
DM = _MJ[:, None] - _MJ[None, :]


def _rk4_batch_numpy(a, hs, w, phi0, omphi, amp, omega, psi0, dt, n_steps, stride):
    n = a.shape[0]
    n_samples = n_steps // stride + 1
    out = np.empty((n, n_samples, 3), dtype=np.complex128)
    psi = psi0.copy()                 # (n, 3)
    out[:, 0, :] = psi
    dm = DM[None, :, :]

    def deriv(psi, t):
        phase = np.exp(-1j * dm * (phi0 + omphi * t)[:, None, None])
        h = a * phase + hs
        drive = amp * np.cos(omega * t)
        h = h + drive[:, None, None] * w
        return -1j * np.einsum("nij,nj->ni", h, psi)

    t = 0.0
    isample = 1
    for k in range(n_steps):
        k1 = deriv(psi, t)
        k2 = deriv(psi + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = deriv(psi + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = deriv(psi + dt * k3, t + dt)
        psi = psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        t = (k + 1) * dt
        if (k + 1) % stride == 0:
            out[:, isample, :] = psi
            isample += 1
    return out


if _HAVE_NUMBA:

    @njit(cache=True)
    def _h_apply(a, hs, w, phi, drive, psi, res):
        # res = -i H psi with the structured Hamiltonian
        e1 = np.exp(-1j * phi)
        e2 = e1 * e1
        c1 = np.conj(e1)
        c2 = np.conj(e2)
        # phase mask rows: dM = [[0,1,2],[-1,0,1],[-2,-1,0]]
        h00 = a[0, 0] + hs[0, 0] + drive * w[0, 0]
        h01 = a[0, 1] * e1 + hs[0, 1] + drive * w[0, 1]
        h02 = a[0, 2] * e2 + hs[0, 2] + drive * w[0, 2]
        h10 = a[1, 0] * c1 + hs[1, 0] + drive * w[1, 0]
        h11 = a[1, 1] + hs[1, 1] + drive * w[1, 1]
        h12 = a[1, 2] * e1 + hs[1, 2] + drive * w[1, 2]
        h20 = a[2, 0] * c2 + hs[2, 0] + drive * w[2, 0]
        h21 = a[2, 1] * c1 + hs[2, 1] + drive * w[2, 1]
        h22 = a[2, 2] + hs[2, 2] + drive * w[2, 2]
        res[0] = -1j * (h00 * psi[0] + h01 * psi[1] + h02 * psi[2])
        res[1] = -1j * (h10 * psi[0] + h11 * psi[1] + h12 * psi[2])
        res[2] = -1j * (h20 * psi[0] + h21 * psi[1] + h22 * psi[2])

    @njit(parallel=True, cache=True)
    def _rk4_batch_numba(a, hs, w, phi0, omphi, amp, omega, psi0, dt, n_steps, stride):
        n = a.shape[0]
        n_samples = n_steps // stride + 1
        out = np.empty((n, n_samples, 3), dtype=np.complex128)
        for isys in prange(n):
            psi = psi0[isys].copy()
            out[isys, 0, :] = psi
            k1 = np.empty(3, dtype=np.complex128)
            k2 = np.empty(3, dtype=np.complex128)
            k3 = np.empty(3, dtype=np.complex128)
            k4 = np.empty(3, dtype=np.complex128)
            tmp = np.empty(3, dtype=np.complex128)
            isample = 1
            for k in range(n_steps):
                t = k * dt
                tm = t + 0.5 * dt
                te = t + dt
                ph0 = phi0[isys] + omphi[isys] * t
                phm = phi0[isys] + omphi[isys] * tm
                phe = phi0[isys] + omphi[isys] * te
                d0 = amp[isys] * np.cos(omega[isys] * t)
                dm_ = amp[isys] * np.cos(omega[isys] * tm)
                de = amp[isys] * np.cos(omega[isys] * te)
                _h_apply(a[isys], hs[isys], w[isys], ph0, d0, psi, k1)
                for i in range(3):
                    tmp[i] = psi[i] + 0.5 * dt * k1[i]
                _h_apply(a[isys], hs[isys], w[isys], phm, dm_, tmp, k2)
                for i in range(3):
                    tmp[i] = psi[i] + 0.5 * dt * k2[i]
                _h_apply(a[isys], hs[isys], w[isys], phm, dm_, tmp, k3)
                for i in range(3):
                    tmp[i] = psi[i] + dt * k3[i]
                _h_apply(a[isys], hs[isys], w[isys], phe, de, tmp, k4)
                for i in range(3):
                    psi[i] = psi[i] + (dt / 6.0) * (
                        k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]
                    )
                if (k + 1) % stride == 0:
                    out[isys, isample, :] = psi
                    isample += 1
        return out


def rk4_nv_batch(a, hs, w, phi0, omphi, amp, omega, psi0, dt, n_steps, stride=None):
    """Propagate a batch of structured NV Hamiltonians with classic RK4.

    Args:
        a: (n, 3, 3) complex body-frame parts (phase-masked by the rotation).
        hs: (n, 3, 3) complex static parts.
        w: (n, 3, 3) complex drive operators.
        phi0, omphi: (n,) azimuth start values and rates, rad and rad/s.
        amp, omega: (n,) drive amplitudes (rad/s) and frequencies (rad/s).
        psi0: (n, 3) initial states.
        dt: step, seconds.
        n_steps: number of RK4 steps.
        stride: record every ``stride`` steps (default: final state only).

    Returns:
        (n, n_steps // stride + 1, 3) complex array of sampled states.
    """
    if stride is None:
        stride = n_steps
    args = (
        np.ascontiguousarray(a, dtype=np.complex128),
        np.ascontiguousarray(hs, dtype=np.complex128),
        np.ascontiguousarray(w, dtype=np.complex128),
        np.ascontiguousarray(phi0, dtype=np.float64),
        np.ascontiguousarray(omphi, dtype=np.float64),
        np.ascontiguousarray(amp, dtype=np.float64),
        np.ascontiguousarray(omega, dtype=np.float64),
        np.ascontiguousarray(psi0, dtype=np.complex128),
        float(dt),
        int(n_steps),
        int(stride),
    )
    if _HAVE_NUMBA:
        return _rk4_batch_numba(*args)
    return _rk4_batch_numpy(*args)
