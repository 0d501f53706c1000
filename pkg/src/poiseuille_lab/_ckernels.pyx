# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-marching kernels.

The banded LU factorization is LAPACK ``zgbtrf`` through scipy's Cython
bindings. The per-step triangular solves are written out here: the
reference ``zgbtrs`` issues several BLAS calls per column, which for
bandwidths of 2 costs far more than the arithmetic.
"""
import numpy as np
cimport numpy as cnp
from scipy.linalg.cython_lapack cimport zgbtrf

cnp.import_array()

NAME = "cython"


def factor_banded(ab, int kl, int ku):
    """LU-factor a matrix in LAPACK band storage.

    Parameters
    ----------
    ab : ndarray, shape (2*kl+ku+1, n), complex
        Band storage, ``ab[kl+ku+i-j, j] = A[i, j]``.

    Returns
    -------
    (lu, ipiv, info)
        ``ipiv`` is 1-based as LAPACK returns it.
    """
    lu = np.array(ab, dtype=np.complex128, order="F", copy=True)
    cdef double complex[::1, :] lv = lu
    cdef int n = lu.shape[1]
    cdef int ldab = lu.shape[0]
    cdef int info = 0
    ipiv = np.zeros(n, dtype=np.intc)
    cdef int[::1] pv = ipiv
    zgbtrf(&n, &n, &kl, &ku, &lv[0, 0], &ldab, &pv[0], &info)
    return lu, ipiv, info


cdef inline void _gbtrs(double complex[::1, :] ab, int[::1] ipiv, double complex[::1] dinv,
                        int n, int kl, int ku, double complex[::1] b) noexcept nogil:
    """Solve with a ``zgbtrf`` factorization (no transpose), in place.

    ``dinv`` holds the reciprocals of the pivots of the upper factor.
    """
    cdef int kd = kl + ku
    cdef int j, i, lm, p, top
    cdef double complex tmp, bj
    # forward: apply row swaps and unit lower factor column by column
    for j in range(n - 1):
        lm = kl if kl < n - j - 1 else n - j - 1
        p = ipiv[j] - 1
        if p != j:
            tmp = b[p]
            b[p] = b[j]
            b[j] = tmp
        bj = b[j]
        if bj != 0:
            for i in range(1, lm + 1):
                b[j + i] = b[j + i] - bj * ab[kd + i, j]
    # backward: upper factor has kd superdiagonals
    for j in range(n - 1, -1, -1):
        bj = b[j] * dinv[j]
        b[j] = bj
        if bj != 0:
            top = j - kd if j - kd > 0 else 0
            for i in range(top, j):
                b[i] = b[i] - bj * ab[kd + i - j, j]


def cn_march(lu, ipiv, int kl, int ku, bint coupled,
             double complex[::1] rdiag, double roff, double complex rcpl,
             double complex[::1] w, double complex[::1] psi,
             long nsteps, long stride,
             double complex[:, ::1] out_w, double complex[:, ::1] out_psi,
             double complex[::1] forcing=None, double[::1] diss=None,
             double[::1] dparams=None):
    """Advance ``nsteps`` Crank-Nicolson steps in place.

    The right-hand side for the vorticity row ``j`` is
    ``rdiag[j] w[j] + roff (w[j-1] + w[j+1]) + rcpl psi[j] + forcing[j]``.
    For the coupled system unknowns are interleaved ``(w_j, psi_j)`` and
    the stream-function rows have a zero right-hand side. Every
    ``stride`` steps the state is copied into the next row of
    ``out_w`` / ``out_psi``.

    When ``diss`` is given, ``diss[0]`` accumulates
    ``scale * (||D+ m||^2 + k2 ||m||^2)`` per step with
    ``m = theta w_new + (1 - theta) w_old`` and
    ``dparams = (theta, k2, 1/dy^2, scale)``; the running total is also
    written to ``diss[row + 1]`` at every sample.

    Returns
    -------
    int
        0 (the factorization was checked when it was built).
    """
    cdef double complex[::1, :] lv = lu
    cdef int[::1] pv = ipiv
    cdef int ny = w.shape[0]
    cdef int n = 2 * ny if coupled else ny
    cdef double complex[::1] r = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] dinv = 1.0 / np.asarray(lu)[kl + ku, :]
    cdef long step, row = 0
    cdef int j
    cdef double complex acc
    cdef bint has_f = forcing is not None
    cdef bint has_d = diss is not None
    cdef double theta = 0.0, k2 = 0.0, idy2 = 0.0, scale = 0.0, total = 0.0, sq
    cdef double complex m, mprev
    cdef double complex[::1] prev = np.empty(ny if has_d else 1, dtype=np.complex128)
    if has_d:
        theta = dparams[0]
        k2 = dparams[1]
        idy2 = dparams[2]
        scale = dparams[3]
        total = diss[0]
    for step in range(1, nsteps + 1):
        if has_d:
            for j in range(ny):
                prev[j] = w[j]
        for j in range(ny):
            acc = rdiag[j] * w[j]
            if j > 0:
                acc = acc + roff * w[j - 1]
            if j < ny - 1:
                acc = acc + roff * w[j + 1]
            if coupled:
                acc = acc + rcpl * psi[j]
            if has_f:
                acc = acc + forcing[j]
            if coupled:
                r[2 * j] = acc
                r[2 * j + 1] = 0.0
            else:
                r[j] = acc
        _gbtrs(lv, pv, dinv, n, kl, ku, r)
        if coupled:
            for j in range(ny):
                w[j] = r[2 * j]
                psi[j] = r[2 * j + 1]
        else:
            for j in range(ny):
                w[j] = r[j]
        if has_d:
            sq = 0.0
            mprev = 0.0
            for j in range(ny):
                m = theta * w[j] + (1.0 - theta) * prev[j]
                sq += idy2 * ((m.real - mprev.real) ** 2 + (m.imag - mprev.imag) ** 2)
                sq += k2 * (m.real * m.real + m.imag * m.imag)
                mprev = m
            sq += idy2 * (mprev.real * mprev.real + mprev.imag * mprev.imag)
            total += scale * sq
        if stride > 0 and step % stride == 0:
            if has_d and row + 1 < diss.shape[0]:
                diss[row + 1] = total
            for j in range(ny):
                out_w[row, j] = w[j]
            if coupled:
                for j in range(ny):
                    out_psi[row, j] = psi[j]
            row += 1
    if has_d:
        diss[0] = total
    return 0
