"""Pure-Python time-marching kernels.

Same contract as the compiled module: banded LU through scipy's LAPACK
wrappers, with the right-hand side assembled by numpy slicing.
"""
import numpy as np
from scipy.linalg import lapack

NAME = "python"


def factor_banded(ab, kl, ku):
    """LU-factor a matrix in LAPACK band storage; returns ``(lu, ipiv, info)``.

    ``ipiv`` is 0-based, as scipy's wrapper returns it.
    """
    lu, ipiv, info = lapack.zgbtrf(np.asarray(ab, dtype=np.complex128), kl, ku)
    return lu, ipiv, int(info)


def cn_march(lu, ipiv, kl, ku, coupled, rdiag, roff, rcpl, w, psi, nsteps, stride,
             out_w, out_psi, forcing=None, diss=None, dparams=None):
    """Advance ``nsteps`` Crank-Nicolson steps in place; see the compiled twin."""
    ny = w.shape[0]
    n = 2 * ny if coupled else ny
    r = np.zeros(n, dtype=np.complex128)
    acc = np.empty(ny, dtype=np.complex128)
    row = 0
    if diss is not None:
        theta, k2, idy2, scale = (float(v) for v in dparams)
        total = float(diss[0])
        ext = np.zeros(ny + 2, dtype=np.complex128)
    for step in range(1, nsteps + 1):
        if diss is not None:
            prev = w.copy()
        np.multiply(rdiag, w, out=acc)
        acc[1:] += roff * w[:-1]
        acc[:-1] += roff * w[1:]
        if coupled:
            acc += rcpl * psi
        if forcing is not None:
            acc += forcing
        if coupled:
            r[0::2] = acc
            r[1::2] = 0.0
        else:
            r[:] = acc
        x, info = lapack.zgbtrs(lu, kl, ku, r, ipiv)
        if info != 0:
            return int(info)
        if coupled:
            w[:] = x[0::2]
            psi[:] = x[1::2]
        else:
            w[:] = x
        if diss is not None:
            ext[1:-1] = theta * w + (1.0 - theta) * prev
            d = np.diff(ext)
            total += scale * (idy2 * np.vdot(d, d).real + k2 * np.vdot(ext, ext).real)
        if stride > 0 and step % stride == 0:
            if diss is not None and row + 1 < diss.shape[0]:
                diss[row + 1] = total
            out_w[row] = w
            if coupled:
                out_psi[row] = psi
            row += 1
    if diss is not None:
        diss[0] = total
    return 0
