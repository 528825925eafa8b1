"""Pure numpy/scipy implementation of the RK4 stepper (fallback backend)."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def _unstack(indptr, indices, data):
    n = indptr.shape[1] - 1
    mats = []
    for row in indptr:
        a, b = row[0], row[-1]
        mats.append(sp.csr_matrix((data[a:b], indices[a:b], row - a), shape=(n, n)))
    return mats


def rk4_advance(indptr, indices, data, nus, y, t0, h, nsteps):
    """Advance ``y`` in place by ``nsteps`` RK4 steps of size ``h`` from ``t0``."""
    mats = _unstack(indptr, indices, data)
    nus = np.asarray(nus)

    def g(t, x):
        coef = np.exp(1j * nus * t)
        out = coef[0] * (mats[0] @ x)
        for c, m in zip(coef[1:], mats[1:]):
            out += c * (m @ x)
        return out

    x = np.asarray(y)
    for s in range(nsteps):
        t = t0 + s * h
        k1 = g(t, x)
        k2 = g(t + h / 2, x + (h / 2) * k1)
        k3 = g(t + h / 2, x + (h / 2) * k2)
        k4 = g(t + h, x + h * k3)
        x = x + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    y[...] = x
