"""Adaptive fixed-order integration of linear ODEs with oscillatory terms."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .. import kernels
from .config import PropagatorConfig, StepControlError

_SUBSTEPS = 4


class LinearODE:
    """``dy/dt = sum_m e^{i nu_m t} M_m y``.

    Terms with ``nu = 0`` are merged into one static matrix, which is kept
    first so that its norm sets the stability scale.
    """

    def __init__(self, terms, backend: str | None = None):
        static = None
        rest = []
        for mat, nu in terms:
            mat = sp.csr_matrix(mat, dtype=np.complex128)
            if nu == 0:
                static = mat if static is None else static + mat
            else:
                rest.append((mat, float(nu)))
        if static is None:
            n = rest[0][0].shape[0]
            static = sp.csr_matrix((n, n), dtype=np.complex128)
        mats = [static] + [m for m, _ in rest]
        for m in mats:
            m.sort_indices()
        self.dim = static.shape[0]
        self.nus = np.array([0.0] + [nu for _, nu in rest])
        self.static_scale = float(abs(static).sum(axis=0).max()) if static.nnz else 0.0
        self.osc_scale = max((float(abs(m).sum(axis=0).max()) for m in mats[1:]), default=0.0)
        offsets = np.concatenate([[0], np.cumsum([m.nnz for m in mats])])
        self.indptr = np.ascontiguousarray(
            np.vstack([m.indptr.astype(np.int64) + off for m, off in zip(mats, offsets)])
        )
        self.indices = np.ascontiguousarray(np.concatenate([m.indices for m in mats]).astype(np.int64))
        self.data = np.ascontiguousarray(np.concatenate([m.data for m in mats]))
        self._advance = kernels.rk4_advance if backend is None else kernels.get_backend(backend)

    @property
    def max_frequency(self) -> float:
        return float(np.abs(self.nus).max(initial=0.0))

    def advance(self, y: np.ndarray, t0: float, h: float, nsteps: int) -> np.ndarray:
        out = np.array(y, dtype=np.complex128, order="C", copy=True)
        self._advance(self.indptr, self.indices, self.data, self.nus, out, float(t0), float(h), int(nsteps))
        return out


def initial_step(ode: LinearODE, cfg: PropagatorConfig) -> float:
    h = cfg.max_step
    if ode.max_frequency > 0:
        h = min(h, cfg.max_phase_advance / ode.max_frequency)
    scale = ode.static_scale + ode.osc_scale
    if scale > 0:
        h = min(h, 0.5 / scale)
    return h


def integrate(ode: LinearODE, y0: np.ndarray, t0: float, t1: float, cfg: PropagatorConfig,
              h0: float | None = None) -> tuple[np.ndarray, float]:
    """Integrate from ``t0`` to ``t1``; returns ``(y1, last accepted step)``.

    Step doubling over macro steps of four RK4 steps controls the local
    error; the accepted value is Richardson-extrapolated.
    """
    y = np.array(y0, dtype=np.complex128, copy=True)
    vec = y.ndim == 1
    if vec:
        y = y[:, None]
    if t1 <= t0:
        return (y[:, 0] if vec else y), (h0 or 0.0)
    h_cap = initial_step(ode, cfg)
    h = min(h0 or h_cap, h_cap)
    t = t0
    span = t1 - t0
    while t1 - t > 1e-15 * span:
        H = min(_SUBSTEPS * h, t1 - t)
        hh = H / _SUBSTEPS
        coarse = ode.advance(y, t, hh, _SUBSTEPS)
        fine = ode.advance(y, t, hh / 2, 2 * _SUBSTEPS)
        err = float(np.abs(fine - coarse).max()) / 15.0
        tol = cfg.atol + cfg.rtol * float(np.abs(fine).max())
        if err <= tol:
            y = fine + (fine - coarse) / 15.0
            t += H
            grow = 2.0 if err == 0 else min(2.0, 0.9 * (tol / err) ** 0.2)
            h = min(h_cap, max(hh, hh * grow))
        else:
            h = hh * max(0.2, 0.9 * (tol / err) ** 0.2)
            if h < cfg.min_step:
                raise StepControlError(
                    f"step size {h:.3e} s fell below min_step {cfg.min_step:.3e} s at t={t:.6e} s"
                )
    return (y[:, 0] if vec else y), h
