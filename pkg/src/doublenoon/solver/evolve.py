"""Segment propagators for states and density matrices."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ..hamiltonian import HamiltonianSpec, jumps_frame_compatible, static_frame
from ..hilbert import Operator
from .config import PropagatorConfig
from .expo import BlockExponential
from .stepping import LinearODE, integrate

Jump = tuple[float, Operator]  # (rate, collapse operator)


def _csr(op) -> sp.csr_matrix:
    return op.matrix if isinstance(op, Operator) else sp.csr_matrix(op)


def decay_operator(jumps: Sequence[Jump], dim: int) -> sp.csr_matrix:
    """``sum_c rate_c C^dag C``."""
    out = sp.csr_matrix((dim, dim), dtype=np.complex128)
    for rate, op in jumps:
        c = _csr(op)
        out = out + rate * (c.conj().T @ c)
    return out.tocsr()


def commutator_superop(H) -> sp.csr_matrix:
    """``-i[H, .]`` on row-major ``vec(rho)``."""
    H = sp.csr_matrix(H)
    eye = sp.identity(H.shape[0], dtype=np.complex128, format="csr")
    return (-1j * (sp.kron(H, eye) - sp.kron(eye, H.T))).tocsr()


def dissipator_superop(jumps: Sequence[Jump], dim: int) -> sp.csr_matrix:
    """``sum rate (C . C^dag - {C^dag C, .}/2)`` on row-major ``vec(rho)``."""
    eye = sp.identity(dim, dtype=np.complex128, format="csr")
    out = sp.csr_matrix((dim * dim, dim * dim), dtype=np.complex128)
    for rate, op in jumps:
        c = _csr(op)
        cdc = (c.conj().T @ c).tocsr()
        out = out + rate * (sp.kron(c, c.conj()) - 0.5 * sp.kron(cdc, eye) - 0.5 * sp.kron(eye, cdc.T))
    return out.tocsr()


def liouvillian(H, jumps: Sequence[Jump]) -> sp.csr_matrix:
    H = sp.csr_matrix(H)
    return (commutator_superop(H) + dissipator_superop(jumps, H.shape[0])).tocsr()


class Evolver:
    """Propagates column stacks between absolute times in the reference picture.

    Parameters
    ----------
    spec : HamiltonianSpec
        Segment Hamiltonian.
    jumps : sequence of (rate, Operator)
        Collapse channels.  In ``"state"`` mode they enter through the
        non-Hermitian decay term only (no-jump evolution of a trajectory); in
        ``"density"`` mode through the full dissipator.
    mode : {"state", "density"}
        Columns are state vectors, or row-major vectorised operators.
    cfg : PropagatorConfig
    """

    def __init__(self, spec: HamiltonianSpec, jumps: Sequence[Jump] = (), mode: str = "state",
                 cfg: PropagatorConfig = PropagatorConfig(), backend: str | None = None):
        if mode not in ("state", "density"):
            raise ValueError(f"mode must be 'state' or 'density', got {mode!r}")
        self.mode = mode
        self.cfg = cfg
        self.dim = spec.space.total_dim
        jumps = [(float(r), op) for r, op in jumps if r > 0]
        self.jumps = jumps
        ops = [op for _, op in jumps]
        reduced = None
        if cfg.frame_reduction:
            reduced = static_frame(spec, ops)
        elif spec.is_static:
            reduced = spec
        if reduced is not None and not jumps_frame_compatible(reduced.frame, ops):
            reduced = None
        self.time_dependent = reduced is None
        if reduced is None:
            if not jumps_frame_compatible(spec.frame, ops):
                spec = spec.to_frame(None)
            target = spec
        else:
            target = reduced
        k = target.frame_diag()
        self._frame = k if np.any(k) else None
        if mode == "density" and self._frame is not None:
            self._frame_pair = (k[:, None] - k[None, :]).ravel()
        decay = decay_operator(jumps, self.dim)
        if reduced is not None:
            H = target.static.matrix
            if mode == "state":
                G = -1j * H - 0.5 * decay
                self._exp = BlockExponential(G, anti_hermitian=not jumps, block_cap=cfg.block_cap)
            else:
                self._exp = BlockExponential(liouvillian(H, jumps), block_cap=cfg.block_cap)
            self._ode = None
        else:
            terms = []
            if mode == "state":
                terms.append((-1j * target.static.matrix - 0.5 * decay, 0.0))
                for op, w in target.oscillatory:
                    terms.append((-1j * op.matrix, w))
                    terms.append((-1j * op.matrix.conj().T, -w))
            else:
                terms.append((liouvillian(target.static.matrix, jumps), 0.0))
                for op, w in target.oscillatory:
                    terms.append((commutator_superop(op.matrix), w))
                    terms.append((commutator_superop(op.matrix.conj().T), -w))
            self._ode = LinearODE(terms, backend=backend)
            self._exp = None
            self._h = None

    def _phase(self, t: float, sign: float) -> np.ndarray | None:
        if self._frame is None:
            return None
        k = self._frame if self.mode == "state" else self._frame_pair
        return np.exp(sign * 1j * k * t)

    def evolve(self, Y: np.ndarray, ta: float, tb: float) -> np.ndarray:
        """Map columns of ``Y`` from time ``ta`` to ``tb`` (``tb >= ta``)."""
        Y = np.asarray(Y, dtype=np.complex128)
        if tb < ta:
            raise ValueError("backward propagation is not supported")
        if tb == ta:
            return Y.copy()
        vec = Y.ndim == 1
        if vec:
            Y = Y[:, None]
        ph = self._phase(ta, +1)
        Z = Y * ph[:, None] if ph is not None else Y
        if self._exp is not None:
            Z = self._exp.apply(Z, tb - ta)
        else:
            Z, self._h = integrate(self._ode, Z, ta, tb, self.cfg, self._h)
        ph = self._phase(tb, -1)
        if ph is not None:
            Z = Z * ph[:, None]
        return Z[:, 0] if vec else Z
