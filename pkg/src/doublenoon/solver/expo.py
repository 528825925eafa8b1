"""Exact exponentials of sparse generators by connected-block diagonalisation."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import expm_multiply

_COND_MAX = 1e8
_RECON_TOL = 1e-10


class BlockExponential:
    """Action of ``exp(G tau)`` for a fixed sparse generator ``G``.

    ``G`` is split into the connected components of its sparsity graph.
    Components of equal size are diagonalised together; non-normal blocks
    whose eigenvectors are ill conditioned fall back to ``scipy.linalg.expm``,
    and components larger than ``block_cap`` use ``expm_multiply``.

    Parameters
    ----------
    G : sparse matrix
        Generator.
    anti_hermitian : bool
        ``G = -iH`` with ``H`` Hermitian; enables ``eigh``.
    block_cap : int
        Largest component diagonalised densely.
    """

    def __init__(self, G, anti_hermitian: bool = False, block_cap: int = 600):
        G = sp.csr_matrix(G, dtype=np.complex128)
        self.dim = G.shape[0]
        self.anti_hermitian = anti_hermitian
        pattern = (G != 0).astype(np.int8)
        ncomp, labels = connected_components(pattern, directed=False)
        order = np.argsort(labels, kind="stable")
        counts = np.bincount(labels, minlength=ncomp)
        members = np.split(order, np.cumsum(counts)[:-1])
        self._groups = []   # (idx (k,s), V, lam, Vinv)
        self._dense_fallback = []  # (idx, block)
        self._krylov = []   # (idx, submatrix)
        by_size: dict[int, list[np.ndarray]] = {}
        for idx in members:
            if len(idx) > block_cap:
                self._krylov.append((idx, G[idx][:, idx].tocsc()))
            else:
                by_size.setdefault(len(idx), []).append(idx)
        for size, idx_list in sorted(by_size.items()):
            idx = np.array(idx_list)
            blocks = _extract_blocks(G, idx)
            self._diagonalise(idx, blocks)
        self.n_blocks = ncomp

    def _diagonalise(self, idx, blocks):
        if self.anti_hermitian:
            w, V = np.linalg.eigh(1j * blocks)
            self._groups.append((idx, V, -1j * w, np.conj(np.swapaxes(V, 1, 2))))
            return
        lam, V = np.linalg.eig(blocks)
        ok = np.ones(len(idx), dtype=bool)
        try:
            Vinv = np.linalg.inv(V)
        except np.linalg.LinAlgError:
            Vinv = np.zeros_like(V)
            ok[:] = False
        if ok.any():
            cond = np.linalg.norm(V, axis=(1, 2)) * np.linalg.norm(Vinv, axis=(1, 2))
            recon = V @ (lam[:, :, None] * Vinv)
            scale = np.maximum(np.abs(blocks).max(axis=(1, 2)), 1e-300)
            err = np.abs(recon - blocks).max(axis=(1, 2)) / scale
            ok &= (cond < _COND_MAX) & (err < _RECON_TOL)
        if ok.any():
            self._groups.append((idx[ok], V[ok], lam[ok], Vinv[ok]))
        for k in np.flatnonzero(~ok):
            self._dense_fallback.append((idx[k], blocks[k]))

    def apply(self, Y: np.ndarray, tau: float) -> np.ndarray:
        """``exp(G tau) @ Y`` for a vector or a column stack ``Y``."""
        Y = np.asarray(Y, dtype=np.complex128)
        vec = Y.ndim == 1
        if vec:
            Y = Y[:, None]
        out = np.empty_like(Y)
        for idx, V, lam, Vinv in self._groups:
            yb = Y[idx]                       # (k, s, r)
            tmp = Vinv @ yb
            tmp *= np.exp(lam * tau)[:, :, None]
            out[idx] = V @ tmp
        for idx, block in self._dense_fallback:
            out[idx] = sla.expm(block * tau) @ Y[idx]
        for idx, sub in self._krylov:
            out[idx] = expm_multiply(sub * tau, Y[idx])
        return out[:, 0] if vec else out


def _extract_blocks(G: sp.csr_matrix, idx: np.ndarray) -> np.ndarray:
    """Dense blocks ``G[idx[k]][:, idx[k]]`` stacked along axis 0."""
    k, s = idx.shape
    pos = np.empty(G.shape[0], dtype=np.int64)
    comp = np.empty(G.shape[0], dtype=np.int64)
    pos[idx.ravel()] = np.tile(np.arange(s), k)
    comp[idx.ravel()] = np.repeat(np.arange(k), s)
    coo = G[idx.ravel()].tocoo()
    rows = idx.ravel()[coo.row]
    blocks = np.zeros((k, s, s), dtype=np.complex128)
    np.add.at(blocks, (comp[rows], pos[rows], pos[coo.col]), coo.data)
    return blocks
