"""States stored as sums of tensor products over independent factors.

A pure state is ``sum_k prod_s Y_s[:, k]`` (one ``(d_s, r)`` array per
factor); a density matrix is ``sum_q prod_s X_s^q``.  With a single factor
these reduce to ordinary vectors and matrices.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import multiprocessing as mp

import numpy as np
import scipy.sparse as sp

from .config import NormUnderflowError, PropagatorConfig
from .evolve import Evolver

# --- pure factored states -----------------------------------------------------


def gram(Y: np.ndarray) -> np.ndarray:
    return Y.conj().T @ Y


def norm2(Ys) -> float:
    prod = gram(Ys[0])
    for Y in Ys[1:]:
        prod = prod * gram(Y)
    return float(prod.sum().real)


def overlap(Zs, Ys) -> complex:
    """``<Z|Y>`` for factored states with the same factor layout."""
    prod = Zs[0].conj().T @ Ys[0]
    for Z, Y in zip(Zs[1:], Ys[1:]):
        prod = prod * (Z.conj().T @ Y)
    return complex(prod.sum())


def local_expectation(Ys, factor: int, op=None, diag=None) -> complex:
    """``<Y| A_factor |Y>`` (unnormalised); ``A`` given sparse or as a diagonal."""
    mats = []
    for s, Y in enumerate(Ys):
        if s == factor:
            AY = Y * diag[:, None] if diag is not None else op @ Y
            mats.append(Y.conj().T @ AY)
        else:
            mats.append(gram(Y))
    prod = mats[0]
    for m in mats[1:]:
        prod = prod * m
    return complex(prod.sum())


def split_bipartite(psi: np.ndarray, shape: tuple[int, int], tol: float = 1e-14):
    """Schmidt split of a vector reshaped to ``shape`` -> ``(Y_a, Y_b)``."""
    M = np.asarray(psi).reshape(shape)
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    keep = s > tol * max(s[0], 1e-300) if s.size else s
    if not np.any(keep):
        keep = np.zeros_like(s, dtype=bool)
        keep[0] = True
    return U[:, keep] * s[keep], Vh[keep].T.copy()


def split_operator(rho: np.ndarray, dims: tuple[int, int], tol: float = 1e-14):
    """Operator-Schmidt split ``rho = sum_q A_q (x) B_q``."""
    da, db = dims
    R = rho.reshape(da, db, da, db).transpose(0, 2, 1, 3).reshape(da * da, db * db)
    U, s, Vh = np.linalg.svd(R, full_matrices=False)
    keep = s > tol * max(s[0], 1e-300)
    As = [(U[:, k] * s[k]).reshape(da, da) for k in np.flatnonzero(keep)]
    Bs = [Vh[k].reshape(db, db) for k in np.flatnonzero(keep)]
    return As, Bs


# --- trajectory plans ---------------------------------------------------------


@dataclass
class PlanSegment:
    """One segment of a factored simulation.

    ``jumps`` lists ``(factor, name, rate, operator)``.  ``guard_masks`` holds,
    per factor, boolean masks of guard levels (one per cavity).
    """

    t0: float
    t1: float
    evolvers: list[Evolver]
    jumps: list = field(default_factory=list)
    label: str = ""


@dataclass
class TrajectoryOutcome:
    final: list
    n_jumps: int
    jump_log: list
    segment_states: list


def _evolve_all(seg: PlanSegment, Ys, ta, tb):
    return [ev.evolve(Y, ta, tb) for ev, Y in zip(seg.evolvers, Ys)]


def _normalise(Ys):
    n2 = norm2(Ys)
    if not n2 > 1e-300:
        raise NormUnderflowError("state norm underflowed")
    out = list(Ys)
    out[0] = out[0] / np.sqrt(n2)
    return out


def run_trajectory(plan: list[PlanSegment], Ys, rng: np.random.Generator, cfg: PropagatorConfig,
                   record_segments: bool = False) -> TrajectoryOutcome:
    """Waiting-time Monte-Carlo unravelling over a list of segments.

    The unnormalised no-jump state is propagated until its squared norm
    reaches a uniform random threshold; the jump time is located by
    bisection, a channel is picked with weight ``rate <C^dag C>``, and the
    state is renormalised.
    """
    Ys = [np.array(Y, dtype=np.complex128) for Y in Ys]
    threshold = rng.random()
    n_jumps = 0
    log = []
    seg_states = []
    for seg in plan:
        t = seg.t0
        while True:
            cand = _evolve_all(seg, Ys, t, seg.t1)
            if not seg.jumps:
                Ys = cand
                break
            n2 = norm2(cand)
            if n2 > threshold:
                Ys = cand
                break
            lo, hi = t, seg.t1
            tol = cfg.jump_time_rtol * max(seg.t1 - seg.t0, 1e-300)
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if norm2(_evolve_all(seg, Ys, t, mid)) > threshold:
                    lo = mid
                else:
                    hi = mid
            Ys = _evolve_all(seg, Ys, t, hi)
            t = hi
            weights = np.array([
                rate * local_expectation(Ys, f, op=(op.conj().T @ op)).real for f, _, rate, op in seg.jumps
            ])
            total = weights.sum()
            if not total > 0:
                raise NormUnderflowError(f"no jump channel has weight at t={t:.6e} s")
            k = int(np.searchsorted(np.cumsum(weights), rng.random() * total, side="right"))
            k = min(k, len(weights) - 1)
            f, name, rate, op = seg.jumps[k]
            Ys[f] = op @ Ys[f]
            Ys = _normalise(Ys)
            n_jumps += 1
            log.append((t, name))
            threshold = rng.random()
            if t >= seg.t1:
                break
        if record_segments:
            seg_states.append(_normalise(Ys))
    return TrajectoryOutcome(_normalise(Ys), n_jumps, log, seg_states)


def trajectory_seeds(master: int, n: int) -> list[int]:
    """Independent 64-bit seeds for trajectories ``0..n-1``, fixed by index."""
    children = np.random.SeedSequence(master).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint64)[0]) for c in children]


# worker-side state for forked pools
_WORK: dict = {}


def _chunk(args):
    key, lo, hi = args
    fn, seeds = _WORK[key]
    return [fn(i, seeds[i]) for i in range(lo, hi)]


def map_trajectories(fn, seeds: list[int], workers: int = 1) -> list:
    """Evaluate ``fn(index, seed)`` for every trajectory, results in index order.

    With ``workers > 1`` chunks run in forked processes; the per-index seed
    makes the outcome independent of the worker count.
    """
    n = len(seeds)
    if workers <= 1 or n < 2 or "fork" not in mp.get_all_start_methods():
        return [fn(i, s) for i, s in enumerate(seeds)]
    key = id(fn)
    _WORK[key] = (fn, seeds)
    try:
        bounds = np.linspace(0, n, min(workers * 4, n) + 1).astype(int)
        tasks = [(key, int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=workers, mp_context=mp.get_context("fork")) as pool:
            out = []
            for part in pool.map(_chunk, tasks):
                out.extend(part)
        return out
    finally:
        _WORK.pop(key, None)


# --- density-matrix seeds -----------------------------------------------------


def seeds_from_pure(Ys) -> list[list[np.ndarray]]:
    """Operator-sum seeds ``prod_s |Y_s k><Y_s l|`` for every column pair."""
    r = Ys[0].shape[1]
    return [[np.outer(Y[:, k], Y[:, l].conj()) for Y in Ys] for k in range(r) for l in range(r)]


def seeds_trace(seeds) -> complex:
    return complex(sum(np.prod([np.trace(X) for X in q]) for q in seeds))


def seeds_fidelity2(seeds, Zs) -> float:
    """``<Z| rho |Z>`` for a factored target."""
    total = 0.0
    for q in seeds:
        prod = None
        for X, Z in zip(q, Zs):
            m = Z.conj().T @ X @ Z
            prod = m if prod is None else prod * m
        total += prod.sum()
    return float(np.real(total))


def seeds_local_trace(seeds, factor: int, diag: np.ndarray) -> complex:
    total = 0.0
    for q in seeds:
        val = 1.0
        for s, X in enumerate(q):
            val *= np.sum(diag * np.diagonal(X)) if s == factor else np.trace(X)
        total += val
    return complex(total)


def seeds_dense(seeds) -> np.ndarray:
    """Materialise ``sum_q kron(X_1^q, X_2^q, ...)``."""
    out = None
    for q in seeds:
        term = q[0]
        for X in q[1:]:
            term = np.kron(term, X)
        out = term if out is None else out + term
    return out


def evolve_seeds(seeds, evolvers, ta, tb):
    """Propagate every operator factor (row-major vectorised) from ``ta`` to ``tb``."""
    out = [list(q) for q in seeds]
    for s, ev in enumerate(evolvers):
        d = seeds[0][s].shape[0]
        stack = np.stack([q[s].ravel() for q in seeds], axis=1)
        res = ev.evolve(stack, ta, tb)
        for i in range(len(seeds)):
            out[i][s] = res[:, i].reshape(d, d)
    return out


def sparse_op(op):
    return op.matrix if hasattr(op, "matrix") else sp.csr_matrix(op)
