"""Hamiltonians of the protocol and the rotating-frame bookkeeping.

A :class:`HamiltonianSpec` describes ``H(t) = S + sum_k (O_k e^{i w_k t} + h.c.)``
acting on states expressed in a diagonal rotating frame.  ``frame`` holds the
diagonal generator ``K``; the state in that frame is ``e^{iKt} psi`` where
``psi`` lives in the interaction picture of the device Hamiltonian (the picture
in which the qutrit-cavity coupling carries the explicit ``e^{+-i delta t}``
phases).  ``frame=None`` means that reference picture itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .device import SIDES, DeviceParams, lambda_eff
from .hilbert import (
    HilbertSpace,
    Operator,
    mode_annihilation,
    mode_number,
    qutrit_projector,
    qutrit_transition,
)

__all__ = [
    "HamiltonianSpec",
    "frame_generator",
    "dispersive_interaction",
    "effective_interaction",
    "drive_pulse",
    "bell_prep_interaction",
    "crosstalk",
    "modified_hamiltonians",
    "zero_hamiltonian",
    "static_frame",
    "jumps_frame_compatible",
    "PULSE_PHASES",
]

PULSE_PHASES = {"gf": -math.pi / 2, "ge": math.pi / 2}
_FREQ_RTOL = 1e-9


def _diag_sparse(vals: np.ndarray) -> sp.csr_matrix:
    return sp.diags(np.asarray(vals, dtype=np.complex128), format="csr")


@dataclass(frozen=True)
class HamiltonianSpec:
    """Frame Hamiltonian ``static + sum (O e^{iwt} + O^dag e^{-iwt})``.

    ``oscillatory`` holds ``(O, w)`` pairs with ``w > 0``.
    """

    static: Operator
    oscillatory: tuple[tuple[Operator, float], ...] = ()
    frame: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        for op, w in self.oscillatory:
            if op.space != self.space:
                raise ValueError("oscillatory term on a different space")
            if not w > 0:
                raise ValueError("oscillatory frequencies must be > 0")
        if self.frame is not None:
            fr = np.asarray(self.frame, dtype=float)
            if fr.shape != (self.space.total_dim,):
                raise ValueError("frame generator has wrong length")
            object.__setattr__(self, "frame", fr)

    @property
    def space(self) -> HilbertSpace:
        return self.static.space

    @property
    def is_static(self) -> bool:
        return not self.oscillatory

    def frame_diag(self) -> np.ndarray:
        if self.frame is None:
            return np.zeros(self.space.total_dim)
        return self.frame

    def at(self, t: float) -> Operator:
        """Frame Hamiltonian at time ``t``."""
        mat = self.static.matrix.copy()
        for op, w in self.oscillatory:
            ph = np.exp(1j * w * t)
            mat = mat + op.matrix * ph + op.matrix.conj().T * np.conj(ph)
        return Operator(self.space, mat)

    def reference_at(self, t: float) -> Operator:
        """Hamiltonian at ``t`` mapped back to the reference picture."""
        k = self.frame_diag()
        h = self.at(t).matrix + _diag_sparse(k)
        ph = _diag_sparse(np.exp(-1j * k * t))
        return Operator(self.space, ph @ h @ ph.conj())

    def to_frame(self, new_frame: np.ndarray | None) -> "HamiltonianSpec":
        """The same physical Hamiltonian expressed in another diagonal frame."""
        k0 = self.frame_diag()
        k1 = np.zeros_like(k0) if new_frame is None else np.asarray(new_frame, dtype=float)
        shift = k1 - k0
        rows, cols, vals, freqs = [], [], [], []

        def collect(mat, w):
            coo = sp.coo_matrix(mat)
            rows.append(coo.row)
            cols.append(coo.col)
            vals.append(coo.data)
            freqs.append(np.full(coo.nnz, float(w)))

        collect(self.static.matrix + _diag_sparse(k0), 0.0)
        for op, w in self.oscillatory:
            collect(op.matrix, w)
            collect(op.matrix.conj().T, -w)
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        v = np.concatenate(vals)
        f = np.concatenate(freqs) + shift[r] - shift[c]
        return _assemble(self.space, r, c, v, f, k1, None if new_frame is None else k1)

    def __add__(self, other: "HamiltonianSpec") -> "HamiltonianSpec":
        if not isinstance(other, HamiltonianSpec):
            return NotImplemented
        if other.space != self.space:
            raise ValueError("cannot add Hamiltonians on different spaces")
        other = other.to_frame(self.frame)
        static = self.static + other.static + Operator(self.space, _diag_sparse(self.frame_diag()))
        return _merge(static, self.oscillatory + other.oscillatory, self.frame)

    def __sub__(self, other: "HamiltonianSpec") -> "HamiltonianSpec":
        other = other.to_frame(self.frame)
        neg = HamiltonianSpec(
            -other.static - Operator(self.space, 2 * _diag_sparse(self.frame_diag())),
            tuple((-op, w) for op, w in other.oscillatory),
            self.frame,
        )
        return self + neg

    def describe(self, max_entries: int | None = None) -> str:
        """Text dump of all nonzero entries (debug aid)."""
        space = self.space
        out = [f"# space {space.describe()}"]
        blocks = [("static", self.static, 0.0)] + [
            (f"osc[{i}]", op, w) for i, (op, w) in enumerate(self.oscillatory)
        ]
        for name, op, w in blocks:
            coo = op.matrix.tocoo()
            out.append(f"# {name} omega={w:.12g} rad/s nnz={coo.nnz}")
            for n, (i, j, v) in enumerate(zip(coo.row, coo.col, coo.data)):
                if max_entries is not None and n >= max_entries:
                    out.append("# ...")
                    break
                out.append(f"{space.occupations(i)} {space.occupations(j)} {v.real:.12g} {v.imag:.12g}")
        return "\n".join(out)


def _merge(static: Operator, osc, frame) -> HamiltonianSpec:
    """Combine oscillatory terms sharing a frequency."""
    groups: dict[float, sp.csr_matrix] = {}
    keys: list[float] = []
    for op, w in osc:
        for k in keys:
            if abs(k - w) <= _FREQ_RTOL * max(abs(k), abs(w)):
                groups[k] = groups[k] + op.matrix
                break
        else:
            keys.append(w)
            groups[w] = op.matrix
    terms = tuple(
        (Operator(static.space, groups[w]), w) for w in keys
        if Operator(static.space, groups[w]).nnz
    )
    return HamiltonianSpec(static, terms, frame)


def _assemble(space, r, c, v, f, minus_diag, frame) -> HamiltonianSpec:
    n = space.total_dim
    scale = max(1.0, float(np.abs(f).max(initial=0.0)), float(np.abs(minus_diag).max(initial=0.0)))
    zero = np.abs(f) <= _FREQ_RTOL * scale
    static = sp.coo_matrix((v[zero], (r[zero], c[zero])), shape=(n, n)).tocsr()
    static = static - _diag_sparse(minus_diag)
    pos = ~zero & (f > 0)
    osc = []
    if pos.any():
        fp, rp, cp, vp = f[pos], r[pos], c[pos], v[pos]
        order = np.argsort(fp)
        fp, rp, cp, vp = fp[order], rp[order], cp[order], vp[order]
        start = 0
        for i in range(1, len(fp) + 1):
            if i == len(fp) or fp[i] - fp[start] > _FREQ_RTOL * scale:
                sl = slice(start, i)
                mat = sp.coo_matrix((vp[sl], (rp[sl], cp[sl])), shape=(n, n)).tocsr()
                op = Operator(space, mat)
                if op.nnz:
                    osc.append((op, float(fp[sl].mean())))
                start = i
    return HamiltonianSpec(Operator(space, static), tuple(osc), frame)


def _as_osc(space: HilbertSpace, op: Operator, w: float):
    """``op e^{iwt} + h.c.`` as a stored ``(O, w>0)`` term."""
    if w > 0:
        return (op, w)
    if w < 0:
        return (op.dag(), -w)
    raise ValueError("zero-frequency term belongs in the static part")


def _sides(space: HilbertSpace, side: str) -> tuple[str, ...]:
    if side == "both":
        chosen = ("left", "right")
    elif side in SIDES:
        chosen = (side,)
    else:
        raise ValueError(f"side must be 'left', 'right' or 'both', got {side!r}")
    for s in chosen:
        missing = [lab for lab in SIDES[s] if lab not in space]
        if missing:
            raise KeyError(f"space lacks {missing} needed for the {s} side")
    return chosen


def zero_hamiltonian(space: HilbertSpace) -> HamiltonianSpec:
    return HamiltonianSpec(Operator.zero(space))


def frame_generator(params: DeviceParams, space: HilbertSpace, side: str = "both") -> np.ndarray:
    """Diagonal of ``K = delta1 n1 - delta2 n2`` (plus the mirrored right side)."""
    k = np.zeros(space.total_dim)
    for s in _sides(space, side):
        _, ca, cb = SIDES[s]
        k += params.delta1 * mode_number(space, ca).matrix.diagonal().real
        k -= params.delta2 * mode_number(space, cb).matrix.diagonal().real
    return k


def dispersive_interaction(params: DeviceParams, space: HilbertSpace, side: str = "both") -> HamiltonianSpec:
    """Qutrit-cavity coupling in the frame that makes it time independent.

    Reference picture: ``g1 (e^{i delta1 t} a1 s+_ge + h.c.) + g2 (e^{-i delta2 t} a2 s+_ef + h.c.)``.
    Returned frame Hamiltonian: ``-delta1 n1 + delta2 n2 + g1 (a1 s+_ge + h.c.) + g2 (a2 s+_ef + h.c.)``.
    """
    chosen = _sides(space, side)
    mat = sp.csr_matrix((space.total_dim,) * 2, dtype=np.complex128)
    for s in chosen:
        q, ca, cb = SIDES[s]
        t1 = params.g1 * (mode_annihilation(space, ca) @ qutrit_transition(space, q, "g", "e"))
        t2 = params.g2 * (mode_annihilation(space, cb) @ qutrit_transition(space, q, "e", "f"))
        mat = mat + (t1 + t1.dag() + t2 + t2.dag()).matrix
    k = frame_generator(params, space, side)
    return HamiltonianSpec(Operator(space, mat - _diag_sparse(k)), (), k)


def effective_interaction(params: DeviceParams, space: HilbertSpace, side: str = "both") -> HamiltonianSpec:
    """Large-detuning effective Hamiltonian ``H0 + H_int`` in the reference picture.

    ``H0 = -(g1^2/d1)(n1 |g><g| - a1 a1^dag |e><e|) - (g2^2/d2)(a2 a2^dag |f><f| - n2 |e><e|)``
    and ``H_int = -lam (e^{-i(d1-d2)t} a1^dag a2^dag |g><f| + h.c.)``.
    """
    chosen = _sides(space, side)
    lam = lambda_eff(params)
    s1 = params.g1 ** 2 / params.delta1
    s2 = params.g2 ** 2 / params.delta2
    h0 = Operator.zero(space)
    coupling = Operator.zero(space)
    for s in chosen:
        q, ca, cb = SIDES[s]
        a1, a2 = mode_annihilation(space, ca), mode_annihilation(space, cb)
        pg, pe, pf = (qutrit_projector(space, q, x) for x in "gef")
        h0 = h0 - s1 * (a1.dag() @ a1 @ pg - a1 @ a1.dag() @ pe)
        h0 = h0 - s2 * (a2 @ a2.dag() @ pf - a2.dag() @ a2 @ pe)
        coupling = coupling + (-lam) * (a1.dag() @ a2.dag() @ qutrit_transition(space, q, "f", "g"))
    w = -(params.delta1 - params.delta2)
    if abs(w) <= _FREQ_RTOL * params.delta1:
        return HamiltonianSpec(h0 + coupling + coupling.dag())
    return HamiltonianSpec(h0, (_as_osc(space, coupling, w),))


def drive_pulse(
    params: DeviceParams,
    space: HilbertSpace,
    transition: str,
    initial_phase: float | None = None,
    side: str = "both",
) -> HamiltonianSpec:
    """Resonant square drive ``sum_j Omega (e^{-i phi} s+ + h.c.)``.

    Default phases (``-pi/2`` for g-f, ``+pi/2`` for g-e) make a pulse of
    length ``pi / (2 Omega)`` map ``|g> -> |f>`` and ``|e> -> |g>``.
    """
    if transition == "gf":
        omega, upper = params.omega_gf, "f"
    elif transition == "ge":
        omega, upper = params.omega_ge_rabi, "e"
    else:
        raise ValueError(f"transition must be 'gf' or 'ge', got {transition!r}")
    phi = PULSE_PHASES[transition] if initial_phase is None else initial_phase
    op = Operator.zero(space)
    for s in _sides(space, side):
        q = SIDES[s][0]
        op = op + omega * np.exp(-1j * phi) * qutrit_transition(space, q, "g", upper)
    return HamiltonianSpec(op + op.dag())


def bell_prep_interaction(params: DeviceParams, space: HilbertSpace) -> HamiltonianSpec:
    """Resonant coupling ``sum_j mu (a^dag s-_ge,j + h.c.)`` to the central cavity."""
    if "cav-central" not in space:
        raise KeyError("Bell preparation needs the central cavity in the space")
    if params.mu is None:
        raise ValueError("mu is not set; the Bell-preparation coupling must be user-supplied")
    a = mode_annihilation(space, "cav-central")
    op = Operator.zero(space)
    for q in ("qutrit-L", "qutrit-R"):
        if q not in space:
            raise KeyError(f"Bell preparation needs {q} in the space")
        op = op + params.mu * (a.dag() @ qutrit_transition(space, q, "e", "g"))
    return HamiltonianSpec(op + op.dag())


def crosstalk(params: DeviceParams, space: HilbertSpace, side: str = "both") -> HamiltonianSpec:
    """Inter-cavity hopping ``g12 (e^{i Delta t} a1 a2^dag + h.c.)`` (and 3-4).

    Expressed in the dispersive frame, where the residual oscillation is
    ``Delta - (delta1 + delta2)``.
    """
    chosen = _sides(space, side)
    k = frame_generator(params, space, side)
    w = params.cavity_detuning - params.delta1 - params.delta2
    terms = []
    for s, g in (("left", params.g12), ("right", params.g34)):
        if s not in chosen or g == 0:
            continue
        _, ca, cb = SIDES[s]
        op = g * (mode_annihilation(space, ca) @ mode_annihilation(space, cb).dag())
        if abs(w) <= _FREQ_RTOL * params.delta1:
            terms.append(("static", op + op.dag()))
        else:
            terms.append(_as_osc(space, op, w))
    static = Operator(space, -_diag_sparse(k))
    osc = []
    for term in terms:
        if term[0] == "static":
            static = static + term[1]
        else:
            osc.append(term)
    return _merge(static, tuple(osc), k)


def modified_hamiltonians(
    params: DeviceParams,
    space: HilbertSpace,
    phase_index: int,
    side: str = "both",
    ideal_pulses: bool = False,
) -> HamiltonianSpec:
    """Composite Hamiltonians simulated by the protocol.

    1: interaction plus crosstalk; 2: g-f pulse on top of 1; 3: g-e pulse on
    top of 1.  ``ideal_pulses`` drops the concurrent interaction and crosstalk
    from phases 2 and 3.
    """
    if phase_index not in (1, 2, 3):
        raise ValueError(f"phase index must be 1, 2 or 3, got {phase_index!r}")
    base = dispersive_interaction(params, space, side) + crosstalk(params, space, side)
    if phase_index == 1:
        return base
    pulse = drive_pulse(params, space, "gf" if phase_index == 2 else "ge", side=side)
    if ideal_pulses:
        return pulse
    return base + pulse


# --- frame reduction ----------------------------------------------------------

def _potential_system(space: HilbertSpace, pairs):
    """Rows ``p_i - p_j`` for separable diagonal potentials.

    ``pairs`` is a list of ``(rows, cols, target, jump_id)`` arrays; the
    potential is ``sum_s phi_s[level_s]`` with one unknown per subsystem level,
    plus one free phase per jump operator.
    """
    table = space.level_table
    offsets = np.concatenate([[0], np.cumsum(space.dims)])
    n_pot = int(offsets[-1])
    keys, targets, jump_ids = [], [], []
    for r, c, tgt, jid in pairs:
        keys.append(np.hstack([table[r], table[c]]))
        targets.append(tgt)
        jump_ids.append(np.full(len(r), jid))
    keys = np.vstack(keys)
    targets = np.concatenate(targets)
    jump_ids = np.concatenate(jump_ids)
    scale = max(1.0, float(np.abs(targets).max(initial=0.0)))
    tq = np.round(targets / (scale * 1e-12)).astype(np.int64)
    full = np.hstack([keys, jump_ids[:, None], tq[:, None]])
    _, first = np.unique(full, axis=0, return_index=True)
    keys, targets, jump_ids = keys[first], targets[first], jump_ids[first]
    n_jumps = int(jump_ids.max(initial=-1)) + 1
    ns = len(space.dims)
    A = np.zeros((len(keys), n_pot + n_jumps))
    rows = np.arange(len(keys))
    for s in range(ns):
        np.add.at(A, (rows, offsets[s] + keys[:, s]), 1.0)
        np.add.at(A, (rows, offsets[s] + keys[:, ns + s]), -1.0)
    has_jump = jump_ids >= 0
    A[rows[has_jump], n_pot + jump_ids[has_jump]] = -1.0
    return A, targets, offsets, scale


def static_frame(spec: HamiltonianSpec, jumps=()) -> HamiltonianSpec | None:
    """Re-express ``spec`` in a diagonal frame where it is time independent.

    Searches for a separable diagonal shift ``P = sum_s phi_s(level_s)`` such
    that every oscillatory term becomes static, the static couplings stay
    static, and each jump operator only picks up a global phase (so the
    dissipator is unchanged).  Returns ``None`` when no such frame exists.
    """
    if spec.is_static:
        return spec
    space = spec.space
    k0 = spec.frame_diag()
    pairs = []
    st = sp.coo_matrix(spec.static.matrix)
    off = st.row != st.col
    if off.any():
        pairs.append((st.row[off], st.col[off], np.zeros(off.sum()), -1))
    for op, w in spec.oscillatory:
        coo = sp.coo_matrix(op.matrix)
        pairs.append((coo.row, coo.col, np.full(coo.nnz, -w), -1))
    for jid, jump in enumerate(jumps):
        coo = sp.coo_matrix(jump.matrix)
        # frame phase of the jump must be uniform: (k0 + p)_i - (k0 + p)_j = theta
        pairs.append((coo.row, coo.col, -(k0[coo.row] - k0[coo.col]), jid))
    A, b, offsets, scale = _potential_system(space, pairs)
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.abs(A @ x - b).max(initial=0.0) > 1e-9 * scale:
        return None
    table = space.level_table
    p = np.zeros(space.total_dim)
    for s in range(len(space.dims)):
        p += x[offsets[s]:offsets[s + 1]][table[:, s]]
    reduced = spec.to_frame(k0 + p)
    return reduced if reduced.is_static else None


def jumps_frame_compatible(frame: np.ndarray | None, jumps, rtol: float = 1e-9) -> bool:
    """True when every jump operator is a uniform-phase map in ``frame``."""
    if frame is None:
        return True
    scale = max(1.0, float(np.abs(frame).max(initial=0.0)))
    for jump in jumps:
        coo = sp.coo_matrix(jump.matrix)
        if coo.nnz == 0:
            continue
        d = frame[coo.row] - frame[coo.col]
        if np.ptp(d) > rtol * scale:
            return False
    return True
