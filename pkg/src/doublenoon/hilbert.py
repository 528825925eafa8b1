"""Truncated Fock-space layout and sparse operator algebra.

Composite spaces are ordered lists of labelled subsystems (two qutrits, up to
five cavity modes).  Basis ordering is row-major: the first-listed subsystem
varies slowest.  Operators are immutable sparse CSR matrices tied to a space.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from functools import cached_property
from math import prod
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

__all__ = [
    "QUTRIT_LABELS",
    "CAVITY_LABELS",
    "LEVELS",
    "DROP_TOL",
    "HilbertSpace",
    "Operator",
    "StateVector",
    "DensityMatrix",
    "SpaceMismatchError",
    "build_space",
    "mode_annihilation",
    "mode_number",
    "qutrit_transition",
    "qutrit_projector",
    "identity",
    "commutator",
    "basis_state",
]

QUTRIT_LABELS = ("qutrit-L", "qutrit-R")
CAVITY_LABELS = ("cav1", "cav2", "cav3", "cav4", "cav-central")
LEVELS = {"g": 0, "e": 1, "f": 2}
DROP_TOL = 1e-14


class SpaceMismatchError(ValueError):
    """Operands live on different Hilbert spaces."""


@dataclass(frozen=True)
class HilbertSpace:
    """Ordered tensor product of labelled subsystems.

    Parameters
    ----------
    subsystems : tuple of (label, dimension)
        Labels come from ``QUTRIT_LABELS + CAVITY_LABELS``.
    """

    subsystems: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if not self.subsystems:
            raise ValueError("a Hilbert space needs at least one subsystem")
        seen = set()
        for label, dim in self.subsystems:
            if label not in QUTRIT_LABELS and label not in CAVITY_LABELS:
                raise ValueError(f"unknown subsystem label {label!r}")
            if label in seen:
                raise ValueError(f"duplicate subsystem label {label!r}")
            seen.add(label)
            if int(dim) != dim or dim < 2:
                raise ValueError(f"subsystem {label!r} has dimension {dim} < 2")
            if label in QUTRIT_LABELS and dim != 3:
                raise ValueError(f"qutrit {label!r} must have dimension 3, got {dim}")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(int(d) for _, d in self.subsystems)

    @property
    def total_dim(self) -> int:
        return prod(self.dims)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def position(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"subsystem {label!r} not in space {self.labels}") from None

    def dim_of(self, label: str) -> int:
        return self.dims[self.position(label)]

    def index(self, occupations: Sequence[int]) -> int:
        """Composite index of a tuple of per-subsystem levels."""
        return int(np.ravel_multi_index(tuple(occupations), self.dims))

    def occupations(self, index: int) -> tuple[int, ...]:
        """Per-subsystem levels of a composite index."""
        return tuple(int(i) for i in np.unravel_index(int(index), self.dims))

    @cached_property
    def level_table(self) -> np.ndarray:
        """Integer array ``(total_dim, n_subsystems)`` of per-subsystem levels."""
        grids = np.indices(self.dims).reshape(len(self.dims), -1)
        return grids.T.copy()

    def subspace(self, labels: Iterable[str]) -> "HilbertSpace":
        """Space built from a subset of subsystems, in the given order."""
        return HilbertSpace(tuple((lab, self.dim_of(lab)) for lab in labels))

    def describe(self) -> str:
        return " ".join(f"{lab}:{d}" for lab, d in self.subsystems)


def build_space(dims: Sequence[tuple[str, int]]) -> HilbertSpace:
    """Validate and build a composite space from ``(label, dimension)`` pairs."""
    return HilbertSpace(tuple((str(lab), int(d)) for lab, d in dims))


def _clean(mat: sp.spmatrix, tol: float = DROP_TOL) -> sp.csr_matrix:
    mat = sp.csr_matrix(mat, dtype=np.complex128)
    if mat.nnz:
        small = np.abs(mat.data) <= tol
        if small.any():
            mat.data[small] = 0.0
        mat.eliminate_zeros()
    mat.sort_indices()
    return mat


class Operator:
    """Sparse complex operator on a :class:`HilbertSpace`.

    Arithmetic (``+``, ``-``, scalar ``*``, ``@``) requires both operands on
    the same space and re-applies the drop tolerance.
    """

    __slots__ = ("space", "matrix")

    def __init__(self, space: HilbertSpace, matrix, tol: float = DROP_TOL):
        mat = _clean(matrix, tol)
        n = space.total_dim
        if mat.shape != (n, n):
            raise ValueError(f"operator shape {mat.shape} does not match space dim {n}")
        self.space = space
        self.matrix = mat

    @classmethod
    def zero(cls, space: HilbertSpace) -> "Operator":
        n = space.total_dim
        return cls(space, sp.csr_matrix((n, n), dtype=np.complex128))

    def _check(self, other: "Operator") -> None:
        if not isinstance(other, Operator):
            raise TypeError(f"expected Operator, got {type(other).__name__}")
        if other.space != self.space:
            raise SpaceMismatchError(
                f"space mismatch: {self.space.describe()} vs {other.space.describe()}"
            )

    def __add__(self, other):
        if isinstance(other, (int, float, complex)) and other == 0:
            return self
        self._check(other)
        return Operator(self.space, self.matrix + other.matrix)

    __radd__ = __add__

    def __sub__(self, other):
        self._check(other)
        return Operator(self.space, self.matrix - other.matrix)

    def __neg__(self):
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar):
        if isinstance(scalar, Operator):
            return self @ scalar
        return Operator(self.space, self.matrix * complex(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.space, self.matrix / complex(scalar))

    def __matmul__(self, other):
        if isinstance(other, Operator):
            self._check(other)
            return Operator(self.space, self.matrix @ other.matrix)
        return self.matrix @ other

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def norm(self) -> float:
        """Frobenius norm."""
        return float(sp.linalg.norm(self.matrix)) if self.nnz else 0.0

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        diff = self.matrix - self.matrix.conj().T
        return diff.nnz == 0 or float(np.abs(diff.data).max()) <= tol

    def element(self, bra: Sequence[int], ket: Sequence[int]) -> complex:
        """Matrix element between basis states given as level tuples."""
        return complex(self.matrix[self.space.index(bra), self.space.index(ket)])

    def __repr__(self) -> str:
        return f"Operator({self.space.describe()}, nnz={self.nnz})"


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, sp.identity(space.total_dim, dtype=np.complex128, format="csr"))


def _embed(space: HilbertSpace, label: str, local: np.ndarray) -> Operator:
    pos = space.position(label)
    dims = space.dims
    left = prod(dims[:pos])
    right = prod(dims[pos + 1:])
    mat = sp.kron(sp.identity(left, format="csr"), sp.csr_matrix(local), format="csr")
    mat = sp.kron(mat, sp.identity(right, format="csr"), format="csr")
    return Operator(space, mat)


def local_annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(np.complex128)


def _require_cavity(space: HilbertSpace, label: str) -> None:
    if label not in space:
        raise KeyError(f"subsystem {label!r} not in space {space.labels}")
    if label in QUTRIT_LABELS:
        raise ValueError(f"{label!r} is a qutrit, not a cavity mode")


def _require_qutrit(space: HilbertSpace, label: str) -> None:
    if label not in space:
        raise KeyError(f"subsystem {label!r} not in space {space.labels}")
    if label not in QUTRIT_LABELS:
        raise ValueError(f"{label!r} is not a qutrit")


def mode_annihilation(space: HilbertSpace, label: str) -> Operator:
    """Truncated annihilation operator of cavity ``label`` embedded in ``space``."""
    _require_cavity(space, label)
    return _embed(space, label, local_annihilation(space.dim_of(label)))


def mode_number(space: HilbertSpace, label: str) -> Operator:
    _require_cavity(space, label)
    d = space.dim_of(label)
    return _embed(space, label, np.diag(np.arange(d, dtype=float)).astype(complex))


def _level(name) -> int:
    if isinstance(name, str):
        try:
            return LEVELS[name]
        except KeyError:
            raise ValueError(f"unknown qutrit level {name!r}") from None
    if name in (0, 1, 2):
        return int(name)
    raise ValueError(f"unknown qutrit level {name!r}")


def qutrit_transition(space: HilbertSpace, label: str, from_level, to_level) -> Operator:
    """Embedded ``|to><from|`` on qutrit ``label``.

    ``qutrit_transition(space, "qutrit-L", "g", "e")`` is sigma+_ge.
    """
    _require_qutrit(space, label)
    i, j = _level(from_level), _level(to_level)
    if i == j:
        raise ValueError("transition needs two distinct levels; use qutrit_projector")
    local = np.zeros((3, 3), dtype=np.complex128)
    local[j, i] = 1.0
    return _embed(space, label, local)


def qutrit_projector(space: HilbertSpace, label: str, level) -> Operator:
    _require_qutrit(space, label)
    k = _level(level)
    local = np.zeros((3, 3), dtype=np.complex128)
    local[k, k] = 1.0
    return _embed(space, label, local)


def basis_state(space: HilbertSpace, levels: dict[str, int | str]) -> "StateVector":
    """Product basis ket; unspecified subsystems are in level 0.

    Qutrit levels may be given as ``"g"``, ``"e"``, ``"f"``.
    """
    occ = [0] * len(space.dims)
    for label, lev in levels.items():
        pos = space.position(label)
        occ[pos] = _level(lev) if label in QUTRIT_LABELS else int(lev)
        if not 0 <= occ[pos] < space.dims[pos]:
            raise ValueError(f"level {lev} out of range for {label!r}")
    vec = np.zeros(space.total_dim, dtype=np.complex128)
    vec[space.index(occ)] = 1.0
    return StateVector(space, vec)


class StateVector:
    """Pure state amplitudes in canonical index order."""

    __slots__ = ("space", "data")

    _MAGIC = b"HSV1"

    def __init__(self, space: HilbertSpace, data):
        data = np.asarray(data, dtype=np.complex128).reshape(-1)
        if data.shape[0] != space.total_dim:
            raise ValueError(f"state length {data.shape[0]} != space dim {space.total_dim}")
        self.space = space
        self.data = data

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def normalized(self) -> "StateVector":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalise the zero vector")
        return StateVector(self.space, self.data / n)

    def overlap(self, other: "StateVector") -> complex:
        """``<self|other>``."""
        if other.space != self.space:
            raise SpaceMismatchError("overlap of states on different spaces")
        return complex(np.vdot(self.data, other.data))

    def __add__(self, other: "StateVector") -> "StateVector":
        if other.space != self.space:
            raise SpaceMismatchError("sum of states on different spaces")
        return StateVector(self.space, self.data + other.data)

    def __mul__(self, scalar) -> "StateVector":
        return StateVector(self.space, self.data * complex(scalar))

    __rmul__ = __mul__

    def apply(self, op: Operator) -> "StateVector":
        if op.space != self.space:
            raise SpaceMismatchError("operator and state on different spaces")
        return StateVector(self.space, op.matrix @ self.data)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.space, np.outer(self.data, self.data.conj()))

    # serialisation: header of labels and dims, then amplitudes in index order

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        buf.write(self._MAGIC)
        buf.write(struct.pack("<I", len(self.space.subsystems)))
        for label, dim in self.space.subsystems:
            raw = label.encode("utf-8")
            buf.write(struct.pack("<H", len(raw)))
            buf.write(raw)
            buf.write(struct.pack("<I", dim))
        buf.write(self.data.astype("<c16").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "StateVector":
        if blob[:4] != cls._MAGIC:
            raise ValueError("not a serialised state vector")
        pos = 4
        (count,) = struct.unpack_from("<I", blob, pos)
        pos += 4
        subsystems = []
        for _ in range(count):
            (n,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            label = blob[pos:pos + n].decode("utf-8")
            pos += n
            (dim,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            subsystems.append((label, dim))
        space = build_space(subsystems)
        data = np.frombuffer(blob, dtype="<c16", offset=pos)
        return cls(space, data.astype(np.complex128))

    def to_text(self) -> str:
        lines = ["# doublenoon state v1", "space " + self.space.describe()]
        lines += [f"{z.real:.17g} {z.imag:.17g}" for z in self.data]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "StateVector":
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines[0].startswith("space "):
            raise ValueError("missing 'space' header line")
        subsystems = []
        for tok in lines[0].split()[1:]:
            label, dim = tok.rsplit(":", 1)
            subsystems.append((label, int(dim)))
        space = build_space(subsystems)
        vals = np.array([complex(float(a), float(b)) for a, b in (ln.split() for ln in lines[1:])])
        return cls(space, vals)


class DensityMatrix:
    """Dense density matrix on a :class:`HilbertSpace`."""

    __slots__ = ("space", "data")

    def __init__(self, space: HilbertSpace, data):
        data = np.asarray(data, dtype=np.complex128)
        n = space.total_dim
        if data.shape != (n, n):
            raise ValueError(f"density matrix shape {data.shape} != ({n}, {n})")
        self.space = space
        self.data = data

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def hermiticity_error(self) -> float:
        return float(np.abs(self.data - self.data.conj().T).max())

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def expect(self, op: Operator) -> complex:
        return complex(np.sum(op.matrix.multiply(self.data.T)))
