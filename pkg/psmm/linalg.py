"""Dense matrices over F_p and the instrumented naive multiply used as oracle."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Any, Dict, Iterable, List, Sequence

import galois
import numpy as np

from .exceptions import FieldMismatchError, PartitionError, UsageError
from .field import FieldElement, FieldSpec
from .rng import RngStream


@dataclass
class MultCounter:
    """Running count of field multiplications.

    ``scalar_mults`` counts products of two data-dependent field elements,
    ``coef_mults`` counts scalings by scheme coefficients with magnitude > 1,
    and ``products`` counts calls into :func:`matmul_naive` (base block
    products when lifting).
    """

    scalar_mults: int = 0
    coef_mults: int = 0
    products: int = 0

    def record_product(self, mults: int) -> None:
        self.scalar_mults += mults
        self.products += 1

    def merge(self, other: "MultCounter") -> None:
        self.scalar_mults += other.scalar_mults
        self.coef_mults += other.coef_mults
        self.products += other.products

    def __add__(self, other: "MultCounter") -> "MultCounter":
        total = MultCounter(self.scalar_mults, self.coef_mults, self.products)
        total.merge(other)
        return total

    @property
    def total(self) -> int:
        return self.scalar_mults + self.coef_mults

    def metrics(self) -> Dict[str, int]:
        return {**asdict(self), "total": self.total}

    def export_report(self) -> str:
        return json.dumps(self.metrics())


class FieldMatrix:
    """Row-major matrix over a prime field, backed by a ``galois`` array.

    Instances are treated as immutable: every operation returns a new matrix.
    """

    __slots__ = ("data", "field")

    def __init__(self, data: Any, field: FieldSpec) -> None:
        if isinstance(data, galois.FieldArray):
            if type(data).order != field.p:
                raise FieldMismatchError(f"array over F_{type(data).order} used as F_{field.p}")
            arr = data
        else:
            raw = np.asarray(data, dtype=object)
            arr = field.GF((raw % field.p).astype(np.int64))
        if arr.ndim != 2:
            raise UsageError(f"a matrix needs two dimensions, got shape {arr.shape}")
        self.data = arr
        self.field = field

    # ------------------------------------------------------------------
    # Construction helpers
    # ------------------------------------------------------------------
    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], field: FieldSpec) -> "FieldMatrix":
        return cls(rows, field)

    @classmethod
    def zeros(cls, rows: int, cols: int, field: FieldSpec) -> "FieldMatrix":
        return cls(field.GF.Zeros((rows, cols)), field)

    @classmethod
    def identity(cls, n: int, field: FieldSpec) -> "FieldMatrix":
        return cls(field.GF.Identity(n), field)

    # ------------------------------------------------------------------
    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def entries(self) -> List[int]:
        """Canonical entries in row-major order."""
        return [int(v) for v in self.data.view(np.ndarray).reshape(-1)]

    def to_rows(self) -> List[List[int]]:
        return [[int(v) for v in row] for row in self.data.view(np.ndarray)]

    def is_zero(self) -> bool:
        return not np.any(self.data.view(np.ndarray))

    # ------------------------------------------------------------------
    # Arithmetic (additions and public-scalar scalings are not counted)
    # ------------------------------------------------------------------
    def _check(self, other: "FieldMatrix") -> None:
        if self.field != other.field:
            raise FieldMismatchError(f"F_{self.field.p} vs F_{other.field.p}")
        if self.shape != other.shape:
            raise UsageError(f"shape mismatch {self.shape} vs {other.shape}")

    def __add__(self, other: "FieldMatrix") -> "FieldMatrix":
        self._check(other)
        return FieldMatrix(self.data + other.data, self.field)

    def __sub__(self, other: "FieldMatrix") -> "FieldMatrix":
        self._check(other)
        return FieldMatrix(self.data - other.data, self.field)

    def __neg__(self) -> "FieldMatrix":
        return FieldMatrix(-self.data, self.field)

    def scale(self, scalar: FieldElement | int) -> "FieldMatrix":
        if isinstance(scalar, FieldElement):
            if scalar.field != self.field:
                raise FieldMismatchError(f"F_{scalar.field.p} scalar on F_{self.field.p} matrix")
            value = scalar.value
        else:
            value = int(scalar) % self.field.p
        return FieldMatrix(self.field.GF(value) * self.data, self.field)

    def block(self, row0: int, row1: int, col0: int, col1: int) -> "FieldMatrix":
        return FieldMatrix(self.data[row0:row1, col0:col1].copy(), self.field)

    # ------------------------------------------------------------------
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FieldMatrix):
            return NotImplemented
        return (
            self.field == other.field
            and self.shape == other.shape
            and bool(np.array_equal(self.data.view(np.ndarray), other.data.view(np.ndarray)))
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:  # pragma: no cover - trivial
        return f"FieldMatrix({self.rows}x{self.cols} over F_{self.field.p}, {self.to_rows()})"


# ----------------------------------------------------------------------
# Operations
# ----------------------------------------------------------------------

def matmul_naive(A: FieldMatrix, B: FieldMatrix, counter: MultCounter | None = None) -> FieldMatrix:
    """Exact product ``A @ B``; charges ``A.rows * A.cols * B.cols`` multiplications."""
    if A.field != B.field:
        raise FieldMismatchError(f"F_{A.field.p} vs F_{B.field.p}")
    if A.cols != B.rows:
        raise UsageError(f"cannot multiply {A.shape} by {B.shape}")
    product = FieldMatrix(A.data @ B.data, A.field)
    if counter is not None:
        counter.record_product(A.rows * A.cols * B.cols)
    return product


def transpose(A: FieldMatrix) -> FieldMatrix:
    return FieldMatrix(A.data.T.copy(), A.field)


def split_columns(A: FieldMatrix, k: int) -> List[FieldMatrix]:
    """Split ``A`` into ``k`` equal-width column blocks, left to right."""
    if k < 1:
        raise PartitionError(f"block count must be positive, got {k}")
    if A.cols % k:
        raise PartitionError(f"{k} does not divide {A.cols} columns", (A.shape, k))
    width = A.cols // k
    return [A.block(0, A.rows, j * width, (j + 1) * width) for j in range(k)]


def partition_columns(A: FieldMatrix, k: int) -> List[FieldMatrix]:
    """Storage partition: ``k`` blocks of shape ``rows x cols/k``.

    Requires ``k < rows`` as well as ``k | cols``.
    """
    if k >= A.rows:
        raise PartitionError(f"storage split k={k} must be smaller than {A.rows} rows", (A.shape, k))
    return split_columns(A, k)


def concat_columns(blocks: Iterable[FieldMatrix]) -> FieldMatrix:
    blocks = list(blocks)
    if not blocks:
        raise UsageError("nothing to concatenate")
    field = blocks[0].field
    for blk in blocks[1:]:
        if blk.field != field or blk.rows != blocks[0].rows:
            raise UsageError("blocks must share field and row count")
    return FieldMatrix(np.concatenate([b.data for b in blocks], axis=1), field)


def stack_blocks(grid: Sequence[Sequence[FieldMatrix]]) -> FieldMatrix:
    """Assemble a block matrix; ``grid[i][j]`` lands in block-row i, block-column j."""
    rows = [np.concatenate([blk.data for blk in row], axis=1) for row in grid]
    return FieldMatrix(np.concatenate(rows, axis=0), grid[0][0].field)


def vec(A: FieldMatrix) -> galois.FieldArray:
    """Column-major flattening of ``A`` (length ``rows * cols``)."""
    return A.data.T.reshape(-1).copy()


def mat(v: Any, rows: int, cols: int, field: FieldSpec) -> FieldMatrix:
    """Inverse of :func:`vec`: reshape a column-major vector into a matrix."""
    if isinstance(v, galois.FieldArray):
        flat = v.reshape(-1)
    else:
        flat = field.GF(np.asarray([int(x) % field.p for x in v], dtype=np.int64))
    if flat.shape[0] != rows * cols:
        raise UsageError(f"vector of length {flat.shape[0]} cannot be reshaped to {rows}x{cols}")
    return FieldMatrix(flat.reshape(cols, rows).T.copy(), field)


def random_matrix(rows: int, cols: int, rng: RngStream, field: FieldSpec) -> FieldMatrix:
    """Entrywise i.i.d. uniform matrix drawn from ``rng``."""
    values = rng.residues(field.p, rows * cols).reshape(rows, cols)
    return FieldMatrix(field.GF(values), field)
