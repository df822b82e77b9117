"""Rank-T bilinear matrix multiplication schemes.

A scheme for ``(a, b, c)`` multiplies an ``a x b`` matrix by a ``b x c`` one as

    vec(C) = sum_r <u_r, vec(A)> <v_r, vec(B)> w_r

with integer coefficient vectors and column-major ``vec``. Schemes are
verified exactly against the matrix multiplication tensor before use and can
be lifted blockwise so each rank term becomes a recursive block product.
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .cache import shared_cache
from .exceptions import LiftError, SchemeInvalid, SchemeParseError, UsageError
from .field import FieldSpec
from .linalg import FieldMatrix, MultCounter, mat, matmul_naive, stack_blocks, vec
from .settings import get_settings

logger = logging.getLogger(__name__)

Vector = Tuple[int, ...]


@dataclass(frozen=True)
class BilinearScheme:
    """Integer rank-T decomposition of the ``(a, b, c)`` matmul tensor."""

    dims: Tuple[int, int, int]
    U: Tuple[Vector, ...]
    V: Tuple[Vector, ...]
    W: Tuple[Vector, ...]
    characteristic: int = 0
    name: str = dc_field(default="", compare=False)

    def __post_init__(self) -> None:
        a, b, c = self.dims
        if min(a, b, c) < 1:
            raise UsageError(f"scheme dimensions must be positive, got {self.dims}")
        if not (len(self.U) == len(self.V) == len(self.W)) or not self.U:
            raise UsageError("U, V and W must list the same positive number of rank terms")
        for label, rows, width in (("U", self.U, a * b), ("V", self.V, b * c), ("W", self.W, a * c)):
            if any(len(row) != width for row in rows):
                raise UsageError(f"every {label} vector must have length {width}")
        if self.characteristic < 0:
            raise UsageError("characteristic must be 0 or a prime")

    @property
    def rank(self) -> int:
        return len(self.U)

    @cached_property
    def fingerprint(self) -> str:
        return hashlib.sha256(dumps_scheme(self).encode("utf-8")).hexdigest()

    @cached_property
    def scaled_coefficients(self) -> int:
        """Number of coefficients with magnitude above one (each costs a scaling)."""
        return sum(1 for rows in (self.U, self.V, self.W) for row in rows for v in row if abs(v) > 1)

    def max_abs_coefficient(self) -> int:
        return max(abs(v) for rows in (self.U, self.V, self.W) for row in rows for v in row)

    def gf_factors(self, field: FieldSpec):
        """``(U, V, W)`` reduced into ``field`` as ``galois`` arrays of shape ``(T, n)``."""

        def build():
            GF = field.GF
            return tuple(
                GF(np.array([[v % field.p for v in row] for row in rows], dtype=np.int64))
                for rows in (self.U, self.V, self.W)
            )

        return shared_cache().get_or_compute(("factors", self.fingerprint, field.p), build)


@dataclass(frozen=True)
class VerificationResult:
    passed: bool
    counterexample: Optional[Tuple[int, int, int, int]] = None
    reason: str = ""


# ----------------------------------------------------------------------
# Shipped schemes
# ----------------------------------------------------------------------

def strassen_scheme() -> BilinearScheme:
    """Strassen's rank-7 scheme for 2x2 matrices.

    Index order of every vector is ``(1,1), (2,1), (1,2), (2,2)``.
    """
    U = (
        (1, 0, 0, 1),   # a11 + a22
        (0, 1, 0, 1),   # a21 + a22
        (1, 0, 0, 0),   # a11
        (0, 0, 0, 1),   # a22
        (1, 0, 1, 0),   # a11 + a12
        (-1, 1, 0, 0),  # a21 - a11
        (0, 0, 1, -1),  # a12 - a22
    )
    V = (
        (1, 0, 0, 1),   # b11 + b22
        (1, 0, 0, 0),   # b11
        (0, 0, 1, -1),  # b12 - b22
        (-1, 1, 0, 0),  # b21 - b11
        (0, 0, 0, 1),   # b22
        (1, 0, 1, 0),   # b11 + b12
        (0, 1, 0, 1),   # b21 + b22
    )
    W = (
        (1, 0, 0, 1),
        (0, 1, 0, -1),
        (0, 0, 1, 1),
        (1, 1, 0, 0),
        (-1, 0, 1, 0),
        (0, 0, 0, 1),
        (1, 0, 0, 0),
    )
    return BilinearScheme((2, 2, 2), U, V, W, name="strassen")


def naive_scheme(a: int, b: int, c: int) -> BilinearScheme:
    """Rank ``abc`` scheme: one term per elementary product ``A[i,j] B[j,l]``."""
    if min(a, b, c) < 1:
        raise UsageError(f"dimensions must be positive, got {(a, b, c)}")
    U, V, W = [], [], []
    for i in range(a):
        for j in range(b):
            for l in range(c):
                u = [0] * (a * b)
                v = [0] * (b * c)
                w = [0] * (a * c)
                u[i + a * j] = 1
                v[j + b * l] = 1
                w[i + a * l] = 1
                U.append(tuple(u))
                V.append(tuple(v))
                W.append(tuple(w))
    return BilinearScheme((a, b, c), tuple(U), tuple(V), tuple(W), name=f"naive-{a}{b}{c}")


# ----------------------------------------------------------------------
# Verification
# ----------------------------------------------------------------------

def _matmul_tensor(a: int, b: int, c: int) -> np.ndarray:
    tensor = np.zeros((a * b, b * c, a * c), dtype=np.int64)
    for i in range(a):
        for j in range(b):
            for l in range(c):
                tensor[i + a * j, j + b * l, i + a * l] = 1
    return tensor


def _scheme_tensor(scheme: BilinearScheme) -> np.ndarray:
    U = np.array(scheme.U, dtype=object)
    V = np.array(scheme.V, dtype=object)
    W = np.array(scheme.W, dtype=object)
    bound = scheme.max_abs_coefficient() ** 3 * scheme.rank
    if bound < 2**62:
        return np.einsum("ri,rj,rk->ijk", U.astype(np.int64), V.astype(np.int64), W.astype(np.int64))
    tensor = np.zeros((U.shape[1], V.shape[1], W.shape[1]), dtype=object)
    for r in range(scheme.rank):
        tensor = tensor + np.multiply.outer(np.multiply.outer(U[r], V[r]), W[r])
    return tensor


def verify_scheme(scheme: BilinearScheme, field: FieldSpec) -> VerificationResult:
    """Exhaustively compare the scheme with matrix multiplication over ``field``.

    Checking every standard-basis pair ``(E_pq, E_rs)`` is complete by
    bilinearity. On failure the first violating ``(p, q, r, s)`` is returned.
    """
    if scheme.characteristic and scheme.characteristic != field.p:
        return VerificationResult(
            False,
            reason=f"scheme is only valid in characteristic {scheme.characteristic}, not {field.p}",
        )
    a, b, c = scheme.dims
    diff = (_scheme_tensor(scheme) - _matmul_tensor(a, b, c)) % field.p
    for p in range(a):
        for q in range(b):
            for r in range(b):
                for s in range(c):
                    if np.any(diff[p + a * q, r + b * s, :] != 0):
                        return VerificationResult(
                            False,
                            counterexample=(p, q, r, s),
                            reason=f"basis pair E[{p},{q}] x E[{r},{s}] is multiplied incorrectly",
                        )
    return VerificationResult(True)


def ensure_verified(scheme: BilinearScheme, field: FieldSpec) -> None:
    """Raise :class:`SchemeInvalid` unless ``scheme`` realizes matmul over ``field``."""
    result = shared_cache().get_or_compute(
        ("verify", scheme.fingerprint, field.p), lambda: verify_scheme(scheme, field)
    )
    if not result.passed:
        raise SchemeInvalid(result.reason, result.counterexample)


# ----------------------------------------------------------------------
# Application
# ----------------------------------------------------------------------

def apply_scheme(
    scheme: BilinearScheme, A: FieldMatrix, B: FieldMatrix, counter: MultCounter | None = None
) -> FieldMatrix:
    """Evaluate the rank-T bilinear form on ``A`` and ``B`` directly.

    Charges ``T`` multiplications for the products ``<u_r, vec A> <v_r, vec B>``
    and one coefficient multiplication per coefficient of magnitude above one.
    """
    a, b, c = scheme.dims
    if A.shape != (a, b) or B.shape != (b, c):
        raise UsageError(f"scheme {scheme.dims} cannot multiply {A.shape} by {B.shape}")
    if A.field != B.field:
        raise UsageError("operands live in different fields")
    ensure_verified(scheme, A.field)
    U, V, W = scheme.gf_factors(A.field)
    left = U @ vec(A)
    right = V @ vec(B)
    products = left * right
    C = mat(W.T @ products, a, c, A.field)
    if counter is not None:
        counter.scalar_mults += scheme.rank
        counter.coef_mults += scheme.scaled_coefficients
    return C


def _combine(coeffs: Sequence[int], blocks: List[FieldMatrix], counter: MultCounter | None) -> FieldMatrix:
    field = blocks[0].field
    GF = field.GF
    acc = None
    for coef, blk in zip(coeffs, blocks):
        if coef == 0:
            continue
        if coef == 1:
            term = blk.data
        elif coef == -1:
            term = -blk.data
        else:
            term = GF(coef % field.p) * blk.data
            if counter is not None:
                counter.coef_mults += blk.rows * blk.cols
        acc = term if acc is None else acc + term
    if acc is None:
        return FieldMatrix.zeros(blocks[0].rows, blocks[0].cols, field)
    return FieldMatrix(acc, field)


def _split_grid(M: FieldMatrix, rows: int, cols: int) -> List[FieldMatrix]:
    """Blocks of an ``rows x cols`` grid in column-major order."""
    h, w = M.rows // rows, M.cols // cols
    return [M.block(i * h, (i + 1) * h, j * w, (j + 1) * w) for j in range(cols) for i in range(rows)]


def _lift(scheme: BilinearScheme, A: FieldMatrix, B: FieldMatrix, depth: int, counter: MultCounter | None) -> FieldMatrix:
    if depth == 0:
        return matmul_naive(A, B, counter)
    a, b, c = scheme.dims
    A_blocks = _split_grid(A, a, b)
    B_blocks = _split_grid(B, b, c)
    C_blocks: List[Optional[FieldMatrix]] = [None] * (a * c)
    for u, v, w in zip(scheme.U, scheme.V, scheme.W):
        product = _lift(scheme, _combine(u, A_blocks, counter), _combine(v, B_blocks, counter), depth - 1, counter)
        for z, coef in enumerate(w):
            if coef == 0:
                continue
            term = _combine((coef,), [product], counter)
            C_blocks[z] = term if C_blocks[z] is None else C_blocks[z] + term
    h, wd = A.rows // a, B.cols // c
    zero = FieldMatrix.zeros(h, wd, A.field)
    grid = [
        [zero if C_blocks[i + a * l] is None else C_blocks[i + a * l] for l in range(c)]
        for i in range(a)
    ]
    return stack_blocks(grid)


def lift_apply(
    scheme: BilinearScheme,
    A: FieldMatrix,
    B: FieldMatrix,
    depth: int,
    counter: MultCounter | None = None,
) -> FieldMatrix:
    """Apply ``scheme`` blockwise, recursing ``depth`` levels down to :func:`matmul_naive`.

    Operand dimensions must be divisible by ``a^d``, ``b^d`` and ``c^d``. For
    Strassen the number of base products is ``7^d``.
    """
    if depth < 0:
        raise LiftError(f"depth must be non-negative, got {depth}")
    if A.cols != B.rows:
        raise UsageError(f"cannot multiply {A.shape} by {B.shape}")
    a, b, c = scheme.dims
    for size, base, label in ((A.rows, a, "rows of A"), (A.cols, b, "inner dimension"), (B.cols, c, "columns of B")):
        if size % (base ** depth):
            raise LiftError(f"{label}={size} not divisible by {base}^{depth}", (A.shape, B.shape, depth))
    if depth:
        ensure_verified(scheme, A.field)
    return _lift(scheme, A, B, depth, counter)


# ----------------------------------------------------------------------
# Scheme files
# ----------------------------------------------------------------------

_HEADER_KEYS = ("dims", "rank", "vec", "char")


def dumps_scheme(scheme: BilinearScheme) -> str:
    a, b, c = scheme.dims
    lines = [
        "SCHEME v1",
        f"dims {a} {b} {c}",
        f"rank {scheme.rank}",
        "vec column-major",
        f"char {scheme.characteristic}",
    ]
    for label, rows in (("U", scheme.U), ("V", scheme.V), ("W", scheme.W)):
        lines.append(label)
        lines.extend(" ".join(str(v) for v in row) for row in rows)
    lines.append("END")
    return "\n".join(lines) + "\n"


def _to_column_major(rows: Sequence[Vector], nrows: int, ncols: int) -> Tuple[Vector, ...]:
    converted = []
    for row in rows:
        out = [0] * (nrows * ncols)
        for p in range(nrows):
            for q in range(ncols):
                out[p + nrows * q] = row[p * ncols + q]
        converted.append(tuple(out))
    return tuple(converted)


def _ints(tokens: Sequence[str], lineno: int) -> List[int]:
    try:
        return [int(tok) for tok in tokens]
    except ValueError as exc:
        raise SchemeParseError(f"line {lineno}: expected integers", " ".join(tokens)) from exc


def parse_scheme(text: str, name: str = "") -> BilinearScheme:
    """Parse the line-oriented scheme format. Parsing is strict."""
    lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if content:
            lines.append((lineno, content.split()))
    if not lines or lines[0][1] != ["SCHEME", "v1"]:
        raise SchemeParseError("missing 'SCHEME v1' header")

    header = {}
    pos = 1
    while pos < len(lines) and lines[pos][1][0] not in ("U", "V", "W", "END"):
        lineno, tokens = lines[pos]
        key, values = tokens[0], tokens[1:]
        if key not in _HEADER_KEYS:
            raise SchemeParseError(f"line {lineno}: unknown header key {key!r}")
        if key in header:
            raise SchemeParseError(f"line {lineno}: duplicate header key {key!r}")
        header[key] = (lineno, values)
        pos += 1
    for key in _HEADER_KEYS:
        if key not in header:
            raise SchemeParseError(f"missing header key {key!r}")

    lineno, values = header["dims"]
    dims = _ints(values, lineno)
    if len(dims) != 3 or min(dims) < 1:
        raise SchemeParseError(f"line {lineno}: dims needs three positive integers")
    lineno, values = header["rank"]
    rank_values = _ints(values, lineno)
    if len(rank_values) != 1 or rank_values[0] < 1:
        raise SchemeParseError(f"line {lineno}: rank needs one positive integer")
    rank = rank_values[0]
    lineno, values = header["vec"]
    if values not in (["column-major"], ["row-major"]):
        raise SchemeParseError(f"line {lineno}: vec must be column-major or row-major")
    order = values[0]
    lineno, values = header["char"]
    char_values = _ints(values, lineno)
    if len(char_values) != 1 or char_values[0] < 0:
        raise SchemeParseError(f"line {lineno}: char needs one non-negative integer")

    a, b, c = dims
    sections = {}
    for label, width in (("U", a * b), ("V", b * c), ("W", a * c)):
        if pos >= len(lines) or lines[pos][1] != [label]:
            raise SchemeParseError(f"expected section {label}")
        pos += 1
        rows = []
        for _ in range(rank):
            if pos >= len(lines):
                raise SchemeParseError(f"section {label} ends before {rank} rows")
            lineno, tokens = lines[pos]
            row = _ints(tokens, lineno)
            if len(row) != width:
                raise SchemeParseError(f"line {lineno}: {label} rows need {width} entries, got {len(row)}")
            rows.append(tuple(row))
            pos += 1
        sections[label] = tuple(rows)
    if pos >= len(lines) or lines[pos][1] != ["END"]:
        raise SchemeParseError(f"expected END after {rank} rows per section")
    if pos != len(lines) - 1:
        raise SchemeParseError(f"line {lines[pos + 1][0]}: content after END")

    U, V, W = sections["U"], sections["V"], sections["W"]
    if order == "row-major":
        U = _to_column_major(U, a, b)
        V = _to_column_major(V, b, c)
        W = _to_column_major(W, a, c)
    return BilinearScheme((a, b, c), U, V, W, characteristic=char_values[0], name=name)


def load_scheme(path: str | Path, field: FieldSpec | None = None, verify: bool = True) -> BilinearScheme:
    """Read and (by default) verify a scheme file.

    Without ``field`` the scheme is checked over its declared characteristic
    or, for ``char 0``, over the configured default prime.
    """
    path = Path(path)
    scheme = parse_scheme(path.read_text(encoding="utf-8"), name=path.stem)
    if field is None:
        field = FieldSpec(scheme.characteristic or get_settings().prime)
    if scheme.max_abs_coefficient() >= field.p:
        logger.warning(
            "scheme %s has coefficients of magnitude >= %d; distinct integer schemes may collide mod p",
            scheme.name,
            field.p,
        )
    if verify:
        ensure_verified(scheme, field)
    logger.debug("loaded scheme %s dims=%s rank=%d", scheme.name, scheme.dims, scheme.rank)
    return scheme


def save_scheme(scheme: BilinearScheme, path: str | Path) -> None:
    Path(path).write_text(dumps_scheme(scheme), encoding="utf-8")


def shipped_scheme_path(name: str = "strassen") -> Path:
    return Path(__file__).resolve().parent / "schemes" / f"{name}.scheme"


# ----------------------------------------------------------------------
# Agent operators
# ----------------------------------------------------------------------

class DenseOperator:
    """Plain ``O(n^3)`` local product."""

    name = "dense"

    def prepare(self, field: FieldSpec) -> None:
        return None

    def multiply(self, A: FieldMatrix, B: FieldMatrix, counter: MultCounter | None = None) -> FieldMatrix:
        return matmul_naive(A, B, counter)


@dataclass(frozen=True)
class SchemeOperator:
    """Local product through a verified bilinear scheme.

    At depth 0 a scheme whose dims match the operands is evaluated directly;
    otherwise it is lifted ``depth`` levels.
    """

    scheme: BilinearScheme
    depth: int = 1

    @property
    def name(self) -> str:
        return f"{self.scheme.name or 'scheme'}-d{self.depth}"

    def prepare(self, field: FieldSpec) -> None:
        ensure_verified(self.scheme, field)

    def multiply(self, A: FieldMatrix, B: FieldMatrix, counter: MultCounter | None = None) -> FieldMatrix:
        if self.depth == 0 and (A.rows, A.cols, B.cols) == self.scheme.dims:
            return apply_scheme(self.scheme, A, B, counter)
        return lift_apply(self.scheme, A, B, self.depth, counter)


OperatorChoice = Union[DenseOperator, SchemeOperator]
