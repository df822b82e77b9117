"""Polynomial encoders, the support calculus of the product polynomial and
the additive/Beaver sharing primitives.

``g_A`` carries the column blocks of ``A`` at exponents ``0..k-1`` and ``g_B``
carries those of ``B`` at ``0, k, .., k(k-1)``; both append ``t - 1`` uniform
mask blocks at ``k^2 .. k^2+t-2``. In ``M(x) = g_A(x)^T g_B(x)`` the target
block ``A_i^T B_j`` then sits alone at exponent ``(i-1) + k(j-1)``.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

from pydantic import BaseModel, ValidationError, model_validator

from .exceptions import ConfigError, EncodingError, UsageError
from .field import FieldElement, FieldSpec
from .linalg import FieldMatrix, MultCounter, matmul_naive, random_matrix
from .rng import RngStream

logger = logging.getLogger(__name__)

Symbol = Tuple[str, int]


class SharingParams(BaseModel):
    """Dimensions of one sharing: ``m x m`` secrets split into ``k`` column blocks,
    private against ``t - 1`` colluders."""

    model_config = {"frozen": True}

    m: int
    k: int
    t: int

    @model_validator(mode="after")
    def _check(self) -> "SharingParams":
        if self.t < 1:
            raise ValueError(f"t must be at least 1, got {self.t}")
        if not 1 <= self.k < self.m:
            raise ValueError(f"need 1 <= k < m, got k={self.k}, m={self.m}")
        if self.m % self.k:
            raise ValueError(f"k={self.k} does not divide m={self.m}")
        return self

    @classmethod
    def of(cls, m: int, k: int, t: int) -> "SharingParams":
        try:
            return cls(m=m, k=k, t=t)
        except ValidationError as exc:
            raise ConfigError(f"invalid sharing parameters (m={m}, k={k}, t={t})", str(exc)) from exc

    @property
    def block_cols(self) -> int:
        return self.m // self.k

    @property
    def n_masks(self) -> int:
        return self.t - 1


@dataclass(frozen=True)
class EncodedPolynomial:
    """Sparse polynomial with matrix coefficients: exponent -> block."""

    coeffs: Dict[int, FieldMatrix]
    block_shape: Tuple[int, int]

    def exponents(self) -> List[int]:
        return sorted(self.coeffs)

    @property
    def field(self) -> FieldSpec:
        return next(iter(self.coeffs.values())).field


def _encode(
    blocks: Sequence[FieldMatrix],
    masks: Sequence[FieldMatrix],
    structured: Sequence[int],
    mask_base: int,
) -> EncodedPolynomial:
    if not blocks:
        raise EncodingError("at least one data block is required")
    shape = blocks[0].shape
    field = blocks[0].field
    for blk in list(blocks) + list(masks):
        if blk.shape != shape:
            raise EncodingError(f"block shape {blk.shape} differs from {shape}")
        if blk.field != field:
            raise EncodingError(f"block over F_{blk.field.p} mixed with F_{field.p}")
    coeffs = {exp: blk for exp, blk in zip(structured, blocks)}
    for ell, mask in enumerate(masks):
        coeffs[mask_base + ell] = mask
    return EncodedPolynomial(coeffs, shape)


def encode_a(blocks: Sequence[FieldMatrix], masks: Sequence[FieldMatrix]) -> EncodedPolynomial:
    """``g_A(x) = sum_i A_i x^(i-1) + sum_l R_l x^(k^2+l-1)``."""
    k = len(blocks)
    return _encode(blocks, masks, range(k), k * k)


def encode_b(blocks: Sequence[FieldMatrix], masks: Sequence[FieldMatrix]) -> EncodedPolynomial:
    """``g_B(x) = sum_j B_j x^(k(j-1)) + sum_l R_l x^(k^2+l-1)``."""
    k = len(blocks)
    return _encode(blocks, masks, [k * j for j in range(k)], k * k)


def evaluate(
    poly: EncodedPolynomial, alpha: FieldElement | int, counter: MultCounter | None = None
) -> FieldMatrix:
    """Evaluate ``poly`` at the public point ``alpha``.

    Each term costs one scaling of a block by ``alpha^nu``; the scalings are
    charged to ``counter`` when given.
    """
    field = poly.field
    GF = field.GF
    a = GF(int(alpha) % field.p)
    rows, cols = poly.block_shape
    acc = GF.Zeros(poly.block_shape)
    for exp in poly.exponents():
        acc = acc + (a ** exp) * poly.coeffs[exp].data
    if counter is not None:
        counter.scalar_mults += len(poly.coeffs) * rows * cols
    return FieldMatrix(acc, field)


# ----------------------------------------------------------------------
# Support calculus
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class SupportSets:
    K1: Tuple[int, ...]
    K2: Tuple[int, ...]
    K3: Tuple[int, ...]
    K4: Tuple[int, ...]
    union: Tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.union)

    @property
    def masked(self) -> Tuple[int, ...]:
        """Exponents outside ``K1``; their coefficients are pure noise."""
        targets = set(self.K1)
        return tuple(e for e in self.union if e not in targets)


def _check_kt(k: int, t: int) -> None:
    if k < 1 or t < 1:
        raise UsageError(f"need k >= 1 and t >= 1, got k={k}, t={t}")


def symbolic_product_support(k: int, t: int) -> SupportSets:
    """Closed-form exponent sets of ``M(x)``.

    Bands that only mask terms can populate (``K2``, ``K3``, ``K4``) are empty
    when ``t = 1``.
    """
    _check_kt(k, t)
    kk = k * k
    K1 = tuple(range(kk))
    if t == 1:
        K2 = K3 = K4 = ()
    else:
        K2 = tuple(range(kk, kk + k + t - 2))
        K3 = tuple(sorted({kk + i * k + j for i in range(k) for j in range(t - 1)}))
        K4 = tuple(range(2 * kk, 2 * kk + 2 * t - 3))
    union = tuple(sorted(set(K1) | set(K2) | set(K3) | set(K4)))
    return SupportSets(K1, K2, K3, K4, union)


def _formal_terms(k: int, t: int) -> Tuple[List[Tuple[int, Symbol]], List[Tuple[int, Symbol]]]:
    left = [(i - 1, ("A", i)) for i in range(1, k + 1)]
    left += [(k * k + ell - 1, ("RA", ell)) for ell in range(1, t)]
    right = [(k * (j - 1), ("B", j)) for j in range(1, k + 1)]
    right += [(k * k + ell - 1, ("RB", ell)) for ell in range(1, t)]
    return left, right


def symbolic_product(k: int, t: int) -> Dict[int, Counter]:
    """Multiply ``g_A^T g_B`` with every block and mask as a distinct indeterminate.

    Returns ``exponent -> Counter((left_symbol, right_symbol))``; symbols are
    ``("A", i)``, ``("RA", l)``, ``("B", j)`` and ``("RB", l)`` (1-based).
    """
    _check_kt(k, t)
    left, right = _formal_terms(k, t)
    product: Dict[int, Counter] = {}
    for e_left, sym_left in left:
        for e_right, sym_right in right:
            product.setdefault(e_left + e_right, Counter())[(sym_left, sym_right)] += 1
    return product


def threshold_closed_form(k: int, t: int) -> int:
    """``min(2k^2 + 2t - 3, k^2 + kt + t - 2)``: certified bound on the support size."""
    _check_kt(k, t)
    return min(2 * k * k + 2 * t - 3, k * k + k * t + t - 2)


def threshold_regime(k: int, t: int) -> str:
    """Name the branch of :func:`threshold_closed_form` that attains the minimum."""
    _check_kt(k, t)
    band = 2 * k * k + 2 * t - 3
    cross = k * k + k * t + t - 2
    if band < cross:
        return "2k2+2t-3"
    if cross < band:
        return "k2+kt+t-2"
    return "tie"


def bgw_threshold(k: int, t: int) -> int:
    _check_kt(k, t)
    return k * k * (2 * t - 1)


def struct_threshold(k: int, t: int, s: int) -> int:
    """Reduced-DOF bound ``min(2s + 2t - 3, s + ks + t - 2)`` for ``1 <= s <= k^2``.

    The value is reported as stated even where it disagrees with the exact
    unknown count of the reduced system.
    """
    _check_kt(k, t)
    if not 1 <= s <= k * k:
        raise UsageError(f"latent dimension s={s} outside [1, {k * k}]")
    value = min(2 * s + 2 * t - 3, s + k * s + t - 2)
    if s == k * k and value != threshold_closed_form(k, t):
        logger.warning(
            "structured bound at s=k^2 gives %d but the full threshold is %d for k=%d, t=%d",
            value,
            threshold_closed_form(k, t),
            k,
            t,
        )
    return value


# ----------------------------------------------------------------------
# Additive sharing and Beaver triples
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class AdditiveShares:
    """Additive shares; party ``i`` holds ``parts[i]``."""

    parts: Tuple[FieldMatrix, ...]

    def __post_init__(self) -> None:
        if not self.parts:
            raise UsageError("additive sharing needs at least one party")
        shape = self.parts[0].shape
        if any(part.shape != shape for part in self.parts):
            raise UsageError("all additive shares must have the same shape")

    @property
    def n_parties(self) -> int:
        return len(self.parts)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.parts[0].shape

    @property
    def field(self) -> FieldSpec:
        return self.parts[0].field


def share_additively(secret: FieldMatrix, n_parties: int, rng: RngStream) -> AdditiveShares:
    """Split ``secret`` into ``n_parties`` uniformly random summands."""
    if n_parties < 1:
        raise UsageError("additive sharing needs at least one party")
    parts = [random_matrix(secret.rows, secret.cols, rng.derive("part", i), secret.field) for i in range(n_parties - 1)]
    last = secret
    for part in parts:
        last = last - part
    return AdditiveShares(tuple(parts) + (last,))


def open_shares(shares: AdditiveShares) -> FieldMatrix:
    """Recombine shares. Only the dealer and test harness ever do this."""
    total = shares.parts[0]
    for part in shares.parts[1:]:
        total = total + part
    return total


@dataclass(frozen=True)
class BeaverTriple:
    """Shared ``(R1, R2, R3)`` with ``R3 = R1 R2``."""

    R1: AdditiveShares
    R2: AdditiveShares
    R3: AdditiveShares


def deal_beaver_triple(a: int, b: int, c: int, n_parties: int, rng: RngStream, field: FieldSpec) -> BeaverTriple:
    R1 = random_matrix(a, b, rng.derive("R1"), field)
    R2 = random_matrix(b, c, rng.derive("R2"), field)
    R3 = matmul_naive(R1, R2)
    return BeaverTriple(
        share_additively(R1, n_parties, rng.derive("R1-shares")),
        share_additively(R2, n_parties, rng.derive("R2-shares")),
        share_additively(R3, n_parties, rng.derive("R3-shares")),
    )


def beaver_open(share_x: AdditiveShares, share_r: AdditiveShares) -> FieldMatrix:
    """Publicly open ``X - R`` from both sharings (``D`` or ``E``)."""
    if share_x.n_parties != share_r.n_parties:
        raise UsageError(f"party count mismatch {share_x.n_parties} vs {share_r.n_parties}")
    if share_x.shape != share_r.shape:
        raise UsageError(f"shape mismatch {share_x.shape} vs {share_r.shape}")
    opened = share_x.parts[0] - share_r.parts[0]
    for x, r in zip(share_x.parts[1:], share_r.parts[1:]):
        opened = opened + (x - r)
    return opened


def beaver_multiply(
    shares_a: AdditiveShares,
    shares_b: AdditiveShares,
    triple: BeaverTriple,
    counter: MultCounter | None = None,
) -> AdditiveShares:
    """Shares of ``A B`` from shares of ``A`` (a x b) and ``B`` (b x c).

    Party ``i`` computes ``R3_i + D R2_i + R1_i E`` from its own shares and the
    public openings; party 0 alone adds ``D E``.
    """
    if shares_a.shape[1] != shares_b.shape[0]:
        raise UsageError(f"cannot multiply {shares_a.shape} by {shares_b.shape}")
    if triple.R3.shape != (shares_a.shape[0], shares_b.shape[1]):
        raise UsageError(f"triple product shape {triple.R3.shape} does not fit")
    D = beaver_open(shares_a, triple.R1)
    E = beaver_open(shares_b, triple.R2)
    parts = []
    for i in range(shares_a.n_parties):
        part = (
            triple.R3.parts[i]
            + matmul_naive(D, triple.R2.parts[i], counter)
            + matmul_naive(triple.R1.parts[i], E, counter)
        )
        if i == 0:
            part = part + matmul_naive(D, E, counter)
        parts.append(part)
    return AdditiveShares(tuple(parts))
