"""Exact privacy audits by exhaustive enumeration over small prime fields.

Every audit walks *all* mask assignments and records exact counts; nothing
here is statistical. Runs are bounded by the enumeration budget from
:mod:`psmm.settings`.
"""
from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError, model_validator

from .bilinear import OperatorChoice
from .exceptions import BudgetError, ConfigError, PrivacyViolation, UsageError
from .field import FieldSpec
from .linalg import FieldMatrix, random_matrix, split_columns
from .protocol import AgentShare, ProtocolConfig, agent_compute, deal_shares
from .rng import RngStream
from .settings import get_settings
from .sharing import SharingParams, encode_a, encode_b, evaluate, symbolic_product

logger = logging.getLogger(__name__)

View = Tuple[int, ...]


class AuditParams(BaseModel):
    """Sharing shape for audits; unlike :class:`SharingParams` it admits ``k = m``."""

    model_config = {"frozen": True}

    m: int
    k: int
    t: int

    @model_validator(mode="after")
    def _check(self) -> "AuditParams":
        if self.t < 1 or not 1 <= self.k <= self.m or self.m % self.k:
            raise ValueError(f"need t >= 1, 1 <= k <= m and k | m; got m={self.m}, k={self.k}, t={self.t}")
        return self

    @classmethod
    def of(cls, m: int, k: int, t: int) -> "AuditParams":
        try:
            return cls(m=m, k=k, t=t)
        except ValidationError as exc:
            raise ConfigError(f"invalid audit parameters (m={m}, k={k}, t={t})", str(exc)) from exc


@dataclass(frozen=True)
class CoalitionView:
    """What a coalition holds: ``(alpha, share_a, share_b)`` per member, in id order."""

    coalition: Tuple[int, ...]
    views: Tuple[Tuple[int, FieldMatrix, FieldMatrix], ...]

    def key(self) -> View:
        out: List[int] = []
        for alpha, share_a, share_b in self.views:
            out.append(alpha)
            out.extend(share_a.entries())
            out.extend(share_b.entries())
        return tuple(out)


@dataclass
class ViewDistribution:
    histogram: Counter
    total: int
    view_scalars: int
    p: int
    vacuous: bool = False

    @property
    def is_uniform(self) -> bool:
        """Every possible view occurs, each equally often."""
        counts = set(self.histogram.values())
        return len(counts) == 1 and len(self.histogram) == self.p ** self.view_scalars


@dataclass(frozen=True)
class IndependenceVerdict:
    passed: bool
    differing_view: Optional[View] = None
    counts: Tuple[int, int] = (0, 0)


@dataclass(frozen=True)
class BijectionResult:
    passed: bool
    domain: int
    images: int


@dataclass(frozen=True)
class InvarianceReport:
    operator: str
    words_drawn: int
    deterministic: bool
    matches_dense: bool


@dataclass(frozen=True)
class LeakageReport:
    passed: bool
    impure_targets: Tuple[int, ...] = ()
    unmasked: Tuple[int, ...] = ()


# ----------------------------------------------------------------------
# Enumeration machinery
# ----------------------------------------------------------------------

def _budget(budget: Optional[int]) -> int:
    return budget if budget is not None else get_settings().enumeration_budget


def _check_budget(p: int, scalars: int, budget: Optional[int]) -> int:
    required = p ** scalars
    limit = _budget(budget)
    if required > limit:
        raise BudgetError(required, limit)
    return required


def _digits(lo: int, hi: int, p: int, width: int) -> np.ndarray:
    idx = np.arange(lo, hi, dtype=np.int64)
    powers = p ** np.arange(width, dtype=np.int64)
    return (idx[:, np.newaxis] // powers[np.newaxis, :]) % p


def _image_histogram(
    base: np.ndarray, linear: np.ndarray, p: int, required: int, workers: Optional[int] = None
) -> Counter:
    """Histogram of ``base + digits(i) @ linear (mod p)`` over ``i < required``."""
    width = linear.shape[0]
    if base.shape[0] == 0:
        return Counter({(): required})
    workers = workers or get_settings().workers
    step = max(1, -(-required // workers))
    bounds = [(lo, min(lo + step, required)) for lo in range(0, required, step)]

    def chunk(bound: Tuple[int, int]) -> Counter:
        lo, hi = bound
        images = (base[np.newaxis, :] + _digits(lo, hi, p, width) @ linear) % p
        rows, counts = np.unique(images, axis=0, return_counts=True)
        return Counter({tuple(int(v) for v in row): int(c) for row, c in zip(rows, counts)})

    histogram: Counter = Counter()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(chunk, bounds):
            histogram.update(part)
    return histogram


def _check_points(points: Sequence[int], p: int) -> List[int]:
    values = [int(a) % p for a in points]
    if 0 in values or len(set(values)) != len(values):
        raise UsageError(f"evaluation points must be distinct and nonzero mod {p}, got {list(points)}")
    return values


@dataclass(frozen=True)
class ViewMap:
    """A coalition's view as an affine function of the flattened masks.

    Masks are ordered ``R_1..R_{t-1}`` for ``A`` then for ``B``, each row-major.
    """

    base: np.ndarray
    linear: np.ndarray
    p: int

    @property
    def mask_scalars(self) -> int:
        return self.linear.shape[0]

    def image(self, masks: Sequence[int]) -> View:
        vector = np.asarray(list(masks), dtype=np.int64)
        return tuple(int(v) for v in (self.base + vector @ self.linear) % self.p)


def _observed(
    blocks_a: List[FieldMatrix],
    blocks_b: List[FieldMatrix],
    masks_a: List[FieldMatrix],
    masks_b: List[FieldMatrix],
    values: List[int],
    members: List[int],
) -> np.ndarray:
    g_a, g_b = encode_a(blocks_a, masks_a), encode_b(blocks_b, masks_b)
    shares = [AgentShare(n, values[n], evaluate(g_a, values[n]), evaluate(g_b, values[n])) for n in members]
    return np.asarray(coalition_view(shares, members).key(), dtype=np.int64)


def coalition_view_map(
    params: SharingParams | AuditParams,
    field: FieldSpec,
    A: FieldMatrix,
    B: FieldMatrix,
    coalition: Iterable[int],
    points: Sequence[int],
) -> ViewMap:
    """Run the encoders once per unit mask to recover the view's affine map."""
    p, k = field.p, params.k
    values = _check_points(points, p)
    members = sorted(set(coalition))
    if any(not 0 <= n < len(values) for n in members):
        raise UsageError(f"coalition {members} refers to agents outside 0..{len(values) - 1}")
    blocks_a = split_columns(A, k)
    blocks_b = split_columns(B, k)
    rows, cols = blocks_a[0].shape
    block = rows * cols
    n_masks = params.t - 1

    def masks(unit: Optional[int]) -> List[FieldMatrix]:
        out = []
        for ell in range(n_masks):
            raw = np.zeros(block, dtype=np.int64)
            if unit is not None and unit // block == ell:
                raw[unit % block] = 1
            out.append(FieldMatrix(raw.reshape(rows, cols), field))
        return out

    zero = masks(None)
    base = _observed(blocks_a, blocks_b, zero, zero, values, members)
    linear = np.zeros((2 * n_masks * block, base.shape[0]), dtype=np.int64)
    for unit in range(n_masks * block):
        shifted = _observed(blocks_a, blocks_b, masks(unit), zero, values, members)
        linear[unit] = (shifted - base) % p
        shifted = _observed(blocks_a, blocks_b, zero, masks(unit), values, members)
        linear[n_masks * block + unit] = (shifted - base) % p
    return ViewMap(base, linear, p)


def enumerate_view_distribution(
    params: SharingParams | AuditParams,
    field: FieldSpec,
    A: FieldMatrix,
    B: FieldMatrix,
    coalition: Iterable[int],
    points: Sequence[int],
    budget: Optional[int] = None,
    workers: Optional[int] = None,
) -> ViewDistribution:
    """Exact distribution of a coalition's view over all mask assignments.

    ``coalition`` holds agent ids, i.e. indices into ``points``.
    """
    p, t = field.p, params.t
    members = sorted(set(coalition))
    if len(members) > t - 1:
        logger.info("coalition of %d exceeds the privacy threshold t-1=%d", len(members), t - 1)
    rows, cols = split_columns(A, params.k)[0].shape
    block = rows * cols
    required = _check_budget(p, 2 * (t - 1) * block, budget)
    if t == 1:
        logger.warning("t=1: shares carry no masks, privacy is vacuous")

    view_map = coalition_view_map(params, field, A, B, members, points)
    histogram = _image_histogram(view_map.base, view_map.linear, p, required, workers)
    # alpha is public, so only the share entries are free
    return ViewDistribution(histogram, required, len(members) * 2 * block, p, vacuous=t == 1)


def coalition_view(
    shares: Sequence[AgentShare], coalition: Iterable[int]
) -> CoalitionView:
    """Collect the view of ``coalition`` from dealt shares."""
    members = tuple(sorted(set(coalition)))
    by_id = {share.agent_id: share for share in shares}
    views = tuple((int(by_id[n].alpha), by_id[n].share_a, by_id[n].share_b) for n in members)
    return CoalitionView(members, views)


def assert_secret_independence(
    params: SharingParams | AuditParams,
    field: FieldSpec,
    secrets: Tuple[FieldMatrix, FieldMatrix],
    other: Tuple[FieldMatrix, FieldMatrix],
    coalition: Iterable[int],
    points: Sequence[int],
    budget: Optional[int] = None,
) -> IndependenceVerdict:
    """Compare the exact view distributions for two secret pairs."""
    coalition = list(coalition)
    first = enumerate_view_distribution(params, field, *secrets, coalition, points, budget)
    second = enumerate_view_distribution(params, field, *other, coalition, points, budget)
    if first.histogram == second.histogram:
        return IndependenceVerdict(True)
    for view in sorted(set(first.histogram) | set(second.histogram)):
        a, b = first.histogram.get(view, 0), second.histogram.get(view, 0)
        if a != b:
            return IndependenceVerdict(False, view, (a, b))
    return IndependenceVerdict(False)  # pragma: no cover - histograms differ somewhere


def masking_bijection_check(
    p: int,
    t: int,
    shape: Tuple[int, int] = (1, 1),
    points: Optional[Sequence[int]] = None,
    budget: Optional[int] = None,
) -> BijectionResult:
    """Check that ``sum_l M_l x^(l-1)`` evaluated at ``t - 1`` points is injective in the ``M_l``.

    Points default to ``1..t-1``; they are not required to be distinct, so
    degenerate choices can be shown to fail.
    """
    if t < 1:
        raise UsageError("t must be at least 1")
    field = FieldSpec(p)
    n = t - 1
    points = list(points) if points is not None else list(range(1, n + 1))
    if len(points) != n:
        raise UsageError(f"need {n} evaluation points, got {len(points)}")
    block = shape[0] * shape[1]
    scalars = n * block
    required = _check_budget(field.p, scalars, budget)
    linear = np.zeros((scalars, scalars), dtype=np.int64)
    for row, alpha in enumerate(points):
        for ell in range(n):
            scale = pow(int(alpha), ell, p)
            for e in range(block):
                linear[ell * block + e, row * block + e] = scale
    histogram = _image_histogram(np.zeros(scalars, dtype=np.int64), linear, p, required)
    return BijectionResult(len(histogram) == required, required, len(histogram))


# ----------------------------------------------------------------------
# Operator and controller audits
# ----------------------------------------------------------------------

def _default_share() -> AgentShare:
    field = FieldSpec(get_settings().prime)
    params = SharingParams.of(8, 2, 2)
    rng = RngStream(0, "postprocessing")
    A = random_matrix(8, 8, rng.derive("A"), field)
    B = random_matrix(8, 8, rng.derive("B"), field)
    shares, _ = deal_shares(ProtocolConfig(params, 8, field), A, B, rng)
    return shares[0]


def postprocessing_invariance(operator: OperatorChoice, share: AgentShare | None = None) -> InvarianceReport:
    """Confirm the agent output is a deterministic function of its share.

    Raises :class:`PrivacyViolation` if the operator draws randomness or two
    runs on the same share disagree.
    """
    share = share or _default_share()
    operator.prepare(share.share_a.field)
    before = RngStream.words_drawn()
    first = agent_compute(share, operator)
    drawn = RngStream.words_drawn() - before
    if drawn:
        raise PrivacyViolation(f"operator {operator.name} drew {drawn} random words during agent compute")
    second = agent_compute(share, operator)
    if first.m_eval != second.m_eval:
        raise PrivacyViolation(f"operator {operator.name} is not a function of the share alone")
    dense = agent_compute(share)
    return InvarianceReport(operator.name, drawn, True, first.m_eval == dense.m_eval)


def controller_leakage_check(k: int, t: int) -> LeakageReport:
    """Symbolic check of what the controller interpolates.

    Each target exponent must carry exactly one unmasked ``A_i^T B_j`` and
    every other exponent at least one mask symbol in each term.
    """
    product = symbolic_product(k, t)
    impure, unmasked = [], []
    for exp, terms in sorted(product.items()):
        if exp < k * k:
            i, j = exp % k + 1, exp // k + 1
            if terms != Counter({(("A", i), ("B", j)): 1}):
                impure.append(exp)
        elif any(left[0] == "A" and right[0] == "B" for left, right in terms):
            unmasked.append(exp)
    return LeakageReport(not impure and not unmasked, tuple(impure), tuple(unmasked))


def beaver_opening_bijection(
    p: int, dims: Tuple[int, int, int] = (1, 1, 1), budget: Optional[int] = None
) -> BijectionResult:
    """For every secret ``(A, B)``, check ``(R1, R2) -> (A - R1, B - R2)`` is a bijection."""
    field = FieldSpec(p)
    a, b, c = dims
    scalars = a * b + b * c
    required = _check_budget(field.p, 2 * scalars, budget)
    per_secret = field.p ** scalars
    masks = _digits(0, per_secret, field.p, scalars)
    images_total = 0
    passed = True
    for secret_index in range(per_secret):
        secret = _digits(secret_index, secret_index + 1, field.p, scalars)[0]
        opened = (secret[np.newaxis, :] - masks) % field.p
        distinct = np.unique(opened, axis=0).shape[0]
        images_total += distinct
        passed = passed and distinct == per_secret
    return BijectionResult(passed, required, images_total)
