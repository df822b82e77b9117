"""End-to-end simulated secure multiplication of ``A^T B``.

A dealer encodes the secrets into two masked polynomials and hands each agent
their evaluations at a public point. Every agent multiplies its two shares
locally, densely or through a verified bilinear scheme, and the controller
interpolates the product polynomial blockwise to recover ``A^T B``.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bilinear import DenseOperator, OperatorChoice
from .cache import shared_cache
from .exceptions import (
    ConfigError,
    InsufficientShares,
    PointSelectionError,
    SingularSystem,
    UsageError,
)
from .field import FieldElement, FieldSpec
from .linalg import (
    FieldMatrix,
    MultCounter,
    concat_columns,
    partition_columns,
    random_matrix,
    stack_blocks,
    transpose,
)
from .rng import RngStream
from .settings import get_settings
from .sharing import (
    EncodedPolynomial,
    SharingParams,
    SupportSets,
    encode_a,
    encode_b,
    evaluate,
    symbolic_product,
    symbolic_product_support,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DofConstraint:
    """Known linear structure ``Z_ij = sum_l gamma[i + k j, l] Lambda_l`` of the target blocks."""

    s: int
    gamma: FieldMatrix

    def __post_init__(self) -> None:
        k = math.isqrt(self.gamma.rows)
        if k * k != self.gamma.rows:
            raise UsageError(f"gamma needs k^2 rows, got {self.gamma.rows}")
        if self.gamma.cols != self.s or not 1 <= self.s <= self.gamma.rows:
            raise UsageError(f"gamma must be {self.gamma.rows} x s with 1 <= s <= k^2, s={self.s}")
        rank = int(np.linalg.matrix_rank(self.gamma.data))
        if rank != self.s:
            raise UsageError(f"gamma has rank {rank}, needs full column rank {self.s}")

    @property
    def k(self) -> int:
        return math.isqrt(self.gamma.rows)


@dataclass
class ProtocolConfig:
    params: SharingParams
    n_agents: int
    field: FieldSpec
    seed: int = 0
    operator: OperatorChoice = dc_field(default_factory=DenseOperator)
    dof: Optional[DofConstraint] = None
    workers: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n_agents < 1:
            raise ConfigError(f"need at least one agent, got {self.n_agents}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must fit in 64 bits, got {self.seed}")
        if self.n_agents > self.field.p - 1:
            raise ConfigError(
                f"F_{self.field.p} has only {self.field.p - 1} nonzero points for {self.n_agents} agents"
            )
        if self.dof is None:
            needed = symbolic_product_support(self.params.k, self.params.t).size
            if self.n_agents < needed:
                raise ConfigError(f"{self.n_agents} agents cannot decode a support of size {needed}")
        elif self.dof.k != self.params.k:
            raise ConfigError(f"DOF constraint is for k={self.dof.k}, sharing uses k={self.params.k}")


@dataclass(frozen=True)
class AgentShare:
    agent_id: int
    alpha: FieldElement
    share_a: FieldMatrix
    share_b: FieldMatrix


@dataclass(frozen=True)
class AgentResult:
    agent_id: int
    alpha: FieldElement
    m_eval: FieldMatrix
    counter: MultCounter
    upload_elements: int
    download_elements: int

    @property
    def mults(self) -> int:
        return self.counter.total


@dataclass
class DecodeReport:
    mode: str
    unknowns: int
    equations: int
    rank: int
    rows_used: Tuple[int, ...]
    consistent: bool
    residual_rows: Tuple[int, ...]
    mults: int

    def as_dict(self) -> Dict[str, object]:
        return {
            "mode": self.mode,
            "unknowns": self.unknowns,
            "equations": self.equations,
            "rank": self.rank,
            "rows_used": list(self.rows_used),
            "consistent": self.consistent,
            "residual_rows": list(self.residual_rows),
            "mults": self.mults,
        }


@dataclass
class DecoderContext:
    params: SharingParams
    field: FieldSpec
    points: Tuple[FieldElement, ...]
    support: SupportSets
    dealer: MultCounter = dc_field(default_factory=MultCounter)
    report: Optional[DecodeReport] = None


def agent_traffic(m: int, k: int) -> Tuple[int, int]:
    """Elements each agent receives (two ``m x m/k`` shares) and sends back (``(m/k)^2``)."""
    width = m // k
    return 2 * m * width, width * width


def packed_bytes(elements: int, element_bits: int) -> int:
    return (elements * element_bits + 7) // 8


@dataclass
class Transcript:
    """Communication and multiplication accounting for one run."""

    n_agents: int
    operator: str
    element_bits: int
    upload_elements_per_agent: int
    download_elements_per_agent: int
    dealer: MultCounter
    agents: MultCounter
    decoder_mults: int
    decode: Optional[DecodeReport] = None
    results: Tuple[AgentResult, ...] = ()

    @property
    def upload_bytes_per_agent(self) -> int:
        return packed_bytes(self.upload_elements_per_agent, self.element_bits)

    @property
    def download_bytes_per_agent(self) -> int:
        return packed_bytes(self.download_elements_per_agent, self.element_bits)

    @property
    def total_bytes(self) -> int:
        return self.n_agents * (self.upload_bytes_per_agent + self.download_bytes_per_agent)

    @property
    def total_mults(self) -> int:
        return self.dealer.total + self.agents.total + self.decoder_mults

    def metrics(self) -> Dict[str, object]:
        return {
            "n_agents": self.n_agents,
            "operator": self.operator,
            "upload_elements_per_agent": self.upload_elements_per_agent,
            "download_elements_per_agent": self.download_elements_per_agent,
            "upload_bytes_per_agent": self.upload_bytes_per_agent,
            "download_bytes_per_agent": self.download_bytes_per_agent,
            "total_bytes": self.total_bytes,
            "dealer": self.dealer.metrics(),
            "agents": self.agents.metrics(),
            "decoder_mults": self.decoder_mults,
            "total_mults": self.total_mults,
            "decode": self.decode.as_dict() if self.decode else None,
        }

    def export_report(self) -> str:
        return json.dumps(self.metrics(), indent=2)


# ----------------------------------------------------------------------
# Evaluation points
# ----------------------------------------------------------------------

def vandermonde(points: Sequence[FieldElement | int], exponents: Sequence[int], field: FieldSpec):
    """Generalized Vandermonde matrix ``V[n, nu] = alpha_n ** exponents[nu]``."""
    GF = field.GF
    alphas = GF(np.array([int(a) % field.p for a in points], dtype=np.int64))
    exps = np.array(list(exponents), dtype=np.int64)
    if not len(exps):
        return GF.Zeros((len(alphas), 0))
    return alphas[:, np.newaxis] ** exps[np.newaxis, :]


def _independent_rows(system) -> List[int]:
    """Indices of a maximal set of linearly independent rows."""
    if system.shape[1] == 0:
        return []
    reduced = system.T.row_reduce()
    pivots = []
    for row in reduced.view(np.ndarray):
        nonzero = np.flatnonzero(row)
        if nonzero.size:
            pivots.append(int(nonzero[0]))
    return pivots


def _rank(system) -> int:
    if system.shape[0] == 0 or system.shape[1] == 0:
        return 0
    return int(np.linalg.matrix_rank(system))


def _candidate_points(n: int, field: FieldSpec, rng: RngStream) -> List[int]:
    chosen: List[int] = []
    seen = set()
    while len(chosen) < n:
        for value in rng.residues(field.p - 1, n - len(chosen)):
            point = int(value) + 1
            if point not in seen:
                seen.add(point)
                chosen.append(point)
    return chosen


def reduced_system(
    points: Sequence[FieldElement | int], support: SupportSets, dof: "DofConstraint", field: FieldSpec
):
    """Columns for the ``s`` latent blocks followed by one per masked exponent."""
    latent_cols = vandermonde(points, support.K1, field) @ dof.gamma.data
    return np.concatenate([latent_cols, vandermonde(points, support.masked, field)], axis=1)


def select_points(
    n: int,
    exponents: Sequence[int],
    field: FieldSpec,
    rng: RngStream,
    system: Callable[[Sequence[int]], object] | None = None,
) -> List[FieldElement]:
    """Pick ``n`` distinct nonzero points whose decoding system has full rank.

    ``system`` builds the matrix to check from candidate points and defaults
    to the Vandermonde matrix over ``exponents``. Tries ``1..n`` first and
    falls back to uniform draws from ``rng``.
    """
    if n > field.p - 1:
        raise ConfigError(f"F_{field.p} has only {field.p - 1} nonzero points, {n} requested")
    build = system or (lambda pts: vandermonde(pts, exponents, field))
    candidate = list(range(1, n + 1))
    attempts = get_settings().max_point_attempts
    for attempt in range(attempts + 1):
        matrix = build(candidate)
        if _rank(matrix) == min(n, matrix.shape[1]):
            return [field.element(a) for a in candidate]
        if attempt == attempts:
            break
        logger.warning("evaluation points singular on attempt %d, resampling", attempt)
        candidate = _candidate_points(n, field, rng.derive("attempt", attempt))
    raise PointSelectionError(
        f"no invertible evaluation system after {attempts} resamples over F_{field.p}",
        (n, len(exponents)),
    )


# ----------------------------------------------------------------------
# Dealing and local computation
# ----------------------------------------------------------------------

def _check_secret(name: str, M: FieldMatrix, config: ProtocolConfig) -> None:
    m = config.params.m
    if M.shape != (m, m):
        raise UsageError(f"{name} must be {m}x{m}, got {M.shape}")
    if M.field != config.field:
        raise UsageError(f"{name} lives in F_{M.field.p}, protocol runs over F_{config.field.p}")


def encode_secrets(
    params: SharingParams, A: FieldMatrix, B: FieldMatrix, rng: RngStream
) -> Tuple[EncodedPolynomial, EncodedPolynomial]:
    """Partition both secrets and attach ``t - 1`` fresh masks to each polynomial."""
    field = A.field
    width = params.block_cols
    masks_a = [random_matrix(params.m, width, rng.derive("mask-a", ell), field) for ell in range(params.n_masks)]
    masks_b = [random_matrix(params.m, width, rng.derive("mask-b", ell), field) for ell in range(params.n_masks)]
    return (
        encode_a(partition_columns(A, params.k), masks_a),
        encode_b(partition_columns(B, params.k), masks_b),
    )


def deal_shares(
    config: ProtocolConfig, A: FieldMatrix, B: FieldMatrix, rng: RngStream | None = None
) -> Tuple[List[AgentShare], DecoderContext]:
    _check_secret("A", A, config)
    _check_secret("B", B, config)
    rng = rng or RngStream(config.seed, "psmm")
    params = config.params
    g_a, g_b = encode_secrets(params, A, B, rng)
    support = symbolic_product_support(params.k, params.t)
    system = None
    if config.dof is not None:
        dof = config.dof
        system = lambda pts: reduced_system(pts, support, dof, config.field)
    points = select_points(config.n_agents, support.union, config.field, rng.derive("points"), system)
    dealer = MultCounter()
    shares = [
        AgentShare(n, alpha, evaluate(g_a, alpha, dealer), evaluate(g_b, alpha, dealer))
        for n, alpha in enumerate(points)
    ]
    logger.info(
        "dealt %d shares (m=%d, k=%d, t=%d, support=%d)",
        len(shares),
        params.m,
        params.k,
        params.t,
        support.size,
    )
    return shares, DecoderContext(params, config.field, tuple(points), support, dealer)


def agent_compute(
    share: AgentShare, operator: OperatorChoice | None = None, counter: MultCounter | None = None
) -> AgentResult:
    """Compute ``M(alpha) = share_a^T share_b`` with ``operator``."""
    operator = operator or DenseOperator()
    local = MultCounter()
    m_eval = operator.multiply(transpose(share.share_a), share.share_b, local)
    if counter is not None:
        counter.merge(local)
    m, width = share.share_a.shape
    upload, download = agent_traffic(m, m // width)
    logger.debug("agent %d computed with %s (%d mults)", share.agent_id, operator.name, local.total)
    return AgentResult(share.agent_id, share.alpha, m_eval, local, upload, download)


# ----------------------------------------------------------------------
# Reconstruction
# ----------------------------------------------------------------------

def _evaluations(results: Sequence[AgentResult], field: FieldSpec):
    return field.GF(np.stack([r.m_eval.data.view(np.ndarray).reshape(-1) for r in results]))


def _solve(system, values, rows: List[int], cache_key=None):
    square = system[rows]
    if cache_key is None:
        inverse = np.linalg.inv(square)
    else:
        inverse = shared_cache().get_or_compute(cache_key, lambda: np.linalg.inv(square))
    return inverse @ values[rows]


def _residual(system, values, solution, rows: List[int]) -> Tuple[int, ...]:
    extra = [i for i in range(system.shape[0]) if i not in set(rows)]
    if not extra:
        return ()
    mismatch = (system[extra] @ solution) != values[extra]
    return tuple(extra[i] for i in np.flatnonzero(np.any(mismatch.view(np.ndarray), axis=1)))


def _stack_targets(coeffs, k: int, width: int, field: FieldSpec) -> FieldMatrix:
    # row i + k*j of coeffs holds the vectorised block Z_ij
    grid = [
        [FieldMatrix(coeffs[i + k * j].reshape(width, width), field) for j in range(k)]
        for i in range(k)
    ]
    return stack_blocks(grid)


def _check_results(results: Sequence[AgentResult], context: DecoderContext) -> None:
    width = context.params.block_cols
    for r in results:
        if r.m_eval.shape != (width, width):
            raise UsageError(f"agent {r.agent_id} returned shape {r.m_eval.shape}, expected {(width, width)}")
        if r.m_eval.field != context.field:
            raise UsageError(f"agent {r.agent_id} answered over the wrong field")


def reconstruct(results: Sequence[AgentResult], context: DecoderContext) -> FieldMatrix:
    """Interpolate every support coefficient and assemble ``A^T B`` from ``K1``.

    One inverse of the support-restricted Vandermonde system is applied to all
    ``(m/k)^2`` entry positions. Extra results beyond the support size are
    checked against the solution.
    """
    _check_results(results, context)
    exponents = context.support.union
    needed = len(exponents)
    if len(results) < needed:
        raise InsufficientShares(needed, len(results))
    field = context.field
    alphas = [r.alpha for r in results]
    system = vandermonde(alphas, exponents, field)
    rows = _independent_rows(system)
    if len(rows) < needed:
        raise SingularSystem(f"evaluation system has rank {len(rows)} < {needed}", needed)
    values = _evaluations(results, field)
    key = ("vinv", field.p, tuple(int(alphas[i]) for i in rows), tuple(exponents))
    coeffs = _solve(system, values, rows, key)
    residual = _residual(system, values, coeffs, rows)
    if residual:
        logger.warning("results %s disagree with the interpolated product", residual)

    k, width = context.params.k, context.params.block_cols
    mults = needed * needed * width * width
    context.report = DecodeReport("full", needed, len(results), len(rows), tuple(rows), not residual, residual, mults)
    # K1 = {0..k^2-1} leads the sorted support
    return _stack_targets(coeffs[: k * k], k, width, field)


def reconstruct_dof(results: Sequence[AgentResult], context: DecoderContext, dof: DofConstraint) -> FieldMatrix:
    """Decode with the target blocks replaced by ``s`` latent blocks.

    Unknowns are the latent blocks plus every masked coefficient outside
    ``K1``. Extra results are used as a consistency residual: inputs that
    violate the constraint are flagged on the decode report.
    """
    _check_results(results, context)
    k, width = context.params.k, context.params.block_cols
    if dof.k != k:
        raise UsageError(f"DOF constraint is for k={dof.k}, decoder uses k={k}")
    field = context.field
    alphas = [r.alpha for r in results]
    masked = context.support.masked
    unknowns = dof.s + len(masked)
    system = reduced_system(alphas, context.support, dof, field)
    rows = _independent_rows(system)
    if len(rows) < unknowns:
        raise InsufficientShares(
            unknowns, len(rows), f"reduced system has rank {len(rows)} with {unknowns} unknowns"
        )
    values = _evaluations(results, field)
    solution = _solve(system, values, rows)
    residual = _residual(system, values, solution, rows)
    if residual:
        logger.warning("inputs violate the DOF constraint: residual on results %s", residual)
    targets = dof.gamma.data @ solution[: dof.s]

    mults = unknowns * unknowns * width * width + k * k * dof.s * width * width
    context.report = DecodeReport("dof", unknowns, len(results), len(rows), tuple(rows), not residual, residual, mults)
    return _stack_targets(targets, k, width, field)


# ----------------------------------------------------------------------
# Orchestration
# ----------------------------------------------------------------------

def run_protocol(config: ProtocolConfig, A: FieldMatrix, B: FieldMatrix) -> Tuple[FieldMatrix, Transcript]:
    """Deal, compute on every agent in parallel and decode."""
    operator = config.operator
    operator.prepare(config.field)
    shares, context = deal_shares(config, A, B)
    workers = config.workers or get_settings().workers
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda share: agent_compute(share, operator), shares))
    agents = MultCounter()
    for result in results:
        agents.merge(result.counter)
    logger.info("%d agents finished with %s (%d mults)", len(results), operator.name, agents.total)

    if config.dof is None:
        product = reconstruct(results, context)
    else:
        product = reconstruct_dof(results, context, config.dof)
    upload, download = agent_traffic(config.params.m, config.params.k)
    transcript = Transcript(
        n_agents=config.n_agents,
        operator=operator.name,
        element_bits=config.field.element_bits,
        upload_elements_per_agent=upload,
        download_elements_per_agent=download,
        dealer=context.dealer,
        agents=agents,
        decoder_mults=context.report.mults,
        decode=context.report,
        results=tuple(results),
    )
    logger.info("decoded with %d of %d results", len(context.report.rows_used), len(results))
    return product, transcript


def min_agents_empirical(k: int, t: int, dof: "DofConstraint | int | None" = None) -> int:
    """Number of unknowns in the entrywise decoding system.

    Without a DOF constraint this is the size of the product support; with one
    it is ``s`` plus the number of masked coefficients.
    """
    support = symbolic_product(k, t)
    if dof is None:
        return len(support)
    s = dof.s if isinstance(dof, DofConstraint) else int(dof)
    if not 1 <= s <= k * k:
        raise UsageError(f"latent dimension s={s} outside [1, {k * k}]")
    return s + sum(1 for e in support if e >= k * k)


def system_rank(
    points: Sequence[FieldElement | int], k: int, t: int, field: FieldSpec, dof: DofConstraint | None = None
) -> int:
    """Rank of the (possibly reduced) decoding system for the given points."""
    support = symbolic_product_support(k, t)
    if dof is None:
        return _rank(vandermonde(points, support.union, field))
    return _rank(reduced_system(points, support, dof, field))


def _factor_latent(s: int, k: int) -> Tuple[int, int]:
    for s_a in range(min(k, s), 0, -1):
        if s % s_a == 0 and s // s_a <= k:
            return s_a, s // s_a
    raise UsageError(f"s={s} is not a product of two factors at most k={k}")


def synthetic_dof_instance(
    params: SharingParams, s: int, rng: RngStream, field: FieldSpec
) -> Tuple[FieldMatrix, FieldMatrix, DofConstraint]:
    """Secrets whose target blocks span exactly ``s`` latent blocks.

    With ``s = s_a * s_b`` the column blocks of ``A`` repeat with period
    ``s_a`` and those of ``B`` with period ``s_b``, so ``Z_ij`` equals latent
    block ``(i mod s_a) * s_b + (j mod s_b)``.
    """
    k, m, width = params.k, params.m, params.block_cols
    s_a, s_b = _factor_latent(s, k)
    base_a = [random_matrix(m, width, rng.derive("latent-a", i), field) for i in range(s_a)]
    base_b = [random_matrix(m, width, rng.derive("latent-b", j), field) for j in range(s_b)]
    A = concat_columns(base_a[i % s_a] for i in range(k))
    B = concat_columns(base_b[j % s_b] for j in range(k))
    gamma = np.zeros((k * k, s), dtype=np.int64)
    for i in range(k):
        for j in range(k):
            gamma[i + k * j, (i % s_a) * s_b + (j % s_b)] = 1
    return A, B, DofConstraint(s, FieldMatrix(gamma, field))
