"""Closed-form cost models for agent computation, coding and communication."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict

from .exceptions import UsageError
from .protocol import agent_traffic, packed_bytes
from .sharing import bgw_threshold, threshold_closed_form


def format_ratio(value: Fraction | float | int) -> str:
    """Decimal with six fractional digits, as used in every CSV."""
    if isinstance(value, Fraction):
        value = value.numerator / value.denominator
    return f"{value:.6f}"


@dataclass(frozen=True)
class CostModel:
    """Multiplication counts for ``N`` agents multiplying ``m x m`` secrets split ``k`` ways.

    ``T_l`` is the rank of the learned scheme an agent applies to its
    ``(m/k) x m`` by ``m x (m/k)`` product.
    """

    m: int
    k: int
    t: int
    N: int
    T_l: int
    element_bits: int = 31

    def __post_init__(self) -> None:
        if min(self.m, self.k, self.t, self.N, self.T_l, self.element_bits) < 1:
            raise UsageError("cost model parameters must be positive")

    @property
    def agent_psmm(self) -> Fraction:
        return Fraction(self.m ** 3, self.k ** 2)

    @property
    def agent_lapsmm(self) -> Fraction:
        return Fraction(self.T_l * self.m ** 2, self.k)

    @property
    def cost_psmm(self) -> Fraction:
        return self.N * self.agent_psmm

    @property
    def cost_lapsmm(self) -> Fraction:
        return self.N * self.agent_lapsmm

    @property
    def gain(self) -> Fraction:
        """``cost_psmm / cost_lapsmm``, which reduces to ``m / (k T_l)``."""
        return self.cost_psmm / self.cost_lapsmm

    @property
    def reduction_pct(self) -> Fraction:
        return 100 * (1 - 1 / self.gain)

    @property
    def encode(self) -> Fraction:
        return Fraction(self.N * (self.k + self.t) * self.m ** 2, self.k)

    @property
    def decode(self) -> Fraction:
        return Fraction(self.m, self.k) ** 2 * self.N ** 2

    @property
    def upload_bytes_per_agent(self) -> int:
        return packed_bytes(agent_traffic(self.m, self.k)[0], self.element_bits)

    @property
    def download_bytes_per_agent(self) -> int:
        return packed_bytes(agent_traffic(self.m, self.k)[1], self.element_bits)

    @property
    def total_bytes(self) -> int:
        return self.N * (self.upload_bytes_per_agent + self.download_bytes_per_agent)

    def row(self) -> Dict[str, str]:
        return {
            "m": str(self.m),
            "k": str(self.k),
            "t": str(self.t),
            "n": str(self.N),
            "t_l": str(self.T_l),
            "cost_psmm": format_ratio(self.cost_psmm),
            "cost_lapsmm": format_ratio(self.cost_lapsmm),
            "gain": format_ratio(self.gain),
            "reduction_pct": format_ratio(self.reduction_pct),
        }


def lifted_block_ratio(depth: int, rank: int = 7, base: int = 8) -> Fraction:
    """Base products of a rank-``rank`` lifting relative to the dense block count."""
    return Fraction(rank ** depth, base ** depth)


def communication_row(m: int, k: int, t: int, n: int, element_bits: int, bgw_factor: float) -> Dict[str, str]:
    """Per-agent and total bytes for ``n`` agents, with a modeled BGW baseline.

    The BGW figures scale the per-agent traffic by ``bgw_factor``; they are
    modeled, not measured.
    """
    # traffic does not depend on the agent's scheme rank
    model = CostModel(m, k, t, n, T_l=1, element_bits=element_bits)
    up_bytes = model.upload_bytes_per_agent
    down_bytes = model.download_bytes_per_agent
    per_agent = up_bytes + down_bytes
    bgw_per_agent = per_agent * bgw_factor
    return {
        "n": str(n),
        "n_ours": str(threshold_closed_form(k, t)),
        "n_bgw": str(bgw_threshold(k, t)),
        "upload_bytes_per_agent": str(up_bytes),
        "download_bytes_per_agent": str(down_bytes),
        "per_agent_bytes": str(per_agent),
        "bgw_per_agent_bytes_modeled": format_ratio(bgw_per_agent),
        "total_bytes": str(model.total_bytes),
        "bgw_total_bytes_modeled": format_ratio(n * bgw_per_agent),
    }
