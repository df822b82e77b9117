"""Deterministic, labelled random streams.

Every consumer of randomness asks for its own stream keyed by
``(master_seed, label, index)``. Streams are backed by a counter-based Philox
generator, so two agents (or two threads) that derive the same key observe
the same values regardless of scheduling.
"""
from __future__ import annotations

import hashlib
from threading import Lock

import numpy as np


def _label_key(label: str) -> int:
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


class RngStream:
    """A labelled Philox stream with rejection sampling below a modulus."""

    _lock = Lock()
    _words_drawn = 0

    def __init__(self, master_seed: int, label: str, index: int = 0) -> None:
        if master_seed < 0 or index < 0:
            raise ValueError("seed and index must be non-negative")
        self.master_seed = int(master_seed)
        self.label = label
        self.index = int(index)
        seq = np.random.SeedSequence(
            entropy=self.master_seed,
            spawn_key=(_label_key(label), self.index),
        )
        self._bitgen = np.random.Philox(seq)

    def derive(self, label: str, index: int = 0) -> "RngStream":
        """Return an independent child stream ``<this label>/<label>``."""
        return RngStream(self.master_seed, f"{self.label}/{label}", index)

    # ------------------------------------------------------------------
    def raw(self, count: int) -> np.ndarray:
        """Return ``count`` raw 64-bit words."""
        with RngStream._lock:
            RngStream._words_drawn += count
        return self._bitgen.random_raw(count)

    def residues(self, modulus: int, count: int) -> np.ndarray:
        """Return ``count`` uniform integers in ``[0, modulus)``.

        Words are masked to the smallest power-of-two range covering
        ``modulus`` and values ``>= modulus`` are rejected, so every residue
        has probability exactly ``1/modulus``.
        """
        if modulus < 2:
            raise ValueError("modulus must be at least 2")
        bits = (modulus - 1).bit_length()
        mask = np.uint64((1 << bits) - 1)
        bound = np.uint64(modulus)
        out = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            need = count - filled
            words = self.raw(need) & mask
            accepted = words[words < bound]
            take = min(need, accepted.shape[0])
            out[filled:filled + take] = accepted[:take].astype(np.int64)
            filled += take
        return out

    # ------------------------------------------------------------------
    @classmethod
    def words_drawn(cls) -> int:
        """Total number of raw words drawn by all streams in this process."""
        with cls._lock:
            return cls._words_drawn

    def __repr__(self) -> str:  # pragma: no cover - trivial
        return f"RngStream(seed={self.master_seed}, label={self.label!r}, index={self.index})"
