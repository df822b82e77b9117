from __future__ import annotations

from collections import OrderedDict
from threading import Lock
from typing import Any, Callable, Dict, Hashable, Optional


class SystemCache:
    """Thread-safe LRU cache for expensive, reusable field computations.

    Used for inverted evaluation systems and scheme verification verdicts.
    """

    def __init__(self, max_size: int = 128) -> None:
        self.max_size = max_size
        self._data: "OrderedDict[Hashable, Any]" = OrderedDict()
        self._lock = Lock()
        self._hits = 0
        self._misses = 0

    def get(self, key: Hashable) -> Optional[Any]:
        """Retrieve ``key`` from the cache."""
        with self._lock:
            if key in self._data:
                value = self._data.pop(key)
                self._data[key] = value  # mark as recently used
                self._hits += 1
                return value
            self._misses += 1
            return None

    def put(self, key: Hashable, value: Any) -> None:
        """Insert ``value`` for ``key``, evicting the least recently used entry."""
        with self._lock:
            if key in self._data:
                self._data.pop(key)
            elif len(self._data) >= self.max_size:
                self._data.popitem(last=False)
            self._data[key] = value

    def get_or_compute(self, key: Hashable, compute: Callable[[], Any]) -> Any:
        """Return the cached value for ``key`` or compute and store it.

        ``compute`` runs outside the lock; two racing callers may both compute,
        which is harmless because cached values are pure functions of the key.
        """
        value = self.get(key)
        if value is None:
            value = compute()
            self.put(key, value)
        return value

    def clear(self) -> None:
        """Clear the cache and statistics."""
        with self._lock:
            self._data.clear()
            self._hits = 0
            self._misses = 0

    def get_stats(self) -> Dict[str, float]:
        """Return cache statistics as a dictionary."""
        with self._lock:
            ops = self._hits + self._misses
            hit_rate = self._hits / ops if ops else 0.0
            return {
                "hits": self._hits,
                "misses": self._misses,
                "size": len(self._data),
                "hit_rate": hit_rate,
            }


_SHARED: SystemCache | None = None
_SHARED_LOCK = Lock()


def shared_cache() -> SystemCache:
    """Process-wide cache sized from :class:`~psmm.settings.Settings`."""
    global _SHARED
    with _SHARED_LOCK:
        if _SHARED is None:
            from .settings import get_settings

            _SHARED = SystemCache(get_settings().cache_size)
        return _SHARED
