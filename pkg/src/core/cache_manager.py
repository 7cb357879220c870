"""In-memory cache for grids, basis sets and assembled systems."""

import threading
from collections import OrderedDict
from typing import Optional, Dict, Any, Callable
import structlog

from ..config import settings
from .exceptions import CacheError

logger = structlog.get_logger()


class CacheManager:
    """LRU cache for discretization objects that are reused across eps values."""

    def __init__(self, max_entries: Optional[int] = None, enabled: Optional[bool] = None):
        self._memory_cache: "OrderedDict[str, Any]" = OrderedDict()
        self._max_entries = max_entries if max_entries is not None else settings.cache_max_entries
        self._enabled = settings.cache_enabled if enabled is None else enabled
        self._hits = 0
        self._misses = 0
        self._lock = threading.RLock()
        if self._max_entries < 1:
            raise CacheError("Cache needs room for at least one entry",
                             {"max_entries": self._max_entries})

    def get(self, key: str) -> Optional[Any]:
        """Get value from cache."""
        with self._lock:
            if self._enabled and key in self._memory_cache:
                self._memory_cache.move_to_end(key)
                self._hits += 1
                logger.debug(f"Cache hit: {key}")
                return self._memory_cache[key]

            self._misses += 1
        logger.debug(f"Cache miss: {key}")
        return None

    def set(self, key: str, value: Any) -> bool:
        """Store value, evicting the least recently used entry when full."""
        if not self._enabled:
            return False
        if value is None:
            raise CacheError(f"Refusing to cache None for key {key}")

        with self._lock:
            self._memory_cache[key] = value
            self._memory_cache.move_to_end(key)
            while len(self._memory_cache) > self._max_entries:
                evicted, _ = self._memory_cache.popitem(last=False)
                logger.debug(f"Cache evict: {evicted}")
        return True

    def get_or_create(self, key: str, factory: Callable[[], Any]) -> Any:
        """Return the cached value for key, building it with factory on a miss."""
        value = self.get(key)
        if value is None:
            value = factory()
            self.set(key, value)
        return value

    def clear_memory_cache(self):
        """Clear memory cache."""
        with self._lock:
            self._memory_cache.clear()
            self._hits = 0
            self._misses = 0
        logger.debug("Memory cache cleared")

    def get_cache_stats(self) -> Dict[str, Any]:
        """Get cache statistics."""
        with self._lock:
            return {
                "memory_cache_size": len(self._memory_cache),
                "max_entries": self._max_entries,
                "enabled": self._enabled,
                "hits": self._hits,
                "misses": self._misses,
            }


# Global cache instance
cache_manager = CacheManager()
