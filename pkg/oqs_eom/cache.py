"""
Centralized caching for expensive, model-determined numerics
"""
from cachetools import FIFOCache, LRUCache
from typing import Any, Dict, Optional
import threading

from oqs_eom.config import Config


class EigendecompositionCache:
    """Thread-safe FIFO cache of H_tot eigendecompositions keyed by model fingerprint"""

    def __init__(self, max_size: int = 64):
        self._cache = FIFOCache(maxsize=max_size)
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0

    @property
    def max_size(self) -> int:
        return int(self._cache.maxsize)

    def get(self, key: str) -> Optional[Any]:
        with self._lock:
            value = self._cache.get(key)
            if value is not None:
                self._hits += 1
                return value
            self._misses += 1
            return None

    def set(self, key: str, value: Any):
        with self._lock:
            self._cache[key] = value

    def clear(self):
        with self._lock:
            self._cache.clear()
            self._hits = 0
            self._misses = 0

    def get_stats(self) -> Dict:
        with self._lock:
            total = self._hits + self._misses
            hit_rate = (self._hits / total * 100) if total > 0 else 0
            return {
                "hits": self._hits,
                "misses": self._misses,
                "hit_rate": f"{hit_rate:.2f}%",
                "size": len(self._cache),
                "max_size": self.max_size
            }


class PipelineCache:
    """LRU cache for projector pair / block decomposition / Q-image basis bundles"""

    def __init__(self, max_size: int = 16):
        self._cache = LRUCache(maxsize=max_size)
        self._lock = threading.Lock()

    def get(self, key: str) -> Optional[Any]:
        with self._lock:
            return self._cache.get(key)

    def set(self, key: str, value: Any):
        with self._lock:
            self._cache[key] = value

    def invalidate(self, key: str):
        with self._lock:
            self._cache.pop(key, None)

    def clear(self):
        with self._lock:
            self._cache.clear()

    def get_stats(self) -> Dict:
        with self._lock:
            return {"size": len(self._cache), "max_size": self._cache.maxsize}


eigen_cache = EigendecompositionCache(max_size=Config.EIGEN_CACHE_SIZE)
pipeline_cache = PipelineCache(max_size=Config.PIPELINE_CACHE_SIZE)
