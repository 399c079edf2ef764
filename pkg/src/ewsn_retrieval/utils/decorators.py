"""
Decorators shared by the analytic and simulation modules.
"""

import functools
import inspect
import threading
import time
from typing import Any, Callable, Dict, Optional, Tuple

from ewsn_retrieval.errors import ValidationError

# (predicate, description) pairs, e.g. ``mu=(lambda m: m > 0, "> 0")``
Condition = Tuple[Callable[[Any], bool], str]


def timing(func: Optional[Callable] = None, *, logger: Any = None) -> Callable:
    """
    Log the wall time of each call as a ``timing`` event at debug level.

    Works bare (``@timing``) or with a logger (``@timing(logger=...)``);
    the package logger is used when none is given.
    """

    def decorator(f: Callable) -> Callable:
        @functools.wraps(f)
        def timed(*args: Any, **kwargs: Any) -> Any:
            started = time.perf_counter()
            try:
                return f(*args, **kwargs)
            finally:
                seconds = time.perf_counter() - started
                sink = logger
                if sink is None:
                    from ewsn_retrieval.utils.log import logger as sink
                sink.debug(
                    f"{f.__name__} took {seconds:.4f}s",
                    kind="timing",
                    data={"function": f.__qualname__, "seconds": seconds},
                )

        return timed

    return decorator if func is None else decorator(func)


def memoize(func: Callable) -> Callable:
    """
    Thread-safe result cache keyed on hashable arguments.

    Sweep points run on worker threads and share the cache. ``cache_info()``
    reports hits and misses; ``clear_cache()`` empties it. Cached values are
    shared, so callers must not mutate them.
    """
    cache: Dict[Any, Any] = {}
    counts = {"hits": 0, "misses": 0}
    lock = threading.Lock()

    @functools.wraps(func)
    def cached(*args: Any, **kwargs: Any) -> Any:
        key = (args, frozenset(kwargs.items()))
        with lock:
            if key in cache:
                counts["hits"] += 1
                return cache[key]
        value = func(*args, **kwargs)
        with lock:
            counts["misses"] += 1
            return cache.setdefault(key, value)

    def clear_cache() -> None:
        with lock:
            cache.clear()
            counts.update(hits=0, misses=0)

    cached.cache = cache  # type: ignore
    cached.cache_info = lambda: dict(counts, size=len(cache))  # type: ignore
    cached.clear_cache = clear_cache  # type: ignore
    return cached


def require(**conditions: Condition) -> Callable:
    """
    Check preconditions on named parameters before the call.

    Each keyword maps a parameter to ``(predicate, description)``. Defaults
    are checked too. A failing predicate raises ``ValidationError`` reading
    ``"<func>: <param> must be <description>, got <value>"``.

    Example:
        @require(mu=(lambda m: m > 0, "> 0"))
        def asymptotic_network(s, mu): ...
    """

    def decorator(func: Callable) -> Callable:
        signature = inspect.signature(func)
        unknown = set(conditions) - set(signature.parameters)
        if unknown:
            raise TypeError(f"{func.__name__} has no parameter(s) {sorted(unknown)}")

        @functools.wraps(func)
        def checked(*args: Any, **kwargs: Any) -> Any:
            bound = signature.bind(*args, **kwargs)
            bound.apply_defaults()
            for name, (predicate, description) in conditions.items():
                value = bound.arguments[name]
                if not predicate(value):
                    raise ValidationError(f"{func.__name__}: {name} must be {description}, got {value!r}")
            return func(*args, **kwargs)

        return checked

    return decorator
