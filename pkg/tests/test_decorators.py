"""Tests for decorators module."""

import pytest

from ewsn_retrieval.errors import ValidationError
from ewsn_retrieval.utils import decorators


class RecordingLogger:
    def __init__(self):
        self.calls = []

    def debug(self, *args, kind=None, data=None):
        self.calls.append((" ".join(str(a) for a in args), kind, data))


class TestTiming:
    def test_timing_without_args(self):
        @decorators.timing
        def quick():
            return "done"

        assert quick() == "done"
        assert quick.__name__ == "quick"

    def test_timing_with_logger(self):
        logger = RecordingLogger()

        @decorators.timing(logger=logger)
        def quick(x):
            return x + 1

        assert quick(1) == 2
        message, kind, data = logger.calls[0]
        assert message.startswith("quick took ")
        assert kind == "timing"
        assert data["function"].endswith("quick")
        assert data["seconds"] >= 0

    def test_timing_logs_when_call_raises(self):
        logger = RecordingLogger()

        @decorators.timing(logger=logger)
        def broken():
            raise ValidationError("bad")

        with pytest.raises(ValidationError):
            broken()
        assert logger.calls[0][1] == "timing"


class TestMemoize:
    def test_caches_result(self):
        calls = []

        @decorators.memoize
        def row(n):
            calls.append(n)
            return tuple(range(n))

        assert row(5) == row(5)
        assert calls == [5]
        assert row.cache_info() == {"hits": 1, "misses": 1, "size": 1}

    def test_keyword_order_does_not_matter(self):
        calls = []

        @decorators.memoize
        def add(a, b=0, c=0):
            calls.append((a, b, c))
            return a + b + c

        assert add(1, b=2, c=3) == add(1, c=3, b=2) == 6
        assert len(calls) == 1

    def test_clear_cache_resets_counts(self):
        @decorators.memoize
        def square(x):
            return x * x

        square(3)
        square(3)
        square.clear_cache()
        assert square.cache_info() == {"hits": 0, "misses": 0, "size": 0}
        assert square(3) == 9

    def test_shared_across_threads(self):
        from ewsn_retrieval.utils.thread import ThreadPool

        @decorators.memoize
        def double(x):
            return 2 * x

        results = ThreadPool(4).execute(func=double, items=[{"x": i % 3} for i in range(30)])
        assert results == [2 * (i % 3) for i in range(30)]
        assert double.cache_info()["size"] == 3


class TestRequire:
    POSITIVE = (lambda v: v > 0, "> 0")

    def test_passes_through(self):
        @decorators.require(mu=self.POSITIVE)
        def rate(s, mu):
            return s / mu

        assert rate(2, 0.4) == pytest.approx(5.0)

    def test_message_names_function_and_parameter(self):
        @decorators.require(mu=self.POSITIVE)
        def rate(s, mu):
            return s / mu

        with pytest.raises(ValidationError, match=r"rate: mu must be > 0, got -1.0"):
            rate(2, mu=-1.0)

    def test_defaults_are_checked(self):
        @decorators.require(k=(lambda k: k >= 1, ">= 1"))
        def moment(k=0):
            return k

        with pytest.raises(ValidationError):
            moment()

    def test_is_value_error(self):
        @decorators.require(x=(lambda x: x is not None, "set"))
        def f(x):
            return x

        with pytest.raises(ValueError):
            f(None)

    def test_unknown_parameter_rejected_at_decoration(self):
        with pytest.raises(TypeError, match="no parameter"):

            @decorators.require(nu=self.POSITIVE)
            def f(mu):
                return mu
