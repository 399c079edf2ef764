"""Tests for log module."""

import io
import json

import jsonschema
import pytest

from ewsn_retrieval.utils.log import EVENT_SCHEMAS, Logger


@pytest.fixture
def log():
    logger = Logger(client="test", schemas=EVENT_SCHEMAS)
    logger._is_interface = False
    return logger


class TestLogger:
    def test_plain_message_format(self, log, capsys):
        log.info("quadrature converged")
        err = capsys.readouterr().err
        assert err.startswith("[INFO][")
        assert "UTC] quadrature converged" in err

    def test_multiline_message(self, log, capsys):
        log.warning("first\nsecond")
        lines = capsys.readouterr().err.strip().splitlines()
        assert len(lines) == 2
        assert all(line.startswith("[WARNING][") for line in lines)

    def test_stdout_stays_clean(self, log, capsys):
        log.error("broken")
        assert capsys.readouterr().out == ""

    def test_level_filter(self, log, capsys):
        log.set_level("WARNING")
        log.info("hidden")
        assert capsys.readouterr().err == ""

    def test_unknown_level(self, log):
        with pytest.raises(ValueError):
            log.set_level("LOUD")

    def test_kind_requires_data(self, log):
        with pytest.raises(ValueError):
            log.info("x", kind="simulation")

    def test_schema_rejects_bad_event(self, log):
        with pytest.raises(jsonschema.ValidationError):
            log.info("x", kind="simulation", data={"replications": 10})

    def test_valid_event_passes(self, log):
        log.info(
            "done",
            kind="validate_check",
            data={"check": "identity", "passed": True, "detail": "ok"},
        )

    def test_invalid_event_rejected_below_level(self, log):
        log.set_level("ERROR")
        with pytest.raises(jsonschema.ValidationError):
            log.debug("x", kind="timing", data={"function": "f"})


class TestStructuredEvents:
    def test_json_line_to_stream(self):
        stream = io.StringIO()
        log = Logger(client="ewsn", schemas=EVENT_SCHEMAS, stream=stream)
        log.info(
            "simulated",
            kind="simulation",
            data={"replications": 100, "seed": 7, "mean": 5.8, "ci_halfwidth_95": 0.1},
        )
        event = json.loads(stream.getvalue().strip())
        assert event["event"] == "simulated"
        assert event["kind"] == "simulation"
        assert event["data"]["seed"] == 7
        assert event["client"] == "ewsn"
        assert event["sign"] == "EWSN1"
        assert event["level"] == "info"

    def test_set_schema_registers_new_kind(self):
        stream = io.StringIO()
        log = Logger(stream=stream)
        log.set_schema("custom", {"type": "object", "required": ["x"]})
        with pytest.raises(jsonschema.ValidationError):
            log.info("x", kind="custom", data={"y": 1})
