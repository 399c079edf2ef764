"""로그 모듈.

구조화 이벤트(kind, data)는 등록된 jsonschema로 검증한 뒤 structlog로 내보내고,
kind가 없는 메시지는 UTC 타임스탬프가 붙은 한 줄 형식으로 출력합니다.
stdout은 리포트와 CSV 전용이므로 모든 로그는 stderr(또는 지정한 stream)로 나갑니다.
"""
import logging
import sys
from functools import partialmethod
from typing import Any, Dict, Mapping, Optional, TextIO

import jsonschema
import pendulum
import structlog

LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

_NUMBER = {"type": "number"}
_NULLABLE_NUMBER = {"type": ["number", "null"]}

EVENT_SCHEMAS: Dict[str, dict] = {
    "config": {
        "type": "object",
        "required": ["command"],
        "properties": {"command": {"type": "string"}},
    },
    "sweep_point": {
        "type": "object",
        "required": ["series", "param", "value"],
        "properties": {
            "series": {"type": "string"},
            "param": {"type": "string"},
            "value": _NUMBER,
            "ew_closed_form": _NULLABLE_NUMBER,
            "ew_quadrature": _NULLABLE_NUMBER,
            "ew_matrix": _NULLABLE_NUMBER,
        },
    },
    "simulation": {
        "type": "object",
        "required": ["replications", "seed", "mean", "ci_halfwidth_95"],
        "properties": {
            "replications": {"type": "integer", "minimum": 1},
            "seed": {"type": "integer"},
            "mean": _NUMBER,
            "ci_halfwidth_95": _NUMBER,
        },
    },
    "validate_check": {
        "type": "object",
        "required": ["check", "passed"],
        "properties": {
            "check": {"type": "string"},
            "passed": {"type": "boolean"},
            "detail": {"type": "string"},
        },
    },
    "timing": {
        "type": "object",
        "required": ["function", "seconds"],
        "properties": {"function": {"type": "string"}, "seconds": _NUMBER},
    },
}


def _level_number(name: str) -> int:
    """레벨 이름을 logging 정수 레벨로 바꿉니다.

    Raises:
        ValueError: LEVELS에 없는 이름인 경우.
    """
    upper = name.upper()
    if upper not in LEVELS:
        raise ValueError(f"알 수 없는 로그 레벨입니다: {name} (가능한 값: {', '.join(LEVELS)})")
    return logging.getLevelName(upper)


class Logger:
    """structlog 기반 로거.

    Examples:
        >>> log = Logger(client="ewsn", schemas=EVENT_SCHEMAS)
        >>> log.info("sweep finished")
        [INFO][2026-01-01 00:00:00 UTC] sweep finished
        >>> log.info("done", kind="simulation", data={"replications": 10})
        jsonschema.ValidationError: 'seed' is a required property
    """

    def __init__(
        self,
        client: Optional[str] = None,
        sign: str = "EWSN1",
        schemas: Optional[Mapping[str, dict]] = None,
        stream: Optional[TextIO] = None,
    ):
        """
        Args:
            client (str, optional): 이벤트에 묶을 클라이언트 이름.
            sign (str, optional): JSON 이벤트에 붙는 식별자. 기본값은 "EWSN1".
            schemas (Mapping[str, dict], optional): kind별 jsonschema.
            stream (TextIO, optional): 출력 대상. 기본값은 호출 시점의 sys.stderr.
        """
        self.client = client
        self.sign = sign
        self._stream = stream
        self._schemas: Dict[str, dict] = dict(schemas or {})
        self._is_interface = self.stream.isatty()
        self._threshold = logging.INFO
        self._events = self._build()

    @property
    def stream(self) -> TextIO:
        return self._stream if self._stream is not None else sys.stderr

    def _build(self) -> Any:
        if self._is_interface:
            renderer = [structlog.dev.ConsoleRenderer()]
        else:
            renderer = [structlog.processors.dict_tracebacks, structlog.processors.JSONRenderer(ensure_ascii=False)]
        events = structlog.wrap_logger(
            structlog.PrintLogger(file=self.stream),
            processors=[
                structlog.processors.TimeStamper(fmt="iso", utc=True),
                structlog.processors.add_log_level,
                *renderer,
            ],
        )
        context = {"client": self.client} if self.client else {}
        if not self._is_interface:
            context["sign"] = self.sign
        return events.bind(**context)

    def _check_event(self, kind: Optional[str], data: Optional[dict]) -> None:
        """kind와 data를 검증합니다.

        Raises:
            ValueError: kind와 data 중 하나만 주어졌거나 타입이 잘못된 경우.
            jsonschema.ValidationError: 등록된 스키마와 맞지 않는 경우.
        """
        if bool(kind) != bool(data):
            raise ValueError("kind와 data는 함께 사용해야 합니다.")
        if kind is None:
            return
        if not isinstance(kind, str) or not isinstance(data, dict):
            raise ValueError("kind는 str, data는 dict 타입이어야 합니다.")
        schema = self._schemas.get(kind)
        if schema is not None:
            jsonschema.validate(data, schema)

    def _plain(self, level: str, message: str) -> str:
        """여러 줄 메시지의 각 줄 앞에 레벨과 UTC 시각을 붙입니다."""
        now = pendulum.now("UTC").format("YYYY-MM-DD HH:mm:ss")
        return "\n".join(f"[{level}][{now} UTC] {line}" for line in message.split("\n"))

    def log(self, level: str, *args: Any, kind: Optional[str] = None, data: Optional[dict] = None) -> None:
        """메시지 또는 구조화 이벤트를 기록합니다.

        스키마 검증은 레벨 필터보다 먼저 수행되므로, 숨겨진 레벨의 잘못된 이벤트도 예외를 냅니다.
        """
        self._check_event(kind, data)
        number = _level_number(level)
        if number < self._threshold:
            return
        message = " ".join(str(a) for a in args)
        if kind is not None:
            self._events.log(number, message, kind=kind, data=data)
        elif self._is_interface:
            self._events.log(number, message)
        else:
            print(self._plain(level.upper(), message), file=self.stream)

    def _log_at(self, level: str, *args: Any, kind: Optional[str] = None, data: Optional[dict] = None) -> None:
        self.log(level, *args, kind=kind, data=data)

    debug = partialmethod(_log_at, "DEBUG")
    info = partialmethod(_log_at, "INFO")
    warning = partialmethod(_log_at, "WARNING")
    error = partialmethod(_log_at, "ERROR")
    critical = partialmethod(_log_at, "CRITICAL")

    def set_level(self, level: str) -> None:
        """이보다 낮은 레벨의 로그를 버립니다. "DEBUG"부터 "CRITICAL"까지."""
        self._threshold = _level_number(level)

    def set_schema(self, kind: str, schema: dict) -> None:
        """kind의 이벤트 data를 검증할 jsonschema를 등록합니다."""
        self._schemas[kind] = schema


logger = Logger(client="ewsn", schemas=EVENT_SCHEMAS)
