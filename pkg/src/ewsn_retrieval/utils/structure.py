"""Structure module."""
from typing import Any, List


class dotdict(dict):  # noqa: N801
    """Dict with attribute access, used for resolved configurations.

    Unlike a plain ``dict.get`` lookup, a missing attribute raises
    ``AttributeError`` so that misspelled configuration keys fail loudly.
    """

    def __getattr__(self, name: str) -> Any:
        try:
            return self[name]
        except KeyError:
            raise AttributeError(name) from None

    __setattr__ = dict.__setitem__
    __delattr__ = dict.__delitem__

    def echo_lines(self, prefix: str = "# ") -> List[str]:
        """Render every key as ``<prefix>key = value``, sorted by key."""
        return [f"{prefix}{key} = {_render(self[key])}" for key in sorted(self)]


def _render(value: Any) -> str:
    if value is None:
        return "unset"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in value) + "]"
    return str(value)
