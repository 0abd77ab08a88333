"""Flat key-value experiment configs with typed values.

Grammar (one assignment per line, ``#`` comments):

    key = value
    value   := number | word | call | named-list | list
    call    := name '(' [name '=' value {',' name '=' value}] ')'
    named-list := name '=' list
    list    := '[' [element {',' element}] ']'
    element := value | '(' value {',' value} ')'

Example::

    seed = 42
    alpha = atoms=[(0.6667,0.5),(0.3333,0.5)]
    cooling = polynomial(B=1, beta=2)
    n = 100000

Errors carry line and column.  ``--set key=value`` overrides reuse the same
value grammar.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field as dc_field
from typing import Any, Optional

from .alpha import AlphaLaw
from .cooling import (
    CoolingMap,
    DoubleExp,
    Explicit,
    Exponential,
    FasterDoubleExp,
    Polynomial,
    RepeatedBlocks,
)


class ConfigError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        where = f" (line {line}, col {col})" if line else ""
        super().__init__(message + where)
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Call:
    name: str
    kwargs: dict

    def serialize(self) -> str:
        inner = ", ".join(f"{k}={_serialize(v)}" for k, v in self.kwargs.items())
        return f"{self.name}({inner})"


@dataclass(frozen=True)
class NamedList:
    name: str
    items: tuple

    def serialize(self) -> str:
        return f"{self.name}={_serialize(list(self.items))}"


def _serialize(v: Any) -> str:
    if isinstance(v, (Call, NamedList)):
        return v.serialize()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, int):
        return str(v)
    if isinstance(v, (list, tuple)):
        return "[" + ",".join(
            "(" + ",".join(_serialize(e) for e in item) + ")"
            if isinstance(item, tuple)
            else _serialize(item)
            for item in v
        ) + "]"
    return str(v)


class _Scanner:
    def __init__(self, text: str, line: int):
        self.text = text
        self.line = line
        self.pos = 0

    def error(self, message: str) -> ConfigError:
        return ConfigError(message, self.line, self.pos + 1)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def peek(self) -> str:
        self.skip_ws()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str):
        self.skip_ws()
        if self.peek() != ch:
            raise self.error(f"expected {ch!r}, found {self.peek()!r}")
        self.pos += 1

    def word(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (
            self.text[self.pos].isalnum() or self.text[self.pos] in "_."
        ):
            self.pos += 1
        if self.pos == start:
            raise self.error("expected a name or number")
        return self.text[start:self.pos]

    def value(self) -> Any:
        self.skip_ws()
        c = self.peek()
        if c == "[":
            return self.list_value()
        if c in "+-" or c.isdigit():
            return self.number()
        name = self.word()
        nxt = self.peek()
        if nxt == "(":
            return self.call(name)
        if nxt == "=":
            self.take("=")
            items = self.list_value()
            return NamedList(name=name, items=tuple(items))
        lowered = name.lower()
        if lowered in ("true", "false"):
            return lowered == "true"
        return name

    def number(self):
        self.skip_ws()
        start = self.pos
        if self.text[self.pos] in "+-":
            self.pos += 1
        seen_dot = seen_exp = False
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch.isdigit():
                self.pos += 1
            elif ch == "." and not seen_dot and not seen_exp:
                seen_dot = True
                self.pos += 1
            elif ch in "eE" and not seen_exp and self.pos > start:
                seen_exp = True
                self.pos += 1
                if self.pos < len(self.text) and self.text[self.pos] in "+-":
                    self.pos += 1
            else:
                break
        token = self.text[start:self.pos]
        try:
            if seen_dot or seen_exp:
                return float(token)
            return int(token)
        except ValueError:
            raise self.error(f"bad number {token!r}") from None

    def call(self, name: str) -> Call:
        self.take("(")
        kwargs = {}
        if self.peek() != ")":
            while True:
                key = self.word()
                self.take("=")
                kwargs[key] = self.value()
                if self.peek() == ",":
                    self.take(",")
                    continue
                break
        self.take(")")
        return Call(name=name, kwargs=kwargs)

    def list_value(self) -> list:
        self.take("[")
        items: list = []
        if self.peek() != "]":
            while True:
                if self.peek() == "(":
                    self.take("(")
                    tup = [self.value()]
                    while self.peek() == ",":
                        self.take(",")
                        tup.append(self.value())
                    self.take(")")
                    items.append(tuple(tup))
                else:
                    items.append(self.value())
                if self.peek() == ",":
                    self.take(",")
                    continue
                break
        self.take("]")
        return items

    def end(self):
        self.skip_ws()
        if self.pos < len(self.text):
            raise self.error(f"trailing characters {self.text[self.pos:]!r}")


def parse_value(text: str, line: int = 0) -> Any:
    sc = _Scanner(text, line)
    v = sc.value()
    sc.end()
    return v


def parse_config_text(text: str) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError("expected `key = value`", lineno, 1)
        key, _, rest = stripped.partition("=")
        key = key.strip()
        if not key.replace("_", "").isalnum():
            raise ConfigError(f"bad key {key!r}", lineno, 1)
        values[key] = parse_value(rest.strip(), lineno)
    return values


# ---------------------------------------------------------------------------
# domain builders


def build_alpha(value: Any) -> AlphaLaw:
    if isinstance(value, NamedList) and value.name == "atoms":
        atoms = []
        for item in value.items:
            if not (isinstance(item, tuple) and len(item) == 2):
                raise ConfigError("alpha atoms must be (omega, weight) pairs")
            atoms.append((float(item[0]), float(item[1])))
        return AlphaLaw(atoms=tuple(atoms))
    if isinstance(value, Call):
        if value.name == "point":
            return AlphaLaw.point(float(value.kwargs["omega"]))
        if value.name == "recurrent_x":
            from .alpha import recurrent_two_point

            return recurrent_two_point(float(value.kwargs["x"]))
        if value.name == "s_transient_x":
            from .alpha import s_transient_two_point

            return s_transient_two_point(float(value.kwargs["x"]), float(value.kwargs["s"]))
    raise ConfigError(f"cannot build an alpha law from {value!r}")


def build_cooling(value: Any) -> CoolingMap:
    if isinstance(value, NamedList) and value.name == "blocks":
        blocks = tuple((int(n), int(c)) for n, c in value.items)
        return CoolingMap(RepeatedBlocks(blocks))
    if isinstance(value, Call):
        kw = value.kwargs
        name = value.name
        if name == "polynomial":
            return CoolingMap(Polynomial(B=float(kw["B"]), beta=float(kw["beta"])))
        if name == "exponential":
            return CoolingMap(Exponential(c=float(kw["c"])))
        if name == "double_exp":
            return CoolingMap(DoubleExp(c=float(kw["c"])))
        if name == "faster_double_exp":
            return CoolingMap(FasterDoubleExp(c=float(kw["c"])))
        if name == "explicit":
            return CoolingMap(Explicit(tuple(int(t) for t in kw["T"])))
    raise ConfigError(f"cannot build a cooling map from {value!r}")


@dataclass
class ExperimentConfig:
    """Resolved configuration: file values with command-line overrides applied."""

    values: dict[str, Any] = dc_field(default_factory=dict)

    @classmethod
    def load(cls, path: Optional[str], overrides: list[str] = ()) -> "ExperimentConfig":
        values: dict[str, Any] = {}
        if path:
            with open(path, "r", encoding="utf-8") as fh:
                values = parse_config_text(fh.read())
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"--set needs key=value, got {item!r}")
            key, _, rest = item.partition("=")
            values[key.strip()] = parse_value(rest.strip())
        return cls(values=values)

    #: execution-only keys: they cannot affect results, so they stay out of
    #: the provenance identity (worker-count invariance is byte-exact)
    EXECUTION_KEYS = frozenset({"workers"})

    def canonical_text(self) -> str:
        keys = sorted(k for k in self.values if k not in self.EXECUTION_KEYS)
        return "".join(f"{k} = {_serialize(self.values[k])}\n" for k in keys)

    def content_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()

    # typed accessors ------------------------------------------------------
    def has(self, key: str) -> bool:
        return key in self.values

    def get_int(self, key: str, default: Optional[int] = None) -> int:
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing required integer key {key!r}")
            return default
        v = self.values[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"key {key!r} must be a number")
        return int(v)

    def get_float(self, key: str, default: Optional[float] = None) -> float:
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing required numeric key {key!r}")
            return default
        v = self.values[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"key {key!r} must be a number")
        return float(v)

    def get_str(self, key: str, default: Optional[str] = None) -> str:
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        return str(self.values[key])

    def get_int_list(self, key: str, default: Optional[list[int]] = None) -> list[int]:
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing required list key {key!r}")
            return default
        v = self.values[key]
        if not isinstance(v, list):
            raise ConfigError(f"key {key!r} must be a list")
        return [int(x) for x in v]

    def get_float_list(self, key: str, default: Optional[list[float]] = None) -> list[float]:
        if key not in self.values:
            if default is None:
                raise ConfigError(f"missing required list key {key!r}")
            return default
        v = self.values[key]
        if not isinstance(v, list):
            raise ConfigError(f"key {key!r} must be a list")
        return [float(x) for x in v]

    def seed(self) -> int:
        # mandatory: reruns must be reproducible, so no wall-clock fallback
        return self.get_int("seed")

    def workers(self) -> Optional[int]:
        return self.get_int("workers") if self.has("workers") else None

    def alpha(self) -> AlphaLaw:
        if "alpha" not in self.values:
            raise ConfigError("missing required key 'alpha'")
        return build_alpha(self.values["alpha"])

    def cooling(self) -> CoolingMap:
        if "cooling" not in self.values:
            raise ConfigError("missing required key 'cooling'")
        return build_cooling(self.values["cooling"])
