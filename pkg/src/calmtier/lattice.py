"""Join-semilattice values used to merge agent outputs without coordination.

Every kind except ``EXCLUSIVE_ASSIGN`` has a join that is idempotent,
commutative and associative, so a set of contributions can be folded in any
order and always reaches the same value. ``EXCLUSIVE_ASSIGN`` models a
single-owner assignment; it has no join and merging it is an error.

The concrete kinds are stand-ins: they are the smallest family that can
express the bundled tasks, not a claim about what real agent outputs are.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Any, Iterable, Mapping

MAX_DEPTH = 8


class LatticeError(Exception):
    pass


class KindMismatch(LatticeError):
    pass


class NotASemilattice(LatticeError):
    pass


class EmptyInput(LatticeError):
    pass


class Kind(str, enum.Enum):
    SET_UNION = "set_union"
    MAX_REGISTER = "max_register"
    MIN_REGISTER = "min_register"
    MAP_OF_JOINS = "map_of_joins"
    GROW_COUNTER = "grow_counter"
    CAUSAL_APPEND = "causal_append"
    EXCLUSIVE_ASSIGN = "exclusive_assign"


@dataclass(frozen=True)
class JoinKind:
    name: Kind
    inner: JoinKind | None = None

    def __post_init__(self) -> None:
        if (self.name is Kind.MAP_OF_JOINS) != (self.inner is not None):
            raise ValueError("only map_of_joins carries an inner kind")
        if self.depth > MAX_DEPTH:
            raise ValueError(f"map_of_joins nested deeper than {MAX_DEPTH}")

    @property
    def depth(self) -> int:
        return 1 if self.inner is None else 1 + self.inner.depth

    @property
    def is_semilattice(self) -> bool:
        if self.name is Kind.EXCLUSIVE_ASSIGN:
            return False
        return self.inner is None or self.inner.is_semilattice

    @property
    def is_inflationary(self) -> bool:
        """True for the kinds whose merge needs no delivery-order guarantee."""
        if self.name in (Kind.EXCLUSIVE_ASSIGN, Kind.CAUSAL_APPEND):
            return False
        return self.inner is None or self.inner.is_inflationary

    def contains(self, name: Kind) -> bool:
        return self.name is name or (self.inner is not None and self.inner.contains(name))

    def to_json(self) -> Any:
        if self.inner is None:
            return self.name.value
        return {"map_of_joins": self.inner.to_json()}

    @classmethod
    def from_json(cls, raw: Any) -> JoinKind:
        if isinstance(raw, str):
            kind = Kind(raw)
            if kind is Kind.MAP_OF_JOINS:
                raise ValueError("map_of_joins needs an inner kind")
            return cls(kind)
        if isinstance(raw, Mapping) and set(raw) == {"map_of_joins"}:
            return cls(Kind.MAP_OF_JOINS, cls.from_json(raw["map_of_joins"]))
        raise ValueError(f"not a join kind: {raw!r}")

    def __str__(self) -> str:
        if self.inner is None:
            return self.name.value
        return f"map_of_joins({self.inner})"


SET_UNION = JoinKind(Kind.SET_UNION)
MAX_REGISTER = JoinKind(Kind.MAX_REGISTER)
MIN_REGISTER = JoinKind(Kind.MIN_REGISTER)
GROW_COUNTER = JoinKind(Kind.GROW_COUNTER)
CAUSAL_APPEND = JoinKind(Kind.CAUSAL_APPEND)
EXCLUSIVE_ASSIGN = JoinKind(Kind.EXCLUSIVE_ASSIGN)


def map_of(inner: JoinKind) -> JoinKind:
    return JoinKind(Kind.MAP_OF_JOINS, inner)


@dataclass(frozen=True, order=True)
class Entry:
    """One causally stamped item in a ``CAUSAL_APPEND`` log."""

    author: str
    item: str
    stamp: tuple[tuple[str, int], ...]

    @property
    def height(self) -> int:
        return sum(count for _, count in self.stamp)

    def happened_before(self, other: Entry) -> bool:
        mine, theirs = dict(self.stamp), dict(other.stamp)
        keys = mine.keys() | theirs.keys()
        return all(mine.get(k, 0) <= theirs.get(k, 0) for k in keys) and mine != theirs


def to_rational(raw: Any) -> Fraction:
    if isinstance(raw, bool):
        raise ValueError("booleans are not rationals")
    if isinstance(raw, float):
        return Fraction(str(raw))
    if isinstance(raw, (int, str, Fraction)):
        return Fraction(raw)
    raise ValueError(f"not a rational: {raw!r}")


def format_rational(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


@dataclass(frozen=True)
class LatticeValue:
    """A value of some :class:`JoinKind` in canonical form.

    Payload representations:

    * set_union: ``frozenset[str]``
    * max_register / min_register: ``Fraction``
    * grow_counter: sorted tuple of ``(replica, count)`` pairs; the counter
      value is the sum
    * map_of_joins: sorted tuple of ``(key, LatticeValue)`` pairs
    * causal_append: ``frozenset[Entry]``; :attr:`entries` gives the causal order
    * exclusive_assign: ``str``
    """

    kind: JoinKind
    payload: Any

    def __post_init__(self) -> None:
        _check_payload(self.kind, self.payload)

    @property
    def entries(self) -> list[Entry]:
        if self.kind.name is not Kind.CAUSAL_APPEND:
            raise KindMismatch("entries() is only defined for causal_append")
        return sorted(self.payload, key=lambda e: (e.height, e.author, e.item, e.stamp))

    @property
    def total(self) -> int:
        if self.kind.name is not Kind.GROW_COUNTER:
            raise KindMismatch("total is only defined for grow_counter")
        return sum(count for _, count in self.payload)

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind.to_json(), "payload": _payload_to_json(self.kind, self.payload)}

    @classmethod
    def from_json(cls, raw: Mapping[str, Any]) -> LatticeValue:
        if not isinstance(raw, Mapping) or set(raw) != {"kind", "payload"}:
            raise ValueError("lattice value needs exactly 'kind' and 'payload'")
        kind = JoinKind.from_json(raw["kind"])
        return make_value(kind, raw["payload"], _wire=True)


def _check_payload(kind: JoinKind, payload: Any) -> None:
    name = kind.name
    ok: bool
    if name is Kind.SET_UNION:
        ok = isinstance(payload, frozenset) and all(isinstance(x, str) for x in payload)
    elif name in (Kind.MAX_REGISTER, Kind.MIN_REGISTER):
        ok = isinstance(payload, Fraction)
    elif name is Kind.GROW_COUNTER:
        ok = (
            isinstance(payload, tuple)
            and all(isinstance(k, str) and isinstance(n, int) and n >= 0 for k, n in payload)
            and list(payload) == sorted(payload)
            and len({k for k, _ in payload}) == len(payload)
        )
    elif name is Kind.MAP_OF_JOINS:
        ok = (
            isinstance(payload, tuple)
            and all(isinstance(k, str) and isinstance(v, LatticeValue) and v.kind == kind.inner
                    for k, v in payload)
            and [k for k, _ in payload] == sorted({k for k, _ in payload})
        )
    elif name is Kind.CAUSAL_APPEND:
        ok = isinstance(payload, frozenset) and all(isinstance(e, Entry) for e in payload)
    else:
        ok = isinstance(payload, str)
    if not ok:
        raise ValueError(f"payload {payload!r} does not match kind {kind}")


def make_value(kind: JoinKind, raw: Any, author: str = "", *, _wire: bool = False) -> LatticeValue:
    """Build a value of ``kind`` from a plain (JSON-like) description.

    Scripts describe contributions loosely: a grow_counter contribution may be
    a bare count (credited to ``author``) and a causal_append contribution a
    list of item strings (stamped later by the engine). ``_wire`` selects the
    strict serialized form instead.
    """
    name = kind.name
    if name is Kind.SET_UNION:
        if isinstance(raw, str) or not isinstance(raw, Iterable):
            raise ValueError("set_union payload must be a list of strings")
        items = list(raw)
        if not all(isinstance(x, str) for x in items):
            raise ValueError("set_union payload must be a list of strings")
        return LatticeValue(kind, frozenset(items))
    if name in (Kind.MAX_REGISTER, Kind.MIN_REGISTER):
        return LatticeValue(kind, to_rational(raw))
    if name is Kind.GROW_COUNTER:
        if isinstance(raw, int) and not isinstance(raw, bool) and not _wire:
            counts = {author: raw}
        elif isinstance(raw, Mapping):
            counts = dict(raw)
        else:
            raise ValueError("grow_counter payload must be a count or a replica map")
        for k, n in counts.items():
            if not isinstance(n, int) or isinstance(n, bool) or n < 0:
                raise ValueError(f"grow_counter count for {k!r} must be a non-negative integer")
        return LatticeValue(kind, tuple(sorted(counts.items())))
    if name is Kind.MAP_OF_JOINS:
        if not isinstance(raw, Mapping):
            raise ValueError("map_of_joins payload must be an object")
        assert kind.inner is not None
        inner = {
            str(k): (LatticeValue.from_json(v) if _wire else make_value(kind.inner, v, author))
            for k, v in raw.items()
        }
        for v in inner.values():
            if v.kind != kind.inner:
                raise ValueError("map_of_joins entry has the wrong inner kind")
        return LatticeValue(kind, tuple(sorted(inner.items())))
    if name is Kind.CAUSAL_APPEND:
        if isinstance(raw, str) or not isinstance(raw, Iterable):
            raise ValueError("causal_append payload must be a list")
        entries = []
        for e in raw:
            if _wire:
                entries.append(Entry(e["author"], e["item"],
                                     tuple(sorted((str(k), int(v)) for k, v in e["stamp"].items()))))
            else:
                if not isinstance(e, str):
                    raise ValueError("causal_append contribution must be a list of strings")
                entries.append(Entry(author, e, ()))
        return LatticeValue(kind, frozenset(entries))
    if not isinstance(raw, str):
        raise ValueError("exclusive_assign payload must be a string")
    return LatticeValue(kind, raw)


def _payload_to_json(kind: JoinKind, payload: Any) -> Any:
    name = kind.name
    if name is Kind.SET_UNION:
        return sorted(payload)
    if name in (Kind.MAX_REGISTER, Kind.MIN_REGISTER):
        return format_rational(payload)
    if name is Kind.GROW_COUNTER:
        return dict(payload)
    if name is Kind.MAP_OF_JOINS:
        return {k: v.to_json() for k, v in payload}
    if name is Kind.CAUSAL_APPEND:
        ordered = LatticeValue(kind, payload).entries
        return [{"author": e.author, "item": e.item, "stamp": dict(e.stamp)} for e in ordered]
    return payload


def _require_joinable(a: LatticeValue, b: LatticeValue) -> None:
    if a.kind != b.kind:
        raise KindMismatch(f"cannot join {a.kind} with {b.kind}")
    if not a.kind.is_semilattice:
        raise NotASemilattice(f"{a.kind} has no join; merging it needs an arbiter")


def join(a: LatticeValue, b: LatticeValue) -> LatticeValue:
    """Least upper bound of two values of the same semilattice kind."""
    _require_joinable(a, b)
    kind = a.kind
    name = kind.name
    if name in (Kind.SET_UNION, Kind.CAUSAL_APPEND):
        return LatticeValue(kind, a.payload | b.payload)
    if name is Kind.MAX_REGISTER:
        return LatticeValue(kind, max(a.payload, b.payload))
    if name is Kind.MIN_REGISTER:
        return LatticeValue(kind, min(a.payload, b.payload))
    if name is Kind.GROW_COUNTER:
        merged = dict(a.payload)
        for k, n in b.payload:
            merged[k] = max(merged.get(k, 0), n)
        return LatticeValue(kind, tuple(sorted(merged.items())))
    merged_map = dict(a.payload)
    for k, v in b.payload:
        merged_map[k] = join(merged_map[k], v) if k in merged_map else v
    return LatticeValue(kind, tuple(sorted(merged_map.items())))


def leq(a: LatticeValue, b: LatticeValue) -> bool:
    """Growth order: ``a`` is below ``b`` iff joining adds nothing to ``b``."""
    return join(a, b) == b


def merge_all(values: Iterable[LatticeValue]) -> LatticeValue:
    values = list(values)
    if not values:
        raise EmptyInput("merge_all needs at least one value")
    first = values[0]
    if not first.kind.is_semilattice:
        raise NotASemilattice(f"{first.kind} has no join; merging it needs an arbiter")
    for v in values[1:]:
        _require_joinable(first, v)
    return reduce(join, values)


def grow(value: LatticeValue, tag: str) -> LatticeValue:
    """A value strictly above ``value``, marked with ``tag`` where the kind allows.

    The engine uses this to build provisional drafts that a later revision
    retracts.
    """
    kind = value.kind
    name = kind.name
    if name is Kind.SET_UNION:
        extra = tag
        while extra in value.payload:
            extra += "'"
        return LatticeValue(kind, value.payload | {extra})
    if name is Kind.MAX_REGISTER:
        return LatticeValue(kind, value.payload + 1)
    if name is Kind.MIN_REGISTER:
        return LatticeValue(kind, value.payload - 1)
    if name is Kind.GROW_COUNTER:
        counts = dict(value.payload)
        counts[tag] = counts.get(tag, 0) + 1
        return LatticeValue(kind, tuple(sorted(counts.items())))
    if name is Kind.CAUSAL_APPEND:
        top = max((e.height for e in value.payload), default=0)
        return LatticeValue(kind, value.payload | {Entry(tag, tag, ((tag, top + 1),))})
    if name is Kind.MAP_OF_JOINS:
        assert kind.inner is not None
        entries = dict(value.payload)
        if tag in entries:
            entries[tag] = grow(entries[tag], tag)
        else:
            entries[tag] = _sample(kind.inner, tag)
        return LatticeValue(kind, tuple(sorted(entries.items())))
    return LatticeValue(kind, f"{value.payload}+{tag}")


def _sample(kind: JoinKind, tag: str) -> LatticeValue:
    name = kind.name
    if name is Kind.SET_UNION:
        return LatticeValue(kind, frozenset({tag}))
    if name in (Kind.MAX_REGISTER, Kind.MIN_REGISTER):
        return LatticeValue(kind, Fraction(0))
    if name is Kind.GROW_COUNTER:
        return LatticeValue(kind, ((tag, 1),))
    if name is Kind.CAUSAL_APPEND:
        return LatticeValue(kind, frozenset({Entry(tag, tag, ((tag, 1),))}))
    if name is Kind.MAP_OF_JOINS:
        assert kind.inner is not None
        return LatticeValue(kind, ((tag, _sample(kind.inner, tag)),))
    return LatticeValue(kind, tag)
