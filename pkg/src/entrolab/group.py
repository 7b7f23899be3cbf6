"""Free groups F_k and integer lattices Z^d.

Elements are immutable.  Free-group words are kept fully reduced in
exponent-run form, ``((generator, exponent), ...)``; lattice elements are
integer vectors.  All finite sets are stored in one global canonical order
(word length, then lexicographic on letters with ``a < a^-1 < b < ...``)
so every downstream enumeration is deterministic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

from .caps import DEFAULT_CAP_BALL
from .errors import ArgumentError, ResourceError

FREE = "free"
LATTICE = "lattice"


@dataclass(frozen=True)
class GroupSpec:
    kind: str
    rank: int

    def __post_init__(self):
        if self.kind not in (FREE, LATTICE):
            raise ArgumentError(f"unknown group kind {self.kind!r}")
        if not isinstance(self.rank, int) or self.rank < 1:
            raise ArgumentError("rank/dimension must be a positive integer")
        if self.rank > 26:
            raise ArgumentError("at most 26 generators are supported")

    @classmethod
    def free(cls, k: int) -> "GroupSpec":
        return cls(FREE, k)

    @classmethod
    def lattice(cls, d: int) -> "GroupSpec":
        return cls(LATTICE, d)

    @property
    def identity(self) -> "GroupElement":
        if self.kind == FREE:
            return GroupElement(self, ())
        return GroupElement(self, (0,) * self.rank)

    def generator(self, i: int) -> "GroupElement":
        if not 0 <= i < self.rank:
            raise ArgumentError(f"generator index {i} out of range")
        if self.kind == FREE:
            return GroupElement(self, ((i, 1),))
        v = [0] * self.rank
        v[i] = 1
        return GroupElement(self, tuple(v))

    @property
    def generators(self) -> tuple["GroupElement", ...]:
        return tuple(self.generator(i) for i in range(self.rank))

    @property
    def symmetric_generators(self) -> tuple["GroupElement", ...]:
        out = []
        for g in self.generators:
            out.append(g)
            out.append(g.inverse())
        return tuple(out)

    def element(self, value) -> "GroupElement":
        """Parse a word string (``"aB"``, capital = inverse, ``"e"`` = identity),
        an integer (Z only) or an integer vector (lattices)."""
        if isinstance(value, GroupElement):
            if value.spec != self:
                raise ArgumentError("element belongs to a different group")
            return value
        if isinstance(value, str):
            return self._parse_word(value)
        if isinstance(value, bool):
            raise ArgumentError(f"cannot interpret {value!r} as a group element")
        if isinstance(value, int):
            if self.kind != LATTICE or self.rank != 1:
                raise ArgumentError("integers denote elements of Z only")
            return GroupElement(self, (value,))
        if isinstance(value, (list, tuple)):
            if self.kind != LATTICE or len(value) != self.rank:
                raise ArgumentError(f"cannot interpret {value!r} as an element of {self}")
            return GroupElement(self, tuple(int(x) for x in value))
        raise ArgumentError(f"cannot interpret {value!r} as a group element")

    def _parse_word(self, text: str) -> "GroupElement":
        text = text.strip()
        g = self.identity
        if text in ("", "e"):
            return g
        for ch in text:
            i = ord(ch.lower()) - ord("a")
            if not ch.isalpha() or not 0 <= i < self.rank:
                raise ArgumentError(f"bad letter {ch!r} in word {text!r} for {self}")
            letter = self.generator(i)
            g = g * (letter.inverse() if ch.isupper() else letter)
        return g

    def __str__(self):
        return f"F{self.rank}" if self.kind == FREE else f"Z^{self.rank}"


@dataclass(frozen=True)
class GroupElement:
    spec: GroupSpec
    data: tuple

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return multiply(self, other)

    def inverse(self) -> "GroupElement":
        if self.spec.kind == FREE:
            return GroupElement(self.spec, tuple((g, -e) for g, e in reversed(self.data)))
        return GroupElement(self.spec, tuple(-x for x in self.data))

    @property
    def is_identity(self) -> bool:
        if self.spec.kind == FREE:
            return not self.data
        return not any(self.data)

    @cached_property
    def length(self) -> int:
        """Word length with respect to the standard symmetric generators."""
        if self.spec.kind == FREE:
            return sum(abs(e) for _, e in self.data)
        return sum(abs(x) for x in self.data)

    @cached_property
    def letters(self) -> tuple[tuple[int, int], ...]:
        """The word as a sequence of (generator, +1/-1) letters."""
        out = []
        if self.spec.kind == FREE:
            for g, e in self.data:
                out.extend([(g, 1 if e > 0 else -1)] * abs(e))
        else:
            for g, x in enumerate(self.data):
                out.extend([(g, 1 if x > 0 else -1)] * abs(x))
        return tuple(out)

    @cached_property
    def sort_key(self) -> tuple:
        return (self.length, tuple((g, 0 if s > 0 else 1) for g, s in self.letters))

    def __lt__(self, other: "GroupElement") -> bool:
        return self.sort_key < other.sort_key

    def word(self) -> str:
        if self.is_identity:
            return "e"
        return "".join(chr(97 + g) if s > 0 else chr(65 + g) for g, s in self.letters)

    def to_json(self):
        if self.spec.kind == LATTICE and self.spec.rank == 1:
            return self.data[0]
        if self.spec.kind == LATTICE:
            return list(self.data)
        return self.word()

    def __str__(self):
        if self.spec.kind == LATTICE:
            return str(self.data[0]) if self.spec.rank == 1 else str(self.data)
        return self.word()

    __repr__ = __str__


def _check_same(g: GroupElement, h: GroupElement):
    if g.spec != h.spec:
        raise ArgumentError(f"elements of different groups: {g.spec} and {h.spec}")


def multiply(g: GroupElement, h: GroupElement) -> GroupElement:
    _check_same(g, h)
    if g.spec.kind == LATTICE:
        return GroupElement(g.spec, tuple(a + b for a, b in zip(g.data, h.data)))
    runs = list(g.data)
    for gen, e in h.data:
        if runs and runs[-1][0] == gen:
            total = runs[-1][1] + e
            if total == 0:
                runs.pop()
            else:
                runs[-1] = (gen, total)
        else:
            runs.append((gen, e))
    return GroupElement(g.spec, tuple(runs))


class FiniteSubset:
    """A deduplicated finite set of group elements in canonical order."""

    __slots__ = ("spec", "elements", "_set")

    def __init__(self, spec: GroupSpec, elements: Iterable[GroupElement] = ()):
        elems = set()
        for x in elements:
            if x.spec != spec:
                raise ArgumentError(f"element {x} is not in {spec}")
            elems.add(x)
        self.spec = spec
        self.elements: tuple[GroupElement, ...] = tuple(sorted(elems, key=lambda x: x.sort_key))
        self._set = frozenset(elems)

    @classmethod
    def parse(cls, spec: GroupSpec, values: Sequence) -> "FiniteSubset":
        return cls(spec, (spec.element(v) for v in values))

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)

    def __getitem__(self, i):
        return self.elements[i]

    def __contains__(self, x):
        return x in self._set

    def __eq__(self, other):
        if not isinstance(other, FiniteSubset):
            return NotImplemented
        return self.spec == other.spec and self._set == other._set

    def __hash__(self):
        return hash((self.spec, self._set))

    def __le__(self, other: "FiniteSubset") -> bool:
        return self._set <= other._set

    def union(self, other: "FiniteSubset") -> "FiniteSubset":
        return FiniteSubset(self.spec, self._set | other._set)

    def index(self, x: GroupElement) -> int:
        return self.elements.index(x)

    def inverse(self) -> "FiniteSubset":
        return FiniteSubset(self.spec, (x.inverse() for x in self.elements))

    def translate(self, t: GroupElement) -> "FiniteSubset":
        """Left translate ``t * self``."""
        return FiniteSubset(self.spec, (t * x for x in self.elements))

    @property
    def max_length(self) -> int:
        return max((x.length for x in self.elements), default=0)

    def to_json(self):
        return [x.to_json() for x in self.elements]

    def __repr__(self):
        return "{" + ", ".join(str(x) for x in self.elements) + "}"


def ball(spec: GroupSpec, r: int, cap: int = DEFAULT_CAP_BALL) -> FiniteSubset:
    """All elements of word length <= r, found by BFS on the Cayley graph."""
    if r < 0:
        raise ArgumentError("radius must be nonnegative")
    gens = spec.symmetric_generators
    seen = {spec.identity}
    frontier = deque([spec.identity])
    for _ in range(r):
        nxt = deque()
        for x in frontier:
            for s in gens:
                y = x * s
                if y not in seen:
                    seen.add(y)
                    nxt.append(y)
                    if len(seen) > cap:
                        raise ResourceError(f"ball of radius {r} in {spec} exceeds cap {cap}")
        frontier = nxt
    return FiniteSubset(spec, seen)


def interval(spec: GroupSpec, lo: int, hi: int) -> FiniteSubset:
    """The integer interval [lo, hi] in Z."""
    if spec.kind != LATTICE or spec.rank != 1:
        raise ArgumentError("intervals are defined for Z only")
    return FiniteSubset(spec, (GroupElement(spec, (i,)) for i in range(lo, hi + 1)))


def product_set(W: FiniteSubset, F: FiniteSubset, cap: int = DEFAULT_CAP_BALL) -> FiniteSubset:
    if W.spec != F.spec:
        raise ArgumentError("sets belong to different groups")
    if len(W) * len(F) > cap:
        raise ResourceError(f"|W||F| = {len(W) * len(F)} exceeds cap {cap}")
    return FiniteSubset(W.spec, (w * f for w in W for f in F))


def expansion_ratio(W: FiniteSubset, F: FiniteSubset) -> Fraction:
    """|WF| / |F| as an exact rational; use ``float()`` for the decimal value."""
    if len(F) == 0:
        raise ArgumentError("expansion ratio needs a nonempty F")
    return Fraction(len(product_set(W, F)), len(F))


def symmetrize(F: FiniteSubset) -> FiniteSubset:
    return F.union(F.inverse())

