"""Subshifts over F_k and Z^d: pattern counts, the symbolic metric, and
naive topological entropy estimates.

The generating cover is the clopen cover by the letter at the identity, so
the join over ``F`` is the set of ``F``-patterns and ``N(U^F)`` is a count.
Counts use local admissibility (no forbidden pattern translate inside
``F``), which over-counts for general subshifts of finite type.  Two cases
are exact: full shifts, and one-step SFTs on Z, which are counted on the
trimmed transfer graph.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Mapping, NamedTuple, Sequence

import numpy as np

from . import caps
from .errors import ArgumentError, ResourceError
from .group import LATTICE, FiniteSubset, GroupElement, GroupSpec, ball, interval
from .rng import POINT_SAMPLES, stream
from .report import EntropyReport, ReportRow, normalize_schedule, with_running_min
from .separation import FiniteMetricSpace, sep_number

SEPARATION_PROBE_CAVEAT = (
    "sampled-point probe: the entropy quantity takes a sup over eps and an inf over F "
    "on all of X; on a finite sample this value is neither a certified upper nor a "
    "certified lower bound of h_top"
)


@dataclass(frozen=True)
class Pattern:
    shape: FiniteSubset
    labels: tuple

    def __post_init__(self):
        if len(self.shape) != len(self.labels):
            raise ArgumentError("pattern must label every element of its shape")
        if len(self.shape) == 0:
            raise ArgumentError("pattern shape must be nonempty")

    @classmethod
    def of(cls, spec: GroupSpec, cells: Mapping) -> "Pattern":
        """Build from ``{element: label}``; the labels follow canonical order."""
        pairs = {spec.element(k): v for k, v in cells.items()}
        shape = FiniteSubset(spec, pairs)
        return cls(shape, tuple(pairs[x] for x in shape))

    def to_json(self) -> dict:
        return {"shape": self.shape.to_json(), "labels": list(self.labels)}


class Subshift:
    def __init__(self, alphabet: Sequence, forbidden: Sequence[Pattern], group: GroupSpec):
        self.alphabet = tuple(alphabet)
        if not self.alphabet:
            raise ArgumentError("alphabet must be nonempty")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ArgumentError("alphabet letters must be distinct")
        letters = set(self.alphabet)
        for p in forbidden:
            if p.shape.spec != group:
                raise ArgumentError("forbidden pattern lives in another group")
            if not set(p.labels) <= letters:
                raise ArgumentError(f"forbidden pattern uses letters outside the alphabet: {p.labels}")
        self.forbidden = tuple(sorted(set(forbidden), key=lambda p: _canon(p.to_json())))
        self.group = group
        self.letter_index = {a: i for i, a in enumerate(self.alphabet)}

    @classmethod
    def full(cls, alphabet: Sequence, group: GroupSpec) -> "Subshift":
        return cls(alphabet, (), group)

    @property
    def is_full(self) -> bool:
        return not self.forbidden

    @property
    def is_one_step_z(self) -> bool:
        """All forbidden shapes are single sites or adjacent pairs in Z."""
        if self.group.kind != LATTICE or self.group.rank != 1:
            return False
        for p in self.forbidden:
            xs = [x.data[0] for x in p.shape]
            if len(xs) > 2 or (len(xs) == 2 and xs[1] - xs[0] != 1):
                return False
        return True

    def to_json(self) -> dict:
        g = {"free": self.group.rank} if self.group.kind != LATTICE else {"lattice": self.group.rank}
        return {
            "alphabet": list(self.alphabet),
            "group": g,
            "forbidden": [p.to_json() for p in self.forbidden],
        }

    def canonical_json(self) -> str:
        return _canon(self.to_json())

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()

    @classmethod
    def from_json(cls, data: Mapping) -> "Subshift":
        group = parse_group(data["group"])
        forbidden = []
        for item in data.get("forbidden", []):
            shape, labels = item["shape"], item["labels"]
            if len(shape) != len(labels):
                raise ArgumentError("forbidden pattern shape and labels differ in length")
            cells = {}
            for x, lab in zip(shape, labels):
                g = group.element(x)
                if g in cells:
                    raise ArgumentError("repeated coordinate in forbidden pattern")
                cells[g] = str(lab)
            forbidden.append(Pattern.of(group, cells))
        return cls([str(a) for a in data["alphabet"]], forbidden, group)

    def __repr__(self):
        return f"Subshift({self.canonical_json()})"


def _canon(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def parse_group(g) -> GroupSpec:
    if isinstance(g, GroupSpec):
        return g
    if not isinstance(g, Mapping) or len(g) != 1:
        raise ArgumentError('group must look like {"free": k} or {"lattice": d}')
    (kind, rank), = g.items()
    if kind not in ("free", "lattice"):
        raise ArgumentError(f"unknown group kind {kind!r}")
    return GroupSpec(kind, int(rank))


def golden_mean_shift() -> Subshift:
    Z = GroupSpec.lattice(1)
    return Subshift(("0", "1"), [Pattern.of(Z, {0: "1", 1: "1"})], Z)


def edge_shift(group: GroupSpec, alphabet: Sequence, forbidden_pairs, generator: int = 0) -> Subshift:
    """One-step SFT along a single generator: ``(a, b)`` forbidden at ``(e, g)``."""
    g = group.generator(generator)
    pats = [Pattern.of(group, {group.identity: a, g: b}) for a, b in forbidden_pairs]
    return Subshift(alphabet, pats, group)


# -- pattern counting -----------------------------------------------------------


def _constraints(s: Subshift, F: FiniteSubset) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    """Every translate ``tP`` of a forbidden pattern with ``tP`` inside ``F``."""
    index = {x: i for i, x in enumerate(F)}
    out = set()
    for pat in s.forbidden:
        anchor = pat.shape[0].inverse()
        labels = [s.letter_index[a] for a in pat.labels]
        for f in F:
            t = f * anchor
            pos = []
            for x in pat.shape:
                i = index.get(t * x)
                if i is None:
                    break
                pos.append(i)
            else:
                out.add(tuple(sorted(zip(pos, labels))))
    return sorted((tuple(p for p, _ in c), tuple(l for _, l in c)) for c in out)


def _local_count(s: Subshift, F: FiniteSubset, limit: int) -> int:
    """Variable-elimination count of locally admissible labelings of F."""
    k = len(s.alphabet)
    n = len(F)
    cons = _constraints(s, F)
    by_last = defaultdict(list)
    last_use = [-1] * n
    for pos, labs in cons:
        L = max(pos)
        by_last[L].append((pos, labs))
        for p in pos:
            last_use[p] = max(last_use[p], L)
    states: dict[tuple, int] = {(): 1}
    frontier: list[int] = []
    for i in range(n):
        keep = [v for v in frontier + [i] if last_use[v] > i]
        checks = by_last.get(i, [])
        new: dict[tuple, int] = defaultdict(int)
        for st, cnt in states.items():
            assign = dict(zip(frontier, st))
            for a in range(k):
                assign[i] = a
                if any(all(assign[p] == l for p, l in zip(pos, labs)) for pos, labs in checks):
                    continue
                new[tuple(assign[v] for v in keep)] += cnt
        states, frontier = new, keep
        if len(states) > limit:
            raise ResourceError(f"pattern-count state table of {len(states)} exceeds cap {limit}")
    return sum(states.values())


def _transfer_graph(s: Subshift) -> tuple[np.ndarray, list[int]]:
    """Adjacency of the one-step SFT and its essential (bi-infinitely extendable) letters."""
    k = len(s.alphabet)
    allowed = np.ones((k, k), dtype=bool)
    alive = set(range(k))
    for p in s.forbidden:
        labs = [s.letter_index[a] for a in p.labels]
        if len(labs) == 1:
            alive.discard(labs[0])
        else:
            allowed[labs[0], labs[1]] = False
    changed = True
    while changed:
        changed = False
        for v in sorted(alive):
            if not any(allowed[v, w] for w in alive) or not any(allowed[u, v] for u in alive):
                alive.discard(v)
                changed = True
    return allowed, sorted(alive)


def _one_step_z_count(s: Subshift, F: FiniteSubset) -> int:
    """Exact number of F-patterns occurring in points of a one-step Z-SFT."""
    allowed, alive = _transfer_graph(s)
    if not alive:
        return 0
    xs = sorted(x.data[0] for x in F)
    members = set(xs)
    succ = {v: frozenset(w for w in alive if allowed[v, w]) for v in alive}
    states: dict[frozenset, int] = {frozenset([v]): 1 for v in alive}
    for p in range(xs[0] + 1, xs[-1] + 1):
        new: dict[frozenset, int] = defaultdict(int)
        for st, cnt in states.items():
            nxt = frozenset().union(*(succ[v] for v in st))
            if p in members:
                for w in nxt:
                    new[frozenset([w])] += cnt
            elif nxt:
                new[nxt] += cnt
        states = new
    return sum(states.values())


class PatternCount(NamedTuple):
    count: int
    exact: bool


def admissible_pattern_count(s: Subshift, F: FiniteSubset, cap: int | None = None) -> PatternCount:
    """``N(U^F)`` for the letter cover.

    ``exact`` is False when the count comes from local admissibility on a
    general SFT, where it is an upper bound.
    """
    if len(F) == 0:
        raise ArgumentError("F must be nonempty")
    if F.spec != s.group:
        raise ArgumentError("F and the subshift live in different groups")
    limit = caps.cap_cells(cap)
    if s.is_full:
        return PatternCount(len(s.alphabet) ** len(F), True)
    if s.is_one_step_z:
        count = _one_step_z_count(s, F)
        exact = True
    else:
        count = _local_count(s, F, limit)
        exact = False
    if count == 0:
        raise ArgumentError("subshift has no admissible patterns on F (empty subshift)")
    return PatternCount(count, exact)


def iter_admissible(s: Subshift, F: FiniteSubset) -> Iterator[tuple]:
    """Locally admissible labelings of F (letter tuples), lexicographic in canonical order."""
    n = len(F)
    by_last = defaultdict(list)
    for pos, labs in _constraints(s, F):
        by_last[max(pos)].append((pos, labs))
    assign = [0] * n
    k = len(s.alphabet)

    def rec(i):
        if i == n:
            yield tuple(s.alphabet[a] for a in assign)
            return
        for a in range(k):
            assign[i] = a
            if any(all(assign[p] == l for p, l in zip(pos, labs)) for pos, labs in by_last.get(i, ())):
                continue
            yield from rec(i + 1)

    yield from rec(0)


def coarse_pattern_count(s: Subshift, F: FiniteSubset, letter_map: Mapping, cap: int | None = None) -> int:
    """``N(V^F)`` for the coarser cover obtained by merging letters via ``letter_map``."""
    limit = caps.cap_cells(cap)
    images = set()
    for i, pat in enumerate(iter_admissible(s, F)):
        if i >= limit:
            raise ResourceError(f"more than {limit} admissible patterns")
        images.add(tuple(letter_map[a] for a in pat))
    return len(images)


def naive_topological_entropy_estimate(s: Subshift, schedule, cap: int | None = None) -> EntropyReport:
    """Per-F values ``log N(U^F) / |F|`` with their running minimum (an upper bound)."""
    rows = []
    all_exact = True
    for label, F in normalize_schedule(schedule):
        pc = admissible_pattern_count(s, F, cap)
        all_exact &= pc.exact
        rows.append(
            ReportRow(label, len(F), math.log(pc.count) / len(F),
                      "exact" if s.is_full else "upper",
                      extra={"count": pc.count, "count_exact": pc.exact})
        )
    with_running_min(rows)
    notes = ["running minimum over the schedule is an upper bound on h_top of the letter cover"]
    if not all_exact:
        notes.append("pattern counts use local admissibility and over-count general SFTs")
    return EntropyReport(
        "naive-topological-entropy",
        rows,
        rows[-1].running_min,
        "exact" if s.is_full else "upper",
        notes,
        {"counts_exact": all_exact},
    )


def restrict_to_generator(s: Subshift, generator: int = 0) -> Subshift:
    """The Z-subshift seen along the cyclic subgroup of one generator.

    Forbidden patterns whose shape lies in a single coset of that subgroup
    are pulled back to Z; the others can never fit inside it.
    """
    Z = GroupSpec.lattice(1)
    pats = []
    for p in s.forbidden:
        base = p.shape[0].inverse()
        cells = {}
        for x, lab in zip(p.shape, p.labels):
            y = base * x
            e = _cyclic_exponent(y, generator)
            if e is None:
                break
            cells[e] = lab
        else:
            pats.append(Pattern.of(Z, cells))
    return Subshift(s.alphabet, pats, Z)


def _cyclic_exponent(y: GroupElement, generator: int) -> int | None:
    if y.spec.kind == LATTICE:
        if any(v for i, v in enumerate(y.data) if i != generator):
            return None
        return y.data[generator]
    if not y.data:
        return 0
    if len(y.data) == 1 and y.data[0][0] == generator:
        return y.data[0][1]
    return None


def cyclic_segment(spec: GroupSpec, generator: int, n: int) -> FiniteSubset:
    """``{g^0, ..., g^n}`` for a generator ``g``."""
    g = spec.generator(generator)
    out, x = [], spec.identity
    for _ in range(n + 1):
        out.append(x)
        x = x * g
    return FiniteSubset(spec, out)


def product_subshift(s1: Subshift, s2: Subshift) -> Subshift:
    """Direct product on the alphabet of letter pairs ``"a|b"``."""
    if s1.group != s2.group:
        raise ArgumentError("product of subshifts over different groups")
    alphabet = [f"{a}|{b}" for a in s1.alphabet for b in s2.alphabet]
    pats = []
    for side, s, other in ((0, s1, s2), (1, s2, s1)):
        for p in s.forbidden:
            for fill in itertools.product(other.alphabet, repeat=len(p.shape)):
                labs = tuple(f"{a}|{b}" if side == 0 else f"{b}|{a}" for a, b in zip(p.labels, fill))
                pats.append(Pattern(p.shape, labs))
    return Subshift(alphabet, pats, s1.group)


# -- points and metrics --------------------------------------------------------


@lru_cache(maxsize=None)
def cached_ball(spec: GroupSpec, r: int) -> FiniteSubset:
    return ball(spec, r)


@lru_cache(maxsize=None)
def _ball_index(spec: GroupSpec, r: int) -> dict:
    return {x: i for i, x in enumerate(cached_ball(spec, r))}


@dataclass(frozen=True)
class SymbolicPoint:
    """A point of A^Gamma known on the ball of radius ``radius``."""

    spec: GroupSpec
    radius: int
    labels: tuple

    def __post_init__(self):
        if len(self.labels) != len(cached_ball(self.spec, self.radius)):
            raise ArgumentError("labels must cover the truncation ball")

    @classmethod
    def from_function(cls, spec: GroupSpec, radius: int, fn) -> "SymbolicPoint":
        return cls(spec, radius, tuple(fn(x) for x in cached_ball(spec, radius)))

    def __getitem__(self, g: GroupElement):
        return self.labels[_ball_index(self.spec, self.radius)[g]]

    def translate(self, g: GroupElement) -> "SymbolicPoint":
        """``g . x`` with ``(g.x)(s) = x(g^-1 s)``, known on the radius ``R - |g|`` ball."""
        r = self.radius - g.length
        if r < 0:
            raise ArgumentError(f"translating by {g} needs truncation radius >= {g.length}")
        gi = g.inverse()
        return SymbolicPoint(self.spec, r, tuple(self[gi * s] for s in cached_ball(self.spec, r)))


class Distance(NamedTuple):
    """A distance known to lie in ``[value, upper]``; the interval is a point
    unless the two truncations agree everywhere."""

    value: float
    upper: float

    @property
    def truncated(self) -> bool:
        return self.upper > self.value


def _first_difference(a: Sequence, b: Sequence) -> int | None:
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return i
    return None


def point_metric(x: SymbolicPoint, y: SymbolicPoint) -> Distance:
    """``2^-i`` for the first canonical index ``i`` where the labels differ."""
    if x.spec != y.spec or x.radius != y.radius:
        raise ArgumentError("points must share group and truncation radius")
    i = _first_difference(x.labels, y.labels)
    if i is None:
        return Distance(0.0, 2.0 ** -len(x.labels))
    d = 2.0 ** -i
    return Distance(d, d)


def dynamical_pseudometric(x: SymbolicPoint, y: SymbolicPoint, F: FiniteSubset) -> Distance:
    """``max_{g in F} d(g.x, g.y)``."""
    if x.spec != y.spec or x.radius != y.radius:
        raise ArgumentError("points must share group and truncation radius")
    need = F.max_length
    if x.radius < need:
        raise ArgumentError(f"truncation radius {x.radius} too small; need radius >= {need}")
    lo, hi = 0.0, 0.0
    for g in F:
        d = point_metric(x.translate(g), y.translate(g))
        lo, hi = max(lo, d.value), max(hi, d.upper)
    return Distance(lo, hi)


def _window_index(spec: GroupSpec, radius: int, g: GroupElement) -> np.ndarray:
    """Positions in B_R of ``g^-1 s`` for ``s`` in B_{R-|g|}, in canonical order."""
    idx = _ball_index(spec, radius)
    gi = g.inverse()
    return np.array([idx[gi * s] for s in cached_ball(spec, radius - g.length)], dtype=np.int64)


def pseudometric_matrix(points: np.ndarray, spec: GroupSpec, radius: int, F: FiniteSubset) -> np.ndarray:
    """Lower values of ``d_F`` between all rows of a (points x |B_R|) label array."""
    if radius < F.max_length:
        raise ArgumentError(f"truncation radius {radius} too small; need radius >= {F.max_length}")
    n = points.shape[0]
    D = np.zeros((n, n))
    for g in F:
        w = points[:, _window_index(spec, radius, g)]
        for i in range(n):
            diff = w != w[i]
            anyd = diff.any(axis=1)
            first = diff.argmax(axis=1)
            d = np.where(anyd, 2.0 ** -first.astype(float), 0.0)
            np.maximum(D[i], d, out=D[i])
    return D


def separation_coordinates(spec: GroupSpec, eps: float, F: FiniteSubset) -> FiniteSubset:
    """Coordinates on which two points must differ to be eps-apart in ``d_F``.

    Under the first-disagreement metric, ``d(g.x, g.y) >= eps`` exactly when
    ``x`` and ``y`` differ somewhere on ``g^-1 C`` where ``C`` holds the first
    ``M = #{i : 2^-i >= eps}`` elements of the canonical order.
    """
    m = 0
    while 2.0 ** -m >= eps:
        m += 1
    if m == 0:
        return FiniteSubset(spec, [])
    r = 0
    while len(cached_ball(spec, r)) < m:
        r += 1
    head = cached_ball(spec, r).elements[:m]
    return FiniteSubset(spec, (g.inverse() * c for g in F for c in head))


def sep_symbolic(s: Subshift, eps: float, F: FiniteSubset | None = None, cap: int | None = None) -> PatternCount:
    """``sep(X, eps, d_F)`` under the first-disagreement metric.

    A maximal eps-separated set holds one point per pattern on the
    separation coordinates, so this is a pattern count (exact whenever the
    count is).
    """
    if F is None:
        F = FiniteSubset(s.group, [s.group.identity])
    K = separation_coordinates(s.group, eps, F)
    if len(K) == 0:
        return PatternCount(1, True)
    return admissible_pattern_count(s, K, cap)


# -- separation probe ----------------------------------------------------------


def _sample_labelings(s: Subshift, B: FiniteSubset, budget: int, seed: int, exhaustive: bool, cap: int) -> np.ndarray:
    if exhaustive:
        rows = []
        for i, pat in enumerate(iter_admissible(s, B)):
            if i >= cap:
                raise ResourceError(f"exhaustive sample exceeds cap {cap}")
            rows.append([s.letter_index[a] for a in pat])
        return np.array(rows, dtype=np.int64).reshape(len(rows), len(B))
    by_last = defaultdict(list)
    for pos, labs in _constraints(s, B):
        by_last[max(pos)].append((pos, labs))
    rng = stream(seed, POINT_SAMPLES)
    k, n = len(s.alphabet), len(B)
    seen, rows = set(), []
    attempts = 0
    while len(rows) < budget and attempts < 50 * budget + 100:
        attempts += 1
        assign = [0] * n
        ok = True
        for i in range(n):
            options = []
            for a in range(k):
                assign[i] = a
                if not any(all(assign[p] == l for p, l in zip(pos, labs)) for pos, labs in by_last.get(i, ())):
                    options.append(a)
            if not options:
                ok = False
                break
            assign[i] = options[int(rng.integers(len(options)))]
        key = tuple(assign)
        if ok and key not in seen:
            seen.add(key)
            rows.append(key)
    return np.array(rows, dtype=np.int64).reshape(len(rows), n)


def entropy_via_separation(
    s: Subshift,
    eps: float,
    schedule,
    sample_budget: int = 64,
    seed: int = 0,
    radius: int | None = None,
    exhaustive: bool = False,
    cap: int | None = None,
) -> EntropyReport:
    """Per-F ``log sep(sample, eps, d_F) / |F|`` on a seeded sample of points.

    Samples are a deterministic stream, so a larger budget sees a superset
    of points.  The cover-based estimate is listed beside each row.
    """
    items = normalize_schedule(schedule)
    limit = caps.cap_cells(cap)
    if radius is None:
        base = 0
        while 2.0 ** -len(cached_ball(s.group, base)) >= eps:
            base += 1
        radius = base + max(F.max_length for _, F in items)
    B = cached_ball(s.group, radius)
    pts = _sample_labelings(s, B, sample_budget, seed, exhaustive, limit)
    cover = naive_topological_entropy_estimate(s, items, cap)
    rows = []
    for (label, F), crow in zip(items, cover.rows):
        D = pseudometric_matrix(pts, s.group, radius, F)
        M = FiniteMetricSpace(range(len(pts)), D, validate=False)
        try:
            cert = sep_number(M, eps, "exact")
        except ResourceError:
            cert = sep_number(M, eps, "greedy")
        rows.append(
            ReportRow(label, len(F), math.log(cert.count) / len(F), "probe",
                      extra={"sep": cert.count, "sep_kind": cert.kind, "samples": len(pts),
                             "cover_value_nats": crow.value})
        )
    with_running_min(rows)
    return EntropyReport("separation-entropy-probe", rows, rows[-1].running_min, "probe",
                         [SEPARATION_PROBE_CAVEAT], {"radius": radius, "eps": eps})


def interval_schedule(n_max: int, n_min: int = 0) -> list[tuple[str, FiniteSubset]]:
    Z = GroupSpec.lattice(1)
    return [(f"[0,{n}]", interval(Z, 0, n)) for n in range(n_min, n_max + 1)]


def ball_schedule(spec: GroupSpec, radii) -> list[tuple[str, FiniteSubset]]:
    return [(f"B{r}", cached_ball(spec, r)) for r in radii]
