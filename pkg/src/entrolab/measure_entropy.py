"""Shannon entropy of partitions and naive measure entropy of shift systems.

Natural logarithms throughout.  The shift acts on labelings by
``(g.x)(s) = x(g^-1 s)``, so the translate ``g.alpha`` of a partition
reading coordinate ``e`` reads coordinate ``g``, and the join over a finite
set ``F`` is the partition by labelings of the coordinates ``F``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence

import numpy as np

from . import caps
from .errors import ArgumentError, ResourceError, UnsupportedMeasureError
from .group import FiniteSubset, GroupElement, GroupSpec, expansion_ratio, interval, product_set
from .report import EntropyReport, ReportRow, normalize_schedule, with_running_min

NORMALIZATION_TOL = 1e-12
INVARIANCE_TOL = 1e-9


@dataclass(frozen=True)
class Distribution:
    probabilities: tuple[float, ...]

    def __init__(self, probabilities: Sequence[float], tol: float = NORMALIZATION_TOL):
        probs = tuple(float(p) for p in probabilities)
        if not probs:
            raise ArgumentError("empty distribution")
        if any(not math.isfinite(p) or p < 0 for p in probs):
            raise ArgumentError("probabilities must be finite and nonnegative")
        total = math.fsum(probs)
        if abs(total - 1.0) > tol:
            raise ArgumentError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probabilities", probs)

    def __len__(self):
        return len(self.probabilities)

    def __iter__(self):
        return iter(self.probabilities)


def _as_distribution(p) -> Distribution:
    return p if isinstance(p, Distribution) else Distribution(p)


def _entropy_terms(probs) -> float:
    return -math.fsum(p * math.log(p) for p in probs if p > 0)


def shannon_entropy(p) -> float:
    """``-sum p log p`` with ``0 log 0 = 0``."""
    p = _as_distribution(p)
    return max(0.0, _entropy_terms(p.probabilities))


class JointDistribution:
    """Joint law of two partitions; rows index the cells of alpha, columns of beta."""

    def __init__(self, matrix, row_marginal=None, col_marginal=None, tol: float = NORMALIZATION_TOL):
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.size == 0:
            raise ArgumentError("joint distribution must be a nonempty matrix")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ArgumentError("joint entries must be finite and nonnegative")
        total = math.fsum(m.ravel())
        if abs(total - 1.0) > tol:
            raise ArgumentError(f"joint mass {total!r} is not 1")
        for given, axis in ((row_marginal, 1), (col_marginal, 0)):
            if given is not None:
                given = np.asarray(list(_as_distribution(given)), dtype=float)
                got = m.sum(axis=axis)
                if given.shape != got.shape or np.max(np.abs(given - got)) > tol:
                    raise ArgumentError("joint is inconsistent with the declared marginal")
        self.matrix = m

    def row_marginal(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    def col_marginal(self) -> np.ndarray:
        return self.matrix.sum(axis=0)


def joint_entropy(j: JointDistribution) -> float:
    return max(0.0, _entropy_terms(j.matrix.ravel()))


def conditional_entropy(j: JointDistribution) -> float:
    """H(alpha | beta) for a joint with alpha on rows and beta on columns."""
    if not isinstance(j, JointDistribution):
        j = JointDistribution(j)
    m = j.matrix
    col = m.sum(axis=0)
    terms = []
    for (i, k), p in np.ndenumerate(m):
        if p > 0 and col[k] > 0:
            terms.append(p * math.log(p / col[k]))
    return max(0.0, -math.fsum(terms))


# -- shift measures -----------------------------------------------------------


class ShiftMeasure:
    group: GroupSpec
    alphabet: tuple

    def marginal(self, coords: FiniteSubset) -> dict[tuple, float]:
        """Law of the labels on ``coords`` (tuples in canonical coordinate order)."""
        raise NotImplementedError

    def letter_probabilities(self) -> dict[Hashable, float]:
        e = FiniteSubset(self.group, [self.group.identity])
        marg = self.marginal(e)
        return {a: marg.get((a,), 0.0) for a in self.alphabet}


@dataclass(frozen=True, eq=False)
class BernoulliMeasure(ShiftMeasure):
    """Product measure nu^Gamma of a base law on the alphabet."""

    group: GroupSpec
    alphabet: tuple
    base: Distribution

    def __post_init__(self):
        if len(self.alphabet) != len(self.base):
            raise ArgumentError("alphabet and base distribution differ in length")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise ArgumentError("alphabet letters must be distinct")

    @classmethod
    def of(cls, group: GroupSpec, probs: Sequence[float], alphabet: Sequence | None = None):
        if alphabet is None:
            alphabet = tuple(str(i) for i in range(len(probs)))
        return cls(group, tuple(alphabet), Distribution(probs))

    def marginal(self, coords: FiniteSubset) -> dict[tuple, float]:
        pairs = [(a, p) for a, p in zip(self.alphabet, self.base) if p > 0]
        out = {}
        for combo in itertools.product(pairs, repeat=len(coords)):
            out[tuple(a for a, _ in combo)] = math.prod(p for _, p in combo)
        return out


class CylinderMeasure(ShiftMeasure):
    """An invariant measure known only through its law on a declared finite domain.

    Marginals on a set ``F`` are answered from a left translate ``tF`` that
    fits inside the domain; shift invariance is checked on construction for
    every pair of overlapping translates of the domain.
    """

    def __init__(
        self,
        group: GroupSpec,
        alphabet: Sequence,
        domain: FiniteSubset,
        table: Mapping[tuple, float],
        check_invariance: bool = True,
        tol: float = INVARIANCE_TOL,
    ):
        self.group = group
        self.alphabet = tuple(alphabet)
        self.domain = domain
        letters = set(self.alphabet)
        clean = {}
        for key, p in table.items():
            key = tuple(key)
            if len(key) != len(domain) or not set(key) <= letters:
                raise ArgumentError(f"table key {key!r} does not label the domain")
            if p < 0:
                raise ArgumentError("negative probability in cylinder table")
            if p > 0:
                clean[key] = clean.get(key, 0.0) + float(p)
        total = math.fsum(clean.values())
        if abs(total - 1.0) > tol:
            raise ArgumentError(f"cylinder table sums to {total!r}, not 1")
        self.table = clean
        self.invariance_checked = False
        if check_invariance:
            self._check_invariance(tol)
            self.invariance_checked = True

    def _restrict(self, positions: Sequence[int]) -> dict[tuple, float]:
        out: dict[tuple, float] = {}
        for key, p in self.table.items():
            sub = tuple(key[i] for i in positions)
            out[sub] = out.get(sub, 0.0) + p
        return out

    def _check_invariance(self, tol):
        dom = list(self.domain)
        index = {x: i for i, x in enumerate(dom)}
        translates = {d2 * d1.inverse() for d1 in dom for d2 in dom}
        translates.discard(self.group.identity)
        for t in sorted(translates, key=lambda g: g.sort_key):
            src = [x for x in dom if t * x in index]
            if not src:
                continue
            a = self._restrict([index[x] for x in src])
            b = self._restrict([index[t * x] for x in src])
            for key in set(a) | set(b):
                if abs(a.get(key, 0.0) - b.get(key, 0.0)) > tol:
                    raise ArgumentError(
                        f"cylinder table is not shift invariant under translate {t}"
                    )

    def find_translate(self, coords: FiniteSubset) -> GroupElement | None:
        if len(coords) == 0:
            return self.group.identity
        c0 = coords[0]
        candidates = [self.group.identity] + sorted(
            {d * c0.inverse() for d in self.domain}, key=lambda g: g.sort_key
        )
        for t in candidates:
            if all(t * c in self.domain for c in coords):
                return t
        return None

    def marginal(self, coords: FiniteSubset) -> dict[tuple, float]:
        t = self.find_translate(coords)
        if t is None:
            raise UnsupportedMeasureError(
                f"no translate of {coords} fits in the declared domain {self.domain}"
            )
        index = {x: i for i, x in enumerate(self.domain)}
        return self._restrict([index[t * c] for c in coords])


def markov_cylinder_measure(
    group: GroupSpec, alphabet: Sequence, stationary: Sequence[float], transition, length: int
) -> CylinderMeasure:
    """Stationary Markov chain on Z written out as a cylinder table on [0, length-1]."""
    if group.kind != "lattice" or group.rank != 1:
        raise ArgumentError("Markov cylinder measures live on Z")
    P = np.asarray(transition, dtype=float)
    pi = np.asarray(stationary, dtype=float)
    k = len(alphabet)
    if P.shape != (k, k) or pi.shape != (k,):
        raise ArgumentError("shape mismatch in Markov data")
    if np.max(np.abs(pi @ P - pi)) > 1e-12:
        raise ArgumentError("stationary vector is not invariant under the transition matrix")
    table = {}
    for word in itertools.product(range(k), repeat=length):
        p = pi[word[0]]
        for a, b in zip(word, word[1:]):
            p *= P[a, b]
        if p > 0:
            table[tuple(alphabet[i] for i in word)] = float(p)
    return CylinderMeasure(group, alphabet, interval(group, 0, length - 1), table)


# -- partitions -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Partition:
    """Labelled cells with their measures.

    Single-coordinate partitions carry ``blocks``: the alphabet letters making
    up each cell.  Joined partitions read the coordinates ``base_coordinates``
    and are labelled by tuples of base-cell labels.
    """

    labels: tuple
    cell_measure: Distribution
    base_coordinates: FiniteSubset
    blocks: tuple | None = None

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ArgumentError("partition labels must be unique")
        if len(self.labels) != len(self.cell_measure):
            raise ArgumentError("labels and cell measures differ in length")

    def __len__(self):
        return len(self.labels)

    def entropy(self) -> float:
        return shannon_entropy(self.cell_measure)

    def cell_of(self) -> dict:
        if self.blocks is None:
            raise ArgumentError("partition does not read a single coordinate")
        return {a: lab for lab, blk in zip(self.labels, self.blocks) for a in blk}


def coarse_partition(m: ShiftMeasure, groups: Mapping[Hashable, Sequence]) -> Partition:
    """Partition by which group of letters sits at the identity coordinate."""
    seen = [a for blk in groups.values() for a in blk]
    if set(seen) != set(m.alphabet) or len(seen) != len(set(seen)):
        raise ArgumentError("letter groups must partition the alphabet")
    probs = m.letter_probabilities()
    labels = tuple(groups)
    cells = [math.fsum(probs[a] for a in groups[lab]) for lab in labels]
    e = FiniteSubset(m.group, [m.group.identity])
    return Partition(labels, Distribution(cells), e, tuple(frozenset(groups[lab]) for lab in labels))


def letter_partition(m: ShiftMeasure) -> Partition:
    return coarse_partition(m, {a: [a] for a in m.alphabet})


def _check_single_coordinate(m: ShiftMeasure, alpha: Partition):
    e = FiniteSubset(m.group, [m.group.identity])
    if alpha.blocks is None or alpha.base_coordinates != e:
        raise UnsupportedMeasureError("joins are supported for partitions reading the identity coordinate")


def _joined_table(m: ShiftMeasure, alpha: Partition, F: FiniteSubset) -> dict[tuple, float]:
    cell = alpha.cell_of()
    out: dict[tuple, float] = {}
    for key, p in m.marginal(F).items():
        lab = tuple(cell[a] for a in key)
        out[lab] = out.get(lab, 0.0) + p
    return out


def join_partition(m: ShiftMeasure, alpha: Partition, F: FiniteSubset, cap: int | None = None) -> Partition:
    """The join of the translates ``g.alpha`` for ``g`` in ``F``; null cells dropped."""
    _check_single_coordinate(m, alpha)
    limit = caps.cap_cells(cap)
    if isinstance(m, BernoulliMeasure):
        if len(alpha) ** len(F) > limit:
            raise ResourceError(f"|cells|^|F| = {len(alpha)}^{len(F)} exceeds cap {limit}")
        positive = [(lab, p) for lab, p in zip(alpha.labels, alpha.cell_measure) if p > 0]
        labels, probs = [], []
        for combo in itertools.product(positive, repeat=len(F)):
            labels.append(tuple(lab for lab, _ in combo))
            probs.append(math.prod(p for _, p in combo))
    else:
        table = _joined_table(m, alpha, F)
        if len(table) > limit:
            raise ResourceError(f"joined partition has {len(table)} cells, cap {limit}")
        labels = sorted(table, key=repr)
        probs = [table[k] for k in labels]
    return Partition(tuple(labels), Distribution(probs), F)


def _bernoulli_type_class_entropy(probs: Sequence[float], n: int, limit: int) -> float:
    """Entropy of n i.i.d. draws summed over type classes instead of single cells."""
    probs = [p for p in probs if p > 0]
    k = len(probs)
    if k == 1:
        return 0.0
    if math.comb(n + k - 1, k - 1) > limit:
        raise ResourceError(f"{math.comb(n + k - 1, k - 1)} type classes exceed cap {limit}")
    logs = [math.log(p) for p in probs]
    lg_n = math.lgamma(n + 1)
    terms = []
    for bars in itertools.combinations(range(n + k - 1), k - 1):
        counts, prev = [], -1
        for b in bars:
            counts.append(b - prev - 1)
            prev = b
        counts.append(n + k - 2 - prev)
        log_p = math.fsum(c * lg for c, lg in zip(counts, logs))
        log_mult = lg_n - math.fsum(math.lgamma(c + 1) for c in counts)
        terms.append(math.exp(log_mult + log_p) * -log_p)
    return math.fsum(terms)


def join_entropy(m: ShiftMeasure, alpha: Partition, F: FiniteSubset, cap: int | None = None) -> float:
    """H(alpha^F).

    Bernoulli joins are enumerated cell by cell when they fit under the cap;
    larger ones are summed over type classes (cells with equal letter counts
    have equal mass), which is exact and never assumes additivity.
    """
    _check_single_coordinate(m, alpha)
    limit = caps.cap_cells(cap)
    if isinstance(m, BernoulliMeasure):
        probs = [p for p in alpha.cell_measure if p > 0]
        if len(probs) ** len(F) <= limit:
            joint = np.ones(1)
            for _ in range(len(F)):
                joint = np.multiply.outer(joint, probs).ravel()
            joint = joint[joint > 0]
            return max(0.0, -math.fsum(joint * np.log(joint)))
        return _bernoulli_type_class_entropy(probs, len(F), limit)
    return max(0.0, _entropy_terms(_joined_table(m, alpha, F).values()))


# -- estimators -----------------------------------------------------------------


def naive_measure_entropy_estimate(
    m: ShiftMeasure, alpha: Partition, schedule, cap: int | None = None
) -> EntropyReport:
    """Per-F values ``H(alpha^F)/|F|`` and their running minimum.

    The running minimum is an upper bound on ``h_mu(alpha)``.  For Bernoulli
    measures with a single-coordinate partition every value equals
    ``H(alpha)`` and the bound is exact.
    """
    items = normalize_schedule(schedule)
    exact = isinstance(m, BernoulliMeasure)
    kind = "exact" if exact else "upper"
    rows = []
    for label, F in items:
        h = join_entropy(m, alpha, F, cap)
        rows.append(ReportRow(label, len(F), h / len(F), kind, extra={"joint_entropy_nats": h}))
    with_running_min(rows)
    notes = [
        "running minimum over the schedule; an upper bound on h_mu(alpha), not the infimum"
        if not exact
        else "Bernoulli shift with a one-coordinate partition: translates are independent, value is exact"
    ]
    return EntropyReport("naive-measure-entropy", rows, rows[-1].running_min, kind, notes)


def amplified_entropy_check(
    m: ShiftMeasure, alpha: Partition, W: FiniteSubset, schedule, cap: int | None = None, tol: float = 1e-9
) -> EntropyReport:
    """Compare ``H(alpha^{WF})/|F|`` with ``(|WF|/|F|) H(alpha)`` on each F.

    The first is a joint entropy over the coordinates ``WF``; the second uses
    only the expansion ratio.  They agree for Bernoulli measures.
    """
    if not isinstance(m, BernoulliMeasure):
        raise UnsupportedMeasureError("amplification check needs a Bernoulli measure")
    items = normalize_schedule(schedule)
    h_alpha = alpha.entropy()
    rows = []
    for label, F in items:
        WF = product_set(W, F)
        direct = join_entropy(m, alpha, WF, cap) / len(F)
        ratio = expansion_ratio(W, F)
        via_ratio = float(ratio) * h_alpha
        rows.append(
            ReportRow(
                label,
                len(F),
                direct,
                "exact",
                extra={
                    "WF_size": len(WF),
                    "expansion_ratio": f"{ratio.numerator}/{ratio.denominator}",
                    "via_ratio_nats": via_ratio,
                    "agree": abs(direct - via_ratio) <= tol,
                },
            )
        )
    with_running_min(rows)
    return EntropyReport(
        "amplified-measure-entropy",
        rows,
        rows[-1].running_min,
        "upper",
        ["running minimum is an upper bound on h_mu(alpha^W)"],
        {"W": W.to_json(), "H_alpha_nats": h_alpha},
    )


def product_measure(m1: BernoulliMeasure, m2: BernoulliMeasure) -> BernoulliMeasure:
    if m1.group != m2.group:
        raise ArgumentError("product of measures over different groups")
    alphabet = tuple((a, b) for a in m1.alphabet for b in m2.alphabet)
    probs = [p * q for p in m1.base for q in m2.base]
    return BernoulliMeasure(m1.group, alphabet, Distribution(probs))


def product_partition(alpha1: Partition, alpha2: Partition) -> Partition:
    labels, probs, blocks = [], [], []
    for l1, p1, b1 in zip(alpha1.labels, alpha1.cell_measure, alpha1.blocks):
        for l2, p2, b2 in zip(alpha2.labels, alpha2.cell_measure, alpha2.blocks):
            labels.append((l1, l2))
            probs.append(p1 * p2)
            blocks.append(frozenset((a, b) for a in b1 for b in b2))
    return Partition(tuple(labels), Distribution(probs), alpha1.base_coordinates, tuple(blocks))


def product_system_entropy(m1, alpha1, m2, alpha2, schedule, cap: int | None = None, tol: float = 1e-9) -> EntropyReport:
    """Per-F entropy of the product system against the sum of the factors."""
    if not (isinstance(m1, BernoulliMeasure) and isinstance(m2, BernoulliMeasure)):
        raise UnsupportedMeasureError("product additivity check needs Bernoulli factors")
    m = product_measure(m1, m2)
    alpha = product_partition(alpha1, alpha2)
    rows = []
    for label, F in normalize_schedule(schedule):
        h = join_entropy(m, alpha, F, cap) / len(F)
        h1 = join_entropy(m1, alpha1, F, cap) / len(F)
        h2 = join_entropy(m2, alpha2, F, cap) / len(F)
        rows.append(
            ReportRow(label, len(F), h, "exact",
                      extra={"factor1_nats": h1, "factor2_nats": h2, "agree": abs(h - (h1 + h2)) <= tol})
        )
    with_running_min(rows)
    return EntropyReport("product-measure-entropy", rows, rows[-1].running_min, "exact")
