"""Sofic approximations, the sofic graph and its block decomposition,
labeling-induced microstates and topological sofic entropy estimates.

Permutations of ``[n]`` are numpy index arrays, 0-based internally; the JSON
form lists the 1-based image of ``1..n``.  A word acts by composing its
letters right to left, so ``(g h)^sigma = g^sigma o h^sigma`` on free groups.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import caps
from .errors import ArgumentError, CertificationUnavailable, InvariantError, ResourceError
from .group import LATTICE, FiniteSubset, GroupElement, GroupSpec, symmetrize
from .report import EntropyReport, ReportRow
from .rng import MICROSTATE_SAMPLES, SOFIC_PERMUTATIONS, stream
from .separation import FiniteMetricSpace, sep_number
from .topological_entropy import Subshift, _constraints, _window_index, cached_ball

MODELS = ("random_permutation", "cyclic", "explicit")


def _as_perm(images, n: int, what: str) -> np.ndarray:
    p = np.asarray(images, dtype=np.int64)
    if p.shape != (n,) or not np.array_equal(np.sort(p), np.arange(n)):
        raise ArgumentError(f"{what} is not a permutation of [{n}]")
    return p


class SoficMap:
    """Assignment of permutations of ``[n]`` to group elements.

    ``generators[i]`` is the image of the i-th generator.  ``table`` may pin
    the image of arbitrary words; those entries override composition, which
    allows maps that are not homomorphisms.
    """

    def __init__(self, spec: GroupSpec, n: int, generators: Sequence, table: Mapping | None = None, model: str = "explicit"):
        if n < 1:
            raise ArgumentError("n must be at least 1")
        if len(generators) != spec.rank:
            raise ArgumentError(f"need {spec.rank} generator permutations, got {len(generators)}")
        self.spec = spec
        self.n = int(n)
        self.model = model
        self.generators = [_as_perm(p, n, f"generator {i}") for i, p in enumerate(generators)]
        self.table = {spec.element(w): _as_perm(p, n, f"table entry {w}") for w, p in (table or {}).items()}
        self._cache: dict[GroupElement, np.ndarray] = {}

    def _letter(self, gen: int, sign: int) -> np.ndarray:
        g = self.spec.generator(gen)
        if sign < 0:
            g = g.inverse()
        if g in self.table:
            return self.table[g]
        p = self.generators[gen]
        return p if sign > 0 else np.argsort(p)

    def __call__(self, g) -> np.ndarray:
        """``g^sigma`` as an index array: ``m -> out[m]``."""
        if not isinstance(g, GroupElement):
            g = self.spec.element(g)
        if g.spec != self.spec:
            raise ArgumentError("element belongs to a different group")
        hit = self._cache.get(g)
        if hit is not None:
            return hit
        if g in self.table:
            out = self.table[g]
        else:
            out = np.arange(self.n)
            for gen, sign in reversed(g.letters):
                out = self._letter(gen, sign)[out]
        self._cache[g] = out
        return out

    def to_json(self) -> dict:
        d = {
            "n": self.n,
            "group": _group_json(self.spec),
            "generators": {self.spec.generator(i).word(): (p + 1).tolist() for i, p in enumerate(self.generators)},
        }
        if self.table:
            d["table"] = {g.word(): (p + 1).tolist() for g, p in sorted(self.table.items())}
        return d

    @classmethod
    def from_json(cls, data: Mapping, spec: GroupSpec | None = None) -> "SoficMap":
        if spec is None:
            from .topological_entropy import parse_group

            spec = parse_group(data["group"])
        n = int(data["n"])
        gens = data["generators"]
        perms = []
        for i in range(spec.rank):
            name = spec.generator(i).word()
            if name not in gens:
                raise ArgumentError(f"missing generator {name!r}")
            perms.append(np.asarray(gens[name], dtype=np.int64) - 1)
        table = {w: np.asarray(p, dtype=np.int64) - 1 for w, p in data.get("table", {}).items()}
        return cls(spec, n, perms, table, model="explicit")


def _group_json(spec: GroupSpec) -> dict:
    return {"lattice": spec.rank} if spec.kind == LATTICE else {"free": spec.rank}


def generate_sofic_map(spec: GroupSpec, n: int, model: str = "random_permutation", seed: int | None = None,
                       table: Mapping | None = None, index: int = 0) -> SoficMap:
    """Build a sofic map on ``[n]``.

    ``random_permutation`` draws one uniform permutation per generator from the
    stream ``(seed, SOFIC_PERMUTATIONS, index, generator)``; ``index`` tells
    apart maps of one sequence.  ``cyclic`` sends k in Z to rotation by k.
    ``explicit`` takes ``table`` mapping words to 0-based images; generators
    missing from it default to the identity.
    """
    if n < 1:
        raise ArgumentError("n must be at least 1")
    if model == "random_permutation":
        perms = [stream(seed, SOFIC_PERMUTATIONS, index, i).permutation(n) for i in range(spec.rank)]
        return SoficMap(spec, n, perms, model=model)
    if model == "cyclic":
        if spec.kind != LATTICE or spec.rank != 1:
            raise ArgumentError("the cyclic model is only defined for Z")
        return SoficMap(spec, n, [(np.arange(n) + 1) % n], model=model)
    if model == "explicit":
        if table is None:
            raise ArgumentError("explicit model needs a table")
        table = {spec.element(w): p for w, p in table.items()}
        perms = [table.get(spec.generator(i), np.arange(n)) for i in range(spec.rank)]
        return SoficMap(spec, n, perms, table, model=model)
    raise ArgumentError(f"unknown sofic model {model!r}; expected one of {MODELS}")


def sofic_sequence(spec: GroupSpec, sizes: Iterable[int], model: str = "random_permutation", seed: int | None = None) -> list[SoficMap]:
    return [generate_sofic_map(spec, n, model, seed=seed, index=i) for i, n in enumerate(sizes)]


# -- quality ---------------------------------------------------------------------


@dataclass
class QualityReport:
    n: int
    multiplicativity: list[tuple[str, str, int]]  # (g1, g2, #{m : (g1 g2) m = g1 g2 m})
    freeness: list[tuple[str, str, int]]  # distinct pairs, #{m : g1 m != g2 m}
    q_count: int  # |Q(S^)_n|

    @property
    def min_multiplicativity(self) -> float:
        return min((c for *_, c in self.multiplicativity), default=self.n) / self.n

    @property
    def min_freeness(self) -> float:
        return min((c for *_, c in self.freeness), default=self.n) / self.n

    @property
    def q_fraction(self) -> float:
        return self.q_count / self.n

    def to_dict(self) -> dict:
        n = self.n
        return {
            "n": n,
            "multiplicativity": [{"g1": a, "g2": b, "count": c, "fraction": c / n} for a, b, c in self.multiplicativity],
            "freeness": [{"g1": a, "g2": b, "count": c, "fraction": c / n} for a, b, c in self.freeness],
            "min_multiplicativity": self.min_multiplicativity,
            "min_freeness": self.min_freeness,
            "q_count": self.q_count,
            "q_fraction": self.q_fraction,
        }


def good_set(sigma: SoficMap, S: FiniteSubset) -> np.ndarray:
    """Mask of ``m`` where sigma is multiplicative on all pairs of S and the
    images ``{g m : g in S}`` are pairwise distinct."""
    S = list(S)
    ok = np.ones(sigma.n, dtype=bool)
    for g1 in S:
        p1 = sigma(g1)
        for g2 in S:
            ok &= sigma(g1 * g2) == p1[sigma(g2)]
    if len(S) > 1:
        imgs = np.sort(np.stack([sigma(g) for g in S]), axis=0)
        ok &= ~np.any(imgs[1:] == imgs[:-1], axis=0)
    return ok


def quality(sigma: SoficMap, S: FiniteSubset) -> QualityReport:
    mult, free = [], []
    for g1 in S:
        p1 = sigma(g1)
        for g2 in S:
            c = int(np.count_nonzero(sigma(g1 * g2) == p1[sigma(g2)]))
            mult.append((g1.word(), g2.word(), c))
            if g1 != g2:
                free.append((g1.word(), g2.word(), int(np.count_nonzero(p1 != sigma(g2)))))
    q = int(np.count_nonzero(good_set(sigma, symmetrize(S))))
    return QualityReport(sigma.n, mult, free, q)


# -- sofic graph and decomposition -------------------------------------------------


@dataclass
class SoficGraph:
    sigma: SoficMap
    F: FiniteSubset
    neighbor_maps: list[np.ndarray]  # N[c] = {c} | {f[c] for f in neighbor_maps}
    q_mask: np.ndarray
    good_mask: np.ndarray
    J: np.ndarray
    I: np.ndarray
    checks: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.sigma.n

    @property
    def s(self) -> int:
        return len(self.F)

    def neighbors(self, c: int) -> set[int]:
        return {int(f[c]) for f in self.neighbor_maps} - {c}

    def closed_neighborhood(self, c: int) -> set[int]:
        return {c} | self.neighbors(c)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "s": self.s,
            "q_count": int(self.q_mask.sum()),
            "good_count": int(self.good_mask.sum()),
            "J_count": int(self.J.sum()),
            "I_count": int(self.I.sum()),
            "checks": self.checks,
        }


def _theta_mask(theta, n: int) -> np.ndarray:
    if theta is None:
        return np.ones(n, dtype=bool)
    if isinstance(theta, Microstate):
        return theta.theta_mask.copy()
    arr = np.asarray(theta)
    if arr.dtype == bool:
        if arr.shape != (n,):
            raise ArgumentError("theta mask must have length n")
        return arr.copy()
    mask = np.zeros(n, dtype=bool)
    mask[arr.astype(np.int64)] = True
    return mask


def _ball_closed(mask: np.ndarray, maps: list[np.ndarray]) -> np.ndarray:
    """Vertices whose whole closed neighbourhood lies in ``mask``."""
    out = mask.copy()
    for f in maps:
        out &= mask[f]
    return out


def build_sofic_graph(sigma: SoficMap, F: FiniteSubset, S_test: FiniteSubset | None = None, theta=None) -> SoficGraph:
    """Graph on ``[n]`` joining ``m`` to ``g m`` and ``g^-1 m`` for ``g`` in F.

    ``theta`` (a Microstate, a mask, or a list of vertices) restricts the good
    set; without it only ``Q`` is used.  ``Q`` is taken over the symmetrized
    ``S_test | F``.
    """
    if len(F) == 0:
        raise ArgumentError("F must be nonempty")
    n = sigma.n
    maps = []
    for g in F:
        for p in (sigma(g), sigma(g.inverse())):
            maps.append(p)
            maps.append(np.argsort(p))
    S = F if S_test is None else F.union(S_test)
    q = good_set(sigma, symmetrize(S))
    good = q & _theta_mask(theta, n)
    J = _ball_closed(good, maps)
    I = _ball_closed(J, maps)

    s = len(F)
    bad, notJ, notI = n - int(good.sum()), n - int(J.sum()), n - int(I.sum())
    degree = max((len({int(f[c]) for f in maps} - {c}) for c in range(n)), default=0)
    checks = {
        "symmetric": True,
        "max_degree": degree,
        "bad": bad,
        "G_minus_J": notJ,
        "G_minus_I": notI,
        "J_bound_neighbourhood": notJ <= (2 * s + 1) * bad,
        "I_bound_neighbourhood": notI <= (2 * s + 1) * notJ,
        "J_bound_s": notJ <= s * bad,
        "I_bound_s": notI <= s * notJ,
    }
    if degree > 2 * s:
        raise InvariantError(f"degree {degree} exceeds 2|F| = {2 * s}")
    if not (checks["J_bound_neighbourhood"] and checks["I_bound_neighbourhood"]):
        raise InvariantError(f"neighbourhood bounds violated: {checks}")
    if np.any(I & ~J) or np.any(J & ~good):
        raise InvariantError("expected I within J within the good set")
    return SoficGraph(sigma, F, maps, q, good, J, I, checks)


@dataclass
class Decomposition:
    blocks: list[tuple[int, tuple[GroupElement, ...]]]
    W: np.ndarray  # mask of the union of blocks
    k: int
    n: int
    J_count: int
    I_minus_W: int

    @property
    def P(self) -> list[int]:
        return np.flatnonzero(~self.W).tolist()

    @property
    def leftover(self) -> int:
        return self.n - int(self.W.sum())

    def block_sets(self, sigma: SoficMap) -> list[set[int]]:
        return [{int(sigma(g)[c]) for g in Fi} for c, Fi in self.blocks]

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "blocks": [{"center": c + 1, "F_i": [g.word() for g in Fi]} for c, Fi in self.blocks],
            "W_size": int(self.W.sum()),
            "P_size": self.leftover,
            "J_size": self.J_count,
            "I_minus_W": self.I_minus_W,
        }


def decompose(g: SoficGraph, F: FiniteSubset | None = None, k: int = 1) -> Decomposition:
    """Greedy disjoint blocks ``F_i^sigma c_i`` with centres in J.

    Centres are scanned once in increasing order; each takes every ``g`` in F
    whose image is still free, provided at least ``|F|/k`` of them are.  A
    centre rejected early can only lose free images later, so one pass is
    maximal.
    """
    if k < 1:
        raise ArgumentError("k must be at least 1")
    F = g.F if F is None else F
    if len(F) == 0:
        raise ArgumentError("F must be nonempty")
    sigma = g.sigma
    imgs = [sigma(x) for x in F]
    W = np.zeros(sigma.n, dtype=bool)
    blocks = []
    for c in np.flatnonzero(g.J).tolist():
        Fi = [x for x, p in zip(F, imgs) if not W[p[c]]]
        if len(Fi) * k >= len(F):
            targets = [int(p[c]) for x, p in zip(F, imgs) if not W[p[c]]]
            if len(set(targets)) != len(targets):
                raise InvariantError(f"F is not injective at centre {c}")
            W[targets] = True
            blocks.append((c, tuple(Fi)))
    I_minus_W = int(np.count_nonzero(g.I & ~W))
    J_count = int(g.J.sum())
    if I_minus_W * k > J_count:
        raise InvariantError(f"|I - W| = {I_minus_W} exceeds |J|/k = {J_count}/{k}")
    return Decomposition(blocks, W, k, sigma.n, J_count, I_minus_W)


def is_greedy_maximal(g: SoficGraph, F: FiniteSubset, k: int, dec: Decomposition) -> bool:
    """No centre in J has ``|F|/k`` images outside W."""
    imgs = [g.sigma(x) for x in F]
    for c in np.flatnonzero(g.J).tolist():
        free = len({int(p[c]) for p in imgs if not dec.W[p[c]]})
        if free * k >= len(F):
            return False
    return True


# -- parameter schedule ------------------------------------------------------------


def binary_entropy(x: float) -> float:
    if not 0 <= x <= 1:
        raise ArgumentError(f"binary entropy needs 0 <= x <= 1, got {x}")
    if x == 0 or x == 1:
        return 0.0
    return -(x * math.log(x) + (1 - x) * math.log1p(-x))


@dataclass
class Theorem1Parameters:
    kappa: float
    eps: float
    eta: float
    k: int
    F_label: str
    F: FiniteSubset
    s: int
    delta: float
    N: int | None
    sep_half: int
    sep_quarter: int
    q_required: float

    def check(self) -> dict[str, bool]:
        """Re-evaluate each defining inequality from the stored values."""
        if self.sep_half == 1:
            eta_ok = math.isinf(self.eta)
        else:
            eta_ok = math.isclose(self.eta, self.kappa / (4 * math.log(self.sep_half)), rel_tol=1e-12)
        s, d = self.s, self.delta
        return {
            "eta": eta_ok,
            "k": 1 / self.k <= self.eta / 2,
            "F": math.log(self.sep_quarter) / s <= self.kappa / (4 * self.k),
            "delta_eps": d <= (self.eps / 8) ** 2,
            "delta_eta": d <= self.eta / (4 * s ** 3),
            "binary_entropy": s * d <= 0.5 and binary_entropy(s * d) <= self.kappa / 4,
        }

    def to_dict(self) -> dict:
        return {
            "kappa": self.kappa,
            "eps": self.eps,
            "eta": self.eta,
            "k": self.k,
            "F_label": self.F_label,
            "F": self.F.to_json(),
            "s": self.s,
            "delta": self.delta,
            "N": self.N,
            "sep_half": self.sep_half,
            "sep_quarter": self.sep_quarter,
            "q_required": self.q_required,
            "checks": self.check(),
        }


def _smallest_k(eta: float) -> int:
    if math.isinf(eta):
        return 1
    k = max(1, math.ceil(2 / eta))
    while 1 / k > eta / 2:
        k += 1
    while k > 1 and 1 / (k - 1) <= eta / 2:
        k -= 1
    return k


def theorem1_parameters(kappa: float, eps: float, sep_half: int, schedule: Sequence, sofic_maps: Sequence[SoficMap] = (),
                        max_dyadic: int = 1074) -> Theorem1Parameters:
    """Choose eta, k, F, delta (and N when sofic maps are given).

    ``schedule`` holds ``(label, F, sep(X, eps/4, d_F))`` triples.  When
    ``sep_half`` is 1 the space is a single point at scale eps/2 and eta is
    infinite, which leaves k = 1 and only the delta constraints that do not
    involve eta.  ``s delta <= 1/2`` is enforced so that the binary entropy
    bound on subset counts applies.
    """
    if not 0 < kappa < 1:
        raise ArgumentError("kappa must lie in (0, 1)")
    if not eps > 0:
        raise ArgumentError("eps must be positive")
    if sep_half < 1:
        raise ArgumentError("sep(X, eps/2, d) must be at least 1")
    eta = math.inf if sep_half == 1 else kappa / (4 * math.log(sep_half))
    k = _smallest_k(eta)
    bound = kappa / (4 * k)

    chosen, ratios = None, []
    for label, F, sq in schedule:
        if sq < 1:
            raise ArgumentError(f"sep value for {label} must be at least 1")
        r = math.log(sq) / len(F)
        ratios.append((label, r))
        if r <= bound:
            chosen = (label, F, int(sq))
            break
    if chosen is None:
        best = min(ratios, key=lambda t: t[1]) if ratios else None
        raise CertificationUnavailable(
            f"no F in the schedule has log sep(X, eps/4, d_F)/|F| <= kappa/(4k) = {bound:.6g} "
            f"(k = {k}); smallest ratio {best[1]:.6g} at {best[0]}" if best else "empty schedule"
        )
    label, F, sq = chosen
    s = len(F)

    delta = None
    for j in range(max_dyadic + 1):
        d = 2.0 ** -j
        if d <= (eps / 8) ** 2 and d <= eta / (4 * s ** 3) and s * d <= 0.5 and binary_entropy(s * d) <= kappa / 4:
            delta = d
            break
    if delta is None:
        raise CertificationUnavailable("no dyadic delta satisfies the constraints")

    q_required = 1 - eta / (4 * s * s) if not math.isinf(eta) else 0.0
    N = None
    if sofic_maps:
        Fhat = symmetrize(F)
        ok = [(m.n, good_set(m, Fhat).mean() >= q_required) for m in sofic_maps]
        ok.sort()
        N = None
        for i, (n_i, _) in enumerate(ok):
            if all(flag for _, flag in ok[i:]):
                N = n_i
                break
    params = Theorem1Parameters(kappa, eps, eta, k, label, F, s, delta, N, sep_half, sq, q_required)
    failed = [name for name, v in params.check().items() if not v]
    if failed:
        raise InvariantError(f"parameter self-check failed: {failed}")
    return params


# -- microstates -------------------------------------------------------------------


class Microstate:
    """A labeling of ``[n]`` and its decoded, projected map into X."""

    def __init__(self, labeling: tuple, points: np.ndarray, radius: int, defects: dict, theta_mask: np.ndarray):
        self.labeling = labeling
        self.points = points  # (n, |B_R|) letter indices
        self.radius = radius
        self.defects = defects  # word -> d^2 defect
        self.theta_mask = theta_mask

    @property
    def theta(self) -> frozenset:
        return frozenset(np.flatnonzero(self.theta_mask).tolist())

    def __repr__(self):
        return f"Microstate({self.labeling}, |theta|={int(self.theta_mask.sum())})"


def default_radius(spec: GroupSpec, F: FiniteSubset, delta: float, max_radius: int = 64) -> int:
    """Smallest R with ``2^-|B_{R - max|g|}| < delta/4``.

    With delta = 0 the defect test is exact equality, and one extra layer
    beyond the translates is used.
    """
    base = F.max_length
    if delta <= 0:
        return base + 1
    for r in range(max_radius + 1):
        if 2.0 ** -len(cached_ball(spec, r)) < delta / 4:
            return base + r
    raise ArgumentError("delta too small for the truncation radius limit")


class _Projector:
    """Map a label row on B_R to a locally admissible one: keep the longest
    admissible canonical prefix, then complete it lexicographically."""

    def __init__(self, s: Subshift, radius: int):
        B = cached_ball(s.group, radius)
        self.size = len(B)
        self.k = len(s.alphabet)
        self.by_last: dict[int, list] = {}
        for pos, labs in _constraints(s, B):
            self.by_last.setdefault(max(pos), []).append((pos, labs))
        self.trivial = not self.by_last
        self.cache: dict[tuple, tuple] = {}

    def _violates(self, row, i) -> bool:
        return any(all(row[p] == l for p, l in zip(pos, labs)) for pos, labs in self.by_last.get(i, ()))

    def _complete(self, row: list, start: int) -> bool:
        if start == self.size:
            return True
        for a in range(self.k):
            row[start] = a
            if not self._violates(row, start) and self._complete(row, start + 1):
                return True
        return False

    def __call__(self, row: tuple) -> tuple:
        if self.trivial:
            return row
        hit = self.cache.get(row)
        if hit is not None:
            return hit
        cur = list(row)
        keep = 0
        while keep < self.size and not self._violates(cur, keep):
            keep += 1
        out = None
        for start in range(keep, -1, -1):
            trial = list(row[:start]) + [0] * (self.size - start)
            if self._complete(trial, start):
                out = tuple(trial)
                break
        if out is None:
            raise ArgumentError("subshift has no locally admissible pattern on the truncation ball")
        self.cache[row] = out
        return out


def _first_diff_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Row-wise first-disagreement distance between equal-shape label arrays."""
    diff = a != b
    anyd = diff.any(axis=-1)
    first = diff.argmax(axis=-1)
    return np.where(anyd, 2.0 ** -first.astype(float), 0.0)


def microstate_space(sigma: SoficMap, F: FiniteSubset, delta: float, s: Subshift, mode: str = "exhaustive",
                     budget: int = 256, seed: int | None = None, radius: int | None = None,
                     cap: int | None = None) -> list[Microstate]:
    """Labelings ``L`` of ``[n]`` whose maps ``phi(m)(g) = L((g^-1)^sigma m)``,
    projected into X, satisfy ``d2(phi o g^sigma, g o phi) <= delta`` for g in F."""
    if sigma.spec != s.group or F.spec != s.group:
        raise ArgumentError("sofic map, F and subshift must share a group")
    if delta < 0:
        raise ArgumentError("delta must be nonnegative")
    n, A = sigma.n, len(s.alphabet)
    R = default_radius(s.group, F, delta) if radius is None else radius
    if R < F.max_length:
        raise ArgumentError(f"radius {R} too small; need at least {F.max_length}")
    B = cached_ball(s.group, R)
    if mode == "exhaustive":
        limit = caps.cap_cells(cap)
        if A ** n > limit:
            raise ResourceError(f"{A}^{n} labelings exceed cap {limit}")
        labelings = np.array(list(itertools.product(range(A), repeat=n)), dtype=np.int64).reshape(-1, n)
    elif mode == "sample":
        rng = stream(seed, MICROSTATE_SAMPLES)
        labelings = np.unique(rng.integers(0, A, size=(budget, n)), axis=0)
    else:
        raise ArgumentError(f"unknown mode {mode!r}")

    pull = np.stack([sigma(g.inverse()) for g in B], axis=1)  # (n, |B_R|)
    project = _Projector(s, R)
    words = [(g, sigma(g), _window_index(s.group, R, g), len(cached_ball(s.group, R - g.length))) for g in F]
    sq = math.sqrt(delta)
    out = []
    for lab in labelings:
        pts = lab[pull]
        if not project.trivial:
            pts = np.array([project(tuple(row)) for row in pts.tolist()], dtype=np.int64)
        ok, defects = True, {}
        theta = np.ones(n, dtype=bool)
        for g, img, win, w in words:
            dist = _first_diff_distance(pts[img][:, :w], pts[:, win])
            d2 = math.sqrt(float(np.mean(dist ** 2)))
            if d2 > delta:
                ok = False
                break
            defects[g.word()] = d2
            theta &= dist <= sq
        if not ok:
            continue
        ms = Microstate(tuple(int(a) for a in lab), pts, R, defects, theta)
        if int(theta.sum()) < (1 - len(F) * delta) * n - 1e-9:
            raise InvariantError(f"|theta| = {int(theta.sum())} below (1 - s delta) n for {ms.labeling}")
        out.append(ms)
    return out


def microstate_metric(states: Sequence[Microstate]) -> FiniteMetricSpace:
    """``d_inf(phi, psi) = max_m d(phi(m), psi(m))``."""
    L = len(states)
    if L == 0:
        return FiniteMetricSpace([], np.zeros((0, 0)), validate=False)
    X = np.stack([m.points for m in states])
    D = np.zeros((L, L))
    for i in range(L):
        D[i] = _first_diff_distance(X, X[i]).max(axis=1)
    return FiniteMetricSpace([m.labeling for m in states], D, validate=False)


def _sofic_row(i: int, sigma: SoficMap, s: Subshift, eps, F, delta, mode, budget, seed, radius, cap) -> ReportRow:
    states = microstate_space(sigma, F, delta, s, mode, budget, seed, radius, cap)
    if not states:
        return ReportRow(f"sigma{i}", sigma.n, -math.inf, "lower", extra={"microstates": 0, "model": sigma.model})
    M = microstate_metric(states)
    try:
        cert = sep_number(M, eps, "exact")
    except ResourceError:
        cert = sep_number(M, eps, "greedy")
    exact = cert.kind == "exact" and mode == "exhaustive" and s.is_full
    return ReportRow(
        f"sigma{i}", sigma.n, math.log(cert.count) / sigma.n, "exact" if exact else "lower",
        extra={"microstates": len(states), "sep": cert.count, "sep_mode": cert.mode,
               "radius": states[0].radius, "model": sigma.model},
    )


def sofic_entropy_estimate(maps: Sequence[SoficMap], s: Subshift, eps: float, F: FiniteSubset, delta: float,
                           mode: str = "exhaustive", n_floor: int = 1, budget: int = 256, seed: int | None = None,
                           radius: int | None = None, cap: int | None = None, threads: int = 1) -> EntropyReport:
    """Per-map ``(1/n) log sep(Map(sigma, F, delta), eps, d_inf)`` and the max over
    maps with ``n >= n_floor`` standing in for the limsup."""
    if not maps:
        raise ArgumentError("need at least one sofic map")
    args = (s, eps, F, delta, mode, budget, seed, radius, cap)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda t: _sofic_row(t[0], t[1], *args), enumerate(maps)))
    else:
        rows = [_sofic_row(i, sigma, *args) for i, sigma in enumerate(maps)]
    tail = [r.value for r in rows if r.size >= n_floor]
    if not tail:
        raise ArgumentError(f"no sofic map has n >= {n_floor}")
    notes = ["max over the supplied maps with n >= n_floor; a finite sequence cannot realize a limsup"]
    if not s.is_full:
        notes.append("labeling-induced microstates are a subset of Map(sigma, F, delta): per-map values are lower bounds")
    return EntropyReport("sofic-topological-entropy", rows, max(tail), "limsup-surrogate", notes,
                         {"eps": eps, "delta": delta, "F": F.to_json(), "mode": mode, "n_floor": n_floor})
