"""Combinatorics of the graphical expansion of E H^(n)_{0x} H^(n')_{x0}.

The loop has L = n + n' edges e_i = (i, i+1) on the periodic vertex set
{0, ..., L-1}; vertices 0 and n (mod L) are distinguished. A lumping is a
partition of the edge indices, a pairing is a lumping into two-element lumps
(bridges), stored as a partner tuple: ``partner[i] = j`` iff {e_i, e_j} is a
bridge.
"""
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
import itertools
import math
import random

import numpy as np

from .constants import (AUDIT_C, DIAGRAM_EDGE_CAP, DIAGRAM_VALUE_EDGE_CAP,
                        DIAGRAM_VALUE_SITE_CAP)
from .ensemble import EnsembleKind
from .errors import CapExceeded, DomainError
from .lattice import origin_index, shell_neighbors, site_index


def double_factorial(k):
    return math.prod(range(k, 0, -2)) if k > 0 else 1


def count_pairings(n_edges):
    """(n_edges - 1)!! perfect matchings, 0 for an odd edge count."""
    return 0 if n_edges % 2 else double_factorial(n_edges - 1)


# -- loops and separation ------------------------------------------------------

def _distinguished(n, L):
    return frozenset({0, n % L}) if L else frozenset({0})


def _arc_separates(i, j, L, dist):
    """Edges strictly between e_i and e_j going forward, and the vertices i+1..j."""
    gap = (j - i - 1) % L
    if gap >= 2:
        return True
    verts = {(i + 1 + k) % L for k in range(gap + 1)}
    return bool(verts & dist)


def separated(i, j, n, L):
    """Whether e_i and e_j are separated both ways round the loop by >= 2 edges or a
    distinguished vertex (the nonbacktracking condition on a shared lump)."""
    dist = _distinguished(n, L)
    return _arc_separates(i, j, L, dist) and _arc_separates(j, i, L, dist)


# -- lumpings ------------------------------------------------------------------

@dataclass(frozen=True)
class Lumping:
    n: int
    n_prime: int
    lumps: tuple

    @property
    def L(self):
        return self.n + self.n_prime

    @classmethod
    def of(cls, n, n_prime, lumps):
        return cls(n, n_prime, tuple(sorted(tuple(sorted(g)) for g in lumps)))

    def is_even(self):
        return all(len(g) % 2 == 0 for g in self.lumps)

    def is_admissible(self):
        return all(separated(a, b, self.n, self.L)
                   for g in self.lumps for a, b in itertools.combinations(g, 2))

    def is_pairing(self):
        return all(len(g) == 2 for g in self.lumps)


def _check_loop(n, n_prime, cap):
    if n < 0 or n_prime < 0:
        raise DomainError("n, n' must be >= 0")
    L = n + n_prime
    if L % 2:
        raise DomainError(f"n + n' = {L} must be even")
    if L > cap:
        raise CapExceeded(f"n + n' = {L} exceeds the enumeration cap {cap}",
                          estimate=count_pairings(L))
    return L


def _even_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for size in range(1, len(rest) + 1, 2):
        for combo in itertools.combinations(rest, size):
            left = [e for e in rest if e not in combo]
            for tail in _even_partitions(left):
                yield [(first,) + combo] + tail


def enumerate_lumpings(n, n_prime):
    """All lumpings of the L edges into lumps of even size."""
    L = _check_loop(n, n_prime, DIAGRAM_EDGE_CAP)
    for parts in _even_partitions(list(range(L))):
        yield Lumping.of(n, n_prime, parts)


# -- pairings ------------------------------------------------------------------

@dataclass(frozen=True)
class Pairing:
    n: int
    n_prime: int
    partner: tuple

    def __post_init__(self):
        p = self.partner
        L = len(p)
        if L != self.n + self.n_prime:
            raise DomainError("partner length must equal n + n'")
        for i, j in enumerate(p):
            if not (0 <= j < L) or j == i or p[j] != i:
                raise DomainError(f"partner tuple {p} is not a perfect matching")

    @property
    def L(self):
        return len(self.partner)

    @property
    def mbar(self):
        return self.L // 2

    @property
    def distinguished(self):
        return _distinguished(self.n, self.L)

    @property
    def bridges(self):
        return tuple((i, j) for i, j in enumerate(self.partner) if i < j)

    def as_lumping(self):
        return Lumping.of(self.n, self.n_prime, self.bridges)

    def is_admissible(self):
        return all(separated(i, j, self.n, self.L) for i, j in self.bridges)

    def is_ladder(self):
        return self.n == self.n_prime and self.n >= 1 and self.partner == ladder(self.n).partner

    @classmethod
    def from_bridges(cls, n, n_prime, bridges):
        L = n + n_prime
        p = [-1] * L
        for a, b in bridges:
            p[a], p[b] = b, a
        return cls(n, n_prime, tuple(p))


def _matchings(items):
    if not items:
        yield []
        return
    a = items[0]
    for k in range(1, len(items)):
        rest = items[1:k] + items[k + 1:]
        for tail in _matchings(rest):
            yield [(a, items[k])] + tail


def enumerate_pairings(n, n_prime, admissible_only=False):
    """All perfect matchings of the n + n' edges, optionally only admissible ones."""
    L = _check_loop(n, n_prime, DIAGRAM_EDGE_CAP)
    for m in _matchings(list(range(L))):
        p = Pairing.from_bridges(n, n_prime, m)
        if not admissible_only or p.is_admissible():
            yield p


def ladder(n):
    """L_n = {{e_0, e_{2n-1}}, {e_1, e_{2n-2}}, ..., {e_{n-1}, e_n}}."""
    if n < 1:
        raise DomainError("ladder needs n >= 1")
    return Pairing(n, n, tuple(2 * n - 1 - i for i in range(2 * n)))


# -- parallel bridges, collapse and expansion ----------------------------------

def parallel_pairs(p):
    """Pairs (i, j) such that {e_i, e_j} and {e_{i+1}, e_{j-1}} are parallel bridges."""
    L, part, dist = p.L, p.partner, p.distinguished
    out = []
    for i in range(L):
        j = part[i]
        i1, jm = (i + 1) % L, (j - 1) % L
        if i1 == j or i1 in dist or j in dist:
            continue
        if part[i1] == jm and i1 != jm:
            out.append((i, j))
    return out


def antiparallel_pairs(p):
    """Pairs (i, j) with {e_i, e_j} and {e_{i+1}, e_{j+1}} both bridges and i+1, j+1 not distinguished."""
    L, part, dist = p.L, p.partner, p.distinguished
    out = []
    for i in range(L):
        j = part[i]
        i1, j1 = (i + 1) % L, (j + 1) % L
        if i1 in dist or j1 in dist or i1 == j:
            continue
        if part[i1] == j1:
            out.append((i, j))
    return out


@dataclass(frozen=True)
class Skeleton:
    """A pairing without parallel bridges plus the multiplicity of each bridge.

    ``ell[k]`` belongs to ``pairing.bridges[k]``.
    """

    pairing: Pairing
    ell: tuple

    @property
    def m(self):
        return self.pairing.n

    @property
    def m_prime(self):
        return self.pairing.n_prime

    @property
    def mbar(self):
        return self.pairing.mbar

    @property
    def nbar(self):
        return sum(self.ell)

    @property
    def multiplicities(self):
        return dict(zip(self.pairing.bridges, self.ell))


def _collapse_once(partner, n, ell, i, j):
    """Collapse {e_i, e_j} with {e_{i+1}, e_{j-1}}: drop vertices i+1 and j."""
    L = len(partner)
    i1, jm = (i + 1) % L, (j - 1) % L
    keep = [k for k in range(L) if k not in (i1, j)]
    new = {k: idx for idx, k in enumerate(keep)}
    merged = ell[i] + ell[i1]
    part, ells = [], []
    for k in keep:
        if k == i:
            part.append(new[jm])
            ells.append(merged)
        elif k == jm:
            part.append(new[i])
            ells.append(merged)
        else:
            part.append(new[partner[k]])
            ells.append(ell[k])
    n_new = sum(1 for k in keep if k < n) if n < L else len(keep)
    return tuple(part), n_new, tuple(ells)


def collapse_to_skeleton(p, rng=None):
    """S(Gamma) and the multiplicities l with G_l(S(Gamma)) = Gamma.

    Parallel pairs are collapsed until none remain; ``rng`` (a random.Random)
    picks the pair at each step instead of the first one found.
    """
    if p.is_ladder():
        raise DomainError("the ladder has no skeleton (it collapses to L_1)")
    partner, n, ell = p.partner, p.n, (1,) * p.L
    while True:
        cur = Pairing(n, len(partner) - n, partner)
        pairs = parallel_pairs(cur)
        if not pairs:
            break
        i, j = rng.choice(pairs) if rng is not None else pairs[0]
        partner, n, ell = _collapse_once(partner, n, ell, i, j)
    sk = Pairing(n, len(partner) - n, partner)
    return Skeleton(sk, tuple(ell[a] for a, _ in sk.bridges))


def expand(skeleton):
    """G_l(Sigma): replace each bridge by l parallel copies."""
    p = skeleton.pairing
    run = [0] * p.L
    for (a, b), l in zip(p.bridges, skeleton.ell):
        if l < 1:
            raise DomainError("multiplicities must be >= 1")
        run[a] = run[b] = l
    start = list(itertools.accumulate([0] + run[:-1]))
    total = sum(run)
    part = [-1] * total
    for (a, b), l in zip(p.bridges, skeleton.ell):
        for k in range(l):
            x, y = start[a] + k, start[b] + l - 1 - k
            part[x], part[y] = y, x
    n_new = start[p.n] if p.n < p.L else total
    return Pairing(n_new, total - n_new, tuple(part))


def is_skeleton(p):
    """Membership in S*: no parallel bridges, adjacent bridges only at distinguished
    vertices, and not L_1 (equivalently: the uniform doubling G_2(p) is an
    admissible non-ladder pairing whose skeleton is p)."""
    if p.mbar < 2:
        return False
    dist = p.distinguished
    for i, j in p.bridges:
        for a, b in ((i, j), (j, i)):
            if (a + 1) % p.L == b and b not in dist:
                return False
    return not parallel_pairs(p)


def enumerate_skeletons(mbar_max):
    """Every skeleton pairing with 2 <= mbar <= mbar_max, for every position of m."""
    for mbar in range(2, mbar_max + 1):
        L = 2 * mbar
        if L > DIAGRAM_EDGE_CAP:
            raise CapExceeded(f"2 mbar = {L} exceeds the enumeration cap", estimate=count_pairings(L))
        for m in range(0, L + 1):
            for match in _matchings(list(range(L))):
                p = Pairing.from_bridges(m, L - m, match)
                if is_skeleton(p):
                    yield p


# -- orbits --------------------------------------------------------------------

@dataclass(frozen=True)
class OrbitMap:
    tau: tuple
    orbits: tuple
    orbit_of: tuple
    zero: int
    m_orbit: int
    zeta: tuple
    tree: tuple

    @property
    def L(self):
        """Number of orbits other than [0]."""
        return len(self.orbits) - 1

    def primed_sizes(self):
        """Sizes of the orbits other than [0] and [m]."""
        return [len(o) for k, o in enumerate(self.orbits) if k not in (self.zero, self.m_orbit)]


def orbit_analysis(p):
    """tau i = b(partner edge of e_i); orbits, zeta_1/zeta_2 per bridge and the tree Sigma_T."""
    if isinstance(p, Skeleton):
        p = p.pairing
    L = p.L
    tau = tuple((p.partner[i] + 1) % L for i in range(L))
    orbit_of = [-1] * L
    orbits = []
    for i in range(L):
        if orbit_of[i] >= 0:
            continue
        cyc, x = [], i
        while orbit_of[x] < 0:
            orbit_of[x] = len(orbits)
            cyc.append(x)
            x = tau[x]
        orbits.append(tuple(cyc))
    zeta = tuple((orbit_of[i], orbit_of[(i + 1) % L]) for i, _ in p.bridges)
    # Sigma_T: repeatedly take the smallest uncovered vertex i and the bridge through e_{i-1}
    covered = set(orbits[orbit_of[0]])
    tree = []
    while len(covered) < L:
        i = min(set(range(L)) - covered)
        e = i - 1
        tree.append(tuple(sorted((e, p.partner[e]))))
        covered |= set(orbits[orbit_of[i]])
    return OrbitMap(tau, tuple(orbits), tuple(orbit_of), orbit_of[0],
                    orbit_of[p.n % L], zeta, tuple(tree))


def two_thirds_margin(p):
    """2 mbar/3 + 1/3 - L(Sigma); nonnegative for every skeleton."""
    return Fraction(2 * p.mbar + 1, 3) - orbit_analysis(p).L


# -- the critical family ---------------------------------------------------------

def critical_skeleton(k):
    """A skeleton Sigma_k with mbar = 6k + 1 and L(Sigma_k) = 4k + 1.

    Two adjacent bridges at the distinguished vertices make [0] and [m]
    singletons; a five-bridge core and k - 1 nested six-bridge layers make
    every other orbit a 3-cycle, which saturates the 2/3 rule.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    L = 12 * k + 2
    bridges = [(0, L - 1), (1, 2)]
    b, r = 3, L - 3
    for _ in range(k - 1):
        bridges += [(b, r + 1), (b + 1, b + 4), (b + 2, b + 7), (b + 3, b + 8), (b + 5, r), (b + 6, b + 9)]
        b += 10
        r -= 2
    c = b
    bridges += [(c, c + 9), (c + 1, c + 4), (c + 2, c + 6), (c + 3, c + 7), (c + 5, c + 8)]
    p = Pairing.from_bridges(2, L - 2, bridges)
    return Skeleton(p, (1,) * p.mbar)


# -- tags for the symmetric ensemble --------------------------------------------

def tag_assignments(p):
    """All 2^mbar straight/twisted tag vectors (True = twisted), aligned with p.bridges."""
    return itertools.product((False, True), repeat=p.mbar)


def tagged_is_reduced(p, tags):
    """No parallel straight bridges and no antiparallel twisted bridges."""
    twisted = {br: t for br, t in zip(p.bridges, tags)}

    def tag(i):
        return twisted[tuple(sorted((i, p.partner[i])))]

    for i, j in parallel_pairs(p):
        if not tag(i) and not tag((i + 1) % p.L):
            return False
    for i, j in antiparallel_pairs(p):
        if tag(i) and tag((i + 1) % p.L):
            return False
    return True


# -- exact values ----------------------------------------------------------------

@lru_cache(maxsize=256)
def _loops(cfg, n, n_prime, x_index):
    """Label sequences (x_0..x_{L-1}) with Q_x = 1; x_index None means any x_n."""
    L = n + n_prime
    o = origin_index(cfg)
    if L == 0:
        return ((),) if x_index in (None, o) else ()
    nb = shell_neighbors(cfg)
    exempt = _distinguished(n, L)
    out = []

    def rec(path):
        v = len(path)
        if v == L:
            if o not in nb[path[-1]]:
                return
            if (L - 1) not in exempt and L >= 2 and path[L - 2] == o:
                return
            out.append(tuple(path))
            return
        for y in nb[path[-1]]:
            y = int(y)
            if v >= 2 and (v - 1) not in exempt and path[v - 2] == y:
                continue
            if v == n % L and x_index is not None and y != x_index:
                continue
            path.append(y)
            rec(path)
            path.pop()

    if n % L == 0 and x_index is not None and x_index != o:
        return ()
    rec([o])
    return tuple(out)


def _check_value_caps(cfg, L):
    if L > DIAGRAM_VALUE_EDGE_CAP or cfg.n_sites > DIAGRAM_VALUE_SITE_CAP:
        raise CapExceeded(f"exhaustive label sum refused (n+n' = {L}, N^d = {cfg.n_sites})",
                          estimate=cfg.n_sites ** max(L - 1, 0))


def _lump_ok(path, lump, kind):
    L = len(path)
    pairs = [(path[e], path[(e + 1) % L]) for e in lump]
    first = frozenset(pairs[0])
    if any(frozenset(q) != first for q in pairs):
        return False
    if kind is EnsembleKind.HermitianUnitCircle:
        forward = sum(1 for a, b in pairs if a < b)
        return 2 * forward == len(pairs)
    return True


def _lumps_distinct(path, lumps):
    L = len(path)
    labels = [frozenset((path[g[0]], path[(g[0] + 1) % L])) for g in lumps]
    return len(set(labels)) == len(labels)


def _weight(cfg, L):
    return Fraction(1, (cfg.M - 1) ** (L // 2))


def diagram_value(gamma, cfg, x, mode="V", kind=EnsembleKind.HermitianUnitCircle):
    """V_x(Gamma) (mode "V") or R_x(Gamma) (mode "R") as an exact rational.

    Hermitian: every lump must carry one unordered label pair and be balanced
    in orientation (one valid split pi_gamma). Symmetric: only the common
    label pair is required. Mode V also requires distinct pairs across lumps.
    """
    kind = EnsembleKind.parse(kind)
    if isinstance(gamma, Pairing):
        gamma = gamma.as_lumping()
    L = gamma.L
    _check_value_caps(cfg, L)
    if mode not in ("V", "R"):
        raise DomainError("mode must be 'V' or 'R'")
    x_index = site_index(np.asarray(x), cfg)
    if not gamma.is_even():
        return Fraction(0)
    count = 0
    for path in _loops(cfg, gamma.n, gamma.n_prime, x_index):
        if all(_lump_ok(path, g, kind) for g in gamma.lumps):
            if mode == "R" or _lumps_distinct(path, gamma.lumps):
                count += 1
    return count * _weight(cfg, L)


def total_value(gamma, cfg, mode="R", kind=EnsembleKind.HermitianUnitCircle):
    """sum_x of the mode value, one enumeration of loops with free x_n."""
    kind = EnsembleKind.parse(kind)
    if isinstance(gamma, Pairing):
        gamma = gamma.as_lumping()
    _check_value_caps(cfg, gamma.L)
    count = 0
    for path in _loops(cfg, gamma.n, gamma.n_prime, None):
        if all(_lump_ok(path, g, kind) for g in gamma.lumps):
            if mode == "R" or _lumps_distinct(path, gamma.lumps):
                count += 1
    return count * _weight(cfg, gamma.L)


def ladder_value(n, cfg, x):
    """V_x(L_n) from the half-path formula: nonbacktracking n-step walks 0 -> x
    whose n steps use pairwise distinct unordered label pairs."""
    if n < 1:
        raise DomainError("n must be >= 1")
    _check_value_caps(cfg, 2 * n)
    x_index = site_index(np.asarray(x), cfg)
    nb = shell_neighbors(cfg)
    count = 0

    def rec(path, used):
        nonlocal count
        if len(path) == n + 1:
            count += path[-1] == x_index
            return
        for y in nb[path[-1]]:
            y = int(y)
            if len(path) >= 2 and path[-2] == y:
                continue
            pair = frozenset((path[-1], y))
            if pair in used:
                continue
            rec(path + [y], used | {pair})

    rec([origin_index(cfg)], frozenset())
    return count * _weight(cfg, 2 * n)


# -- audit of the per-pairing bound ------------------------------------------------

@dataclass(frozen=True)
class AuditRecord:
    pairing: Pairing
    skeleton: Skeleton
    total_R: Fraction
    bound: float

    @property
    def ok(self):
        return float(self.total_R) <= self.bound


@dataclass(frozen=True)
class AuditReport:
    p: int
    C: float
    records: tuple

    @property
    def n_audited(self):
        return len(self.records)

    @property
    def failures(self):
        return tuple(r for r in self.records if not r.ok)

    @property
    def max_ratio(self):
        return max((float(r.total_R) / r.bound for r in self.records), default=0.0)


def pairing_bound(skeleton, p, M, C=AUDIT_C):
    """C (M/(M-1))^p (l_sbar^(-1/2) + M^(-1/6)) M^(1/3 - mbar/3), with sbar the
    bridge outside Sigma_T of smallest multiplicity (the most lenient choice)."""
    orb = orbit_analysis(skeleton)
    tree = set(orb.tree)
    free = [l for br, l in zip(skeleton.pairing.bridges, skeleton.ell) if br not in tree]
    l_bar = min(free)
    return C * (M / (M - 1)) ** p * (l_bar ** -0.5 + M ** (-1.0 / 6.0)) * M ** ((1.0 - skeleton.mbar) / 3.0)


def bound_audit(p, cfg, C=AUDIT_C):
    """Check sum_x R_x(Gamma) against the skeleton bound for every admissible
    non-ladder pairing with n + n' = 2p."""
    if p < 1 or 2 * p > DIAGRAM_VALUE_EDGE_CAP:
        raise CapExceeded(f"audit supports 1 <= p <= {DIAGRAM_VALUE_EDGE_CAP // 2}", estimate=p)
    records = []
    for n in range(0, 2 * p + 1):
        for g in enumerate_pairings(n, 2 * p - n, admissible_only=True):
            if g.is_ladder():
                continue
            sk = collapse_to_skeleton(g)
            records.append(AuditRecord(g, sk, total_value(g, cfg, "R"), pairing_bound(sk, p, cfg.M, C)))
    return AuditReport(p, C, tuple(records))


# -- census --------------------------------------------------------------------

def census(n, n_prime):
    """Counts for the loop (n, n'): pairings, admissible ones, skeleton classes and orbit data."""
    total = admissible = ladders = 0
    skeletons = Counter()
    orbit_hist = Counter()
    margins = Counter()
    for g in enumerate_pairings(n, n_prime):
        total += 1
        if not g.is_admissible():
            continue
        admissible += 1
        if g.is_ladder():
            ladders += 1
            continue
        sk = collapse_to_skeleton(g)
        skeletons[(sk.m, sk.m_prime, sk.pairing.partner)] += 1
    for (m, mp, part), _ in sorted(skeletons.items()):
        sp = Pairing(m, mp, part)
        orb = orbit_analysis(sp)
        orbit_hist[orb.L] += 1
        margins[str(two_thirds_margin(sp))] += 1
    return {
        "n": n,
        "n_prime": n_prime,
        "pairings": total,
        "expected_pairings": count_pairings(n + n_prime),
        "admissible": admissible,
        "ladders": ladders,
        "skeleton_classes": len(skeletons),
        "orbit_count_histogram": {str(k): v for k, v in sorted(orbit_hist.items())},
        "two_thirds_margins": dict(sorted(margins.items())),
    }
