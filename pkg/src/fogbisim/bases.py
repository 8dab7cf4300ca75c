"""Eqlevel-decreasing top sequences, non-equivalence bases, and the
sound-candidate search.

An (n,s,g)-sequence is an eqlevel-decreasing sequence of pairs
(E_j sigma, F_j sigma) sharing one tail substitution sigma, where the
tops (E_j, F_j) use only variables x1..xn and grow at most linearly
(pressize <= s + g*(j-1)). Candidates collect non-equivalent small
pairs layer by layer and yield the bound E_B on the length of any such
sequence whose instantiated levels the candidate covers. The search
loop grows a candidate until every enumerated pair outside it is
"equivalent enough" at scale E_B.
"""

from __future__ import annotations

from itertools import product

from .terms import Substitution, apply_subst, omega_iterate, pressize, propsize, varin
from .grammar import Grammar
from .lts import run_word
from .equiv import EqOracle, find_sink_witness
from .plays import BalancedPlay, PivotPath, Segmentation, p_top_form


class BasesError(Exception):
    pass


class BasesIndeterminate(BasesError):
    """An answer would require eq-levels beyond the oracle cutoff."""


class NsgParams:
    def __init__(self, n: int, s: int, g: int):
        self.n = n
        self.s = s
        self.g = g

    def __repr__(self):
        return "NsgParams(n=%d, s=%d, g=%d)" % (self.n, self.s, self.g)


class NsgSequence:
    """Tops (E_j, F_j) for j in [1,z] plus the shared tail sigma."""

    def __init__(self, tops, sigma: Substitution):
        self.tops = list(tops)
        self.sigma = sigma

    @property
    def z(self) -> int:
        return len(self.tops)

    def element(self, ts, j) -> tuple[int, int]:
        e, f = self.tops[j]
        return (apply_subst(ts, e, self.sigma), apply_subst(ts, f, self.sigma))


def _step_increment(g: Grammar) -> int:
    return max((propsize(g.ts, [r.rhs]) for r in g.rules), default=0)


def check_nsg_sequence(o: EqOracle, seq: NsgSequence, p: NsgParams) -> bool:
    """Variable, size, and strict-eqlevel-decrease conditions."""
    ts = o.g.ts
    prev = None
    for j, (e, f) in enumerate(seq.tops, 1):
        if not varin(ts, [e, f]) <= set(range(1, p.n + 1)):
            return False
        if pressize(ts, [e, f]) > p.s + p.g * (j - 1):
            return False
        lv = o.level(*seq.element(ts, j - 1))
        if lv >= o.cutoff:
            raise BasesError(
                "element %d is at the oracle cutoff; cannot certify a "
                "strictly decreasing sequence" % j)
        if prev is not None and lv >= prev:
            return False
        prev = lv
    return True


def reduce_nsg_step(o: EqOracle, seq: NsgSequence, p: NsgParams):
    """One inductive reduction: trade the variable x_i exposed by the
    first element for its infinite unfolding, drop the first k+1
    elements, and renumber so the remaining tops use x1..x_{n-1}.

    Returns (reduced sequence, params (n-1, s', g)). Per-element
    eq-levels of the retained elements are revalidated to be unchanged.
    """
    g = o.g
    ts = g.ts
    if p.n <= 0:
        raise BasesError("reduction needs n > 0")
    if not seq.tops:
        raise BasesError("cannot reduce an empty sequence")
    e1, f1 = seq.tops[0]
    k = o.level(e1, f1)
    ell = o.level(*seq.element(ts, 0))
    if ell >= o.cutoff:
        raise BasesIndeterminate("first element at/above the cutoff")
    if k >= ell:
        raise BasesError(
            "eqlevel(E1,F1) = eqlevel(E1 sigma, F1 sigma): nothing to "
            "reduce; the sequence length is bounded by 1 + %d directly" % k)
    i, h, _w = find_sink_witness(o, e1, f1, seq.sigma, k, ell)
    h_prime = omega_iterate(ts, h, i)
    kill_i = Substitution(ts, {i: h_prime})
    retained = seq.tops[k + 1:]
    new_tops = []
    for e, f in retained:
        e2 = apply_subst(ts, e, kill_i)
        f2 = apply_subst(ts, f, kill_i)
        if i != p.n:
            ren = Substitution(ts, {p.n: ts.var(i)})
            e2 = apply_subst(ts, e2, ren)
            f2 = apply_subst(ts, f2, ren)
        new_tops.append((e2, f2))
    binding = {}
    for v in sorted(seq.sigma.support()):
        if v == i or v == p.n:
            continue
        binding[v] = seq.sigma.lookup(v)
    if i != p.n:
        binding[i] = seq.sigma.lookup(p.n)
    new_sigma = Substitution(ts, binding)
    stepinc = _step_increment(g)
    new_p = NsgParams(p.n - 1, 2 * p.s + p.g * (1 + k) + k * stepinc, p.g)
    new_seq = NsgSequence(new_tops, new_sigma)
    for jj, (e, f) in enumerate(retained):
        old = o.level(*seq.element(ts, k + 1 + jj))
        new = o.level(*new_seq.element(ts, jj))
        if old != new:
            raise BasesError(
                "reduction changed the eq-level of element %d: %d -> %d"
                % (k + 2 + jj, old, new))
    return new_seq, new_p


# -- candidates and bounds ---------------------------------------------------

def pair_level(ts, e: int, f: int):
    """The j with varin(E,F) = {x1..xj}, or None for non-prefix sets."""
    vs = varin(ts, [e, f])
    j = len(vs)
    return j if vs == set(range(1, j + 1)) else None


class Candidate:
    """Layered set of non-equivalent pairs with the s' recursion.

    layers[j] holds the pairs whose variables are exactly {x1..xj};
    validation computes the per-layer thresholds s_j (s_n = s) and
    maxima e_j going from layer n down to 0.
    """

    def __init__(self, o: EqOracle, params: NsgParams, pairs):
        self.o = o
        self.params = params
        ts = o.g.ts
        stepinc = _step_increment(o.g)
        self.layers: dict[int, set] = {j: set() for j in range(params.n + 1)}
        for e, f in pairs:
            lv = pair_level(ts, e, f)
            if lv is None or lv > params.n:
                raise BasesError(
                    "pair variables must be a prefix set within x1..x%d"
                    % params.n)
            if o.level(e, f) >= o.cutoff:
                raise BasesError(
                    "candidate pair not verified non-equivalent below the "
                    "cutoff")
            self.layers[lv].add((e, f) if e <= f else (f, e))
        self.s_vals: dict[int, int] = {}
        self.e_vals: dict[int, int] = {}
        s = params.s
        for j in range(params.n, -1, -1):
            self.s_vals[j] = s
            members = [pr for lv in range(0, j + 1) for pr in self.layers[lv]]
            for e, f in self.layers[j]:
                if pressize(ts, [e, f]) > s:
                    raise BasesError(
                        "layer-%d pair exceeds its size threshold %d" % (j, s))
            sized = [pr for pr in members if pressize(ts, list(pr)) <= s]
            self.e_vals[j] = max((o.level(e, f) for e, f in sized), default=0)
            s = 2 * s + params.g * (1 + self.e_vals[j]) \
                + self.e_vals[j] * stepinc

    def all_pairs(self):
        return {pr for lay in self.layers.values() for pr in lay}

    def __contains__(self, pair):
        e, f = pair
        key = (e, f) if e <= f else (f, e)
        lv = pair_level(self.o.g.ts, e, f)
        return lv is not None and lv <= self.params.n \
            and key in self.layers[lv]


class Bound:
    def __init__(self, value: int):
        if value < 1:
            raise BasesError("the bound is always positive")
        self.value = value

    def __repr__(self):
        return "Bound(%d)" % self.value


def bound_of_candidate(c: Candidate) -> Bound:
    return Bound(sum(1 + c.e_vals[j] for j in range(c.params.n + 1)))


# -- enumeration of small regular terms --------------------------------------

def enumerate_terms(g: Grammar, max_vars: int, max_size: int,
                    budget: int = 2_000_000) -> list[int]:
    """All canonical regular terms with variables among x1..max_vars and
    at most max_size distinct subterms, by brute-force enumeration of
    term graphs (cyclic ones included)."""
    ts = g.ts
    out = set()
    for k in range(1, max_size + 1):
        options = [("var", i) for i in range(1, max_vars + 1)]
        for nt in g.arities:
            for kids in product(range(k), repeat=g.arities[nt]):
                options.append(("app", nt, kids))
        total = len(options) ** k
        if total > budget:
            raise BasesError(
                "enumeration budget exceeded (%d graphs of %d nodes)"
                % (total, k))
        for assignment in product(options, repeat=k):
            # only graphs whose nodes are all reachable from node 0;
            # smaller graphs were enumerated at smaller k
            seen = {0}
            stack = [0]
            while stack:
                node = assignment[stack.pop()]
                if node[0] == "app":
                    for child in node[2]:
                        if child not in seen:
                            seen.add(child)
                            stack.append(child)
            if len(seen) != k:
                continue
            raw = {}
            for idx, node in enumerate(assignment):
                if node[0] == "var":
                    raw[idx] = ("var", node[1])
                else:
                    raw[idx] = ("app", node[1], list(node[2]))
            out.add(ts.intern_raw(raw, [0])[0])
    return sorted(out)


def enumerate_pairs(o: EqOracle, max_vars: int, max_size: int):
    """Ordered-canonical pairs (E,F), E <= F, E != F, whose variables
    form a prefix set; yields (pair, level, pressize, eq-level)."""
    g = o.g
    ts = g.ts
    terms = enumerate_terms(g, max_vars, max_size)
    for a in range(len(terms)):
        for b in range(a + 1, len(terms)):
            e, f = terms[a], terms[b]
            lv = pair_level(ts, e, f)
            if lv is None or lv > max_vars:
                continue
            sz = pressize(ts, [e, f])
            if sz > max_size:
                continue
            yield ((e, f), lv, sz, o.level(e, f))


def build_full_base_capped(o: EqOracle, params: NsgParams, cap: int):
    """The full candidate, restricted to pairs of pressize <= cap.

    Returns (Candidate, Bound, complete) where complete is False when a
    layer threshold exceeded the cap or some pair's eq-level reached the
    cutoff (such pairs are treated as equivalent and left out).
    """
    stepinc = _step_increment(o.g)
    universe = list(enumerate_pairs(o, params.n, cap))
    capped = False
    ambiguous = False
    picked = set()
    s = params.s
    for j in range(params.n, -1, -1):
        if s > cap:
            capped = True
        t = min(s, cap)
        stage = [(pr, lv, sz, eq) for pr, lv, sz, eq in universe
                 if lv <= j and sz <= t]
        levels = []
        for pr, lv, sz, eq in stage:
            if eq >= o.cutoff:
                ambiguous = True
                continue
            levels.append(eq)
            if lv == j:
                picked.add(pr)
        e = max(levels, default=0)
        s = 2 * s + params.g * (1 + e) + e * stepinc
    cand = Candidate(o, params, picked)
    return cand, bound_of_candidate(cand), (not capped and not ambiguous)


# -- the soundness machinery -------------------------------------------------

def speceq_check(o: EqOracle, t: int, u: int, k: int, c: int) -> bool:
    """eqlevel(T,U) > c * (k*pressize(T,U) + pressize(T,U)^2)?"""
    if t == u:
        return True
    psz = pressize(o.g.ts, [t, u])
    threshold = c * (k * psz + psz * psz)
    lv = o.level(t, u)
    if lv < o.cutoff:
        return lv > threshold
    if o.cutoff > threshold:
        return True
    raise BasesIndeterminate(
        "threshold %d is at/above the cutoff %d and the pair is not "
        "distinguished below it" % (threshold, o.cutoff))


def sound_candidate_search(o: EqOracle, params: NsgParams, c: int, cap: int):
    """Grow a candidate until every enumerated pair outside it passes
    the scale-E_B equivalence test; returns (Candidate, Bound, status)
    with status in {"sound", "indeterminate", "capped"}."""
    universe = list(enumerate_pairs(o, params.n, cap))
    pairs: set = set()
    while True:
        cand = Candidate(o, params, pairs)
        bound = bound_of_candidate(cand)
        capped = any(cand.s_vals[j] > cap for j in cand.s_vals)
        violators = []
        for pr, lv, sz, eq in universe:
            if sz > min(cand.s_vals[lv], cap) or pr in pairs:
                continue
            try:
                ok = speceq_check(o, pr[0], pr[1], bound.value, c)
            except BasesIndeterminate:
                return cand, bound, "indeterminate"
            if not ok:
                violators.append(pr)
        if not violators:
            return cand, bound, ("capped" if capped else "sound")
        pairs.update(violators)


# -- stair presentation of crucial-segment bal-results -----------------------

def present_stair_as_nsg(o: EqOracle, bp: BalancedPlay, pp: PivotPath,
                         seg: Segmentation, idx: int, d0: int) -> NsgSequence:
    """Present the bal-result chain of one crucial segment as an
    (n,s,g)-sequence: the stair from the last initial-pair subterm V on
    the preceding pivot-path segment is replayed abstractly from
    A(x1..xm), the d0-top form of V supplies the shared tail, and each
    bal-result splits into a top over that tail."""
    g = o.g
    ts = g.ts
    kj, kj1 = seg.crucial[idx]
    subs = set(ts.reachable(list(bp.start_pair)))

    word = pp.segments[kj - 1][0]
    path = run_word(g, pp.terms[kj - 1], word)
    terms = path.terms()
    last = max(q for q, t in enumerate(terms) if t in subs)
    v = terms[last]
    w2 = word[last:]
    if ts.is_var(v):
        raise BasesError("stair base is a dead variable (classifier bug)")
    a_name = ts.root(v)
    top_v, sigma = p_top_form(ts, v, d0)
    sbb = Substitution(ts, {h: ch for h, ch
                            in enumerate(ts.children(top_v), 1)})

    words = [w2] + [pp.segments[q][0] for q in range(kj, kj1 - 1)]
    cur = g.lhs_term(a_name)
    g_primes = []
    for w in words:
        pr = run_word(g, cur, w)
        if pr is None or ts.is_var(pr.end):
            raise BasesError("crucial segment is not a stair (classifier bug)")
        cur = pr.end
        g_primes.append(cur)

    tops = []
    for i, gp in enumerate(g_primes):
        g_i = apply_subst(ts, gp, sbb)
        info = bp.balances[kj + i - 1]
        if apply_subst(ts, g_i, sigma) != info.pivot:
            raise BasesError("stair presentation misses the pivot "
                             "(internal bug)")
        u_word = (info.rho.right_word() if info.side == "L"
                  else info.rho.left_word())
        pf = run_word(g, g_i, u_word)
        if pf is None:
            raise BasesError("pivot top is not d0-safe (internal bug)")
        binding = {}
        for h, wv in info.vbar.items():
            pv = run_word(g, g_i, wv)
            if pv is None:
                raise BasesError("pivot top cannot replay a v-bar word "
                                 "(internal bug)")
            binding[h] = pv.end
        e_top = apply_subst(ts, info.e_prime, Substitution(ts, binding))
        pair = ((e_top, pf.end) if info.side == "L" else (pf.end, e_top))
        got = (apply_subst(ts, pair[0], sigma), apply_subst(ts, pair[1], sigma))
        if got != info.bal_pair:
            raise BasesError("presented tops do not instantiate to the "
                             "bal-result (internal bug)")
        tops.append(pair)
    return NsgSequence(tops, sigma)
