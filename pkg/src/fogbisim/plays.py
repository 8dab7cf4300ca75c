"""Optimal plays, balancing steps, balanced modified plays, segmentation.

An optimal play steps through pairs whose eq-level drops by exactly one
per move, both moves carrying the same action label. The balancing
transformation repeatedly replaces one side of the play by terms
shortly reachable from the other side (the pivot) without changing the
eq-level, producing a balanced modified play threaded by a single
pivot path. The segmentation machinery then classifies the play into
short "unclear" parts, sinking parts close to the initial terms, and
crucial segments whose bal-result chains are eq-level decreasing.
"""

from __future__ import annotations

from .terms import Substitution, apply_subst, pressize
from .grammar import Grammar, SinkTable, GrammarConstants
from .lts import run_word, d0_sinking_split
from .equiv import EqOracle, EquivError, attacker_optimal, defender_optimal


class PlaysError(Exception):
    pass


class Play:
    """Pairs (T_i, U_i), i in [0,k], and rule pairs (r_i, r'_i)."""

    def __init__(self, pairs, moves):
        assert len(pairs) == len(moves) + 1
        self.pairs = list(pairs)
        self.moves = list(moves)

    @property
    def start(self):
        return self.pairs[0]

    @property
    def finish(self):
        return self.pairs[-1]

    def length(self) -> int:
        return len(self.moves)

    def subplay(self, i, j) -> "Play":
        return Play(self.pairs[i:j + 1], self.moves[i:j])

    def left_word(self):
        return tuple(m[0] for m in self.moves)

    def right_word(self):
        return tuple(m[1] for m in self.moves)

    def left_terms(self):
        return [p[0] for p in self.pairs]

    def right_terms(self):
        return [p[1] for p in self.pairs]

    def __repr__(self):
        return "Play(len=%d)" % self.length()


class ModifiedPlay:
    """Nonempty sequence of plays with matching eq-levels at junctions.

    Kept normalized: zero-length bridging plays are merged away on
    construction via econc.
    """

    def __init__(self, plays, oracle: EqOracle | None = None):
        if not plays:
            raise PlaysError("a modified play needs at least one play")
        self.plays = list(plays)
        if oracle is not None:
            for a, b in zip(self.plays, self.plays[1:]):
                if a.finish == b.start:
                    raise PlaysError("unnormalized modified play")
                if oracle.level(*a.finish) != oracle.level(*b.start):
                    raise PlaysError("junction eq-levels differ")

    def length(self) -> int:
        return sum(p.length() for p in self.plays)

    def pair_sequence(self):
        seq = list(self.plays[0].pairs)
        for p in self.plays[1:]:
            if p.start == seq[-1]:
                seq.extend(p.pairs[1:])
            else:
                seq.extend(p.pairs)
        return seq

    def start(self):
        return self.plays[0].start

    def finish(self):
        return self.plays[-1].finish


def econc(a: ModifiedPlay, b: ModifiedPlay) -> ModifiedPlay:
    """Eqlevel-concatenation: merge when finish(a) = start(b)."""
    pa, pb = a.plays, b.plays
    if pa[-1].finish == pb[0].start:
        merged = Play(pa[-1].pairs + pb[0].pairs[1:],
                      pa[-1].moves + pb[0].moves)
        return ModifiedPlay(pa[:-1] + [merged] + pb[1:])
    return ModifiedPlay(pa + pb)


def build_optimal_play(o: EqOracle, t: int, u: int) -> Play:
    """Completed play of length eqlevel(T, U), attacker- and
    defender-optimal at every step."""
    e = o.level(t, u)
    if e >= o.cutoff:
        raise PlaysError("eq-level at/above cutoff; cannot build a play")
    pairs = [(t, u)]
    moves = []
    while e > 0:
        side, rid, succ = attacker_optimal(o, *pairs[-1])
        rid2, u2 = defender_optimal(o, *pairs[-1], side, rid, succ)
        if side == "L":
            moves.append((rid, rid2))
            pairs.append((succ, u2))
        else:
            moves.append((rid2, rid))
            pairs.append((u2, succ))
        e -= 1
    return Play(pairs, moves)


# -- balancing ---------------------------------------------------------------

class BalanceInfo:
    """Everything produced by one balancing step."""

    def __init__(self, side, rho, pivot, nonterminal, sigma_p, e_prime,
                 sigma_pp, vbar, bal_pair):
        self.side = side            # "L" or "R"
        self.rho = rho              # the length-d0 play that was balanced
        self.pivot = pivot          # U (for L) or T (for R)
        self.nonterminal = nonterminal
        self.sigma_p = sigma_p      # sigma' with T = A(x1..xm) sigma'
        self.e_prime = e_prime      # abstract E' with A(x..) -u-> E'
        self.sigma_pp = sigma_pp    # sigma'' with x_i sigma'' = V_i
        self.vbar = vbar            # i -> rule word from pivot to V_i
        self.bal_pair = bal_pair


def enables_balancing(g: Grammar, rho: Play, side: str, d0: int):
    """Root-performability of the side's word; None or (A, sigma', E')."""
    if rho.length() != d0:
        return None
    t = rho.start[0] if side == "L" else rho.start[1]
    node = g.ts.node(t)
    if node[0] == "var":
        return None
    word = rho.left_word() if side == "L" else rho.right_word()
    p = run_word(g, g.lhs_term(node[1]), word)
    if p is None:
        return None
    sigma_p = Substitution(g.ts, {i: c for i, c in enumerate(node[2], 1)})
    return (node[1], sigma_p, p.end)


def enables_L_balancing(g: Grammar, rho: Play, d0: int):
    return enables_balancing(g, rho, "L", d0)


def enables_R_balancing(g: Grammar, rho: Play, d0: int):
    return enables_balancing(g, rho, "R", d0)


def label_matched_reachable(g: Grammar, t: int, labels):
    """All (rule word, end) with the given action labels, in rule order."""
    out = [((), t)]
    for a in labels:
        nxt = []
        for w, cur in out:
            node = g.ts.node(cur)
            if node[0] == "var":
                continue
            for r in g.rules_by_lhs.get(node[1], []):
                if r.action != a:
                    continue
                nxt_term = run_word(g, cur, [r.rid]).end
                nxt.append((w + (r.rid,), nxt_term))
        out = nxt
    return out


def balance_step(o: EqOracle, rho: Play, side: str, sink: SinkTable,
                 d0: int) -> BalanceInfo:
    """One L- or R-balancing step on a play of length d0."""
    g = o.g
    ts = g.ts
    dec = enables_balancing(g, rho, side, d0)
    if dec is None:
        raise PlaysError("play does not enable %s-balancing" % side)
    a_name, sigma_p, e_prime = dec
    pivot = rho.start[1] if side == "L" else rho.start[0]
    other_finish = rho.finish[1] if side == "L" else rho.finish[0]
    e_pair = o.level(*rho.finish)
    if e_pair >= o.cutoff:
        raise PlaysError("eq-level at cutoff; cannot balance")
    order = g.rule_order()
    m = g.arities[a_name]
    vbar = {}
    binding = {}
    for i in range(1, m + 1):
        w_ai = sink.get(a_name, i)
        if w_ai is None:
            vbar[i] = ()
            binding[i] = pivot
            continue
        labels = [g.rule_by_id[r].action for r in w_ai]
        best = None
        for w, v in label_matched_reachable(g, pivot, labels):
            lv = o.level(apply_subst(ts, ts.var(i), sigma_p), v)
            if lv <= e_pair:
                continue
            key = (-lv, tuple(order[r] for r in w))
            if best is None or key < best[0]:
                best = (key, w, v)
        if best is None:
            raise PlaysError(
                "cutoff starvation: no qualifying V_%d for pivot" % i)
        vbar[i] = best[1]
        binding[i] = best[2]
    sigma_pp = Substitution(ts, binding)
    new_side_term = apply_subst(ts, e_prime, sigma_pp)
    bal_pair = ((new_side_term, other_finish) if side == "L"
                else (other_finish, new_side_term))
    if o.level(*bal_pair) != e_pair:
        raise PlaysError("balancing changed the eq-level (internal bug)")
    return BalanceInfo(side, rho, pivot, a_name, sigma_p, e_prime,
                       sigma_pp, vbar, bal_pair)


class BalancedPlay:
    """mu_0, then per balancing step j: (BalanceInfo_j, mu_j, split_j).

    split_j is (p, i) when the abstract replay of mu_j's balanced-side
    word from E' dies at variable x_i after p steps (then
    mu^unc = mu_j[0..p], mu^dsink = mu_j[p..]); otherwise None
    (mu^unc = mu_j, mu^dsink empty).
    """

    def __init__(self, start_pair, mu0: Play, balances, mus, splits):
        self.start_pair = start_pair
        self.mu0 = mu0
        self.balances = list(balances)   # BalanceInfo, j = 1..ell
        self.mus = list(mus)             # mu_j, j = 1..ell
        self.splits = list(splits)       # j = 1..ell
        assert len(self.balances) == len(self.mus) == len(self.splits)

    @property
    def ell(self) -> int:
        return len(self.balances)

    def length(self) -> int:
        d0 = self.balances[0].rho.length() if self.balances else 0
        return self.mu0.length() + sum(d0 + mu.length() for mu in self.mus)

    def mu_unc(self, j) -> Play:
        """mu^unc_j for j in [1, ell]."""
        mu, split = self.mus[j - 1], self.splits[j - 1]
        return mu if split is None else mu.subplay(0, split[0])

    def mu_dsink(self, j) -> Play | None:
        mu, split = self.mus[j - 1], self.splits[j - 1]
        return None if split is None else mu.subplay(split[0], mu.length())

    def pair_sequence(self):
        seq = list(self.mu0.pairs)
        for info, mu in zip(self.balances, self.mus):
            seq.extend(info.rho.pairs[1:])
            if info.bal_pair != info.rho.finish:
                seq.append(info.bal_pair)
            seq.extend(mu.pairs[1:])
        return seq


class PivotPath:
    """W_0 -w_0-> W_1 ... -w_ell-> W_{ell+1} with unc/dsink splits.

    segments[j] is (word, unc_len) taking W_j to W_{j+1}; the first
    unc_len rules are the unclear part (for j >= 1; segment 0 is all
    sinking). Empty when the balanced play has no balancing step.
    """

    def __init__(self, terms, segments):
        self.terms = list(terms)        # W_0 .. W_{ell+1}
        self.segments = list(segments)  # (word, unc_len), j = 0..ell

    def visit_terms(self, g: Grammar, j):
        """All terms on the path W_j -w_j-> W_{j+1}."""
        p = run_word(g, self.terms[j], self.segments[j][0])
        if p is None:
            raise PlaysError("pivot path does not replay (internal bug)")
        if p.end != self.terms[j + 1]:
            raise PlaysError("pivot path mismatch (internal bug)")
        return p.terms()


def _abstract_death(g: Grammar, e_prime: int, word):
    """First p with the abstract replay of word from e_prime reaching a
    variable; returns (p, var index) or None. p = 0 when e_prime is a
    variable already."""
    cur = e_prime
    for p in range(0, len(word) + 1):
        node = g.ts.node(cur)
        if node[0] == "var":
            return (p, node[1])
        if p == len(word):
            return None
        nxt = None
        r = g.rule_by_id[word[p]]
        if r.lhs == node[1]:
            sigma = Substitution(g.ts, {i: c for i, c in enumerate(node[2], 1)})
            nxt = apply_subst(g.ts, r.rhs, sigma)
        if nxt is None:
            return None
        cur = nxt
    return None


def transform_to_balanced(o: EqOracle, t: int, u: int,
                          sink: SinkTable | None = None,
                          d0: int | None = None):
    """The full phase procedure; returns (BalancedPlay, PivotPath)."""
    from .grammar import compute_sink_table
    g = o.g
    if sink is None:
        sink = compute_sink_table(g)
    if d0 is None:
        d0 = 1 + sink.max_len()
    if o.level(t, u) >= o.cutoff:
        raise PlaysError("eq-level at/above cutoff")
    pi = build_optimal_play(o, t, u)

    def scan(play, prev_side, death):
        """Earliest window enabling a legal balancing; (q, side) or None.
        prev_side None means the unconstrained first phase."""
        for q in range(0, play.length() - d0 + 1):
            window = play.subplay(q, q + d0)
            if prev_side is None:
                for s in ("L", "R"):
                    if enables_balancing(g, window, s, d0):
                        return (q, s)
            else:
                if enables_balancing(g, window, prev_side, d0):
                    return (q, prev_side)
                opp = "R" if prev_side == "L" else "L"
                if death is not None and death[0] <= q and \
                        enables_balancing(g, window, opp, d0):
                    return (q, opp)
        return None

    got = scan(pi, None, None)
    if got is None:
        bp = BalancedPlay((t, u), pi, [], [], [])
        return bp, PivotPath([], [])

    q, side = got
    mu0 = pi.subplay(0, q)
    rho = pi.subplay(q, q + d0)
    info = balance_step(o, rho, side, sink, d0)
    balances = [info]
    mus = []
    splits = []

    while True:
        cont = build_optimal_play(o, *balances[-1].bal_pair)
        prev = balances[-1]
        bal_word = (cont.left_word() if prev.side == "L"
                    else cont.right_word())
        death = _abstract_death(g, prev.e_prime, bal_word)
        got = scan(cont, prev.side, death)
        if got is None:
            mus.append(cont)
            splits.append(None if death is None else death)
            break
        q2, side2 = got
        mu = cont.subplay(0, q2)
        mus.append(mu)
        if death is not None and death[0] <= q2:
            splits.append(death)
        else:
            splits.append(None)
        rho2 = cont.subplay(q2, q2 + d0)
        balances.append(balance_step(o, rho2, side2, sink, d0))

    bp = BalancedPlay((t, u), mu0, balances, mus, splits)
    return bp, _build_pivot_path(g, bp)


def _build_pivot_path(g: Grammar, bp: BalancedPlay) -> PivotPath:
    """Assemble the pivot path from a balanced play."""
    if bp.ell == 0:
        return PivotPath([], [])
    terms = []
    segments = []
    first = bp.balances[0]
    w0_side = 1 if first.side == "L" else 0
    terms.append(bp.start_pair[w0_side])
    segments.append((bp.mu0.right_word() if first.side == "L"
                     else bp.mu0.left_word(), 0))
    for j in range(1, bp.ell + 1):
        info = bp.balances[j - 1]
        terms.append(info.pivot)
        mu = bp.mus[j - 1]
        split = bp.splits[j - 1]
        if j < bp.ell:
            nxt = bp.balances[j]
            switched = nxt.side != info.side
        else:
            nxt = None
            switched = False  # halt: pivot path stays on the pivot side
        if not switched:
            # u'_j v'_j along the pivot's own side
            u_word = (info.rho.right_word() if info.side == "L"
                      else info.rho.left_word())
            v_word = (mu.right_word() if info.side == "L"
                      else mu.left_word())
            word = u_word + v_word
            unc = len(u_word) + (split[0] if split is not None else len(v_word))
            end = (mu.finish[1] if info.side == "L" else mu.finish[0])
        else:
            p, i = split  # case b) guarantees the split exists
            vbar = info.vbar[i]
            tail = (mu.left_word() if info.side == "L"
                    else mu.right_word())[p:]
            word = tuple(vbar) + tuple(tail)
            unc = len(vbar)
            end = (mu.finish[0] if info.side == "L" else mu.finish[1])
        segments.append((word, unc))
        if j == bp.ell:
            terms.append(end)
    return PivotPath(terms, segments)


# -- canonical p-top forms ---------------------------------------------------

def p_top_form(ts, w: int, p: int):
    """Deterministic p-top form G sigma of W: cut every branch at depth
    p, numbering the cut points left-to-right depth-first (one variable
    per distinct cut subterm)."""
    mapping: dict = {}
    binding: dict = {}
    counter = [0]

    def fresh(key, target):
        if key not in mapping:
            counter[0] += 1
            mapping[key] = counter[0]
            binding[counter[0]] = target
        return ts.var(mapping[key])

    def cut(t, depth):
        node = ts.node(t)
        if node[0] == "var":
            return fresh(("v", node[1]), t)
        if depth == 0:
            return fresh(("t", t), t)
        return ts.app(node[1], tuple(cut(c, depth - 1) for c in node[2]))

    g_top = cut(w, p)
    return g_top, Substitution(ts, binding)


def pivot_top_presentation(g: Grammar, info: BalanceInfo, d0: int):
    """Presentation of a bal-result over a d0-top form of the
    pivot: returns (G, sigma, E, F) with bal-result = (E sigma, F sigma)
    on the balanced side."""
    ts = g.ts
    g_top, sigma = p_top_form(ts, info.pivot, d0)
    u_word = (info.rho.right_word() if info.side == "L"
              else info.rho.left_word())
    pf = run_word(g, g_top, u_word)
    if pf is None:
        raise PlaysError("d0-top form is not d0-safe (internal bug)")
    f_top = pf.end
    binding = {}
    for i, w in info.vbar.items():
        pi = run_word(g, g_top, w)
        if pi is None:
            raise PlaysError("vbar word not performable from the top")
        binding[i] = pi.end
    e_top = apply_subst(ts, info.e_prime, Substitution(ts, binding))
    return g_top, sigma, e_top, f_top


# -- segmentation ------------------------------------------------------------

class Segmentation:
    def __init__(self, close, usink_len, csink_len, crucial):
        self.close = close            # j in [1,ell] with W_j close
        self.usink_len = usink_len    # j -> length of mu^usink_j
        self.csink_len = csink_len    # j -> length of mu^csink_j (0..ell)
        self.crucial = crucial        # list of (k_j, k_{j+1}) index pairs


def refine_segments(g: Grammar, bp: BalancedPlay, pp: PivotPath,
                    subterms: set[int]) -> Segmentation:
    """Split sinking parts at the first visit of a subterm of the
    initial pair on both sides; mark close pivots; extract crucial
    segments."""
    ell = bp.ell
    csink = {0: bp.mu0.length()}
    usink = {0: 0}
    for j in range(1, ell + 1):
        dsink = bp.mu_dsink(j)
        if dsink is None:
            usink[j] = 0
            csink[j] = 0
            continue
        lt, rt = dsink.left_terms(), dsink.right_terms()
        cut = None
        seen_l = seen_r = False
        for r in range(0, dsink.length() + 1):
            seen_l = seen_l or lt[r] in subterms
            seen_r = seen_r or rt[r] in subterms
            if seen_l and seen_r:
                cut = r
                break
        if cut is None:
            usink[j] = dsink.length()
            csink[j] = 0
        else:
            usink[j] = cut
            csink[j] = dsink.length() - cut
    close = []
    for j in range(1, ell + 1):
        visited = pp.visit_terms(g, j - 1)
        if any(v in subterms for v in visited):
            close.append(j)
    crucial = []
    if close:
        ks = close + [ell + 1]
        for a, b in zip(ks, ks[1:]):
            crucial.append((a, b))
    return Segmentation(close, usink, csink, crucial)


def crucial_segment_length(bp: BalancedPlay, seg: Segmentation,
                           kj: int, kj1: int) -> int:
    """length(rho'_{kj} ... mu^usink_{kj1 - 1})."""
    d0 = bp.balances[0].rho.length()
    total = 0
    for j in range(kj, kj1):
        total += d0 + bp.mu_unc(j).length() + seg.usink_len[j]
        if kj <= j < kj1 - 1:
            total += seg.csink_len[j]  # empty inside crucial segments
    return total


# -- the proof-checking harness ----------------------------------------------

class VerifyReport:
    def __init__(self):
        self.checks = []   # (name, ok, detail)

    def add(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    def ok(self) -> bool:
        return all(c[1] for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c[1]]


def verify_balanced(o: EqOracle, bp: BalancedPlay, pp: PivotPath,
                    seg: Segmentation, consts: GrammarConstants) -> VerifyReport:
    g = o.g
    ts = g.ts
    rep = VerifyReport()
    t0, u0 = bp.start_pair
    psz = pressize(ts, [t0, u0])
    e0 = o.level(t0, u0)
    d0 = consts.d0

    rep.add("total-length-equals-eqlevel", bp.length() == e0,
            "length=%d eqlevel=%d" % (bp.length(), e0))

    pairs = bp.pair_sequence()
    rep.add("no-pair-repeats", len(pairs) == len(set(pairs)),
            "pairs=%d distinct=%d" % (len(pairs), len(set(pairs))))

    # every sinking part is d0-sinking on both sides
    sink_ok = True
    checks = [(bp.mu0.left_word(),), (bp.mu0.right_word(),)]
    for j in range(1, bp.ell + 1):
        ds = bp.mu_dsink(j)
        if ds is not None:
            checks.append((ds.left_word(),))
            checks.append((ds.right_word(),))
    for (w,) in checks:
        if d0_sinking_split(g, w, d0) is None:
            sink_ok = False
    rep.add("sink-parts-d0-sinking", sink_ok)

    # unclear parts are short
    unc_ok = True
    detail = []
    for j in range(1, bp.ell + 1):
        w_unc = pp.segments[j][1] if j < len(pp.segments) else 0
        ln = d0 + bp.mu_unc(j).length()
        if not (w_unc <= ln <= consts.d2):
            unc_ok = False
            detail.append("j=%d w_unc=%d len=%d d2=%d" % (j, w_unc, ln, consts.d2))
    rep.add("unclear-bounded-by-d2", unc_ok, "; ".join(detail))

    # total close-sinking length
    close_total = sum(seg.csink_len.values())
    rep.add("close-sink-total", close_total <= consts.d3 * psz * psz,
            "total=%d bound=%d" % (close_total, consts.d3 * psz * psz))

    # number of crucial segments
    rep.add("crucial-count",
            len(seg.crucial) <= consts.d4 * psz,
            "count=%d bound=%d" % (len(seg.crucial), consts.d4 * psz))

    # length of each crucial segment
    p24_ok = True
    detail = []
    for kj, kj1 in seg.crucial:
        ln = crucial_segment_length(bp, seg, kj, kj1)
        bound = consts.d5 * (1 + kj1 - kj)
        if ln > bound:
            p24_ok = False
            detail.append("k=%d..%d len=%d bound=%d" % (kj, kj1, ln, bound))
    rep.add("crucial-length", p24_ok, "; ".join(detail))

    # bal-results per pivot
    per_pivot: dict[int, set] = {}
    for info in bp.balances:
        per_pivot.setdefault(info.pivot, set()).add(info.bal_pair)
    p15_ok = all(len(v) <= consts.d1 for v in per_pivot.values())
    rep.add("balresults-per-pivot", p15_ok)

    # balancing soundness + bal-result top-form shape and size per step
    shape_ok = True
    sound_ok = True
    detail = []
    for idx, info in enumerate(bp.balances, 1):
        if o.level(*info.bal_pair) != o.level(*info.rho.finish):
            sound_ok = False
        g_top, sigma, e_top, f_top = pivot_top_presentation(g, info, d0)
        left = apply_subst(ts, e_top, sigma)
        right = apply_subst(ts, f_top, sigma)
        want = (info.bal_pair if info.side == "L"
                else (info.bal_pair[1], info.bal_pair[0]))
        if (left, right) != want:
            shape_ok = False
            detail.append("j=%d presentation mismatch" % idx)
        bound = pressize(ts, [g_top]) + (consts.m + 2) * d0 * consts.stepinc
        if pressize(ts, [e_top, f_top]) > bound:
            shape_ok = False
            detail.append("j=%d bal-result size %d > %d"
                          % (idx, pressize(ts, [e_top, f_top]), bound))
    rep.add("balancing-preserves-eqlevel", sound_ok)
    rep.add("balresult-top-shape", shape_ok, "; ".join(detail))

    # pivot-path stitching
    stitch_ok = True
    if bp.ell >= 1:
        try:
            for j in range(0, bp.ell + 1):
                pp.visit_terms(g, j)
        except PlaysError:
            stitch_ok = False
    rep.add("pivot-path-stitches", stitch_ok)
    return rep
