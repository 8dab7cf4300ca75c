"""Bounded bisimulation game: ~_k tests, eq-levels, optimal moves.

The eq-level of (T, U) is the largest k with T ~_k U, an element of
N u {omega}. The oracle computes it exactly below a mandatory cutoff K
and otherwise answers AtLeast(K); it never claims omega. Variables get
the stipulated treatment eqlevel(x_i, H) = 0 for H != x_i and
eqlevel(x_i, x_i) = omega, applied in the base case.
"""

from __future__ import annotations

from .terms import Substitution, apply_subst
from .grammar import Grammar
from .lts import enabled_actions, step_action


class EquivError(Exception):
    pass


class Level:
    """Finite(k) or AtLeast(K); ordering treats AtLeast(K) as >= K."""

    def __init__(self, value: int, exact: bool):
        self.value = value
        self.exact = exact

    @staticmethod
    def finite(k: int) -> "Level":
        return Level(k, True)

    @staticmethod
    def at_least(k: int) -> "Level":
        return Level(k, False)

    def is_finite(self) -> bool:
        return self.exact

    def __eq__(self, other):
        return (isinstance(other, Level) and self.value == other.value
                and self.exact == other.exact)

    def __hash__(self):
        return hash((self.value, self.exact))

    def __repr__(self):
        return "Finite(%d)" % self.value if self.exact else "AtLeast(%d)" % self.value


class EqOracle:
    """Memoized eq-level solver with a hard cutoff.

    Internally levels are plain ints e with the convention that
    e < budget means "exactly e" and e == budget means "at least
    budget". The memo keeps exact values forever and the best lower
    bound proven so far.
    """

    def __init__(self, g: Grammar, cutoff: int):
        if cutoff < 1:
            raise EquivError("cutoff must be >= 1")
        self.g = g
        self.cutoff = cutoff
        self.exact: dict[tuple[int, int], int] = {}
        self.lower: dict[tuple[int, int], int] = {}

    def _key(self, t: int, u: int) -> tuple[int, int]:
        return (t, u) if t <= u else (u, t)

    def level(self, t: int, u: int, budget: int | None = None) -> int:
        """e < budget: exact; e == budget: at least budget."""
        if budget is None:
            budget = self.cutoff
        if budget > self.cutoff:
            raise EquivError("budget %d exceeds cutoff %d" % (budget, self.cutoff))
        if t == u:
            return budget
        key = self._key(t, u)
        e = self.exact.get(key)
        if e is not None:
            return min(e, budget)
        if self.lower.get(key, -1) >= budget:
            return budget
        e = self._compute(t, u, budget)
        if e < budget:
            self.exact[key] = e
        else:
            self.lower[key] = max(self.lower.get(key, 0), budget)
        return e

    def _compute(self, t: int, u: int, budget: int) -> int:
        ts = self.g.ts
        if ts.is_var(t) or ts.is_var(u):
            return 0  # t != u here; the variable stipulation
        if enabled_actions(self.g, t) != enabled_actions(self.g, u):
            return 0
        if budget == 0:
            return 0
        best = budget  # min over attacker moves of (1 + max over responses)
        for a in enabled_actions(self.g, t):
            left = step_action(self.g, t, a)
            right = step_action(self.g, u, a)
            for moves, replies in ((left, right), (right, left)):
                for _, t2 in moves:
                    worst = 0
                    for _, u2 in replies:
                        worst = max(worst, self.level(t2, u2, budget - 1))
                        if worst >= budget - 1:
                            break
                    best = min(best, 1 + worst)
                    if best == 0:
                        return 0
        return best

    # -- public API ----------------------------------------------------------

    def eq_level(self, t: int, u: int) -> Level:
        e = self.level(t, u)
        return Level.finite(e) if e < self.cutoff else Level.at_least(self.cutoff)

    def check_k_bisim(self, t: int, u: int, k: int) -> bool:
        if k > self.cutoff:
            raise EquivError("k=%d exceeds cutoff %d" % (k, self.cutoff))
        if k == self.cutoff:
            return self.level(t, u, k) >= k
        return self.level(t, u) >= k

    def eq_level_subst(self, s1: Substitution, s2: Substitution) -> Level:
        e = self.cutoff
        for i in sorted(s1.support() | s2.support()):
            e = min(e, self.level(s1.lookup(i), s2.lookup(i)))
            if e == 0:
                break
        return Level.finite(e) if e < self.cutoff else Level.at_least(self.cutoff)


def attacker_optimal(o: EqOracle, t: int, u: int):
    """A move one side can take so that every response drops the
    eq-level; returns (side, rule id, successor)."""
    e = o.level(t, u)
    if e == 0 or e >= o.cutoff:
        raise EquivError("attacker_optimal needs 0 < eqlevel < cutoff")
    g = o.g
    for a in enabled_actions(g, t):
        for side, here, there in (("L", t, u), ("R", u, t)):
            for rid, t2 in step_action(g, here, a):
                worst = max((o.level(t2, u2, e) for _, u2 in
                             step_action(g, there, a)), default=0)
                if worst <= e - 1:
                    return (side, rid, t2)
    raise EquivError("no attacker-optimal move found (internal inconsistency)")


def defender_optimal(o: EqOracle, t: int, u: int, side: str, rid: str, succ: int):
    """The response maximizing the successor pair's eq-level;
    ties broken by least rule id in declaration order."""
    g = o.g
    if o.level(t, u) < 1:
        raise EquivError("defender_optimal needs eqlevel >= 1")
    action = g.rule_by_id[rid].action
    there = u if side == "L" else t
    replies = step_action(g, there, action)
    if not replies:
        raise EquivError("no response exists (internal inconsistency)")
    order = g.rule_order()
    best = None
    for rid2, u2 in sorted(replies, key=lambda p: order[p[0]]):
        lv = o.level(succ, u2)
        if best is None or lv > best[0]:
            best = (lv, rid2, u2)
    return (best[1], best[2])


def find_sink_witness(o: EqOracle, e_term: int, f_term: int,
                      sigma: Substitution, k: int, ell: int):
    """Witness for: substitution raised the eq-level of (E, F).

    Given eqlevel(E,F) = k < ell = eqlevel(E sigma, F sigma), find
    (x_i, H, w) with x_i in support(sigma), H != x_i, |w| <= k,
    E -w-> x_i and F -w-> H (or symmetrically), and
    x_i sigma ~_{ell-k} H sigma.
    """
    g = o.g
    ts = g.ts
    if not (o.level(e_term, f_term) == k < ell):
        raise EquivError("precondition violated: eqlevel(E,F) != k < ell")

    def validate(cand):
        x_t, h_t, w = cand
        if not ts.is_var(x_t):
            return False
        i = ts.var_index(x_t)
        if i not in sigma.support() or h_t == x_t:
            return False
        lhs = apply_subst(ts, x_t, sigma)
        rhs = apply_subst(ts, h_t, sigma)
        need = min(ell - k, o.cutoff)
        return o.level(lhs, rhs, need) >= need

    # candidates at the current pair: either side a variable; the
    # returned rule word is the sinking side's path
    def candidates(a_t, b_t, wa, wb):
        out = []
        if ts.is_var(a_t):
            out.append((a_t, b_t, wa))
        if ts.is_var(b_t):
            out.append((b_t, a_t, wb))
        return out

    def search(optimal_only):
        seen = set()
        frontier = [(e_term, f_term, (), ())]
        while frontier:
            nxt = []
            for a_t, b_t, wa, wb in frontier:
                for cand in candidates(a_t, b_t, wa, wb):
                    if validate(cand):
                        return (ts.var_index(cand[0]), cand[1], cand[2])
                if len(wa) >= k or ts.is_var(a_t) or ts.is_var(b_t):
                    continue
                cur = o.level(a_t, b_t) if optimal_only else 0
                for act in enabled_actions(g, a_t):
                    for r1, a2 in step_action(g, a_t, act):
                        for r2, b2 in step_action(g, b_t, act):
                            if optimal_only and o.level(a2, b2) != cur - 1:
                                continue
                            key = (a2, b2, len(wa) + 1)
                            if key not in seen:
                                seen.add(key)
                                nxt.append((a2, b2, wa + (r1,), wb + (r2,)))
            frontier = nxt
        return None

    # phase 1 follows optimal plays (mirrors the inductive proof);
    # phase 2 is the exhaustive label-matched fallback
    got = search(True) or search(False)
    if got is None:
        raise EquivError("no witness found (solver bug: a witness must exist here)")
    return got
