import random

import pytest

from fogbisim.terms import apply_subst, parse_term, pressize, varin, omega_iterate
from fogbisim.grammar import compute_constants, compute_sink_table, parse_grammar
from fogbisim.lts import run_word, step_rule
from fogbisim.equiv import EqOracle
from fogbisim.plays import (
    BalancedPlay, ModifiedPlay, Play, PlaysError, balance_step,
    build_optimal_play, crucial_segment_length, econc, enables_L_balancing,
    enables_R_balancing, enables_balancing, label_matched_reachable,
    p_top_form, pivot_top_presentation, refine_segments,
    transform_to_balanced, verify_balanced, _abstract_death,
)

from gen import random_grammar, random_ground_term

G1 = (
    "nonterminals: A/1, Z/0\n"
    "actions: a, b\n"
    "rule r1: A(x1) -a-> x1\n"
    "rule r2: A(x1) -b-> A(A(x1))\n"
    "rule r3: Z -a-> Z\n")

# a left-side chain A -> P -> Q that never sinks, differing from the
# right-side chain B -> R -> S only at depth 2 (S has an extra action)
GCHAIN = (
    "nonterminals: A/1, B/1, P/1, Q/1, R/1, S/1, Z/0\n"
    "actions: a, b, c\n"
    "rule a1: A(x1) -a-> x1\n"
    "rule a2: A(x1) -b-> P(x1)\n"
    "rule p1: P(x1) -b-> Q(x1)\n"
    "rule q1: Q(x1) -b-> Q(x1)\n"
    "rule b1: B(x1) -a-> x1\n"
    "rule b2: B(x1) -b-> R(x1)\n"
    "rule r1: R(x1) -b-> S(x1)\n"
    "rule s1: S(x1) -b-> S(x1)\n"
    "rule s2: S(x1) -c-> S(x1)\n"
    "rule z1: Z -a-> Z\n")

# all-nullary chains: every length-1 window is root-performable
GNULL = (
    "nonterminals: P0/0, P1/0, P2/0, Q0/0, Q1/0, DEAD/0\n"
    "actions: a, b\n"
    "rule p0: P0 -a-> P1\n"
    "rule p1: P1 -a-> P2\n"
    "rule p2: P2 -a-> P2\n"
    "rule q0: Q0 -a-> Q1\n"
    "rule q1: Q1 -a-> DEAD\n"
    "rule dd: DEAD -b-> DEAD\n")


def g1():
    return parse_grammar(G1)


def tower(g, n):
    t = parse_term(g.ts, "Z", g.arities)
    for _ in range(n):
        t = g.ts.app("A", (t,))
    return t


def pipeline(g, t, u, cutoff=8):
    o = EqOracle(g, cutoff)
    sink = compute_sink_table(g)
    c = compute_constants(g, sink)
    bp, pp = transform_to_balanced(o, t, u, sink, c.d0)
    seg = refine_segments(g, bp, pp, set(g.ts.reachable([t, u])))
    rep = verify_balanced(o, bp, pp, seg, c)
    return o, c, bp, pp, seg, rep


# -- optimal plays -----------------------------------------------------------

def test_build_optimal_play_towers():
    g = g1()
    o = EqOracle(g, 12)
    t, u = tower(g, 3), tower(g, 6)
    p = build_optimal_play(o, t, u)
    assert p.length() == 3 == o.level(t, u)
    for i, (rl, ru) in enumerate(p.moves):
        assert g.rule_by_id[rl].action == g.rule_by_id[ru].action
        assert step_rule(g, p.pairs[i][0], rl) == p.pairs[i + 1][0]
        assert step_rule(g, p.pairs[i][1], ru) == p.pairs[i + 1][1]
        assert o.level(*p.pairs[i + 1]) == o.level(*p.pairs[i]) - 1
    assert o.level(*p.finish) == 0


def test_build_optimal_play_trivial_and_errors():
    g = g1()
    o = EqOracle(g, 12)
    z = parse_term(g.ts, "Z", g.arities)
    p = build_optimal_play(o, g.ts.var(1), z)
    assert p.length() == 0 and p.start == p.finish
    with pytest.raises(PlaysError):
        build_optimal_play(o, z, z)  # at cutoff


def test_play_words_and_subplay():
    g = g1()
    o = EqOracle(g, 12)
    p = build_optimal_play(o, tower(g, 2), tower(g, 4))
    assert p.left_word() == ("r1", "r1")
    sub = p.subplay(1, 2)
    assert sub.start == p.pairs[1] and sub.finish == p.pairs[2]
    assert sub.length() == 1


def test_econc_merges_and_associates():
    g = g1()
    o = EqOracle(g, 12)
    p = build_optimal_play(o, tower(g, 3), tower(g, 6))
    a = ModifiedPlay([p.subplay(0, 1)])
    b = ModifiedPlay([p.subplay(1, 2)])
    c = ModifiedPlay([p.subplay(2, 3)])
    ab_c = econc(econc(a, b), c)
    a_bc = econc(a, econc(b, c))
    assert ab_c.pair_sequence() == a_bc.pair_sequence() == p.pairs
    assert len(ab_c.plays) == 1  # shared endpoints merge into one play
    assert ab_c.length() == 3


def test_modified_play_rejects_bad_junction():
    g = g1()
    o = EqOracle(g, 12)
    p = build_optimal_play(o, tower(g, 2), tower(g, 4))
    with pytest.raises(PlaysError):
        ModifiedPlay([p.subplay(0, 1), p.subplay(1, 2)], o)  # unnormalized
    with pytest.raises(PlaysError):
        ModifiedPlay([p.subplay(0, 2), p.subplay(0, 1)], o)  # levels differ


# -- balancing enablement ----------------------------------------------------

def test_enables_balancing_worked_example():
    g = parse_grammar(
        "nonterminals: A/2, M/2, B2/1, C/2, Z/0\n"
        "actions: a, b\n"
        "rule r1: A(x1,x2) -a-> M(x1,x2)\n"
        "rule r2: M(x1,x2) -b-> B2(x1)\n"
        "rule r3: M(x1,x2) -b-> B2(C(x2,x1))\n"
        "rule rz: Z -a-> Z\n")
    ts = g.ts
    t = parse_term(ts, "A(Z,Z)", g.arities)
    t1 = step_rule(g, t, "r1")
    t2 = step_rule(g, t1, "r3")
    rho = Play([(t, t), (t1, t1), (t2, t2)], [("r1", "r1"), ("r3", "r3")])
    got = enables_L_balancing(g, rho, 2)
    assert got is not None
    a_name, sigma_p, e_prime = got
    assert a_name == "A"
    assert e_prime == parse_term(ts, "B2(C(x2,x1))", g.arities)
    assert enables_R_balancing(g, rho, 2) is not None
    assert enables_L_balancing(g, rho, 3) is None  # wrong length


def test_enables_balancing_sinking_prefix():
    g = g1()
    t = tower(g, 2)
    p = run_word(g, t, ["r1", "r1"])
    rho = Play(
        [(p.start, p.start), (p.intermediates[0], p.intermediates[0]),
         (p.end, p.end)],
        [("r1", "r1"), ("r1", "r1")])
    # A(x1) -r1-> x1 dies before step 2: not root-performable
    assert enables_L_balancing(g, rho, 2) is None


def test_enables_balancing_variable_landing():
    g = parse_grammar(GCHAIN)
    t = parse_term(g.ts, "A(Z)", g.arities)
    t1 = step_rule(g, t, "a1")
    rho = Play([(t, t), (t1, t1)], [("a1", "a1")])
    # E' = x1 exactly at step d0 = 1 is allowed
    got = enables_balancing(g, rho, "L", 1)
    assert got is not None and g.ts.is_var(got[2])


def test_label_matched_reachable():
    g = parse_grammar(GCHAIN)
    t = parse_term(g.ts, "B(Z)", g.arities)
    got = label_matched_reachable(g, t, ["a"])
    assert got == [(("b1",), parse_term(g.ts, "Z", g.arities))]
    assert label_matched_reachable(g, t, ["c"]) == []


def test_abstract_death():
    g = g1()
    e = g.lhs_term("A")
    assert _abstract_death(g, e, ("r1",)) == (1, 1)
    assert _abstract_death(g, e, ("r2",)) is None
    assert _abstract_death(g, g.ts.var(2), ()) == (0, 2)
    # the word stops applying after the sink: still reports the death
    assert _abstract_death(g, e, ("r1", "r1")) == (1, 1)


# -- p-top forms -------------------------------------------------------------

def test_p_top_form_round_trip_and_numbering():
    g = parse_grammar(
        "nonterminals: A/3, B/0, C/2, D/2\n"
        "actions: a, b\n"
        "rule r1: A(x1,x2,x3) -b-> x2\n"
        "rule r2: A(x1,x2,x3) -a-> C(x2, D(x2, x1))\n")
    ts = g.ts
    w = parse_term(ts, "A(D(x5,C(x2,B)),x5,B)", g.arities)
    for p in (1, 2, 3, 5):
        top, sigma = p_top_form(ts, w, p)
        assert apply_subst(ts, top, sigma) == w
        vs = varin(ts, [top])
        assert vs == set(range(1, len(vs) + 1))  # numbered 1..n
    top1, _ = p_top_form(ts, w, 1)
    assert top1 == parse_term(ts, "A(x1,x2,x3)", g.arities)


def test_p_top_form_shares_repeated_cut_subterms():
    g = g1()
    ts = g.ts
    w = parse_term(ts, "A(A(Z))", g.arities)
    w2 = ts.app("A", (w,))
    top, sigma = p_top_form(ts, w2, 2)
    # both occurrences of the depth-2 subterm collapse onto one variable
    assert varin(ts, [top]) == {1}
    assert apply_subst(ts, top, sigma) == w2


def test_p_top_form_cyclic():
    g = g1()
    ts = g.ts
    mu = omega_iterate(ts, ts.app("A", (ts.var(1),)), 1)  # A(A(A(...)))
    top, sigma = p_top_form(ts, mu, 2)
    assert apply_subst(ts, top, sigma) == mu


# -- balancing steps ---------------------------------------------------------

def test_balance_step_chain_grammar():
    g = parse_grammar(GCHAIN)
    ts = g.ts
    o = EqOracle(g, 8)
    t = parse_term(ts, "A(Z)", g.arities)
    u = parse_term(ts, "B(Z)", g.arities)
    assert o.level(t, u) == 2
    sink = compute_sink_table(g)
    c = compute_constants(g, sink)
    assert c.d0 == 2
    play = build_optimal_play(o, t, u)
    rho = play.subplay(0, 2)
    info = balance_step(o, rho, "L", sink, 2)
    z = parse_term(ts, "Z", g.arities)
    assert info.pivot == u
    assert info.vbar == {1: ("b1",)}
    assert info.sigma_pp.lookup(1) == z
    assert info.bal_pair == rho.finish  # Q(Z) already had the Z argument
    assert o.level(*info.bal_pair) == 0


def test_balance_step_not_enabled():
    g = g1()
    o = EqOracle(g, 12)
    sink = compute_sink_table(g)
    play = build_optimal_play(o, tower(g, 2), tower(g, 4))
    with pytest.raises(PlaysError):
        balance_step(o, play.subplay(0, 2), "L", sink, 2)


def test_balance_step_balresult_size():
    g = parse_grammar(GCHAIN)
    o = EqOracle(g, 8)
    sink = compute_sink_table(g)
    c = compute_constants(g, sink)
    t = parse_term(g.ts, "A(Z)", g.arities)
    u = parse_term(g.ts, "B(Z)", g.arities)
    info = balance_step(o, build_optimal_play(o, t, u).subplay(0, 2),
                        "L", sink, c.d0)
    g_top, sigma, e_top, f_top = pivot_top_presentation(g, info, c.d0)
    assert apply_subst(g.ts, e_top, sigma) == info.bal_pair[0]
    assert apply_subst(g.ts, f_top, sigma) == info.bal_pair[1]
    bound = pressize(g.ts, [g_top]) + (c.m + 2) * c.d0 * c.stepinc
    assert pressize(g.ts, [e_top, f_top]) <= bound


# -- the transformation ------------------------------------------------------

def test_transform_no_balancing_towers():
    g = g1()
    t, u = tower(g, 2), tower(g, 5)
    o, c, bp, pp, seg, rep = pipeline(g, t, u)
    assert bp.ell == 0
    assert bp.length() == 2 == o.level(t, u)
    assert pp.terms == [] and pp.segments == []
    assert seg.crucial == []
    assert seg.csink_len == {0: 2}
    assert rep.ok(), rep.failures()


def test_transform_short_play():
    g = g1()
    ts = g.ts
    # eqlevel 1 < d0 = 2: no window fits
    t = tower(g, 1)
    u = ts.app("A", (ts.var(1),))
    o, c, bp, pp, seg, rep = pipeline(g, t, u)
    assert bp.ell == 0 and bp.length() == 1
    assert rep.ok(), rep.failures()


def test_transform_nullary_chains():
    g = parse_grammar(GNULL)
    t = parse_term(g.ts, "P0", g.arities)
    u = parse_term(g.ts, "Q0", g.arities)
    o, c, bp, pp, seg, rep = pipeline(g, t, u)
    assert c.d0 == 1
    assert o.level(t, u) == 2
    assert bp.ell == 2
    assert all(info.side == "L" for info in bp.balances)
    q1 = parse_term(g.ts, "Q1", g.arities)
    dead = parse_term(g.ts, "DEAD", g.arities)
    assert pp.terms == [u, u, q1, dead]
    assert [s[0] for s in pp.segments] == [(), ("q0",), ("q1",)]
    assert seg.close == [1, 2]
    assert rep.ok(), rep.failures()


def test_transform_chain_grammar():
    g = parse_grammar(GCHAIN)
    t = parse_term(g.ts, "A(Z)", g.arities)
    u = parse_term(g.ts, "B(Z)", g.arities)
    o, c, bp, pp, seg, rep = pipeline(g, t, u)
    assert bp.ell == 1
    info = bp.balances[0]
    assert info.side == "L"
    assert info.vbar == {1: ("b1",)}
    assert bp.length() == 2 == o.level(t, u)
    # pivot path: whole right-hand path from the pivot B(Z)
    s = parse_term(g.ts, "S(Z)", g.arities)
    assert pp.terms == [u, u, s]
    assert pp.segments[1][0] == ("b2", "r1")
    assert rep.ok(), rep.failures()


def test_transform_rejects_cutoff():
    g = g1()
    o = EqOracle(g, 8)
    z = parse_term(g.ts, "Z", g.arities)
    with pytest.raises(PlaysError):
        transform_to_balanced(o, z, z)


# -- randomized battery ------------------------------------------------------

def battery_instances(seed, count, cutoff=7):
    rng = random.Random(seed)
    out = []
    tries = 0
    while len(out) < count and tries < 400:
        tries += 1
        g = random_grammar(rng.randint(0, 10 ** 6), max_nonterminals=3,
                           max_arity=2, max_rules=6, max_depth=1)
        t = random_ground_term(rng, g, rng.randint(0, 2))
        u = random_ground_term(rng, g, rng.randint(0, 2))
        o = EqOracle(g, cutoff)
        e = o.level(t, u)
        if 0 < e < cutoff:
            out.append((g, o, t, u))
    return out


@pytest.mark.parametrize("seed", range(6))
def test_transform_random_battery(seed):
    instances = battery_instances(seed, 15)
    assert len(instances) >= 8
    for g, o, t, u in instances:
        sink = compute_sink_table(g)
        c = compute_constants(g, sink)
        bp, pp = transform_to_balanced(o, t, u, sink, c.d0)
        seg = refine_segments(g, bp, pp, set(g.ts.reachable([t, u])))
        rep = verify_balanced(o, bp, pp, seg, c)
        assert rep.ok(), (rep.failures(), g.rules, t, u)
        seq = bp.pair_sequence()
        assert len(seq) == len(set(seq))


def test_battery_hits_balancing_overall():
    total = 0
    for seed in range(6):
        for g, o, t, u in battery_instances(seed, 15):
            bp, _ = transform_to_balanced(o, t, u)
            total += bp.ell
    assert total >= 5
