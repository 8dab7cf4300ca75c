"""Command-line driver: reproducible workflows over grammar files.

Exit codes: 0 success / not distinguished, 1 distinguished or check
failure, 2 usage or parse error, 3 indeterminate (cutoff reached).
"""

import argparse
import json
import random
import sys

from .terms import TermError, parse_term, pressize, render_term
from .grammar import (
    GrammarConstants, GrammarError, compute_constants, compute_sink_table,
    parse_grammar,
)
from .lts import run_word, step_action, step_rule
from .equiv import EqOracle, EquivError
from .plays import (
    PlaysError, build_optimal_play, refine_segments, transform_to_balanced,
    verify_balanced,
)
from .bases import (
    BasesError, BasesIndeterminate, NsgParams, bound_of_candidate,
    build_full_base_capped, check_nsg_sequence, present_stair_as_nsg,
    reduce_nsg_step, sound_candidate_search,
)

SCHEMA = 1

EXIT_OK = 0
EXIT_DISTINGUISHED = 1
EXIT_USAGE = 2
EXIT_INDETERMINATE = 3


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _load_grammar(args):
    try:
        with open(args.grammar) as fh:
            text = fh.read()
    except OSError as ex:
        raise CliError("cannot read grammar file: %s" % ex)
    try:
        return parse_grammar(text)
    except (GrammarError, TermError) as ex:
        raise CliError("grammar error: %s" % ex)


def _parse_term_arg(g, text):
    try:
        return parse_term(g.ts, text, g.arities)
    except TermError as ex:
        raise CliError("term error in %r: %s" % (text, ex))


def _word_arg(g, text):
    word = tuple(w for w in text.replace(",", " ").split() if w)
    for rid in word:
        if rid not in g.rule_by_id:
            raise CliError("unknown rule id %r" % rid)
    return word


def _emit(args, payload, lines):
    if args.json:
        payload = dict(payload)
        payload["schema"] = SCHEMA
        print(json.dumps(payload, sort_keys=True))
    else:
        for line in lines:
            print(line)


def _constants_dict(c):
    return {name: getattr(c, name) for name in GrammarConstants.FIELDS}


# -- subcommands -------------------------------------------------------------

def cmd_validate(args):
    g = _load_grammar(args)
    c = compute_constants(g)
    cd = _constants_dict(c)
    lines = ["nonterminals: %d" % len(g.arities),
             "rules: %d" % len(g.rules),
             "actions: %d" % len(g.actions)]
    lines += ["%s\t%s" % (k, cd[k]) for k in GrammarConstants.FIELDS]
    _emit(args, {"command": "validate", "nonterminals": len(g.arities),
                 "rules": len(g.rules), "actions": len(g.actions),
                 "constants": cd}, lines)
    return EXIT_OK


def cmd_constants(args):
    g = _load_grammar(args)
    cd = _constants_dict(compute_constants(g))
    _emit(args, {"command": "constants", "constants": cd},
          ["%s\t%s" % (k, cd[k]) for k in GrammarConstants.FIELDS])
    return EXIT_OK


def cmd_step(args):
    g = _load_grammar(args)
    t = _parse_term_arg(g, args.term)
    if args.rule:
        if args.rule not in g.rule_by_id:
            raise CliError("unknown rule id %r" % args.rule)
        res = step_rule(g, t, args.rule)
        if res is None:
            print("rule %s not applicable" % args.rule, file=sys.stderr)
            return EXIT_DISTINGUISHED
        results = [(args.rule, res)]
    else:
        results = step_action(g, t, args.action)
        if not results:
            print("action %s not enabled" % args.action, file=sys.stderr)
            return EXIT_DISTINGUISHED
    _emit(args, {"command": "step",
                 "results": [{"rule": rid, "term": render_term(g.ts, r)}
                             for rid, r in results]},
          ["%s\t%s" % (rid, render_term(g.ts, r)) for rid, r in results])
    return EXIT_OK


def cmd_run(args):
    g = _load_grammar(args)
    t = _parse_term_arg(g, args.term)
    word = _word_arg(g, args.word)
    p = run_word(g, t, word)
    if p is None:
        print("word does not apply", file=sys.stderr)
        return EXIT_DISTINGUISHED
    terms = p.terms()
    lines = []
    if args.trace:
        lines += ["%d\t%s\t%s" % (i, rid, render_term(g.ts, terms[i + 1]))
                  for i, rid in enumerate(word)]
    lines.append(render_term(g.ts, p.end))
    _emit(args, {"command": "run",
                 "trace": [render_term(g.ts, x) for x in terms],
                 "end": render_term(g.ts, p.end)}, lines)
    return EXIT_OK


def cmd_eqlevel(args):
    g = _load_grammar(args)
    o = EqOracle(g, args.cutoff)
    t = _parse_term_arg(g, args.left)
    u = _parse_term_arg(g, args.right)
    lv = o.eq_level(t, u)
    word = "finite" if lv.is_finite() else "at-least"
    _emit(args, {"command": "eqlevel", "kind": word, "value": lv.value},
          ["%s %d" % (word, lv.value)])
    return EXIT_DISTINGUISHED if lv.is_finite() else EXIT_OK


def cmd_decide(args):
    g = _load_grammar(args)
    o = EqOracle(g, args.cutoff)
    t = _parse_term_arg(g, args.left)
    u = _parse_term_arg(g, args.right)
    lv = o.eq_level(t, u)
    if lv.is_finite():
        _emit(args, {"command": "decide", "verdict": "distinguished",
                     "level": lv.value},
              ["distinguished level=%d" % lv.value])
        return EXIT_DISTINGUISHED
    _emit(args, {"command": "decide", "verdict": "equivalent-up-to",
                 "cutoff": args.cutoff},
          ["equivalent-up-to %d" % args.cutoff])
    return EXIT_OK


def cmd_play(args):
    g = _load_grammar(args)
    o = EqOracle(g, args.cutoff)
    t = _parse_term_arg(g, args.left)
    u = _parse_term_arg(g, args.right)
    lv = o.eq_level(t, u)
    if not lv.is_finite():
        print("eq-level at least %d: no finite optimal play" % args.cutoff,
              file=sys.stderr)
        return EXIT_INDETERMINATE
    if lv.value == 0:
        _emit(args, {"command": "play", "eqlevel": 0, "steps": []},
              ["eqlevel 0: immediately distinguished"])
        return EXIT_OK
    play = build_optimal_play(o, t, u)
    rows = []
    for i, (tt, uu) in enumerate(play.pairs):
        row = {"index": i, "left": render_term(g.ts, tt),
               "right": render_term(g.ts, uu)}
        if i < play.length():
            row["rules"] = list(play.moves[i])
        rows.append(row)
    lines = ["eqlevel %d" % lv.value]
    for row in rows:
        move = " ".join(row.get("rules", []))
        lines.append("%d\t%s\t%s\t%s"
                     % (row["index"], row["left"], row["right"], move))
    _emit(args, {"command": "play", "eqlevel": lv.value, "steps": rows}, lines)
    return EXIT_OK


def _run_balance(o, g, t, u):
    sink = compute_sink_table(g)
    c = compute_constants(g, sink)
    bp, pp = transform_to_balanced(o, t, u, sink, c.d0)
    seg = refine_segments(g, bp, pp, set(g.ts.reachable([t, u])))
    return c, bp, pp, seg


def _balance_rows(g, c, bp, seg):
    rows = [{"kind": "mu", "j": 0, "unc": 0, "dsink": bp.mu0.length()}]
    for j in range(1, bp.ell + 1):
        info = bp.balances[j - 1]
        rows.append({"kind": "rho", "j": j, "side": info.side,
                     "len": info.rho.length(),
                     "balpair_size": pressize(
                         g.ts, list(info.bal_pair))})
        unc = bp.mu_unc(j).length()
        dsink = bp.mus[j - 1].length() - unc
        rows.append({"kind": "mu", "j": j, "unc": unc, "dsink": dsink})
    return rows


def cmd_balance(args):
    g = _load_grammar(args)
    o = EqOracle(g, args.cutoff)
    t = _parse_term_arg(g, args.left)
    u = _parse_term_arg(g, args.right)
    lv = o.eq_level(t, u)
    if not lv.is_finite():
        print("eq-level at least %d: nothing to balance" % args.cutoff,
              file=sys.stderr)
        return EXIT_INDETERMINATE
    c, bp, pp, seg = _run_balance(o, g, t, u)
    rows = _balance_rows(g, c, bp, seg)
    lines = ["ell=%d length=%d eqlevel=%d" % (bp.ell, bp.length(), lv.value)]
    for r in rows:
        if r["kind"] == "rho":
            lines.append("rho\tj=%d\tside=%s\tlen=%d\tbalpair_size=%d"
                         % (r["j"], r["side"], r["len"], r["balpair_size"]))
        else:
            lines.append("mu\tj=%d\tunc=%d\tdsink=%d"
                         % (r["j"], r["unc"], r["dsink"]))
    lines.append("close_pivots=%s crucial=%s"
                 % (list(seg.close), [list(x) for x in seg.crucial]))
    _emit(args, {"command": "balance", "ell": bp.ell, "length": bp.length(),
                 "eqlevel": lv.value, "segments": rows,
                 "close_pivots": list(seg.close),
                 "crucial": [list(x) for x in seg.crucial]}, lines)
    return EXIT_OK


def cmd_verify(args):
    g = _load_grammar(args)
    o = EqOracle(g, args.cutoff)
    t = _parse_term_arg(g, args.left)
    u = _parse_term_arg(g, args.right)
    lv = o.eq_level(t, u)
    if not lv.is_finite():
        print("eq-level at least %d: nothing to verify" % args.cutoff,
              file=sys.stderr)
        return EXIT_INDETERMINATE
    c, bp, pp, seg = _run_balance(o, g, t, u)
    rep = verify_balanced(o, bp, pp, seg, c)
    lines = ["%s\t%s\t%s" % (name, "ok" if ok else "FAIL", detail)
             for name, ok, detail in rep.checks]
    _emit(args, {"command": "verify", "ok": rep.ok(),
                 "checks": [{"name": n, "ok": ok, "detail": d}
                            for n, ok, d in rep.checks]}, lines)
    return EXIT_OK if rep.ok() else EXIT_DISTINGUISHED


def cmd_base(args):
    g = _load_grammar(args)
    o = EqOracle(g, args.cutoff)
    params = NsgParams(args.n, args.s, args.g_param)
    if args.sound_c is not None:
        try:
            cand, bound, status = sound_candidate_search(
                o, params, args.sound_c, args.max_size)
        except BasesError as ex:
            raise CliError("base search failed: %s" % ex)
    else:
        cand, bound, complete = build_full_base_capped(
            o, params, args.max_size)
        status = "complete" if complete else "capped"
    layers = []
    for j in sorted(cand.layers, reverse=True):
        layers.append({"level": j, "s": cand.s_vals[j], "e": cand.e_vals[j],
                       "pairs": len(cand.layers[j])})
    lines = ["layer\tj=%d\ts=%d\te=%d\tpairs=%d"
             % (l["level"], l["s"], l["e"], l["pairs"]) for l in layers]
    lines += ["E_B=%d" % bound.value, "status=%s" % status]
    _emit(args, {"command": "base", "layers": layers, "E_B": bound.value,
                 "status": status}, lines)
    return EXIT_OK if status in ("complete", "sound") \
        else EXIT_INDETERMINATE


def cmd_pipeline(args):
    g = _load_grammar(args)
    o = EqOracle(g, args.cutoff)
    t = _parse_term_arg(g, args.left)
    u = _parse_term_arg(g, args.right)
    lv = o.eq_level(t, u)
    if not lv.is_finite():
        print("eq-level at least %d: pipeline needs a finite level"
              % args.cutoff, file=sys.stderr)
        return EXIT_INDETERMINATE
    c, bp, pp, seg = _run_balance(o, g, t, u)
    rep = verify_balanced(o, bp, pp, seg, c)
    checks = [{"name": n, "ok": ok, "detail": d} for n, ok, d in rep.checks]
    params = NsgParams(c.n, c.s, c.g)
    for idx in range(len(seg.crucial)):
        seq = present_stair_as_nsg(o, bp, pp, seg, idx, c.d0)
        ok = check_nsg_sequence(o, seq, params)
        checks.append({"name": "stair-%d-nsg-sequence" % idx, "ok": ok,
                       "detail": "z=%d" % seq.z})
        # reduce one step where the reduction precondition holds
        from .terms import apply_subst
        e1, f1 = seq.tops[0]
        k = o.level(e1, f1)
        ell = o.level(apply_subst(g.ts, e1, seq.sigma),
                      apply_subst(g.ts, f1, seq.sigma))
        if params.n > 0 and k < ell < o.cutoff and seq.z > k + 1:
            try:
                reduce_nsg_step(o, seq, params)
                checks.append({"name": "stair-%d-reduction" % idx,
                               "ok": True, "detail": ""})
            except BasesError as ex:
                checks.append({"name": "stair-%d-reduction" % idx,
                               "ok": False, "detail": str(ex)})
        else:
            checks.append({"name": "stair-%d-reduction" % idx, "ok": True,
                           "detail": "not applicable"})
    all_ok = all(cc["ok"] for cc in checks)
    lines = ["%s\t%s\t%s" % (cc["name"], "ok" if cc["ok"] else "FAIL",
                             cc["detail"]) for cc in checks]
    lines.append("result\t%s" % ("ok" if all_ok else "FAIL"))
    _emit(args, {"command": "pipeline", "ok": all_ok, "eqlevel": lv.value,
                 "ell": bp.ell, "checks": checks}, lines)
    return EXIT_OK if all_ok else EXIT_DISTINGUISHED


# -- parser ------------------------------------------------------------------

def _build_parser():
    top = argparse.ArgumentParser(
        prog="fogbisim",
        description="bisimulation eq-level tools for first-order grammars")
    sub = top.add_subparsers(dest="command", required=True)

    def add(name, fn, **kw):
        p = sub.add_parser(name, **kw)
        p.add_argument("--grammar", required=True, help="grammar file")
        p.add_argument("--cutoff", type=int, default=12)
        p.add_argument("--json", action="store_true")
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(fn=fn)
        return p

    add("validate", cmd_validate, help="parse and summarize a grammar")
    add("constants", cmd_constants, help="print derived constants")

    p = add("step", cmd_step, help="apply one rule or action to a term")
    p.add_argument("--term", required=True)
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--rule")
    grp.add_argument("--action")

    p = add("run", cmd_run, help="replay a rule word from a term")
    p.add_argument("--term", required=True)
    p.add_argument("--word", required=True, help="rule ids, space-separated")
    p.add_argument("--trace", action="store_true")

    for name, fn, hlp in (
            ("eqlevel", cmd_eqlevel, "compute the eq-level of a pair"),
            ("decide", cmd_decide, "decide equivalence up to the cutoff"),
            ("play", cmd_play, "print an optimal attacker/defender play"),
            ("balance", cmd_balance, "balanced-play transformation summary"),
            ("verify", cmd_verify, "run every balanced-play check"),
            ("pipeline", cmd_pipeline,
             "balance, refine, verify, and check stair sequences")):
        p = add(name, fn, help=hlp)
        p.add_argument("--left", required=True)
        p.add_argument("--right", required=True)

    p = add("base", cmd_base, help="build a capped candidate base")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--g", dest="g_param", type=int, required=True)
    p.add_argument("--max-size", type=int, required=True)
    p.add_argument("--sound-c", type=int, default=None,
                   help="run the soundness search with this scale constant")
    return top


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    random.seed(args.seed)
    try:
        return args.fn(args)
    except CliError as ex:
        print("error: %s" % ex, file=sys.stderr)
        return ex.code
    except BasesIndeterminate as ex:
        print("indeterminate: %s" % ex, file=sys.stderr)
        return EXIT_INDETERMINATE
    except PlaysError as ex:
        if "starvation" in str(ex):
            print("indeterminate: %s" % ex, file=sys.stderr)
            return EXIT_INDETERMINATE
        print("error: %s" % ex, file=sys.stderr)
        return EXIT_USAGE
    except (GrammarError, TermError, EquivError, BasesError) as ex:
        print("error: %s" % ex, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
