"""Hash-consed regular first-order terms.

A regular term (possibly infinite tree with finitely many distinct
subterms) is represented by an integer handle (TermId) into a TermStore.
The store keeps exactly one node per distinct subterm, so handle
equality is term equality and pressize is a reachable-node count.

Interning goes through a single canonicalization routine that quotients
the input graph by bisimulation (partition refinement) and then matches
the quotient against the store bottom-up: acyclic nodes by plain
hash-consing, cyclic strongly connected components by a canonical
serialization of their subgraph.
"""

from __future__ import annotations


TermId = int

# node encodings inside a TermStore
VAR = "var"
APP = "app"


class TermError(Exception):
    pass


class TermStore:
    """Append-only interning table for regular terms.

    Nodes are tuples: (VAR, index) or (APP, nonterminal, child_ids).
    Children of stored nodes are store ids; cycles appear as ids that
    are not smaller than the referring node's id.
    """

    def __init__(self):
        self.nodes: list[tuple] = []
        self._hashcons: dict[tuple, TermId] = {}
        # canonical serialization of a cyclic class -> representative id
        self._cyclic_index: dict[tuple, TermId] = {}

    # -- basic constructors -------------------------------------------------

    def var(self, index: int) -> TermId:
        if index < 1:
            raise TermError("variable indices are positive: x%d" % index)
        return self._intern((VAR, index))

    def app(self, nonterminal: str, children: tuple[TermId, ...]) -> TermId:
        """Intern an application node whose children are already canonical.

        Safe only when no new cycle is being created; cyclic inputs must
        go through intern_raw.
        """
        for c in children:
            self._check(c)
        return self._intern((APP, nonterminal, tuple(children)))

    def _check(self, t: TermId):
        if not (0 <= t < len(self.nodes)):
            raise TermError("unknown term id %r" % (t,))

    def _intern(self, node: tuple) -> TermId:
        got = self._hashcons.get(node)
        if got is not None:
            return got
        tid = len(self.nodes)
        self.nodes.append(node)
        self._hashcons[node] = tid
        return tid

    def node(self, t: TermId) -> tuple:
        self._check(t)
        return self.nodes[t]

    def is_var(self, t: TermId) -> bool:
        return self.nodes[t][0] == VAR

    def var_index(self, t: TermId) -> int:
        node = self.nodes[t]
        if node[0] != VAR:
            raise TermError("not a variable term")
        return node[1]

    def root(self, t: TermId):
        """Root nonterminal name, or None for a variable."""
        node = self.nodes[t]
        return None if node[0] == VAR else node[1]

    def children(self, t: TermId) -> tuple[TermId, ...]:
        node = self.nodes[t]
        return () if node[0] == VAR else node[2]

    # -- canonicalization of raw graphs -------------------------------------

    def intern_raw(self, raw: dict, roots: list) -> list[TermId]:
        """Canonicalize a raw graph and return ids for the given roots.

        raw maps node names to (VAR, index) or (APP, nonterminal,
        [refs]) where each ref is a node name or ("id", TermId).
        Cycles among raw nodes are allowed.
        """
        for name, node in raw.items():
            if node[0] == VAR:
                continue
            for ref in node[2]:
                if isinstance(ref, tuple) and ref[0] == "id":
                    self._check(ref[1])
                elif ref not in raw:
                    raise TermError("dangling reference %r in node %r" % (ref, name))

        blocks = self._refine(raw)
        # quotient graph: one node per block
        rep = {}  # name -> block id
        for b, members in enumerate(blocks):
            for name in members:
                rep[name] = b
        qnodes = {}
        for b, members in enumerate(blocks):
            node = raw[members[0]]
            if node[0] == VAR:
                qnodes[b] = (VAR, node[1])
            else:
                refs = []
                for ref in node[2]:
                    if isinstance(ref, tuple) and ref[0] == "id":
                        refs.append(ref)
                    else:
                        refs.append(("blk", rep[ref]))
                qnodes[b] = (APP, node[1], refs)

        assign = self._assign_ids(qnodes)
        out = []
        for r in roots:
            if isinstance(r, tuple) and r[0] == "id":
                out.append(r[1])
            else:
                out.append(assign[rep[r]])
        return out

    def _refine(self, raw: dict) -> list[list]:
        """Partition refinement over raw nodes; store ids are atoms."""
        names = sorted(raw.keys(), key=repr)

        def initial(name):
            node = raw[name]
            if node[0] == VAR:
                return (VAR, node[1])
            return (APP, node[1], len(node[2]))

        block_of = {}
        keys = {}
        for name in names:
            keys.setdefault(initial(name), []).append(name)
        for b, key in enumerate(sorted(keys, key=repr)):
            for name in keys[key]:
                block_of[name] = b

        while True:
            sig = {}
            for name in names:
                node = raw[name]
                if node[0] == VAR:
                    sig[name] = (VAR, node[1])
                else:
                    parts = []
                    for ref in node[2]:
                        if isinstance(ref, tuple) and ref[0] == "id":
                            parts.append(("ext", ref[1]))
                        else:
                            parts.append(("blk", block_of[ref]))
                    sig[name] = (APP, node[1], tuple(parts))
            groups = {}
            for name in names:
                groups.setdefault((block_of[name], sig[name]), []).append(name)
            if len(groups) == len(set(block_of.values())):
                break
            for b, key in enumerate(sorted(groups, key=repr)):
                for name in groups[key]:
                    block_of[name] = b

        blocks: dict[int, list] = {}
        for name in names:
            blocks.setdefault(block_of[name], []).append(name)
        return [blocks[b] for b in sorted(blocks)]

    def _assign_ids(self, qnodes: dict) -> dict:
        """Map quotient-graph nodes to canonical store ids, bottom-up."""
        # Tarjan condensation, processed in reverse topological order.
        order = self._sccs(qnodes)
        assign: dict = {}
        for scc in order:
            if len(scc) == 1 and not self._self_reaches(qnodes, scc[0], assign):
                b = scc[0]
                node = qnodes[b]
                if node[0] == VAR:
                    assign[b] = self.var(node[1])
                else:
                    kids = tuple(self._resolve(ref, assign) for ref in node[2])
                    assign[b] = self._intern((APP, node[1], kids))
            else:
                self._assign_cyclic(qnodes, scc, assign)
        return assign

    def _resolve(self, ref, assign) -> TermId:
        if ref[0] == "id":
            return ref[1]
        return assign[ref[1]]

    def _self_reaches(self, qnodes, b, assign) -> bool:
        node = qnodes[b]
        if node[0] == VAR:
            return False
        return any(ref[0] == "blk" and ref[1] == b for ref in node[2])

    def _sccs(self, qnodes) -> list[list]:
        """SCCs of the quotient graph in reverse topological order."""
        index = {}
        low = {}
        on_stack = set()
        stack = []
        out = []
        counter = [0]

        def succs(b):
            node = qnodes[b]
            if node[0] == VAR:
                return []
            return [ref[1] for ref in node[2] if ref[0] == "blk"]

        def strongconnect(b):
            # iterative Tarjan
            work = [(b, 0)]
            while work:
                v, pi = work.pop()
                if pi == 0:
                    index[v] = low[v] = counter[0]
                    counter[0] += 1
                    stack.append(v)
                    on_stack.add(v)
                recurse = False
                ss = succs(v)
                for i in range(pi, len(ss)):
                    w = ss[i]
                    if w not in index:
                        work.append((v, i + 1))
                        work.append((w, 0))
                        recurse = True
                        break
                    elif w in on_stack:
                        low[v] = min(low[v], index[w])
                if recurse:
                    continue
                for w in ss:
                    if w in low and w in on_stack and w != v:
                        low[v] = min(low[v], low[w])
                if low[v] == index[v]:
                    scc = []
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        scc.append(w)
                        if w == v:
                            break
                    out.append(sorted(scc))

        for b in sorted(qnodes):
            if b not in index:
                strongconnect(b)
        return out

    def _assign_cyclic(self, qnodes, scc, assign):
        members = set(scc)
        keys = {b: self._serialize(qnodes, b, members, assign) for b in scc}
        hits = {b: self._cyclic_index.get(keys[b]) for b in scc}
        found = [b for b in scc if hits[b] is not None]
        if found:
            # the store holds every subterm of its members, so one hit
            # means the whole class is present
            for b in scc:
                if hits[b] is None:
                    raise TermError("inconsistent cyclic index")
                assign[b] = hits[b]
            return
        fresh = {}
        for b in scc:
            tid = len(self.nodes)
            self.nodes.append(None)  # patched below
            fresh[b] = tid
        for b in scc:
            node = qnodes[b]
            kids = []
            for ref in node[2]:
                if ref[0] == "id":
                    kids.append(ref[1])
                elif ref[1] in members:
                    kids.append(fresh[ref[1]])
                else:
                    kids.append(assign[ref[1]])
            stored = (APP, node[1], tuple(kids))
            self.nodes[fresh[b]] = stored
            self._hashcons[stored] = fresh[b]
            self._cyclic_index[keys[b]] = fresh[b]
        assign.update(fresh)

    def _serialize(self, qnodes, b, members, assign) -> tuple:
        """Canonical DFS serialization of the SCC subgraph from b."""
        numbering = {}
        out = []
        stack = [b]
        # explicit preorder DFS, children left to right
        order = []
        while stack:
            v = stack.pop()
            if v in numbering:
                continue
            numbering[v] = len(numbering)
            order.append(v)
            node = qnodes[v]
            kids = [ref[1] for ref in node[2]
                    if ref[0] == "blk" and ref[1] in members]
            for w in reversed(kids):
                if w not in numbering:
                    stack.append(w)
        # second pass now that every reachable member is numbered
        for v in order:
            node = qnodes[v]
            parts = []
            for ref in node[2]:
                if ref[0] == "blk" and ref[1] in members:
                    parts.append(("loc", numbering[ref[1]]))
                else:
                    parts.append(("ext", self._resolve(ref, assign)))
            out.append((node[1], tuple(parts)))
        return tuple(out)

    # -- raw-graph extraction (for substitution and rendering) ---------------

    def reachable(self, roots) -> set[TermId]:
        seen = set()
        stack = list(roots)
        while stack:
            t = stack.pop()
            if t in seen:
                continue
            seen.add(t)
            stack.extend(self.children(t))
        return seen


def intern_graph(ts: TermStore, text: str) -> dict[str, TermId]:
    """Parse the term-graph text format and intern all named roots.

    Lines: `node <ident> = <Nonterminal>(<arg>,...)`, `node <ident> = x<k>`,
    `root <name> = <ident>`; `#` comments; cycles allowed.
    Returns a map root name -> TermId.
    """
    raw: dict = {}
    roots: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            kw, rest = line.split(None, 1)
            name, rhs = (p.strip() for p in rest.split("=", 1))
        except ValueError:
            raise TermError("line %d: cannot parse %r" % (lineno, line))
        if kw == "node":
            if name in raw:
                raise TermError("line %d: duplicate node %r" % (lineno, name))
            node, extra = _parse_node(rhs, lineno)
            raw[name] = node
            raw.update(extra)
        elif kw == "root":
            roots[name] = rhs
        else:
            raise TermError("line %d: expected node/root, got %r" % (lineno, kw))
    for name, target in roots.items():
        if target not in raw:
            raise TermError("root %r refers to undefined node %r" % (name, target))
    order = list(roots)
    ids = ts.intern_raw(raw, [roots[name] for name in order])
    return dict(zip(order, ids))


def _parse_node(rhs: str, lineno: int):
    """Returns (node, extra) where extra holds synthesized var nodes."""
    rhs = rhs.strip()
    if _is_var(rhs):
        return (VAR, int(rhs[1:])), {}
    if "(" in rhs:
        head, rest = rhs.split("(", 1)
        if not rest.endswith(")"):
            raise TermError("line %d: unbalanced parens in %r" % (lineno, rhs))
        args = [a.strip() for a in rest[:-1].split(",")] if rest[:-1].strip() else []
        refs = []
        extra = {}
        for a in args:
            if _is_var(a):
                vn = "\x00v%s" % a[1:]
                extra[vn] = (VAR, int(a[1:]))
                refs.append(vn)
            else:
                refs.append(a)
        return (APP, head.strip(), refs), extra
    return (APP, rhs, []), {}


def _is_var(s: str) -> bool:
    return len(s) > 1 and s[0] == "x" and s[1:].isdigit()


def parse_term(ts: TermStore, text: str, arities: dict[str, int] | None = None) -> TermId:
    """Parse the inline finite-term syntax, e.g. A(D(x5,C(x2,B)),x5,B)."""
    pos = [0]
    s = text.strip()

    def fail(msg):
        raise TermError("%s at position %d in %r" % (msg, pos[0], s))

    def skip_ws():
        while pos[0] < len(s) and s[pos[0]].isspace():
            pos[0] += 1

    def parse() -> TermId:
        skip_ws()
        start = pos[0]
        while pos[0] < len(s) and (s[pos[0]].isalnum() or s[pos[0]] in "_'"):
            pos[0] += 1
        name = s[start:pos[0]]
        if not name:
            fail("expected a term")
        if _is_var(name):
            return ts.var(int(name[1:]))
        kids = []
        if pos[0] < len(s) and s[pos[0]] == "(":
            pos[0] += 1
            while True:
                kids.append(parse())
                skip_ws()
                if pos[0] >= len(s):
                    fail("unbalanced parens")
                if s[pos[0]] == ",":
                    pos[0] += 1
                    continue
                if s[pos[0]] == ")":
                    pos[0] += 1
                    break
                fail("expected ',' or ')'")
        if arities is not None:
            if name not in arities:
                fail("unknown nonterminal %r" % name)
            if arities[name] != len(kids):
                fail("arity mismatch for %r: expected %d, got %d"
                     % (name, arities[name], len(kids)))
        return ts.app(name, tuple(kids))

    t = parse()
    if pos[0] != len(s):
        fail("trailing input")
    return t


def render_term(ts: TermStore, t: TermId) -> str:
    """Inline syntax for finite terms; graph format for cyclic ones."""
    if is_finite(ts, t):
        return _render_finite(ts, t)
    lines = []
    for tid in sorted(ts.reachable([t])):
        node = ts.node(tid)
        if node[0] == VAR:
            lines.append("node n%d = x%d" % (tid, node[1]))
        elif node[2]:
            lines.append("node n%d = %s(%s)"
                         % (tid, node[1], ",".join("n%d" % c for c in node[2])))
        else:
            lines.append("node n%d = %s" % (tid, node[1]))
    lines.append("root t = n%d" % t)
    return "\n".join(lines)


def _render_finite(ts: TermStore, t: TermId) -> str:
    node = ts.node(t)
    if node[0] == VAR:
        return "x%d" % node[1]
    if not node[2]:
        return node[1]
    return "%s(%s)" % (node[1], ",".join(_render_finite(ts, c) for c in node[2]))


def is_finite(ts: TermStore, t: TermId) -> bool:
    """True iff the presentation reachable from t is acyclic."""
    state: dict[TermId, int] = {}  # 1 = on path, 2 = done

    def walk(u) -> bool:
        stack = [(u, 0)]
        while stack:
            v, i = stack.pop()
            if i == 0:
                if state.get(v) == 1:
                    return False
                if state.get(v) == 2:
                    continue
                state[v] = 1
            kids = ts.children(v)
            if i < len(kids):
                stack.append((v, i + 1))
                child = kids[i]
                if state.get(child) == 1:
                    return False
                if state.get(child) != 2:
                    stack.append((child, 0))
            else:
                state[v] = 2
        return True

    return walk(t)


def pressize(ts: TermStore, roots) -> int:
    """Node count of the least joint presentation of the given roots."""
    roots = list(roots)
    if not roots:
        raise TermError("pressize needs at least one root")
    return len(ts.reachable(roots))


def propsize(ts: TermStore, roots) -> int:
    """Nonterminal-node count of the least presentation."""
    return sum(1 for t in ts.reachable(list(roots)) if not ts.is_var(t))


def height(ts: TermStore, t: TermId) -> int:
    """Maximal depth of a subterm occurrence; finite terms only."""
    if not is_finite(ts, t):
        raise TermError("height is undefined for infinite terms")
    memo: dict[TermId, int] = {}

    def h(u) -> int:
        if u in memo:
            return memo[u]
        kids = ts.children(u)
        memo[u] = 0 if not kids else 1 + max(h(c) for c in kids)
        return memo[u]

    import sys
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10 * len(ts.nodes) + 100))
    try:
        return h(t)
    finally:
        sys.setrecursionlimit(old)


def varin(ts: TermStore, roots) -> set[int]:
    """Set of variable indices occurring in any of the roots."""
    return {ts.var_index(t) for t in ts.reachable(list(roots)) if ts.is_var(t)}


class Substitution:
    """Finite-support map from variable index to TermId.

    Identity bindings are dropped on construction, so the stored key
    set is exactly the support.
    """

    def __init__(self, ts: TermStore, mapping: dict[int, TermId] | None = None):
        self.ts = ts
        self.map: dict[int, TermId] = {}
        for i, t in (mapping or {}).items():
            ts._check(t)
            if not (ts.is_var(t) and ts.var_index(t) == i):
                self.map[i] = t

    def support(self) -> set[int]:
        return set(self.map)

    def lookup(self, i: int) -> TermId:
        return self.map.get(i, self.ts.var(i))

    def without(self, i: int) -> "Substitution":
        m = dict(self.map)
        m.pop(i, None)
        return Substitution(self.ts, m)

    def __eq__(self, other):
        return isinstance(other, Substitution) and self.map == other.map

    def __repr__(self):
        inner = ", ".join("x%d/%s" % (i, self.map[i]) for i in sorted(self.map))
        return "[%s]" % inner


def apply_subst(ts: TermStore, t: TermId, sigma: Substitution) -> TermId:
    """Eσ: redirect each arc leading to a supported variable."""
    if not sigma.map:
        return t
    if ts.is_var(t):
        return sigma.lookup(ts.var_index(t))
    raw = {}
    for tid in ts.reachable([t]):
        node = ts.node(tid)
        if node[0] == VAR:
            if node[1] not in sigma.map:
                raw[tid] = node
            # supported vars are replaced at the arcs below
        else:
            refs = []
            for c in node[2]:
                cn = ts.node(c)
                if cn[0] == VAR and cn[1] in sigma.map:
                    refs.append(("id", sigma.map[cn[1]]))
                else:
                    refs.append(c)
            raw[tid] = (APP, node[1], refs)
    [out] = ts.intern_raw(raw, [t])
    return out


def compose(ts: TermStore, s1: Substitution, s2: Substitution) -> Substitution:
    """σ1σ2 with x(σ1σ2) = (xσ1)σ2."""
    m = {}
    for i in s1.support() | s2.support():
        m[i] = apply_subst(ts, s1.lookup(i), s2)
    return Substitution(ts, m)


def omega_iterate(ts: TermStore, h: TermId, i: int) -> TermId:
    """Limit of H[x_i/H][x_i/H]...: redirect arcs to x_i toward the root."""
    node = ts.node(h)
    if node[0] == VAR:
        # H = x_i gives x_i; H = x_j (j != i) has no x_i occurrence
        return h
    if i not in varin(ts, [h]):
        return h
    raw = {}
    for tid in ts.reachable([h]):
        n = ts.node(tid)
        if n[0] == VAR:
            if n[1] != i:
                raw[tid] = n
        else:
            refs = []
            for c in n[2]:
                cn = ts.node(c)
                # arcs to x_i turn into arcs back to the (raw) root
                refs.append(h if cn[0] == VAR and cn[1] == i else c)
            raw[tid] = (APP, n[1], refs)
    [out] = ts.intern_raw(raw, [h])
    return out
