"""Bounded search for relational proofs of ``E -> sigma <= t``.

A relational tree labels nodes with automata having start state ``a`` and
accept state ``b``.  The root automaton is the single path spelling
``sigma``.  A node is a leaf when its automaton accepts some string of
``R(t)`` (or is the contradiction marker CON).  Otherwise a hypothesis
``r <= r'`` is applied where some string of ``R(r)`` runs from ``v`` to
``w``: each string of ``R(r')`` is inserted between ``v`` and ``w``, one
child per string, or a single CON child when ``R(r')`` is empty.

The search is iterative deepening over the tree depth with a deterministic
application order.  Only finite trees are claimed as proofs.  A node whose
automaton, read as a relational model, already satisfies every hypothesis
while avoiding ``t`` is a countermodel, and the path to it is reported as a
refutation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Iterable, Optional, Sequence, Union

from .decide import Fa, is_empty_language, ka_automaton, max_word_length, words_of
from .relmodels import RelInterp, evaluate, rel_leq, rel_pairs, satisfies
from .terms import (
    LEQ,
    ZERO,
    Dot,
    Equation,
    HornFormula,
    Plus,
    Signature,
    Term,
    universal_expression,
    word_term,
)

A_STATE, B_STATE = 0, 1
Word = tuple  # tuple[str, ...]


class _Con:
    def __repr__(self) -> str:
        return "CON"


CON = _Con()


@dataclass(frozen=True)
class Nfa:
    """Automaton over program names; ``None`` labels an epsilon edge.
    State 0 is the start ``a`` and state 1 the accept state ``b``."""

    states: frozenset
    edges: frozenset  # of (src, label, dst)

    @cached_property
    def out(self) -> dict:
        adj: dict = {q: [] for q in self.states}
        for src, label, dst in sorted(self.edges, key=_edge_key):
            adj[src].append((label, dst))
        return adj

    def fresh(self) -> int:
        return max(self.states) + 1

    def words(self, max_len: int, start: int = A_STATE, end: int = B_STATE) -> set[Word]:
        """Strings of ``L(A^{start,end})`` with at most ``max_len`` letters."""
        alphabet = sorted({lbl for _, lbl, _ in self.edges if lbl is not None})
        found = set()
        layer = {(): self._eps_closure({start})}
        for _ in range(max_len + 1):
            nxt = {}
            for word, qs in layer.items():
                if end in qs:
                    found.add(word)
                for p in alphabet:
                    step = {d for q in qs for lbl, d in self.out[q] if lbl == p}
                    if step:
                        nxt[word + (p,)] = self._eps_closure(step)
            layer = nxt
        return found

    def _eps_closure(self, qs: set) -> frozenset:
        seen = set(qs)
        stack = list(qs)
        while stack:
            q = stack.pop()
            for lbl, d in self.out[q]:
                if lbl is None and d not in seen:
                    seen.add(d)
                    stack.append(d)
        return frozenset(seen)

    def to_json(self) -> dict:
        return {
            "states": sorted(self.states),
            "edges": [[s, lbl, d] for s, lbl, d in sorted(self.edges, key=_edge_key)],
        }

    def to_dot(self, name: str = "A") -> str:
        lines = [f"digraph {name} {{", "  rankdir=LR;"]
        for q in sorted(self.states):
            label = {A_STATE: "a", B_STATE: "b"}.get(q, f"x{q}")
            shape = "doublecircle" if q == B_STATE else "circle"
            lines.append(f'  {q} [label="{label}", shape={shape}];')
        for s, lbl, d in sorted(self.edges, key=_edge_key):
            lines.append(f'  {s} -> {d} [label="{lbl if lbl is not None else "ε"}"];')
        lines.append("}")
        return "\n".join(lines)


def _edge_key(e):
    s, lbl, d = e
    return (s, "" if lbl is None else lbl, d)


def f0() -> Nfa:
    """States ``a`` and ``b`` and no edges."""
    return Nfa(frozenset({A_STATE, B_STATE}), frozenset())


def ins2(A: Nfa, v: int, w: int, tau: Sequence[str]) -> Nfa:
    """Insert the string ``tau`` between ``v`` and ``w``.

    A nonempty string becomes a fresh chain of edges; the empty string adds
    epsilon edges in both directions, identifying ``v`` and ``w``.
    """
    if v not in A.states or w not in A.states:
        raise ValueError(f"states {v}, {w} not both in the automaton")
    tau = tuple(tau)
    if not tau:
        return Nfa(A.states, A.edges | {(v, None, w), (w, None, v)})
    fresh = list(range(A.fresh(), A.fresh() + len(tau) - 1))
    chain = [v, *fresh, w]
    edges = {(chain[i], p, chain[i + 1]) for i, p in enumerate(tau)}
    return Nfa(A.states | set(fresh), A.edges | edges)


def root(sigma: Sequence[str]) -> Nfa:
    return ins2(f0(), A_STATE, B_STATE, sigma)


def check_reachability(A: Nfa) -> bool:
    """Every state is reachable from ``a`` and reaches ``b``."""
    fwd = _reach(A, A_STATE, forward=True)
    bwd = _reach(A, B_STATE, forward=False)
    return fwd == A.states and bwd == A.states


def _reach(A: Nfa, q0: int, forward: bool) -> frozenset:
    adj: dict = {q: [] for q in A.states}
    for s, _, d in A.edges:
        if forward:
            adj[s].append(d)
        else:
            adj[d].append(s)
    seen = {q0}
    stack = [q0]
    while stack:
        q = stack.pop()
        for d in adj[q]:
            if d not in seen:
                seen.add(d)
                stack.append(d)
    return frozenset(seen)


# -- products with term automata ----------------------------------------------


@lru_cache(maxsize=4096)
def _term_fa(t: Term) -> Fa:
    return ka_automaton(t)


def shortest_common(A: Nfa, v: int, w: int, t: Term, max_len: Optional[int] = None) -> Optional[Word]:
    """A shortest string of ``L(A^{v,w}) & R(t)``, or None (searching only
    up to ``max_len`` letters when given)."""
    fa = _term_fa(t)
    start = (v, fa.start)
    parent: dict = {start: None}

    def close(pairs: list) -> list:
        out = list(pairs)
        stack = list(pairs)
        while stack:
            q, s = stack.pop()
            moves = [((d, s), None) for lbl, d in A.out[q] if lbl is None]
            moves += [((q, d), None) for lbl, d in fa.edges[s] if lbl is None]
            for nxt, _ in moves:
                if nxt not in parent:
                    parent[nxt] = ((q, s), None)
                    out.append(nxt)
                    stack.append(nxt)
        return out

    layer = close([start])
    length = 0
    while layer:
        for pair in layer:
            if pair[0] == w and pair[1] in fa.accepts:
                return _spell(parent, pair)
        if max_len is not None and length >= max_len:
            return None
        nxt = []
        for q, s in layer:
            for lbl, d in A.out[q]:
                if lbl is None:
                    continue
                for lbl2, d2 in fa.edges[s]:
                    if lbl2 == lbl and (d, d2) not in parent:
                        parent[(d, d2)] = ((q, s), lbl)
                        nxt.append((d, d2))
        layer = close(nxt)
        length += 1
    return None


def _spell(parent: dict, pair) -> Word:
    letters = []
    while parent[pair] is not None:
        pair, lbl = parent[pair]
        if lbl is not None:
            letters.append(lbl)
    return tuple(reversed(letters))


def is_leaf(A: Union[Nfa, _Con], t: Term) -> bool:
    """CON, or ``R(t)`` meets ``L(A)``."""
    if A is CON:
        return True
    return shortest_common(A, A_STATE, B_STATE, t) is not None


# -- hypothesis applications ------------------------------------------------------


Inequality = tuple  # (r, r')


def inequalities(E: Iterable[Union[Equation, Inequality]]) -> list[Inequality]:
    """Split equations into pairs of inequalities ``(x, y)`` for ``x <= y``."""
    out = []
    for e in E:
        if isinstance(e, Equation):
            out.extend(e.as_inequalities())
        else:
            out.append(tuple(e))
    return out


@dataclass(frozen=True)
class Application:
    v: int
    w: int
    hyp: int
    rho: Word

    def to_json(self) -> dict:
        return {"v": self.v, "w": self.w, "hyp": self.hyp, "rho": list(self.rho)}


def find_applications(A: Nfa, E: Sequence[Inequality], rho_max: int) -> list[Application]:
    """Every ``(v, w, hyp)`` with a string of ``R(r)`` of at most ``rho_max``
    letters running from ``v`` to ``w``; the shortest such string is the
    witness."""
    apps = []
    for v in sorted(A.states):
        for w in sorted(A.states):
            for i, (r, _) in enumerate(E):
                rho = shortest_common(A, v, w, r, rho_max)
                if rho is not None:
                    apps.append(Application(v, w, i, rho))
    return apps


@dataclass
class Expansion:
    children: list  # of Nfa or CON
    taus: list
    truncated: bool


def expand(A: Nfa, app: Application, E: Sequence[Inequality], tau_max: int) -> Expansion:
    """Children of a node where hypothesis ``app.hyp`` is applied."""
    r_prime = E[app.hyp][1]
    if is_empty_language(r_prime):
        return Expansion([CON], [], False)
    taus = sorted(words_of(r_prime, tau_max), key=lambda x: (len(x), x))
    longest = max_word_length(r_prime)
    children = [ins2(A, app.v, app.w, tau) for tau in taus]
    for child in children:
        if not check_reachability(child):
            raise AssertionError(f"ins2 broke reachability at {app}")
    return Expansion(children, taus, longest > tau_max)


# -- automaton as a relational model --------------------------------------------


def automaton_model(A: Nfa, programs: Iterable[str] = ()) -> tuple[RelInterp, dict]:
    """States modulo epsilon-identification, each program relating the
    classes joined by its edges.  Returns the model and the class of each
    state."""
    parent = {q: q for q in A.states}

    def find(q):
        while parent[q] != q:
            parent[q] = parent[parent[q]]
            q = parent[q]
        return q

    for s, lbl, d in A.edges:
        if lbl is None:
            rs, rd = find(s), find(d)
            if rs != rd:
                parent[max(rs, rd)] = min(rs, rd)
    roots = sorted({find(q) for q in A.states})
    index = {r: i for i, r in enumerate(roots)}
    cls = {q: index[find(q)] for q in A.states}
    progs: dict = {p: [] for p in programs}
    for s, lbl, d in A.edges:
        if lbl is not None:
            progs.setdefault(lbl, []).append((cls[s], cls[d]))
    return RelInterp.from_pairs(len(roots), progs), cls


# -- proof trees -----------------------------------------------------------------


@dataclass
class ProofNode:
    automaton: Union[Nfa, _Con]
    applied: Optional[Application] = None
    children: list = field(default_factory=list)
    status: str = "open"  # leaf | con | internal | open | saturated

    def to_json(self) -> dict:
        return {
            "automaton": "CON" if self.automaton is CON else self.automaton.to_json(),
            "status": self.status,
            "applied": self.applied.to_json() if self.applied else None,
            "children": [c.to_json() for c in self.children],
        }

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass
class SearchOutcome:
    kind: str  # proved | refuted | unknown
    tree: Optional[ProofNode] = None
    path: list = field(default_factory=list)
    model: Optional[RelInterp] = None
    report: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = {"kind": self.kind, "report": self.report}
        if self.tree is not None:
            d["tree"] = self.tree.to_json()
        if self.path:
            d["path"] = [
                {"automaton": n.automaton.to_json(), "applied": n.applied.to_json() if n.applied else None}
                for n in self.path
            ]
        if self.model is not None:
            d["model"] = self.model.to_json()
        return d


class _Budget(Exception):
    pass


_PROVED, _REFUTED, _UNKNOWN = "proved", "refuted", "unknown"


class _Searcher:
    def __init__(self, E, t, programs, tau_max, rho_max, max_nodes, on_node):
        self.E = E
        self.t = t
        self.programs = programs
        self.tau_max = tau_max
        self.rho_max = rho_max
        self.max_nodes = max_nodes
        self.on_node = on_node
        self.nodes = 0
        self.truncations = 0
        self.depth_cutoffs = 0
        self.memo: dict = {}

    def open_sites(self, A: Nfa) -> tuple[bool, list[Application]]:
        """Whether the automaton model violates some hypothesis, and the
        violating sites (one per pair of state classes) that have witnesses
        of at most ``rho_max`` letters."""
        model, cls = automaton_model(A, self.programs)
        rep = {}
        for q in sorted(A.states):
            rep.setdefault(cls[q], q)
        sites = []
        violated = False
        for i, (r, r_prime) in enumerate(self.E):
            lhs, rhs = evaluate(r, model), evaluate(r_prime, model)
            if rel_leq(lhs, rhs):
                continue
            violated = True
            bad = {(x, y) for x, y in rel_pairs(lhs)} - rel_pairs(rhs)
            for x, y in sorted(bad):
                rho = shortest_common(A, rep[x], rep[y], r, self.rho_max)
                if rho is not None:
                    sites.append(Application(rep[x], rep[y], i, rho))
        sites.sort(key=lambda a: (a.v, a.w, a.hyp, len(a.rho)))
        return violated, sites

    def solve(self, A: Nfa, depth: int, path: list):
        self.nodes += 1
        if self.nodes > self.max_nodes:
            raise _Budget
        node = ProofNode(A)
        if self.on_node is not None:
            self.on_node(node)
        if is_leaf(A, self.t):
            node.status = "leaf"
            return _PROVED, node
        violated, sites = self.open_sites(A)
        if not violated:
            node.status = "saturated"
            return _REFUTED, path + [node]
        if not sites:
            # violations only via strings longer than rho_max
            self.truncations += 1
            return _UNKNOWN, node
        if depth == 0:
            self.depth_cutoffs += 1
            return _UNKNOWN, node
        key = (A.edges, depth)
        if key in self.memo:
            return self.memo[key]
        result = (_UNKNOWN, node)
        for app in sites:
            exp = expand(A, app, self.E, self.tau_max)
            if exp.truncated:
                self.truncations += 1
            kids = []
            closed = not exp.truncated
            for child in exp.children:
                if child is CON:
                    kids.append(ProofNode(CON, status="con"))
                    continue
                status, sub = self.solve(child, depth - 1, path + [ProofNode(A, app)])
                if status == _REFUTED:
                    return status, sub
                if status != _PROVED:
                    closed = False
                    break
                kids.append(sub)
            if closed:
                node.applied, node.children, node.status = app, kids, "internal"
                result = (_PROVED, node)
                break
        self.memo[key] = result
        return result


def search(
    E: Sequence[Union[Equation, Inequality]],
    sigma: Sequence[str],
    t: Term,
    depth: int = 8,
    tau_max: int = 3,
    rho_max: int = 4,
    max_nodes: int = 20_000,
    on_node: Optional[Callable[[ProofNode], None]] = None,
) -> SearchOutcome:
    """Look for a relational proof or a countermodel for ``E -> sigma <= t``
    (all terms test-free)."""
    E = inequalities(E)
    sigma = tuple(sigma)
    programs = _programs(E, sigma, t)
    s = _Searcher(E, t, programs, tau_max, rho_max, max_nodes, on_node)
    report = {"depth": depth, "tau_max": tau_max, "rho_max": rho_max}
    try:
        for d in range(depth + 1):
            s.memo.clear()
            s.depth_cutoffs = 0
            status, result = s.solve(root(sigma), d, [])
            report.update(nodes=s.nodes, depth_reached=d, truncations=s.truncations)
            if status == _PROVED:
                return SearchOutcome("proved", tree=result, report=report)
            if status == _REFUTED:
                model = path_to_model(result, E, sigma, t, programs)
                return SearchOutcome("refuted", path=result, model=model, report=report)
            if s.depth_cutoffs == 0:
                # nothing was cut off by depth: deeper iterations cannot help
                break
    except _Budget:
        report.update(nodes=s.nodes, budget_exhausted=True)
    report.setdefault("nodes", s.nodes)
    report["truncations"] = s.truncations
    return SearchOutcome("unknown", report=report)


def _programs(E, sigma, t) -> tuple[str, ...]:
    terms = [t, word_term(sigma)] + [x for pair in E for x in pair]
    return Signature.of(*terms).programs


def formula_of(E: Sequence[Inequality], sigma: Sequence[str], t: Term) -> HornFormula:
    return HornFormula(
        tuple(Equation(r, rp, LEQ) for r, rp in E), Equation(word_term(sigma), t, LEQ)
    )


class ModelCheckError(AssertionError):
    pass


def path_to_model(
    path: Sequence[ProofNode],
    E: Sequence[Union[Equation, Inequality]],
    sigma: Sequence[str],
    t: Term,
    programs: Iterable[str] = (),
) -> RelInterp:
    """Countermodel read off the last automaton of a refutation path,
    verified against ``E -> sigma <= t``."""
    E = inequalities(E)
    programs = set(programs) | set(_programs(E, tuple(sigma), t))
    model, _ = automaton_model(path[-1].automaton, sorted(programs))
    if satisfies(model, formula_of(E, sigma, t)):
        raise ModelCheckError("extracted model does not refute the formula")
    return model


def decompose_s_leq_t(E, s: Term, t: Term, len_max: int) -> tuple[list, bool]:
    """Subgoals ``(E, sigma, t)`` for each ``sigma`` in ``R(s)`` of at most
    ``len_max`` letters, plus whether longer strings were left out."""
    sigmas = sorted(words_of(s, len_max), key=lambda x: (len(x), x))
    longest = max_word_length(s)
    truncated = longest is not None and longest > len_max
    return [(E, sigma, t) for sigma in sigmas], truncated


# -- the r <= 0 audit ----------------------------------------------------------------


@dataclass
class ZeroAudit:
    outcome: SearchOutcome
    nodes_checked: int = 0
    nodes_with_sites: int = 0
    violations: list = field(default_factory=list)
    reachability_failures: int = 0

    @property
    def ok(self) -> bool:
        return not self.violations and not self.reachability_failures


def zero_hyp_never_applied(
    E: Sequence[Union[Equation, Inequality]],
    r: Term,
    sigma: Sequence[str],
    t_plus_uru: Term,
    **bounds,
) -> ZeroAudit:
    """Search ``E & r <= 0 -> sigma <= t_plus_uru`` and check that at every
    visited node where ``r <= 0`` could be applied the node is already a
    leaf."""
    hyps = inequalities(E) + [(r, ZERO)]
    progs = _programs(hyps, tuple(sigma), t_plus_uru)
    audit = ZeroAudit(None)

    def inspect(node: ProofNode) -> None:
        A = node.automaton
        audit.nodes_checked += 1
        if not check_reachability(A):
            audit.reachability_failures += 1
        model, _ = automaton_model(A, progs)
        if any(evaluate(r, model)):
            audit.nodes_with_sites += 1
            if not is_leaf(A, t_plus_uru):
                audit.violations.append(A)

    audit.outcome = search(hyps, sigma, t_plus_uru, on_node=inspect, **bounds)
    return audit


def pad_with_uru(t: Term, r: Term, programs: Iterable[str]) -> Term:
    """``t + u r u`` with ``u`` over ``programs``."""
    u = universal_expression(programs)
    return Plus(t, Dot(Dot(u, r), u))
