"""State-space and structural analysis of nets.

Reachability graphs, Karp-Miller boundedness, liveness (explicit and via
siphons/traps for Free Choice nets) and blocking markings, both by the
shortest-path allocation algorithm and by brute force.
"""

from __future__ import annotations

import math
import os
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .errors import HypothesisViolated, NotFreeChoice, TooLarge, Truncated
from .net import Marking, MarkingLike, PetriNet, ParikhVector, classify, cluster, non_conflicting
from .transforms import BLK_BETA, cluster_block_transform

DEFAULT_NODE_CAP = 10**6
SIPHON_PLACE_CAP = 20
OMEGA = math.inf


def default_cap() -> int:
    """Node cap, overridable through the ``FCNET_CAP`` environment variable."""
    env = os.environ.get("FCNET_CAP")
    return int(env) if env else DEFAULT_NODE_CAP


class _Inconclusive:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INCONCLUSIVE"

    def __bool__(self) -> bool:
        raise TypeError("an inconclusive verdict has no truth value")


INCONCLUSIVE = _Inconclusive()


# -- reachability -------------------------------------------------------------

@dataclass
class ReachabilityGraph:
    nodes: list[Marking]
    index: dict[Marking, int]
    edges: list[tuple[int, int, int]]  # (source node, transition, target node)
    root: Marking
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.nodes)

    def successors(self) -> list[list[tuple[int, int]]]:
        out: list[list[tuple[int, int]]] = [[] for _ in self.nodes]
        for s, t, d in self.edges:
            out[s].append((t, d))
        return out

    def predecessors(self) -> list[list[tuple[int, int]]]:
        out: list[list[tuple[int, int]]] = [[] for _ in self.nodes]
        for s, t, d in self.edges:
            out[d].append((t, s))
        return out

    def to_dot(self, net: PetriNet) -> str:
        def label(m: Marking) -> str:
            d = net.marking_dict(m, nonzero=True)
            return ",".join(f"{p}:{k}" for p, k in d.items()) or "0"

        lines = ["digraph reachability {"]
        for i, m in enumerate(self.nodes):
            shape = ", shape=doublecircle" if m == self.root else ""
            lines.append(f'  n{i} [label="{label(m)}"{shape}];')
        for s, t, d in self.edges:
            lines.append(f'  n{s} -> n{d} [label="{net.transitions[t]}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def reachability(net: PetriNet, marking: MarkingLike | None = None, node_cap: int | None = None) -> ReachabilityGraph:
    """Breadth-first closure under firing, stopping (``truncated``) past ``node_cap`` markings."""
    cap = default_cap() if node_cap is None else node_cap
    root = net.marking(marking)
    nodes = [root]
    index = {root: 0}
    edges = []
    truncated = False
    ntrans = len(net.transitions)
    pre_t = net.pre_t
    queue = deque([0])
    while queue and not truncated:
        i = queue.popleft()
        m = nodes[i]
        for t in range(ntrans):
            if not all(m[p] for p in pre_t[t]):
                continue
            m2 = net._fire(m, t)
            j = index.get(m2)
            if j is None:
                if len(nodes) >= cap:
                    truncated = True
                    break
                j = len(nodes)
                nodes.append(m2)
                index[m2] = j
                queue.append(j)
            edges.append((i, t, j))
    return ReachabilityGraph(nodes, index, edges, root, truncated)


# -- boundedness ----------------------------------------------------------------

@dataclass(frozen=True)
class Bounded:
    bound: int
    bounded: bool = field(default=True, init=False)


@dataclass(frozen=True)
class Unbounded:
    """``start --loop--> end`` with ``end > start``; ``prefix`` reaches ``start``."""

    start: Marking
    end: Marking
    prefix: tuple[str, ...]
    loop: tuple[str, ...]
    places: tuple[str, ...]
    bounded: bool = field(default=False, init=False)


def is_bounded(net: PetriNet, marking: MarkingLike | None = None, node_cap: int | None = None) -> Bounded | Unbounded:
    """Karp-Miller coverability construction."""
    cap = default_cap() if node_cap is None else node_cap
    root = net.marking(marking)
    # tree nodes: (marking, parent index, transition index)
    tree: list[tuple[tuple, int, int]] = [(root, -1, -1)]
    seen = {root}
    queue = deque([0])
    witness: Optional[Unbounded] = None
    ntrans = len(net.transitions)

    def word(i: int) -> list[int]:
        out = []
        while tree[i][1] >= 0:
            out.append(tree[i][2])
            i = tree[i][1]
        return out[::-1]

    while queue:
        i = queue.popleft()
        m = tree[i][0]
        for t in range(ntrans):
            if not all(m[p] > 0 for p in net.pre_t[t]):
                continue
            new = list(m)
            for p, d in net.delta[t]:
                new[p] += d
            raw = tuple(new)
            # accelerate against every ancestor (including i) strictly covered
            a = i
            while a >= 0:
                anc = tree[a][0]
                if all(x <= y for x, y in zip(anc, new)) and tuple(anc) != tuple(new):
                    if witness is None and all(x != OMEGA for x in anc) and all(x != OMEGA for x in raw):
                        pw = word(a)
                        loop = word(i)[len(pw):] + [t]
                        grew = tuple(net.places[p] for p in range(len(raw)) if raw[p] > anc[p])
                        witness = Unbounded(
                            anc, raw,
                            tuple(net.transitions[x] for x in pw),
                            tuple(net.transitions[x] for x in loop),
                            grew,
                        )
                    for p in range(len(new)):
                        if anc[p] < new[p]:
                            new[p] = OMEGA
                a = tree[a][1]
            key = tuple(new)
            if key in seen:
                continue
            if len(tree) >= cap:
                raise Truncated(f"coverability tree exceeds {cap} nodes")
            seen.add(key)
            tree.append((key, i, t))
            queue.append(len(tree) - 1)

    if witness is not None:
        return witness
    bound = max((max(m) for m, _, _ in tree), default=0)
    return Bounded(int(bound))


# -- liveness -----------------------------------------------------------------

def _live_on_graph(net: PetriNet, graph: ReachabilityGraph) -> bool:
    preds = graph.predecessors()
    n = len(graph.nodes)
    for t in range(len(net.transitions)):
        good = [False] * n
        todo = [i for i, m in enumerate(graph.nodes) if net._enabled(m, t)]
        for i in todo:
            good[i] = True
        while todo:
            i = todo.pop()
            for _, j in preds[i]:
                if not good[j]:
                    good[j] = True
                    todo.append(j)
        if not all(good):
            return False
    return True


def is_live(net: PetriNet, node_cap: int | None = None, marking: MarkingLike | None = None):
    """``True``/``False`` from the full reachability graph, or ``INCONCLUSIVE`` if truncated."""
    graph = reachability(net, marking, node_cap)
    if graph.truncated:
        return INCONCLUSIVE
    return _live_on_graph(net, graph)


def is_deadlock_free(net: PetriNet, node_cap: int | None = None) -> bool:
    graph = reachability(net, None, node_cap)
    if graph.truncated:
        raise Truncated("reachability graph truncated")
    return all(net._enabled_set(m) for m in graph.nodes)


# -- siphons and traps --------------------------------------------------------

@dataclass(frozen=True)
class SiphonTrapReport:
    violating_siphon: Optional[frozenset[str]]
    checked_siphons: int

    @property
    def live(self) -> bool:
        return self.violating_siphon is None


def _is_siphon(net: PetriNet, s: frozenset[int]) -> bool:
    feeding = {t for p in s for t in net.pre_p[p]}
    draining = {t for p in s for t in net.post_p[p]}
    return feeding <= draining


def _is_trap(net: PetriNet, s: frozenset[int]) -> bool:
    draining = {t for p in s for t in net.post_p[p]}
    feeding = {t for p in s for t in net.pre_p[p]}
    return draining <= feeding


def minimal_siphons(net: PetriNet) -> list[frozenset[int]]:
    """All minimal non-empty siphons, as sets of place indices.

    Grows a candidate from each place: while some transition feeds the
    candidate without consuming from it, branch on which of its input places
    to add.  Every minimal siphon is reachable this way because it always
    contains one of the branch options.
    """
    found: set[frozenset[int]] = set()
    visited: set[frozenset[int]] = set()
    for start in range(len(net.places)):
        stack = [frozenset([start])]
        while stack:
            s = stack.pop()
            if s in visited:
                continue
            visited.add(s)
            if any(f <= s for f in found):
                continue
            draining = {t for p in s for t in net.post_p[p]}
            bad = next((t for p in sorted(s) for t in net.pre_p[p] if t not in draining), None)
            if bad is None:
                found.add(s)
                continue
            for q in net.pre_t[bad]:
                stack.append(s | {q})
    minimal = [s for s in found if not any(o < s for o in found)]
    return sorted(minimal, key=lambda s: (len(s), sorted(s)))


def maximal_trap(net: PetriNet, s: frozenset[int]) -> frozenset[int]:
    """Largest trap contained in ``s`` (possibly empty)."""
    cur = set(s)
    changed = True
    while changed:
        changed = False
        feeding = {t for p in cur for t in net.pre_p[p]}
        for p in sorted(cur):
            if any(t not in feeding for t in net.post_p[p]):
                cur.discard(p)
                changed = True
                break
    return frozenset(cur)


def commoner_live(net: PetriNet, marking: MarkingLike | None = None) -> SiphonTrapReport:
    """Liveness of a Free Choice net: every siphon must contain an initially marked trap."""
    if not classify(net).is_free_choice:
        raise NotFreeChoice("siphon/trap liveness needs a Free Choice net")
    if len(net.places) > SIPHON_PLACE_CAP:
        raise TooLarge(f"{len(net.places)} places exceeds the siphon cap of {SIPHON_PLACE_CAP}")
    m = net.marking(marking)
    siphons = minimal_siphons(net)
    for count, s in enumerate(siphons, 1):
        trap = maximal_trap(net, s)
        if not any(m[p] for p in trap):
            return SiphonTrapReport(frozenset(net.places[p] for p in s), count)
    return SiphonTrapReport(None, len(siphons))


# -- blocking markings ----------------------------------------------------------

@dataclass(frozen=True)
class BlockingResult:
    blocking_marking: Marking
    witness_sequence: tuple[str, ...]
    parikh: ParikhVector
    enabled: frozenset[str]
    cluster_variant: bool = False


def check_live_bounded_fc(net: PetriNet) -> int:
    """Raise :class:`HypothesisViolated` unless the net is a live, bounded FCN; return the bound."""
    if not classify(net).is_free_choice:
        raise HypothesisViolated("free-choice", "net is not Free Choice")
    bound = is_bounded(net)
    if not bound.bounded:
        raise HypothesisViolated("bounded", f"places {', '.join(bound.places)} grow without bound")
    report = commoner_live(net)
    if not report.live:
        raise HypothesisViolated("live", f"siphon {sorted(report.violating_siphon)} has no marked trap")
    return bound.bound


def shortest_allocation(net: PetriNet, b: int, block: frozenset[str]) -> dict[int, int]:
    """For every place outside ``block``, an output transition on a shortest path to ``b``.

    Distances come from a reverse breadth-first search; ties go to the
    lexicographically smallest transition.
    """
    tdist = {b: 0}
    pdist: dict[int, int] = {}
    queue = deque([("t", b)])
    while queue:
        kind, x = queue.popleft()
        if kind == "t":
            for p in net.pre_t[x]:
                if p not in pdist:
                    pdist[p] = tdist[x] + 1
                    queue.append(("p", p))
        else:
            for t in net.pre_p[x]:
                if t not in tdist:
                    tdist[t] = pdist[x] + 1
                    queue.append(("t", t))
    alloc = {}
    for p, name in enumerate(net.places):
        if name in block:
            continue
        if p not in pdist:
            raise HypothesisViolated("strongly-connected", f"no path from {name!r} to {net.transitions[b]!r}")
        alloc[p] = min(t for t in net.post_p[p] if tdist.get(t) == pdist[p] - 1)
    return alloc


def _run_allocation(net: PetriNet, b: int, marking: Marking, step_cap: int) -> tuple[Marking, list[int]]:
    block = cluster(net, net.transitions[b])
    alloc = shortest_allocation(net, b, block)
    allowed = sorted(set(alloc.values()))
    m = marking
    word: list[int] = []
    while True:
        t = next((t for t in allowed if net._enabled(m, t)), None)
        if t is None:
            return m, word
        if len(word) >= step_cap:
            raise HypothesisViolated("termination", f"allocation run exceeded {step_cap} firings")
        m = net._fire(m, t)
        word.append(t)


def witness_bound(bound: int, ntransitions: int) -> int:
    return bound * ntransitions * (ntransitions + 1) // 2


def blocking_marking(net: PetriNet, b: str, check: bool = True, bound: int | None = None) -> BlockingResult:
    """Blocking marking of ``b`` (or of its cluster, when ``b`` is conflicting).

    With ``check`` the live/bounded/Free Choice hypotheses are verified first
    and :class:`HypothesisViolated` is raised instead of returning a wrong
    answer.  The result is always re-checked: exactly ``b`` (resp. exactly the
    transitions of ``[b]``) must be enabled.
    """
    bi = net.tidx(b)
    if check:
        bound = check_live_bounded_fc(net)
    elif bound is None:
        res = is_bounded(net)
        bound = res.bound if res.bounded else 0
    step_cap = max(witness_bound(bound, len(net.transitions)), 1) * 4 + 16

    if non_conflicting(net, b):
        final, word = _run_allocation(net, bi, net.initial, step_cap)
        target = frozenset([b])
        variant = False
    else:
        blk = cluster_block_transform(net, b)
        sub = blk.net
        m2, word2 = _run_allocation(sub, sub.tidx(BLK_BETA), sub.initial, step_cap)
        final = blk.phi(m2)
        word = [net.tidx(sub.transitions[t]) for t in word2]
        target = frozenset(x for x in cluster(net, b) if net.is_transition(x))
        variant = True

    got = frozenset(net.transitions[t] for t in net._enabled_set(final))
    if got != target:
        raise HypothesisViolated("result", f"enabled {sorted(got)} instead of {sorted(target)}")
    parikh = [0] * len(net.transitions)
    for t in word:
        parikh[t] += 1
    return BlockingResult(final, tuple(net.transitions[t] for t in word), tuple(parikh), got, variant)


def blocking_oracle(
    net: PetriNet, b, node_cap: int | None = None, marking: MarkingLike | None = None, partial: bool = False
) -> tuple[set[Marking], set[Marking]]:
    """Brute-force ``(R_b, R_b')``: reachable markings enabling only ``b``, and those
    among them reachable without firing ``b``.

    ``b`` may also be a collection of transitions (e.g. a cluster); markings
    must then enable exactly that set, and paths must avoid all of it.
    With ``partial`` a truncated graph is searched anyway and the sets are
    lower bounds (useful on unbounded nets).
    """
    names = [b] if isinstance(b, str) else sorted(b)
    targets = sorted(net.tidx(t) for t in names)
    avoid = set(targets)
    graph = reachability(net, marking, node_cap)
    if graph.truncated and not partial:
        raise Truncated("reachability graph truncated")
    blocked = {i for i, m in enumerate(graph.nodes) if net._enabled_set(m) == targets}
    succ = graph.successors()
    seen = {0}
    todo = [0]
    while todo:
        i = todo.pop()
        for t, j in succ[i]:
            if t not in avoid and j not in seen:
                seen.add(j)
                todo.append(j)
    rb = {graph.nodes[i] for i in blocked}
    rb2 = {graph.nodes[i] for i in blocked & seen}
    return rb, rb2


def is_home_state(graph: ReachabilityGraph, target: Marking) -> bool:
    """True when ``target`` is reachable from every node of ``graph``."""
    if target not in graph.index:
        return False
    preds = graph.predecessors()
    ok = {graph.index[target]}
    todo = list(ok)
    while todo:
        for _, j in preds[todo.pop()]:
            if j not in ok:
                ok.add(j)
                todo.append(j)
    return len(ok) == len(graph.nodes)


def reaches_avoiding(net: PetriNet, graph: ReachabilityGraph, target: Marking, avoid: str) -> list[Marking]:
    """Nodes of ``graph`` that cannot reach ``target`` without firing ``avoid``."""
    ai = net.tidx(avoid)
    if target not in graph.index:
        return list(graph.nodes)
    preds = graph.predecessors()
    ok = {graph.index[target]}
    todo = [graph.index[target]]
    while todo:
        i = todo.pop()
        for t, j in preds[i]:
            if t != ai and j not in ok:
                ok.add(j)
                todo.append(j)
    return [m for i, m in enumerate(graph.nodes) if i not in ok]
