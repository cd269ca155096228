"""Place/transition nets: data model, token game and structural classes.

Markings and Parikh vectors are plain tuples of ints indexed like
``net.places`` and ``net.transitions`` respectively.  Both orders are
lexicographic in the identifiers, so every iteration in the package is
reproducible.  Use :meth:`PetriNet.marking` / :meth:`PetriNet.marking_dict`
to move between tuples and ``{place: count}`` mappings.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .errors import InvalidNet, NotEnabled, NotEnabledAt, NotReverseFirable, UnknownNode

Marking = tuple
ParikhVector = tuple
MarkingLike = Union[Marking, Mapping[str, int]]


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    subject: object
    message: str = ""

    def __str__(self) -> str:
        text = f"{self.kind}({self.subject!r})"
        return f"{text}: {self.message}" if self.message else text


def validate(
    places: Iterable[str],
    transitions: Iterable[str],
    arcs: Iterable[Sequence[str]],
    marking: Mapping[str, int] | Sequence[int] | None = None,
) -> list[Diagnostic]:
    """Return every violated structural invariant; an empty list means valid.

    A sequence ``marking`` is read in the order ``places`` is given.
    """
    places = list(places)
    transitions = list(transitions)
    arcs = [tuple(a) for a in arcs]
    diags: list[Diagnostic] = []

    if not places:
        diags.append(Diagnostic("EmptyNodeSet", "places"))
    if not transitions:
        diags.append(Diagnostic("EmptyNodeSet", "transitions"))
    for kind, ids in (("places", places), ("transitions", transitions)):
        seen = set()
        for x in ids:
            if not isinstance(x, str) or not x:
                diags.append(Diagnostic("BadIdentifier", x, f"in {kind}"))
            elif x in seen:
                diags.append(Diagnostic("DuplicateNode", x))
            seen.add(x)
    pset, tset = set(places), set(transitions)
    for x in sorted(pset & tset, key=str):
        diags.append(Diagnostic("OverlappingNode", x, "both place and transition"))

    seen_arcs = set()
    good_arcs = []
    for arc in arcs:
        if len(arc) != 2:
            diags.append(Diagnostic("MalformedArc", arc, "arcs are (source, target) pairs"))
            continue
        src, dst = arc
        dangling = [x for x in (src, dst) if x not in pset and x not in tset]
        if dangling:
            for x in dangling:
                diags.append(Diagnostic("DanglingArc", x, f"arc {src!r}->{dst!r}"))
            continue
        if not ((src in pset and dst in tset) or (src in tset and dst in pset)):
            diags.append(Diagnostic("NonBipartiteArc", arc))
            continue
        if arc in seen_arcs:
            diags.append(Diagnostic("DuplicateArc", arc))
            continue
        seen_arcs.add(arc)
        good_arcs.append(arc)

    if marking is not None:
        if not isinstance(marking, Mapping):
            marking = list(marking)
            if len(marking) != len(places):
                diags.append(Diagnostic("BadMarking", "marking", "length differs from the place count"))
                marking = {}
            else:
                marking = dict(zip(places, marking))
        for p, k in marking.items():
            if p not in pset:
                diags.append(Diagnostic("UnknownPlace", p, "in marking"))
            elif not isinstance(k, (int, np.integer)) or isinstance(k, bool) or k < 0:
                diags.append(Diagnostic("BadMarking", p, f"count {k!r}"))

    nodes = pset | tset
    if nodes and not diags:
        adj: dict[str, list[str]] = {x: [] for x in nodes}
        for src, dst in good_arcs:
            adj[src].append(dst)
            adj[dst].append(src)
        start = min(nodes)
        reached = {start}
        todo = [start]
        while todo:
            for y in adj[todo.pop()]:
                if y not in reached:
                    reached.add(y)
                    todo.append(y)
        if len(reached) != len(nodes):
            cut = sorted(nodes - reached)
            diags.append(Diagnostic("DisconnectedNet", cut[0], f"{len(cut)} node(s) unreachable"))
    return diags


class PetriNet:
    """An immutable net ``(places, transitions, arcs, initial marking)``.

    Construction validates the structure and raises :class:`InvalidNet`
    listing every problem found.
    """

    __slots__ = ("places", "transitions", "arcs", "initial", "_pidx", "_tidx",
                 "pre_t", "post_t", "pre_p", "post_p", "__dict__")

    def __init__(
        self,
        places: Iterable[str],
        transitions: Iterable[str],
        arcs: Iterable[Sequence[str]],
        initial: Mapping[str, int] | None = None,
    ):
        places = list(places)
        transitions = list(transitions)
        arcs = [tuple(a) for a in arcs]
        initial = dict(initial or {})
        diags = validate(places, transitions, arcs, initial)
        if diags:
            raise InvalidNet(diags)

        self.places = tuple(sorted(places))
        self.transitions = tuple(sorted(transitions))
        self.arcs = frozenset(arcs)
        self._pidx = {p: i for i, p in enumerate(self.places)}
        self._tidx = {t: i for i, t in enumerate(self.transitions)}
        self.initial = tuple(int(initial.get(p, 0)) for p in self.places)

        pre_t = [[] for _ in self.transitions]
        post_t = [[] for _ in self.transitions]
        pre_p = [[] for _ in self.places]
        post_p = [[] for _ in self.places]
        for src, dst in self.arcs:
            if src in self._pidx:
                p, t = self._pidx[src], self._tidx[dst]
                pre_t[t].append(p)
                post_p[p].append(t)
            else:
                t, p = self._tidx[src], self._pidx[dst]
                post_t[t].append(p)
                pre_p[p].append(t)
        # index tuples, sorted so they follow identifier order
        self.pre_t = tuple(tuple(sorted(x)) for x in pre_t)
        self.post_t = tuple(tuple(sorted(x)) for x in post_t)
        self.pre_p = tuple(tuple(sorted(x)) for x in pre_p)
        self.post_p = tuple(tuple(sorted(x)) for x in post_p)

    # -- identity -----------------------------------------------------------

    def _key(self):
        return (self.places, self.transitions, self.arcs, self.initial)

    def __eq__(self, other):
        return isinstance(other, PetriNet) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self) -> str:
        return f"PetriNet({len(self.places)} places, {len(self.transitions)} transitions, {len(self.arcs)} arcs)"

    def with_marking(self, marking: MarkingLike) -> "PetriNet":
        return PetriNet(self.places, self.transitions, self.arcs, self.marking_dict(self.marking(marking)))

    # -- index helpers ------------------------------------------------------

    def pidx(self, place: str) -> int:
        try:
            return self._pidx[place]
        except KeyError:
            raise UnknownNode(place) from None

    def tidx(self, transition: str) -> int:
        try:
            return self._tidx[transition]
        except KeyError:
            raise UnknownNode(transition) from None

    def is_place(self, node: str) -> bool:
        return node in self._pidx

    def is_transition(self, node: str) -> bool:
        return node in self._tidx

    def marking(self, m: MarkingLike | None = None) -> Marking:
        """Normalise a mapping (missing places count 0) or tuple to a marking tuple."""
        if m is None:
            return self.initial
        if isinstance(m, Mapping):
            for p in m:
                self.pidx(p)
            out = tuple(int(m.get(p, 0)) for p in self.places)
        else:
            out = tuple(int(x) for x in m)
            if len(out) != len(self.places):
                raise ValueError(f"marking has {len(out)} entries, net has {len(self.places)} places")
        if any(x < 0 for x in out):
            raise ValueError("marking counts must be nonnegative")
        return out

    def marking_dict(self, m: Marking, nonzero: bool = False) -> dict[str, int]:
        return {p: k for p, k in zip(self.places, m) if k or not nonzero}

    def parikh_dict(self, v: ParikhVector, nonzero: bool = False) -> dict[str, int]:
        return {t: k for t, k in zip(self.transitions, v) if k or not nonzero}

    @cached_property
    def self_loops(self) -> frozenset[tuple[int, int]]:
        """(place index, transition index) pairs with arcs in both directions."""
        return frozenset((p, t) for t, ps in enumerate(self.pre_t) for p in ps if p in self.post_t[t])

    @cached_property
    def delta(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per transition, the sparse incidence column as (place, +-1) pairs."""
        cols = []
        for t in range(len(self.transitions)):
            pre, post = set(self.pre_t[t]), set(self.post_t[t])
            col = [(p, -1) for p in sorted(pre - post)] + [(p, 1) for p in sorted(post - pre)]
            cols.append(tuple(sorted(col)))
        return tuple(cols)

    # -- fast index-level token game ------------------------------------------

    def _enabled(self, m: Marking, t: int) -> bool:
        return all(m[p] > 0 for p in self.pre_t[t])

    def _fire(self, m: Marking, t: int) -> Marking:
        out = list(m)
        for p, d in self.delta[t]:
            out[p] += d
        return tuple(out)

    def _enabled_set(self, m: Marking) -> list[int]:
        return [t for t in range(len(self.transitions)) if self._enabled(m, t)]

    def enabled_transitions(self, m: MarkingLike | None = None) -> list[str]:
        m = self.marking(m)
        return [self.transitions[t] for t in self._enabled_set(m)]


# -- node neighbourhoods ------------------------------------------------------

def _check_node(net: PetriNet, node: str) -> None:
    if not (net.is_place(node) or net.is_transition(node)):
        raise UnknownNode(node)


def preset(net: PetriNet, node: str) -> frozenset[str]:
    _check_node(net, node)
    if net.is_place(node):
        return frozenset(net.transitions[t] for t in net.pre_p[net.pidx(node)])
    return frozenset(net.places[p] for p in net.pre_t[net.tidx(node)])


def postset(net: PetriNet, node: str) -> frozenset[str]:
    _check_node(net, node)
    if net.is_place(node):
        return frozenset(net.transitions[t] for t in net.post_p[net.pidx(node)])
    return frozenset(net.places[p] for p in net.post_t[net.tidx(node)])


def incidence(net: PetriNet) -> np.ndarray:
    """Incidence matrix as a ``(len(places), len(transitions))`` int array.

    Self-loop entries are 0.
    """
    n = np.zeros((len(net.places), len(net.transitions)), dtype=np.int64)
    for t, col in enumerate(net.delta):
        for p, d in col:
            n[p, t] = d
    return n


# -- token game -----------------------------------------------------------------

def enabled(net: PetriNet, marking: MarkingLike, t: str) -> bool:
    return net._enabled(net.marking(marking), net.tidx(t))


def fire(net: PetriNet, marking: MarkingLike, t: str) -> Marking:
    m = net.marking(marking)
    ti = net.tidx(t)
    if not net._enabled(m, ti):
        raise NotEnabled(t)
    return net._fire(m, ti)


def reverse_fire(net: PetriNet, marking: MarkingLike, t: str) -> Marking:
    """Return the unique ``M1`` with ``M1 --t--> marking``."""
    m = net.marking(marking)
    ti = net.tidx(t)
    prev = list(m)
    for p, d in net.delta[ti]:
        prev[p] -= d
    prev = tuple(prev)
    if min(prev) < 0 or not net._enabled(prev, ti):
        raise NotReverseFirable(t)
    return prev


def fire_sequence(net: PetriNet, marking: MarkingLike, word: Sequence[str]) -> tuple[Marking, ParikhVector]:
    m = net.marking(marking)
    parikh = [0] * len(net.transitions)
    for i, t in enumerate(word):
        ti = net.tidx(t)
        if not net._enabled(m, ti):
            raise NotEnabledAt(i, t)
        m = net._fire(m, ti)
        parikh[ti] += 1
    return m, tuple(parikh)


# -- structure ------------------------------------------------------------------

@dataclass(frozen=True)
class NetClass:
    is_t_net: bool
    is_s_net: bool
    is_free_choice: bool
    is_extended_free_choice: bool

    def as_dict(self) -> dict[str, bool]:
        return {
            "t_net": self.is_t_net,
            "s_net": self.is_s_net,
            "fcn": self.is_free_choice,
            "efcn": self.is_extended_free_choice,
        }


def classify(net: PetriNet) -> NetClass:
    t_net = all(len(net.pre_p[p]) == 1 and len(net.post_p[p]) == 1 for p in range(len(net.places)))
    s_net = all(len(net.pre_t[t]) == 1 and len(net.post_t[t]) == 1 for t in range(len(net.transitions)))
    fcn = all(
        len(net.post_p[p]) == 1 or len(net.pre_t[t]) == 1
        for t in range(len(net.transitions))
        for p in net.pre_t[t]
    )
    efcn = True
    for t1 in range(len(net.transitions)):
        for t2 in range(t1 + 1, len(net.transitions)):
            a, b = set(net.pre_t[t1]), set(net.pre_t[t2])
            if a & b and a != b:
                efcn = False
    return NetClass(t_net, s_net, fcn, efcn)


def cluster(net: PetriNet, node: str) -> frozenset[str]:
    """Least node set containing ``node``, closed under place->outputs and transition->inputs."""
    _check_node(net, node)
    out = {node}
    todo = deque([node])
    while todo:
        x = todo.popleft()
        if net.is_place(x):
            nxt = (net.transitions[t] for t in net.post_p[net.pidx(x)])
        else:
            nxt = (net.places[p] for p in net.pre_t[net.tidx(x)])
        for y in nxt:
            if y not in out:
                out.add(y)
                todo.append(y)
    return frozenset(out)


def non_conflicting(net: PetriNet, t: str) -> bool:
    return all(len(net.post_p[p]) == 1 for p in net.pre_t[net.tidx(t)])


def is_strongly_connected(net: PetriNet) -> bool:
    succ: dict[str, list[str]] = {x: [] for x in net.places + net.transitions}
    pred: dict[str, list[str]] = {x: [] for x in succ}
    for src, dst in net.arcs:
        succ[src].append(dst)
        pred[dst].append(src)
    start = net.places[0]
    for adj in (succ, pred):
        seen = {start}
        todo = [start]
        while todo:
            for y in adj[todo.pop()]:
                if y not in seen:
                    seen.add(y)
                    todo.append(y)
        if len(seen) != len(succ):
            return False
    return True
