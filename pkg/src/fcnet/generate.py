"""Seeded random Free Choice nets for property tests.

``live_bounded_fcn`` grows a net from a marked cycle with refinement rules
that keep it Free Choice, live and bounded, then confirms both properties on
the reachability graph.  ``bounded_fcn`` draws arbitrary Free Choice
structures (live or not) and keeps the bounded ones.
"""

from __future__ import annotations

import random
from typing import Iterator, Optional

from .analysis import INCONCLUSIVE, is_bounded, is_live
from .errors import FCNetError, Truncated
from .net import PetriNet, classify


class _Draft:
    def __init__(self):
        self.places: list[str] = []
        self.transitions: list[str] = []
        self.arcs: set[tuple[str, str]] = set()
        self.marking: dict[str, int] = {}

    def place(self, tokens: int = 0) -> str:
        name = f"p{len(self.places)}"
        self.places.append(name)
        if tokens:
            self.marking[name] = tokens
        return name

    def transition(self) -> str:
        name = f"t{len(self.transitions)}"
        self.transitions.append(name)
        return name

    def pre(self, x: str) -> list[str]:
        return sorted(a for a, b in self.arcs if b == x)

    def post(self, x: str) -> list[str]:
        return sorted(b for a, b in self.arcs if a == x)

    def build(self) -> PetriNet:
        return PetriNet(self.places, self.transitions, sorted(self.arcs), self.marking)


def _split_transition(d: _Draft, rng: random.Random) -> None:
    # t -> new place -> new transition, the new transition inherits t's outputs
    t = rng.choice(d.transitions)
    p, u = d.place(), d.transition()
    for q in d.post(t):
        d.arcs.discard((t, q))
        d.arcs.add((u, q))
    d.arcs |= {(t, p), (p, u)}


def _split_place(d: _Draft, rng: random.Random) -> None:
    # p -> new transition -> new place, the new place inherits p's outputs
    p = rng.choice(d.places)
    t = d.transition()
    q = d.place(d.marking.pop(p, 0))
    for u in d.post(p):
        d.arcs.discard((p, u))
        d.arcs.add((q, u))
    d.arcs |= {(p, t), (t, q)}


def _parallel_transition(d: _Draft, rng: random.Random) -> bool:
    # a second way out of a place: copy a transition that has a single input
    cands = [t for t in d.transitions if len(d.pre(t)) == 1]
    if not cands:
        return False
    t = rng.choice(cands)
    u = d.transition()
    d.arcs |= {(d.pre(t)[0], u)} | {(u, q) for q in d.post(t)}
    return True


def _parallel_place(d: _Draft, rng: random.Random) -> bool:
    # a concurrent branch: copy a place whose only output is one transition
    cands = [p for p in d.places if len(d.post(p)) == 1
             and all(len(d.post(q)) == 1 for q in d.pre(d.post(p)[0]))]
    if not cands:
        return False
    p = rng.choice(cands)
    q = d.place(d.marking.get(p, 0))
    d.arcs |= {(t, q) for t in d.pre(p)} | {(q, u) for u in d.post(p)}
    return True


def _grow(rng: random.Random, max_nodes: int) -> _Draft:
    d = _Draft()
    p, t = d.place(1), d.transition()
    d.arcs |= {(p, t), (t, p)}
    steps = rng.randint(1, 2 * max_nodes)
    for _ in range(steps):
        if len(d.places) >= max_nodes or len(d.transitions) >= max_nodes:
            break
        r = rng.random()
        if r < 0.3:
            _split_transition(d, rng)
        elif r < 0.55:
            _split_place(d, rng)
        elif r < 0.8:
            _parallel_transition(d, rng)
        else:
            _parallel_place(d, rng)
    for _ in range(rng.randint(0, 2)):
        p = rng.choice(d.places)
        d.marking[p] = d.marking.get(p, 0) + 1
    return d


def live_bounded_fcn(
    rng: random.Random,
    max_nodes: int = 8,
    max_bound: int = 3,
    node_cap: int = 20000,
    tries: int = 1000,
) -> PetriNet:
    """A random live and bounded Free Choice net with at most ``max_nodes`` places and transitions."""
    for _ in range(tries):
        d = _grow(rng, max_nodes)
        if len(d.places) > max_nodes or len(d.transitions) > max_nodes:
            continue
        try:
            net = d.build()
        except FCNetError:
            continue
        if not classify(net).is_free_choice:
            continue
        try:
            b = is_bounded(net, node_cap=node_cap)
        except Truncated:
            continue
        if not b.bounded or b.bound > max_bound:
            continue
        live = is_live(net, node_cap=node_cap)
        if live is INCONCLUSIVE or not live:
            continue
        return net
    raise RuntimeError("no live bounded net found; loosen the limits")


def live_bounded_fcns(seed: int, count: int, **kw) -> Iterator[PetriNet]:
    rng = random.Random(seed)
    for _ in range(count):
        yield live_bounded_fcn(rng, **kw)


def _random_fc_structure(rng: random.Random, nplaces: int, ntrans: int) -> Optional[PetriNet]:
    places = [f"p{i}" for i in range(nplaces)]
    transitions = [f"t{i}" for i in range(ntrans)]
    arcs: set[tuple[str, str]] = set()
    free_places = places[:]
    rng.shuffle(free_places)
    pending = transitions[:]
    rng.shuffle(pending)
    # clusters: either one place feeding several transitions, or several places feeding one
    while pending and free_places:
        if rng.random() < 0.5:
            k = min(len(pending), rng.randint(1, 3))
            p = free_places.pop()
            for t in pending[:k]:
                arcs.add((p, t))
            del pending[:k]
        else:
            t = pending.pop()
            k = min(len(free_places), rng.randint(1, 2))
            for _ in range(k):
                arcs.add((free_places.pop(), t))
    for t in transitions:
        for p in rng.sample(places, rng.randint(1, 2)):
            arcs.add((t, p))
    marking = {p: rng.randint(0, 1) for p in places if rng.random() < 0.5}
    try:
        return PetriNet(places, transitions, sorted(arcs), marking)
    except FCNetError:
        return None


def bounded_fcn(rng: random.Random, max_nodes: int = 6, node_cap: int = 20000, tries: int = 1000) -> PetriNet:
    """A random bounded Free Choice net, live or not.

    Half of the draws perturb the marking of a live bounded net (removing
    tokens often kills liveness); the rest are arbitrary Free Choice shapes.
    """
    for _ in range(tries):
        if rng.random() < 0.5:
            base = live_bounded_fcn(rng, max_nodes=max_nodes, node_cap=node_cap)
            m = list(base.initial)
            i = rng.randrange(len(m))
            m[i] = max(0, m[i] + rng.choice((-1, -1, 1)))
            net = base.with_marking(tuple(m))
        else:
            net = _random_fc_structure(rng, rng.randint(2, max_nodes), rng.randint(2, max_nodes))
            if net is None or not classify(net).is_free_choice:
                continue
        try:
            if is_bounded(net, node_cap=node_cap).bounded:
                return net
        except Truncated:
            continue
    raise RuntimeError("no bounded net found")
