"""Routed token game.

Every token entering a choice place is assigned, at arrival, the output
transition it will feed.  Assignments come from a per-place routing
function ``u_p(n)`` (periodic sequence or i.i.d. Bernoulli draws).  A
transition is routed-enabled when each input place holds a token assigned to
it.  Tokens of a place are kept in arrival order and a firing consumes the
oldest token assigned to the firing transition.
"""

from __future__ import annotations

import random
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

from .errors import (
    HypothesisViolated,
    InvalidRouting,
    NotRoutedEnabled,
    StepCapExceeded,
    Truncated,
    TooLarge,
)
from .net import Marking, PetriNet, ParikhVector, classify
from .streams import UniformStream

DEFAULT_STEP_CAP = 10**6
PROB_TOL = 1e-12


@dataclass(frozen=True)
class Periodic:
    sequence: tuple[str, ...]

    def __init__(self, sequence: Sequence[str]):
        object.__setattr__(self, "sequence", tuple(sequence))


@dataclass(frozen=True)
class Bernoulli:
    probs: tuple[tuple[str, float], ...]

    def __init__(self, probs: Mapping[str, float]):
        object.__setattr__(self, "probs", tuple(sorted((t, float(q)) for t, q in probs.items())))

    def prob(self, t: str) -> float:
        return dict(self.probs).get(t, 0.0)


Rule = Union[Periodic, Bernoulli]


@dataclass(frozen=True)
class RoutingSpec:
    """Routing rules keyed by place.  Places with at most one output need no rule."""

    rules: tuple[tuple[str, Rule], ...] = ()

    def __init__(self, rules: Mapping[str, Rule] | None = None):
        object.__setattr__(self, "rules", tuple(sorted((rules or {}).items())))

    def __getitem__(self, place: str) -> Rule:
        return dict(self.rules)[place]

    def get(self, place: str) -> Optional[Rule]:
        return dict(self.rules).get(place)

    @property
    def is_periodic(self) -> bool:
        return all(isinstance(r, Periodic) for _, r in self.rules)

    @property
    def is_bernoulli(self) -> bool:
        return all(isinstance(r, Bernoulli) for _, r in self.rules)

    def to_json(self) -> dict:
        out = {}
        for p, r in self.rules:
            if isinstance(r, Periodic):
                out[p] = {"type": "periodic", "sequence": list(r.sequence)}
            else:
                out[p] = {"type": "bernoulli", "probs": dict(r.probs)}
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "RoutingSpec":
        if not isinstance(data, Mapping):
            raise InvalidRouting("routing section must be an object")
        rules: dict[str, Rule] = {}
        for p, r in data.items():
            if not isinstance(r, Mapping) or "type" not in r:
                raise InvalidRouting(f"routing of {p!r} needs a 'type'")
            kind = r["type"]
            if kind == "periodic" and set(r) == {"type", "sequence"} and isinstance(r["sequence"], list):
                rules[p] = Periodic(r["sequence"])
            elif kind == "bernoulli" and set(r) == {"type", "probs"} and isinstance(r["probs"], Mapping):
                try:
                    rules[p] = Bernoulli(r["probs"])
                except (TypeError, ValueError):
                    raise InvalidRouting(f"routing of {p!r}: probabilities must be numbers") from None
            else:
                raise InvalidRouting(f"routing of {p!r}: unsupported rule {dict(r)!r}")
        return cls(rules)


def check_routing(net: PetriNet, routing: RoutingSpec) -> None:
    """Raise :class:`InvalidRouting` unless ``routing`` fits ``net``."""
    for p, rule in routing.rules:
        if not net.is_place(p):
            raise InvalidRouting(f"routing names unknown place {p!r}")
        outs = {net.transitions[t] for t in net.post_p[net.pidx(p)]}
        if isinstance(rule, Periodic):
            if not rule.sequence:
                raise InvalidRouting(f"periodic routing of {p!r} is empty")
            named = set(rule.sequence)
        else:
            named = {t for t, _ in rule.probs}
            qs = [q for _, q in rule.probs]
            if any(q < 0 for q in qs) or abs(sum(qs) - 1.0) > PROB_TOL:
                raise InvalidRouting(f"probabilities of {p!r} must be >= 0 and sum to 1")
        stray = named - outs
        if stray:
            raise InvalidRouting(f"routing of {p!r} names non-output transitions {sorted(stray)}")
    for pi, p in enumerate(net.places):
        if len(net.post_p[pi]) > 1 and routing.get(p) is None:
            raise InvalidRouting(f"choice place {p!r} has no routing rule")


def is_equitable(routing: RoutingSpec, net: PetriNet) -> bool:
    """Every output transition of every choice place gets infinitely many tokens
    (periodic: occurs in the period; Bernoulli: positive probability)."""
    for pi, p in enumerate(net.places):
        outs = [net.transitions[t] for t in net.post_p[pi]]
        if len(outs) <= 1:
            continue
        rule = routing.get(p)
        if rule is None:
            return False
        if isinstance(rule, Periodic):
            if not set(outs) <= set(rule.sequence):
                return False
        elif any(rule.prob(t) <= 0 for t in outs):
            return False
    return True


def expand_routing(net: PetriNet, routing: RoutingSpec) -> RoutingSpec:
    """Carry a routing over to the Free Choice expansion: the choice ``p -> q`` becomes ``p -> t_pq``."""
    from .transforms import expansion_names

    rules: dict[str, Rule] = {}
    for p, rule in routing.rules:
        if isinstance(rule, Periodic):
            rules[p] = Periodic([expansion_names(p, q)[1] for q in rule.sequence])
        else:
            rules[p] = Bernoulli({expansion_names(p, q)[1]: v for q, v in rule.probs})
    return RoutingSpec(rules)


class Router:
    """The routing function ``u_p(n)`` of a net, with ``n`` counted from 1.

    Returns a transition index, or ``-1`` for places without outputs.
    Bernoulli decisions are read from per-place random streams, so they
    depend on ``(seed, place, n)`` only.
    """

    def __init__(self, net: PetriNet, routing: RoutingSpec | None = None, seed: int = 0, stream_names: Mapping[str, str] | None = None):
        routing = routing or RoutingSpec()
        check_routing(net, routing)
        self.net = net
        self.routing = routing
        self.seed = seed
        self._kind: list[tuple] = []
        for pi, p in enumerate(net.places):
            outs = net.post_p[pi]
            rule = routing.get(p)
            if rule is None or len(outs) <= 1:
                self._kind.append(("trivial", outs[0] if outs else -1))
            elif isinstance(rule, Periodic):
                self._kind.append(("periodic", tuple(net.tidx(t) for t in rule.sequence)))
            else:
                ts = [net.tidx(t) for t, _ in rule.probs]
                cum, acc = [], 0.0
                for _, q in rule.probs:
                    acc += q
                    cum.append(acc)
                name = (stream_names or {}).get(p, p)
                self._kind.append(("bernoulli", ts, cum, UniformStream(seed, "route", name)))

    def __call__(self, p: int, n: int) -> int:
        kind = self._kind[p]
        if kind[0] == "trivial":
            return kind[1]
        if kind[0] == "periodic":
            seq = kind[1]
            return seq[(n - 1) % len(seq)]
        _, ts, cum, stream = kind
        i = bisect_right(cum, stream[n] * cum[-1])
        return ts[min(i, len(ts) - 1)]

    def period(self, p: int) -> Optional[int]:
        kind = self._kind[p]
        if kind[0] == "trivial":
            return 1
        if kind[0] == "periodic":
            return len(kind[1])
        return None


@dataclass(frozen=True, eq=False)
class RoutedState:
    """Marking plus, per place, the destinations of its tokens (arrival order)
    and how many routing decisions have been drawn there."""

    router: Router = field(repr=False)
    pending: tuple[tuple[int, ...], ...]
    drawn: tuple[int, ...]

    @property
    def net(self) -> PetriNet:
        return self.router.net

    @property
    def marking(self) -> Marking:
        return tuple(len(x) for x in self.pending)

    def assignments(self) -> dict[str, list[str]]:
        net = self.net
        return {
            net.places[p]: [net.transitions[t] if t >= 0 else "" for t in toks]
            for p, toks in enumerate(self.pending)
        }

    def key(self) -> tuple:
        """Hashable state for periodic routings: pending lists plus routing phase."""
        phases = []
        for p, n in enumerate(self.drawn):
            per = self.router.period(p)
            if per is None:
                raise InvalidRouting("routed state keys need periodic routing")
            phases.append(n % per)
        return (self.pending, tuple(phases))

    def _enabled(self, t: int) -> bool:
        pre = self.router.net.pre_t[t]
        return all(t in self.pending[p] for p in pre)

    def enabled_set(self) -> list[int]:
        return [t for t in range(len(self.router.net.transitions)) if self._enabled(t)]

    def _fire(self, t: int) -> "RoutedState":
        net = self.router.net
        pending = list(self.pending)
        drawn = list(self.drawn)
        for p in net.pre_t[t]:
            toks = list(pending[p])
            toks.remove(t)
            pending[p] = tuple(toks)
        for p in net.post_t[t]:
            drawn[p] += 1
            pending[p] = pending[p] + (self.router(p, drawn[p]),)
        return RoutedState(self.router, tuple(pending), tuple(drawn))


def init_routed(
    net: PetriNet,
    routing: RoutingSpec | None = None,
    seed: int = 0,
    marking=None,
    stream_names: Mapping[str, str] | None = None,
) -> RoutedState:
    """Initial routed state: the ``M_p`` initial tokens of ``p`` get ``u_p(1..M_p)``."""
    router = Router(net, routing, seed, stream_names)
    m = net.marking(marking)
    pending = tuple(tuple(router(p, n) for n in range(1, m[p] + 1)) for p in range(len(net.places)))
    return RoutedState(router, pending, tuple(m))


def routed_enabled(state: RoutedState, t: str) -> bool:
    return state._enabled(state.net.tidx(t))


def routed_fire(state: RoutedState, t: str) -> RoutedState:
    ti = state.net.tidx(t)
    if not state._enabled(ti):
        raise NotRoutedEnabled(t)
    return state._fire(ti)


# -- runs -------------------------------------------------------------------------

@dataclass(frozen=True)
class RoutedRun:
    word: tuple[str, ...]
    parikh: ParikhVector
    final: RoutedState

    @property
    def marking(self) -> Marking:
        return self.final.marking


Picker = Callable[[list[int]], int]


def _lex(choices: list[int]) -> int:
    return choices[0]


def run_until_quiescent(
    state: RoutedState,
    avoid: Optional[int] = None,
    step_cap: int = DEFAULT_STEP_CAP,
    pick: Picker = _lex,
    on_step: Callable[[list[int], RoutedState], None] | None = None,
) -> tuple[list[int], RoutedState]:
    """Fire routed-enabled transitions other than ``avoid`` until none is left.

    Checks at every step that a routed-enabled transition stays enabled
    until it fires.
    """
    word: list[int] = []
    enabled = state.enabled_set()
    while True:
        choices = [t for t in enabled if t != avoid]
        if not choices:
            return word, state
        if len(word) >= step_cap:
            raise StepCapExceeded(step_cap)
        t = pick(choices)
        state = state._fire(t)
        word.append(t)
        after = state.enabled_set()
        if not set(enabled) - {t} <= set(after):
            net = state.net
            lost = sorted(net.transitions[x] for x in set(enabled) - {t} - set(after))
            raise RuntimeError(f"routed enabling not sticky: firing {net.transitions[t]} disabled {lost}")
        enabled = after
        if on_step is not None:
            on_step(word, state)


def _parikh(n: int, word: Sequence[int]) -> ParikhVector:
    v = [0] * n
    for t in word:
        v[t] += 1
    return tuple(v)


def expansion_live_bounded(net: PetriNet, node_cap: int | None = None) -> None:
    """Raise :class:`HypothesisViolated` unless the Free Choice expansion is live and bounded.

    For a Free Choice net this is checked on the net itself.
    """
    from .analysis import INCONCLUSIVE, commoner_live, is_bounded, is_live
    from .transforms import free_choice_expansion

    target = net if classify(net).is_free_choice else free_choice_expansion(net)
    bound = is_bounded(target)
    if not bound.bounded:
        raise HypothesisViolated("bounded", "Free Choice expansion is unbounded")
    try:
        live = commoner_live(target).live
    except TooLarge:
        live = is_live(target, node_cap)
        if live is INCONCLUSIVE:
            raise HypothesisViolated("live", "liveness undecided within the node cap") from None
    if not live:
        raise HypothesisViolated("live", "Free Choice expansion is not live")


def routed_blocking(
    net: PetriNet,
    routing: RoutingSpec,
    b: str,
    step_cap: int = DEFAULT_STEP_CAP,
    seed: int = 0,
    check: bool = True,
    state: RoutedState | None = None,
    pick: Picker = _lex,
) -> RoutedRun:
    """Fire routed-enabled transitions other than ``b`` (smallest id first) until only ``b`` is enabled."""
    bi = net.tidx(b)
    if check:
        check_routing(net, routing)
        if not is_equitable(routing, net):
            raise HypothesisViolated("equitable", "routing starves some output transition")
        expansion_live_bounded(net)
    if state is None:
        state = init_routed(net, routing, seed)
    try:
        word, final = run_until_quiescent(state, bi, step_cap, pick)
    except StepCapExceeded:
        raise
    if not final._enabled(bi):
        raise HypothesisViolated("deadlock", f"run stopped with {b!r} not routed-enabled")
    return RoutedRun(tuple(net.transitions[t] for t in word), _parikh(len(net.transitions), word), final)


@dataclass(frozen=True)
class ParikhReport:
    unique: bool
    monotone: bool
    parikh: ParikhVector
    marking: Marking
    trials: int
    counterexample: Optional[tuple[RoutedRun, RoutedRun]] = None

    def __bool__(self) -> bool:
        return self.unique and self.monotone


def routed_parikh_unique(
    net: PetriNet,
    routing: RoutingSpec,
    b: str,
    trials: int = 100,
    seed: int = 0,
    step_cap: int = DEFAULT_STEP_CAP,
    check: bool = True,
) -> ParikhReport:
    """Run ``trials`` randomly ordered ``b``-avoiding executions to quiescence and
    compare their Parikh vectors; every prefix must stay below the final vector."""
    ref = routed_blocking(net, routing, b, step_cap, seed, check=check)
    start = init_routed(net, routing, seed)
    bi = net.tidx(b)
    n = len(net.transitions)
    monotone = True
    for trial in range(trials):
        rng = random.Random(f"{seed}:{trial}")
        counts = [0] * n

        def on_step(word, _state):
            nonlocal monotone
            counts[word[-1]] += 1
            if counts[word[-1]] > ref.parikh[word[-1]]:
                monotone = False

        word, final = run_until_quiescent(start, bi, step_cap, rng.choice, on_step)
        parikh = _parikh(n, word)
        if parikh != ref.parikh or final.marking != ref.marking:
            run = RoutedRun(tuple(net.transitions[t] for t in word), parikh, final)
            return ParikhReport(False, monotone, ref.parikh, ref.marking, trial + 1, (ref, run))
    return ParikhReport(True, monotone, ref.parikh, ref.marking, trials)


def routed_deadlock(
    net: PetriNet,
    routing: RoutingSpec | None = None,
    step_cap: int = DEFAULT_STEP_CAP,
    shuffles: int = 50,
    seed: int = 0,
    marking=None,
) -> tuple[Marking, ParikhVector]:
    """Run to a deadlock; confirm that shuffled runs reach the same marking and Parikh vector."""
    start = init_routed(net, routing, seed, marking)
    word, final = run_until_quiescent(start, None, step_cap)
    n = len(net.transitions)
    parikh = _parikh(n, word)
    for k in range(shuffles):
        rng = random.Random(f"deadlock:{seed}:{k}")
        w2, f2 = run_until_quiescent(start, None, step_cap, rng.choice)
        if _parikh(n, w2) != parikh or f2.marking != final.marking:
            raise HypothesisViolated("unique-deadlock", "shuffled runs disagree")
    return final.marking, parikh


# -- routed state space ---------------------------------------------------------

@dataclass
class RoutedGraph:
    states: list[RoutedState]
    edges: list[tuple[int, int, int]]
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.states)

    def markings(self) -> set[Marking]:
        return {s.marking for s in self.states}

    def _closure(self, starts, forward: bool) -> set[int]:
        adj: list[list[int]] = [[] for _ in self.states]
        for s, _, d in self.edges:
            if forward:
                adj[s].append(d)
            else:
                adj[d].append(s)
        seen = set(starts)
        todo = list(starts)
        while todo:
            for j in adj[todo.pop()]:
                if j not in seen:
                    seen.add(j)
                    todo.append(j)
        return seen

    def strongly_connected(self) -> bool:
        n = len(self.states)
        return len(self._closure([0], True)) == n and len(self._closure([0], False)) == n

    def is_live(self) -> bool:
        ntrans = len(self.states[0].net.transitions)
        for t in range(ntrans):
            sources = {s for s, tt, _ in self.edges if tt == t}
            if len(self._closure(sources, False)) != len(self.states):
                return False
        return True


def routed_reachability(net: PetriNet, routing: RoutingSpec, node_cap: int | None = None) -> RoutedGraph:
    """Explore routed states (marking, pending assignments, routing phase) under a periodic routing."""
    from .analysis import default_cap

    if not routing.is_periodic:
        raise InvalidRouting("routed reachability needs a fully periodic routing")
    cap = default_cap() if node_cap is None else node_cap
    start = init_routed(net, routing)
    states = [start]
    index = {start.key(): 0}
    edges = []
    i = 0
    while i < len(states):
        s = states[i]
        for t in s.enabled_set():
            s2 = s._fire(t)
            k = s2.key()
            j = index.get(k)
            if j is None:
                if len(states) >= cap:
                    raise Truncated(f"routed state space exceeds {cap} states")
                j = len(states)
                states.append(s2)
                index[k] = j
            edges.append((i, t, j))
        i += 1
    return RoutedGraph(states, edges)


def sample_equitable_routing(net: PetriNet, rng: random.Random, extra: int = 3, bernoulli: bool = False) -> RoutingSpec:
    """A random equitable routing: each choice place gets a shuffled period naming
    every output at least once plus up to ``extra`` repeats, or random positive
    probabilities when ``bernoulli`` is set."""
    rules: dict[str, Rule] = {}
    for pi, p in enumerate(net.places):
        outs = [net.transitions[t] for t in net.post_p[pi]]
        if len(outs) <= 1:
            continue
        if bernoulli:
            w = [rng.uniform(0.1, 1.0) for _ in outs]
            total = sum(w)
            probs = {t: x / total for t, x in zip(outs, w)}
            probs[outs[-1]] = 1.0 - sum(probs[t] for t in outs[:-1])
            rules[p] = Bernoulli(probs)
        else:
            seq = outs + [rng.choice(outs) for _ in range(rng.randint(0, extra))]
            rng.shuffle(seq)
            rules[p] = Periodic(seq)
    return RoutingSpec(rules)
