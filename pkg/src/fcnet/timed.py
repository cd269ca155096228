"""Event-driven simulation of stochastic routed timed nets.

Semantics are as-soon-as-possible: a routed-enabled transition starts firing
at once and freezes one token in each input place; when its firing time has
elapsed the frozen tokens disappear and one token enters each output place,
getting its routing destination at arrival.  Tokens are numbered by arrival
instant, ties broken by event order.  Events are ordered by
``(instant, transition, firing index)``, transitions compared by identifier.

Firing times ``sigma_a(n)`` and routing decisions ``u_p(n)`` are read from
per-entity random streams, so a run is a pure function of its inputs and
seed.
"""

from __future__ import annotations

import hashlib
import heapq
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import EventCapExceeded, HypothesisViolated, InvalidConfig, InvalidTiming, NotEnabled
from .net import Marking, MarkingLike, PetriNet, incidence
from .routing import Periodic, Router, RoutingSpec, is_equitable
from .streams import UniformStream


# -- timing -------------------------------------------------------------------------

@dataclass(frozen=True)
class Deterministic:
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value >= 0):
            raise InvalidTiming(f"deterministic time must be finite and >= 0, got {self.value!r}")

    @property
    def mean(self) -> float:
        return self.value

    def sample(self, u: float) -> float:
        return self.value


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and self.rate > 0):
            raise InvalidTiming(f"exponential rate must be > 0, got {self.rate!r}")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    def sample(self, u: float) -> float:
        return -math.log1p(-u) / self.rate


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and 0 <= self.lo <= self.hi):
            raise InvalidTiming(f"uniform bounds need 0 <= lo <= hi, got ({self.lo!r}, {self.hi!r})")

    @property
    def mean(self) -> float:
        return (self.lo + self.hi) / 2

    def sample(self, u: float) -> float:
        return self.lo + (self.hi - self.lo) * u


Distribution = Union[Deterministic, Exponential, Uniform]


@dataclass(frozen=True)
class TimingSpec:
    dists: tuple[tuple[str, Distribution], ...]

    def __init__(self, dists: Mapping[str, Distribution]):
        object.__setattr__(self, "dists", tuple(sorted(dists.items())))

    def __getitem__(self, t: str) -> Distribution:
        return dict(self.dists)[t]

    def get(self, t: str) -> Optional[Distribution]:
        return dict(self.dists).get(t)

    def to_json(self) -> dict:
        out = {}
        for t, d in self.dists:
            if isinstance(d, Deterministic):
                out[t] = {"dist": "det", "value": d.value}
            elif isinstance(d, Exponential):
                out[t] = {"dist": "exp", "rate": d.rate}
            else:
                out[t] = {"dist": "uniform", "lo": d.lo, "hi": d.hi}
        return out

    @classmethod
    def from_json(cls, data: Mapping) -> "TimingSpec":
        if not isinstance(data, Mapping):
            raise InvalidTiming("timing section must be an object")
        shapes = {"det": {"value"}, "exp": {"rate"}, "uniform": {"lo", "hi"}}
        dists: dict[str, Distribution] = {}
        for t, d in data.items():
            kind = d.get("dist") if isinstance(d, Mapping) else None
            if kind not in shapes or set(d) - {"dist"} != shapes[kind]:
                raise InvalidTiming(f"timing of {t!r}: unsupported entry {d!r}")
            try:
                if kind == "det":
                    dists[t] = Deterministic(float(d["value"]))
                elif kind == "exp":
                    dists[t] = Exponential(float(d["rate"]))
                else:
                    dists[t] = Uniform(float(d["lo"]), float(d["hi"]))
            except (TypeError, ValueError):
                raise InvalidTiming(f"timing of {t!r}: parameters must be numbers") from None
        return cls(dists)

    @classmethod
    def uniform_all(cls, net: PetriNet, dist: Distribution) -> "TimingSpec":
        return cls({t: dist for t in net.transitions})


def check_timing(net: PetriNet, timing: TimingSpec) -> None:
    for t, _ in timing.dists:
        if not net.is_transition(t):
            raise InvalidTiming(f"timing names unknown transition {t!r}")
    for ti, t in enumerate(net.transitions):
        if net.pre_t[ti] and timing.get(t) is None:
            raise InvalidTiming(f"transition {t!r} has no firing time")


# -- configuration and state --------------------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    """Exactly one stop rule among ``horizon``, ``max_firings``, ``max_events``, ``until_marking``."""

    seed: int = 0
    horizon: Optional[float] = None
    max_firings: Optional[tuple[str, int]] = None
    max_events: Optional[int] = None
    until_marking: Optional[Marking] = None
    frozen: Optional[str] = None
    event_cap: Optional[int] = None

    def check(self, net: PetriNet) -> None:
        rules = [self.horizon, self.max_firings, self.max_events, self.until_marking]
        if sum(r is not None for r in rules) != 1:
            raise InvalidConfig("exactly one stop rule must be set")
        if self.horizon is not None and not (self.horizon >= 0 and math.isfinite(self.horizon)):
            raise InvalidConfig("horizon must be finite and >= 0")
        if self.max_events is not None and self.max_events < 0:
            raise InvalidConfig("max_events must be >= 0")
        if self.max_firings is not None:
            t, n = self.max_firings
            if not net.is_transition(t) or n < 0:
                raise InvalidConfig(f"bad firing target {self.max_firings!r}")
        if self.frozen is not None and not net.is_transition(self.frozen):
            raise InvalidConfig(f"unknown frozen transition {self.frozen!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidConfig("seed must be a 64-bit unsigned integer")


@dataclass
class TimedState:
    clock: float
    marking: Marking  # free tokens
    frozen: tuple[int, ...]  # frozen tokens per place
    in_progress: tuple[int, ...]  # per transition
    agenda: list[tuple[float, int, int]]  # (instant, transition index, firing index)
    begun: tuple[int, ...]
    completed: tuple[int, ...]
    entered: tuple[int, ...]
    events: int = 0

    @property
    def total(self) -> Marking:
        return tuple(a + b for a, b in zip(self.marking, self.frozen))


@dataclass
class DaterLog:
    transitions: tuple[str, ...]
    instants: dict[str, list[float]] = field(default_factory=dict)

    def __post_init__(self):
        for t in self.transitions:
            self.instants.setdefault(t, [])

    def count(self, t: str, until: float = math.inf) -> int:
        xs = self.instants[t]
        lo, hi = 0, len(xs)
        while lo < hi:
            mid = (lo + hi) // 2
            if xs[mid] <= until:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def __len__(self) -> int:
        return sum(len(v) for v in self.instants.values())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("transition,n,instant\n")
        for t in self.transitions:
            for n, x in enumerate(self.instants[t], 1):
                buf.write(f"{t},{n},{x!r}\n")
        return buf.getvalue()


@dataclass
class SimResult:
    log: DaterLog
    state: TimedState
    reached: bool = False  # until_marking stop rule satisfied


def fold_seed(seed: int, *parts) -> int:
    h = hashlib.blake2b(":".join(str(x) for x in (seed,) + parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def check_conservation(net: PetriNet, initial: Marking, state: TimedState) -> bool:
    """Free plus frozen tokens equal the initial marking moved by the completed firings."""
    expect = np.asarray(initial) + incidence(net) @ np.asarray(state.completed)
    return all(x >= 0 for x in state.marking) and all(x >= 0 for x in state.frozen) and tuple(expect) == state.total


# -- simulator ----------------------------------------------------------------------

def simulate(
    net: PetriNet,
    routing: RoutingSpec | None,
    timing: TimingSpec,
    config: SimConfig,
    marking: MarkingLike | None = None,
    inputs: Mapping[str, Sequence[float]] | None = None,
    stream_names: Mapping[str, str] | None = None,
    on_event: Callable[[TimedState], None] | None = None,
) -> SimResult:
    """Run the as-soon-as-possible timed semantics.

    ``inputs`` gives completion instants for source transitions (no input
    places), which otherwise never fire.  ``stream_names`` lets a node reuse
    another node's random stream (transition timing or place routing).
    ``on_event`` sees the state after every processed event.
    """
    config.check(net)
    check_timing(net, timing)
    names = dict(stream_names or {})
    router = Router(net, routing or RoutingSpec(), config.seed, {p: names.get(p, p) for p in net.places})
    T = len(net.transitions)
    tnames = net.transitions
    pre_t, post_t = net.pre_t, net.post_t
    dists = [timing.get(t) for t in tnames]
    tstreams = [UniformStream(config.seed, "time", names.get(t, t)) for t in tnames]
    frozen_t = net.tidx(config.frozen) if config.frozen is not None else -1
    sources = [t for t in range(T) if not pre_t[t]]

    m0 = net.marking(marking)
    pending = [[router(p, n) for n in range(1, m0[p] + 1)] for p in range(len(net.places))]
    drawn = list(m0)
    frozen = [0] * len(net.places)
    in_progress = [0] * T
    begun = [0] * T
    completed = [0] * T
    entered = [0] * len(net.places)
    agenda: list[tuple[float, int, int]] = []
    log = DaterLog(tnames)
    out = log.instants

    for t, xs in (inputs or {}).items():
        ti = net.tidx(t)
        if pre_t[ti]:
            raise InvalidConfig(f"{t!r} has input places; only source transitions take input instants")
        for x in sorted(xs):
            begun[ti] += 1
            in_progress[ti] += 1
            heapq.heappush(agenda, (float(x), ti, begun[ti]))

    # transitions that may be routed-enabled after a place changes
    watchers = [sorted(set(net.post_p[p]) - set(sources)) for p in range(len(net.places))]

    def try_begin(candidates, clock):
        # beginning a firing only freezes tokens, so one pass suffices
        for t in sorted(set(candidates)):
            while all(t in pending[p] for p in pre_t[t]):
                for p in pre_t[t]:
                    pending[p].remove(t)
                    frozen[p] += 1
                begun[t] += 1
                in_progress[t] += 1
                if t != frozen_t:
                    heapq.heappush(agenda, (clock + dists[t].sample(tstreams[t][begun[t]]), t, begun[t]))

    def snapshot(clock, events):
        return TimedState(
            clock, tuple(len(x) for x in pending), tuple(frozen), tuple(in_progress),
            sorted(agenda), tuple(begun), tuple(completed), tuple(entered), events,
        )

    target = tuple(config.until_marking) if config.until_marking is not None else None

    def total():
        return tuple(len(x) + f for x, f in zip(pending, frozen))

    clock = 0.0
    events = 0
    reached = False
    try_begin([t for t in range(T) if pre_t[t]], clock)
    if target is not None and total() == target:
        reached = True
    elif not (config.max_events == 0 or (config.max_firings and config.max_firings[1] == 0)):
        while agenda:
            if config.horizon is not None and agenda[0][0] > config.horizon:
                break
            if config.event_cap is not None and events >= config.event_cap:
                raise EventCapExceeded(-1, config.event_cap)
            instant, t, _ = heapq.heappop(agenda)
            clock = instant
            events += 1
            in_progress[t] -= 1
            completed[t] += 1
            out[tnames[t]].append(instant)
            for p in pre_t[t]:
                frozen[p] -= 1
            touched = []
            for p in post_t[t]:
                drawn[p] += 1
                entered[p] += 1
                pending[p].append(router(p, drawn[p]))
                touched.extend(watchers[p])
            try_begin(touched, clock)
            if on_event is not None:
                on_event(snapshot(clock, events))
            if target is not None and total() == target:
                reached = True
                break
            if config.max_events is not None and events >= config.max_events:
                break
            if config.max_firings is not None:
                ft, fn = config.max_firings
                if tnames[t] == ft and completed[t] >= fn:
                    break
    if config.horizon is not None:
        clock = config.horizon
    return SimResult(log, snapshot(clock, events), reached)


# -- estimates ----------------------------------------------------------------------

@dataclass(frozen=True)
class ThroughputEstimate:
    horizon: float
    rates: dict[str, float]  # completions up to horizon / horizon
    gammas: dict[str, float]  # X_a(n) / n for the last completed n (nan if none)


def throughput_estimate(log: DaterLog, horizon: float) -> ThroughputEstimate:
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    rates, gammas = {}, {}
    for t in log.transitions:
        n = log.count(t, horizon)
        rates[t] = n / horizon
        gammas[t] = log.instants[t][n - 1] / n if n else math.nan
    return ThroughputEstimate(horizon, rates, gammas)


# -- open expansion ----------------------------------------------------------------

def enabling_degree(net: PetriNet, marking: MarkingLike, b: str) -> int:
    """Largest ``k`` such that ``b`` can fire ``k`` times in a row."""
    m = net.marking(marking)
    bi = net.tidx(b)
    if not net._enabled(m, bi):
        raise NotEnabled(b)
    consumed = [p for p in net.pre_t[bi] if (p, bi) not in net.self_loops]
    if not consumed:
        raise HypothesisViolated("finite-degree", f"{b!r} only has self-loop inputs")
    return min(m[p] for p in consumed)


OPEN_I = "__exp_I"
OPEN_P_I = "__exp_p_I"
OPEN_P_B = "__exp_p_b"
OPEN_B_IN = "__exp_b_i"
OPEN_B_OUT = "__exp_b_o"


@dataclass(frozen=True)
class OpenExpansion:
    """``b`` split into ``b_o`` (immediate, drains ``b``'s inputs into ``p_b``) and
    ``b_i`` (``b``'s firing time, needs ``p_b`` and an external token from ``I``)."""

    net: PetriNet
    original: PetriNet
    b: str
    degree: int

    @property
    def stream_names(self) -> dict[str, str]:
        return {OPEN_B_IN: self.b}

    def routing(self, routing: RoutingSpec | None) -> RoutingSpec:
        net, b = self.original, self.b
        bi = net.tidx(b)
        rules = {}
        for p, rule in (routing or RoutingSpec()).rules:
            loop = (net.pidx(p), bi) in net.self_loops
            rename = OPEN_B_IN if loop else OPEN_B_OUT
            if isinstance(rule, Periodic):
                rules[p] = Periodic([rename if t == b else t for t in rule.sequence])
            else:
                rules[p] = type(rule)({(rename if t == b else t): q for t, q in rule.probs})
        return RoutingSpec(rules)

    def timing(self, timing: TimingSpec) -> TimingSpec:
        dists = {t: d for t, d in timing.dists if t != self.b}
        dists[OPEN_B_IN] = timing[self.b]
        dists[OPEN_B_OUT] = Deterministic(0.0)
        return TimingSpec(dists)

    def saturated_marking(self, tokens: int) -> Marking:
        """Expanded initial marking with ``tokens`` already delivered to ``p_I``."""
        m = list(self.net.initial)
        m[self.net.pidx(OPEN_P_I)] += tokens
        return tuple(m)

    def bounded_input(self, k: int) -> PetriNet:
        """Same net, with ``I`` fed by a fresh place holding ``k`` tokens (so ``I`` fires exactly ``k`` times)."""
        src = "__exp_src"
        marking = self.net.marking_dict(self.net.initial)
        marking[src] = k
        return PetriNet(self.net.places + (src,), self.net.transitions, set(self.net.arcs) | {(src, OPEN_I)}, marking)


def open_expansion(net: PetriNet, b: str, marking: MarkingLike | None = None) -> OpenExpansion:
    """Open expansion of ``net`` at ``b`` from marking ``M_b`` (default: the initial marking)."""
    m = net.marking(marking)
    k = enabling_degree(net, m, b)
    bi = net.tidx(b)
    ins = {net.places[p] for p in net.pre_t[bi]}
    outs = {net.places[p] for p in net.post_t[bi]}
    arcs = [(s, d) for s, d in net.arcs if b not in (s, d)]
    arcs += [(p, OPEN_B_OUT) for p in sorted(ins - outs)]
    arcs += [(OPEN_B_IN, p) for p in sorted(outs - ins)]
    for p in sorted(ins & outs):
        arcs += [(OPEN_B_IN, p), (p, OPEN_B_IN)]
    arcs += [(OPEN_I, OPEN_P_I), (OPEN_P_I, OPEN_B_IN), (OPEN_B_OUT, OPEN_P_B), (OPEN_P_B, OPEN_B_IN)]

    mark = net.marking_dict(m)
    for p in ins:
        mark[p] = m[net.pidx(p)] - k + (k if p in outs else 0)
    mark[OPEN_P_B] = k
    mark[OPEN_P_I] = 0
    places = net.places + (OPEN_P_B, OPEN_P_I)
    transitions = tuple(t for t in net.transitions if t != b) + (OPEN_I, OPEN_B_IN, OPEN_B_OUT)
    expanded = PetriNet(places, transitions, arcs, mark)
    live = [t for t in expanded.enabled_transitions() if t != OPEN_I]
    if live:
        raise HypothesisViolated("deadlock", f"expanded marking enables {live}; is {b!r} blocked in this marking?")
    return OpenExpansion(expanded, net, b, k)


# -- tau -------------------------------------------------------------------------------

@dataclass(frozen=True)
class TauSample:
    values: tuple[float, ...]
    capouts: int
    target: Marking

    @property
    def mean(self) -> float:
        finite = [v for v in self.values if math.isfinite(v)]
        return sum(finite) / len(finite) if finite else math.nan

    @property
    def max(self) -> float:
        return max(self.values) if self.values else math.nan


def default_periodic_routing(net: PetriNet) -> RoutingSpec:
    """Round-robin over the outputs of every choice place."""
    return RoutingSpec({
        net.places[p]: Periodic([net.transitions[t] for t in outs])
        for p, outs in enumerate(net.post_p) if len(outs) > 1
    })


def measure_tau(
    net: PetriNet,
    routing: RoutingSpec,
    timing: TimingSpec,
    b: str,
    replications: int,
    seed: int = 0,
    start: MarkingLike | None = None,
    event_cap: int = 10**6,
    strict: bool = False,
    check: bool = True,
) -> TauSample:
    """First instant at which the marking reaches ``M_b`` when ``b`` never completes.

    Each replication starts from ``start`` (default: the initial marking)
    with its own folded seed.  Replications that exhaust ``event_cap`` events
    or stall elsewhere are counted in ``capouts`` (or raise with ``strict``).
    """
    from .routing import expansion_live_bounded, routed_blocking

    if check:
        if not is_equitable(routing, net):
            raise HypothesisViolated("equitable", "routing starves some output transition")
        expansion_live_bounded(net)
    target = routed_blocking(net, default_periodic_routing(net), b, check=False).marking
    values = []
    capouts = 0
    for r in range(replications):
        cfg = SimConfig(seed=fold_seed(seed, r), until_marking=target, frozen=b, event_cap=event_cap)
        try:
            res = simulate(net, routing, timing, cfg, marking=start)
        except EventCapExceeded:
            if strict:
                raise EventCapExceeded(r, event_cap) from None
            capouts += 1
            values.append(math.inf)
            continue
        if not res.reached:
            if strict:
                raise EventCapExceeded(r, event_cap)
            capouts += 1
            values.append(math.inf)
        else:
            values.append(res.state.clock)
    return TauSample(tuple(values), capouts, target)
