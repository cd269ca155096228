"""JSON net description files.

::

    {
      "places": [{"id": "p0", "marking": 1}, {"id": "p1"}],
      "transitions": [{"id": "a"}, {"id": "c"}],
      "arcs": [["p0", "a"], ["a", "p1"], ["p1", "c"], ["c", "p0"]],
      "routing": {"p0": {"type": "bernoulli", "probs": {"a": 0.3, "b": 0.7}}},
      "timing": {"a": {"dist": "exp", "rate": 1.0}}
    }

Unknown keys are errors.  Identifiers starting with a reserved transform
prefix are refused unless the file carries ``"generated": true`` (files
written by ``fcnet expand`` do).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .errors import FCNetError, InvalidNet, InvalidRouting, InvalidTiming, NetFileError
from .net import PetriNet
from .routing import RoutingSpec, check_routing
from .timed import TimingSpec, check_timing
from .transforms import RESERVED_PREFIXES

TOP_KEYS = {"places", "transitions", "arcs", "routing", "timing", "generated"}


@dataclass(frozen=True)
class NetFile:
    net: PetriNet
    routing: Optional[RoutingSpec] = None
    timing: Optional[TimingSpec] = None
    generated: bool = False


def _ids(entries, kind: str, allowed: set[str]) -> tuple[list[str], dict[str, int]]:
    if not isinstance(entries, list):
        raise NetFileError(f"'{kind}' must be a list")
    ids, marking = [], {}
    for e in entries:
        if not isinstance(e, dict) or "id" not in e:
            raise NetFileError(f"each entry of '{kind}' must be an object with an 'id'")
        extra = set(e) - allowed
        if extra:
            raise NetFileError(f"unknown key(s) {sorted(extra)} in {kind} entry {e['id']!r}")
        ids.append(e["id"])
        if "marking" in e:
            marking[e["id"]] = e["marking"]
    return ids, marking


def parse_net(data: dict) -> NetFile:
    if not isinstance(data, dict):
        raise NetFileError("net file must hold a JSON object")
    extra = set(data) - TOP_KEYS
    if extra:
        raise NetFileError(f"unknown top-level key(s) {sorted(extra)}")
    for key in ("places", "transitions", "arcs"):
        if key not in data:
            raise NetFileError(f"missing '{key}'")
    generated = data.get("generated", False)
    if not isinstance(generated, bool):
        raise NetFileError("'generated' must be a boolean")

    places, marking = _ids(data["places"], "places", {"id", "marking"})
    transitions, _ = _ids(data["transitions"], "transitions", {"id"})
    arcs = data["arcs"]
    if not isinstance(arcs, list):
        raise NetFileError("'arcs' must be a list")
    for a in arcs:
        if not isinstance(a, list):
            raise NetFileError(f"arc {a!r} must be a [from, to] list")
        if len(a) == 3:
            raise NetFileError(f"weighted arc {a!r}: arc multiplicities are not supported")
        if len(a) != 2:
            raise NetFileError(f"arc {a!r} must be a [from, to] list")
    if not generated:
        for x in places + transitions:
            if isinstance(x, str) and x.startswith(RESERVED_PREFIXES):
                raise NetFileError(f"identifier {x!r} uses a reserved prefix")
    try:
        net = PetriNet(places, transitions, arcs, marking)
        routing = RoutingSpec.from_json(data["routing"]) if "routing" in data else None
        if routing is not None:
            check_routing(net, routing)
        timing = TimingSpec.from_json(data["timing"]) if "timing" in data else None
        if timing is not None:
            check_timing(net, timing)
    except (InvalidNet, InvalidRouting, InvalidTiming) as e:
        raise NetFileError(str(e)) from e
    return NetFile(net, routing, timing, generated)


def load_net(source: Union[str, Path]) -> NetFile:
    """Read a net file from a path."""
    try:
        text = Path(source).read_text(encoding="utf-8")
    except OSError as e:
        raise NetFileError(f"cannot read {source}: {e}") from e
    return loads_net(text)


def loads_net(text: str) -> NetFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise NetFileError(f"not valid JSON: {e}") from e
    return parse_net(data)


def net_to_json(net: PetriNet, routing: RoutingSpec | None = None, timing: TimingSpec | None = None,
                generated: bool = False) -> dict:
    out = {
        "places": [
            ({"id": p, "marking": k} if k else {"id": p}) for p, k in zip(net.places, net.initial)
        ],
        "transitions": [{"id": t} for t in net.transitions],
        "arcs": [list(a) for a in sorted(net.arcs)],
    }
    if routing is not None and routing.rules:
        out["routing"] = routing.to_json()
    if timing is not None and timing.dists:
        out["timing"] = timing.to_json()
    if generated:
        out["generated"] = True
    return out


def dumps_net(net: PetriNet, routing=None, timing=None, generated: bool = False) -> str:
    return json.dumps(net_to_json(net, routing, timing, generated), indent=2, sort_keys=True) + "\n"


def check_file(source) -> list:
    """Diagnostics for a file, empty if it parses into a valid net."""
    try:
        load_net(source)
    except FCNetError as e:
        cause = e.__cause__
        if isinstance(cause, InvalidNet):
            return cause.diagnostics
        return [str(e)]
    return []
