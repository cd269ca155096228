from pathlib import Path

import pytest

from fcnet import PetriNet
from fcnet.netfile import load_net

NETS_DIR = Path(__file__).resolve().parent.parent / "nets"


def net_a() -> PetriNet:
    return PetriNet(["p1", "p2"], ["t1", "t2"], [("p1", "t1"), ("t1", "p2"), ("p2", "t2"), ("t2", "p1")], {"p1": 1})


def net_b() -> PetriNet:
    return load_net(NETS_DIR / "net_b.json").net


# counterexamples, each dropping one hypothesis

def non_live_fcn() -> PetriNet:
    # a token may leak to the sink place q through x
    return PetriNet(["p0", "p1", "q"], ["a", "b", "x"],
                    [("p0", "a"), ("a", "p1"), ("p1", "b"), ("b", "p0"), ("p0", "x"), ("x", "q")], {"p0": 2})


def unbounded_fcn() -> PetriNet:
    # every a leaves a token behind in p2
    return PetriNet(["p0", "p1", "p2"], ["a", "b"],
                    [("p0", "a"), ("a", "p1"), ("a", "p2"), ("p1", "b"), ("b", "p0")], {"p0": 1})


def non_fc_net() -> PetriNet:
    # p0 feeds b and c, but b also needs p1: not (extended) Free Choice
    return PetriNet(["p0", "p1", "p2", "p3"], ["a", "b", "c"],
                    [("a", "p0"), ("b", "p2"), ("b", "p3"), ("c", "p1"), ("c", "p2"),
                     ("p0", "b"), ("p0", "c"), ("p1", "b"), ("p2", "a"), ("p3", "c")],
                    {"p0": 1, "p1": 1, "p2": 1, "p3": 1})


@pytest.fixture
def A() -> PetriNet:
    return net_a()


@pytest.fixture
def B() -> PetriNet:
    return net_b()
