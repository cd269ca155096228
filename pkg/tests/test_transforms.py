import random

import pytest

from fcnet import (
    NotConflicting,
    NotEFCN,
    PetriNet,
    blocking_marking,
    blocking_oracle,
    classify,
    cluster_block_transform,
    commoner_live,
    efcn_to_fcn,
    free_choice_expansion,
    is_bounded,
    is_live,
)
from fcnet.transforms import BLK_ALPHA, BLK_BETA, expansion_names

from conftest import non_fc_net


def efc_net() -> PetriNet:
    # p and q both feed a and b: Extended Free Choice but not Free Choice
    return PetriNet(["p", "q", "r", "s"], ["a", "b", "c", "d"],
                    [("p", "a"), ("p", "b"), ("q", "a"), ("q", "b"), ("a", "r"), ("b", "s"),
                     ("r", "c"), ("s", "d"), ("c", "p"), ("c", "q"), ("d", "p"), ("d", "q")],
                    {"p": 1, "q": 1})


def test_cluster_block_net_b(B):
    blk = cluster_block_transform(B, "a")
    net = blk.net
    m = net.marking_dict(net.initial, nonzero=True)
    assert m == {BLK_ALPHA: 1}
    assert blk.phi(net.initial) == B.initial
    res = blocking_marking(net, BLK_BETA)
    merged = blk.phi(res.blocking_marking)
    assert set(B.enabled_transitions(merged)) == {"a", "b"}
    assert blocking_oracle(B, {"a", "b"})[0] == {merged}


def test_cluster_block_rejects_non_conflicting(B):
    with pytest.raises(NotConflicting):
        cluster_block_transform(B, "c")


def test_efcn_rewrite():
    net = efc_net()
    out = efcn_to_fcn(net)
    assert classify(out).is_free_choice
    assert len(out.places) == len(net.places) + 1
    assert len(out.transitions) == len(net.transitions) + 1
    assert is_live(out) is True and is_bounded(out).bounded


def test_efcn_identity_and_reject(B):
    assert efcn_to_fcn(B) is B
    with pytest.raises(NotEFCN):
        efcn_to_fcn(non_fc_net())


def test_free_choice_expansion_examples(A, B):
    ea = free_choice_expansion(A)
    assert classify(ea).is_free_choice
    assert len(ea.transitions) == 4 and len(ea.places) == 4
    eb = free_choice_expansion(B)
    assert len(eb.places) == 3 + 4 and len(eb.transitions) == 4 + 4
    s, t = expansion_names("p0", "a")
    assert eb.is_place(s) and eb.is_transition(t)
    assert ("p0", t) in eb.arcs and (t, s) in eb.arcs and (s, "a") in eb.arcs
    assert ("p0", "a") not in eb.arcs
    assert eb.marking_dict(eb.initial, nonzero=True) == {"p0": 1}


def test_expansion_of_non_fc_live_net_is_not_live():
    net = non_fc_net()
    assert is_live(net) is True
    exp = free_choice_expansion(net)
    assert classify(exp).is_free_choice
    assert not commoner_live(exp).live


def test_expansion_live_implies_original_live():
    rng = random.Random(9)
    seen = 0
    while seen < 60:
        places = [f"p{i}" for i in range(rng.randint(2, 4))]
        transitions = [f"t{i}" for i in range(rng.randint(2, 4))]
        arcs = set()
        for t in transitions:
            arcs |= {(p, t) for p in rng.sample(places, rng.randint(1, 2))}
            arcs |= {(t, p) for p in rng.sample(places, rng.randint(1, 2))}
        try:
            net = PetriNet(places, transitions, sorted(arcs), {p: rng.randint(0, 1) for p in places})
            exp = free_choice_expansion(net)
            if not (is_bounded(net, node_cap=5000).bounded and is_bounded(exp, node_cap=5000).bounded):
                continue
        except Exception:
            continue
        live_exp = is_live(exp, node_cap=5000)
        if live_exp is True:
            assert is_live(net, node_cap=5000) is True
        seen += 1
