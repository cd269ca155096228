"""Net rewrites: cluster blocking, EFCN -> FCN, Free Choice expansion.

Fresh nodes are prefixed ``__blk_`` or ``__exp_``; those prefixes are
reserved and refused in user net files.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

from .errors import HypothesisViolated, NotConflicting, NotEFCN
from .net import Marking, PetriNet, classify, cluster, non_conflicting

RESERVED_PREFIXES = ("__blk_", "__exp_")

BLK_ALPHA = "__blk_alpha"
BLK_BETA = "__blk_beta"


class ClusterBlock(NamedTuple):
    net: PetriNet
    phi: Callable[[Marking], Marking]
    place: str


def cluster_block_transform(net: PetriNet, b: str) -> ClusterBlock:
    """Insert a fresh place/transition pair in front of the choice place of ``[b]``.

    Arcs ``t -> p_b`` are redirected to ``t -> alpha`` and ``alpha -> beta -> p_b``
    is added, so ``beta`` is non-conflicting.  The tokens of ``p_b`` start in
    ``alpha``.  ``phi`` maps markings of the new net back by merging
    ``alpha`` into ``p_b``.
    """
    if non_conflicting(net, b):
        raise NotConflicting(f"transition {b!r} is non-conflicting")
    places = sorted(x for x in cluster(net, b) if net.is_place(x))
    if len(places) != 1:
        raise HypothesisViolated("single-place-cluster", f"[{b}] has places {places}")
    (pb,) = places

    arcs = []
    for src, dst in net.arcs:
        if dst == pb:
            arcs.append((src, BLK_ALPHA))
        else:
            arcs.append((src, dst))
    arcs += [(BLK_ALPHA, BLK_BETA), (BLK_BETA, pb)]
    marking = net.marking_dict(net.initial)
    marking[BLK_ALPHA] = marking[pb]
    marking[pb] = 0
    new = PetriNet(net.places + (BLK_ALPHA,), net.transitions + (BLK_BETA,), arcs, marking)

    ia, ib = new.pidx(BLK_ALPHA), new.pidx(pb)
    keep = [new.pidx(p) for p in net.places]

    def phi(m: Marking) -> Marking:
        m = new.marking(m)
        out = [m[i] for i in keep]
        out[net.pidx(pb)] = m[ia] + m[ib]
        return tuple(out)

    return ClusterBlock(new, phi, pb)


def efcn_to_fcn(net: PetriNet) -> PetriNet:
    """Rewrite every shared multi-input choice through a silent transition and place."""
    cls = classify(net)
    if not cls.is_extended_free_choice:
        raise NotEFCN("net is not Extended Free Choice")
    if cls.is_free_choice:
        return net

    groups: dict[tuple[str, ...], list[str]] = {}
    for ti, t in enumerate(net.transitions):
        pre = net.pre_t[ti]
        if len(pre) > 1 and any(len(net.post_p[p]) > 1 for p in pre):
            groups.setdefault(tuple(net.places[p] for p in pre), []).append(t)

    arcs = set(net.arcs)
    places, transitions = list(net.places), list(net.transitions)
    for shared, ts in sorted(groups.items()):
        tag = "+".join(shared)
        silent, hub = f"__exp_efc_t:{tag}", f"__exp_efc_s:{tag}"
        transitions.append(silent)
        places.append(hub)
        for p in shared:
            for q in ts:
                arcs.discard((p, q))
            arcs.add((p, silent))
        arcs.add((silent, hub))
        for q in ts:
            arcs.add((hub, q))
    return PetriNet(places, transitions, arcs, net.marking_dict(net.initial))


def expansion_names(p: str, q: str) -> tuple[str, str]:
    """(place, transition) inserted on the arc ``p -> q``."""
    return f"__exp_s:{p}->{q}", f"__exp_t:{p}->{q}"


def free_choice_expansion(net: PetriNet) -> PetriNet:
    """Put a private transition and place on every place->transition arc.

    Each arc ``p -> q`` becomes ``p -> t_pq -> s_pq -> q``.  The original arc
    is dropped, which is what makes the result Free Choice.  New places start
    empty.
    """
    places, transitions = list(net.places), list(net.transitions)
    arcs = []
    for src, dst in sorted(net.arcs):
        if net.is_place(src):
            s, t = expansion_names(src, dst)
            places.append(s)
            transitions.append(t)
            arcs += [(src, t), (t, s), (s, dst)]
        else:
            arcs.append((src, dst))
    return PetriNet(places, transitions, arcs, net.marking_dict(net.initial))
