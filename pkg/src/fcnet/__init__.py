"""Free Choice Petri nets: structure, routing, timed simulation and throughput."""

from .analysis import (
    INCONCLUSIVE,
    BlockingResult,
    ReachabilityGraph,
    blocking_marking,
    blocking_oracle,
    commoner_live,
    is_bounded,
    is_deadlock_free,
    is_live,
    maximal_trap,
    minimal_siphons,
    reachability,
)
from .errors import *  # noqa: F401,F403
from .net import (
    PetriNet,
    classify,
    cluster,
    enabled,
    fire,
    fire_sequence,
    incidence,
    non_conflicting,
    postset,
    preset,
    reverse_fire,
    validate,
)
from .netfile import NetFile, dumps_net, load_net, loads_net
from .routing import (
    Bernoulli,
    Periodic,
    RoutingSpec,
    init_routed,
    is_equitable,
    routed_blocking,
    routed_deadlock,
    routed_enabled,
    routed_fire,
    routed_parikh_unique,
    routed_reachability,
)
from .throughput import RoutingMatrix, build_R, compare_sim, parametric_check, perron_vector
from .timed import (
    Deterministic,
    Exponential,
    SimConfig,
    TimingSpec,
    Uniform,
    measure_tau,
    open_expansion,
    simulate,
    throughput_estimate,
)
from .transforms import cluster_block_transform, efcn_to_fcn, free_choice_expansion

__version__ = "0.1.0"
