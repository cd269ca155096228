"""Acceptance criteria, one test each.  Every test prints a single PASS/FAIL line."""

from __future__ import annotations

import json
import os
import random
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from fcnet import (
    HypothesisViolated,
    PetriNet,
    blocking_marking,
    blocking_oracle,
    classify,
    commoner_live,
    free_choice_expansion,
    is_bounded,
    is_live,
    measure_tau,
    parametric_check,
    perron_vector,
    routed_blocking,
    routed_parikh_unique,
)
from fcnet.analysis import INCONCLUSIVE, is_home_state, reachability, witness_bound
from fcnet.errors import Truncated
from fcnet.generate import bounded_fcn, live_bounded_fcns
from fcnet.net import non_conflicting
from fcnet.routing import Bernoulli, RoutingSpec, expansion_live_bounded, sample_equitable_routing
from fcnet.throughput import EXAMPLE_LABELS, EXAMPLE_MATRIX, RoutingMatrix, compare_sim, solve_fixed_point_exact
from fcnet.timed import Deterministic, Exponential, SimConfig, TimingSpec, Uniform, simulate, throughput_estimate

from conftest import NETS_DIR, net_a, net_b, non_fc_net, non_live_fcn, unbounded_fcn

CRITERION3_SEED = 20240611
CRITERION3_COUNT = 200


@pytest.fixture
def verdict(capsys):
    def report(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail
    return report


@pytest.fixture(scope="module")
def generated_nets():
    return list(live_bounded_fcns(CRITERION3_SEED, CRITERION3_COUNT))


def test_01_example_eigenvector(verdict):
    exact = solve_fixed_point_exact([[Fraction(str(v)) for v in row] for row in EXAMPLE_MATRIX.tolist()])
    assert exact == [Fraction(k, 57) for k in (2, 3, 12, 12, 28)]
    t0 = time.perf_counter()
    x = perron_vector(RoutingMatrix(EXAMPLE_LABELS, EXAMPLE_MATRIX)).x
    elapsed = time.perf_counter() - t0
    err = float(np.max(np.abs(x - np.array([float(f) for f in exact]))))
    rounded = tuple(round(float(v), 2) for v in x)
    ok = err < 1e-9 and rounded == (0.04, 0.05, 0.21, 0.21, 0.49) and elapsed < 0.1
    verdict(1, ok, f"max err {err:.2e}, rounded {rounded}, {elapsed * 1000:.1f} ms")


def test_02_parametric_family(verdict):
    grid = [round(0.05 * k, 10) for k in range(1, 20)]
    t0 = time.perf_counter()
    rep = parametric_check(grid, tol=1e-8)
    elapsed = time.perf_counter() - t0
    worst = max(e for _, e in rep.rows)
    verdict(2, rep.ok and len(rep.rows) == 19 and elapsed < 1, f"19 points, max err {worst:.2e}, {elapsed:.3f} s")


def test_03_blocking_oracle(verdict, generated_nets):
    t0 = time.perf_counter()
    checked, problems = 0, []
    for k, net in enumerate(generated_nets):
        assert len(net.places) <= 8 and len(net.transitions) <= 8
        bound = is_bounded(net).bound
        assert bound <= 3
        graph = reachability(net)
        for b in net.transitions:
            if not non_conflicting(net, b):
                continue
            res = blocking_marking(net, b)
            rb, rb2 = blocking_oracle(net, b)
            checked += 1
            if not rb == rb2 == {res.blocking_marking}:
                problems.append((k, b, "oracle"))
            if not is_home_state(graph, res.blocking_marking):
                problems.append((k, b, "home"))
            if len(res.witness_sequence) > witness_bound(bound, len(net.transitions)):
                problems.append((k, b, "witness"))
    elapsed = time.perf_counter() - t0
    ok = not problems and len(generated_nets) >= 200 and elapsed < 60
    verdict(3, ok, f"{len(generated_nets)} nets, {checked} transitions, {len(problems)} mismatches, {elapsed:.1f} s")


def test_04_counterexamples(verdict):
    t0 = time.perf_counter()
    cases = []

    net = non_live_fcn()
    assert classify(net).is_free_choice and is_bounded(net).bounded and is_live(net) is False
    cases.append(("non-live", net, "b", "live", blocking_oracle(net, "b")[0]))

    net = unbounded_fcn()
    assert classify(net).is_free_choice and not is_bounded(net).bounded and commoner_live(net).live
    cases.append(("unbounded", net, "b", "bounded", blocking_oracle(net, "b", node_cap=200, partial=True)[0]))

    net = non_fc_net()
    assert not classify(net).is_extended_free_choice and is_bounded(net).bounded and is_live(net) is True
    cases.append(("non-FC", net, "a", "free-choice", blocking_oracle(net, "a")[0]))

    details, ok = [], True
    for name, net, b, which, rb in cases:
        try:
            blocking_marking(net, b)
            raised = None
        except HypothesisViolated as e:
            raised = e.which
        ok &= len(rb) >= 2 and raised == which
        details.append(f"{name}: |R_b|>={len(rb)}, raised {raised}")
    elapsed = time.perf_counter() - t0
    verdict(4, ok and elapsed < 5, "; ".join(details) + f"; {elapsed:.2f} s")


def test_05_commoner_vs_explicit(verdict):
    rng = random.Random(5)
    t0 = time.perf_counter()
    agree = disagree = skipped = live_count = 0
    while agree + disagree < 500:
        net = bounded_fcn(rng)
        explicit = is_live(net, node_cap=20000)
        if explicit is INCONCLUSIVE:
            skipped += 1
            continue
        live_count += bool(explicit)
        if commoner_live(net).live == explicit:
            agree += 1
        else:
            disagree += 1
    elapsed = time.perf_counter() - t0
    verdict(5, disagree == 0 and elapsed < 60,
            f"{agree}/500 agree ({live_count} live, {500 - live_count} not), {skipped} skipped, {elapsed:.1f} s")


def test_06_routed_parikh(verdict, generated_nets):
    rng = random.Random(6)
    t0 = time.perf_counter()
    runs, failures = 0, []
    for k, net in enumerate(generated_nets):
        routing = sample_equitable_routing(net, rng)
        for b in net.transitions:
            if not non_conflicting(net, b):
                continue
            rep = routed_parikh_unique(net, routing, b, trials=100, seed=k)
            runs += rep.trials
            if not (rep.unique and rep.monotone):
                failures.append((k, b))
    elapsed = time.perf_counter() - t0
    verdict(6, not failures and elapsed < 120, f"{runs} shuffled runs, {len(failures)} failures, {elapsed:.1f} s")


def test_07_tnet_uniformity(verdict):
    net = net_a()
    t0 = time.perf_counter()
    timing = TimingSpec.uniform_all(net, Exponential(1.0))
    res = simulate(net, None, timing, SimConfig(seed=7, max_events=10**5))
    rates = throughput_estimate(res.log, res.state.clock).rates
    dev = abs(rates["t1"] / rates["t2"] - 1)

    det = TimingSpec({"t1": Deterministic(1.0), "t2": Deterministic(2.0)})
    horizon = 3000.0
    res = simulate(net, None, det, SimConfig(seed=7, horizon=horizon))
    exact = {t: Fraction(res.log.count(t, horizon)) / Fraction(horizon) for t in net.transitions}
    elapsed = time.perf_counter() - t0
    ok = dev < 0.02 and all(v == Fraction(1, 3) for v in exact.values()) and elapsed < 10
    verdict(7, ok, f"exp ratio deviation {dev:.4f}, det rates {sorted(set(map(str, exact.values())))}, {elapsed:.1f} s")


def test_08_ratio_prediction(verdict):
    net = net_b()
    routing = RoutingSpec({"p0": Bernoulli({"a": 0.3, "b": 0.7})})
    t0 = time.perf_counter()
    exp = compare_sim(net, routing, TimingSpec.uniform_all(net, Exponential(1.0)), 0, seed=8, max_events=10**5)
    uni = compare_sim(net, routing, TimingSpec.uniform_all(net, Uniform(0.5, 1.5)), 0, seed=8, max_events=10**5)
    elapsed = time.perf_counter() - t0
    ok = exp.max_rel_err < 0.03 and uni.max_rel_err < 0.03 and exp.x == uni.x and elapsed < 30
    verdict(8, ok, f"max rel err exp {exp.max_rel_err:.4f}, uniform {uni.max_rel_err:.4f}, "
                   f"rate a {exp.rates['a']:.4f} vs {uni.rates['a']:.4f}, {elapsed:.1f} s")


def test_09_tau_finite(verdict):
    net = net_b()
    routing = RoutingSpec({"p0": Bernoulli({"a": 0.5, "b": 0.5})})
    timing = TimingSpec.uniform_all(net, Exponential(1.0))
    t0 = time.perf_counter()
    first = measure_tau(net, routing, timing, "c", 10**4, seed=1)
    second = measure_tau(net, routing, timing, "c", 10**4, seed=2)
    elapsed = time.perf_counter() - t0
    rel = abs(first.mean - second.mean) / second.mean
    ok = first.capouts == second.capouts == 0 and rel < 0.05 and elapsed < 60
    verdict(9, ok, f"means {first.mean:.4f} / {second.mean:.4f} (rel diff {rel:.4f}), "
                   f"cap-outs {first.capouts + second.capouts}, {elapsed:.1f} s")


def _cli(args: list[str], hashseed: str) -> subprocess.CompletedProcess:
    env = dict(os.environ, PYTHONHASHSEED=hashseed)
    return subprocess.run([sys.executable, "-m", "fcnet.cli", *args], capture_output=True, env=env, check=False)


def test_10_determinism(verdict, tmp_path):
    a_file, b_file = str(NETS_DIR / "net_a.json"), str(NETS_DIR / "net_b.json")
    csvs = []
    for k in range(2):
        path = tmp_path / f"log{k}.csv"
        out = _cli(["simulate", b_file, "--seed", "11", "--events", "5000", "--csv", str(path), "--json"], str(k))
        assert out.returncode == 0, out.stderr
        csvs.append(path.read_bytes())
    commands = [
        ["classify", a_file], ["classify", b_file],
        ["blocking", b_file, "c", "--oracle"], ["blocking", b_file, "a", "--cluster", "--oracle"],
        ["throughput", b_file], ["throughput", "--matrix", str(NETS_DIR / "example_matrix.csv"), "--grid"],
        ["expand", b_file, "--free-choice"], ["expand", a_file, "--open", "t1"],
    ]
    same = 0
    for cmd in commands:
        outs = [_cli([*cmd, "--json"], seed) for seed in ("1", "2")]
        if outs[0].stdout == outs[1].stdout and outs[0].returncode == 0:
            json.loads(outs[0].stdout)
            same += 1
    ok = csvs[0] == csvs[1] and len(csvs[0]) > 0 and same == len(commands)
    verdict(10, ok, f"CSV identical: {csvs[0] == csvs[1]}, {same}/{len(commands)} JSON reports identical")


def _small_random_net(rng: random.Random) -> PetriNet | None:
    places = [f"p{i}" for i in range(rng.randint(2, 4))]
    transitions = [f"t{i}" for i in range(rng.randint(2, 4))]
    arcs = set()
    for t in transitions:
        arcs |= {(p, t) for p in rng.sample(places, rng.randint(1, 2))}
        arcs |= {(t, p) for p in rng.sample(places, rng.randint(1, 2))}
    try:
        return PetriNet(places, transitions, sorted(arcs), {p: rng.randint(0, 1) for p in places})
    except Exception:
        return None


def test_11_expansion(verdict, generated_nets):
    rng = random.Random(11)
    t0 = time.perf_counter()
    pool = list(generated_nets)
    while len(pool) < len(generated_nets) + 100:
        net = _small_random_net(rng)
        if net is not None:
            pool.append(net)
    mismatched = compared = 0
    for net in pool:
        try:
            left = is_bounded(net, node_cap=20000).bounded
            right = is_bounded(free_choice_expansion(net), node_cap=20000).bounded
        except Truncated:
            continue
        compared += 1
        mismatched += left != right

    routed, divergent = 0, []
    for k, net in enumerate(generated_nets):
        expansion_live_bounded(net)
        for b in net.transitions:
            finals = set()
            for _ in range(20):
                finals.add(routed_blocking(net, sample_equitable_routing(net, rng), b, check=False).marking)
            routed += 1
            if len(finals) != 1:
                divergent.append((k, b))
    elapsed = time.perf_counter() - t0
    ok = mismatched == 0 and not divergent and elapsed < 120
    verdict(11, ok, f"boundedness agrees on {compared - mismatched}/{compared} nets, "
                    f"{routed} transitions x 20 routings, {len(divergent)} divergent, {elapsed:.1f} s")
