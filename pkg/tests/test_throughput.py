from fractions import Fraction

import numpy as np
import pytest

from fcnet import (
    Bernoulli,
    Exponential,
    MissingRoutingProb,
    NotStronglyConnected,
    Periodic,
    PetriNet,
    RoutingSpec,
    TimingSpec,
    Uniform,
    build_R,
    compare_sim,
    incidence,
    parametric_check,
    perron_vector,
)
from fcnet.errors import SpectralRadiusNotOne
from fcnet.generate import live_bounded_fcns
from fcnet.net import classify
from fcnet.throughput import (
    EXAMPLE_LABELS,
    EXAMPLE_MATRIX,
    RoutingMatrix,
    example_matrix,
    example_prediction,
    solve_fixed_point_exact,
)


def net_b_routing(q):
    return RoutingSpec({"p0": Bernoulli({"a": q, "b": 1 - q})})


def test_build_r_net_b(B):
    q = 0.3
    r = build_R(B, net_b_routing(q)).matrix
    expect = np.zeros((4, 4))
    a, b, c, d = range(4)
    expect[a, c] = expect[b, d] = 1
    expect[c, a] = expect[d, a] = q
    expect[c, b] = expect[d, b] = 1 - q
    assert np.allclose(r, expect)


def test_build_r_t_net(A):
    r = build_R(A, RoutingSpec()).matrix
    assert set(np.unique(r)) <= {0.0, 1.0}
    assert np.allclose(np.ones(2) @ r, np.ones(2))


def test_build_r_errors(B):
    with pytest.raises(MissingRoutingProb):
        build_R(B, RoutingSpec({"p0": Periodic(["a", "b"])}))
    with pytest.raises(NotStronglyConnected):
        build_R(B, net_b_routing(1.0))
    open_net = PetriNet(["p", "q"], ["t"], [("p", "t"), ("t", "q")], {"p": 1})
    with pytest.raises(NotStronglyConnected):
        build_R(open_net, RoutingSpec())


def test_perron_examples(A, B):
    tv = perron_vector(RoutingMatrix(EXAMPLE_LABELS, EXAMPLE_MATRIX))
    assert np.allclose(tv.x, np.array([2, 3, 12, 12, 28]) / 57, atol=1e-10)
    assert abs(tv.spectral_radius - 1) < 1e-9 and tv.residual < 1e-9
    for q in (0.1, 0.3, 0.5, 0.8):
        x = perron_vector(build_R(B, net_b_routing(q))).x
        assert np.allclose(x, np.array([q, 1 - q, q, 1 - q]) / 2, atol=1e-10)
    assert np.allclose(perron_vector(build_R(A, RoutingSpec())).x, [0.5, 0.5])


def test_exact_oracle_agrees():
    exact = solve_fixed_point_exact([[Fraction(str(v)) for v in row] for row in EXAMPLE_MATRIX.tolist()])
    assert exact == [Fraction(2, 57), Fraction(3, 57), Fraction(12, 57), Fraction(12, 57), Fraction(28, 57)]
    for x in (Fraction(1, 5), Fraction(1, 2), Fraction(9, 10)):
        m = [[Fraction(str(v)) for v in row] for row in EXAMPLE_MATRIX.tolist()]
        for row in (2, 4):
            m[row][3], m[row][4] = x, 1 - x
        got = solve_fixed_point_exact(m)
        want = [2 * x, 3 * x, 12 * x, 12 * x, 12 - 12 * x]
        assert got == [w / (12 + 17 * x) for w in want]


def test_parametric_points():
    assert np.allclose(example_prediction(0.3), np.array([0.6, 0.9, 3.6, 3.6, 8.4]) / 17.1)
    assert np.allclose(example_prediction(0.3), np.array([2, 3, 12, 12, 28]) / 57)
    assert np.allclose(example_prediction(0.5), np.array([1, 1.5, 6, 6, 6]) / 20.5)
    assert np.array_equal(example_matrix(0.3), EXAMPLE_MATRIX)
    assert parametric_check([0.1 * k for k in range(1, 10)]).ok


def test_perron_rejects_bad_matrices():
    with pytest.raises(NotStronglyConnected):
        perron_vector(np.array([[1.0, 0.0], [0.5, 0.5]]))
    with pytest.raises(SpectralRadiusNotOne):
        perron_vector(np.array([[0.0, 2.0], [2.0, 0.0]]))


def test_periodic_matrix_converges():
    x = perron_vector(np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])).x
    assert np.allclose(x, [1 / 3] * 3)


def test_uniqueness_from_random_starts():
    rng = np.random.default_rng(0)
    ref = perron_vector(RoutingMatrix(EXAMPLE_LABELS, EXAMPLE_MATRIX)).x
    for _ in range(10):
        x = perron_vector(RoutingMatrix(EXAMPLE_LABELS, EXAMPLE_MATRIX), start=rng.uniform(0.01, 1, 5)).x
        assert np.max(np.abs(x - ref)) < 1e-9


def test_t_nets_give_uniform_vectors():
    found = 0
    for net in live_bounded_fcns(61, 150):
        if classify(net).is_t_net:
            x = perron_vector(build_R(net, RoutingSpec())).x
            assert np.allclose(x, 1 / len(net.transitions), atol=1e-9)
            found += 1
    assert found >= 3


def test_x_is_t_invariant_exactly(B):
    q = Fraction(3, 10)
    x = [q / 2, (1 - q) / 2, q / 2, (1 - q) / 2]
    n = incidence(B).tolist()
    assert all(sum(Fraction(v) * xi for v, xi in zip(row, x)) == 0 for row in n)


def test_csv_round_trip(tmp_path):
    rm = RoutingMatrix(EXAMPLE_LABELS, EXAMPLE_MATRIX)
    back = RoutingMatrix.from_csv(rm.to_csv())
    assert back.labels == rm.labels and np.array_equal(back.matrix, rm.matrix)


def test_compare_sim_timing_independence(B):
    routing = net_b_routing(0.3)
    fast = compare_sim(B, routing, TimingSpec.uniform_all(B, Exponential(2.0)), 20000, seed=1)
    slow = compare_sim(B, routing, TimingSpec.uniform_all(B, Uniform(0.5, 1.5)), 20000, seed=1)
    assert fast.x == slow.x
    assert fast.max_rel_err < 0.05 and slow.max_rel_err < 0.05
    assert fast.rates["a"] > 1.5 * slow.rates["a"]
    assert fast.invariant_residual < 0.01
    report = fast.to_json()
    assert {"x", "residual", "spectral_radius", "sim_ratios", "max_rel_err"} <= set(report)
