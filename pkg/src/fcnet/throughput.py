"""Throughput ratios from the routing matrix.

For a live, bounded stochastic routed net the asymptotic throughputs are
proportional to the positive left fixed point ``x R = x`` of

    R[i, j] = (1 / |pre(j)|) * sum over places p with i -> p -> j of P(u_p = j)

The proportionality constant depends on the timings and is only reported as
the scale implied by a simulation.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import MissingRoutingProb, NoConvergence, NotStronglyConnected, SpectralRadiusNotOne
from .net import PetriNet, incidence, is_strongly_connected
from .routing import Bernoulli, RoutingSpec

# Example matrix over transitions a..e whose left fixed point is (2, 3, 12, 12, 28) / 57.
EXAMPLE_LABELS = ("a", "b", "c", "d", "e")
EXAMPLE_MATRIX = np.array([
    [0.4, 0.3, 0.0, 0.0, 0.0],
    [0.4, 0.4, 0.4, 0.0, 0.0],
    [0.0, 0.1, 0.4, 0.3, 0.7],
    [0.0, 0.0, 0.5, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.3, 0.7],
])


@dataclass(frozen=True)
class RoutingMatrix:
    labels: tuple[str, ...]
    matrix: np.ndarray = field(compare=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != len(self.labels):
            raise ValueError("routing matrix must be square and match its labels")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValueError("routing matrix entries must be finite and nonnegative")
        object.__setattr__(self, "matrix", m)

    def is_irreducible(self) -> bool:
        n, _ = connected_components(self.matrix > 0, directed=True, connection="strong")
        return n == 1

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.labels)
        for row in self.matrix:
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RoutingMatrix":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
        if not rows:
            raise ValueError("empty matrix file")
        labels = tuple(c.strip() for c in rows[0])
        try:
            values = [[float(c) for c in r] for r in rows[1:]]
        except ValueError:
            raise ValueError("matrix entries must be numbers") from None
        return cls(labels, np.array(values, dtype=float).reshape(len(values), -1) if values else np.zeros((0, 0)))


def build_R(net: PetriNet, routing: RoutingSpec) -> RoutingMatrix:
    if not is_strongly_connected(net):
        raise NotStronglyConnected("the net is not strongly connected")
    T = len(net.transitions)
    r = np.zeros((T, T))
    for j in range(T):
        for p in net.pre_t[j]:
            outs = net.post_p[p]
            if len(outs) == 1:
                q = 1.0
            else:
                rule = routing.get(net.places[p])
                if not isinstance(rule, Bernoulli):
                    raise MissingRoutingProb(f"place {net.places[p]!r} needs Bernoulli probabilities")
                q = rule.prob(net.transitions[j])
            for i in net.pre_p[p]:
                r[i, j] += q / len(net.pre_t[j])
    rm = RoutingMatrix(net.transitions, r)
    if not rm.is_irreducible():
        raise NotStronglyConnected("routing matrix is reducible (a zero routing probability?)")
    return rm


@dataclass(frozen=True)
class ThroughputVector:
    labels: tuple[str, ...]
    x: np.ndarray = field(compare=False)
    residual: float
    spectral_radius: float
    iterations: int

    def as_dict(self) -> dict[str, float]:
        return {t: float(v) for t, v in zip(self.labels, self.x)}


def perron_vector(
    R: RoutingMatrix | np.ndarray,
    tol: float = 1e-12,
    max_iter: int = 10**6,
    rho_tol: float = 1e-9,
    start: Optional[np.ndarray] = None,
) -> ThroughputVector:
    """Positive left eigenvector of ``R`` for eigenvalue 1, by damped power iteration.

    Iterates ``x <- x (R + I) / 2`` with sum-normalisation, which also
    converges for periodic irreducible matrices.  Stops when successive
    iterates differ by less than ``tol`` in the max norm.
    """
    if not isinstance(R, RoutingMatrix):
        R = RoutingMatrix(tuple(str(i) for i in range(len(R))), R)
    if not R.is_irreducible():
        raise NotStronglyConnected("matrix is reducible")
    m = R.matrix
    n = m.shape[0]
    damped = (m + np.eye(n)) / 2
    x = np.full(n, 1.0 / n) if start is None else np.asarray(start, dtype=float) / np.sum(start)
    for it in range(1, max_iter + 1):
        y = x @ damped
        y /= y.sum()
        if np.max(np.abs(y - x)) < tol:
            x = y
            break
        x = y
    else:
        raise NoConvergence(f"no convergence within {max_iter} iterations")
    xr = x @ m
    rho = float(xr.sum())
    if abs(rho - 1.0) > rho_tol:
        raise SpectralRadiusNotOne(rho)
    if np.any(x <= 0):
        raise NoConvergence("limit vector is not strictly positive")
    return ThroughputVector(R.labels, x, float(np.max(np.abs(xr - x))), rho, it)


def solve_fixed_point_exact(matrix: Sequence[Sequence]) -> list[Fraction]:
    """Left fixed point of a matrix with rational entries, normalised to sum 1.

    Gaussian elimination over Fractions on ``(R^T - I) x = 0`` with the last
    equation replaced by ``sum x = 1``.  Independent of the power iteration.
    """
    n = len(matrix)
    rows = []
    for j in range(n):
        rows.append([Fraction(matrix[i][j]).limit_denominator(10**9) - (1 if i == j else 0) for i in range(n)] + [Fraction(0)])
    rows[-1] = [Fraction(1)] * n + [Fraction(1)]
    for col in range(n):
        piv = next((r for r in range(col, n) if rows[r][col] != 0), None)
        if piv is None:
            raise ValueError("singular system: fixed point not unique")
        rows[col], rows[piv] = rows[piv], rows[col]
        for r in range(n):
            if r != col and rows[r][col] != 0:
                f = rows[r][col] / rows[col][col]
                rows[r] = [a - f * b for a, b in zip(rows[r], rows[col])]
    return [rows[i][n] / rows[i][i] for i in range(n)]


# -- parametric family ----------------------------------------------------------------

def example_matrix(x: float) -> np.ndarray:
    """Example matrix with the d/e routing split set to ``x`` / ``1 - x`` in rows c and e."""
    m = EXAMPLE_MATRIX.copy()
    for row in (2, 4):
        m[row, 3] = x
        m[row, 4] = 1 - x
    return m


def example_prediction(x: float) -> np.ndarray:
    return np.array([2 * x, 3 * x, 12 * x, 12 * x, 12 - 12 * x]) / (12 + 17 * x)


@dataclass(frozen=True)
class ParametricReport:
    rows: tuple[tuple[float, float], ...]  # (x, max abs deviation)
    tol: float

    @property
    def ok(self) -> bool:
        return all(err < self.tol for _, err in self.rows)

    def to_json(self) -> dict:
        return {"tol": self.tol, "ok": self.ok, "points": [{"x": x, "max_abs_err": e} for x, e in self.rows]}


def parametric_check(x_grid: Sequence[float], tol: float = 1e-8) -> ParametricReport:
    rows = []
    for x in x_grid:
        got = perron_vector(RoutingMatrix(EXAMPLE_LABELS, example_matrix(x))).x
        rows.append((float(x), float(np.max(np.abs(got - example_prediction(x))))))
    return ParametricReport(tuple(rows), tol)


# -- simulation cross-check -------------------------------------------------------------

@dataclass(frozen=True)
class SimComparison:
    x: dict[str, float]
    rates: dict[str, float]
    scale: dict[str, float]  # rate / x per transition: the timing-dependent constant
    max_rel_err: float
    invariant_residual: float  # max |N rates| / max rate
    residual: float
    spectral_radius: float

    def to_json(self) -> dict:
        return {
            "x": self.x,
            "residual": self.residual,
            "spectral_radius": self.spectral_radius,
            "sim_ratios": {t: self.rates[t] / max(self.rates.values()) if max(self.rates.values()) else 0.0 for t in self.rates},
            "rates": self.rates,
            "scale": self.scale,
            "max_rel_err": self.max_rel_err,
            "invariant_residual": self.invariant_residual,
        }


def ratio_error(rates: dict[str, float], x: dict[str, float]) -> float:
    """Max over ordered pairs of ``|rate_a/rate_b - x_a/x_b| / (x_a/x_b)``."""
    worst = 0.0
    for a in x:
        for b in x:
            if a == b:
                continue
            if rates[b] == 0:
                return math.inf
            pred = x[a] / x[b]
            worst = max(worst, abs(rates[a] / rates[b] - pred) / pred)
    return worst


def compare_sim(net: PetriNet, routing: RoutingSpec, timing, horizon: float, seed: int = 0,
                max_events: Optional[int] = None) -> SimComparison:
    """Simulate and compare empirical throughput ratios with the Perron vector.

    Runs until ``horizon`` time units, or for ``max_events`` completions when
    given (rates are then measured at the final clock).
    """
    from .timed import SimConfig, simulate, throughput_estimate

    tv = perron_vector(build_R(net, routing))
    if max_events is not None:
        res = simulate(net, routing, timing, SimConfig(seed=seed, max_events=max_events))
        horizon = res.state.clock
    else:
        res = simulate(net, routing, timing, SimConfig(seed=seed, horizon=horizon))
    rates = throughput_estimate(res.log, horizon).rates
    x = tv.as_dict()
    lam = np.array([rates[t] for t in net.transitions])
    top = lam.max() if lam.size else 0.0
    inv = float(np.max(np.abs(incidence(net) @ lam)) / top) if top > 0 else math.inf
    scale = {t: rates[t] / x[t] for t in net.transitions}
    return SimComparison(x, rates, scale, ratio_error(rates, x), inv, tv.residual, tv.spectral_radius)
