"""Dimension-selection rules and collocation-parameter admissibility.

The discretization level n is the regularization parameter.  Three rules
are provided: an a priori choice n(delta) = floor(delta^(-theta/l)), the
discrepancy principle (stop at the first n whose residual falls below
b * delta), and, for the least error method on nested node families, the
monotone error rule driven by the index

    d_ME(n) = <v_{n+1} - v_n, f_delta> / (q ||v_{n+1} - v_n||),

where the dual-space norm of a Dirac combination is the sum of the
absolute weights.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .operators import DiracCombo

__all__ = ["RuleTrace", "SolverFailure", "MonotoneIndexUndefined",
           "tau_of_c", "check_collocation_params", "choose_n_apriori",
           "choose_n_discrepancy", "me_index", "choose_n_monotone_error"]


class SolverFailure(RuntimeError):
    """A per-n solve failed inside a rule sweep; carries the partial trace."""

    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


class MonotoneIndexUndefined(ValueError):
    """d_ME(n) is undefined because v_{n+1} = v_n."""


@dataclass
class RuleTrace:
    """Per-n record of a stopping rule: (n, criterion value, decision)."""

    rule_id: str
    records: list = field(default_factory=list)   # (n, value, stopped)
    chosen_n: int | None = None
    constant: float | None = None                 # b or theta

    @property
    def reached(self):
        return self.chosen_n is not None

    def add(self, n, value, stopped):
        self.records.append((n, float(value), bool(stopped)))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "criterion_value", "decision"])
            for n, value, stopped in self.records:
                writer.writerow([n, repr(value), "stop" if stopped else "continue"])


def tau_of_c(c):
    """Sup-to-node-max residual ratio constant of the c-collocation scheme.

    For linear splines with nodes (i-1+c)h and ih, 0.5 < c < 1:

        tau(c) = 1 + (4(y^2-y+1)^(3/2) - 4y^3 + 6y^2 + 6y - 4)
                     / (27 y^2 (2c-1)(1-c)),      y = c(-2c^3 + c^2 + 1),

    the maximum of the extremal cubic with unit node values.  Diverges at
    both ends of the interval (0.5, 1).
    """
    if not 0.5 < c < 1.0:
        raise ValueError("tau(c) requires 0.5 < c < 1 (denominator vanishes)")
    y = c * (-2.0 * c**3 + c**2 + 1.0)
    num = 4.0 * (y * y - y + 1.0) ** 1.5 - 4.0 * y**3 + 6.0 * y**2 + 6.0 * y - 4.0
    den = 27.0 * y * y * (2.0 * c - 1.0) * (1.0 - c)
    return 1.0 + num / den


@dataclass(frozen=True)
class AdmissibilityReport:
    product: float
    admissible: bool | None      # None = unknown (open problem for l > 2)
    criterion: str


def check_collocation_params(c, l):
    """Convergence admissibility of collocation parameters for the
    convolution kernel of order l.

    l = 1: admissible iff prod (1-c_j)/c_j < 1.
    l = 2: admissible iff c_k = 1 and prod_{j<k} (1-c_j)/c_j < 1.
    l > 2: unknown (open problem); the product over j < k is reported.
    """
    c = tuple(float(x) for x in c)
    if min(c) <= 0.0 or max(c) > 1.0 or any(b <= a for a, b in zip(c, c[1:])):
        raise ValueError("need 0 < c_1 < ... < c_k <= 1")
    if l == 1:
        prod = math.prod((1.0 - cj) / cj for cj in c)
        return AdmissibilityReport(prod, prod < 1.0, "prod (1-c)/c < 1")
    prod = math.prod((1.0 - cj) / cj for cj in c[:-1]) if len(c) > 1 else 0.0
    if l == 2:
        ok = c[-1] == 1.0 and prod < 1.0
        return AdmissibilityReport(prod, ok, "c_k = 1 and prod_{j<k} (1-c)/c < 1")
    return AdmissibilityReport(prod, None, "unknown for l > 2")


def choose_n_apriori(delta, l, theta):
    """n(delta) = max(1, floor(delta^(-theta/l))); satisfies n -> inf and
    n^l delta -> 0 as delta -> 0 for any 0 < theta < 1."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if l < 1:
        raise ValueError("l must be >= 1")
    return max(1, math.floor(delta ** (-theta / l)))


def choose_n_discrepancy(solve_at, delta, b, n_max, n_family=None):
    """First n in the family with residual <= b * delta.

    ``solve_at(n)`` must return a SolveResult with ``residual_C`` already
    populated (the rule compares the data-space residual against the
    threshold).  If no n in the family passes, the trace is returned with
    ``chosen_n = None`` ("not reached").
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if b <= 1:
        raise ValueError("discrepancy constant b must exceed 1")
    family = list(n_family) if n_family is not None else list(range(1, n_max + 1))
    trace = RuleTrace(rule_id="dp", constant=b)
    for n in family:
        try:
            result = solve_at(n)
        except Exception as exc:
            raise SolverFailure(f"solver failed at n = {n}: {exc}", trace) from exc
        d = result.residual_C
        if d is None:
            raise ValueError("solve_at must populate residual_C")
        stop = d <= b * delta
        trace.add(n, d, stop)
        if stop:
            trace.chosen_n = n
            break
    return trace


def me_index(v_n, v_next, f_delta_values, q):
    """d_ME(n) for consecutive least-error duals on nested node sets.

    ``f_delta_values`` holds the data at the nodes of ``v_next`` (a
    superset of the nodes of ``v_n``).  Nonnegative whenever the node sets
    nest; raises MonotoneIndexUndefined when the duals coincide.
    """
    if not isinstance(v_n, DiracCombo) or not isinstance(v_next, DiracCombo):
        raise TypeError("me_index expects DiracCombo duals")
    missing = np.setdiff1d(v_n.nodes, v_next.nodes)
    if missing.size:
        raise ValueError("node sets do not nest; monotone error rule "
                         "requires Z_n within Z_{n+1}")
    diff = v_next - v_n
    denom = diff.tv_norm()
    if denom == 0.0:
        raise MonotoneIndexUndefined("v_{n+1} equals v_n")
    f_delta_values = np.asarray(f_delta_values, dtype=float)
    idx = np.searchsorted(v_next.nodes, diff.nodes)
    pairing = float(diff.weights @ f_delta_values[idx])
    return pairing / (q * denom)


def choose_n_monotone_error(solve_at, delta, n_family, q):
    """Stop the least error method at the first n with delta > d_ME(n).

    ``solve_at(n)`` must return a SolveResult carrying the dual
    coefficients and, in ``diagnostics['f_nodes']``, the node data used.
    The family must be nested (e.g. dyadic endpoint collocation).  With
    exact data d_ME >= 0 never falls below delta = 0, so the trace ends
    "not reached".
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    family = list(n_family)
    trace = RuleTrace(rule_id="me", constant=delta)
    prev = None
    for n in family:
        try:
            result = solve_at(n)
        except Exception as exc:
            raise SolverFailure(f"solver failed at n = {n}: {exc}", trace) from exc
        if prev is not None:
            n_prev, dual_prev = prev
            d_me = me_index(dual_prev, result.dual,
                            result.diagnostics["f_nodes"], q)
            stop = delta > d_me
            trace.add(n_prev, d_me, stop)
            if stop:
                trace.chosen_n = n_prev
                return trace
        prev = (n, result.dual)
    return trace
