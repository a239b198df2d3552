"""Dynamic-programming oracles: finite-horizon average values v_T, discounted
values h_eps, greedy plan extraction from a potential, and exact plan
evaluation.

All argmins break ties by lowest control index, so every run is
deterministic.
"""

from dataclasses import dataclass

import numpy as np

from . import measures
from .model import transition

DEFAULT_VI_TOL = 1e-10
VI_ITERATION_CAP = 5_000_000


@dataclass
class ValueFunction:
    """A value per state, in cost units."""

    values: np.ndarray


@dataclass
class Plan:
    """A control plan.

    kind 'stationary_deterministic': selector is an int array with the chosen
    local control index per state.  kind 'stationary_randomized': selector is
    a per-state list of probability rows over that state's control list.
    kind 'staged': selector is a list of per-stage deterministic selectors,
    indexed by stage t = 0..T-1.
    """

    kind: str
    selector: object

    def check_against(self, model):
        sizes = [len(cs) for cs in model.controls]
        if self.kind == "stationary_deterministic":
            sel = np.asarray(self.selector)
            if sel.shape != (model.n_states,) or np.any(sel < 0) or np.any(sel >= sizes):
                raise ValueError("plan/model mismatch: bad deterministic selector")
        elif self.kind == "stationary_randomized":
            if len(self.selector) != model.n_states:
                raise ValueError("plan/model mismatch: one probability row per state required")
            for i, row in enumerate(self.selector):
                row = np.asarray(row)
                if row.shape != (sizes[i],) or np.any(row < 0):
                    raise ValueError(f"plan/model mismatch: bad probability row at state {i}")
                if abs(row.sum() - 1.0) > 1e-12:
                    raise ValueError(f"plan/model mismatch: row at state {i} sums to {row.sum()!r}")
        elif self.kind == "staged":
            for sel in self.selector:
                sel = np.asarray(sel)
                if sel.shape != (model.n_states,) or np.any(sel < 0) or np.any(sel >= sizes):
                    raise ValueError("plan/model mismatch: bad staged selector")
        else:
            raise ValueError(f"unknown plan kind {self.kind!r}")

    def pair_weights(self, model, t=0):
        """Conditional probability pi_t(u|y) laid out per admissible pair."""
        if self.kind == "stationary_randomized":
            return np.concatenate([np.asarray(row, dtype=float) for row in self.selector])
        if self.kind == "stationary_deterministic":
            sel = np.asarray(self.selector)
        else:
            sel = np.asarray(self.selector[t])
        w = np.zeros(model.n_pairs)
        w[model.state_pair_start[:-1] + sel] = 1.0
        return w


def _group_min(model, q):
    starts = model.state_pair_start[:-1]
    vmin = np.minimum.reduceat(q, starts)
    # lowest admissible control index among the minimizers
    cand = np.where(q <= vmin[model.pair_state], model.pair_local, model.n_pairs + 1)
    sel = np.minimum.reduceat(cand, starts)
    return vmin, sel.astype(np.int64)


def finite_horizon_values(model, T):
    """Backward recursion T v_T(y) = min_u {k(y,u) + (T-1) E[v_{T-1}(f(y,u,s))]}.

    Returns the whole curve v_1..v_T (one ValueFunction per horizon) and the
    staged argmin plan, whose forward evaluation reproduces v_T exactly.
    """
    if T < 1:
        raise ValueError(f"T={T} must be >= 1")
    tensor = transition(model)
    k = model.pair_cost
    v_prev = np.zeros(model.n_states)
    curve = []
    argmins = []
    for tau in range(1, T + 1):
        q = k + (tau - 1) * tensor.expect(v_prev)
        vmin, sel = _group_min(model, q)
        v_prev = vmin / tau
        curve.append(ValueFunction(values=v_prev))
        argmins.append(sel)
    plan = Plan(kind="staged", selector=list(reversed(argmins)))
    return curve, plan


def discounted_values(model, eps, tol=DEFAULT_VI_TOL):
    """Value iteration for h(y) = min_u {eps k(y,u) + (1-eps) E[h(f(y,u,s))]}.

    Stops when the successive sup-norm change is <= tol*eps, which bounds the
    fixed-point error by tol through the (1-eps) contraction.  Returns the
    converged values and the greedy stationary plan.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps={eps!r} outside (0, 1)")
    if tol <= 0:
        raise ValueError("tol must be positive")
    tensor = transition(model)
    k_eps = eps * model.pair_cost
    decay = 1.0 - eps
    stop = tol * eps
    h = np.zeros(model.n_states)
    for _ in range(VI_ITERATION_CAP):
        q = k_eps + decay * tensor.expect(h)
        h_new = np.minimum.reduceat(q, model.state_pair_start[:-1])
        delta = np.max(np.abs(h_new - h))
        h = h_new
        if delta <= stop:
            break
    else:
        raise RuntimeError("value iteration failed to converge within the iteration cap")
    q = k_eps + decay * tensor.expect(h)
    _, sel = _group_min(model, q)
    return ValueFunction(values=h), Plan(kind="stationary_deterministic", selector=sel)


def greedy_feedback_from_eta(model, eta):
    """u^f(y) = argmin_u {k(y,u) + E[eta(f(y,u,s))]}, lowest-index ties."""
    eta = np.asarray(eta, dtype=float)
    if not np.all(np.isfinite(eta)):
        raise ValueError("eta must be finite")
    tensor = transition(model)
    _, sel = _group_min(model, model.pair_cost + tensor.expect(eta))
    return Plan(kind="stationary_deterministic", selector=sel)


def evaluate_plan_average(model, plan, y0, T):
    """Exact T-stage expected average cost of a plan from state y0.

    Computed by distribution propagation: (1/T) sum_t sum_(y,u)
    mu_t(y) pi_t(u|y) k(y,u).
    """
    if plan.kind == "staged" and len(plan.selector) < T:
        raise ValueError(f"staged plan of length {len(plan.selector)} is shorter than T={T}")
    path = measures.propagate(model, plan, y0, T)
    total = 0.0
    for t in range(T):
        w = plan.pair_weights(model, t if plan.kind == "staged" else 0)
        total += float((path.mu[t][model.pair_state] * w) @ model.pair_cost)
    return total / T


def value_curve_csv_rows(model, curve, parameters=None):
    """Flatten value functions into (parameter, state label, value) rows.

    parameters defaults to the horizon index 1..T; pass the eps list when
    exporting a discounted sweep.
    """
    if parameters is None:
        parameters = range(1, len(curve) + 1)
    rows = []
    for param, vf in zip(parameters, curve):
        for i, sp in enumerate(model.states):
            label = ",".join(repr(c) for c in sp.coords)
            rows.append((param, label, float(vf.values[i])))
    return rows


def evaluate_plan_discounted(model, plan, y0, eps, tail_tol=1e-12):
    """Normalized expected discounted cost of a plan, via its discounted
    occupational measure (identity between the cost series and the measure
    integral)."""
    gamma_d = measures.discounted_occupation(model, plan, y0, eps, tail_tol)
    return float(gamma_d.weights @ model.pair_cost)
