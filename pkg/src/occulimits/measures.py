"""Occupational measures by exact distribution propagation, the measure
metric rho with its finite-set Hausdorff distance, and detection of plans
whose joint state-control law becomes periodic.

No sampling anywhere: state laws are propagated through the transition
tensor, so every measure identity holds to float precision.
"""

from dataclasses import dataclass

import numpy as np

from .model import transition
from .programs import GMeasure


@dataclass
class DistributionPath:
    """State laws mu[t], t = 0..T, under a plan started from a point mass."""

    mu: np.ndarray  # (T+1, n_states)


@dataclass
class TestFamily:
    """Ordered value tables over admissible pairs, each with sup-norm <= 1."""

    tables: list

    def __len__(self):
        return len(self.tables)


@dataclass
class PrgReport:
    is_prg: bool
    T0: int | None = None
    period: int | None = None


def _stage_pair_weights(model, plan, t):
    if plan.kind == "staged":
        if t >= len(plan.selector):
            raise ValueError(f"staged plan of length {len(plan.selector)} "
                             f"cannot be evaluated at stage {t}")
        return plan.pair_weights(model, t)
    return plan.pair_weights(model, 0)


def propagate(model, plan, y0, T):
    """Exact state laws mu_0..mu_T from the point mass at state y0.

    mu_{t+1}(y') = sum_y mu_t(y) sum_u pi_t(u|y) P(y'|y,u).
    """
    plan.check_against(model)
    tensor = transition(model)
    mu = np.zeros((T + 1, model.n_states))
    mu[0, y0] = 1.0
    for t in range(T):
        w = _stage_pair_weights(model, plan, t)
        mu[t + 1] = tensor.push(mu[t][model.pair_state] * w)
    return DistributionPath(mu=mu)


def occupation_measure(model, plan, y0, T):
    """Expected empirical pair distribution over horizon T (total mass 1)."""
    path = propagate(model, plan, y0, T)
    weights = np.zeros(model.n_pairs)
    for t in range(T):
        w = _stage_pair_weights(model, plan, t)
        weights += path.mu[t][model.pair_state] * w
    return GMeasure(weights=weights / T)


def discounted_occupation(model, plan, y0, eps, tail_tol):
    """(1-eps)-geometrically weighted pair distribution, eps-normalized.

    The infinite sum is truncated once the remaining geometric tail mass
    drops below tail_tol, then renormalized to total mass 1.  Staged plans
    are summed over their explicit horizon.
    """
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps={eps!r} outside (0, 1)")
    if tail_tol <= 0:
        raise ValueError("tail_tol must be positive")
    plan.check_against(model)
    tensor = transition(model)
    if plan.kind == "staged":
        horizon = len(plan.selector)
    else:
        horizon = max(1, int(np.ceil(np.log(tail_tol) / np.log1p(-eps))))
    mu = np.zeros(model.n_states)
    mu[y0] = 1.0
    weights = np.zeros(model.n_pairs)
    coeff = eps
    for t in range(horizon):
        w = _stage_pair_weights(model, plan, t)
        pair_mass = mu[model.pair_state] * w
        weights += coeff * pair_mass
        if (1.0 - eps) ** (t + 1) < tail_tol and plan.kind != "staged":
            break
        mu = tensor.push(pair_mass)
        coeff *= 1.0 - eps
    return GMeasure(weights=weights / weights.sum())


def canonical_test_family(model, max_degree=3, max_size=32):
    """Tensor-product monomials in (y, u) of total degree <= max_degree.

    Enumerated in graded lexicographic order, each table normalized by its
    sup-norm over the admissible pairs; identically-zero monomials are
    skipped.  Truncated at max_size functions.
    """
    d_y = len(model.states[0].coords)
    d_u = len(model.controls[0][0])
    y_table = np.array([model.states[int(s)].coords for s in model.pair_state])
    u_table = np.array([model.control_value(int(model.pair_state[p]), int(model.pair_local[p]))
                        for p in range(model.n_pairs)])
    coords = np.hstack([y_table, u_table])  # (n_pairs, d_y + d_u)
    d = d_y + d_u
    tables = []
    for total in range(max_degree + 1):
        for expo in sorted(_compositions(total, d), reverse=True):
            vals = np.prod(coords ** np.array(expo), axis=1)
            sup = np.max(np.abs(vals))
            if sup < 1e-300:
                continue
            tables.append(vals / sup)
            if len(tables) == max_size:
                return TestFamily(tables=tables)
    return TestFamily(tables=tables)


def _compositions(total, parts):
    if parts == 1:
        return [(total,)]
    out = []
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            out.append((head,) + rest)
    return out


def rho(g1, g2, fam):
    """Weighted sum of test-function moment gaps, sum_j 2^-j |int q_j d(g1-g2)|."""
    if len(fam) == 0:
        raise ValueError("empty test family")
    diff = np.asarray(g1.weights) - np.asarray(g2.weights)
    return float(sum(abs(float(q @ diff)) / 2.0 ** (j + 1)
                     for j, q in enumerate(fam.tables)))


def hausdorff(set_a, set_b, fam):
    """max of the two directed sup-inf rho distances between finite sets."""
    if not set_a or not set_b:
        raise ValueError("hausdorff needs nonempty sets")
    d_ab = max(min(rho(a, b, fam) for b in set_b) for a in set_a)
    d_ba = max(min(rho(b, a, fam) for a in set_a) for b in set_b)
    return max(d_ab, d_ba)


def prg_detect(model, plan, y0, t_max, tol=1e-10):
    """Find the smallest (T0, period) making the joint pair law periodic.

    Scans the exact laws L_t(y,u) = mu_t(y) pi_t(u|y) for the lexicographically
    smallest (T0, period) with T0 + 2*period <= t_max such that
    ||L_{t+period} - L_t||_inf <= tol for every T0 <= t <= t_max - period.
    On a finite grid the indicator test functions span every q, so this is
    sufficient for periodic-regime generation.  Staged plans are cycled.
    """
    if t_max < 2:
        raise ValueError(f"t_max={t_max} must be at least 2")
    plan.check_against(model)
    tensor = transition(model)
    n_stages = len(plan.selector) if plan.kind == "staged" else 1
    laws = np.zeros((t_max + 1, model.n_pairs))
    mu = np.zeros(model.n_states)
    mu[y0] = 1.0
    for t in range(t_max + 1):
        w = plan.pair_weights(model, t % n_stages)
        laws[t] = mu[model.pair_state] * w
        mu = tensor.push(laws[t])
    # earliest valid start per period, via suffix maxima of the lag-diffs
    best = None
    for period in range(1, t_max // 2 + 1):
        diffs = np.max(np.abs(laws[period:] - laws[:-period]), axis=1)
        ok = diffs <= tol
        suffix_ok = np.flip(np.logical_and.accumulate(np.flip(ok)))
        starts = np.nonzero(suffix_ok)[0]
        if len(starts) and starts[0] + 2 * period <= t_max:
            cand = (int(starts[0]), period)
            if best is None or cand < best:
                best = cand
    if best is None:
        return PrgReport(is_prg=False)
    return PrgReport(is_prg=True, T0=best[0], period=best[1])
