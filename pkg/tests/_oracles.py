"""Independent brute-force oracles used to freeze expected values.

These deliberately avoid the library's solution paths: basic-feasible-point
enumeration for LPs, deterministic-policy enumeration with per-class
stationary distributions for the stationary LP value, and exhaustive
noise-sequence expansion for short-horizon plan values.
"""

from itertools import combinations, product

import numpy as np

from occulimits.model import transition


def bfs_enumeration_optimum(c, A, b, feas_tol=1e-9):
    """Optimal value of min c'x, Ax=b, x>=0 by enumerating basic solutions."""
    m, n = A.shape
    cols_list = list(combinations(range(n), m))
    bases = np.stack([A[:, cols] for cols in cols_list])
    dets = np.linalg.det(bases)
    col_norms = np.maximum(np.linalg.norm(bases, axis=1), 1e-30)  # (K, m)
    scale = np.prod(col_norms, axis=1)
    keep = np.abs(dets) > 1e-9 * scale
    best = np.inf
    if keep.any():
        rhs = np.broadcast_to(np.asarray(b)[:, None], (int(keep.sum()), m, 1))
        sols = np.linalg.solve(bases[keep], rhs)[:, :, 0]
        feas = np.all(sols >= -feas_tol, axis=1)
        kept_cols = [cols for cols, k in zip(cols_list, keep) if k]
        for cols, x_b, ok in zip(kept_cols, sols, feas):
            if ok:
                best = min(best, float(c[list(cols)] @ x_b))
    return best


def _recurrent_classes(P):
    """Recurrent classes of a stochastic matrix via reachability closure."""
    n = P.shape[0]
    closure = ((P > 1e-15) | np.eye(n, dtype=bool)).astype(int)
    for _ in range(int(np.ceil(np.log2(max(n, 2)))) + 1):
        closure = ((closure @ closure) > 0).astype(int)
    classes = []
    seen = set()
    for i in range(n):
        if i in seen:
            continue
        members = set(np.nonzero(closure[i] & closure[:, i])[0].tolist())
        # a communicating class is recurrent iff it cannot reach outside itself
        if all(set(np.nonzero(closure[j])[0].tolist()) <= members for j in members):
            classes.append(sorted(members))
        seen |= members
    return classes


def _class_average(P, costs, members):
    sub = P[np.ix_(members, members)]
    n = len(members)
    lhs = np.vstack([sub.T - np.eye(n), np.ones(n)])
    rhs = np.concatenate([np.zeros(n), [1.0]])
    nu, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    return float(nu @ costs[members])


def stationary_average_oracle(model):
    """min over deterministic stationary policies and their recurrent classes
    of the long-run average cost; equals the stationary LP value."""
    tensor = transition(model)
    rows = np.stack([tensor.row(p) for p in range(model.n_pairs)])
    best = np.inf
    for choice in product(*[range(len(cs)) for cs in model.controls]):
        pairs = [model.pair_index(i, l) for i, l in enumerate(choice)]
        P = rows[pairs]
        costs = model.pair_cost[pairs]
        for members in _recurrent_classes(P):
            best = min(best, _class_average(P, costs, members))
    return best


def brute_force_finite_horizon(model, y0, T):
    """min over all staged deterministic plans of the exact T-stage average,
    by expanding every noise sequence."""
    tensor = transition(model)
    n_atoms = len(model.noise)
    probs = [a.prob for a in model.noise]
    sels = list(product(*[range(len(cs)) for cs in model.controls]))
    best = np.inf
    for stages in product(sels, repeat=T):
        total = 0.0
        for seq in product(range(n_atoms), repeat=T):
            p_seq = 1.0
            y = y0
            cost = 0.0
            for t in range(T):
                local = stages[t][y]
                pair = model.pair_index(y, local)
                cost += model.pair_cost[pair]
                p_seq *= probs[seq[t]]
                y = int(tensor.next_idx[pair, seq[t]])
            total += p_seq * cost
        best = min(best, total / T)
    return best
