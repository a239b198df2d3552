"""Measure linear programs over a finite model: the stationary LP (k*), the
eps-discounted stationary LP (k*(eps, y0)), and the augmented two-layer LP
(k*(y0), optionally perturbed by a nonnegative xi-cost theta), together with
the dual certificate (mu, psi, eta).

Constraints use the per-state indicator basis, which is complete on a finite
grid, so the balance equations are exact:

    stationary      gamma_1(y') = sum P(y'|y,u) gamma(y,u),  sum gamma = 1
    discounted      gamma_1(y') = (1-eps) sum P(y'|y,u) gamma(y,u) + eps 1{y'=y0}
    augmented       stationary block for gamma, plus
                    xi_1(y') - sum P(y'|y,u) xi(y,u) + gamma_1(y') = 1{y'=y0}

Small instances go through the in-package dense simplex kernel; instances
whose dense tableau would be unreasonable are handed to scipy's HiGHS behind
the same result contract.  Dual sign conventions are fixed so the certificate
satisfies the inequality families

    k(y,u) + (psi(y0) - psi(y)) + E[eta(f(y,u,s))] - eta(y) - mu >= 0
    E[psi(f(y,u,s))] - psi(y) >= -theta(y,u)

literally; the certificate is re-checked post-solve rather than trusted.
"""

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import lp_core
from .model import transition

DENSE_CELL_LIMIT = 2_000_000
CERT_TOL = 1e-7
MASS_TOL = 1e-9


class SolverError(RuntimeError):
    """LP backend failure or an infeasible/unbounded measure program."""


@dataclass
class GMeasure:
    """Nonnegative measure on the graph G, one weight per admissible pair."""

    weights: np.ndarray

    @property
    def total_mass(self):
        return float(np.sum(self.weights))

    def integrate(self, table):
        return float(np.asarray(table) @ self.weights)

    def support(self, tol=1e-12):
        return np.nonzero(self.weights > tol)[0]

    def to_json_entries(self, model, tol=1e-12):
        return [{"state": list(model.states[int(model.pair_state[p])].coords),
                 "control": list(model.control_value(int(model.pair_state[p]),
                                                     int(model.pair_local[p]))),
                 "weight": float(self.weights[p])}
                for p in self.support(tol)]


@dataclass
class DualCertificate:
    """Triplet (mu, psi, eta) feasible for the augmented dual."""

    mu: float
    psi: np.ndarray
    eta: np.ndarray

    def violations(self, model, y0, theta=None):
        """Worst violation of each certificate inequality family."""
        tensor = transition(model)
        s = model.pair_state
        slack1 = (model.pair_cost + (self.psi[y0] - self.psi[s])
                  + tensor.expect(self.eta) - self.eta[s] - self.mu)
        theta_pair = np.zeros(model.n_pairs) if theta is None else np.asarray(theta, dtype=float)
        slack2 = tensor.expect(self.psi) - self.psi[s] + theta_pair
        return (float(max(0.0, -slack1.min(initial=0.0))),
                float(max(0.0, -slack2.min(initial=0.0))))


@dataclass
class ProgramResult:
    """Solved measure program: value, optimizers and dual objects."""

    optimal_value: float
    gamma: GMeasure
    xi: GMeasure | None
    dual: DualCertificate | None
    status: str = "optimal"

    def to_json_dict(self, model):
        doc = {
            "value": self.optimal_value,
            "status": self.status,
            "gamma": self.gamma.to_json_entries(model),
        }
        if self.xi is not None:
            doc["xi"] = self.xi.to_json_entries(model)
            doc["xi_mass"] = self.xi.total_mass
        if self.dual is not None:
            doc["dual"] = {"mu": self.dual.mu,
                           "psi": list(map(float, self.dual.psi)),
                           "eta": list(map(float, self.dual.eta))}
        return doc


def _kernel_triplets(model):
    """(state_row, pair_col, prob) entries of the pair-to-state transition map."""
    tensor = transition(model)
    return tensor.triplets()


def _solve_equalities(c, rows, cols, vals, b, n_cols, context):
    """min c'x, sum of triplet entries x = b, x >= 0; returns (x, y, objective).

    Routes through the dense kernel when the tableau fits, otherwise through
    HiGHS on a sparse matrix; both paths return exact-convention duals
    (c - A'y >= 0 at the optimum).
    """
    m = len(b)
    if m * n_cols <= DENSE_CELL_LIMIT:
        A = np.zeros((m, n_cols))
        np.add.at(A, (rows, cols), vals)
        sol = lp_core.solve_lp(lp_core.LinearProgram(c=c, A=A, b=b))
        if sol.status != "optimal":
            raise SolverError(f"{context}: LP reported {sol.status} "
                              f"(phase-1 multipliers {sol.y_dual!r})")
        return sol.x, sol.y_dual, sol.objective
    A = sparse.coo_matrix((vals, (rows, cols)), shape=(m, n_cols)).tocsc()
    res = linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise SolverError(f"{context}: HiGHS reported {res.message!r}")
    x, y = res.x, res.eqlin.marginals
    residual = np.max(np.abs(A @ x - b))
    gap = abs(c @ x - b @ y)
    if residual > 1e-7 * (1 + np.max(np.abs(b))) or gap > 1e-6 * (1 + abs(c @ x)):
        raise SolverError(f"{context}: HiGHS solution failed the certificate "
                          f"(residual={residual:.3e}, gap={gap:.3e})")
    return x, y, float(c @ x)


def stationary_lp(model):
    """min int k dgamma over the stationary set W; returns k* and a dual.

    The returned certificate has psi = 0 (the stationary problem's dual only
    involves eta and the scalar mu).
    """
    n, n_pairs = model.n_states, model.n_pairs
    t_rows, t_cols, t_vals = _kernel_triplets(model)
    rows = np.concatenate([model.pair_state, t_rows, np.full(n_pairs, n)])
    cols = np.concatenate([np.arange(n_pairs), t_cols, np.arange(n_pairs)])
    vals = np.concatenate([np.ones(n_pairs), -t_vals, np.ones(n_pairs)])
    b = np.zeros(n + 1)
    b[n] = 1.0
    x, y, obj = _solve_equalities(model.pair_cost, rows, cols, vals, b,
                                  n_pairs, "stationary LP")
    cert = DualCertificate(mu=float(y[n]), psi=np.zeros(n), eta=np.array(y[:n]))
    _require_certificate(cert, model, 0, None, "stationary LP")
    return ProgramResult(optimal_value=obj, gamma=GMeasure(x), xi=None, dual=cert)


def discounted_stationary_lp(model, eps, y0):
    """min int k dgamma over W(eps, y0); the value equals the DP oracle h_eps(y0)."""
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps={eps!r} outside (0, 1)")
    n, n_pairs = model.n_states, model.n_pairs
    t_rows, t_cols, t_vals = _kernel_triplets(model)
    rows = np.concatenate([model.pair_state, t_rows])
    cols = np.concatenate([np.arange(n_pairs), t_cols])
    vals = np.concatenate([np.ones(n_pairs), -(1.0 - eps) * t_vals])
    b = np.zeros(n)
    b[y0] = eps
    x, _, obj = _solve_equalities(model.pair_cost, rows, cols, vals, b,
                                  n_pairs, f"discounted LP (eps={eps}, y0={y0})")
    return ProgramResult(optimal_value=obj, gamma=GMeasure(x), xi=None, dual=None)


def augmented_lp(model, y0, theta=None):
    """Two-layer LP over Omega(y0): min int k dgamma (+ int theta dxi).

    Block 1 is gamma-stationarity with normalization, block 2 anchors the
    deviation measure xi at the initial state.  The dual multipliers are read
    off as eta (block 1), psi (block 2) and mu (normalization row shifted by
    psi(y0)), and the resulting certificate is verified before returning.
    """
    n, n_pairs = model.n_states, model.n_pairs
    theta_pair = None
    if theta is not None:
        theta_pair = np.asarray(theta, dtype=float)
        if theta_pair.shape != (n_pairs,):
            raise ValueError(f"theta must have one entry per admissible pair "
                             f"({n_pairs}), got shape {theta_pair.shape}")
        if theta_pair.min(initial=0.0) < 0 or not np.all(np.isfinite(theta_pair)):
            raise ValueError("theta must be nonnegative and bounded")
    t_rows, t_cols, t_vals = _kernel_triplets(model)
    arange = np.arange(n_pairs)
    rows = np.concatenate([
        model.pair_state, t_rows, np.full(n_pairs, n),       # gamma block
        n + 1 + model.pair_state, n + 1 + t_rows,            # xi block
        n + 1 + model.pair_state,                            # gamma marginal in xi block
    ])
    cols = np.concatenate([
        arange, t_cols, arange,
        n_pairs + arange, n_pairs + t_cols,
        arange,
    ])
    vals = np.concatenate([
        np.ones(n_pairs), -t_vals, np.ones(n_pairs),
        np.ones(n_pairs), -t_vals,
        np.ones(n_pairs),
    ])
    b = np.zeros(2 * n + 1)
    b[n] = 1.0
    b[n + 1 + y0] = 1.0
    c = np.concatenate([model.pair_cost,
                        np.zeros(n_pairs) if theta_pair is None else theta_pair])
    x, y, obj = _solve_equalities(c, rows, cols, vals, b, 2 * n_pairs,
                                  f"augmented LP (y0={y0})")
    eta = np.array(y[:n])
    psi = np.array(y[n + 1:])
    cert = DualCertificate(mu=float(y[n] + psi[y0]), psi=psi, eta=eta)
    _require_certificate(cert, model, y0, theta_pair, f"augmented LP (y0={y0})")
    return ProgramResult(optimal_value=obj, gamma=GMeasure(x[:n_pairs]),
                         xi=GMeasure(x[n_pairs:]), dual=cert)


def _require_certificate(cert, model, y0, theta_pair, context):
    v1, v2 = cert.violations(model, y0, theta_pair)
    if max(v1, v2) > CERT_TOL:
        raise SolverError(f"{context}: dual certificate violated "
                          f"(families {v1:.3e}, {v2:.3e})")


def _marginal(model, weights):
    out = np.zeros(model.n_states)
    np.add.at(out, model.pair_state, weights)
    return out


def membership_residuals(model, gamma, kind, eps=None, y0=None, xi=None):
    """Max-norm residual of the balance equations defining W, W(eps,y0) or
    Omega(y0); 0 within tolerance means membership.

    For the probability sets the mass defect |total-1| is included in the
    max.  For Omega both constraint blocks are evaluated (pass xi).
    """
    w = np.asarray(gamma.weights if isinstance(gamma, GMeasure) else gamma, dtype=float)
    if w.shape != (model.n_pairs,):
        raise ValueError(f"measure has {w.shape} weights, model has {model.n_pairs} pairs")
    tensor = transition(model)
    marg = _marginal(model, w)
    pushed = tensor.push(w)
    mass_defect = abs(float(w.sum()) - 1.0)
    if kind == "W":
        return float(max(np.max(np.abs(marg - pushed)), mass_defect))
    if kind == "W_eps":
        if eps is None or y0 is None:
            raise ValueError("W_eps needs eps and y0")
        r = marg - (1.0 - eps) * pushed
        r[y0] -= eps
        return float(max(np.max(np.abs(r)), mass_defect))
    if kind == "Omega":
        if xi is None or y0 is None:
            raise ValueError("Omega needs xi and y0")
        wx = np.asarray(xi.weights if isinstance(xi, GMeasure) else xi, dtype=float)
        if wx.shape != (model.n_pairs,):
            raise ValueError(f"xi has {wx.shape} weights, model has {model.n_pairs} pairs")
        r2 = _marginal(model, wx) - tensor.push(wx) + marg
        r2[y0] -= 1.0
        return float(max(np.max(np.abs(marg - pushed)), np.max(np.abs(r2)), mass_defect))
    raise ValueError(f"unknown membership kind {kind!r}")
