"""Patch-level optimal transport between image and audio embeddings.

Builds a cosine-distance cost over cross-modal embedding pairs, solves for
a transport plan with a proximal Sinkhorn iteration (outer re-kerneling by
the previous plan, inner row/column scalings), and exposes the transport
objective as a differentiable loss. An exact small-instance solver that
enumerates basic feasible solutions of the transportation polytope serves
as the independent oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from avalign import tensor as T
from avalign.tensor import Tensor

__all__ = [
    "DiscreteDistribution",
    "CostMatrix",
    "TransportPlan",
    "SinkhornConfig",
    "SinkhornError",
    "SinkhornConvergenceError",
    "SinkhornUnderflowError",
    "build_cost",
    "sinkhorn_plan",
    "exact_ot",
    "ot_loss",
    "uniform_weights",
]


class SinkhornError(ValueError):
    pass


class SinkhornConvergenceError(SinkhornError):
    """Iteration budget exhausted before marginals met tolerance."""

    def __init__(self, message: str, violation: float):
        super().__init__(message)
        self.violation = violation


class SinkhornUnderflowError(SinkhornError):
    """Kernel row or column lost entirely to exp underflow."""


def uniform_weights(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def _check_weights(w, n: int, name: str) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"{name} must have length {n}, got shape {w.shape}")
    if np.any(w < 0):
        raise ValueError(f"{name} has negative entries")
    if abs(w.sum() - 1.0) > 1e-12:
        raise ValueError(f"{name} must sum to 1 within 1e-12, got {w.sum()!r}")
    return w


@dataclass(frozen=True)
class DiscreteDistribution:
    """Weighted point masses over embedding rows (one Dirac per row)."""

    support: Tensor
    weights: np.ndarray

    def __post_init__(self):
        if self.support.ndim != 2:
            raise ValueError("support must be an MxD tensor")
        object.__setattr__(
            self, "weights",
            _check_weights(self.weights, self.support.shape[0], "weights"),
        )

    @classmethod
    def uniform(cls, support: Tensor) -> "DiscreteDistribution":
        return cls(support, uniform_weights(support.shape[0]))


@dataclass(frozen=True)
class CostMatrix:
    """Cross-modal cost, entry (k,l) = 1 - cosine similarity, in [0, 2]."""

    entries: Tensor

    def __post_init__(self):
        e = self.entries.data
        if self.entries.ndim != 2:
            raise ValueError("cost matrix must be 2-D")
        if e.min() < -1e-12 or e.max() > 2.0 + 1e-12:
            raise ValueError("cost entries must lie in [0, 2]")

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


@dataclass(frozen=True)
class TransportPlan:
    """Non-negative coupling whose marginals match the two weight vectors."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 2 or np.any(e < 0):
            raise ValueError("plan must be a non-negative 2-D array")
        object.__setattr__(self, "entries", e)

    def marginal_violation(self, u, v) -> float:
        row = np.abs(self.entries.sum(axis=1) - np.asarray(u)).max()
        col = np.abs(self.entries.sum(axis=0) - np.asarray(v)).max()
        return float(max(row, col))

    def nonzeros(self, tol: float = 1e-12) -> int:
        return int(np.count_nonzero(self.entries > tol))


@dataclass(frozen=True)
class SinkhornConfig:
    # inner_steps >= 20 keeps each outer step close to a true proximal step,
    # which is what makes the per-step distance trace non-increasing
    beta: float = 0.5
    outer_steps: int = 5000
    inner_steps: int = 20
    marginal_tolerance: float = 1e-6
    max_total_iterations: int = 200_000

    def __post_init__(self):
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.outer_steps < 1 or self.inner_steps < 1:
            raise ValueError("step counts must be positive")
        if self.marginal_tolerance <= 0:
            raise ValueError("marginal_tolerance must be positive")
        if self.max_total_iterations < 1:
            raise ValueError("max_total_iterations must be positive")


def build_cost(z_img: Tensor, z_aud: Tensor) -> CostMatrix:
    """Cost C[k,l] = 1 - cos(z_img[k], z_aud[l]); rejects zero-norm rows."""
    sim = T.cosine_similarity_matrix(z_img, z_aud)
    one = Tensor(np.ones(sim.shape))
    cost = T.sub(one, sim)
    # cosine roundoff can leave entries a hair outside [0, 2]
    clipped = np.clip(cost.data, 0.0, 2.0)
    if cost.tape is not None:
        return CostMatrix(cost)
    return CostMatrix(Tensor(clipped))


def _reduced_kernel(cost: np.ndarray, beta: float) -> np.ndarray:
    # Row/column scalings of the kernel are absorbed by the Sinkhorn
    # scalings, so subtracting row minima then column minima leaves the
    # converged plan unchanged while guaranteeing every row and column
    # keeps an exp(0) = 1 anchor at any beta.
    reduced = cost - cost.min(axis=1, keepdims=True)
    reduced = reduced - reduced.min(axis=0, keepdims=True)
    kernel = np.exp(-reduced / beta)
    if np.any(kernel.max(axis=1) == 0.0) or np.any(kernel.max(axis=0) == 0.0):
        raise SinkhornUnderflowError(
            f"kernel row/column fully underflowed at beta={beta}"
        )
    return np.maximum(kernel, 1e-300)


# Decay factors below this exceed 64-bit dynamic range for costs in [0, 2]:
# route preferences exp(-dC/beta) collapse to ties at the underflow floor and
# the iteration can lock onto a suboptimal vertex. The proximal outer loop
# converges to the unregularized optimum for any decay factor, so clamping
# costs nothing in accuracy (about 1e-7 against the exact oracle).
BETA_FLOOR = 0.1


def sinkhorn_plan(
    cost: CostMatrix,
    u: np.ndarray | None = None,
    v: np.ndarray | None = None,
    cfg: SinkhornConfig = SinkhornConfig(),
    return_trace: bool = False,
):
    """Proximal Sinkhorn solve of the transport problem on ``cost``.

    Per outer step the kernel is re-weighted by the current plan
    (Q = kernel * plan), then ``inner_steps`` alternating scalings push the
    marginals toward the weight vectors, then the plan is refreshed as
    diag(d) Q diag(s). The returned distance is the Frobenius inner product
    <C^T, plan>. Uniform weights are used when ``u``/``v`` are omitted;
    with uniform weights the scalings reduce to the 1/k form.

    Iteration stops early once the worst marginal violation is below
    ``cfg.marginal_tolerance`` and the plan is stationary to the same
    tolerance (marginal feasibility alone is reached long before the
    proximal refinement has converged). Budget exhaustion raises
    ``SinkhornConvergenceError`` carrying the final violation. Requested
    decay factors are clamped at ``BETA_FLOOR`` from below, see note above.

    Returns ``(TransportPlan, distance)``; with ``return_trace=True`` a
    third element carries the per-outer-step distances.
    """
    c = cost.entries.data
    m, n = c.shape
    u = uniform_weights(m) if u is None else _check_weights(u, m, "u")
    v = uniform_weights(n) if v is None else _check_weights(v, n, "v")

    kernel = _reduced_kernel(c, max(cfg.beta, BETA_FLOOR))
    plan = np.ones((m, n))
    sigma = v.copy()
    trace: list[float] = []
    used = 0
    converged = False
    violation = np.inf

    for _ in range(cfg.outer_steps):
        q = kernel * plan
        # row/col rescaling is absorbed by the scaling vectors; renormalizing
        # each outer step keeps entry ratios representable, and the floor
        # keeps crushed routes revivable (an exact 0 could never receive
        # mass again)
        q = q / q.max(axis=1, keepdims=True)
        q = q / q.max(axis=0, keepdims=True)
        q = np.maximum(q, 1e-300)
        for _ in range(cfg.inner_steps):
            delta = u / np.maximum(q @ sigma, 1e-300)
            sigma = v / np.maximum(q.T @ delta, 1e-300)
            used += 1
        new_plan = delta[:, None] * q * sigma[None, :]
        trace.append(float((c.T * new_plan.T).sum()))
        row = np.abs(new_plan.sum(axis=1) - u).max()
        col = np.abs(new_plan.sum(axis=0) - v).max()
        violation = max(row, col)
        change = np.abs(new_plan - plan).max()
        plan = new_plan
        if violation < cfg.marginal_tolerance and change < cfg.marginal_tolerance:
            converged = True
            break
        if used >= cfg.max_total_iterations:
            break

    if not converged:
        raise SinkhornConvergenceError(
            f"no convergence within budget: marginal violation {violation:.3e} "
            f"after {used} inner iterations",
            violation=float(violation),
        )
    result = TransportPlan(plan)
    distance = float((c.T * plan.T).sum())
    if return_trace:
        return result, distance, trace
    return result, distance


def _tree_flow(m: int, n: int, edges, u, v):
    """Solve the spanning-tree flow; None if any basic value is negative."""
    adj: dict[int, list[tuple[int, int]]] = {k: [] for k in range(m + n)}
    for idx, (i, j) in enumerate(edges):
        a, b = i, m + j
        adj[a].append((b, idx))
        adj[b].append((a, idx))
    supply = np.concatenate([u, -np.asarray(v)])
    flows = np.zeros(len(edges))
    degree = {k: len(adj[k]) for k in range(m + n)}
    removed = [False] * len(edges)
    leaves = [k for k, d in degree.items() if d == 1]
    resid = supply.astype(np.float64).copy()
    while leaves:
        leaf = leaves.pop()
        live = [(nb, idx) for nb, idx in adj[leaf] if not removed[idx]]
        if not live:
            continue
        nb, idx = live[0]
        # flow on the leaf edge is forced by the leaf's residual supply
        amount = resid[leaf] if leaf < m else -resid[leaf]
        flows[idx] = amount
        if amount < -1e-12:
            return None
        resid[nb] += resid[leaf]
        resid[leaf] = 0.0
        removed[idx] = True
        degree[nb] -= 1
        if degree[nb] == 1:
            leaves.append(nb)
    return flows


def exact_ot(cost: CostMatrix, u: np.ndarray | None = None, v: np.ndarray | None = None):
    """Exact transport optimum by enumerating basic feasible solutions.

    Every vertex of the transportation polytope corresponds to a spanning
    tree of the complete bipartite graph on the M sources and N sinks, so
    enumerating all (M+N-1)-edge spanning trees and keeping the feasible
    minimum is exact. Bounded to M + N <= 10.
    """
    c = cost.entries.data
    m, n = c.shape
    if m + n > 10:
        raise ValueError(f"exact_ot limited to M+N <= 10, got {m}+{n}")
    u = uniform_weights(m) if u is None else _check_weights(u, m, "u")
    v = uniform_weights(n) if v is None else _check_weights(v, n, "v")
    assert abs(u.sum() - v.sum()) < 1e-9, "balanced problem expected"

    all_edges = [(i, j) for i in range(m) for j in range(n)]
    best_cost = np.inf
    best_plan: np.ndarray | None = None
    n_nodes = m + n
    for edges in itertools.combinations(all_edges, n_nodes - 1):
        # spanning check via union-find before solving the flow
        parent = list(range(n_nodes))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        acyclic = True
        for i, j in edges:
            ra, rb = find(i), find(m + j)
            if ra == rb:
                acyclic = False
                break
            parent[ra] = rb
        if not acyclic:
            continue
        flows = _tree_flow(m, n, edges, u, v)
        if flows is None:
            continue
        total = sum(c[i, j] * f for (i, j), f in zip(edges, flows))
        if total < best_cost - 1e-15:
            best_cost = total
            plan = np.zeros((m, n))
            for (i, j), f in zip(edges, flows):
                plan[i, j] = max(f, 0.0)
            best_plan = plan
    if best_plan is None:
        raise AssertionError("no feasible basic solution found for valid weights")
    return TransportPlan(best_plan), float(best_cost)


def ot_loss(
    z_img: Tensor,
    z_aud: Tensor,
    cfg: SinkhornConfig = SinkhornConfig(),
    plan: TransportPlan | None = None,
) -> Tensor:
    """Transport objective <C^T, plan> with the plan held constant.

    The plan comes from a no-gradient Sinkhorn solve on the current cost
    (or is supplied frozen); gradients flow only through the cost matrix,
    the usual envelope treatment of the inner optimization.
    """
    if plan is None:
        frozen_cost = CostMatrix(
            Tensor(
                np.clip(
                    1.0
                    - T.cosine_similarity_matrix(
                        Tensor(z_img.data), Tensor(z_aud.data)
                    ).data,
                    0.0,
                    2.0,
                )
            )
        )
        plan, _ = sinkhorn_plan(frozen_cost, cfg=cfg)
    cost = build_cost(z_img, z_aud)
    return T.tsum(T.mul(cost.entries, Tensor(plan.entries)))
