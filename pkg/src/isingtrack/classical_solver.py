"""Minimum-norm least-squares solve of ``A S = b`` and thresholding.

``A`` is block diagonal once its rows are grouped by connected component of
the coupling graph, and the pseudo-inverse of a block-diagonal matrix is the
block diagonal of the blocks' pseudo-inverses. Each block is solved with its
own SVD; the rank cutoff ``N * sigma_max * 1e-12`` uses the global
``sigma_max`` so the result equals the pseudo-inverse of the whole matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .doublet_graph import build_graph
from .errors import DegenerateBatchError
from .event_model import Event
from .ising_model import Hyperparams, IsingSystem, assemble

RCOND = 1e-12
GAP_WINDOW = (0.0, 1.2)
DISTINCT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class RelaxedSolution:
    s: np.ndarray
    residual_norm: float
    threshold: Optional[float] = None
    active: Optional[np.ndarray] = None

    def thresholded(self, threshold: float) -> "RelaxedSolution":
        return replace(self, threshold=threshold, active=apply_threshold(self.s, threshold))


def apply_threshold(s, threshold: float) -> np.ndarray:
    """On iff ``s_i > threshold``; the boundary value is off."""
    return (np.asarray(s, dtype=float) > threshold).astype(int)


def block_components(a: sp.spmatrix) -> list[np.ndarray]:
    """Index sets of the diagonal blocks of a symmetric sparse matrix."""
    n = a.shape[0]
    if n == 0:
        return []
    n_comp, labels = connected_components(a, directed=False)
    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    return np.split(order, bounds)


def pinv_solve(a: sp.spmatrix, b: np.ndarray) -> np.ndarray:
    """``A^+ b`` via per-block SVD with a global relative cutoff."""
    a = sp.csr_matrix(a)
    n = a.shape[0]
    x = np.zeros(n)
    if n == 0:
        return x
    blocks = []
    sigma_max = 0.0
    for idx in block_components(a):
        u, sv, vt = np.linalg.svd(a[idx][:, idx].toarray())
        blocks.append((idx, u, sv, vt))
        if sv.size:
            sigma_max = max(sigma_max, float(sv[0]))
    cutoff = n * sigma_max * RCOND
    for idx, u, sv, vt in blocks:
        keep = sv > cutoff
        if not np.any(keep):
            continue
        coeff = (u[:, keep].T @ b[idx]) / sv[keep]
        x[idx] = vt[keep].T @ coeff
    return x


def solve_least_squares(system: IsingSystem) -> RelaxedSolution:
    """Solve the unpadded block of ``system``; padding is a quantum-path concern."""
    system = system.unpadded()
    s = pinv_solve(system.a, system.b)
    residual = float(np.linalg.norm(system.a @ s - system.b))
    return RelaxedSolution(s, residual)


def solve_event(event: Event, hp: Hyperparams = Hyperparams(), mode: str = "step", max_skip: int = 0):
    graph = build_graph(event, hp.epsilon, hp.lam, max_skip)
    system = assemble(graph, hp, mode)
    return graph, system, solve_least_squares(system).thresholded(hp.threshold)


def distinct_values(values: Iterable[float], tol: float = DISTINCT_TOL) -> np.ndarray:
    """Sorted values with runs closer than ``tol`` collapsed to their first member."""
    v = np.sort(np.asarray(list(values), dtype=float))
    if v.size == 0:
        return v
    keep = np.concatenate([[True], np.diff(v) > tol])
    return v[keep]


def gap_midpoint(values: Sequence[float], window: tuple[float, float] = GAP_WINDOW) -> Optional[float]:
    """Midpoint of the widest gap between consecutive distinct values in ``window``.

    ``None`` when fewer than two distinct values fall inside the window.
    """
    v = distinct_values(x for x in values if window[0] <= x <= window[1])
    if v.size < 2:
        return None
    gaps = np.diff(v)
    k = int(np.argmax(gaps))
    return float(0.5 * (v[k] + v[k + 1]))


def calibrate_threshold(batch: Sequence[Event], hp: Hyperparams = Hyperparams(), mode: str = "step") -> float:
    """Mean gap midpoint of the relaxed solutions over ``batch``.

    Events with fewer than two distinct relaxed values are skipped.
    """
    if not batch:
        raise DegenerateBatchError("calibration batch is empty")
    midpoints = []
    for event in batch:
        system = assemble(build_graph(event, hp.epsilon, hp.lam), hp, mode)
        mid = gap_midpoint(solve_least_squares(system).s)
        if mid is not None:
            midpoints.append(mid)
    if not midpoints:
        raise DegenerateBatchError(
            f"all {len(batch)} events have fewer than two distinct relaxed values"
        )
    return float(np.mean(midpoints))


def dump_solution(solution: RelaxedSolution, path) -> None:
    """One ``doublet_id s_value active_flag`` line per doublet."""
    active = solution.active if solution.active is not None else np.zeros(len(solution.s), dtype=int)
    with open(path, "w") as fh:
        for k, (value, flag) in enumerate(zip(solution.s, active)):
            fh.write(f"{k} {float(value)!r} {int(flag)}\n")
