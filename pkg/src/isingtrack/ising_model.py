r"""Track-finding Hamiltonian over doublet activations and its linear system.

The energy of an activation vector ``S`` is

.. math::

    H(S) = -\sum_{(i,j)} 2 w_{ij} S_i S_j
           + \alpha \sum_{\{i,j\} \in \mathrm{bif}} S_i S_j
           + \frac{\beta}{2}\Big(\sum_i S_i - N_\mathrm{hits}\Big)^2
           + \frac{\gamma}{2}\sum_i S_i^2
           + \frac{\delta}{2}\sum_i (1 - 2 S_i)^2

where the first sum runs over adjacent doublet pairs and ``w`` is either the
step weight ``f`` or the smooth weight ``cos^lam / (r_i + r_j)``. ``H`` is
quadratic, ``H = S.A.S / 2 - b.S + const``, with

* ``A = (gamma + 4 delta) I - 2 W + alpha B + beta J``  (``J`` all ones)
* ``b = (2 delta + beta N_hits) * ones``

so stationarity ``grad H = A S - b = 0`` is the linear system ``A S = b``.
With the default weights ``A = 6 I - 2 F`` and ``b = 2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Optional

import numpy as np
import scipy.sparse as sp

from .doublet_graph import DoubletGraph
from .errors import DataError, SizeError

WeightMode = Literal["step", "dp_smooth"]

BRUTE_FORCE_MAX_N = 20
DENSE_MAX_N = 4096


@dataclass(frozen=True)
class Hyperparams:
    epsilon: float = 1e-5
    lam: int = 1
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 2.0
    delta: float = 1.0
    threshold: float = 0.45

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise DataError("alpha and beta must be non-negative")
        if self.epsilon < 0:
            raise DataError("epsilon must be non-negative")
        if self.lam < 0 or int(self.lam) != self.lam:
            raise DataError("lam must be a non-negative integer")

    @property
    def diagonal(self) -> float:
        return self.gamma + 4.0 * self.delta + self.beta


@dataclass(frozen=True, eq=False)
class IsingSystem:
    a: sp.csr_matrix
    b: np.ndarray
    hp: Hyperparams
    mode: str
    n_hits: int
    terms: frozenset = field(default_factory=frozenset)
    n_orig: Optional[int] = None

    def __post_init__(self):
        if self.n_orig is None:
            object.__setattr__(self, "n_orig", self.a.shape[0])

    @property
    def n(self) -> int:
        return self.n_orig

    @property
    def n_pad(self) -> int:
        return self.a.shape[0]

    @property
    def is_padded(self) -> bool:
        return self.n_pad != self.n_orig

    @property
    def offset(self) -> float:
        """Constant part of H for the unpadded block."""
        return 0.5 * self.hp.delta * self.n + 0.5 * self.hp.beta * self.n_hits**2

    def dense(self) -> np.ndarray:
        if self.n_pad > DENSE_MAX_N:
            raise SizeError(f"refusing to densify a {self.n_pad}x{self.n_pad} matrix")
        return self.a.toarray()

    def unpadded(self) -> "IsingSystem":
        if not self.is_padded:
            return self
        n = self.n_orig
        return replace(self, a=self.a[:n, :n].tocsr(), b=self.b[:n].copy(), n_orig=n)


def _weights(graph: DoubletGraph, mode: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if mode == "step":
        keep = graph.f.astype(bool)
        return graph.ci[keep], graph.cj[keep], np.ones(int(keep.sum()))
    if mode == "dp_smooth":
        return graph.ci, graph.cj, graph.dp_weight
    raise DataError(f"unknown weight mode {mode!r}")


def bifurcation_pairs(hit_a: np.ndarray, hit_b: np.ndarray) -> np.ndarray:
    """Unordered doublet pairs ``(i < j)`` sharing a start hit or an end hit."""
    out = []
    for key in (np.asarray(hit_a), np.asarray(hit_b)):
        order = np.argsort(key, kind="stable")
        sorted_keys = key[order]
        bounds = np.flatnonzero(np.diff(sorted_keys)) + 1
        for group in np.split(order, bounds):
            if len(group) > 1:
                out.extend((min(p), max(p)) for p in itertools.combinations(group.tolist(), 2))
    if not out:
        return np.zeros((0, 2), dtype=int)
    return np.unique(np.array(out, dtype=int), axis=0)


def bifurcation_penalty(doublets) -> list[tuple[int, int]]:
    """Record-level front end of :func:`bifurcation_pairs`, keyed by doublet id."""
    ids = np.array([d.id for d in doublets], dtype=int)
    hit_a = np.array([d.hit_a for d in doublets], dtype=int)
    hit_b = np.array([d.hit_b for d in doublets], dtype=int)
    pairs = bifurcation_pairs(hit_a, hit_b)
    return sorted((int(ids[i]), int(ids[j])) for i, j in pairs)


def assemble(graph: DoubletGraph, hp: Hyperparams = Hyperparams(), mode: WeightMode = "step") -> IsingSystem:
    n = graph.n
    n_hits = graph.event.n_hits
    ci, cj, w = _weights(graph, mode)

    rows = [ci]
    cols = [cj]
    vals = [-2.0 * w]
    terms = {"angular"}
    if hp.alpha != 0.0:
        pairs = bifurcation_pairs(graph.hit_a, graph.hit_b)
        rows.append(pairs[:, 0])
        cols.append(pairs[:, 1])
        vals.append(np.full(len(pairs), hp.alpha))
        terms.add("bifurcation")
    # keep only the upper triangle, then mirror: exact symmetry by construction
    r = np.concatenate(rows).astype(int)
    c = np.concatenate(cols).astype(int)
    v = np.concatenate(vals).astype(float)
    lo, hi = np.minimum(r, c), np.maximum(r, c)
    upper = sp.coo_matrix((v, (lo, hi)), shape=(n, n)).tocsr()
    upper.sum_duplicates()
    if hp.beta != 0.0:
        iu = np.triu_indices(n, k=1)
        upper = upper + sp.coo_matrix((np.full(len(iu[0]), hp.beta), iu), shape=(n, n)).tocsr()
        terms.add("occupancy")
    a = (upper + upper.T + sp.identity(n, format="csr") * hp.diagonal).tocsr()
    a.eliminate_zeros()
    a.sort_indices()
    if hp.gamma != 0.0:
        terms.add("spectral")
    if hp.delta != 0.0:
        terms.add("gap")
    b = np.full(n, 2.0 * hp.delta + hp.beta * n_hits)
    return IsingSystem(a, b, hp, mode, n_hits, frozenset(terms))


def evaluate_h(graph: DoubletGraph, hp: Hyperparams, mode: WeightMode, state) -> np.ndarray | float:
    """Energy of one state (1-D) or of a batch of states (rows of a 2-D array).

    Evaluated term by term from the definitions, not through ``A``.
    """
    s = np.asarray(state, dtype=float)
    single = s.ndim == 1
    s = np.atleast_2d(s)
    if s.shape[1] != graph.n:
        raise DataError(f"state has length {s.shape[1]}, expected {graph.n}")
    ci, cj, w = _weights(graph, mode)

    h = -2.0 * (s[:, ci] * s[:, cj]) @ w
    if hp.alpha != 0.0:
        pairs = bifurcation_pairs(graph.hit_a, graph.hit_b)
        h = h + hp.alpha * np.sum(s[:, pairs[:, 0]] * s[:, pairs[:, 1]], axis=1)
    if hp.beta != 0.0:
        h = h + 0.5 * hp.beta * (s.sum(axis=1) - graph.event.n_hits) ** 2
    h = h + 0.5 * hp.gamma * np.sum(s * s, axis=1)
    h = h + 0.5 * hp.delta * np.sum((1.0 - 2.0 * s) ** 2, axis=1)
    return float(h[0]) if single else h


def gradient_h(system: IsingSystem, state) -> np.ndarray:
    s = np.asarray(state, dtype=float)
    if s.shape != (system.n_pad,):
        raise DataError(f"state has shape {s.shape}, expected ({system.n_pad},)")
    return system.a @ s - system.b


def brute_force_ground_state(
    graph: DoubletGraph,
    hp: Hyperparams = Hyperparams(),
    mode: WeightMode = "step",
    tie_break: str = "prefer_off",
    chunk: int = 1 << 15,
) -> np.ndarray:
    """Exhaustive minimiser of :func:`evaluate_h` over all binary states.

    Ties (within ``1e-9`` relative) go to the state with the fewest active
    doublets, then to the lexicographically smallest vector.
    """
    if tie_break != "prefer_off":
        raise DataError(f"unknown tie_break {tie_break!r}")
    n = graph.n
    if n > BRUTE_FORCE_MAX_N:
        raise SizeError(f"brute force limited to {BRUTE_FORCE_MAX_N} doublets, got {n}")
    total = 1 << n
    bits = np.arange(n)
    energies = np.empty(total)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        states = ((idx[:, None] >> bits) & 1).astype(float)
        energies[start:start + len(idx)] = evaluate_h(graph, hp, mode, states)
    e_min = energies.min()
    tol = 1e-9 * max(1.0, abs(e_min))
    tied = np.flatnonzero(energies <= e_min + tol)
    states = (tied[:, None] >> bits) & 1
    key = [(int(row.sum()), tuple(int(x) for x in row)) for row in states]
    best = min(range(len(tied)), key=key.__getitem__)
    return states[best].astype(int)


def _next_pow2(n: int) -> int:
    return 1 if n <= 1 else 1 << (n - 1).bit_length()


def pad_system(system: IsingSystem) -> IsingSystem:
    """Grow the system to the next power of two with a decoupled diagonal block.

    The extra diagonal equals the uniform diagonal of ``A`` and the extra bias
    entries equal the uniform ``b`` value, so ``b`` stays uniform.
    """
    if system.is_padded:
        return system
    n = system.n
    n_pad = _next_pow2(n)
    if n_pad == n:
        return system
    hp = system.hp
    extra = n_pad - n
    a = sp.block_diag([system.a, sp.identity(extra) * hp.diagonal], format="csr")
    b_fill = 2.0 * hp.delta + hp.beta * system.n_hits
    b = np.concatenate([system.b, np.full(extra, b_fill)])
    return replace(system, a=a, b=b, n_orig=n)


def dump_matrix(system: IsingSystem, path) -> None:
    """Write ``N N_pad nnz`` then one ``i j value`` line per upper-triangle entry."""
    upper = sp.triu(system.a).tocoo()
    order = np.lexsort((upper.col, upper.row))
    lines = [f"{system.n} {system.n_pad} {upper.nnz}"]
    lines += [f"{upper.row[k]} {upper.col[k]} {float(upper.data[k])!r}" for k in order]
    Path(path).write_text("\n".join(lines) + "\n")


def load_matrix(path) -> tuple[sp.csr_matrix, int]:
    """Read a :func:`dump_matrix` file back into a full symmetric matrix."""
    lines = Path(path).read_text().split("\n")
    n, n_pad, nnz = (int(x) for x in lines[0].split())
    rows, cols, vals = [], [], []
    for line in lines[1:1 + nnz]:
        i, j, v = line.split()
        rows.append(int(i))
        cols.append(int(j))
        vals.append(float(v))
    upper = sp.coo_matrix((vals, (rows, cols)), shape=(n_pad, n_pad)).tocsr()
    strict = sp.triu(upper, k=1)
    return (upper + strict.T).tocsr(), n
