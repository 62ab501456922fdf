"""Candidate doublets between consecutive modules and the angular couplings
between adjacent doublets.

A doublet is the oriented segment from ``hit_a`` to ``hit_b`` with
``module(b) - module(a)`` in ``[1, 1 + max_skip]``. Two doublets are adjacent
when the first ends on the hit where the second starts; each adjacent ordered
pair carries ``cos_theta`` of the angle between the segments, the binary step
weight ``f`` and the smooth weight ``cos^lam(theta) / (r_i + r_j)``.

:class:`DoubletGraph` keeps everything in numpy arrays. The record types
:class:`Doublet` and :class:`TripletCoupling` are thin views for callers that
prefer objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .event_model import Event

COS_BAND = 1e-12


@dataclass(frozen=True)
class Doublet:
    id: int
    hit_a: int
    hit_b: int
    seg: tuple[float, float, float]
    r: float


@dataclass(frozen=True)
class TripletCoupling:
    i: int
    j: int
    cos_theta: float
    f: int
    dp_weight: float


def angular_step(cos_theta: float, epsilon: float) -> int:
    """1 if ``cos_theta >= 1 - epsilon`` (inclusive), else 0."""
    if not -1.0 - COS_BAND <= cos_theta <= 1.0 + COS_BAND:
        raise DataError(f"cos_theta={cos_theta!r} outside [-1, 1]")
    if epsilon < 0:
        raise DataError("epsilon must be non-negative")
    cos_theta = min(1.0, max(-1.0, cos_theta))
    return int(cos_theta >= 1.0 - epsilon)


def dp_angular_weight(cos_theta: float, r_i: float, r_j: float, lam: int) -> float:
    if r_i <= 0 or r_j <= 0:
        raise DataError("segment lengths must be positive")
    return cos_theta**lam / (r_i + r_j)


@dataclass(frozen=True, eq=False)
class DoubletGraph:
    event: Event
    hit_a: np.ndarray
    hit_b: np.ndarray
    seg: np.ndarray
    r: np.ndarray
    # adjacent ordered pairs: doublet ci ends where doublet cj starts
    ci: np.ndarray
    cj: np.ndarray
    cos_theta: np.ndarray
    f: np.ndarray
    dp_weight: np.ndarray
    epsilon: float
    lam: int

    @property
    def n(self) -> int:
        return len(self.hit_a)

    @property
    def doublets(self) -> list[Doublet]:
        return _doublet_records(self.hit_a, self.hit_b, self.seg, self.r)

    @property
    def couplings(self) -> list[TripletCoupling]:
        return [
            TripletCoupling(int(i), int(j), float(c), int(f), float(w))
            for i, j, c, f, w in zip(self.ci, self.cj, self.cos_theta, self.f, self.dp_weight)
        ]

    def aligned_pairs(self) -> np.ndarray:
        """``(k, 2)`` array of coupled pairs with ``f == 1``."""
        mask = self.f.astype(bool)
        return np.stack([self.ci[mask], self.cj[mask]], axis=1)


def _doublet_records(hit_a, hit_b, seg, r) -> list[Doublet]:
    return [
        Doublet(k, int(a), int(b), tuple(float(c) for c in s), float(rr))
        for k, (a, b, s, rr) in enumerate(zip(hit_a, hit_b, seg, r))
    ]


def _doublet_arrays(event: Event, max_skip: int):
    if max_skip < 0:
        raise DataError("max_skip must be >= 0")
    pos = np.array([h.position for h in event.hits], dtype=float).reshape(-1, 3)
    modules = np.array([h.module for h in event.hits], dtype=int)
    by_module = {m: np.flatnonzero(modules == m) for m in np.unique(modules)}

    pairs_a, pairs_b = [], []
    for m in sorted(by_module):
        for d in range(1, max_skip + 2):
            targets = by_module.get(m + d)
            if targets is None:
                continue
            a, b = np.meshgrid(by_module[m], targets, indexing="ij")
            pairs_a.append(a.ravel())
            pairs_b.append(b.ravel())
    if pairs_a:
        hit_a = np.concatenate(pairs_a)
        hit_b = np.concatenate(pairs_b)
        order = np.lexsort((hit_b, hit_a))
        hit_a, hit_b = hit_a[order], hit_b[order]
    else:
        hit_a = hit_b = np.zeros(0, dtype=int)
    seg = pos[hit_b] - pos[hit_a] if len(hit_a) else np.zeros((0, 3))
    if np.any(seg[:, 2] <= 0):
        raise DataError("doublet with non-positive z extent; module order must follow z")
    r = np.linalg.norm(seg, axis=1)
    return hit_a, hit_b, seg, r


def _coupling_arrays(hit_a, hit_b, seg, r, epsilon: float, lam: int):
    if epsilon < 0:
        raise DataError("epsilon must be non-negative")
    n = len(hit_a)
    if n == 0:
        empty = np.zeros(0, dtype=int)
        return empty, empty, np.zeros(0), empty, np.zeros(0)

    # group doublets by their end hit and by their start hit
    by_end = np.argsort(hit_b, kind="stable")
    by_start = np.argsort(hit_a, kind="stable")
    end_keys = hit_b[by_end]
    start_keys = hit_a[by_start]
    middle = np.intersect1d(end_keys, start_keys)

    ci_parts, cj_parts = [], []
    for h in middle:
        lo, hi = np.searchsorted(end_keys, [h, h + 1])
        incoming = by_end[lo:hi]
        lo, hi = np.searchsorted(start_keys, [h, h + 1])
        outgoing = by_start[lo:hi]
        i, j = np.meshgrid(incoming, outgoing, indexing="ij")
        ci_parts.append(i.ravel())
        cj_parts.append(j.ravel())
    if not ci_parts:
        empty = np.zeros(0, dtype=int)
        return empty, empty, np.zeros(0), empty, np.zeros(0)
    ci = np.concatenate(ci_parts)
    cj = np.concatenate(cj_parts)
    order = np.lexsort((cj, ci))
    ci, cj = ci[order], cj[order]

    cos = np.einsum("ij,ij->i", seg[ci], seg[cj]) / (r[ci] * r[cj])
    cos = np.clip(cos, -1.0, 1.0)
    f = (cos >= 1.0 - epsilon).astype(int)
    w = cos**lam / (r[ci] + r[cj])
    return ci, cj, cos, f, w


def build_doublets(event: Event, max_skip: int = 0) -> list[Doublet]:
    return _doublet_records(*_doublet_arrays(event, max_skip))


def build_couplings(doublets: Sequence[Doublet], epsilon: float, lam: int = 1) -> list[TripletCoupling]:
    hit_a = np.array([d.hit_a for d in doublets], dtype=int)
    hit_b = np.array([d.hit_b for d in doublets], dtype=int)
    seg = np.array([d.seg for d in doublets], dtype=float).reshape(-1, 3)
    r = np.array([d.r for d in doublets], dtype=float)
    ci, cj, cos, f, w = _coupling_arrays(hit_a, hit_b, seg, r, epsilon, lam)
    ids = np.array([d.id for d in doublets], dtype=int)
    return [
        TripletCoupling(int(ids[i]), int(ids[j]), float(c), int(ff), float(ww))
        for i, j, c, ff, ww in zip(ci, cj, cos, f, w)
    ]


def build_graph(event: Event, epsilon: float = 1e-5, lam: int = 1, max_skip: int = 0) -> DoubletGraph:
    hit_a, hit_b, seg, r = _doublet_arrays(event, max_skip)
    ci, cj, cos, f, w = _coupling_arrays(hit_a, hit_b, seg, r, epsilon, lam)
    return DoubletGraph(event, hit_a, hit_b, seg, r, ci, cj, cos, f, w, float(epsilon), int(lam))
