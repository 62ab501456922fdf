"""Group active doublets into track candidates.

A track is a connected component of hits joined by active doublets. Bifurcating
components stay merged; no attempt is made to split them.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .doublet_graph import DoubletGraph
from .errors import DataError


@dataclass(frozen=True)
class TrackCandidate:
    hit_ids: tuple[int, ...]
    doublet_ids: tuple[int, ...]


def build_tracks(graph: DoubletGraph, active) -> list[TrackCandidate]:
    active = np.asarray(active).astype(bool)
    if active.shape != (graph.n,):
        raise DataError(f"active mask has shape {active.shape}, expected ({graph.n},)")
    idx = np.flatnonzero(active)
    if idx.size == 0:
        return []
    a, b = graph.hit_a[idx], graph.hit_b[idx]
    n_hits = graph.event.n_hits
    adj = sp.coo_matrix((np.ones(idx.size), (a, b)), shape=(n_hits, n_hits))
    _, labels = connected_components(adj, directed=False)

    modules = {h.id: h.module for h in graph.event.hits}
    comp_hits: dict[int, set[int]] = {}
    comp_doublets: dict[int, list[int]] = {}
    for d, ha, hb in zip(idx, a, b):
        lab = int(labels[ha])
        comp_hits.setdefault(lab, set()).update((int(ha), int(hb)))
        comp_doublets.setdefault(lab, []).append(int(d))

    tracks = [
        TrackCandidate(
            tuple(sorted(hits, key=lambda h: (modules[h], h))),
            tuple(sorted(comp_doublets[lab])),
        )
        for lab, hits in comp_hits.items()
    ]
    tracks.sort(key=lambda t: (modules[t.hit_ids[0]], t.hit_ids))
    return tracks


def dump_tracks(tracks: Sequence[TrackCandidate], path, external_id=None) -> None:
    """One line per track with comma-separated hit ids."""
    ext = external_id or (lambda h: h)
    lines = [",".join(str(ext(h)) for h in t.hit_ids) for t in tracks]
    Path(path).write_text("".join(line + "\n" for line in lines))
