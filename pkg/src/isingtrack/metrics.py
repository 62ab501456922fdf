"""Truth-matched tracking metrics.

A reconstructed track is matched to the particle owning most of its hits when
that particle owns at least ``purity_cut`` of them (boundary included). It is
*correct* when the particle is in acceptance (hits on at least ``min_layers``
modules) and has not already been credited to another track. Tracks matched to
an already-credited particle are clones; they count as fakes in the fake rate,
and are also reported on their own.

Hit purity and hit efficiency are averaged over correct tracks.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .doublet_graph import DoubletGraph
from .errors import MissingTruthError
from .event_model import Event, TruthParticle
from .track_builder import TrackCandidate

# published full-simulation figures, kept for reference only; the toy cannot
# reproduce them
REFERENCE_TRACK_EFFICIENCY = 0.97
REFERENCE_FAKE_RATE = 0.043
REFERENCE_HIT_EFFICIENCY = 0.98
REFERENCE_HIT_PURITY = 0.98
REFERENCE_TOY_SEGMENT_PURITY = {1e-9: 1.00, 1e-5: 0.93}


@dataclass(frozen=True)
class TrackMatch:
    track_index: int
    n_hits: int
    particle_id: Optional[int]
    n_matched: int
    purity: float
    hit_efficiency: float
    matched: bool
    in_acceptance: bool
    correct: bool
    clone: bool


@dataclass(frozen=True)
class BinSpec:
    """Bins over a per-particle feature.

    ``feature`` is ``"polar_angle"``, ``"n_hits"`` or a callable
    ``(particle, event) -> float``.
    """

    edges: Sequence[float]
    feature: Union[str, Callable[[TruthParticle, Event], float]] = "polar_angle"

    def value(self, particle: TruthParticle, event: Event) -> float:
        if callable(self.feature):
            return float(self.feature(particle, event))
        if self.feature == "polar_angle":
            return particle.polar_angle
        if self.feature == "n_hits":
            return float(len(particle.hit_ids))
        raise ValueError(f"unknown bin feature {self.feature!r}")

    def index(self, x: float) -> Optional[int]:
        edges = np.asarray(self.edges, dtype=float)
        k = int(np.searchsorted(edges, x, side="right")) - 1
        if k == len(edges) - 1 and x == edges[-1]:
            k -= 1
        return k if 0 <= k < len(edges) - 1 else None


@dataclass
class MetricsReport:
    n_gen_acc: int
    n_track_all: int
    n_track_corr: int
    n_track_fake: int
    n_clones: int
    eff_track: float
    fake_rate: float
    hit_purity: list[float] = field(default_factory=list)
    hit_efficiency: list[float] = field(default_factory=list)
    e_pure: float = 0.0
    e_eff: float = 0.0
    bins: Optional[list[dict]] = None

    def row(self) -> dict:
        return {
            "n_gen_acc": self.n_gen_acc,
            "n_track_all": self.n_track_all,
            "n_track_corr": self.n_track_corr,
            "n_track_fake": self.n_track_fake,
            "n_clones": self.n_clones,
            "eff_track": self.eff_track,
            "fake_rate": self.fake_rate,
            "e_pure": self.e_pure,
            "e_eff": self.e_eff,
        }


def _require_truth(event: Event) -> None:
    if not event.particles:
        raise MissingTruthError("event carries no truth particles")


def acceptance_filter(event: Event, min_layers: int = 3) -> list[TruthParticle]:
    _require_truth(event)
    accepted = []
    for p in event.particles:
        modules = {event.hits[h].module for h in p.hit_ids}
        if len(modules) >= min_layers:
            accepted.append(p)
    return accepted


def match_tracks(
    tracks: Sequence[TrackCandidate],
    event: Event,
    purity_cut: float = 0.7,
    min_layers: int = 3,
) -> list[TrackMatch]:
    _require_truth(event)
    accepted = {p.id for p in acceptance_filter(event, min_layers)}
    particle_hits = {p.id: len(p.hit_ids) for p in event.particles}

    provisional = []
    for k, track in enumerate(tracks):
        counts = Counter(event.hits[h].truth_id for h in track.hit_ids)
        counts.pop(None, None)
        n = len(track.hit_ids)
        if counts:
            # most hits wins; equal counts go to the smaller particle id
            pid, n_matched = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        else:
            pid, n_matched = None, 0
        purity = n_matched / n if n else 0.0
        matched = pid is not None and purity >= purity_cut
        provisional.append((k, n, pid, n_matched, purity, matched))

    # credit each particle once, preferring the track that holds most of its hits
    credited: dict[int, int] = {}
    for k, n, pid, n_matched, purity, matched in sorted(provisional, key=lambda r: (-r[3], r[0])):
        if matched and pid in accepted and pid not in credited:
            credited[pid] = k

    out = []
    for k, n, pid, n_matched, purity, matched in provisional:
        in_acc = pid in accepted
        correct = matched and credited.get(pid) == k
        total = particle_hits.get(pid, 0)
        out.append(TrackMatch(
            track_index=k,
            n_hits=n,
            particle_id=pid,
            n_matched=n_matched,
            purity=purity,
            hit_efficiency=n_matched / total if total else 0.0,
            matched=matched,
            in_acceptance=in_acc,
            correct=correct,
            clone=matched and in_acc and not correct,
        ))
    return out


def compute_report(
    matches: Sequence[TrackMatch],
    accepted: Sequence[TruthParticle],
    bins: Optional[BinSpec] = None,
    event: Optional[Event] = None,
) -> MetricsReport:
    n_acc = len(accepted)
    n_all = len(matches)
    correct = [m for m in matches if m.correct]
    n_corr = len(correct)
    purity = [m.purity for m in correct]
    hit_eff = [m.hit_efficiency for m in correct]
    report = MetricsReport(
        n_gen_acc=n_acc,
        n_track_all=n_all,
        n_track_corr=n_corr,
        n_track_fake=n_all - n_corr,
        n_clones=sum(m.clone for m in matches),
        eff_track=n_corr / n_acc if n_acc else 0.0,
        fake_rate=(n_all - n_corr) / n_all if n_all else 0.0,
        hit_purity=purity,
        hit_efficiency=hit_eff,
        e_pure=float(np.mean(purity)) if purity else 0.0,
        e_eff=float(np.mean(hit_eff)) if hit_eff else 0.0,
    )
    if bins is not None:
        if event is None:
            raise ValueError("binned reports need the event for particle features")
        report.bins = _binned(correct, accepted, bins, event)
    return report


def _binned(correct, accepted, bins: BinSpec, event: Event) -> list[dict]:
    n_bins = len(bins.edges) - 1
    rows = [
        {"lo": float(bins.edges[k]), "hi": float(bins.edges[k + 1]), "n_gen_acc": 0,
         "n_track_corr": 0, "purity": [], "hit_efficiency": []}
        for k in range(n_bins)
    ]
    for p in accepted:
        k = bins.index(bins.value(p, event))
        if k is not None:
            rows[k]["n_gen_acc"] += 1
    by_id = {p.id: p for p in accepted}
    for m in correct:
        k = bins.index(bins.value(by_id[m.particle_id], event))
        if k is not None:
            rows[k]["n_track_corr"] += 1
            rows[k]["purity"].append(m.purity)
            rows[k]["hit_efficiency"].append(m.hit_efficiency)
    for row in rows:
        pur, eff = row.pop("purity"), row.pop("hit_efficiency")
        row["eff_track"] = row["n_track_corr"] / row["n_gen_acc"] if row["n_gen_acc"] else 0.0
        row["e_pure"] = float(np.mean(pur)) if pur else 0.0
        row["e_eff"] = float(np.mean(eff)) if eff else 0.0
    return rows


def true_doublets(graph: DoubletGraph) -> np.ndarray:
    """Mask of doublets joining consecutive hits of the same particle."""
    event = graph.event
    next_hit: dict[int, int] = {}
    for p in event.particles:
        ordered = sorted(p.hit_ids, key=lambda h: event.hits[h].module)
        next_hit.update(zip(ordered, ordered[1:]))
    if not event.particles:
        # fall back on per-hit labels when particle records are missing
        by_pid: dict[int, list[int]] = {}
        for h in event.hits:
            if h.truth_id is not None:
                by_pid.setdefault(h.truth_id, []).append(h.id)
        for hits in by_pid.values():
            ordered = sorted(hits, key=lambda h: event.hits[h].module)
            next_hit.update(zip(ordered, ordered[1:]))
    return np.array(
        [next_hit.get(int(a)) == int(b) for a, b in zip(graph.hit_a, graph.hit_b)], dtype=bool
    )


def segment_counts(graph: DoubletGraph, active) -> tuple[int, int, int]:
    """``(n_true, n_active, n_true_and_active)``."""
    truth = true_doublets(graph)
    act = np.asarray(active).astype(bool)
    return int(truth.sum()), int(act.sum()), int((truth & act).sum())


def segment_metrics(graph: DoubletGraph, active) -> tuple[float, float]:
    """Segment finding efficiency and segment purity.

    Either is 1.0 when its denominator is empty.
    """
    n_true, n_act, n_both = segment_counts(graph, active)
    eff = n_both / n_true if n_true else 1.0
    pur = n_both / n_act if n_act else 1.0
    return eff, pur


def write_report_csv(rows: Sequence[dict], path) -> None:
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
