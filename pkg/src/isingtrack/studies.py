"""Sparsity and condition-number sweeps over toy event sizes."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .classical_solver import block_components
from .doublet_graph import build_graph
from .ising_model import Hyperparams, IsingSystem, _next_pow2, assemble
from .toy_detector import ToyConfig, generate_event

CSV_FIELDS = ("particles", "layers", "seed", "n_doublets", "n_pad", "nnz", "max_row_nnz", "density", "kappa")
SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class StudyRecord:
    particles: int
    layers: int
    seed: int
    n_doublets: int
    n_pad: int
    nnz: int
    max_row_nnz: int
    density: float
    kappa: Optional[float]
    singular: bool = False


def extreme_singular_values(system: IsingSystem) -> tuple[float, float]:
    """Largest and smallest singular value of ``A``, exact, block by block."""
    a = system.a
    s_max, s_min = 0.0, math.inf
    for idx in block_components(a):
        block = a[idx][:, idx].toarray()
        sv = np.abs(np.linalg.eigvalsh(block))
        s_max = max(s_max, float(sv.max()))
        s_min = min(s_min, float(sv.min()))
    return s_max, s_min


def condition_number(system: IsingSystem) -> Optional[float]:
    """``sigma_max / sigma_min``, or ``None`` if ``A`` is singular."""
    if system.n == 0:
        return None
    s_max, s_min = extreme_singular_values(system.unpadded())
    if s_max == 0.0 or s_min < SINGULAR_RTOL * s_max:
        return None
    return s_max / s_min


def study_point(config: ToyConfig, hp: Hyperparams, mode: str = "step") -> StudyRecord:
    event = generate_event(config)
    system = assemble(build_graph(event, hp.epsilon, hp.lam), hp, mode)
    n = system.n
    a = system.a
    row_nnz = np.diff(a.indptr)
    kappa = condition_number(system)
    return StudyRecord(
        particles=config.n_particles,
        layers=config.n_layers,
        seed=config.rng_seed,
        n_doublets=n,
        n_pad=_next_pow2(n) if n else 0,
        nnz=int(a.nnz),
        max_row_nnz=int(row_nnz.max()) if n else 0,
        density=a.nnz / n**2 if n else 0.0,
        kappa=kappa,
        singular=kappa is None and n > 0,
    )


def _sweep(particles: Iterable[int], layers: Iterable[int], seeds: Iterable[int],
           hp: Hyperparams, base: ToyConfig) -> list[StudyRecord]:
    records = []
    for p in sorted(particles):
        for l in sorted(layers):
            for s in sorted(seeds):
                cfg = ToyConfig(**{**base.__dict__, "n_particles": p, "n_layers": l, "rng_seed": s})
                records.append(study_point(cfg, hp))
    return records


def run_sparsity_study(particles: Iterable[int], layers: Iterable[int], seeds: Iterable[int] = (0,),
                       hp: Hyperparams = Hyperparams(), base: ToyConfig = ToyConfig()) -> list[StudyRecord]:
    """Non-zero structure of ``A`` at each (particles, layers, seed) point."""
    return _sweep(particles, layers, seeds, hp, base)


def run_kappa_study(particles: Iterable[int], layers: Iterable[int], seeds: Iterable[int] = (0,),
                    hp: Hyperparams = Hyperparams(), base: ToyConfig = ToyConfig()) -> list[StudyRecord]:
    """Condition number of ``A`` at each point; singular points get ``kappa=None``."""
    return _sweep(particles, layers, seeds, hp, base)


def records_to_csv(records: Sequence[StudyRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in records:
        row = asdict(r)
        row["kappa"] = "singular" if r.kappa is None else repr(r.kappa)
        row["density"] = repr(r.density)
        writer.writerow([row[k] for k in CSV_FIELDS])
    return buf.getvalue()
