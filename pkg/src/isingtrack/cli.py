"""Command-line front-end: ``isingtrack {generate,reconstruct,calibrate,study,hhl-report}``.

Settings resolve as command-line flag, then ``--config`` JSON file, then the
built-in defaults. Exit codes: 0 success, 2 configuration error, 3 data error,
4 numerical error. Failures print a JSON error record on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import classical_solver as cs
from . import hhl_simulator as hhl
from .doublet_graph import build_graph
from .errors import ConfigError, DataError, IsingTrackError
from .event_model import read_event, write_event
from .ising_model import Hyperparams, assemble, pad_system
from .metrics import acceptance_filter, compute_report, match_tracks, segment_counts
from .studies import records_to_csv, run_kappa_study, run_sparsity_study
from .toy_detector import ToyConfig, generate_batch, generate_event
from .track_builder import build_tracks, dump_tracks

SOLVER_MODES = ("classical", "hhl-oracle", "hhl-circuit")
# layers, particles
PAPER_GRID = ((3, 2), (3, 3), (3, 4), (3, 5), (4, 2), (4, 3), (4, 4))


@dataclass
class RunConfig:
    epsilon: float = 1e-5
    lam: int = 1
    alpha: float = 0.0
    beta: float = 0.0
    gamma: float = 2.0
    delta: float = 1.0
    threshold: float = 0.45
    weight_mode: str = "step"
    max_skip: int = 0
    layers: object = 3
    particles: object = 5
    layer_spacing: float = 30.0
    half_aperture_x: float = 50.0
    half_aperture_y: float = 50.0
    smear_sigma: float = 0.0
    hit_efficiency: float = 1.0
    seed: int = 0
    events: Optional[int] = None
    mode: str = "classical"
    input: Optional[str] = None
    output: Optional[str] = None
    format: str = "csv"

    @property
    def hyperparams(self) -> Hyperparams:
        try:
            return Hyperparams(
                epsilon=float(self.epsilon), lam=int(self.lam), alpha=float(self.alpha),
                beta=float(self.beta), gamma=float(self.gamma), delta=float(self.delta),
                threshold=float(self.threshold),
            )
        except (DataError, ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None

    def toy(self, layers=None, particles=None, seed=None) -> ToyConfig:
        try:
            return self._toy(layers, particles, seed)
        except (ValueError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from None

    def _toy(self, layers, particles, seed) -> ToyConfig:
        return ToyConfig(
            n_layers=_single(self.layers if layers is None else layers, "layers"),
            n_particles=_single(self.particles if particles is None else particles, "particles"),
            layer_spacing=float(self.layer_spacing),
            half_aperture_x=float(self.half_aperture_x),
            half_aperture_y=float(self.half_aperture_y),
            smear_sigma=float(self.smear_sigma),
            hit_efficiency=float(self.hit_efficiency),
            rng_seed=int(self.seed if seed is None else seed),
        )


# JSON keys accepted in addition to the field names
_ALIASES = {"lambda": "lam"}
_FLAG_DESTS = {f.name for f in fields(RunConfig)}


def parse_range(value) -> list[int]:
    """``5`` -> [5]; ``"2:6"`` -> [2..6] inclusive; ``"2,4,8"`` -> [2, 4, 8]."""
    if isinstance(value, int):
        return [value]
    if isinstance(value, list):
        return [int(v) for v in value]
    text = str(value).strip()
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            return list(range(int(lo), int(hi) + 1))
        if "," in text:
            return [int(v) for v in text.split(",") if v.strip()]
        return [int(text)]
    except ValueError:
        raise ConfigError(f"cannot parse integer range {value!r}") from None


def _single(value, name: str) -> int:
    values = parse_range(value)
    if len(values) != 1:
        raise ConfigError(f"--{name} must be a single integer here, got {value!r}")
    return values[0]


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {path} not found")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    out = {}
    for key, value in doc.items():
        key = _ALIASES.get(key, key)
        if key not in _FLAG_DESTS:
            raise ConfigError(f"{path}: unknown setting {key!r}")
        out[key] = value
    return out


def resolve_config(args: argparse.Namespace, file_values: Optional[dict] = None) -> RunConfig:
    if file_values is None:
        file_values = load_config(getattr(args, "config", None))
    merged = dict(file_values)
    for name in _FLAG_DESTS:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    cfg = RunConfig(**merged)
    if cfg.mode not in SOLVER_MODES:
        raise ConfigError(f"mode must be one of {SOLVER_MODES}, got {cfg.mode!r}")
    if cfg.weight_mode not in ("step", "dp_smooth"):
        raise ConfigError(f"weight_mode must be step or dp_smooth, got {cfg.weight_mode!r}")
    if cfg.format not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {cfg.format!r}")
    return cfg


def _emit_rows(rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(rows, indent=1) + "\n"
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_generate(cfg: RunConfig) -> int:
    n_events = 1 if cfg.events is None else int(cfg.events)
    out = Path(cfg.output or "events")
    out.mkdir(parents=True, exist_ok=True)
    manifest = []
    for k, event in enumerate(generate_batch(cfg.toy(), n_events)):
        name = f"event_{k:05d}.json"
        write_event(event, out / name)
        manifest.append({"file": name, "seed": int(cfg.seed) + k, "n_hits": event.n_hits,
                         "n_particles": len(event.particles)})
    text = json.dumps({"events": manifest}, indent=1) + "\n"
    (out / "manifest.json").write_text(text)
    sys.stdout.write(text)
    return 0


def _input_files(path: Optional[str]) -> list[Path]:
    if path is None:
        raise ConfigError("--input is required")
    p = Path(path)
    if p.is_dir():
        files = sorted(f for f in p.iterdir()
                       if f.suffix in (".json", ".csv") and f.name != "manifest.json")
        if not files:
            raise DataError(f"{path}: no event files")
        return files
    if not p.exists():
        raise DataError(f"{path}: no such file or directory")
    return [p]


def _solve(system, cfg: RunConfig):
    """Relaxed solution plus, for quantum modes, the HHL result."""
    if cfg.mode == "classical":
        return cs.solve_least_squares(system).s, None
    padded = pad_system(system)
    plan = hhl.plan_registers(padded)
    if cfg.mode == "hhl-oracle":
        result = hhl.solve_spectral_oracle(padded, plan)
    else:
        result = hhl.solve_full_circuit(padded, plan)
    return result.s_quantum, result


def _summary_row(rows: list[dict], pooled: dict) -> dict:
    acc, allt, corr = pooled["n_gen_acc"], pooled["n_track_all"], pooled["n_track_corr"]
    pur, eff = pooled["purity"], pooled["hit_eff"]
    return {
        "event": "summary",
        "n_hits": sum(r["n_hits"] for r in rows),
        "n_doublets": sum(r["n_doublets"] for r in rows),
        "n_active": sum(r["n_active"] for r in rows),
        "segment_efficiency": pooled["seg_both"] / pooled["seg_true"] if pooled["seg_true"] else 1.0,
        "segment_purity": pooled["seg_both"] / pooled["seg_act"] if pooled["seg_act"] else 1.0,
        "n_gen_acc": acc,
        "n_track_all": allt,
        "n_track_corr": corr,
        "n_track_fake": allt - corr,
        "n_clones": pooled["n_clones"],
        "eff_track": corr / acc if acc else 0.0,
        "fake_rate": (allt - corr) / allt if allt else 0.0,
        "e_pure": float(np.mean(pur)) if pur else 0.0,
        "e_eff": float(np.mean(eff)) if eff else 0.0,
    }


def cmd_reconstruct(cfg: RunConfig) -> int:
    hp = cfg.hyperparams
    files = _input_files(cfg.input)
    out = Path(cfg.output or "reco")
    out.mkdir(parents=True, exist_ok=True)
    rows, hhl_rows = [], []
    pooled = dict(n_gen_acc=0, n_track_all=0, n_track_corr=0, n_clones=0,
                  seg_true=0, seg_act=0, seg_both=0, purity=[], hit_eff=[])
    for path in files:
        try:
            event = read_event(path)
            graph = build_graph(event, hp.epsilon, hp.lam, int(cfg.max_skip))
            system = assemble(graph, hp, cfg.weight_mode)
            s, result = _solve(system, cfg)
        except IsingTrackError as exc:
            exc.event = path.name
            raise
        solution = cs.RelaxedSolution(s, float(np.linalg.norm(system.a @ s - system.b))).thresholded(hp.threshold)
        tracks = build_tracks(graph, solution.active)
        cs.dump_solution(solution, out / f"{path.stem}.solution.txt")
        dump_tracks(tracks, out / f"{path.stem}.tracks.txt", event.external_id)

        n_true, n_act, n_both = segment_counts(graph, solution.active)
        row = {
            "event": path.stem, "n_hits": event.n_hits, "n_doublets": graph.n, "n_active": n_act,
            "segment_efficiency": n_both / n_true if n_true else 1.0,
            "segment_purity": n_both / n_act if n_act else 1.0,
        }
        pooled["seg_true"] += n_true
        pooled["seg_act"] += n_act
        pooled["seg_both"] += n_both
        if event.particles:
            accepted = acceptance_filter(event)
            report = compute_report(match_tracks(tracks, event), accepted)
            row.update(report.row())
            for key in ("n_gen_acc", "n_track_all", "n_track_corr", "n_clones"):
                pooled[key] += getattr(report, key)
            pooled["purity"] += report.hit_purity
            pooled["hit_eff"] += report.hit_efficiency
        else:
            row.update({k: "" for k in ("n_gen_acc", "n_track_all", "n_track_corr", "n_track_fake",
                                         "n_clones", "eff_track", "fake_rate", "e_pure", "e_eff")})
        rows.append(row)
        if result is not None:
            hhl_rows.append({"event": path.stem, **hhl.resource_report(result.plan, result),
                             "qpe_residual": result.qpe_residual})

    all_rows = rows + [_summary_row(rows, pooled)]
    ext = "json" if cfg.format == "json" else "csv"
    (out / f"metrics.{ext}").write_text(_emit_rows(all_rows, cfg.format))
    if hhl_rows:
        (out / f"hhl.{ext}").write_text(_emit_rows(hhl_rows, cfg.format))
    sys.stdout.write(json.dumps(all_rows[-1]) + "\n")
    return 0


def cmd_calibrate(cfg: RunConfig) -> int:
    n_events = 100 if cfg.events is None else int(cfg.events)
    hp = cfg.hyperparams
    batch = generate_batch(cfg.toy(), n_events)
    threshold = cs.calibrate_threshold(batch, hp, cfg.weight_mode)
    sys.stdout.write(json.dumps({"threshold": threshold, "events": n_events}) + "\n")
    return 0


def cmd_study(cfg: RunConfig, which: str) -> int:
    hp = cfg.hyperparams
    n_seeds = 1 if cfg.events is None else int(cfg.events)
    seeds = range(int(cfg.seed), int(cfg.seed) + n_seeds)
    base = cfg.toy(layers=1, particles=0)
    runner = run_sparsity_study if which == "sparsity" else run_kappa_study
    records = runner(parse_range(cfg.particles), parse_range(cfg.layers), seeds, hp, base)
    if cfg.format == "json":
        text = json.dumps([asdict(r) for r in records], indent=1) + "\n"
    else:
        text = records_to_csv(records)
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_hhl_report(cfg: RunConfig, explicit_grid: bool) -> int:
    hp = cfg.hyperparams
    if explicit_grid:
        grid = [(l, p) for l in parse_range(cfg.layers) for p in parse_range(cfg.particles)]
    else:
        grid = list(PAPER_GRID)
    rows = []
    for layers, particles in grid:
        event = generate_event(cfg.toy(layers=layers, particles=particles))
        system = pad_system(assemble(build_graph(event, hp.epsilon, hp.lam), hp, cfg.weight_mode))
        plan = hhl.plan_registers(system)
        if cfg.mode == "hhl-circuit":
            result = hhl.solve_full_circuit(system, plan)
        else:
            result = hhl.solve_spectral_oracle(system, plan)
        rec = hhl.resource_report(plan, result)
        rows.append({k: rec[k] for k in hhl.REPORT_CSV_FIELDS})
    text = _emit_rows(rows, cfg.format) if rows else ",".join(hhl.REPORT_CSV_FIELDS) + "\n"
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("model")
    g.add_argument("--epsilon", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--threshold", type=float)
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--lambda", dest="lam", type=int)
    g.add_argument("--weight-mode", dest="weight_mode", choices=("step", "dp_smooth"))
    g.add_argument("--max-skip", dest="max_skip", type=int)
    g.add_argument("--mode", choices=SOLVER_MODES)
    t = common.add_argument_group("toy detector")
    t.add_argument("--layers", help="integer, or a range a:b / list a,b,c for sweeps")
    t.add_argument("--particles", help="integer, or a range a:b / list a,b,c for sweeps")
    t.add_argument("--spacing", dest="layer_spacing", type=float)
    t.add_argument("--aperture-x", dest="half_aperture_x", type=float)
    t.add_argument("--aperture-y", dest="half_aperture_y", type=float)
    t.add_argument("--smear", dest="smear_sigma", type=float)
    t.add_argument("--efficiency", dest="hit_efficiency", type=float)
    t.add_argument("--events", type=int)
    t.add_argument("--seed", type=int)
    io_ = common.add_argument_group("i/o")
    io_.add_argument("--input")
    io_.add_argument("--output")
    io_.add_argument("--config")
    io_.add_argument("--format", choices=("csv", "json"))

    parser = argparse.ArgumentParser(prog="isingtrack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("generate", parents=[common], help="write toy events as JSON")
    sub.add_parser("reconstruct", parents=[common], help="run the full pipeline on event files")
    sub.add_parser("calibrate", parents=[common], help="gap-midpoint threshold on a toy batch")
    st = sub.add_parser("study", parents=[common], help="sparsity or condition-number sweep")
    st.add_argument("which", choices=("sparsity", "kappa"))
    sub.add_parser("hhl-report", parents=[common], help="register sizes over a toy size grid")
    return parser


def _error_record(exc: Exception, code: int) -> str:
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    event = getattr(exc, "event", None)
    if event is not None:
        rec["event"] = event
    return json.dumps(rec)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_values = load_config(args.config)
        cfg = resolve_config(args, file_values)
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "reconstruct":
            return cmd_reconstruct(cfg)
        if args.command == "calibrate":
            return cmd_calibrate(cfg)
        if args.command == "study":
            return cmd_study(cfg, args.which)
        explicit = any(getattr(args, k) is not None or k in file_values for k in ("layers", "particles"))
        return cmd_hhl_report(cfg, explicit)
    except IsingTrackError as exc:
        sys.stderr.write(_error_record(exc, exc.exit_code) + "\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(_error_record(exc, 3) + "\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
