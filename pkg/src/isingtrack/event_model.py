"""Hits, truth particles and events, plus their JSON and CSV file formats.

Events are frozen after construction. Hit ids are dense: ``event.hits[i].id == i``
for every event. Files whose ids are not ``0..N-1`` in file order are remapped
on ingestion and the original ids are kept in ``Event.original_ids`` so that a
write reproduces the input ids.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import (
    DataError,
    DuplicateHitError,
    EventParseError,
    GeometryMismatchError,
)

CSV_HEADER = ("id", "x", "y", "z", "module", "truth_id")
Z_TOLERANCE = 1e-6  # mm


@dataclass(frozen=True)
class Hit:
    id: int
    x: float
    y: float
    z: float
    module: int
    truth_id: Optional[int] = None

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class TruthParticle:
    id: int
    origin: tuple[float, float, float]
    direction: tuple[float, float, float]
    hit_ids: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "origin", tuple(float(c) for c in self.origin))
        object.__setattr__(self, "direction", tuple(float(c) for c in self.direction))
        object.__setattr__(self, "hit_ids", tuple(self.hit_ids))
        norm = math.sqrt(sum(c * c for c in self.direction))
        if abs(norm - 1.0) > 1e-12:
            raise DataError(f"particle {self.id}: direction norm {norm!r} is not 1")

    @property
    def polar_angle(self) -> float:
        """Angle to the +z axis in radians."""
        return math.acos(max(-1.0, min(1.0, self.direction[2])))


@dataclass(frozen=True)
class Event:
    hits: tuple[Hit, ...] = ()
    particles: tuple[TruthParticle, ...] = ()
    geometry_id: str = ""
    original_ids: Optional[tuple[int, ...]] = field(default=None, compare=True)

    def __post_init__(self):
        object.__setattr__(self, "hits", tuple(self.hits))
        object.__setattr__(self, "particles", tuple(self.particles))
        if self.original_ids is not None:
            object.__setattr__(self, "original_ids", tuple(self.original_ids))
            if len(self.original_ids) != len(self.hits):
                raise DataError("original_ids must have one entry per hit")
        seen = set()
        for pos, hit in enumerate(self.hits):
            if hit.id in seen:
                raise DuplicateHitError(f"duplicate hit id {hit.id}")
            seen.add(hit.id)
            if hit.id != pos:
                raise DataError(f"hit ids must be dense and ordered; position {pos} has id {hit.id}")
        for p in self.particles:
            for hid in p.hit_ids:
                if not 0 <= hid < len(self.hits):
                    raise DataError(f"particle {p.id} references unknown hit {hid}")
                if self.hits[hid].truth_id != p.id:
                    raise DataError(
                        f"particle {p.id} references hit {hid} whose truth_id is "
                        f"{self.hits[hid].truth_id}"
                    )

    @property
    def n_hits(self) -> int:
        return len(self.hits)

    @property
    def has_truth(self) -> bool:
        return bool(self.particles)

    def particle(self, pid: int) -> TruthParticle:
        for p in self.particles:
            if p.id == pid:
                return p
        raise KeyError(pid)

    def external_id(self, hit_id: int) -> int:
        return hit_id if self.original_ids is None else self.original_ids[hit_id]


def validate_geometry(event: Event) -> None:
    """Check hit ``z`` against the layer positions named by ``event.geometry_id``.

    Only toy geometries carry enough information to check; other ids pass.
    """
    from .toy_detector import DetectorGeometry

    geometry = DetectorGeometry.from_id(event.geometry_id)
    if geometry is None:
        return
    for hit in event.hits:
        if not 0 <= hit.module < len(geometry.layer_z):
            raise GeometryMismatchError(
                f"hit {event.external_id(hit.id)}: module {hit.module} outside geometry "
                f"with {len(geometry.layer_z)} layers"
            )
        if abs(hit.z - geometry.layer_z[hit.module]) > Z_TOLERANCE:
            raise GeometryMismatchError(
                f"hit {event.external_id(hit.id)}: z={hit.z!r} does not match module "
                f"{hit.module} at z={geometry.layer_z[hit.module]!r}"
            )


def _densify(raw_hits: Sequence[dict], raw_particles: Sequence[dict], geometry_id: str, path) -> Event:
    ids = [h["id"] for h in raw_hits]
    seen = set()
    for pos, hid in enumerate(ids):
        if hid in seen:
            raise DuplicateHitError(f"{path}: duplicate hit id {hid} (hit #{pos})")
        seen.add(hid)
    dense = ids == list(range(len(ids)))
    remap = {hid: pos for pos, hid in enumerate(ids)}

    hits = tuple(
        Hit(pos, h["x"], h["y"], h["z"], h["module"], h.get("truth_id"))
        for pos, h in enumerate(raw_hits)
    )
    particles = []
    for p in raw_particles:
        try:
            hit_ids = tuple(remap[h] for h in p["hit_ids"])
        except KeyError as exc:
            raise DataError(f"{path}: particle {p['id']} references unknown hit {exc.args[0]}") from None
        particles.append(TruthParticle(p["id"], p["origin"], p["direction"], hit_ids))
    event = Event(hits, tuple(particles), geometry_id, None if dense else tuple(ids))
    validate_geometry(event)
    return event


def _require(obj: dict, key: str, kind, where: str, path):
    if key not in obj:
        raise EventParseError("missing value", path=path, field=f"{where}.{key}")
    value = obj[key]
    if kind is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise EventParseError(f"expected integer, got {value!r}", path=path, field=f"{where}.{key}")
        return value
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise EventParseError(f"expected number, got {value!r}", path=path, field=f"{where}.{key}")
        return float(value)
    if kind == "vec3":
        if not isinstance(value, list) or len(value) != 3 or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise EventParseError(f"expected 3-vector, got {value!r}", path=path, field=f"{where}.{key}")
        return tuple(float(v) for v in value)
    if kind == "intlist":
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise EventParseError(f"expected list of integers, got {value!r}", path=path, field=f"{where}.{key}")
        return value
    raise AssertionError(kind)


def _read_json(path: Path) -> Event:
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise EventParseError(exc.msg, path=path, line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise EventParseError("top level must be an object", path=path)
    raw_hits = doc.get("hits")
    if not isinstance(raw_hits, list):
        raise EventParseError("expected a list", path=path, field="hits")
    hits = []
    for k, h in enumerate(raw_hits):
        where = f"hits[{k}]"
        if not isinstance(h, dict):
            raise EventParseError("expected an object", path=path, field=where)
        truth = h.get("truth_id")
        if truth is not None and (isinstance(truth, bool) or not isinstance(truth, int)):
            raise EventParseError(f"expected integer, got {truth!r}", path=path, field=f"{where}.truth_id")
        module = _require(h, "module", int, where, path)
        hid = _require(h, "id", int, where, path)
        if hid < 0 or module < 0:
            raise EventParseError("ids and modules must be non-negative", path=path, field=where)
        hits.append({
            "id": hid,
            "x": _require(h, "x", float, where, path),
            "y": _require(h, "y", float, where, path),
            "z": _require(h, "z", float, where, path),
            "module": module,
            "truth_id": truth,
        })
    particles = []
    for k, p in enumerate(doc.get("particles", []) or []):
        where = f"particles[{k}]"
        if not isinstance(p, dict):
            raise EventParseError("expected an object", path=path, field=where)
        particles.append({
            "id": _require(p, "id", int, where, path),
            "origin": _require(p, "origin", "vec3", where, path),
            "direction": _require(p, "direction", "vec3", where, path),
            "hit_ids": _require(p, "hit_ids", "intlist", where, path),
        })
    geometry_id = doc.get("geometry_id", "")
    if not isinstance(geometry_id, str):
        raise EventParseError("expected a string", path=path, field="geometry_id")
    return _densify(hits, particles, geometry_id, path)


def _parse_int(text: str, path, line: int, name: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise EventParseError(f"expected integer, got {text!r}", path=path, line=line, field=name) from None


def _parse_float(text: str, path, line: int, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise EventParseError(f"expected number, got {text!r}", path=path, line=line, field=name) from None


def _read_csv(path: Path, geometry_id: str) -> Event:
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(c.strip() for c in header) != CSV_HEADER:
            raise EventParseError(f"header must be {','.join(CSV_HEADER)}", path=path, line=1)
        hits = []
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise EventParseError(f"expected {len(CSV_HEADER)} columns, got {len(row)}", path=path, line=line)
            sid, sx, sy, sz, smod, struth = (c.strip() for c in row)
            hits.append({
                "id": _parse_int(sid, path, line, "id"),
                "x": _parse_float(sx, path, line, "x"),
                "y": _parse_float(sy, path, line, "y"),
                "z": _parse_float(sz, path, line, "z"),
                "module": _parse_int(smod, path, line, "module"),
                "truth_id": _parse_int(struth, path, line, "truth_id") if struth else None,
            })
    return _densify(hits, [], geometry_id, path)


def _infer_format(path: Path, fmt: Optional[str]) -> str:
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt not in ("json", "csv"):
        raise DataError(f"unknown event format {fmt!r}")
    return fmt


def read_event(path, format: Optional[str] = None, *, geometry_id: str = "") -> Event:
    """Load an event from ``path``.

    ``format`` is ``"json"`` or ``"csv"``; when omitted it is taken from the file
    suffix. CSV files carry no particle records and no geometry, so the caller
    may supply ``geometry_id`` for them.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    if fmt == "json":
        return _read_json(path)
    return _read_csv(path, geometry_id)


def event_to_dict(event: Event) -> dict:
    ext = event.external_id
    hits = []
    for h in event.hits:
        rec = {"id": ext(h.id), "x": h.x, "y": h.y, "z": h.z, "module": h.module}
        if h.truth_id is not None:
            rec["truth_id"] = h.truth_id
        hits.append(rec)
    particles = [
        {
            "id": p.id,
            "origin": list(p.origin),
            "direction": list(p.direction),
            "hit_ids": [ext(h) for h in p.hit_ids],
        }
        for p in event.particles
    ]
    return {"geometry_id": event.geometry_id, "hits": hits, "particles": particles}


def write_event(event: Event, path, format: Optional[str] = None) -> None:
    """Write ``event`` so that :func:`read_event` restores it exactly.

    Floats go through ``repr``, the shortest decimal string that parses back to
    the same double.
    """
    path = Path(path)
    fmt = _infer_format(path, format)
    if fmt == "json":
        path.write_text(json.dumps(event_to_dict(event), indent=1) + "\n")
        return
    ext = event.external_id
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for h in event.hits:
            writer.writerow([
                ext(h.id), repr(h.x), repr(h.y), repr(h.z), h.module,
                "" if h.truth_id is None else h.truth_id,
            ])


def hits_by_module(hits: Iterable[Hit]) -> dict[int, list[Hit]]:
    out: dict[int, list[Hit]] = {}
    for h in hits:
        out.setdefault(h.module, []).append(h)
    return out
