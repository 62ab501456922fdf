import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from isingtrack import Event, Hit, ToyConfig, TruthParticle, generate_event, read_event, write_event
from isingtrack.errors import (
    DataError,
    DuplicateHitError,
    EventParseError,
    GeometryMismatchError,
)
from isingtrack.event_model import hits_by_module, validate_geometry
from isingtrack.toy_detector import DetectorGeometry

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@st.composite
def events(draw, max_hits=40):
    n = draw(st.integers(0, max_hits))
    truths = draw(st.lists(st.one_of(st.none(), st.integers(0, 4)), min_size=n, max_size=n))
    hits = tuple(
        Hit(k, draw(finite), draw(finite), draw(finite), draw(st.integers(0, 30)), truths[k])
        for k in range(n)
    )
    particles = []
    for pid in sorted({t for t in truths if t is not None}):
        v = draw(st.tuples(*[st.floats(-1, 1)] * 3).filter(lambda v: math.hypot(*v) > 0.1))
        norm = math.sqrt(sum(c * c for c in v))
        direction = tuple(c / norm for c in v)
        if abs(math.sqrt(sum(c * c for c in direction)) - 1) > 1e-12:
            continue
        particles.append(TruthParticle(pid, (draw(finite), 0.0, 0.0), direction,
                                       tuple(h.id for h in hits if h.truth_id == pid)))
    return Event(hits, tuple(particles), draw(st.text(max_size=8).filter(lambda s: not s.startswith("toy:"))))


@settings(max_examples=60, deadline=None)
@given(events())
def test_json_round_trip_is_identity(tmp_path_factory, event):
    path = tmp_path_factory.mktemp("rt") / "e.json"
    write_event(event, path)
    assert read_event(path) == event


@settings(max_examples=60, deadline=None)
@given(events())
def test_csv_round_trip_preserves_hits(tmp_path_factory, event):
    path = tmp_path_factory.mktemp("rt") / "e.csv"
    write_event(event, path)
    back = read_event(path, geometry_id=event.geometry_id)
    assert back.hits == event.hits
    assert back.particles == ()


def test_thousand_hit_event_round_trips(tmp_path):
    event = generate_event(ToyConfig(n_layers=20, n_particles=50, smear_sigma=0.3, rng_seed=9))
    assert event.n_hits == 1000
    for fmt in ("json", "csv"):
        path = tmp_path / f"e.{fmt}"
        write_event(event, path)
        back = read_event(path, geometry_id=event.geometry_id)
        assert back.hits == event.hits
    assert read_event(tmp_path / "e.json") == event


def test_six_hit_file(tmp_path):
    event = generate_event(ToyConfig(n_layers=3, n_particles=2))
    write_event(event, tmp_path / "e.json")
    back = read_event(tmp_path / "e.json")
    assert back.n_hits == 6 and len(back.particles) == 2


def test_no_truth_omits_fields(tmp_path):
    event = Event((Hit(0, 1.0, 2.0, 3.0, 0), Hit(1, 1.5, 2.0, 6.0, 1)))
    path = tmp_path / "e.json"
    write_event(event, path)
    doc = json.loads(path.read_text())
    assert all("truth_id" not in h for h in doc["hits"])
    back = read_event(path)
    assert back == event and back.particles == ()


def test_empty_event(tmp_path):
    path = tmp_path / "e.json"
    path.write_text('{"hits": [], "particles": [], "geometry_id": "g"}')
    event = read_event(path)
    assert event.n_hits == 0


def test_duplicate_hit_id(tmp_path):
    path = tmp_path / "e.json"
    hit = {"id": 3, "x": 0.0, "y": 0.0, "z": 30.0, "module": 0}
    path.write_text(json.dumps({"hits": [hit, dict(hit)], "geometry_id": ""}))
    with pytest.raises(DuplicateHitError):
        read_event(path)
    csv_path = tmp_path / "e.csv"
    csv_path.write_text("id,x,y,z,module,truth_id\n1,0,0,30,0,\n1,0,0,60,1,\n")
    with pytest.raises(DuplicateHitError):
        read_event(csv_path)


def test_non_dense_ids_are_remapped(tmp_path):
    doc = {
        "hits": [
            {"id": 10, "x": 0.0, "y": 0.0, "z": 30.0, "module": 0, "truth_id": 7},
            {"id": 4, "x": 0.0, "y": 0.0, "z": 60.0, "module": 1, "truth_id": 7},
        ],
        "particles": [{"id": 7, "origin": [0, 0, 0], "direction": [0, 0, 1], "hit_ids": [10, 4]}],
        "geometry_id": "",
    }
    path = tmp_path / "e.json"
    path.write_text(json.dumps(doc))
    event = read_event(path)
    assert [h.id for h in event.hits] == [0, 1]
    assert event.particles[0].hit_ids == (0, 1)
    assert [event.external_id(h) for h in (0, 1)] == [10, 4]
    out = tmp_path / "out.json"
    write_event(event, out)
    assert [h["id"] for h in json.loads(out.read_text())["hits"]] == [10, 4]
    assert read_event(out) == event


def test_parse_error_locations(tmp_path):
    path = tmp_path / "e.csv"
    path.write_text("id,x,y,z,module,truth_id\n0,0,0,30,0,\n1,abc,0,60,1,\n")
    with pytest.raises(EventParseError) as info:
        read_event(path)
    assert info.value.line == 3 and info.value.field == "x"

    bad = tmp_path / "e.json"
    bad.write_text('{"hits": [{"id": 0, "x": 0, "y": 0, "z": 1}]}')
    with pytest.raises(EventParseError) as info:
        read_event(bad)
    assert info.value.field == "hits[0].module"

    broken = tmp_path / "b.json"
    broken.write_text('{"hits": [\n  {"id": 0,,}\n]}')
    with pytest.raises(EventParseError) as info:
        read_event(broken)
    assert info.value.line == 2


def test_module_z_mismatch(tmp_path):
    geom = DetectorGeometry.regular(2, 30.0, 50.0, 50.0)
    event = Event((Hit(0, 0.0, 0.0, 30.0, 0), Hit(1, 0.0, 0.0, 60.0 + 1e-7, 1)), (), geom.id)
    validate_geometry(event)
    shifted = Event((Hit(0, 0.0, 0.0, 30.0, 0), Hit(1, 0.0, 0.0, 60.001, 1)), (), geom.id)
    with pytest.raises(GeometryMismatchError):
        validate_geometry(shifted)
    path = tmp_path / "e.json"
    write_event(shifted, path)
    with pytest.raises(GeometryMismatchError):
        read_event(path)


def test_particle_invariants():
    with pytest.raises(DataError):
        TruthParticle(0, (0, 0, 0), (0.0, 0.0, 2.0))
    hits = (Hit(0, 0.0, 0.0, 30.0, 0, truth_id=1),)
    with pytest.raises(DataError):
        Event(hits, (TruthParticle(2, (0, 0, 0), (0, 0, 1), (0,)),))
    with pytest.raises(DataError):
        Event(hits, (TruthParticle(1, (0, 0, 0), (0, 0, 1), (5,)),))


def test_hits_by_module():
    event = generate_event(ToyConfig(n_layers=4, n_particles=3))
    groups = hits_by_module(event.hits)
    assert sorted(groups) == [0, 1, 2, 3]
    assert all(len(v) == 3 for v in groups.values())
