import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isingtrack import (
    ToyConfig,
    angular_step,
    build_couplings,
    build_doublets,
    build_graph,
    dp_angular_weight,
    generate_event,
)
from isingtrack.errors import DataError

from conftest import RESULTS_TABLE, line_event, make_event


@pytest.mark.parametrize("layers,particles,expected,_", RESULTS_TABLE)
def test_results_table_doublet_counts(layers, particles, expected, _):
    event = generate_event(ToyConfig(n_layers=layers, n_particles=particles, rng_seed=1))
    assert len(build_doublets(event)) == expected == (layers - 1) * particles**2


def test_single_layer_has_no_doublets():
    assert build_doublets(generate_event(ToyConfig(n_layers=1, n_particles=4))) == []


def test_doublets_match_pair_enumeration():
    event = generate_event(ToyConfig(n_layers=5, n_particles=3, hit_efficiency=0.7, rng_seed=4))
    for skip in (0, 1, 2):
        got = {(d.hit_a, d.hit_b) for d in build_doublets(event, max_skip=skip)}
        want = {
            (a.id, b.id)
            for a, b in itertools.product(event.hits, repeat=2)
            if 1 <= b.module - a.module <= 1 + skip
        }
        assert got == want
    for d in build_doublets(event, max_skip=1):
        assert d.seg[2] > 0 and d.r == pytest.approx(math.sqrt(sum(c * c for c in d.seg)))


def test_angular_step_examples():
    assert angular_step(1.0, 1e-5) == 1
    assert angular_step(1 - 1e-5, 1e-5) == 1
    assert angular_step(math.cos(0.01), 1e-5) == 0
    assert angular_step(1.0 + 5e-13, 0.0) == 1
    with pytest.raises(DataError):
        angular_step(1.01, 1e-5)
    with pytest.raises(DataError):
        angular_step(-1.1, 1e-5)


def test_dp_weight_examples():
    for lam in (0, 1, 5):
        assert dp_angular_weight(1.0, 1.0, 1.0, lam) == 0.5
    assert dp_angular_weight(0.0, 1.0, 1.0, 2) == 0.0
    assert dp_angular_weight(math.cos(0.1), 2.0, 2.0, 16) == pytest.approx(math.cos(0.1) ** 16 / 4, rel=1e-15)
    with pytest.raises(DataError):
        dp_angular_weight(1.0, 0.0, 1.0, 1)


def test_straight_track_single_coupling():
    couplings = build_couplings(build_doublets(line_event(3, (0.3, -0.2))), 1e-5)
    assert len(couplings) == 1 and couplings[0].f == 1


def test_two_disjoint_tracks():
    # two tracks on separate events glued together share no hits
    pts = [(0.2 * 30 * (m + 1), 0.1 * 30 * (m + 1), m, 0) for m in range(3)]
    pts += [(-0.4 * 30 * (m + 1), 0.3 * 30 * (m + 1), m, 1) for m in range(3)]
    graph = build_graph(make_event(pts), epsilon=1e-5)
    true = {(i, j) for i, j in graph.aligned_pairs().tolist()}
    assert len(true) == 2
    for i, j in true:
        ti = graph.event.hits[graph.hit_a[i]].truth_id
        assert ti == graph.event.hits[graph.hit_b[j]].truth_id


def test_bent_triplet():
    # 0.5 rad kink in the xz-plane at the middle hit
    z = 30.0
    x2 = z * math.tan(0.5)
    event = make_event([(0.0, 0.0, 0, None), (0.0, 0.0, 1, None), (x2, 0.0, 2, None)])
    (c,) = build_couplings(build_doublets(event), 1e-5)
    assert c.cos_theta == pytest.approx(math.cos(0.5), rel=1e-12)
    assert c.f == 0


def test_coupling_records_follow_shared_hits():
    event = generate_event(ToyConfig(n_layers=4, n_particles=3, rng_seed=2))
    graph = build_graph(event, epsilon=1e-5, lam=3)
    pairs = list(zip(graph.ci.tolist(), graph.cj.tolist()))
    assert len(pairs) == len(set(pairs))
    want = {
        (i, j)
        for i, j in itertools.product(range(graph.n), repeat=2)
        if graph.hit_b[i] == graph.hit_a[j]
    }
    assert set(pairs) == want
    for c in graph.couplings:
        si, sj = np.array(graph.doublets[c.i].seg), np.array(graph.doublets[c.j].seg)
        cos = si @ sj / (np.linalg.norm(si) * np.linalg.norm(sj))
        assert c.cos_theta == pytest.approx(cos, abs=1e-14)
        assert c.f == angular_step(c.cos_theta, 1e-5)
        assert c.dp_weight == pytest.approx(c.cos_theta**3 / (graph.r[c.i] + graph.r[c.j]), rel=1e-12)
    assert [(c.i, c.j) for c in build_couplings(graph.doublets, 1e-5, 3)] == pairs


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0, 0.5), st.floats(0, 0.5))
def test_epsilon_monotonicity(seed, e1, e2):
    e1, e2 = sorted((e1, e2))
    event = generate_event(ToyConfig(n_layers=4, n_particles=3, rng_seed=seed))
    small = {tuple(p) for p in build_graph(event, e1).aligned_pairs().tolist()}
    large = {tuple(p) for p in build_graph(event, e2).aligned_pairs().tolist()}
    assert small <= large


def test_epsilon_two_aligns_everything():
    graph = build_graph(generate_event(ToyConfig(n_layers=4, n_particles=4, rng_seed=6)), epsilon=2.0)
    assert graph.f.all() and len(graph.f) > 0
