import csv

import numpy as np
import pytest
from scipy.sparse.csgraph import connected_components
from hypothesis import given, settings
from hypothesis import strategies as st

from hygrotherm import materials as mt
from hygrotherm.assembly import NodalState
from hygrotherm.mesh import BoundaryTag, build_structured_mesh
from hygrotherm.solver import Trajectory
from hygrotherm.spalling import (
    SpallingTracker, Zone, _adjacency_matrix, classify_zones, evaluate_criterion, track, write_report,
)

FIRE = BoundaryTag.FIRE


def uniform(mesh, theta, P, w=50.0):
    n = mesh.n_nodes
    return NodalState(np.full(n, w), np.full(n, float(theta)), np.full(n, float(P)))


@pytest.fixture(scope="module")
def square():
    return build_structured_mesh(0.2, 0.2, 8, 8, [FIRE] * 4)


class TestCriterion:
    def test_hot_pressurised_element_spalls(self):
        m = build_structured_mesh(1, 1, 1, 1, [FIRE] * 4)
        margin = evaluate_criterion(uniform(m, 600.0, 25e6), m, phi=0.1, f_t0=2e6)
        assert margin[0] == pytest.approx(2.5e6 - 1.0926e6, rel=1e-6)
        assert margin[0] > 0

    def test_exhausted_strength(self):
        m = build_structured_mesh(1, 1, 1, 1, [FIRE] * 4)
        assert evaluate_criterion(uniform(m, 1500.0, 1.0), m)[0] > 0

    def test_no_pressure_no_spalling(self):
        m = build_structured_mesh(1, 1, 1, 1, [FIRE] * 4)
        for theta in (300.0, 700.0, 1400.0):
            margin = evaluate_criterion(uniform(m, theta, 0.0), m)[0]
            assert margin == pytest.approx(-mt.tensile_strength(theta)[0]) and margin < 0

    def test_sampled_at_element_centre(self):
        m = build_structured_mesh(1, 1, 1, 1, [FIRE] * 4)
        s = uniform(m, 600.0, 0.0)
        s.P[:] = [1e7, 3e7, 1e7, 3e7]
        assert evaluate_criterion(s, m, phi=0.1)[0] == pytest.approx(0.1 * 2e7 - mt.tensile_strength(600.0)[0])

    def test_defaults_from_material(self, square):
        s = uniform(square, 650.0, 2e7)
        mat = mt.MaterialConstants(porosity=0.2, f_t0=3e6)
        np.testing.assert_allclose(evaluate_criterion(s, square, mat=mat),
                                   evaluate_criterion(s, square, phi=0.2, f_t0=3e6))

    def test_monotone_in_pressure_and_temperature(self, square):
        rng = np.random.default_rng(2)
        n = square.n_nodes
        theta = rng.uniform(400, 1400, n)
        P = rng.uniform(0, 3e7, n)
        early = NodalState(np.zeros(n), theta, P)
        late = NodalState(np.zeros(n), theta + rng.uniform(1, 50, n), P + rng.uniform(1, 1e6, n))
        assert np.all(evaluate_criterion(late, square) >= evaluate_criterion(early, square))


class TestZones:
    def test_strip(self):
        strip = build_structured_mesh(3, 1, 3, 1, [FIRE] * 4)
        zones = classify_zones(strip, [False, True, False])
        assert list(zones) == [Zone.C_STABLE, Zone.A_SPALLED, Zone.B_UNSTABLE]

    def test_nothing_spalled(self, square):
        assert np.all(classify_zones(square, np.zeros(square.n_elements, bool)) == Zone.C_STABLE)

    def test_everything_spalled(self, square):
        assert np.all(classify_zones(square, np.ones(square.n_elements, bool)) == Zone.A_SPALLED)

    def test_ring_cuts_off_the_rim(self, square):
        c = square.element_centers()
        r = np.max(np.abs(c - 0.1), axis=1)
        ring = (r > 0.05) & (r < 0.075)
        zones = classify_zones(square, ring)
        assert np.all(zones[ring] == Zone.A_SPALLED)
        assert np.all(zones[r < 0.05] == Zone.C_STABLE)
        assert np.all(zones[r > 0.075] == Zone.B_UNSTABLE)

    def test_rejects_wrong_length(self, square):
        with pytest.raises(ValueError):
            classify_zones(square, [True, False])


def _check_invariants(mesh, zones):
    assert len(zones) == mesh.n_elements
    assert set(np.unique(zones)) <= {int(z) for z in Zone}
    adj = _adjacency_matrix(mesh).tocoo()
    for a, b in zip(adj.row, adj.col):
        # B and C are never edge-adjacent: B is cut off from C by spalled elements
        assert {int(zones[a]), int(zones[b])} != {Zone.B_UNSTABLE, Zone.C_STABLE}
    intact = np.nonzero(zones != Zone.A_SPALLED)[0]
    if intact.size and np.any(zones == Zone.C_STABLE):
        sub = _adjacency_matrix(mesh)[intact][:, intact]
        _, labels = connected_components(sub, directed=False)
        core = labels[zones[intact] == Zone.C_STABLE]
        assert np.unique(core).size == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.data())
def test_zone_invariants(nx, ny, data):
    mesh = build_structured_mesh(1.0, 1.0, nx, ny, [FIRE] * 4)
    flags = np.array(data.draw(st.lists(st.booleans(), min_size=mesh.n_elements, max_size=mesh.n_elements)))
    zones = classify_zones(mesh, flags)
    np.testing.assert_array_equal(zones == Zone.A_SPALLED, flags)
    _check_invariants(mesh, zones)
    if not flags.all():
        assert np.any(zones == Zone.C_STABLE)


class TestTracking:
    def _trajectory(self, mesh, pressures):
        tr = Trajectory()
        for k, P in enumerate(pressures):
            tr.append(60.0 * k, uniform(mesh, 700.0, P))
        return tr

    def test_ambient_trajectory_is_all_stable(self, square):
        reports = track(self._trajectory(square, [2754.2] * 4), square)
        assert all(r.count(Zone.C_STABLE) == square.n_elements for r in reports)

    def test_spalling_is_irreversible(self, square):
        tr = Trajectory()
        hot = uniform(square, 700.0, 2754.2)
        hot.P[:20] = 4e7
        tr.append(0.0, uniform(square, 700.0, 2754.2))
        tr.append(60.0, hot)
        tr.append(120.0, uniform(square, 700.0, 2754.2))
        reports = track(tr, square)
        assert reports[0].count(Zone.A_SPALLED) == 0
        first = reports[1].spalled
        assert first.any()
        np.testing.assert_array_equal(reports[2].spalled, first)
        assert reports[2].margins.max() < 0
        for r in reports:
            _check_invariants(square, r.zones)
            assert sum(r.count(z) for z in Zone) == square.n_elements

    def test_tracker_matches_track(self, square):
        tr = self._trajectory(square, [1e3, 1e7, 3e7])
        tracker = SpallingTracker(square)
        online = [tracker.update(t, s) for t, s in zip(tr.times, tr.states)]
        for a, b in zip(online, track(tr, square)):
            np.testing.assert_array_equal(a.zones, b.zones)

    def test_empty_trajectory(self, square):
        with pytest.raises(ValueError):
            track(Trajectory(), square)


def test_report_csv(tmp_path, square):
    s = uniform(square, 700.0, 2754.2)
    s.P[:5] = 4e7
    rep = SpallingTracker(square).update(600.0, s)
    path = write_report([rep], tmp_path / "spalling.csv")
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["time_s", "element_id", "zone", "margin_Pa"]
    assert len(rows) == 1 + square.n_elements
    assert {r[2] for r in rows[1:]} <= {z.name for z in Zone}
    assert rows[1][2] == "A_SPALLED" and float(rows[1][3]) == rep.margins[0]
    with pytest.raises(OSError, match="spalling report"):
        write_report([rep], tmp_path / "missing" / "x.csv")
