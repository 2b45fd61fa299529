import math

import numpy as np
import pytest

from mqcsim.errors import DimensionCapError, MqcsimError
from mqcsim.geometry import (CouplingTable, SiteSet, build_chain, build_fcc,
                             couplings, euler_zyz, nn_prefactor,
                             powder_orientations)


class TestBuildFcc:
    def test_first_shell_distances(self):
        sites = build_fcc(9.334, 13)
        d = np.linalg.norm(sites.positions - sites.positions[0], axis=1)
        assert sites.n == 13
        # central site at the origin, 12 first neighbors at 6.600
        assert d[0] == 0.0
        assert np.all(np.abs(d[1:] - 6.600) < 1e-3)

    def test_single_site(self):
        sites = build_fcc(9.334, 1)
        assert sites.n == 1
        assert np.allclose(sites.positions, 0.0)

    def test_two_shells(self):
        sites = build_fcc(9.334, 19)
        d = np.round(np.linalg.norm(sites.positions, axis=1), 3)
        assert np.count_nonzero(d == 6.600) == 12
        assert np.count_nonzero(d == 9.334) == 6

    def test_shell_sequence(self):
        # sorted unique distances follow a/sqrt(2), a, a*sqrt(3/2), ...
        a = 2.0
        sites = build_fcc(a, 60)
        d = np.unique(np.round(np.linalg.norm(sites.positions, axis=1), 9))
        expected = [0.0, a / math.sqrt(2.0), a, a * math.sqrt(1.5)]
        assert np.allclose(d[:4], expected)

    def test_deterministic_ordering(self):
        s1 = build_fcc(1.0, 19)
        s2 = build_fcc(1.0, 19)
        assert np.array_equal(s1.positions, s2.positions)

    def test_bad_inputs(self):
        with pytest.raises(MqcsimError):
            build_fcc(0.0, 4)
        with pytest.raises(MqcsimError):
            build_fcc(1.0, 0)
        with pytest.raises(DimensionCapError):
            build_fcc(1.0, 19, max_spins=14)


class TestBuildChain:
    def test_two_sites(self):
        sites = build_chain(1.0, 2)
        assert np.isclose(np.linalg.norm(sites.positions[1] - sites.positions[0]), 1.0)

    def test_end_to_end(self):
        sites = build_chain(1.0, 3)
        assert np.isclose(np.linalg.norm(sites.positions[2] - sites.positions[0]), 2.0)

    def test_nearest_neighbor_pairs(self):
        sites = build_chain(2.0, 5)
        d = np.linalg.norm(np.diff(sites.positions, axis=0), axis=1)
        assert len(d) == 4
        assert np.allclose(d, 2.0)

    def test_axis(self):
        sites = build_chain(1.0, 3, axis=(1.0, 0.0, 0.0))
        assert np.allclose(sites.positions[:, 1:], 0.0)

    def test_bad_inputs(self):
        with pytest.raises(MqcsimError):
            build_chain(1.0, 0)
        with pytest.raises(MqcsimError):
            build_chain(-1.0, 2)
        with pytest.raises(DimensionCapError):
            build_chain(1.0, 15, max_spins=14)


class TestCouplings:
    def test_along_field_axis(self):
        table = couplings(build_chain(1.0, 2))  # chain along z = field axis
        assert np.isclose(table.entries[(0, 1)], -2.0)

    def test_magic_angle(self):
        c = 1.0 / math.sqrt(3.0)
        s = math.sqrt(1.0 - c * c)
        sites = SiteSet(positions=np.array([[0.0, 0.0, 0.0], [s, 0.0, c]]))
        table = couplings(sites)
        assert abs(table.entries[(0, 1)]) < 1e-14

    def test_perpendicular(self):
        sites = SiteSet(positions=np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]]))
        table = couplings(sites)
        assert np.isclose(table.entries[(0, 1)], 1.0 / 8.0)

    def test_angle_symmetry(self):
        # d(theta) = d(pi - theta) at fixed r
        for theta in (0.3, 0.8, 1.2):
            up = SiteSet(positions=np.array(
                [[0.0, 0.0, 0.0],
                 [math.sin(theta), 0.0, math.cos(theta)]]))
            dn = SiteSet(positions=np.array(
                [[0.0, 0.0, 0.0],
                 [math.sin(math.pi - theta), 0.0, math.cos(math.pi - theta)]]))
            d_up = couplings(up).entries[(0, 1)]
            d_dn = couplings(dn).entries[(0, 1)]
            assert np.isclose(d_up, d_dn)

    def test_distance_scaling(self):
        sites = build_fcc(1.0, 6)
        doubled = SiteSet(positions=2.0 * sites.positions)
        t1 = couplings(sites)
        t2 = couplings(doubled)
        for pair, d in t1.entries.items():
            assert np.isclose(t2.entries[pair], d / 8.0)

    def test_orientation_rotation_invariance(self):
        angles = (0.4, 1.1, -0.7)
        rot = euler_zyz(*angles)
        sites = build_fcc(1.0, 8)
        rotated_back = SiteSet(positions=sites.positions @ rot)  # R^-1 applied
        t_direct = couplings(sites)
        t_undone = couplings(rotated_back, orientation=angles)
        for pair, d in t_direct.entries.items():
            assert np.isclose(t_undone.entries[pair], d, atol=1e-12)

    def test_cutoff(self):
        table = couplings(build_chain(1.0, 3, axis=(1.0, 0.0, 0.0)), cutoff=1.5)
        assert (0, 2) not in table.entries
        assert (0, 1) in table.entries and (1, 2) in table.entries
        with pytest.raises(MqcsimError):
            couplings(build_chain(1.0, 2), cutoff=0.0)

    def test_coincident_sites_rejected(self):
        with pytest.raises(MqcsimError):
            SiteSet(positions=np.zeros((2, 3)))


class TestPowderOrientations:
    def test_seed_determinism(self):
        assert powder_orientations(1, 42) == powder_orientations(1, 42)

    def test_angular_average(self):
        count = 10**4
        angles = powder_orientations(count, 3)
        # (1 - 3 cos^2 theta) averaged over the sphere is 0
        axis = np.array([0.0, 0.0, 1.0])
        vals = []
        for a, b, g in angles:
            z = (euler_zyz(a, b, g) @ axis)[2]
            vals.append(1.0 - 3.0 * z * z)
        assert abs(np.mean(vals)) < 3.0 / math.sqrt(count)

    def test_different_seeds_differ(self):
        assert powder_orientations(2, 1) != powder_orientations(2, 2)

    def test_count_validation(self):
        with pytest.raises(MqcsimError):
            powder_orientations(0, 1)


class TestSerialization:
    def test_siteset_round_trip(self):
        sites = build_fcc(9.334, 13)
        back = SiteSet.from_text(sites.to_text())
        assert back.label == "fcc"
        assert np.array_equal(back.positions, sites.positions)

    def test_coupling_table_round_trip(self):
        table = couplings(build_fcc(1.0, 6), orientation=(0.1, 0.2, 0.3),
                          prefactor=2.5)
        back = CouplingTable.from_text(table.to_text())
        assert back.n_sites == table.n_sites
        assert back.prefactor == table.prefactor
        assert back.orientation == table.orientation
        assert back.entries == table.entries


def test_nn_prefactor():
    sites = build_chain(2.0, 3, axis=(1.0, 0.0, 0.0))
    pre = nn_prefactor(sites, 1.0)
    table = couplings(sites, prefactor=pre)
    assert np.isclose(table.entries[(0, 1)], 1.0)
    with pytest.raises(MqcsimError):
        nn_prefactor(build_chain(1.0, 1), 1.0)
