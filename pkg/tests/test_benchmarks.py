import pytest

from mcsn.benchmarks import dogleg_problem, homogeneous_slab, reed_problem
from mcsn.geometry import locate, material_at


class TestReed:
    def test_region_values(self):
        prob = reed_problem()
        assert material_at(prob, locate(prob, 5.5)) == (0.1, 0.9, 1.0)
        assert material_at(prob, locate(prob, 0.5)) == (50.0, 0.0, 50.0)
        assert material_at(prob, locate(prob, 2.5)) == (5.0, 0.0, 0.0)
        assert material_at(prob, locate(prob, 4.0)) == (0.0, 0.0, 0.0)
        assert material_at(prob, locate(prob, 7.0)) == (0.1, 0.9, 0.0)

    def test_mirror_symmetry(self):
        prob = reed_problem()
        for x in (0.5, 2.5, 4.0, 5.5, 7.0, 7.9):
            assert material_at(prob, locate(prob, x)) == \
                material_at(prob, locate(prob, -x))

    def test_total_source(self):
        # 2 * (2 cm * 50 + 1 cm * 1)
        assert reed_problem().source_total == pytest.approx(202.0, rel=1e-12)

    def test_domain_and_default_resolution(self):
        prob = reed_problem()
        assert prob.mesh.nx == 80
        assert prob.mesh.edges_x[0] == -8.0 and prob.mesh.edges_x[-1] == 8.0

    def test_misaligned_cells_rejected(self):
        with pytest.raises(ValueError):
            reed_problem(cells=50)
        reed_problem(cells=160)  # multiples of 16 are fine


class TestDogleg:
    def test_duct_is_near_vacuum(self):
        prob = dogleg_problem()
        for xy in ((5.0, 15.0), (15.0, 25.0), (15.0, 45.0)):
            sa, ss, q = material_at(prob, locate(prob, xy))
            assert sa + ss == pytest.approx(1e-4)
            assert q == 0.0

    def test_source_sits_in_shield_material(self):
        prob = dogleg_problem()
        sa, ss, q = material_at(prob, locate(prob, (5.0, 5.0)))
        assert (sa, ss, q) == (0.05, 0.05, 1.0)

    def test_shield_scattering_ratio(self):
        prob = dogleg_problem()
        sa, ss, q = material_at(prob, locate(prob, (25.0, 5.0)))
        assert sa == ss == 0.05
        assert q == 0.0

    def test_total_source_is_area_times_strength(self):
        assert dogleg_problem().source_total == pytest.approx(100.0, rel=1e-12)

    def test_mesh_shape(self):
        prob = dogleg_problem()
        assert (prob.mesh.nx, prob.mesh.ny) == (30, 50)
        assert prob.mesh.domain_volume == pytest.approx(1500.0)

    def test_misalignment_rejected(self):
        with pytest.raises(ValueError):
            dogleg_problem(nx=31)


def test_homogeneous_slab_helper():
    prob = homogeneous_slab(width=10.0, cells=20, sigma_a=0.2, sigma_s=0.3, q=2.0)
    assert prob.source_total == pytest.approx(20.0)
    assert material_at(prob, 3) == (0.2, 0.3, 2.0)
