"""Tests for the physical-optics accumulation and RCS conversion."""

import math

import numpy as np
import pytest

import sbr
from sbr.errors import NumericalError, ValidationError
from sbr.transport import HitRecords

from meshes import plate_mesh


def make_records(normals, paths, bounces, valid=None, escaped=None):
    n = len(paths)
    normals = np.asarray(normals, dtype=np.float64).reshape(n, 3)
    valid = np.ones(n, bool) if valid is None else np.asarray(valid, bool)
    escaped = np.ones(n, bool) if escaped is None else np.asarray(escaped, bool)
    return HitRecords(valid=valid, normal0=normals,
                      path=np.asarray(paths, dtype=np.float64),
                      bounces=np.asarray(bounces, dtype=np.int32),
                      escaped=escaped, out_dir=np.zeros((n, 3)))


K_INC = np.array([0.0, 0.0, -1.0])


class TestScatterParams:
    def test_k_lambda_consistency(self):
        p = sbr.ScatterParams.from_wavelength(0.03, 1e-4)
        assert p.k * p.wavelength == pytest.approx(2 * math.pi, rel=1e-12)

    def test_from_frequency(self):
        p = sbr.ScatterParams.from_frequency(10e9, 1e-6)
        assert p.wavelength == pytest.approx(0.0299792458)

    def test_gamma_bound(self):
        with pytest.raises(ValidationError):
            sbr.ScatterParams.from_wavelength(0.1, 1e-4, gamma=-1.5)

    def test_inconsistent_k_rejected(self):
        with pytest.raises(ValidationError):
            sbr.ScatterParams(wavelength=0.1, k=1.0, gamma=-1.0, cell_area=1e-4)


class TestAccumulate:
    def test_empty_sum(self):
        rec = make_records(np.zeros((0, 3)), [], [])
        p = sbr.ScatterParams.from_wavelength(0.1, 1e-4)
        assert sbr.accumulate(rec, K_INC, p) == 0j

    def test_single_record_closed_form(self):
        lam, da, path = 0.1, 4e-4, 2.7
        k = 2 * math.pi / lam
        rec = make_records([[0, 0, 1.0]], [path], [1])
        p = sbr.ScatterParams.from_wavelength(lam, da, gamma=-1.0)
        a = sbr.accumulate(rec, K_INC, p)
        assert abs(a) == pytest.approx(k * da / (2 * math.pi), rel=1e-12)
        expected_arg = (math.pi / 2 + math.pi - 2 * k * path) % (2 * math.pi)
        assert math.atan2(a.imag, a.real) % (2 * math.pi) == \
            pytest.approx(expected_arg, abs=1e-9)

    def test_two_records_phasing(self):
        # Round-trip phase is 2kR: an R offset of lambda/8 puts two equal
        # records in quadrature (|A| grows by sqrt(2)); lambda/4 puts them
        # in anti-phase and cancels the pair.
        lam, da = 0.25, 1e-4
        rec1 = make_records([[0, 0, 1.0]], [1.0], [1])
        p = sbr.ScatterParams.from_wavelength(lam, da, gamma=-1.0)
        single = abs(sbr.accumulate(rec1, K_INC, p))

        quad = make_records([[0, 0, 1.0], [0, 0, 1.0]], [1.0, 1.0 + lam / 8],
                            [1, 1])
        both = abs(sbr.accumulate(quad, K_INC, p))
        assert both == pytest.approx(math.sqrt(2) * single, rel=1e-12)

        anti = make_records([[0, 0, 1.0], [0, 0, 1.0]], [1.0, 1.0 + lam / 4],
                            [1, 1])
        assert abs(sbr.accumulate(anti, K_INC, p)) < 1e-12 * single

    def test_grazing_and_backface_skipped(self):
        rec = make_records([[0, 0, 1.0], [0, 0, -1.0], [1.0, 0, 0]],
                           [1.0, 1.0, 1.0], [1, 1, 1])
        p = sbr.ScatterParams.from_wavelength(0.1, 1e-4)
        a_all = sbr.accumulate(rec, K_INC, p)
        only_first = make_records([[0, 0, 1.0]], [1.0], [1])
        assert a_all == sbr.accumulate(only_first, K_INC, p)

    def test_trapped_rays_dropped_by_default(self):
        rec = make_records([[0, 0, 1.0], [0, 0, 1.0]], [1.0, 2.0], [1, 3],
                           escaped=[True, False])
        p = sbr.ScatterParams.from_wavelength(0.1, 1e-4)
        dropped = sbr.accumulate(rec, K_INC, p)
        kept = sbr.accumulate(rec, K_INC, p, count_trapped=True)
        assert dropped != kept
        only_escaped = make_records([[0, 0, 1.0]], [1.0], [1])
        assert dropped == sbr.accumulate(only_escaped, K_INC, p)

    def test_gamma_sign_single_bounce_invariant(self):
        rec = make_records([[0, 0, 1.0], [0, 0, 1.0]], [1.0, 1.3], [1, 1])
        pm = sbr.ScatterParams.from_wavelength(0.1, 1e-4, gamma=-1.0)
        pp = sbr.ScatterParams.from_wavelength(0.1, 1e-4, gamma=1.0)
        am = sbr.accumulate(rec, K_INC, pm)
        ap = sbr.accumulate(rec, K_INC, pp)
        assert abs(am) == pytest.approx(abs(ap), rel=1e-15)

    def test_global_phase_invariance(self):
        rng = np.random.default_rng(10)
        n = 257
        normals = np.column_stack([rng.uniform(-0.2, 0.2, n),
                                   rng.uniform(-0.2, 0.2, n),
                                   np.ones(n)])
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        paths = rng.uniform(3.0, 4.0, n)
        rec = make_records(normals, paths, np.ones(n, int))
        p = sbr.ScatterParams.from_wavelength(0.07, 2e-4)
        base = sbr.rcs(sbr.accumulate(rec, K_INC, p)).sigma_m2
        shifted = make_records(normals, paths + 12.34, np.ones(n, int))
        moved = sbr.rcs(sbr.accumulate(shifted, K_INC, p)).sigma_m2
        assert moved == pytest.approx(base, rel=1e-10)

    def test_linearity_over_partition(self):
        rng = np.random.default_rng(11)
        n = 100
        normals = np.tile([0.0, 0, 1.0], (n, 1))
        paths = rng.uniform(1.0, 2.0, n)
        rec = make_records(normals, paths, np.ones(n, int))
        p = sbr.ScatterParams.from_wavelength(0.1, 1e-4)
        whole = sbr.accumulate(rec, K_INC, p)
        first = make_records(normals[:60], paths[:60], np.ones(60, int))
        second = make_records(normals[60:], paths[60:], np.ones(40, int))
        split = sbr.accumulate(first, K_INC, p) + sbr.accumulate(second, K_INC, p)
        assert split == pytest.approx(whole, rel=1e-12)

    def test_deterministic_rerun(self):
        rng = np.random.default_rng(12)
        n = 1000
        normals = np.tile([0.0, 0, 1.0], (n, 1))
        rec = make_records(normals, rng.uniform(1, 5, n), np.ones(n, int))
        p = sbr.ScatterParams.from_wavelength(0.03, 1e-4)
        a = sbr.accumulate(rec, K_INC, p)
        b = sbr.accumulate(rec, K_INC, p)
        assert a == b  # bit identical

    def test_nonfinite_record_reported_with_index(self):
        rec = make_records([[0, 0, 1.0], [0, 0, 1.0]], [1.0, np.inf], [1, 1])
        p = sbr.ScatterParams.from_wavelength(0.1, 1e-4)
        with pytest.raises(NumericalError, match="index 1"):
            sbr.accumulate(rec, K_INC, p)


class TestPairwiseSum:
    def test_matches_fsum(self):
        rng = np.random.default_rng(2)
        vals = rng.normal(size=1023) + 1j * rng.normal(size=1023)
        got = sbr.pairwise_sum(vals)
        assert got.real == pytest.approx(math.fsum(vals.real), rel=1e-13)
        assert got.imag == pytest.approx(math.fsum(vals.imag), rel=1e-13)

    def test_empty_and_single(self):
        assert sbr.pairwise_sum(np.array([], dtype=complex)) == 0j
        assert sbr.pairwise_sum(np.array([3 + 4j])) == 3 + 4j


class TestRcs:
    def test_zero_amplitude_sentinel(self):
        val = sbr.rcs(0j)
        assert val.sigma_m2 == 0.0
        assert val.sigma_dbsm == -math.inf

    def test_unit_amplitude(self):
        val = sbr.rcs(1.0 + 0j)
        assert val.sigma_m2 == pytest.approx(4 * math.pi)
        assert val.sigma_dbsm == pytest.approx(10.99, abs=0.01)

    def test_quadratic_scaling(self):
        a = sbr.rcs(0.7 + 0.2j)
        b = sbr.rcs(1.4 + 0.4j)
        assert b.sigma_m2 == pytest.approx(4 * a.sigma_m2, rel=1e-12)
        assert b.sigma_dbsm - a.sigma_dbsm == pytest.approx(6.02, abs=0.01)


class TestPlateReference:
    def test_unit_values(self):
        assert sbr.plate_reference(1.0, 1.0) == pytest.approx(4 * math.pi)

    def test_wavelength_scaling(self):
        assert sbr.plate_reference(1.0, 0.1) == pytest.approx(400 * math.pi)

    def test_side_scaling(self):
        assert sbr.plate_reference(2.0, 1.0) == \
            pytest.approx(16 * sbr.plate_reference(1.0, 1.0))


class TestPlateConvergence:
    """Traced flat plate vs the analytic normal-incidence closed form."""

    def solve(self, spacing, lam, margin):
        mesh = plate_mesh(1.0)
        tree = sbr.build(mesh)
        d = sbr.IncidentDirection(0.0, 0.0)
        grid = sbr.build_aperture(mesh.aabb, d, spacing, margin=margin)
        rec = sbr.trace_grid(tree, mesh, grid, sbr.TraceParams(max_bounces=3))
        p = sbr.ScatterParams.from_wavelength(lam, grid.cell_area)
        return sbr.rcs(sbr.accumulate(rec, d.k_inc, p)).sigma_m2

    def test_fine_sampling_within_one_percent(self):
        lam = 0.2
        ref = sbr.plate_reference(1.0, lam)
        for spacing in (lam / 5, lam / 8, lam / 10):
            sigma = self.solve(spacing, lam, margin=0.0)
            assert abs(sigma - ref) / ref < 0.01

    def test_error_grows_when_undersampled(self):
        # Misaligned grid (margin > 0): area quantization error scales with
        # the spacing once the grid stops resolving the plate edges.
        lam = 0.2
        ref = sbr.plate_reference(1.0, lam)
        errs = [abs(self.solve(ds, lam, margin=0.037) - ref) / ref
                for ds in (lam / 5, lam / 2, 2 * lam)]
        assert errs[0] < 0.05
        assert errs[-1] > max(0.05, errs[0])
