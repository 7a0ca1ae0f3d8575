import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from learnquad.exceptions import InvalidArgumentError
from learnquad.levy import (
    Lattice,
    LatticeField,
    LevyLaw,
    SmoothingParams,
    extract_modes,
    extract_modes_batch,
    field_covariance_oracle,
    interpolate_bilinear,
    laplacian_symbol,
    mode_index,
    noise_density,
    psi_second_derivative_at_zero,
    read_field,
    read_modes_csv,
    reconstruct_field,
    sample_noise,
    sample_noise_batch,
    smooth_field,
    write_field,
    write_modes_csv,
)

ALL_LAWS = [LevyLaw.gaussian(0.5), LevyLaw.poisson(0.5), LevyLaw.gamma(0.5, 1.0), LevyLaw.bigamma(0.5, 1.0)]


class TestLevyLaw:
    @pytest.mark.parametrize(
        "law,expected",
        [
            (LevyLaw.gaussian(0.5), -0.5),
            (LevyLaw.poisson(0.5), -0.5),
            (LevyLaw.gamma(0.5, 1.0), -0.5),
            (LevyLaw.bigamma(0.5, 1.0), -0.5),
            (LevyLaw.gamma(0.8, 2.0), -0.2),
        ],
    )
    def test_second_derivative(self, law, expected):
        assert psi_second_derivative_at_zero(law) == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize("law", ALL_LAWS + [LevyLaw.bigamma(1.3, 0.7)])
    def test_second_derivative_matches_finite_difference(self, law):
        h = 1e-4
        fd = (law.psi(h) - 2 * law.psi(0.0) + law.psi(-h)) / h**2
        assert fd.real == pytest.approx(psi_second_derivative_at_zero(law), rel=1e-6)

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            LevyLaw("cauchy", lam=1.0)
        with pytest.raises(InvalidArgumentError):
            LevyLaw.gamma(0.5, -1.0)
        with pytest.raises(InvalidArgumentError):
            LevyLaw.gaussian(0.0)

    def test_from_name_matches_variance(self):
        for kind in ("gaussian", "poisson", "gamma", "bigamma"):
            law = LevyLaw.from_name(kind, variance=0.7, beta=2.0)
            assert psi_second_derivative_at_zero(law) == pytest.approx(-0.7)


class TestSampling:
    measure = 0.04
    n = 100_000

    def test_gaussian_variance(self):
        draws = LevyLaw.gaussian(0.5).sample_cells(np.random.default_rng(0), self.measure, self.n)
        var = draws.var(ddof=1)
        se = 0.02 * math.sqrt(2 / (self.n - 1))
        assert abs(var - 0.02) < 3 * se

    def test_poisson_mean(self):
        draws = LevyLaw.poisson(0.5).sample_cells(np.random.default_rng(1), self.measure, self.n)
        se = math.sqrt(0.02 / self.n)
        assert abs(draws.mean() - 0.02) < 3 * se

    def test_bigamma_characteristic_function(self):
        law = LevyLaw.bigamma(0.5, 1.0)
        measure = 2.0
        draws = law.sample_cells(np.random.default_rng(2), measure, self.n)
        assert abs(draws.mean()) < 3 * math.sqrt(law.lam * measure / self.n)
        for t in (0.5, 1.0, 2.0):
            empirical = np.mean(np.exp(1j * t * draws))
            exact = (1 + t**2 / law.beta**2) ** (-law.lam * measure / 2)
            assert abs(empirical - exact) < 4 / math.sqrt(self.n)
            assert np.exp(measure * law.psi(t)) == pytest.approx(exact, rel=1e-12)

    def test_gamma_characteristic_function(self):
        law = LevyLaw.gamma(0.5, 2.0)
        draws = law.sample_cells(np.random.default_rng(3), 1.0, self.n)
        assert draws.min() >= 0
        for t in (0.5, 3.0):
            empirical = np.mean(np.exp(1j * t * draws))
            assert abs(empirical - np.exp(law.psi(t))) < 4 / math.sqrt(self.n)

    def test_deterministic(self):
        lat = Lattice(11)
        for law in ALL_LAWS:
            a = sample_noise(lat, law, 42).values
            b = sample_noise(lat, law, 42).values
            np.testing.assert_array_equal(a, b)
        batch = sample_noise_batch(lat, ALL_LAWS[0], 5, 3)
        assert batch.shape == (3, 11, 11)


class TestLattice:
    def test_even_rejected(self):
        with pytest.raises(InvalidArgumentError):
            Lattice(10)

    def test_geometry(self):
        lat = Lattice(5)
        assert lat.spacing == pytest.approx(0.4)
        assert lat.cell_measure == pytest.approx(0.16)
        assert lat.centers[2] == 0.0
        assert lat.points.shape == (25, 2)
        assert sorted(set(lat.wavenumbers[..., 0].ravel())) == [-2, -1, 0, 1, 2]


class TestSymbol:
    def test_zero(self):
        assert laplacian_symbol(Lattice(9), [0.0, 0.0]) == 0.0

    def test_nonpositive(self):
        lat = Lattice(15)
        kappa = np.pi * lat.wavenumbers
        assert np.all(laplacian_symbol(lat, kappa) <= 0)

    def test_fine_lattice_limit(self):
        lat = Lattice(101)  # spacing 0.0198
        value = laplacian_symbol(lat, [np.pi, 0.0])
        assert value == pytest.approx(-np.pi**2 / 2, rel=0.02)


class TestSmoothing:
    params = SmoothingParams(3.0, 0.01)

    def test_constant(self):
        lat = Lattice(9)
        out = smooth_field(LatticeField(lat, np.full(lat.shape, 2.5)), self.params)
        np.testing.assert_allclose(out.values, 2.5 * 0.01 ** (-3.0), rtol=1e-12)

    def test_alpha_zero_identity(self):
        lat = Lattice(9)
        noise = sample_noise(lat, LevyLaw.gaussian(), 0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            out = smooth_field(noise, SmoothingParams(0.0, 0.3))
        np.testing.assert_allclose(out.values, noise.values, atol=1e-12)

    def test_small_alpha_warns(self):
        lat = Lattice(9)
        with pytest.warns(UserWarning):
            smooth_field(LatticeField(lat, np.ones(lat.shape)), SmoothingParams(1.5, 1.0))

    def test_impulse_matches_spectral_sum(self):
        lat = Lattice(9)
        params = SmoothingParams(3.0, 4.0)
        src = (2, 6)
        impulse = np.zeros(lat.shape)
        impulse[src] = 1.0
        out = smooth_field(LatticeField(lat, impulse), params).values

        x = lat.centers
        s = lat.spacing
        ks = np.pi * np.arange(-4, 5)
        expected = np.zeros(lat.shape)
        for i in range(9):
            for j in range(9):
                total = 0.0
                for k1 in ks:
                    for k2 in ks:
                        sym = (math.cos(s * k1) + math.cos(s * k2) - 2) / s**2
                        lam = (-sym + params.m2) ** (-params.alpha)
                        total += lam * math.cos(k1 * (x[i] - x[src[0]]) + k2 * (x[j] - x[src[1]]))
                expected[i, j] = total / 81
        np.testing.assert_allclose(out, expected, rtol=1e-10, atol=1e-14)

    @settings(max_examples=20, deadline=None)
    @given(a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 2**16))
    def test_linearity(self, a, b, seed):
        lat = Lattice(7)
        params = SmoothingParams(3.0, 2.0)
        rng = np.random.default_rng(seed)
        x, y = rng.normal(size=lat.shape), rng.normal(size=lat.shape)
        lhs = smooth_field(LatticeField(lat, a * x + b * y), params).values
        rhs = a * smooth_field(LatticeField(lat, x), params).values + b * smooth_field(
            LatticeField(lat, y), params
        ).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


class TestModes:
    def test_count_and_order(self):
        index = mode_index(1)
        assert len(index) == 9
        assert index[0] == ("constant", (0, 0))
        assert [k for kind, k in index[1::2]] == [(0, 1), (1, -1), (1, 0), (1, 1)]
        assert all(kind == "cos" for kind, _ in index[1::2])
        assert all(kind == "sin" for kind, _ in index[2::2])
        assert len(mode_index(2)) == 25
        assert len(mode_index(3)) == 49

    def test_radius_zero(self):
        lat = Lattice(7)
        noise = sample_noise(lat, LevyLaw.gamma(), 1)
        modes = extract_modes(noise, 0)
        assert modes.M == 1
        assert modes.eta[0] == pytest.approx(lat.cell_measure * noise.values.sum(), rel=1e-14)

    def test_cosine_projection(self):
        lat = Lattice(11)
        values = np.cos(np.pi * lat.points[:, 0]).reshape(lat.shape)
        modes = extract_modes(LatticeField(lat, values), 1)
        brute = lat.cell_measure * sum(math.cos(math.pi * p[0]) ** 2 for p in lat.points)
        pos = modes.index_map.index(("cos", (1, 0)))
        assert modes.eta[pos] == pytest.approx(brute, rel=1e-12)
        assert modes.eta[pos] == pytest.approx(2.0, rel=1e-12)  # |torus| / 2
        others = np.delete(modes.eta, pos)
        assert np.max(np.abs(others)) < 1e-12

    def test_constant_noise(self):
        lat = Lattice(9)
        modes = extract_modes(LatticeField(lat, np.full(lat.shape, 3.0)), 2)
        assert modes.eta[0] == pytest.approx(12.0)
        assert np.max(np.abs(modes.eta[1:])) < 1e-12

    def test_constant_shift_changes_only_constant(self):
        lat = Lattice(9)
        noise = sample_noise(lat, LevyLaw.bigamma(), 4)
        a = extract_modes(noise, 2).eta
        b = extract_modes(LatticeField(lat, noise.values + 0.7), 2).eta
        assert b[0] - a[0] == pytest.approx(0.7 * 4.0)
        np.testing.assert_allclose(b[1:], a[1:], atol=1e-12)

    def test_radius_too_large(self):
        with pytest.raises(InvalidArgumentError):
            extract_modes(LatticeField(Lattice(5), np.zeros((5, 5))), 3)

    def test_batch_matches_single(self):
        lat = Lattice(9)
        batch = sample_noise_batch(lat, LevyLaw.gaussian(), 0, 4)
        rows = extract_modes_batch(batch, lat, 1)
        for row, values in zip(rows, batch):
            np.testing.assert_allclose(row, extract_modes(LatticeField(lat, values), 1).eta, rtol=1e-13)


class TestReconstruct:
    params = SmoothingParams(3.0, 0.5)

    def test_unit_constant(self):
        lat = Lattice(7)
        modes = extract_modes(LatticeField(lat, np.zeros(lat.shape)), 1)
        modes.eta[0] = 1.0
        field = reconstruct_field(modes, self.params, lat)
        np.testing.assert_allclose(field.values, 1 / (4 * 0.5**3), rtol=1e-14)

    def test_zero(self):
        lat = Lattice(7)
        modes = extract_modes(LatticeField(lat, np.zeros(lat.shape)), 2)
        assert np.all(reconstruct_field(modes, self.params, lat).values == 0)

    @pytest.mark.parametrize("n", [5, 9, 15])
    def test_full_radius_roundtrip(self, n):
        lat = Lattice(n)
        density = noise_density(sample_noise(lat, LevyLaw.bigamma(), n))
        modes = extract_modes(density, lat.radius)
        recon = reconstruct_field(modes, self.params, lat).values
        direct = smooth_field(density, self.params, eigenvalues="continuum").values
        np.testing.assert_allclose(recon, direct, atol=1e-10 * np.max(np.abs(direct)))


class TestInterpolate:
    lat = Lattice(7)
    field = LatticeField(lat, np.random.default_rng(0).normal(size=(7, 7)))

    def test_cell_center(self):
        pts = self.lat.points[[0, 10, 48]]
        np.testing.assert_allclose(interpolate_bilinear(self.field, pts), self.field.values.ravel()[[0, 10, 48]])

    def test_center_of_four(self):
        c = self.lat.centers
        pt = [[0.5 * (c[2] + c[3]), 0.5 * (c[4] + c[5])]]
        expected = self.field.values[2:4, 4:6].mean()
        assert interpolate_bilinear(self.field, pt)[0] == pytest.approx(expected, rel=1e-14)

    def test_seam(self):
        # Point between the last and first cell in x, across the periodic seam.
        pts = np.array([[0.99, 0.13], [-0.97, -0.5]])
        shifted = LatticeField(self.lat, np.roll(self.field.values, -3, axis=0))
        moved = pts.copy()
        moved[:, 0] -= 3 * self.lat.spacing
        np.testing.assert_allclose(
            interpolate_bilinear(self.field, pts), interpolate_bilinear(shifted, moved), atol=1e-14
        )
        # Directly: at x = 1, halfway between the last and first cell centres.
        y = self.lat.centers[3]
        v = interpolate_bilinear(self.field, [[1.0, y]])[0]
        assert v == pytest.approx(0.5 * (self.field.values[-1, 3] + self.field.values[0, 3]))


class TestCovariance:
    lat = Lattice(33)
    params = SmoothingParams(3.0, 9.0)

    def test_gaussian(self):
        check = field_covariance_oracle(LevyLaw.gaussian(0.5), self.params, self.lat, 10_000, 11)
        assert abs(check.z_score) < 3

    def test_bigamma_same_target(self):
        g = field_covariance_oracle(LevyLaw.gaussian(0.5), self.params, self.lat, 100, 0)
        b = field_covariance_oracle(LevyLaw.bigamma(0.5, 1.0), self.params, self.lat, 100, 0)
        assert g.analytic == b.analytic

    def test_standard_error_scaling(self):
        law = LevyLaw.gaussian(0.5)
        small = field_covariance_oracle(law, self.params, self.lat, 1_000, 5)
        large = field_covariance_oracle(law, self.params, self.lat, 10_000, 6)
        assert small.std_error / large.std_error == pytest.approx(math.sqrt(10), rel=0.2)

    def test_needs_samples(self):
        with pytest.raises(InvalidArgumentError):
            field_covariance_oracle(LevyLaw.gaussian(), self.params, self.lat, 10, 0)

    def test_stationarity(self):
        lat = Lattice(15)
        params = SmoothingParams(3.0, 4.0)
        density = sample_noise_batch(lat, LevyLaw.gaussian(0.5), 21, 10_000) / lat.cell_measure
        fields = np.real(np.fft.ifftn(np.fft.fftn(density, axes=(1, 2)) * _multiplier(lat, params), axes=(1, 2)))
        rng = np.random.default_rng(3)
        for _ in range(3):
            shift = rng.integers(0, 15, size=2)
            a0, b0 = rng.integers(0, 15, size=2), rng.integers(0, 15, size=2)
            a1, b1 = (a0 + shift) % 15, (b0 + shift) % 15
            x = fields[:, a0[0], a0[1]] * fields[:, b0[0], b0[1]]
            y = fields[:, a1[0], a1[1]] * fields[:, b1[0], b1[1]]
            se = math.sqrt((x.var() + y.var()) / len(x))
            assert abs(x.mean() - y.mean()) < 3 * se


def _multiplier(lat, params):
    from learnquad.levy import spectral_eigenvalues

    return spectral_eigenvalues(lat, params)


def test_field_roundtrip(tmp_path):
    lat = Lattice(5)
    field = sample_noise(lat, LevyLaw.gamma(), 9)
    path = tmp_path / "f.bin"
    write_field(field, path)
    assert path.stat().st_size == 8 + 8 * 25
    back = read_field(path)
    np.testing.assert_array_equal(back.values, field.values)
    assert back.lattice == lat


def test_modes_csv_roundtrip(tmp_path):
    lat = Lattice(7)
    modes = extract_modes(sample_noise(lat, LevyLaw.gaussian(), 1), 2)
    path = tmp_path / "m.csv"
    write_modes_csv(modes, path)
    assert path.read_text().splitlines()[0] == "index,kind,kappa1,kappa2,value"
    back = read_modes_csv(path)
    assert back.index_map == modes.index_map
    np.testing.assert_array_equal(back.eta, modes.eta)
