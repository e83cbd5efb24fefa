import numpy as np
import pandas as pd
import pytest
from scipy.integrate import trapezoid

from pdeminer.dataset_manager import (
    DatasetMetadata, GridDataset, SampleSet, gen_burgers, gen_heat, gen_kdv, generate, inject_noise, read_dataset,
    sidecar_path, subsample, write_dataset,
)
from pdeminer.errors import DatasetFormatError, DatasetSizeError, SolverInstabilityError
from pdeminer.tools.spectral_solvers import PeriodicGrid, fourier_coefficients, fourier_interpolate, integrate_if_rk4


class TestSpectral:
    def test_interpolant_reproduces_nodes(self):
        grid = PeriodicGrid(-1.0, 3.0, 32)
        u0 = lambda x: np.exp(np.sin(np.pi * x / 2))
        assert np.allclose(fourier_interpolate(grid, fourier_coefficients(grid, u0), grid.nodes), u0(grid.nodes),
                           atol=1e-12)

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            PeriodicGrid(0.0, 1.0, 7)
        with pytest.raises(ValueError):
            PeriodicGrid(1.0, 1.0, 16)

    def test_blowup_is_detected(self):
        grid = PeriodicGrid(0.0, 1.0, 16)
        u0_hat = fourier_coefficients(grid, lambda x: 1.0 + 0.0 * x)
        growth = np.full(grid.wavenumbers.size, 5.0)
        with pytest.raises(SolverInstabilityError):
            integrate_if_rk4(grid, u0_hat, growth, np.zeros_like, np.array([0.0, 5.0]), "growth")


class TestHeat:
    def test_matches_closed_form(self):
        ds = gen_heat()
        t, x = np.meshgrid(ds.t_grid, ds.x_grid, indexing="ij")
        assert ds.shape == (201, 201)
        assert np.allclose(ds.values, np.exp(-0.05 * np.pi ** 2 * t) * np.sin(np.pi * x), atol=1e-10)

    def test_decayed_value(self):
        ds = gen_heat()
        i, j = np.argmin(np.abs(ds.t_grid - 10.0)), np.argmin(np.abs(ds.x_grid - 0.5))
        assert ds.values[i, j] == pytest.approx(np.exp(-0.05 * np.pi ** 2 * 10.0), rel=1e-8)
        assert ds.values[i, j] == pytest.approx(7.19e-3, rel=1e-3)

    def test_first_row_is_initial_condition(self, tiny_heat):
        assert np.array_equal(tiny_heat.values[0], np.sin(np.pi * tiny_heat.x_grid))

    def test_metadata(self, tiny_heat):
        assert tiny_heat.metadata.equation == "heat"
        assert tiny_heat.metadata.true_pde == {"(D_x^2 U)": 0.05}
        assert tiny_heat.domain.t_max == 10.0 and tiny_heat.domain.x_max == 10.0

    def test_gaussian_sine(self):
        ds = gen_heat(ic="gaussian-sine", n_x=41, n_t=5, n_modes=128)
        assert np.all(np.abs(ds.values[-1]) <= np.max(np.abs(ds.values[0])) + 1e-12)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            gen_heat(alpha=0.0)
        with pytest.raises(ValueError):
            gen_heat(ic="square")


class TestBurgers:
    def test_odd_symmetry(self):
        ds = gen_burgers(n_x=64, n_t=11, n_modes=128)
        assert np.allclose(ds.values[:, ::-1], -ds.values, atol=1e-6)

    def test_self_convergence(self):
        coarse = gen_burgers(n_x=64, n_t=11, n_modes=512)
        fine = gen_burgers(n_x=64, n_t=11, n_modes=1024)
        assert np.max(np.abs(coarse.values - fine.values)) < 1e-4

    def test_maximum_principle(self):
        ds = gen_burgers(n_x=64, n_t=11, n_modes=512)
        assert np.max(np.abs(ds.values)) <= np.max(np.abs(ds.values[0])) + 1e-4

    def test_gaussian_defaults_to_coarser_time_grid(self):
        ds = generate("burgers", ic="gaussian", n_x=32, n_modes=128)
        assert ds.shape == (101, 32)
        assert ds.metadata.true_pde == {"(D_x^2 U)": 0.1, "(U) (D_x U)": -1.0}
        assert ds.domain.x_min == -8.0

    def test_rejects_bad_viscosity(self):
        with pytest.raises(ValueError):
            gen_burgers(nu=-0.1)


class TestKdV:
    def test_mass_is_conserved(self):
        ds = gen_kdv(ic=lambda x: 0.5 + np.cos(np.pi * x / 20.0), n_x=128, n_t=5, n_modes=64)
        masses = trapezoid(ds.values, ds.x_grid, axis=1)
        assert masses[0] == pytest.approx(20.0, rel=1e-12)
        assert np.allclose(masses, masses[0], rtol=0, atol=1e-9)
        assert ds.metadata.ic == "samples"

    def test_unknown_equation(self):
        with pytest.raises(ValueError):
            generate("wave")


class TestNoise:
    def test_zero_noise_is_identity(self, tiny_heat):
        noisy = inject_noise(tiny_heat, 0.0, seed=3)
        assert np.array_equal(noisy.values, tiny_heat.values)
        assert noisy.metadata.noise == 0.0 and noisy.metadata.seed == 3

    def test_calibrated_level(self):
        clean = gen_heat()
        noisy = inject_noise(clean, 1.0, seed=0)
        measured = np.std(noisy.values - clean.values) / np.std(clean.values)
        assert measured == pytest.approx(1.0, rel=0.02)

    def test_seeded(self, tiny_heat):
        a, b = inject_noise(tiny_heat, 0.1, seed=5), inject_noise(tiny_heat, 0.1, seed=5)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, inject_noise(tiny_heat, 0.1, seed=6).values)

    def test_clean_input_untouched(self, tiny_heat):
        before = tiny_heat.values.copy()
        inject_noise(tiny_heat, 0.5, seed=1)
        assert np.array_equal(tiny_heat.values, before)

    def test_negative_level(self, tiny_heat):
        with pytest.raises(ValueError):
            inject_noise(tiny_heat, -0.1, seed=0)


class TestSubsample:
    def test_full_draw_covers_every_node(self, tiny_heat):
        samples = subsample(tiny_heat, tiny_heat.values.size, seed=0)
        t, x = tiny_heat.coordinates()
        drawn = sorted(zip(samples.t, samples.x, samples.u))
        assert drawn == sorted(zip(t, x, tiny_heat.values.ravel()))

    def test_draws_are_distinct_grid_nodes(self, tiny_heat):
        samples = subsample(tiny_heat, 50, seed=2)
        assert len(set(zip(samples.t, samples.x))) == 50
        rows = np.searchsorted(tiny_heat.t_grid, samples.t)
        cols = np.searchsorted(tiny_heat.x_grid, samples.x)
        assert np.array_equal(tiny_heat.values[rows, cols], samples.u)
        assert samples.domain == tiny_heat.domain

    def test_seeded(self, tiny_heat):
        assert np.array_equal(subsample(tiny_heat, 30, seed=4).t, subsample(tiny_heat, 30, seed=4).t)

    def test_node_frequencies_are_binomial(self, tiny_heat):
        n_draws, n_data = 1000, 50
        t, x = tiny_heat.coordinates()
        node = {pair: i for i, pair in enumerate(zip(t, x))}
        counts = np.zeros(len(node))
        for seed in range(n_draws):
            samples = subsample(tiny_heat, n_data, seed=seed)
            counts[[node[pair] for pair in zip(samples.t, samples.x)]] += 1

        # each count is Binomial(n_draws, p); a few 3-sigma excursions are expected over 231 nodes
        p = n_data / len(node)
        z = np.abs(counts - n_draws * p) / np.sqrt(n_draws * p * (1.0 - p))
        assert counts.sum() == n_draws * n_data
        assert np.count_nonzero(z > 3.0) <= 5
        assert z.max() < 5.0

    @pytest.mark.parametrize("n_data", [0, 21 * 11 + 1])
    def test_size_bounds(self, tiny_heat, n_data):
        with pytest.raises(DatasetSizeError):
            subsample(tiny_heat, n_data, seed=0)


class TestBinaryFormat:
    def test_round_trip_is_bit_exact(self, tiny_heat, tmp_path):
        noisy = inject_noise(tiny_heat, 0.3, seed=9)
        loaded = read_dataset(write_dataset(noisy, tmp_path / "heat.pdrd"))
        assert np.array_equal(loaded.values, noisy.values)
        assert np.array_equal(loaded.t_grid, noisy.t_grid) and np.array_equal(loaded.x_grid, noisy.x_grid)
        assert loaded.metadata == noisy.metadata

    def test_layout(self, tiny_heat, tmp_path):
        raw = write_dataset(tiny_heat, tmp_path / "heat.pdrd").read_bytes()
        assert raw[:5] == b"PDRD1"
        assert len(raw) == 5 + 20 + 8 * (11 + 21 + 11 * 21)

    def test_truncated_body(self, tiny_heat, tmp_path):
        path = write_dataset(tiny_heat, tmp_path / "heat.pdrd")
        path.write_bytes(path.read_bytes()[:-8])
        with pytest.raises(DatasetSizeError):
            read_dataset(path)

    def test_truncated_header(self, tiny_heat, tmp_path):
        path = write_dataset(tiny_heat, tmp_path / "heat.pdrd")
        path.write_bytes(path.read_bytes()[:10])
        with pytest.raises(DatasetSizeError):
            read_dataset(path)

    def test_foreign_magic(self, tiny_heat, tmp_path):
        path = write_dataset(tiny_heat, tmp_path / "heat.pdrd")
        path.write_bytes(b"XXXXX" + path.read_bytes()[5:])
        with pytest.raises(DatasetFormatError):
            read_dataset(path)

    def test_missing_sidecar(self, tiny_heat, tmp_path):
        path = write_dataset(tiny_heat, tmp_path / "heat.pdrd")
        sidecar_path(path).unlink()
        with pytest.raises(DatasetFormatError):
            read_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_dataset(tmp_path / "absent.pdrd")


class TestCSV:
    def _grid_csv(self, ds, path, drop=0):
        t, x = ds.coordinates()
        frame = pd.DataFrame({"t": t, "x": x, "u": ds.values.ravel()}).iloc[drop:]
        frame.to_csv(path, index=False, float_format="%.17g")
        return path

    def test_complete_grid(self, tiny_heat, tmp_path):
        loaded = read_dataset(self._grid_csv(tiny_heat, tmp_path / "grid.csv"))
        assert np.array_equal(loaded.values, tiny_heat.values)
        assert loaded.metadata.equation == "external" and loaded.metadata.boundary == "unknown"

    def test_incomplete_grid(self, tiny_heat, tmp_path):
        with pytest.raises(DatasetFormatError):
            read_dataset(self._grid_csv(tiny_heat, tmp_path / "grid.csv", drop=1))

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,x,u\n0,0,1\n")
        with pytest.raises(DatasetFormatError):
            read_dataset(path)

    def test_sample_round_trip(self, toy_samples, tmp_path):
        loaded = SampleSet.from_csv(toy_samples.to_csv(tmp_path / "samples.csv"))
        assert np.array_equal(loaded.t, toy_samples.t)
        assert np.array_equal(loaded.x, toy_samples.x)
        assert np.array_equal(loaded.u, toy_samples.u)


class TestGridValidation:
    def test_shape_mismatch(self):
        with pytest.raises(DatasetFormatError):
            GridDataset(np.arange(3.0), np.arange(4.0), np.zeros((4, 3)), DatasetMetadata(equation="heat"))

    def test_non_increasing_grid(self):
        with pytest.raises(DatasetFormatError):
            GridDataset(np.array([0.0, 0.0]), np.arange(2.0), np.zeros((2, 2)), DatasetMetadata(equation="heat"))

    def test_non_finite_values(self):
        values = np.zeros((2, 2))
        values[1, 1] = np.nan
        with pytest.raises(DatasetFormatError):
            GridDataset(np.arange(2.0), np.arange(2.0), values, DatasetMetadata(equation="heat"))
