import json

import numpy as np
import pytest

from freeconv.measures import (
    DiscreteMeasure,
    SpectralParam,
    cdf,
    dump_measure,
    f_prime,
    f_transform,
    invert_density,
    levy_distance,
    load_measure,
    make_measure,
    measure_from_dict,
    quantile_atoms,
    stieltjes,
)


def naive_stieltjes(atoms, weights, z):
    # direct summation oracle, no vectorization
    return sum(w / (a - z) for a, w in zip(atoms, weights))


def arcsine_m(z):
    # Stieltjes transform of the arcsine law on [-2, 2]: -1/sqrt(z^2 - 4)
    # with the branch that behaves like -1/z at infinity
    root = np.sqrt(z * z - 4.0 + 0j)
    if (root / z).real < 0:
        root = -root
    return -1.0 / root


def brute_levy(mu1, mu2, n_eps=20001):
    # envelope criterion scanned on a fine epsilon grid and a dense x grid
    xs = np.unique(np.concatenate([
        mu1.atoms, mu2.atoms,
        np.linspace(min(mu1.atoms.min(), mu2.atoms.min()) - 1.5,
                    max(mu1.atoms.max(), mu2.atoms.max()) + 1.5, 4001)]))
    f1 = cdf(mu1, xs)
    for eps in np.linspace(0.0, 1.0, n_eps):
        lo = cdf(mu2, xs - eps) - eps
        hi = cdf(mu2, xs + eps) + eps
        if np.all(f1 >= lo - 1e-12) and np.all(f1 <= hi + 1e-12):
            return eps
    return 1.0


class TestMakeMeasure:
    def test_single_point_mass(self):
        mu = make_measure([0], [1])
        assert mu.n_atoms == 1 and mu.atoms[0] == 0.0

    def test_sorting(self):
        mu = make_measure([1, -1], [0.5, 0.5])
        assert list(mu.atoms) == [-1.0, 1.0]

    def test_duplicate_merge(self):
        mu = make_measure([0, 0], [0.3, 0.7])
        assert mu.n_atoms == 1 and mu.weights[0] == pytest.approx(1.0)

    def test_uniform_default(self):
        mu = make_measure([0, 1, 2])
        assert np.allclose(mu.weights, 1 / 3)

    @pytest.mark.parametrize("atoms,weights,msg", [
        ([0, 1], [1.0], "length mismatch"),
        ([0], [-1.0], "negative weight"),
        ([np.inf], [1.0], "non-finite atom"),
        ([0, 1], [0.0, 0.0], "zero total mass"),
    ])
    def test_distinct_validation_errors(self, atoms, weights, msg):
        with pytest.raises(ValueError, match=msg):
            make_measure(atoms, weights)

    def test_weight_sum_checked(self):
        with pytest.raises(ValueError, match="sum to 1"):
            make_measure([0, 1], [0.7, 0.7])


class TestStieltjes:
    def test_delta_zero_at_i(self):
        assert stieltjes(make_measure([0]), 1j) == pytest.approx(1j)

    def test_bernoulli_at_i_direct_sum_oracle(self):
        mu = make_measure([-1, 1], [0.5, 0.5])
        oracle = naive_stieltjes([-1, 1], [0.5, 0.5], 1j)
        assert oracle == pytest.approx(0.5j)
        assert stieltjes(mu, 1j) == pytest.approx(oracle)

    def test_one_atom_formula(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            a = rng.uniform(-3, 3)
            z = complex(rng.uniform(-2, 2), rng.uniform(0.05, 2))
            assert stieltjes(make_measure([a]), z) == pytest.approx(1 / (a - z))

    def test_herglotz_and_eta_bound(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            k = rng.integers(1, 6)
            mu = make_measure(rng.uniform(-2, 2, k), None)
            z = complex(rng.uniform(-3, 3), rng.uniform(0.01, 3))
            m = stieltjes(mu, z)
            assert m.imag > 0
            assert abs(m) <= 1 / z.imag + 1e-12

    def test_normalization_at_large_eta(self):
        rng = np.random.default_rng(3)
        mu = make_measure(rng.uniform(-2, 2, 5), None)
        top = np.abs(mu.atoms).max()
        for eta in (10 * top, 100 * top, 1000 * top):
            m = stieltjes(mu, complex(0, eta))
            assert abs(1j * eta * m + 1) <= (top + 1e-9) / eta

    def test_rejects_lower_half_plane(self):
        with pytest.raises(ValueError):
            stieltjes(make_measure([0]), -1j)


class TestFTransform:
    def test_point_mass_shift(self):
        rng = np.random.default_rng(4)
        for _ in range(5):
            a = rng.uniform(-2, 2)
            z = complex(rng.uniform(-2, 2), rng.uniform(0.1, 2))
            assert f_transform(make_measure([a]), z) == pytest.approx(z - a)

    def test_bernoulli_closed_form(self):
        # two symmetric atoms give F(z) = z - 1/z
        mu = make_measure([-1, 1], [0.5, 0.5])
        assert f_transform(mu, 1j) == pytest.approx(2j)
        assert f_transform(mu, 2j) == pytest.approx(2.5j)

    def test_nevanlinna_property(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            mu = make_measure(rng.uniform(-2, 2, 4), None)
            z = complex(rng.uniform(-3, 3), rng.uniform(0.01, 2))
            assert f_transform(mu, z).imag >= z.imag - 1e-12

    def test_fprime_point_mass(self):
        assert f_prime(make_measure([1.5]), 0.3 + 0.7j) == pytest.approx(1.0)

    def test_fprime_bernoulli_closed_form(self):
        mu = make_measure([-1, 1], [0.5, 0.5])
        z = 1.61803398875j
        assert f_prime(mu, z) == pytest.approx(1 + 1 / z ** 2)
        assert f_prime(mu, z) == pytest.approx(0.61803398875, abs=1e-9)

    def test_fprime_asymptotic(self):
        rng = np.random.default_rng(6)
        mu = make_measure(rng.uniform(-2, 2, 6), None)
        assert f_prime(mu, 1e6j) == pytest.approx(1.0, abs=1e-5)

    def test_fprime_is_derivative(self):
        # finite-difference cross-check of the analytic formula
        mu = make_measure([-1.2, 0.4, 2.0], [0.2, 0.5, 0.3])
        z = 0.3 + 0.8j
        h = 1e-6
        fd = (f_transform(mu, z + h) - f_transform(mu, z - h)) / (2 * h)
        assert f_prime(mu, z) == pytest.approx(fd, rel=1e-7)


class TestLevyDistance:
    def test_identical(self):
        mu = make_measure([0, 1], [0.4, 0.6])
        assert levy_distance(mu, mu) == 0.0

    def test_point_masses_half(self):
        d = levy_distance(make_measure([0]), make_measure([0.5]))
        assert d == pytest.approx(0.5, abs=1e-9)

    def test_point_masses_saturated(self):
        d = levy_distance(make_measure([0]), make_measure([2.0]))
        assert d == pytest.approx(1.0, abs=1e-9)

    def test_matches_brute_force_envelope(self):
        rng = np.random.default_rng(7)
        for _ in range(8):
            mu1 = make_measure(rng.uniform(-2, 2, rng.integers(1, 4)), None)
            mu2 = make_measure(rng.uniform(-2, 2, rng.integers(1, 4)), None)
            assert levy_distance(mu1, mu2) == pytest.approx(
                brute_levy(mu1, mu2), abs=2e-4)

    def test_metric_properties(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            mus = [make_measure(rng.uniform(-2, 2, rng.integers(1, 4)), None)
                   for _ in range(3)]
            d01 = levy_distance(mus[0], mus[1])
            d10 = levy_distance(mus[1], mus[0])
            assert d01 == pytest.approx(d10, abs=1e-12)
            d02 = levy_distance(mus[0], mus[2])
            d12 = levy_distance(mus[1], mus[2])
            assert d02 <= d01 + d12 + 1e-9


class TestCdf:
    def test_examples(self):
        d0 = make_measure([0])
        assert cdf(d0, -1.0) == 0.0
        assert cdf(d0, 0.0) == 1.0
        b = make_measure([-1, 1], [0.5, 0.5])
        assert cdf(b, 0.0) == pytest.approx(0.5)

    def test_monotone_right_continuous(self):
        rng = np.random.default_rng(9)
        mu = make_measure(rng.uniform(-2, 2, 5), None)
        xs = np.linspace(-3, 3, 301)
        vals = cdf(mu, xs)
        assert np.all(np.diff(vals) >= 0)
        for a in mu.atoms:
            assert cdf(mu, a) == pytest.approx(cdf(mu, a + 1e-13), abs=1e-12)


class TestInvertDensity:
    def test_off_atom_vanishes(self):
        mu = make_measure([0])
        dens = invert_density(lambda z: stieltjes(mu, z), [1.0], [1e-2, 5e-3])
        assert dens.values[0] == pytest.approx(0.0, abs=1e-2)

    def test_arcsine_center(self):
        dens = invert_density(arcsine_m, [0.0], [1e-2, 5e-3, 2.5e-3])
        assert dens.values[0] == pytest.approx(1 / (2 * np.pi), abs=1e-3)

    def test_constant_extrapolates_exactly(self):
        c = 0.37
        dens = invert_density(lambda z: np.pi * c * 1j, [0.0], [1e-2, 5e-3])
        assert dens.values[0] == pytest.approx(c, abs=1e-14)

    def test_full_grid_integrates_to_one(self):
        dens = invert_density(arcsine_m, np.linspace(-2.5, 2.5, 1001),
                              [1e-2, 5e-3, 2.5e-3])
        assert dens.trapezoid_mass() == pytest.approx(1.0, abs=2e-2)

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            invert_density(arcsine_m, [0.0], [5e-3, 1e-2])
        with pytest.raises(ValueError):
            invert_density(arcsine_m, [0.0], [1e-2])


class TestQuantileAtoms:
    def test_bernoulli_split(self):
        mu = make_measure([-1, 1], [0.5, 0.5])
        a = quantile_atoms(mu, 10)
        assert list(a) == [-1.0] * 5 + [1.0] * 5

    def test_levy_closeness(self):
        rng = np.random.default_rng(10)
        mu = make_measure(rng.uniform(-2, 2, 7), None)
        for n in (16, 64, 256):
            sampled = make_measure(quantile_atoms(mu, n))
            gap = np.diff(mu.atoms).max() if mu.n_atoms > 1 else 0.0
            assert levy_distance(sampled, mu) <= 1 / n + gap / 2 + 1e-9


class TestJsonInterchange:
    def test_round_trip(self, tmp_path):
        mu = make_measure([-1, 0.5], [0.25, 0.75])
        path = tmp_path / "m.json"
        dump_measure(mu, path)
        again = load_measure(path)
        assert np.allclose(again.atoms, mu.atoms)
        assert np.allclose(again.weights, mu.weights)

    def test_weights_optional(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"atoms": [3, 1, 2]}))
        mu = load_measure(path)
        assert list(mu.atoms) == [1.0, 2.0, 3.0]
        assert np.allclose(mu.weights, 1 / 3)

    def test_unknown_keys_rejected(self):
        with pytest.raises(ValueError, match="unknown measure keys"):
            measure_from_dict({"atoms": [0], "wts": [1]})


class TestTypes:
    def test_spectral_param_requires_upper_half_plane(self):
        with pytest.raises(ValueError):
            SpectralParam(0.0, 0.0)
        assert SpectralParam(1.0, 2.0).z == 1 + 2j

    def test_measure_immutable(self):
        mu = make_measure([0, 1])
        with pytest.raises((ValueError, AttributeError)):
            mu.atoms[0] = 5.0

    def test_direct_construction_requires_sorted(self):
        with pytest.raises(ValueError):
            DiscreteMeasure(np.array([1.0, 0.0]), np.array([0.5, 0.5]))
