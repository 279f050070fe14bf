import numpy as np
import pytest

from affinity.errors import AllSingleBin, EmptyBin, ZeroSingles
from affinity.simulate import simulate_discrete_choo_siow
from affinity.singles import (
    PopulationWithSingles,
    bin_population,
    exante_surplus,
    from_discrete_market,
    matching_surplus,
    quantile_binning,
    reservation_utilities,
)
from affinity.simulate import simulate_population_with_singles


def half_single_population():
    # every cell: 2 matched couples (uniform over partners), 2 singles
    mu_xy = np.full((2, 2), 1.0)
    mu_x0 = np.full(2, 2.0)
    mu_0y = np.full(2, 2.0)
    return PopulationWithSingles(mu_xy, mu_x0, mu_0y)


class TestReservationUtilities:
    def test_half_singles_zero(self):
        # f0 / (f_bar - f0) = 1 in every cell, so utilities vanish under
        # the zero gauge
        phi_x0, phi_0y, (c, d) = reservation_utilities(half_single_population())
        np.testing.assert_allclose(phi_x0, 0.0, atol=1e-12)
        np.testing.assert_allclose(phi_0y, 0.0, atol=1e-12)
        np.testing.assert_array_equal(c, 0.0)
        np.testing.assert_array_equal(d, 0.0)

    def test_gauge_shifts_passed_through(self):
        pop = half_single_population()
        gauge = (np.array([1.0, -1.0]), np.array([0.5, 0.5]))
        phi_x0, phi_0y, echoed = reservation_utilities(pop, gauge=gauge)
        np.testing.assert_allclose(phi_x0, [1.0, -1.0])
        np.testing.assert_allclose(phi_0y, [0.5, 0.5])
        np.testing.assert_array_equal(echoed[0], gauge[0])

    def test_zero_singles_raises(self):
        pop = PopulationWithSingles(np.ones((2, 2)), np.array([1.0, 0.0]),
                                    np.ones(2))
        with pytest.raises(ZeroSingles):
            reservation_utilities(pop)

    def test_all_single_cell_raises(self):
        mu_xy = np.array([[1.0, 0.0], [0.0, 0.0]])
        pop = PopulationWithSingles(mu_xy, np.array([1.0, 2.0]),
                                    np.array([1.0, 2.0]))
        with pytest.raises(AllSingleBin):
            reservation_utilities(pop)

    def test_empty_cell_raises(self):
        pop = PopulationWithSingles(np.zeros((2, 2)), np.array([0.0, 1.0]),
                                    np.ones(2))
        with pytest.raises(EmptyBin):
            reservation_utilities(pop)


class TestMatchingSurplus:
    def test_discrete_market_exact(self):
        rng = np.random.default_rng(0)
        phi = rng.normal(size=(3, 4))
        market = simulate_discrete_choo_siow(phi, rng.uniform(0.5, 2.0, 3),
                                             rng.uniform(0.5, 2.0, 4))
        surplus = matching_surplus(from_discrete_market(market))
        np.testing.assert_allclose(surplus, phi, atol=1e-9)

    def test_two_type_hand_check(self):
        # mu_xy = [[4, 2], [2, 1]], singles [1, 1] each side:
        # surplus_ij = log(mu_ij^2 / (mu_i0 * mu_0j))
        mu_xy = np.array([[4.0, 2.0], [2.0, 1.0]])
        pop = PopulationWithSingles(mu_xy, np.ones(2), np.ones(2))
        surplus = matching_surplus(pop)
        expected = np.log(mu_xy**2)
        np.testing.assert_allclose(surplus, expected, atol=1e-12)

    def test_scale_invariance(self):
        # doubling every count leaves the surplus unchanged
        rng = np.random.default_rng(1)
        mu_xy = rng.uniform(0.5, 3.0, size=(3, 3))
        mu_x0 = rng.uniform(0.5, 2.0, 3)
        mu_0y = rng.uniform(0.5, 2.0, 3)
        base = matching_surplus(PopulationWithSingles(mu_xy, mu_x0, mu_0y))
        doubled = matching_surplus(
            PopulationWithSingles(2 * mu_xy, 2 * mu_x0, 2 * mu_0y)
        )
        np.testing.assert_allclose(doubled, base, atol=1e-12)

    def test_independence_separable_surplus(self):
        # independent matching makes the surplus additively separable:
        # all 2x2 cross-differences vanish
        f = np.array([1.0, 2.0, 4.0])
        g = np.array([3.0, 1.0])
        mu_xy = np.outer(f, g) / g.sum()
        matched_f = mu_xy.sum(axis=1)
        matched_g = mu_xy.sum(axis=0)
        pop = PopulationWithSingles(mu_xy, matched_f / 3.0, matched_g / 3.0)
        s = matching_surplus(pop)
        cross = s[1:, 1:] - s[1:, :-1] - s[:-1, 1:] + s[:-1, :-1]
        np.testing.assert_allclose(cross, 0.0, atol=1e-10)

    def test_sigma_scales_linearly(self):
        pop = half_single_population()
        s2 = matching_surplus(pop, sigma=2.0)
        s6 = matching_surplus(pop, sigma=6.0)
        np.testing.assert_allclose(s6, 3.0 * s2, atol=1e-12)

    def test_external_coupling_overrides_counts(self):
        pop = half_single_population()

        class FakeCoupling:
            pi = np.array([[0.4, 0.1], [0.1, 0.4]])

        base = matching_surplus(pop)
        alt = matching_surplus(pop, coupling=FakeCoupling())
        assert not np.allclose(alt, base)
        # singles terms unchanged: alt - base depends only on the coupling,
        # and both conditionals move from 1/2 to pi / (1/2)
        diff = alt - base
        expected = 2.0 * np.log(FakeCoupling.pi / 0.25)
        np.testing.assert_allclose(diff, expected, atol=1e-10)


class TestExAnteSurplus:
    def test_half_singles_log_two(self):
        u, v = exante_surplus(half_single_population())
        np.testing.assert_allclose(u, np.log(2.0), atol=1e-12)
        np.testing.assert_allclose(v, np.log(2.0), atol=1e-12)

    def test_all_single_allowed(self):
        # ex-ante surplus is defined even when a cell has no matches
        pop = PopulationWithSingles(np.array([[1.0, 0.0], [0.0, 0.0]]),
                                    np.array([1.0, 2.0]), np.array([1.0, 2.0]))
        u, _ = exante_surplus(pop)
        assert u[1] == pytest.approx(0.0, abs=1e-12)

    def test_zero_singles_raises(self):
        pop = PopulationWithSingles(np.ones((2, 2)), np.array([0.0, 1.0]),
                                    np.ones(2))
        with pytest.raises(ZeroSingles):
            exante_surplus(pop)


class TestBinning:
    def test_quantile_bins_balanced(self):
        rng = np.random.default_rng(2)
        values = rng.normal(size=(10_000, 1))
        binning = quantile_binning(values, bins=5)
        counts = np.bincount(binning.assign(values), minlength=5)
        np.testing.assert_allclose(counts, 2_000, atol=1)

    def test_outer_edges_unbounded(self):
        binning = quantile_binning(np.linspace(0, 1, 100)[:, None], bins=4)
        cells = binning.assign(np.array([[-1e9], [1e9]]))
        assert cells[0] == 0
        assert cells[1] == binning.n_cells - 1

    def test_multi_attribute_row_major(self):
        binning = quantile_binning(np.random.default_rng(3).normal(size=(100, 2)),
                                   bins=2)
        assert binning.n_cells == 4
        lo_lo = binning.assign(np.array([[-10.0, -10.0]]))[0]
        lo_hi = binning.assign(np.array([[-10.0, 10.0]]))[0]
        hi_lo = binning.assign(np.array([[10.0, -10.0]]))[0]
        assert lo_lo == 0
        assert lo_hi == 1
        assert hi_lo == 2

    def test_bin_population_counts(self):
        matched, sx, sy = simulate_population_with_singles(1.0, 2_000, 0.5,
                                                           seed=4)
        pop = bin_population(matched, sx, sy, bins=4)
        assert pop.mu_xy.shape == (4, 4)
        assert pop.mu_xy.sum() == matched.n
        assert pop.mu_x0.sum() == len(sx)
        assert pop.mu_0y.sum() == len(sy)
        np.testing.assert_allclose(pop.f_bar,
                                   (matched.n + len(sx)) / 4.0, atol=1)

    def test_binned_simulation_surplus_iia(self):
        # singles share should not affect the matched-cell surplus beyond
        # noise: compare two populations at very different singles shares
        surpluses = []
        for share, seed in [(0.2, 5), (0.8, 6)]:
            matched, sx, sy = simulate_population_with_singles(
                1.0, 30_000, share, seed
            )
            pop = bin_population(matched, sx, sy, bins=3)
            # surplus differences are gauge-free and share-free
            s = matching_surplus(pop)
            surpluses.append(s - s.mean())
        np.testing.assert_allclose(surpluses[0], surpluses[1], atol=0.12)
