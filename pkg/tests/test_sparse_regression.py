import numpy as np
import pytest

from pdeminer.components.verification import best_subset, planted_system, synthetic_system, unit_columns
from pdeminer.core.pde_library import LibrarySystem, enumerate_terms
from pdeminer.core.sparse_regression import (
    Candidate, CandidatePath, discover_pde, format_pde, least_important_feature, least_squares, rank_candidates,
    residual_increase_check, rfe_path,
)


def identity_system() -> LibrarySystem:
    # terms 1, U, U^2 with L = I and b = (3, 2, 1)
    return LibrarySystem(enumerate_terms(0, 2), np.eye(3), np.array([3.0, 2.0, 1.0]), np.ones(3))


class TestLeastSquares:
    def test_exact_solution(self):
        x, residual = least_squares(np.eye(3), np.array([3.0, 2.0, 1.0]), [0, 1, 2])
        assert np.allclose(x, [3.0, 2.0, 1.0])
        assert residual == pytest.approx(0.0, abs=1e-24)

    def test_single_column(self):
        x, residual = least_squares(np.array([[1.0], [1.0]]), np.array([1.0, 3.0]), [0])
        assert x[0] == pytest.approx(2.0)
        assert residual == pytest.approx(2.0)

    def test_off_support_is_zero(self):
        x, _ = least_squares(np.eye(3), np.array([3.0, 2.0, 1.0]), [1])
        assert np.array_equal(x, [0.0, 2.0, 0.0])

    def test_rank_deficient_gives_minimum_norm(self, rng):
        col = rng.standard_normal(8)
        A = np.column_stack([col, col, rng.standard_normal(8)])
        b = rng.standard_normal(8)
        x, _ = least_squares(A, b, [0, 1, 2])
        assert np.allclose(x, np.linalg.pinv(A) @ b, atol=1e-10)

    def test_empty_support(self):
        with pytest.raises(ValueError):
            least_squares(np.eye(2), np.ones(2), [])


class TestRFE:
    def test_identity_path(self):
        path = rfe_path(identity_system())
        assert [c.support for c in path] == [(0, 1, 2), (0, 1), (0,)]
        assert np.allclose(path.residuals, [0.0, 1.0, 5.0])
        assert path.b_norm_sq == 14.0
        assert path.names == ["1", "(U)", "(U)^2"]

    def test_path_has_one_candidate_per_size(self, rng):
        A = unit_columns(rng, 30, 7)
        path = rfe_path(synthetic_system(A, rng.standard_normal(30)))
        assert [len(c.support) for c in path] == list(range(7, 0, -1))
        for bigger, smaller in zip(path.candidates, path.candidates[1:]):
            assert set(smaller.support) < set(bigger.support)

    def test_residuals_are_monotone(self, rng):
        for _ in range(10):
            A = unit_columns(rng, 40, 9)
            path = rfe_path(synthetic_system(A, rng.standard_normal(40)))
            assert np.all(np.diff(path.residuals) >= -1e-12 * path.b_norm_sq)

    def test_elimination_uses_normalized_coefficients(self):
        # physical coefficients are all 1; normalized ones are 2, 4, 8
        L = np.diag([2.0, 4.0, 8.0])
        system = LibrarySystem(enumerate_terms(0, 2), L, np.array([2.0, 4.0, 8.0]), np.array([2.0, 4.0, 8.0]))
        path = rfe_path(system)
        assert np.allclose(path.candidates[0].coeffs, [1.0, 1.0, 1.0])
        assert np.allclose(path.candidates[0].normalized_coeffs, [2.0, 4.0, 8.0])
        assert path.candidates[1].support == (1, 2)

    def test_ties_drop_the_higher_index(self):
        assert least_important_feature([0, 1, 2], np.array([1.0, -1.0, 2.0])) == 1
        assert least_important_feature([3, 5], np.array([0.0, 0.0, 0.0, 0.5, 0.5, 0.0])) == 5


class TestResidualIncrease:
    def test_identity_increases(self):
        system = identity_system()
        increases = residual_increase_check(system, rfe_path(system).candidates[0])
        assert increases == pytest.approx({0: 9.0, 1: 4.0, 2: 1.0})

    def test_increase_is_squared_normalized_coefficient(self, rng):
        A = unit_columns(rng, 50, 6)
        system = synthetic_system(A, A @ rng.uniform(0.5, 2.0, 6) + 0.1 * rng.standard_normal(50))
        for cand in rfe_path(system):
            increases = residual_increase_check(system, cand)
            for k in cand.support:
                assert increases[k] == pytest.approx(cand.normalized_coeffs[k] ** 2, rel=1e-8, abs=1e-12)
            k = least_important_feature(cand.support, cand.normalized_coeffs)
            assert increases[k] == pytest.approx(min(increases.values()), rel=1e-8, abs=1e-12)

    def test_zero_coefficient_costs_nothing(self):
        system = identity_system()
        cand = Candidate((0, 1), np.array([3.0, 0.0, 0.0]), np.array([3.0, 0.0, 0.0]), 5.0)
        assert residual_increase_check(system, cand)[1] == 0.0


class TestRanking:
    def test_identity_ratios(self):
        report = rank_candidates(rfe_path(identity_system()))
        assert [e.support for e in report.entries] == [[0, 1, 2], [0, 1], [0]]
        assert report.entries[0].ratio_percent > 1e12
        assert report.entries[1].ratio_percent == pytest.approx(500.0)
        assert report.entries[2].ratio_percent == pytest.approx(280.0)
        assert [e.rank for e in report.entries] == [1, 2, 3]

    def test_single_candidate_is_compared_with_zero(self):
        system = LibrarySystem(enumerate_terms(0, 1)[:1], np.array([[1.0], [1.0]]), np.array([1.0, 3.0]),
                               np.array([np.sqrt(2.0)]))
        report = rank_candidates(rfe_path(system))
        assert len(report.entries) == 1
        assert report.top.ratio_percent == pytest.approx(500.0)

    def test_keeps_at_most_five(self, rng):
        A = unit_columns(rng, 40, 9)
        report = rank_candidates(rfe_path(synthetic_system(A, rng.standard_normal(40))))
        assert len(report.entries) == 5
        ratios = [e.ratio_percent for e in report.entries]
        assert ratios == sorted(ratios, reverse=True)

    def test_empty_path(self):
        with pytest.raises(ValueError):
            rank_candidates(CandidatePath([], [], 1.0))

    def test_metadata_is_copied(self):
        metadata = {"M": 0, "K": 2}
        report = rank_candidates(rfe_path(identity_system()), metadata)
        metadata["M"] = 9
        assert report.metadata == {"M": 0, "K": 2}


class TestDiscovery:
    def test_planted_supports_are_recovered(self, rng):
        hits = 0
        for _ in range(10):
            system, support = planted_system(rng)
            hits += tuple(discover_pde(system).top.support) == support
        assert hits >= 9

    def test_top_candidate_agrees_with_exhaustive_search(self, rng):
        system, support = planted_system(rng, m=40, n=6, noise=0.001)
        assert best_subset(system.normalized, system.b, len(support)) == support
        assert tuple(discover_pde(system).top.support) == support

    @pytest.mark.parametrize("scale", [7.5, 1e-3])
    def test_scaling_b_scales_coefficients_and_keeps_ranking(self, rng, scale):
        for _ in range(20):
            system, _ = planted_system(rng)
            scaled = LibrarySystem(system.terms, system.L, scale * system.b, system.column_norms)
            path, scaled_path = rfe_path(system), rfe_path(scaled)
            for c, s in zip(path, scaled_path):
                assert s.support == c.support
                assert np.allclose(s.coeffs, scale * c.coeffs, rtol=1e-9, atol=1e-12 * scale)
            report, scaled_report = rank_candidates(path), rank_candidates(scaled_path)
            assert [e.support for e in scaled_report.entries] == [e.support for e in report.entries]
            assert [e.ratio_percent for e in scaled_report.entries] == pytest.approx(
                [e.ratio_percent for e in report.entries], rel=1e-9)

    def test_coefficients_are_physical(self, rng):
        # columns of very different scale; b = 2 * col0 - 0.5 * col2 exactly
        raw = rng.standard_normal((30, 4)) * np.array([1.0, 100.0, 0.01, 5.0])
        b = 2.0 * raw[:, 0] - 0.5 * raw[:, 2]
        system = LibrarySystem(enumerate_terms(1, 2)[:4], raw, b, np.linalg.norm(raw, axis=0))
        top = discover_pde(system).top
        assert top.support == [0, 2]
        assert top.coefficients == pytest.approx([2.0, -0.5], rel=1e-8)


class TestReport:
    def test_format_pde(self):
        equation = format_pde(["(D_x^2 U)", "(U) (D_x U)"], [0.094168, -1.065668])
        assert equation == "D_t U = (0.094168)(D_x^2 U) - (1.065668)(U) (D_x U)"

    def test_format_constant_and_leading_sign(self):
        assert format_pde(["1", "(U)"], [-2.0, 0.5]) == "D_t U = -(2.000000) + (0.500000)(U)"
        assert format_pde([], []) == "D_t U = 0"

    def test_relative_errors_when_support_matches(self):
        report = rank_candidates(rfe_path(identity_system()))
        report.attach_true_pde({"1": 3.0, "(U)": 2.5, "(U)^2": 1.0})
        assert report.relative_errors == pytest.approx({"1": 0.0, "(U)": 0.2, "(U)^2": 0.0})
        assert "Relative coefficient error" in report.to_text()

    def test_no_relative_errors_on_mismatch(self):
        report = rank_candidates(rfe_path(identity_system()))
        report.attach_true_pde({"(U)": 2.0})
        assert report.true_pde == {"(U)": 2.0}
        assert report.relative_errors is None

    def test_text_lists_every_entry(self):
        report = rank_candidates(rfe_path(identity_system()))
        text = report.to_text()
        assert text.count("ratio") == 3
        assert "#1" in text and "D_t U = (3.000000) + (2.000000)(U) + (1.000000)(U)^2" in text

    def test_json_round_trip(self):
        report = rank_candidates(rfe_path(identity_system()), {"seed": 0})
        restored = type(report).model_validate_json(report.model_dump_json())
        assert restored == report
