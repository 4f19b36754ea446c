from __future__ import annotations

import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stratwave.allocation import (
    StratumSummary,
    allocate_wave,
    estimator_variance,
    neyman_allocation,
    optimum_allocation,
    summarize_strata,
    wave_history,
    wright_allocation,
)
from stratwave.errors import (
    AmbiguousInput,
    BudgetBelowFloor,
    BudgetExceedsPopulation,
    ColumnNotFound,
    DataError,
    DegenerateVariance,
    InsufficientData,
    ShapeMismatch,
    StratumTooSmall,
    ZeroAllocation,
)

from .oracles import enumerate_optimum


def make(*triples: tuple[str, int, float]) -> list[StratumSummary]:
    return [StratumSummary(label, npop, sd) for label, npop, sd in triples]


# A compact strategy for random allocation problems: up to 4 strata,
# populations up to 12, so the enumeration oracle stays fast.
small_problems = st.lists(
    st.tuples(st.integers(min_value=1, max_value=12), st.floats(min_value=0.0, max_value=3.0)),
    min_size=1,
    max_size=4,
).map(lambda rows: make(*[(f"s{i}", n, sd) for i, (n, sd) in enumerate(rows)]))


class TestSummarizeStrata:
    def test_iris_sepal_width(self, iris):
        """The three species have sds 0.3791, 0.3138 and 0.3225 (4 dp)."""
        out = summarize_strata(iris, "Species", "Sepal.Width")
        assert [s.label for s in out] == ["setosa", "versicolor", "virginica"]
        assert [s.npop for s in out] == [50, 50, 50]
        assert [round(s.sd, 4) for s in out] == [0.3791, 0.3138, 0.3225]

    def test_hand_computed_sds(self):
        """sd of {0,1,2} is 1 and of {10,20,30} is 10 with the n-1 denominator."""
        units = pd.DataFrame(
            {"g": ["a", "a", "a", "b", "b", "b"], "y": [0, 1, 2, 10, 20, 30]}
        )
        out = summarize_strata(units, "g", "y")
        assert [s.sd for s in out] == [1.0, 10.0]

    def test_constant_stratum_has_sd_zero(self):
        units = pd.DataFrame({"g": ["a"] * 4, "y": [5.0] * 4})
        (s,) = summarize_strata(units, "g", "y")
        assert s.sd == 0.0

    def test_npop_counts_missing_y_rows(self):
        units = pd.DataFrame({"g": ["a"] * 5, "y": [1.0, 2.0, 3.0, None, None]})
        (s,) = summarize_strata(units, "g", "y")
        assert s.npop == 5
        assert s.sd == pytest.approx(1.0)

    def test_single_observation_stratum_rejected(self):
        units = pd.DataFrame({"g": ["a", "a", "b"], "y": [1.0, 2.0, 3.0]})
        with pytest.raises(InsufficientData, match="'b'"):
            summarize_strata(units, "g", "y")

    def test_missing_column(self, iris):
        with pytest.raises(ColumnNotFound):
            summarize_strata(iris, "Species", "Sepal.Girth")
        with pytest.raises(ColumnNotFound):
            summarize_strata(iris, "Genus", "Sepal.Width")


class TestNeymanAllocation:
    def test_symmetric_strata_split_evenly(self):
        out = neyman_allocation(make(("a", 10, 2.0), ("b", 10, 2.0)))
        assert list(out["stratum_fraction"]) == [0.5, 0.5]
        assert "stratum_size" not in out.columns

    def test_iris_fractions(self, iris):
        out = neyman_allocation(summarize_strata(iris, "Species", "Sepal.Width"))
        assert [round(f, 3) for f in out["stratum_fraction"]] == [0.373, 0.309, 0.318]

    def test_largest_remainder_rounding(self):
        """Fractions 2/3 and 1/3 of 6 land exactly on 4 and 2."""
        out = neyman_allocation(make(("a", 10, 2.0), ("b", 10, 1.0)), nsample=6)
        assert list(out["stratum_size"]) == [4, 2]

    def test_rounded_sizes_sum_to_budget(self):
        out = neyman_allocation(
            make(("a", 30, 1.0), ("b", 20, 1.3), ("c", 25, 0.7)), nsample=17
        )
        assert out["stratum_size"].sum() == 17

    def test_zero_size_stratum_warns(self):
        with pytest.warns(UserWarning, match="0 units"):
            out = neyman_allocation(make(("a", 100, 5.0), ("b", 100, 0.001)), nsample=3)
        assert list(out["stratum_size"]) == [3, 0]

    def test_all_zero_sd_rejected(self):
        with pytest.raises(DegenerateVariance):
            neyman_allocation(make(("a", 10, 0.0), ("b", 10, 0.0)))

    def test_budget_above_population_rejected(self):
        with pytest.raises(BudgetExceedsPopulation):
            neyman_allocation(make(("a", 5, 1.0), ("b", 5, 1.0)), nsample=11)

    @given(small_problems)
    def test_fractions_sum_to_one(self, summaries):
        if all(s.sd == 0 for s in summaries):
            return
        out = neyman_allocation(summaries)
        assert abs(out["stratum_fraction"].sum() - 1.0) < 1e-9


class TestWrightAllocation:
    def test_iris_forty_units(self, iris):
        """40 units over the species split 15/12/13 with floor 2."""
        out = wright_allocation(summarize_strata(iris, "Species", "Sepal.Width"), 40)
        assert list(out["stratum_size"]) == [15, 12, 13]
        assert [round(v, 2) for v in out["n_sd"]] == [18.95, 15.69, 16.12]
        assert list(out["stratum_fraction"]) == [15 / 40, 12 / 40, 13 / 40]

    def test_two_strata_budget_six(self):
        """Enumeration gives (4,2): 1600/4+400/2 beats 1600/3+400/3 and 1600/5+400/1."""
        out = wright_allocation(make(("a", 10, 2.0), ("b", 10, 1.0)), 6, min_per_stratum=1)
        assert list(out["stratum_size"]) == [4, 2]

    def test_floor_one_vs_floor_two(self):
        """A near-degenerate stratum keeps 1 unit under floor 1 but 2 under floor 2."""
        summaries = make(("a", 10, 2.0), ("b", 10, 0.01))
        one = wright_allocation(summaries, 4, min_per_stratum=1)
        two = wright_allocation(summaries, 4, min_per_stratum=2)
        assert list(one["stratum_size"]) == [3, 1]
        assert list(two["stratum_size"]) == [2, 2]

    def test_population_cap_binds(self):
        """Stratum a (3 units, high sd) caps at 3; the rest go to b."""
        out = wright_allocation(make(("a", 3, 5.0), ("b", 10, 0.5)), 7, min_per_stratum=1)
        assert list(out["stratum_size"]) == [3, 4]

    def test_tied_priorities_prefer_earlier_label(self):
        out = wright_allocation(make(("a", 10, 1.0), ("b", 10, 1.0)), 5, min_per_stratum=1)
        assert list(out["stratum_size"]) == [3, 2]

    def test_zero_sd_stratum_stays_at_floor(self):
        out = wright_allocation(make(("a", 10, 1.0), ("b", 10, 0.0)), 8)
        assert list(out["stratum_size"]) == [6, 2]

    def test_zero_sd_strata_absorb_leftover_after_caps(self):
        """Once every positive-sd stratum is capped, leftover fills sd-0 strata."""
        out = wright_allocation(make(("a", 4, 1.0), ("b", 10, 0.0)), 9)
        assert list(out["stratum_size"]) == [4, 5]

    def test_single_stratum_takes_whole_budget(self):
        out = wright_allocation(make(("a", 50, 0.7),), 12)
        assert list(out["stratum_size"]) == [12]

    def test_fraction_is_realised_share(self):
        out = wright_allocation(make(("a", 10, 2.0), ("b", 10, 1.0)), 6, min_per_stratum=1)
        assert list(out["stratum_fraction"]) == [4 / 6, 2 / 6]

    def test_budget_below_floor_rejected(self):
        with pytest.raises(BudgetBelowFloor):
            wright_allocation(make(("a", 10, 1.0), ("b", 10, 1.0)), 3)

    def test_budget_above_population_rejected(self):
        with pytest.raises(BudgetExceedsPopulation):
            wright_allocation(make(("a", 4, 1.0), ("b", 4, 1.0)), 9)

    def test_small_stratum_rejected_without_allow_small(self):
        with pytest.raises(StratumTooSmall):
            wright_allocation(make(("a", 1, 1.0), ("b", 10, 1.0)), 6)
        out = wright_allocation(make(("a", 1, 1.0), ("b", 10, 1.0)), 6, allow_small=True)
        assert list(out["stratum_size"]) == [1, 5]

    @given(small_problems, st.integers(min_value=0, max_value=20))
    @settings(max_examples=120, deadline=None)
    def test_matches_enumeration_optimum(self, summaries, extra):
        """The greedy variance equals the exhaustive minimum exactly."""
        floor_total = sum(min(2, s.npop) for s in summaries)
        total_npop = sum(s.npop for s in summaries)
        nsample = min(total_npop, floor_total + extra)
        got = wright_allocation(summaries, nsample, allow_small=True)
        sizes = dict(zip(got["strata"], got["stratum_size"]))
        try:
            variance = estimator_variance(summaries, sizes).variance
        except ZeroAllocation:
            return  # an allow_small cap of 0 never happens; npop >= 1
        floors = {s.label: min(2, s.npop) for s in summaries}
        best_v, _ = enumerate_optimum(summaries, nsample, floors)
        assert variance == best_v

    @given(small_problems, st.integers(min_value=0, max_value=15))
    @settings(max_examples=120, deadline=None)
    def test_one_more_unit_moves_one_stratum(self, summaries, extra):
        floor_total = sum(min(2, s.npop) for s in summaries)
        total_npop = sum(s.npop for s in summaries)
        nsample = min(total_npop - 1, floor_total + extra)
        if nsample < floor_total:
            return
        a = wright_allocation(summaries, nsample, allow_small=True)
        b = wright_allocation(summaries, nsample + 1, allow_small=True)
        diff = b["stratum_size"].to_numpy() - a["stratum_size"].to_numpy()
        assert diff.sum() == 1
        assert set(diff) <= {0, 1}
        assert (diff == 1).sum() == 1

    @given(small_problems, st.integers(min_value=0, max_value=15), st.sampled_from([0.25, 3.0, 17.5]))
    @settings(max_examples=120, deadline=None)
    def test_scale_invariance(self, summaries, extra, factor):
        """Multiplying every sd by a constant leaves the sizes unchanged."""
        floor_total = sum(min(2, s.npop) for s in summaries)
        nsample = min(sum(s.npop for s in summaries), floor_total + extra)
        base = wright_allocation(summaries, nsample, allow_small=True)
        scaled_summaries = [
            StratumSummary(s.label, s.npop, s.sd * factor) for s in summaries
        ]
        scaled = wright_allocation(scaled_summaries, nsample, allow_small=True)
        assert list(base["stratum_size"]) == list(scaled["stratum_size"])


class TestEstimatorVariance:
    def test_single_stratum_hand_value(self):
        """(10*2)^2/5 - (10*2)^2/10 = 80 - 40 = 40."""
        report = estimator_variance(make(("a", 10, 2.0)), {"a": 5})
        assert report.variance == 40.0
        assert report.finite_population_term == 40.0

    def test_census_variance_is_zero(self):
        report = estimator_variance(make(("a", 10, 2.0), ("b", 7, 1.5)), {"a": 10, "b": 7})
        assert report.variance == 0.0

    def test_two_strata_hand_value(self):
        """400/4 + 100/2 - (400/10 + 100/10) = 150 - 50 = 100."""
        report = estimator_variance(make(("a", 10, 2.0), ("b", 10, 1.0)), {"a": 4, "b": 2})
        assert report.variance == 100.0
        assert report.finite_population_term == 50.0

    def test_sequence_and_design_table_inputs(self):
        summaries = make(("a", 10, 2.0), ("b", 10, 1.0))
        by_map = estimator_variance(summaries, {"a": 4, "b": 2})
        by_seq = estimator_variance(summaries, [4, 2])
        by_table = estimator_variance(
            summaries, pd.DataFrame({"strata": ["a", "b"], "stratum_size": [4, 2]})
        )
        assert by_map == by_seq == by_table

    def test_zero_allocation_rejected(self):
        with pytest.raises(ZeroAllocation):
            estimator_variance(make(("a", 10, 2.0), ("b", 10, 1.0)), {"a": 6, "b": 0})

    def test_incomplete_allocation_rejected(self):
        with pytest.raises(ShapeMismatch):
            estimator_variance(make(("a", 10, 2.0), ("b", 10, 1.0)), {"a": 6})

    def test_strictly_decreasing_in_stratum_size(self):
        summaries = make(("a", 30, 1.2), ("b", 30, 0.4))
        previous = math.inf
        for n_a in range(2, 29):
            v = estimator_variance(summaries, {"a": n_a, "b": 2}).variance
            assert v < previous
            previous = v


class TestAllocateWave:
    def test_no_oversampling_equals_total_optimum_minus_prior(self):
        out = allocate_wave(make(("a", 10, 2.0), ("b", 10, 1.0)), {"a": 1, "b": 1}, 4)
        assert list(out["nsample_optimal"]) == [4, 2]
        assert list(out["nsample_actual"]) == [4, 2]
        assert list(out["n_to_sample"]) == [3, 1]

    def test_oversampled_stratum_freezes(self):
        """b's 5 prior samples exceed its cumulative optimum of 2, so b is
        frozen and the remaining 2 units re-solve over a alone."""
        out = allocate_wave(make(("a", 10, 2.0), ("b", 10, 1.0)), {"a": 1, "b": 5}, 1)
        assert list(out["nsample_optimal"]) == [5, 2]
        assert list(out["nsample_actual"]) == [2, 5]
        assert list(out["n_to_sample"]) == [1, 0]

    def test_three_strata_oversampling(self):
        """With sds 0.47/0.29/0.24 over 50-unit strata, 16 prior samples in
        the third stratum exceed its share of the 40-unit total; the new
        wave splits 8/2/0."""
        summaries = make(
            ("setosa", 50, 0.47), ("versicolor", 50, 0.29), ("virginica", 50, 0.24)
        )
        out = allocate_wave(
            summaries, {"setosa": 7, "versicolor": 7, "virginica": 16}, 10, detailed=True
        )
        assert list(out["n_to_sample"]) == [8, 2, 0]
        assert list(out["nsample_actual"]) == [15, 9, 16]
        assert list(out["nsample_prior"]) == [7, 7, 16]
        assert out["nsample_optimal"].sum() == 40

    def test_reduced_problem_matches_enumeration(self):
        summaries = make(("a", 20, 1.0), ("b", 20, 0.2), ("c", 20, 0.9))
        prior = {"a": 2, "b": 9, "c": 2}
        out = allocate_wave(summaries, prior, 5)
        frozen = out[out["n_to_sample"] == 0]
        assert list(frozen["strata"]) == ["b"]
        remaining = [s for s in summaries if s.label != "b"]
        budget = 2 + 9 + 2 + 5 - 9
        _, best = enumerate_optimum(remaining, budget, {"a": 2, "c": 2})
        kept = out[out["strata"] != "b"]
        assert tuple(kept["nsample_actual"]) == best

    def test_detailed_appends_sd_column(self):
        summaries = make(("a", 10, 2.0), ("b", 10, 1.0))
        plain = allocate_wave(summaries, {"a": 2, "b": 2}, 3)
        detailed = allocate_wave(summaries, {"a": 2, "b": 2}, 3, detailed=True)
        assert list(plain.columns) == [
            "strata", "npop", "nsample_optimal", "nsample_actual", "nsample_prior", "n_to_sample",
        ]
        assert list(detailed.columns) == list(plain.columns) + ["sd"]
        assert list(detailed["sd"]) == [2.0, 1.0]

    def test_floor_relaxes_when_budget_cannot_cover_it(self):
        """Budget 2+0+1=3 cannot give both strata 2 units; the unsampled
        stratum's floor drops to its prior of 0."""
        out = allocate_wave(make(("a", 10, 0.1), ("b", 10, 2.0)), {"a": 2, "b": 0}, 1)
        assert out["nsample_actual"].sum() == 3
        assert list(out["n_to_sample"]) == [0, 1]

    def test_prior_above_population_rejected(self):
        with pytest.raises(DataError):
            allocate_wave(make(("a", 3, 1.0), ("b", 10, 1.0)), {"a": 4, "b": 0}, 2)

    def test_total_above_population_rejected(self):
        with pytest.raises(BudgetExceedsPopulation):
            allocate_wave(make(("a", 3, 1.0), ("b", 3, 1.0)), {"a": 3, "b": 2}, 2)

    def test_unknown_prior_stratum_rejected(self):
        with pytest.raises(DataError, match="unknown stratum"):
            allocate_wave(make(("a", 5, 1.0)), {"zz": 1}, 2)

    @given(small_problems, st.integers(min_value=0, max_value=15))
    @settings(max_examples=100, deadline=None)
    def test_zero_prior_equals_wright(self, summaries, extra):
        floor_total = sum(min(2, s.npop) for s in summaries)
        total_npop = sum(s.npop for s in summaries)
        nsample = min(total_npop, floor_total + extra)
        if nsample < 1:
            return
        wave = allocate_wave(summaries, {}, nsample)
        wright = wright_allocation(summaries, nsample, allow_small=True)
        assert list(wave["nsample_actual"]) == list(wright["stratum_size"])

    @given(small_problems, st.integers(min_value=1, max_value=10), st.randoms(use_true_random=False))
    @settings(max_examples=100, deadline=None)
    def test_wave_budget_spent_exactly(self, summaries, nsample, rng):
        total_npop = sum(s.npop for s in summaries)
        prior = {s.label: rng.randint(0, s.npop) for s in summaries}
        nsample = min(nsample, total_npop - sum(prior.values()))
        if nsample < 1:
            return
        out = allocate_wave(summaries, prior, nsample)
        assert out["n_to_sample"].sum() == nsample
        assert (out["nsample_actual"] >= out["nsample_prior"]).all()
        assert (out["nsample_actual"] <= out["npop"]).all()


class TestOptimumAllocation:
    def test_unit_and_summary_inputs_agree(self, iris):
        """The same counts and sds must yield the same design either way."""
        by_units = optimum_allocation(
            iris, strata_col="Species", y_col="Sepal.Width", nsample=40, method="WrightII"
        )
        sds = summarize_strata(iris, "Species", "Sepal.Width")
        summary_table = pd.DataFrame(
            {
                "strata": [s.label for s in sds],
                "size": [s.npop for s in sds],
                "sd": [s.sd for s in sds],
            }
        )
        by_summary = optimum_allocation(
            summary_table,
            strata_col="strata",
            sd_col="sd",
            npop_col="size",
            nsample=40,
            method="WrightII",
        )
        pd.testing.assert_frame_equal(by_units, by_summary)

    def test_four_decimal_sds_give_same_sizes(self):
        """Summary input rounded to 4 decimals still allocates 15/12/13."""
        summary_table = pd.DataFrame(
            {
                "strata": ["setosa", "versicolor", "virginica"],
                "npop": [50, 50, 50],
                "sd": [0.3791, 0.3138, 0.3225],
            }
        )
        out = optimum_allocation(
            summary_table, strata_col="strata", sd_col="sd", npop_col="npop",
            nsample=40, method="WrightII",
        )
        assert list(out["stratum_size"]) == [15, 12, 13]

    def test_method_dispatch(self):
        summaries = make(("a", 10, 2.0), ("b", 10, 0.01))
        w1 = optimum_allocation(summaries, method="WrightI", nsample=4)
        w2 = optimum_allocation(summaries, method="wrightii", nsample=4)
        assert list(w1["stratum_size"]) == [3, 1]
        assert list(w2["stratum_size"]) == [2, 2]
        ney = optimum_allocation(summaries, method="Neyman")
        assert "stratum_size" not in ney.columns

    def test_both_input_shapes_rejected(self, iris):
        with pytest.raises(AmbiguousInput):
            optimum_allocation(
                iris, strata_col="Species", y_col="Sepal.Width", sd_col="sd",
                npop_col="npop", nsample=10,
            )

    def test_neither_input_shape_rejected(self, iris):
        with pytest.raises(AmbiguousInput):
            optimum_allocation(iris, strata_col="Species", nsample=10)

    def test_wright_requires_budget(self):
        with pytest.raises(DataError, match="nsample"):
            optimum_allocation(make(("a", 10, 1.0)), method="WrightII")

    def test_unknown_method_rejected(self):
        with pytest.raises(DataError, match="method"):
            optimum_allocation(make(("a", 10, 1.0)), method="banana", nsample=4)

    def test_small_stratum_needs_allow_small(self):
        summaries = make(("tiny", 1, 0.5), ("big", 20, 1.0))
        with pytest.raises(StratumTooSmall):
            optimum_allocation(summaries, method="WrightII", nsample=6)
        out = optimum_allocation(summaries, method="WrightII", nsample=6, allow_small=True)
        assert list(out["strata"]) == ["big", "tiny"]
        assert list(out["stratum_size"]) == [5, 1]


class TestWaveHistory:
    def test_priors_and_sds_come_from_sampled_rows(self):
        units = pd.DataFrame(
            {
                "g": ["a"] * 4 + ["b"] * 4,
                "y": [1.0, 3.0, None, None, 10.0, 20.0, 30.0, None],
                "done": [1, 1, 0, 0, 1, 1, 1, 0],
            }
        )
        summaries, prior = wave_history(units, "g", "y", "done")
        assert prior == {"a": 2, "b": 3}
        assert [s.npop for s in summaries] == [4, 4]
        assert summaries[0].sd == pytest.approx(np.std([1.0, 3.0], ddof=1))
        assert summaries[1].sd == pytest.approx(np.std([10.0, 20.0, 30.0], ddof=1))

    def test_indicator_must_be_binary(self):
        units = pd.DataFrame({"g": ["a", "a"], "y": [1.0, 2.0], "done": [1, 2]})
        with pytest.raises(DataError, match="0 and 1"):
            wave_history(units, "g", "y", "done")

    def test_stratum_without_two_sampled_values_rejected(self):
        units = pd.DataFrame({"g": ["a", "a", "a"], "y": [1.0, 2.0, 3.0], "done": [1, 0, 0]})
        with pytest.raises(InsufficientData):
            wave_history(units, "g", "y", "done")
