import csv
import io
import logging
import os
from pathlib import Path

import numpy as np
import pytest

from fairadj.adjuster import FairAdjuster
from fairadj.criteria import CriterionKind, GroupQuantities
from fairadj.data_model import AdjustmentDataset, load_dataset
from fairadj.estimation import fit_empirical
from fairadj.evaluation import (
    SWEEP_COLUMNS, analytic_brier, brier_score, crossval, evaluate_analytic,
    evaluate_blackbox, evaluate_sampled, measure_from_quantities,
    report_from_predictions, rows_to_csv, run_sweep, sweep_measure,
    unconstrained_objective,
)
from fairadj.exceptions import EmptyCellError, SpaceMismatchError
from fairadj.fairness_lp import FairnessSpec
from fairadj.objectives import ObjectiveSpec
from fairadj.policy import AdjustmentPolicy
from fairadj.synth import RegimeSpec, generate
from fairadj.utils import percent_change


def biased():
    data_path = (Path(
        os.path.realpath(__file__)
    ) / Path('../data/biased.csv')).resolve()
    return load_dataset(data_path)


def perfect():
    return AdjustmentDataset.from_counts([
        [[10, 0, 0], [0, 10, 0], [0, 0, 10]],
        [[10, 0, 0], [0, 10, 0], [0, 0, 10]],
    ])


class TestAnalyticReport:
    def test_identity_on_perfect_predictor(self):
        ds = perfect()
        em = fit_empirical(ds)
        identity = AdjustmentPolicy.identity(ds.class_names, ds.group_names)
        report = evaluate_analytic(identity, em)
        assert np.isclose(report.accuracy, 1.0)
        assert np.isclose(report.mean_tdr, 1.0)
        assert report.disparity == 0.0
        assert not report.trivial
        assert report.brier == 0.0
        assert report.criterion == 'term-by-term'

    def test_uniform(self):
        ds = biased()
        em = fit_empirical(ds)
        uniform = AdjustmentPolicy.uniform(ds.class_names, ds.group_names)
        report = evaluate_analytic(uniform, em)
        assert np.isclose(report.accuracy, 1.0 / 3)
        assert np.isclose(report.disparity, 0.0)
        assert np.allclose(report.w, 1.0 / 3)
        assert not report.trivial
        assert np.isclose(report.brier, 2.0 / 3)

    def test_identity_matches_blackbox_counts(self):
        ds = biased()
        em = fit_empirical(ds)
        identity = AdjustmentPolicy.identity(ds.class_names, ds.group_names)
        analytic = evaluate_analytic(identity, em)
        counted = evaluate_blackbox(ds)
        assert np.isclose(analytic.accuracy, counted.accuracy)
        assert np.allclose(analytic.w, counted.w)
        assert np.allclose(analytic.fdr, counted.fdr)
        assert np.isclose(analytic.disparity, counted.disparity)
        assert np.isclose(analytic.brier, counted.brier)
        assert np.isclose(analytic.brier, 2.0 * (1.0 - analytic.accuracy))

    def test_trivial_when_a_class_is_never_emitted(self):
        ds = biased()
        em = fit_empirical(ds)
        p = np.tile(np.eye(3), (2, 1, 1))
        p[1, 0, 2] = 1.0
        p[1, 2, 2] = 0.0
        policy = AdjustmentPolicy(p, ds.class_names, ds.group_names)
        report = evaluate_analytic(policy, em)
        assert report.trivial
        mixture = np.einsum('aj,aij->ai', em.p_ya, report.w)
        assert (mixture < 1e-12).any()

    def test_adjusted_is_fair(self):
        ds = biased()
        policy = FairAdjuster().fit(ds)
        report = evaluate_analytic(policy, fit_empirical(ds))
        assert report.disparity <= 1e-6
        assert report.sweep_measure <= 1e-6

    def test_to_dict(self):
        ds = biased()
        report = evaluate_blackbox(ds, 'parity')
        data = report.to_dict()
        assert data['criterion'] == 'parity'
        assert len(data['w']) == 2
        assert set(data) >= {'accuracy', 'mean_tdr', 'fdr', 'disparity',
                             'brier', 'youden_j', 'trivial', 'sweep_measure'}


class TestSweepMeasure:
    def test_parity_hand_example(self):
        eye = np.eye(2)
        quantities = [
            GroupQuantities(eye, [0.0, 0.0], [0.6, 0.4]),
            GroupQuantities(eye, [0.0, 0.0], [0.4, 0.6]),
        ]
        assert np.isclose(measure_from_quantities(quantities, 'parity'), 0.2)
        assert measure_from_quantities(quantities, 'term-by-term') == 0.0

    def test_max_over_pairs(self):
        quantities = [
            GroupQuantities(np.eye(2), [0.0, 0.0], [0.5, 0.5]),
            GroupQuantities(np.eye(2), [0.0, 0.0], [0.6, 0.4]),
            GroupQuantities(np.eye(2), [0.0, 0.0], [0.8, 0.2]),
        ]
        assert np.isclose(
            measure_from_quantities(quantities, CriterionKind.DEMOGRAPHIC_PARITY),
            0.3,
        )

    def test_zero_when_criterion_holds(self):
        ds = biased()
        em = fit_empirical(ds)
        for kind in CriterionKind:
            policy = FairAdjuster(FairnessSpec(kind)).fit(ds)
            assert sweep_measure(policy, em) <= 1e-8
            assert sweep_measure(policy, em, kind) <= 1e-8


class TestBrier:
    def test_identity_on_perfect_predictions(self):
        ds = perfect()
        identity = AdjustmentPolicy.identity(ds.class_names, ds.group_names)
        assert brier_score(identity, ds) == 0.0

    def test_uniform_two_classes(self):
        ds = AdjustmentDataset.from_counts(np.full((2, 2, 2), 3))
        uniform = AdjustmentPolicy.uniform(ds.class_names, ds.group_names)
        assert np.isclose(brier_score(uniform, ds), 0.5)

    def test_wrong_column(self):
        ds = AdjustmentDataset.from_counts([[[4, 0], [0, 4]], [[2, 0], [0, 1]]])
        swap = np.tile([[0.0, 1.0], [1.0, 0.0]], (2, 1, 1))
        policy = AdjustmentPolicy(swap, ds.class_names, ds.group_names)
        assert np.isclose(brier_score(policy, ds), 2.0)

    def test_analytic_matches_in_sample(self):
        ds = biased()
        policy = FairAdjuster().fit(ds)
        em = fit_empirical(ds)
        assert np.isclose(analytic_brier(policy, em), brier_score(policy, ds))


class TestSampledReport:
    def test_identity_reproduces_blackbox(self):
        ds = biased()
        identity = AdjustmentPolicy.identity(ds.class_names, ds.group_names)
        sampled = evaluate_sampled(identity, ds, seed=5)
        blackbox = evaluate_blackbox(ds)
        assert sampled.accuracy == blackbox.accuracy
        assert np.allclose(sampled.w, blackbox.w)

    def test_agrees_with_analytic_on_large_sample(self):
        spec = RegimeSpec(2, 'Balanced', 'No Minority', 'Medium', 100000, 3)
        ds = generate(spec)
        em = fit_empirical(ds)
        policy = FairAdjuster().fit_model(em)
        analytic = evaluate_analytic(policy, em)
        sampled = evaluate_sampled(policy, ds, seed=1)
        assert abs(sampled.accuracy - analytic.accuracy) < 0.01
        assert abs(sampled.mean_tdr - analytic.mean_tdr) < 0.01
        assert np.abs(sampled.w - analytic.w).max() < 0.03
        assert np.isclose(sampled.brier, analytic.brier)

    def test_tiny_shifted_holdout_completes(self):
        policy = FairAdjuster().fit(biased())
        holdout = AdjustmentDataset(
            [0, 1, 2, 0], [0, 0, 2, 1], [0, 1, 1, 0], ('a', 'b', 'c'),
            ('f', 'm'),
        )
        report = evaluate_sampled(policy, holdout, seed=2)
        assert 0.0 <= report.accuracy <= 1.0

    def test_unseen_group(self):
        policy = FairAdjuster().fit(biased())
        holdout = AdjustmentDataset([0, 1], [0, 1], [0, 1], ('a', 'b'),
                                    ('f', 'x'))
        with pytest.raises(SpaceMismatchError):
            evaluate_sampled(policy, holdout)

    def test_silent_class_is_trivial(self, caplog):
        with caplog.at_level(logging.WARNING):
            report = report_from_predictions(
                [0, 1, 2, 0, 1, 2], [0, 0, 2, 0, 1, 2], [0, 0, 0, 1, 1, 1],
                3, 2,
            )
        assert report.trivial
        assert 'never predicted' in caplog.text
        assert np.isnan(report.brier)

    def test_missing_truth_cells_are_skipped(self):
        report = report_from_predictions(
            [0, 1, 0, 0], [0, 1, 0, 1], [0, 0, 1, 1], 2, 2,
        )
        assert np.isnan(report.w[1][:, 1]).all()
        assert np.isclose(report.disparity, 0.5)


class TestCrossval:
    def test_perfect_fair_blackbox(self):
        for kind in CriterionKind:
            result = crossval(perfect(), folds=5, seed=4,
                              spec=FairnessSpec(kind))
            assert result.pooled_post.accuracy >= 0.999
            assert len(result.fold_pre) == 5
            assert len(result.fold_post) == 5
            assert result.plan.fold_sizes().tolist() == [12] * 5

    def test_large_synthetic_sample(self):
        spec = RegimeSpec(2, 'Balanced', 'No Minority', 'Medium', 100000, 9)
        result = crossval(generate(spec), folds=5, seed=0)
        assert result.pooled_pre.disparity > 0.1
        assert result.pooled_post.disparity < 0.02
        changes = result.changes()
        assert set(changes) == {'accuracy', 'mean_tdr', 'disparity', 'brier'}
        assert changes['disparity'] < -80
        # equal confusion matrices cap every group at the minority's TDR,
        # 0.55 against a blackbox mean of 0.675
        assert result.pooled_post.mean_tdr <= 0.55 + 0.01
        assert -21.0 < changes['mean_tdr'] < -15.0

    def test_small_five_class_sample_completes(self):
        rng = np.random.default_rng(10)
        counts = rng.integers(1, 20, (2, 5, 5))
        counts[:, np.arange(5), np.arange(5)] += 20
        result = crossval(AdjustmentDataset.from_counts(counts), folds=5,
                          seed=1, obj=ObjectiveSpec('unweighted'))
        data = result.to_dict()
        assert data['folds'] == 5
        assert sum(data['fold_sizes']) == counts.sum()
        assert set(data['percent_change']) == set(result.changes())

    def test_empty_cell_names_fold(self):
        ds = AdjustmentDataset.from_counts([
            [[5, 1], [1, 5]], [[5, 1], [1, 0]],
        ])
        with pytest.raises(EmptyCellError) as info:
            crossval(ds, folds=5, seed=0)
        assert 'fold' in str(info.value)

    def test_percent_change(self):
        assert round(percent_change(0.364, 0.338)) == -7
        assert np.isnan(percent_change(0.0, 0.5))


class TestSweep:
    def test_rows_and_monotone_objective(self):
        em = fit_empirical(AdjustmentDataset.from_counts([
            [[8, 2], [3, 7]], [[5, 5], [1, 9]],
        ]))
        rows = run_sweep(em, criteria=['opportunity'],
                         obj=ObjectiveSpec('unweighted'))
        assert len(rows) == 102
        points, blackbox = rows[:-1], rows[-1]
        assert [row['epsilon'] for row in points] == [
            step / 100 for step in range(101)
        ]
        assert all(row['status'] == 'Optimal' for row in points)
        values = [row['objective_value'] for row in points]
        assert all(
            later <= earlier + 1e-9
            for earlier, later in zip(values, values[1:])
        )
        assert np.isclose(values[-1], unconstrained_objective(
            em, ObjectiveSpec('unweighted')
        ))
        for row in points:
            assert row['sweep_measure'] <= row['epsilon'] + 1e-8
        assert blackbox['epsilon'] == ''
        assert blackbox['criterion'] == 'blackbox:opportunity'
        assert blackbox['status'] == 'Blackbox'

    def test_monotone_for_every_criterion_on_biased_data(self):
        spec = RegimeSpec(2, 'One Rare', 'One Strong Minority', 'Medium',
                          5000, 4)
        em = fit_empirical(generate(spec))
        rows = run_sweep(em)
        assert len(rows) == 4 * 102
        objective = {}
        for kind in CriterionKind:
            points = [row for row in rows if row['criterion'] == kind.value]
            assert len(points) == 101
            assert all(row['status'] == 'Optimal' for row in points)
            values = [row['objective_value'] for row in points]
            assert all(
                later <= earlier + 1e-9
                for earlier, later in zip(values, values[1:])
            )
            for row in points:
                assert row['sweep_measure'] <= row['epsilon'] + 1e-8
            objective[kind] = values
        # equal confusion matrices imply equal detection rates
        for strict, loose in zip(objective[CriterionKind.TERM_BY_TERM],
                                 objective[CriterionKind.OPPORTUNITY]):
            assert strict >= loose - 1e-9

    def test_every_criterion(self):
        em = fit_empirical(biased())
        rows = run_sweep(em, steps=4)
        assert len(rows) == 4 * 6
        criteria = [row['criterion'] for row in rows]
        assert criteria.count('parity') == 5
        assert criteria.count('blackbox:classwise') == 1

    def test_workers_do_not_change_results(self):
        em = fit_empirical(biased())
        serial = run_sweep(em, criteria=['term-by-term', 'parity'], steps=3)
        parallel = run_sweep(em, criteria=['term-by-term', 'parity'],
                             steps=3, workers=2)
        assert serial == parallel

    def test_csv(self):
        em = fit_empirical(biased())
        rows = run_sweep(em, criteria=['parity'], steps=2)
        text = rows_to_csv(rows, SWEEP_COLUMNS)
        parsed = list(csv.DictReader(io.StringIO(text)))
        assert list(parsed[0]) == list(SWEEP_COLUMNS)
        assert len(parsed) == 4
        assert float(parsed[1]['epsilon']) == 0.5
        assert float(parsed[0]['objective_value']) == rows[0][
            'objective_value'
        ]
