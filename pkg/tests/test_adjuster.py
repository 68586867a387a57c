import os
from pathlib import Path

import numpy as np
import pytest

from fairadj.adjuster import FairAdjuster
from fairadj.data_model import AdjustmentDataset, load_dataset
from fairadj.estimation import fit_empirical
from fairadj.evaluation import evaluate_analytic
from fairadj.exceptions import EmptyCellError, InfeasibleError
from fairadj.fairness_lp import FairnessSpec
from fairadj.lp_solver import LPSolution, SolveStatus
from fairadj.objectives import ObjectiveSpec
from fairadj.policy import AdjustmentPolicy, analytic_confusions


class TestFairAdjuster:
    def test_biased_fixture_becomes_fair(self):
        data_path = (Path(
            os.path.realpath(__file__)
        ) / Path('../data/biased.csv')).resolve()
        ds = load_dataset(data_path)
        adjuster = FairAdjuster()
        policy = adjuster.fit(ds)
        assert policy.class_names == ('a', 'b', 'c')
        assert policy.group_names == ('f', 'm')
        assert policy.meta['n_train'] == 30
        assert policy.meta['criterion'] == 'term-by-term'
        assert policy.meta['objective'] == 'weighted'
        assert adjuster.solution.is_optimal
        w = analytic_confusions(policy, adjuster.em)
        assert np.abs(w[0] - w[1]).max() <= 1e-8
        assert np.isfinite(policy.p).all()
        report = evaluate_analytic(policy, adjuster.em)
        assert np.isfinite(report.w).all()
        assert np.isfinite(report.mean_tdr)
        assert report.disparity <= 1e-6
        assert np.isclose(adjuster.solution.objective, 2.8, atol=1e-8)

    def test_report_keeps_every_group(self):
        data_path = (Path(
            os.path.realpath(__file__)
        ) / Path('../data/biased.csv')).resolve()
        ds = load_dataset(data_path)
        em = fit_empirical(ds)
        p = np.stack([np.eye(3), np.full((3, 3), 1.0 / 3)])
        policy = AdjustmentPolicy(p, ds.class_names, ds.group_names)
        report = evaluate_analytic(policy, em)
        # identity for f, chance for m
        assert np.isclose(report.mean_tdr, (0.8 + 1.0 / 3) / 2)
        assert report.disparity > 0.1
        assert report.sweep_measure > 0.1

    def test_fair_perfect_predictor_keeps_identity(self):
        ds = AdjustmentDataset.from_counts([
            [[4, 0, 0], [0, 2, 0], [0, 0, 3]],
            [[2, 0, 0], [0, 5, 0], [0, 0, 1]],
        ])
        for kind in ('unweighted', 'weighted'):
            adjuster = FairAdjuster(FairnessSpec('classwise'),
                                    ObjectiveSpec(kind))
            policy = adjuster.fit(ds)
            assert np.isclose(adjuster.solution.objective, 0.0, atol=1e-12)
        assert np.allclose(policy.p, np.tile(np.eye(3), (2, 1, 1)))

    def test_relaxed_objective_not_worse(self):
        rng = np.random.default_rng(3)
        ds = AdjustmentDataset.from_counts(rng.integers(1, 30, (2, 3, 3)))
        exact = FairAdjuster(FairnessSpec('parity'))
        exact.fit(ds)
        loose = FairAdjuster(FairnessSpec('parity', 1.0))
        loose.fit(ds)
        assert loose.solution.objective <= exact.solution.objective + 1e-9

    def test_empty_cell(self):
        ds = AdjustmentDataset.from_counts([
            [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
            [[1, 0, 0], [0, 1, 0], [0, 0, 0]],
        ])
        with pytest.raises(EmptyCellError):
            FairAdjuster().fit(ds)
        adjuster = FairAdjuster(objective=ObjectiveSpec('unweighted'),
                                smoothing=0.5)
        policy = adjuster.fit(ds)
        assert policy.meta['smoothing'] == 0.5

    def test_custom_solver(self):
        def refuse(lp, tol, max_iter):
            return LPSolution(None, float('nan'), SolveStatus.INFEASIBLE, 0)

        ds = AdjustmentDataset.from_counts(np.ones((2, 2, 2)))
        adjuster = FairAdjuster(solver=refuse)
        with pytest.raises(InfeasibleError):
            adjuster.fit(ds)
        assert adjuster.solution.status is SolveStatus.INFEASIBLE
        assert adjuster.lp is not None
