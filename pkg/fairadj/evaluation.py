'''Discrimination and fairness reports for adjusted predictors

Analytic reports come from the estimated distributions (no randomness);
sampled reports draw adjusted labels for a holdout and count. Both share
the same definitions:

* disparity: mean over unordered group pairs of the elementwise mean
  |W^a - W^a'|
* sweep measure: max over unordered group pairs of the mean absolute
  difference of the criterion's metric object
* trivial: some class is never emitted for some group
'''
import csv
import io
import itertools
import logging
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from .adjuster import FairAdjuster
from .criteria import CriterionFactory, CriterionKind, GroupQuantities
from .data_model import make_splits
from .exceptions import EmptyCellError, FairAdjError, SolverError
from .fairness_lp import FairnessSpec, assemble, objective_vector
from .lp_solver import solve
from .objectives import ObjectiveSpec
from .policy import (
    AdjustmentPolicy, analytic_confusions, class_marginals,
    false_detection_rates, from_solution,
)
from .utils import derive_seed, percent_change

logger = logging.getLogger(__name__)

TRIVIAL_TOL = 1e-9
SWEEP_COLUMNS = (
    'epsilon', 'criterion', 'status', 'objective_value', 'brier',
    'sweep_measure', 'accuracy', 'mean_tdr', 'trivial',
)


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    accuracy: float
    mean_tdr: float
    fdr: np.ndarray
    disparity: float
    brier: float
    youden_j: np.ndarray
    trivial: bool
    sweep_measure: float
    w: np.ndarray
    criterion: str = CriterionKind.TERM_BY_TERM.value

    @property
    def tdr(self):
        return np.diagonal(self.w, axis1=1, axis2=2)

    def to_dict(self):
        return {
            'accuracy': self.accuracy,
            'mean_tdr': self.mean_tdr,
            'fdr': self.fdr.tolist(),
            'disparity': self.disparity,
            'brier': self.brier,
            'youden_j': self.youden_j.tolist(),
            'trivial': self.trivial,
            'sweep_measure': self.sweep_measure,
            'criterion': self.criterion,
            'w': self.w.tolist(),
        }


def _criterion_kind(policy=None, criterion=None):
    if criterion is None and policy is not None:
        criterion = policy.meta.get('criterion')
    if criterion is None:
        return CriterionKind.TERM_BY_TERM
    return CriterionKind(criterion)


def _pairwise_gaps(objects):
    '''Mean absolute difference for every unordered pair, nan entries skipped
    '''
    gaps = []
    for first, second in itertools.combinations(objects, 2):
        gaps.append(float(np.nanmean(np.abs(first - second))))
    return gaps


def measure_from_quantities(quantities, criterion):
    '''Max over group pairs of the mean gap of the criterion's metric object
    '''
    rule = CriterionFactory.get_criterion(criterion)
    gaps = _pairwise_gaps([rule.measure_object(q) for q in quantities])
    return max(gaps) if gaps else 0.0


def _report(w, fdr, d, accuracy, brier, trivial, criterion, observed=None):
    '''observed: groups entering the pairwise measures, all when None
    '''
    if observed is None:
        observed = range(w.shape[0])
    quantities = [GroupQuantities(w[a], fdr[a], d[a]) for a in observed]
    tdr = np.diagonal(w, axis1=1, axis2=2)
    gaps = _pairwise_gaps([w[a] for a in observed])
    return EvaluationReport(
        accuracy=float(accuracy),
        mean_tdr=float(np.mean([np.nanmean(tdr[a]) for a in observed])),
        fdr=fdr,
        disparity=float(np.mean(gaps)) if gaps else 0.0,
        brier=float(brier),
        youden_j=tdr - fdr,
        trivial=bool(trivial),
        sweep_measure=measure_from_quantities(quantities, criterion),
        w=w,
        criterion=criterion.value,
    )


def group_quantities(policy, em):
    w = analytic_confusions(policy, em)
    fdr = false_detection_rates(policy, em)
    d = class_marginals(policy, em)
    return [GroupQuantities(w[a], fdr[a], d[a]) for a in range(len(w))]


def analytic_brier(policy, em):
    '''Expected Brier score of the adjusted columns under the model
    '''
    p = policy.p
    # mass[a][j][k] = Pr(A=a, Y=j) Pr(Y_hat=k | Y=j, A=a)
    mass = em.p_ya[:, :, np.newaxis] * np.transpose(em.z, (0, 2, 1))
    squares = (p ** 2).sum(axis=1)[:, np.newaxis, :]
    scores = squares - 2.0 * p + 1.0
    return float((mass * scores).sum())


def evaluate_analytic(policy, em, criterion=None):
    '''In-sample report computed from W^a = P^a z[a] and the model
    '''
    criterion = _criterion_kind(policy, criterion)
    w = analytic_confusions(policy, em)
    fdr = false_detection_rates(policy, em)
    d = class_marginals(policy, em)
    accuracy = np.sum(em.p_ya * np.diagonal(w, axis1=1, axis2=2))
    trivial = (w < TRIVIAL_TOL).all(axis=2).any()
    return _report(
        w, fdr, d, accuracy, analytic_brier(policy, em), trivial, criterion
    )


def report_from_predictions(y, y_pred, a, num_classes, num_groups,
                            brier=float('nan'), criterion=None):
    '''Report from empirical counts of (prediction, truth, group)

    Columns of W^a for classes absent from a group are nan; groups absent
    altogether are left out of the pairwise measures.
    '''
    criterion = _criterion_kind(criterion=criterion)
    counts = np.zeros((num_groups, num_classes, num_classes))
    np.add.at(counts, (np.asarray(a), np.asarray(y_pred), np.asarray(y)), 1)
    # counts[a][i][j]: predicted i, true j
    truth = counts.sum(axis=1)
    emitted = counts.sum(axis=2)
    hits = np.diagonal(counts, axis1=1, axis2=2)
    others = truth.sum(axis=1, keepdims=True) - truth
    with np.errstate(invalid='ignore', divide='ignore'):
        w = counts / truth[:, np.newaxis, :]
        fdr = (emitted - hits) / others
        d = emitted / emitted.sum(axis=1, keepdims=True)
    present = emitted.sum(axis=1) > 0
    silent = [
        (a, i) for a in np.flatnonzero(present)
        for i in np.flatnonzero(emitted[a] == 0)
    ]
    if silent:
        logger.warning(
            'Classes never predicted within a group: %s',
            ', '.join('(A={}, class={})'.format(a, i) for a, i in silent),
        )
    accuracy = np.mean(np.asarray(y_pred) == np.asarray(y))
    return _report(w, fdr, d, accuracy, brier, bool(silent), criterion,
                   observed=np.flatnonzero(present))


def row_brier(policy, y, y_hat, a):
    '''Per-row squared distance of p[a][.][y_hat] to the one-hot truth
    '''
    columns = policy.columns(y_hat, a)
    truth = np.eye(policy.num_classes)[np.asarray(y)]
    return ((columns - truth) ** 2).sum(axis=1)


def brier_score(policy, ds):
    y, y_hat, a = policy.align(ds)
    return float(row_brier(policy, y, y_hat, a).mean())


def evaluate_sampled(policy, ds, seed=0, criterion=None):
    '''Out-of-sample report: draw adjusted labels for ds and count
    '''
    criterion = _criterion_kind(policy, criterion)
    y, y_hat, a = policy.align(ds)
    y_adj = policy.predict_many(y_hat, a, seed)
    brier = row_brier(policy, y, y_hat, a).mean()
    return report_from_predictions(
        y, y_adj, a, policy.num_classes, policy.num_groups, brier, criterion
    )


def evaluate_blackbox(ds, criterion=None):
    '''Report of the unadjusted predictions, Brier from one-hot columns
    '''
    brier = 2.0 * np.mean(ds.y != ds.y_hat)
    return report_from_predictions(
        ds.y, ds.y_hat, ds.a, ds.num_classes, ds.num_groups, brier, criterion
    )


def sweep_measure(policy, em, criterion=None):
    criterion = _criterion_kind(policy, criterion)
    return measure_from_quantities(group_quantities(policy, em), criterion)


_CHANGED_FIELDS = ('accuracy', 'mean_tdr', 'disparity', 'brier')


@dataclass(frozen=True, eq=False)
class CrossValResult:
    plan: object
    fold_pre: list
    fold_post: list
    pooled_pre: EvaluationReport
    pooled_post: EvaluationReport

    def changes(self):
        '''Percent change of pooled post against pooled pre, per metric
        '''
        return {
            name: percent_change(
                getattr(self.pooled_pre, name), getattr(self.pooled_post, name)
            )
            for name in _CHANGED_FIELDS
        }

    def to_dict(self):
        return {
            'folds': self.plan.folds,
            'seed': self.plan.seed,
            'fold_sizes': self.plan.fold_sizes().tolist(),
            'fold_pre': [report.to_dict() for report in self.fold_pre],
            'fold_post': [report.to_dict() for report in self.fold_post],
            'pooled_pre': self.pooled_pre.to_dict(),
            'pooled_post': self.pooled_post.to_dict(),
            'percent_change': self.changes(),
        }


def crossval(ds, folds=5, seed=0, obj=None, spec=None, smoothing=0.0,
             tol=1e-9, max_iter=10000):
    '''Fit on each training split, sample predictions for its held-out fold

    Pooled reports use every out-of-fold prediction at once.
    '''
    spec = spec or FairnessSpec()
    criterion = spec.criterion
    plan = make_splits(ds, folds, seed)
    adjuster = FairAdjuster(spec, obj, smoothing, tol, max_iter)
    pooled = np.empty(ds.n, dtype=np.int64)
    pooled_brier = np.empty(ds.n)
    fold_pre, fold_post = [], []
    for fold in range(folds):
        train = ds.subset(plan.train_indices(fold))
        test_indices = plan.test_indices(fold)
        test = ds.subset(test_indices)
        try:
            policy = adjuster.fit(train, meta={'fold': fold, 'seed': seed})
        except EmptyCellError as error:
            raise EmptyCellError(
                error.cells, context='fold {}'.format(fold)
            ) from error
        except SolverError as error:
            raise type(error)('fold {}: {}'.format(fold, error)) from error
        y, y_hat, a = policy.align(test)
        y_adj = policy.predict_many(y_hat, a, derive_seed(seed, 'fold', fold))
        briers = row_brier(policy, y, y_hat, a)
        pooled[test_indices] = y_adj
        pooled_brier[test_indices] = briers
        fold_pre.append(evaluate_blackbox(test, criterion))
        fold_post.append(report_from_predictions(
            y, y_adj, a, ds.num_classes, ds.num_groups, briers.mean(),
            criterion,
        ))
        logger.info(
            'Fold %d/%d finished: accuracy %.4f -> %.4f, disparity '
            '%.4f -> %.4f', fold + 1, folds, fold_pre[-1].accuracy,
            fold_post[-1].accuracy, fold_pre[-1].disparity,
            fold_post[-1].disparity,
        )
    pooled_post = report_from_predictions(
        ds.y, pooled, ds.a, ds.num_classes, ds.num_groups,
        pooled_brier.mean(), criterion,
    )
    return CrossValResult(
        plan, fold_pre, fold_post, evaluate_blackbox(ds, criterion),
        pooled_post,
    )


def unconstrained_objective(em, obj=None):
    '''Optimal loss without fairness rows: best class per (group, column)
    '''
    coef = objective_vector(em, obj).reshape(
        em.num_groups, em.num_classes, em.num_classes
    )
    return float(coef.min(axis=1).sum())


def _sweep_row(epsilon, criterion, status, objective=float('nan'),
               report=None):
    row = {
        'epsilon': epsilon, 'criterion': criterion, 'status': status,
        'objective_value': objective,
    }
    for name in ('brier', 'sweep_measure', 'accuracy', 'mean_tdr',
                 'trivial'):
        row[name] = getattr(report, name) if report else float('nan')
    if report is None:
        row['trivial'] = ''
    return row


def _sweep_point(em, obj, criterion, epsilon, tol, max_iter):
    spec = FairnessSpec(criterion, epsilon)
    solution = None
    try:
        lp = assemble(em, obj, spec)
        solution = solve(lp, tol=tol, max_iter=max_iter)
        policy = from_solution(
            lp, solution, em.class_names, em.group_names
        )
    except FairAdjError as error:
        logger.warning('Sweep point %s eps=%s failed: %s',
                       criterion.value, epsilon, error)
        if solution is None or solution.is_optimal:
            return _sweep_row(epsilon, criterion.value, type(error).__name__)
        return _sweep_row(epsilon, criterion.value, solution.status.value)
    report = evaluate_analytic(policy, em, criterion)
    return _sweep_row(epsilon, criterion.value, solution.status.value,
                      solution.objective, report)


def run_sweep(em, criteria=None, obj=None, steps=100, tol=1e-9,
              max_iter=10000, workers=1):
    '''Fairness-discrimination table: eps = 0, 1/steps, ..., 1 per criterion

    After the steps + 1 rows of a criterion comes the unadjusted predictor's
    point, with an empty epsilon and criterion `blackbox:<criterion>`.
    '''
    obj = obj or ObjectiveSpec()
    criteria = [CriterionKind(c) for c in (criteria or list(CriterionKind))]
    tasks = [
        (criterion, step / steps)
        for criterion in criteria for step in range(steps + 1)
    ]
    points = Parallel(n_jobs=workers)(
        delayed(_sweep_point)(em, obj, criterion, epsilon, tol, max_iter)
        for criterion, epsilon in tasks
    )
    identity = AdjustmentPolicy.identity(em.class_names, em.group_names)
    blackbox_objective = float(
        objective_vector(em, obj) @ identity.p.reshape(-1)
    )
    rows = []
    for position, criterion in enumerate(criteria):
        block = steps + 1
        rows.extend(points[position * block:(position + 1) * block])
        report = evaluate_analytic(identity, em, criterion)
        rows.append(_sweep_row(
            '', 'blackbox:{}'.format(criterion.value), 'Blackbox',
            blackbox_objective, report,
        ))
        logger.info('Sweep for %s finished: %d points', criterion.value,
                    steps + 1)
    return rows


def rows_to_csv(rows, columns):
    buffer = io.StringIO()
    writer = csv.DictWriter(
        buffer, fieldnames=list(columns), lineterminator='\n',
        extrasaction='ignore',
    )
    writer.writeheader()
    for row in rows:
        writer.writerow({
            key: repr(float(value)) if isinstance(value, float) else value
            for key, value in row.items()
        })
    return buffer.getvalue()
