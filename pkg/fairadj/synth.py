'''Synthetic data regimes, the factorial adjustment grid and its regression

A regime fixes the number of protected groups, the class balance (shared by
all groups), the group balance and the predictive bias. The blackbox is a
confusion column per group: true class j is predicted correctly with the
group's TDR and the remaining mass is split evenly over the other classes.
Group 0 is the majority and keeps the base TDR; biased groups lose `delta`.
'''
import csv
import io
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from joblib import Parallel, delayed
from scipy import stats
from scipy.linalg import qr, solve_triangular

from .adjuster import FairAdjuster
from .criteria import CriterionKind
from .data_model import AdjustmentDataset
from .estimation import fit_empirical
from .evaluation import evaluate_analytic
from .exceptions import FairAdjError, RankDeficientError
from .fairness_lp import FairnessSpec
from .objectives import ObjectiveKind, ObjectiveSpec
from .policy import AdjustmentPolicy
from .utils import derive_seed

logger = logging.getLogger(__name__)

NUM_CLASSES = 3
BASE_TDR = 0.80
RANK_TOL = 1e-10


class ClassBalance(Enum):
    BALANCED = 'Balanced'
    ONE_RARE = 'One Rare'
    TWO_RARE = 'Two Rare'

    @property
    def proportions(self):
        return {
            ClassBalance.BALANCED: (1 / 3, 1 / 3, 1 / 3),
            ClassBalance.ONE_RARE: (0.45, 0.45, 0.10),
            ClassBalance.TWO_RARE: (0.80, 0.10, 0.10),
        }[self]


class GroupBalance(Enum):
    NO_MINORITY = 'No Minority'
    ONE_SLIGHT = 'One Slight Minority'
    ONE_STRONG = 'One Strong Minority'
    TWO_SLIGHT = 'Two Slight Minorities'
    TWO_STRONG = 'Two Strong Minorities'

    def proportions(self, groups):
        if groups == 2:
            return {
                GroupBalance.NO_MINORITY: (0.5, 0.5),
                GroupBalance.ONE_SLIGHT: (0.65, 0.35),
                GroupBalance.ONE_STRONG: (0.85, 0.15),
            }[self]
        return {
            GroupBalance.NO_MINORITY: (1 / 3, 1 / 3, 1 / 3),
            GroupBalance.ONE_SLIGHT: (0.40, 0.40, 0.20),
            GroupBalance.ONE_STRONG: (0.45, 0.45, 0.10),
            GroupBalance.TWO_SLIGHT: (0.50, 0.25, 0.25),
            GroupBalance.TWO_STRONG: (0.70, 0.15, 0.15),
        }[self]

    def label(self, groups):
        # with two groups there is only one possible minority
        if groups == 2 and self.value.startswith('One '):
            return self.value[len('One '):]
        return self.value

    @staticmethod
    def levels(groups):
        if groups == 2:
            return [GroupBalance.NO_MINORITY, GroupBalance.ONE_SLIGHT,
                    GroupBalance.ONE_STRONG]
        return list(GroupBalance)


class PredBias(Enum):
    LOW = 'Low'
    MEDIUM = 'Medium'
    HIGH = 'High'
    LOW_ONE = 'Low One'
    LOW_TWO = 'Low Two'
    MEDIUM_ONE = 'Medium One'
    MEDIUM_TWO = 'Medium Two'
    HIGH_ONE = 'High One'
    HIGH_TWO = 'High Two'

    @property
    def delta(self):
        level = self.value.split()[0]
        return {
            'Low': 0.10,
            'Medium': 0.25,
            # minority at chance for three classes
            'High': BASE_TDR - 1 / NUM_CLASSES,
        }[level]

    @property
    def biased_groups(self):
        return 2 if self.value.endswith(' Two') else 1

    @staticmethod
    def levels(groups):
        if groups == 2:
            return [PredBias.LOW, PredBias.MEDIUM, PredBias.HIGH]
        return [PredBias.LOW_ONE, PredBias.LOW_TWO, PredBias.MEDIUM_ONE,
                PredBias.MEDIUM_TWO, PredBias.HIGH_ONE, PredBias.HIGH_TWO]


@dataclass(frozen=True)
class RegimeSpec:
    groups: int
    class_balance: ClassBalance
    group_balance: GroupBalance
    pred_bias: PredBias
    n: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'class_balance',
                           ClassBalance(self.class_balance))
        object.__setattr__(self, 'group_balance',
                           GroupBalance(self.group_balance))
        object.__setattr__(self, 'pred_bias', PredBias(self.pred_bias))
        if self.groups not in (2, 3):
            raise ValueError('groups must be 2 or 3, got {}'.format(
                self.groups
            ))
        if self.group_balance not in GroupBalance.levels(self.groups):
            raise ValueError('{} is not a group balance for {} groups'.format(
                self.group_balance.value, self.groups
            ))
        if self.pred_bias not in PredBias.levels(self.groups):
            raise ValueError('{} is not a bias level for {} groups'.format(
                self.pred_bias.value, self.groups
            ))
        if self.n < 1:
            raise ValueError('n must be positive')

    def group_tdrs(self):
        tdrs = np.full(self.groups, BASE_TDR)
        biased = self.pred_bias.biased_groups
        if biased == 1:
            tdrs[-1] -= self.pred_bias.delta
        else:
            tdrs[1:3] -= self.pred_bias.delta
        return tdrs

    def labels(self):
        return {
            'groups': self.groups,
            'class_balance': self.class_balance.value,
            'group_balance': self.group_balance.label(self.groups),
            'pred_bias': self.pred_bias.value,
        }


def enumerate_regimes(groups=(2, 3), n=1000, base_seed=0):
    '''Every valid regime, seeds derived from base_seed and the regime
    '''
    regimes = []
    for count in groups:
        for class_balance in ClassBalance:
            for group_balance in GroupBalance.levels(count):
                for pred_bias in PredBias.levels(count):
                    seed = derive_seed(
                        base_seed, count, class_balance.value,
                        group_balance.value, pred_bias.value, n,
                    )
                    regimes.append(RegimeSpec(
                        count, class_balance, group_balance, pred_bias, n,
                        seed,
                    ))
    return regimes


def true_confusions(spec):
    '''Generator truth z[a][k][j] = Pr(Y_hat=k | Y=j, A=a)
    '''
    confusions = np.empty((spec.groups, NUM_CLASSES, NUM_CLASSES))
    for a, tdr in enumerate(spec.group_tdrs()):
        confusions[a] = (1.0 - tdr) / (NUM_CLASSES - 1)
        np.fill_diagonal(confusions[a], tdr)
    return confusions


def generate(spec):
    rng = np.random.default_rng(spec.seed)
    a = rng.choice(spec.groups, size=spec.n,
                   p=spec.group_balance.proportions(spec.groups))
    y = rng.choice(NUM_CLASSES, size=spec.n,
                   p=spec.class_balance.proportions)
    columns = true_confusions(spec)[a, :, y]
    cumulative = np.cumsum(columns, axis=1)
    y_hat = (rng.random(spec.n)[:, np.newaxis] >= cumulative).sum(axis=1)
    y_hat = np.minimum(y_hat, NUM_CLASSES - 1)
    return AdjustmentDataset(
        y, y_hat, a,
        ['c{}'.format(j) for j in range(NUM_CLASSES)],
        ['g{}'.format(g) for g in range(spec.groups)],
    )


GRID_COLUMNS = (
    'groups', 'class_balance', 'group_balance', 'pred_bias', 'n', 'seed',
    'objective', 'criterion', 'status', 'trivial', 'acc_change',
    'tdr_change', 'error',
)


def _relative_change(old, new):
    if old == 0:
        return float('nan')
    return (new - old) / old


def _run_regime(spec, obj_kinds, criteria, tol, max_iter):
    base = dict(spec.labels(), n=spec.n, seed=spec.seed)
    ds = generate(spec)
    rows = []
    try:
        em = fit_empirical(ds)
    except FairAdjError as error:
        logger.warning('Regime %s: %s', base, error)
        em = None
        failure = error
    if em is not None:
        identity = AdjustmentPolicy.identity(ds.class_names, ds.group_names)
        before = evaluate_analytic(identity, em)
    for kind in obj_kinds:
        for criterion in criteria:
            row = dict(base, objective=kind.value, criterion=criterion.value,
                       status='', trivial='', acc_change=float('nan'),
                       tdr_change=float('nan'), error='')
            rows.append(row)
            if em is None:
                row['status'] = type(failure).__name__
                row['error'] = str(failure)
                continue
            adjuster = FairAdjuster(
                FairnessSpec(criterion), ObjectiveSpec(kind), tol=tol,
                max_iter=max_iter,
            )
            try:
                policy = adjuster.fit_model(em)
            except FairAdjError as error:
                logger.warning('Regime %s, %s/%s failed: %s', base,
                               kind.value, criterion.value, error)
                solution = adjuster.solution
                if solution is not None and not solution.is_optimal:
                    row['status'] = solution.status.value
                else:
                    row['status'] = type(error).__name__
                row['error'] = str(error)
                continue
            after = evaluate_analytic(policy, em, criterion)
            row['status'] = adjuster.solution.status.value
            row['trivial'] = after.trivial
            row['acc_change'] = _relative_change(
                before.accuracy, after.accuracy
            )
            row['tdr_change'] = _relative_change(
                before.mean_tdr, after.mean_tdr
            )
    return rows


def run_grid(base_seed=0, obj_kinds=None, criteria=None, groups=(2, 3),
             n=1000, workers=1, tol=1e-9, max_iter=10000):
    '''One row per (regime, objective, criterion), regime order fixed

    Solver and estimation failures are recorded in the row.
    '''
    obj_kinds = [ObjectiveKind(kind) for kind in (
        obj_kinds or (ObjectiveKind.UNWEIGHTED, ObjectiveKind.WEIGHTED)
    )]
    criteria = [CriterionKind(c) for c in (criteria or list(CriterionKind))]
    regimes = enumerate_regimes(groups, n, base_seed)
    logger.info('Running %d regimes x %d adjustments', len(regimes),
                len(obj_kinds) * len(criteria))
    batches = Parallel(n_jobs=workers)(
        delayed(_run_regime)(spec, obj_kinds, criteria, tol, max_iter)
        for spec in regimes
    )
    table = [row for batch in batches for row in batch]
    logger.info('Grid finished: %d rows, %d not optimal', len(table),
                sum(1 for row in table if row['status'] != 'Optimal'))
    return table


def table_to_csv(table):
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(GRID_COLUMNS),
                            lineterminator='\n')
    writer.writeheader()
    for row in table:
        writer.writerow({
            key: repr(float(value)) if isinstance(value, float) else value
            for key, value in row.items()
        })
    return buffer.getvalue()


FACTORS = (
    ('Loss', 'objective'),
    ('Goal', 'criterion'),
    ('Group Balance', 'group_balance'),
    ('Class Balance', 'class_balance'),
    ('Pred Bias', 'pred_bias'),
)

LEVEL_NAMES = {
    ObjectiveKind.UNWEIGHTED.value: 'Unweighted',
    ObjectiveKind.WEIGHTED.value: 'Weighted',
    CriterionKind.CLASSWISE_ODDS.value: 'Equalized Odds',
    CriterionKind.DEMOGRAPHIC_PARITY.value: 'Demographic Parity',
    CriterionKind.EQUAL_OPPORTUNITY.value: 'Equal Opportunity',
    CriterionKind.TERM_BY_TERM.value: 'Term-by-Term',
}

REFERENCE_LEVELS = {
    'Loss': ('Unweighted',),
    'Goal': ('Equalized Odds',),
    'Group Balance': ('No Minority',),
    'Class Balance': ('Balanced',),
    'Pred Bias': ('Low One', 'Low'),
}


@dataclass(frozen=True, eq=False)
class RegressionResult:
    terms: list
    coefficients: np.ndarray
    std_errors: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    reference_levels: dict
    r_squared: float
    dof: int
    residuals: np.ndarray = field(repr=False)
    design: np.ndarray = field(repr=False)
    outcome: str = ''

    def coefficient(self, factor, level):
        return float(self.coefficients[self.terms.index((factor, level))])

    def to_dict(self):
        return {
            'outcome': self.outcome,
            'r_squared': self.r_squared,
            'dof': self.dof,
            'reference_levels': self.reference_levels,
            'terms': [
                {'factor': factor, 'level': level, 'coefficient': coef,
                 'ci_low': low, 'ci_high': high}
                for (factor, level), coef, low, high in zip(
                    self.terms, self.coefficients.tolist(),
                    self.ci_low.tolist(), self.ci_high.tolist(),
                )
            ],
        }


def ols(design, target, terms, reference_levels=None, outcome='',
        level=0.95):
    '''Least squares via pivoted QR with t-based confidence intervals
    '''
    design = np.asarray(design, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    rows, params = design.shape
    q, r, pivot = qr(design, mode='economic', pivoting=True)
    diagonal = np.abs(np.diag(r))
    rank = int(np.sum(diagonal > RANK_TOL * max(diagonal.max(), 1.0)))
    if rank < params:
        dropped = [terms[col] for col in pivot[rank:]]
        raise RankDeficientError(
            'design matrix is rank deficient; dependent terms: {}'.format(
                ', '.join(str(term) for term in dropped)
            )
        )
    dof = rows - params
    if dof <= 0:
        raise RankDeficientError(
            'need more rows ({}) than parameters ({})'.format(rows, params)
        )
    coefficients = np.empty(params)
    coefficients[pivot] = solve_triangular(r, q.T @ target)
    residuals = target - design @ coefficients
    rss = float(residuals @ residuals)
    sigma2 = rss / dof
    r_inverse = solve_triangular(r, np.eye(params))
    variances = np.empty(params)
    variances[pivot] = (r_inverse ** 2).sum(axis=1)
    std_errors = np.sqrt(sigma2 * variances)
    critical = stats.t.ppf(0.5 + level / 2.0, dof)
    centered = target - target.mean()
    tss = float(centered @ centered)
    r_squared = 1.0 - rss / tss if tss > 0 else 1.0
    return RegressionResult(
        terms=list(terms),
        coefficients=coefficients,
        std_errors=std_errors,
        ci_low=coefficients - critical * std_errors,
        ci_high=coefficients + critical * std_errors,
        reference_levels=dict(reference_levels or {}),
        r_squared=r_squared,
        dof=dof,
        residuals=residuals,
        design=design,
        outcome=outcome,
    )


def _level(row, column):
    value = row[column]
    return LEVEL_NAMES.get(value, value)


def ols_fit(table, outcome, groups=None):
    '''Regress acc_change or tdr_change on one-hot regime and method levels

    Only Optimal rows (of the given group count, if any) are used. Each
    factor drops its reference level; levels keep first-appearance order.
    '''
    if outcome not in ('acc_change', 'tdr_change'):
        raise ValueError('outcome must be acc_change or tdr_change')
    rows = [
        row for row in table
        if row['status'] == 'Optimal' and
        (groups is None or row['groups'] == groups)
    ]
    if not rows:
        raise RankDeficientError('no optimal rows to fit')
    terms = [('Intercept', '')]
    references = {}
    for factor, column in FACTORS:
        levels = []
        for row in rows:
            level = _level(row, column)
            if level not in levels:
                levels.append(level)
        reference = next(
            (name for name in REFERENCE_LEVELS[factor] if name in levels),
            levels[0],
        )
        references[factor] = reference
        terms.extend((factor, level) for level in levels if level != reference)
    columns = {term: position for position, term in enumerate(terms)}
    design = np.zeros((len(rows), len(terms)))
    design[:, 0] = 1.0
    for index, row in enumerate(rows):
        for factor, column in FACTORS:
            position = columns.get((factor, _level(row, column)))
            if position is not None:
                design[index, position] = 1.0
    target = np.array([float(row[outcome]) for row in rows])
    result = ols(design, target, terms, references, outcome)
    logger.info('OLS on %s: %d rows, %d terms, R^2 %.3f', outcome, len(rows),
                len(terms), result.r_squared)
    return result
