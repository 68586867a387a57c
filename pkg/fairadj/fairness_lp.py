'''Assemble the linear program over the adjustment probabilities

The decision variables are the entries of the G matrices
P^a[i][k] = Pr(Y_adj=i | Y_hat=k, A=a), flattened as a * C * C + i * C + k.
The program minimizes an expected loss subject to

* column stochasticity: sum over i of P^a[i][k] = 1 for every (a, k)
* fairness: for every constrained group pair (a, a') and every scalar f of
  the chosen criterion, f(P^a) - f(P^a') = 0, or |f(P^a) - f(P^a')| <= eps
  when the criterion is relaxed
* bounds: 0 <= P^a[i][k] <= 1

`AssembledLP` holds plain dense arrays, so any LP solver can consume it; the
text produced by `dump_lp` can be fed to external solvers as well.
'''
import io
import itertools
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .criteria import CriterionFactory, CriterionKind
from .objectives import LossFactory, ObjectiveSpec

logger = logging.getLogger(__name__)


class Pairing(Enum):
    ALL_PAIRS = 'all-pairs'
    STAR = 'star'


@dataclass(frozen=True)
class FairnessSpec:
    criterion: CriterionKind = CriterionKind.TERM_BY_TERM
    epsilon: float = 0.0
    pairing: Pairing = None

    def __post_init__(self):
        object.__setattr__(self, 'criterion', CriterionKind(self.criterion))
        epsilon = float(self.epsilon)
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError('epsilon must be in [0, 1], got {}'.format(
                self.epsilon
            ))
        object.__setattr__(self, 'epsilon', epsilon)
        if self.pairing is None:
            # star is enough for exact equality (transitivity); a relaxed
            # bound must hold for every pair
            pairing = Pairing.STAR if epsilon == 0 else Pairing.ALL_PAIRS
        else:
            pairing = Pairing(self.pairing)
        object.__setattr__(self, 'pairing', pairing)

    def group_pairs(self, groups):
        if self.pairing is Pairing.STAR:
            return [(0, a) for a in range(1, groups)]
        return list(itertools.combinations(range(groups), 2))


class VariableIndex:
    def __init__(self, groups, classes):
        '''Bijection between (a, i, k) and the flat variable index
        '''
        self.groups = groups
        self.classes = classes

    def __len__(self):
        return self.groups * self.classes * self.classes

    def to_flat(self, a, i, k):
        if not (0 <= a < self.groups and 0 <= i < self.classes and
                0 <= k < self.classes):
            raise IndexError('variable ({}, {}, {}) out of range'.format(
                a, i, k
            ))
        return (a * self.classes + i) * self.classes + k

    def from_flat(self, index):
        if not 0 <= index < len(self):
            raise IndexError('variable index {} out of range'.format(index))
        rest, k = divmod(index, self.classes)
        a, i = divmod(rest, self.classes)
        return a, i, k

    def group_slice(self, a):
        size = self.classes * self.classes
        return slice(a * size, (a + 1) * size)

    def unflatten(self, x):
        return np.asarray(x, dtype=np.float64).reshape(
            self.groups, self.classes, self.classes
        )


@dataclass(eq=False)
class AssembledLP:
    c: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    var_index: VariableIndex
    bounds: np.ndarray
    eq_tags: list = field(default_factory=list)
    ub_tags: list = field(default_factory=list)
    fairness: FairnessSpec = None
    objective: ObjectiveSpec = None

    @property
    def num_variables(self):
        return len(self.c)

    def objective_value(self, x):
        return float(self.c @ np.asarray(x, dtype=np.float64))

    def eq_residual(self, x):
        if not len(self.b_eq):
            return 0.0
        return float(np.max(np.abs(self.a_eq @ x - self.b_eq)))

    def ub_violation(self, x):
        if not len(self.b_ub):
            return 0.0
        return float(max(0.0, np.max(self.a_ub @ x - self.b_ub)))

    def bound_violation(self, x):
        x = np.asarray(x, dtype=np.float64)
        below = np.max(self.bounds[:, 0] - x)
        above = np.max(x - self.bounds[:, 1])
        return float(max(0.0, below, above))

    def is_feasible(self, x, tol=1e-10):
        return (self.eq_residual(x) <= tol and self.ub_violation(x) <= tol and
                self.bound_violation(x) <= tol)


def objective_vector(em, obj=None):
    '''Coefficient of P^a[i][k] is sum over j != i of
    z[a][k][j] Pr(A=a, Y=j) l(i, j, a)
    '''
    weights = LossFactory.get_loss(obj).mismatch_weights(em)
    # coef[a][i][k] = sum_j weights[a][i][j] z[a][k][j]
    coef = np.einsum('aij,akj->aik', weights, em.z)
    return coef.reshape(-1)


def fairness_rows(em, spec):
    '''One linear functional per constrained scalar and group pair

    Returns a list of (coefficient vector over all variables, tag) where
    tag = (a, a', label) and the functional is f(P^a) - f(P^a').
    '''
    criterion = CriterionFactory.get_criterion(spec.criterion)
    index = VariableIndex(em.num_groups, em.num_classes)
    per_group = [criterion.functionals(em, a) for a in range(em.num_groups)]
    rows = []
    for a, other in spec.group_pairs(em.num_groups):
        labels, left = per_group[a]
        _, right = per_group[other]
        for q, label in enumerate(labels):
            row = np.zeros(len(index))
            row[index.group_slice(a)] = left[q]
            row[index.group_slice(other)] -= right[q]
            rows.append((row, (a, other, label)))
    return rows


def _stochasticity_rows(index):
    rows = []
    tags = []
    for a in range(index.groups):
        for k in range(index.classes):
            row = np.zeros(len(index))
            for i in range(index.classes):
                row[index.to_flat(a, i, k)] = 1.0
            rows.append(row)
            tags.append(('sum', a, k))
    return rows, tags


def assemble(em, obj=None, spec=None):
    '''Combine objective, stochasticity, fairness rows and bounds
    '''
    obj = obj or ObjectiveSpec()
    spec = spec or FairnessSpec()
    index = VariableIndex(em.num_groups, em.num_classes)
    c = objective_vector(em, obj)
    eq_rows, eq_tags = _stochasticity_rows(index)
    eq_rhs = [1.0] * len(eq_rows)
    ub_rows, ub_tags, ub_rhs = [], [], []
    for row, tag in fairness_rows(em, spec):
        if spec.epsilon == 0:
            eq_rows.append(row)
            eq_rhs.append(0.0)
            eq_tags.append(tag)
        else:
            ub_rows.append(row)
            ub_rhs.append(spec.epsilon)
            ub_tags.append(tag + ('<=',))
            ub_rows.append(-row)
            ub_rhs.append(spec.epsilon)
            ub_tags.append(tag + ('>=',))
    n = len(index)
    lp = AssembledLP(
        c=c,
        a_eq=np.array(eq_rows).reshape(-1, n),
        b_eq=np.array(eq_rhs, dtype=np.float64),
        a_ub=np.array(ub_rows).reshape(-1, n),
        b_ub=np.array(ub_rhs, dtype=np.float64),
        var_index=index,
        bounds=np.tile([0.0, 1.0], (n, 1)),
        eq_tags=eq_tags,
        ub_tags=ub_tags,
        fairness=spec,
        objective=obj,
    )
    logger.info(
        'Assembled LP (%s, %s, eps=%s): %d variables, %d eq rows, %d ub rows',
        spec.criterion.value, obj.kind.value, spec.epsilon, n,
        len(lp.b_eq), len(lp.b_ub),
    )
    return lp


def _format_row(values):
    return ' '.join(repr(float(value)) for value in values)


def dump_lp(lp, stream=None):
    '''Write the LP as text: sense, objective row, eq rows, ub rows

    Bounds are [0, 1] for every variable and are stated in a comment.
    Returns the text when no stream is given.
    '''
    own = stream is None
    stream = stream or io.StringIO()
    stream.write('# variables {} bounds 0 1\n'.format(lp.num_variables))
    stream.write('min\n')
    stream.write(_format_row(lp.c) + '\n')
    for row, rhs in zip(lp.a_eq, lp.b_eq):
        stream.write('{} = {}\n'.format(_format_row(row), repr(float(rhs))))
    for row, rhs in zip(lp.a_ub, lp.b_ub):
        stream.write('{} <= {}\n'.format(_format_row(row), repr(float(rhs))))
    stream.write('end\n')
    if own:
        return stream.getvalue()
    return None
