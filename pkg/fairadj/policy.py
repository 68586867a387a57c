'''The adjusted predictor: a randomized function of (Y_hat, A)

p[a][i][k] = Pr(Y_adj=i | Y_hat=k, A=a). The fairness guarantee only holds
when adjusted labels are sampled from these columns; taking the most likely
entry instead can give back the blackbox predictions unchanged.

Sampling is inverse-CDF over the column in class order. Uniform draws come
from numpy's Philox counter-based generator keyed by the seed; row r uses
the (r mod 4)-th double of the block that follows counter value r // 4, so
any slice of rows can be reproduced on its own.
'''
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    InfeasibleError, IngestionError, IterationLimitError, SolverError,
    SpaceMismatchError,
)
from .lp_solver import SolveStatus
from .utils import atomic_write_text

logger = logging.getLogger(__name__)

POLICY_FORMAT_VERSION = 1
ORIENTATION = 'p[a][i][k] = Pr(Y_adj=i | Y_hat=k, A=a)'
COLUMN_TOL = 1e-8
_DRAWS_PER_BLOCK = 4


def row_uniforms(seed, start, count):
    '''Uniform draws for rows start .. start + count - 1 of a seed's stream
    '''
    block, skip = divmod(int(start), _DRAWS_PER_BLOCK)
    generator = row_generator(seed, block * _DRAWS_PER_BLOCK)
    if skip:
        generator.random(skip)
    return generator.random(int(count))


def row_generator(seed, start=0):
    '''Generator positioned at a row that is a multiple of four
    '''
    if start % _DRAWS_PER_BLOCK:
        raise ValueError('start must be a multiple of {}'.format(
            _DRAWS_PER_BLOCK
        ))
    return np.random.Generator(np.random.Philox(
        key=int(seed), counter=int(start) // _DRAWS_PER_BLOCK
    ))


def _normalized(p, tol):
    p = np.array(p, dtype=np.float64)
    if p.ndim != 3 or p.shape[1] != p.shape[2]:
        raise ValueError('policy matrices must have shape (G, C, C)')
    if not np.isfinite(p).all():
        raise ValueError('policy entries must be finite')
    if (p < -tol).any() or (p > 1 + tol).any():
        raise ValueError('policy entries outside [0, 1]')
    p = np.clip(p, 0.0, 1.0)
    sums = p.sum(axis=1, keepdims=True)
    if (np.abs(sums - 1.0) > tol).any():
        raise ValueError('policy columns must sum to one')
    p = p / sums
    p.setflags(write=False)
    return p


@dataclass(frozen=True, eq=False)
class AdjustmentPolicy:
    p: np.ndarray
    class_names: tuple
    group_names: tuple
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'p', _normalized(self.p, COLUMN_TOL))
        object.__setattr__(self, 'class_names', tuple(self.class_names))
        object.__setattr__(self, 'group_names', tuple(self.group_names))
        object.__setattr__(self, 'meta', dict(self.meta))
        if self.p.shape[:2] != (len(self.group_names), len(self.class_names)):
            raise ValueError('policy shape does not match label dictionaries')

    @property
    def num_groups(self):
        return self.p.shape[0]

    @property
    def num_classes(self):
        return self.p.shape[1]

    @property
    def num_terms(self):
        return self.p.size

    @classmethod
    def identity(cls, class_names, group_names, meta=None):
        p = np.tile(np.eye(len(class_names)), (len(group_names), 1, 1))
        return cls(p, class_names, group_names, meta or {'kind': 'identity'})

    @classmethod
    def uniform(cls, class_names, group_names, meta=None):
        classes = len(class_names)
        p = np.full((len(group_names), classes, classes), 1.0 / classes)
        return cls(p, class_names, group_names, meta or {'kind': 'uniform'})

    def argmax_policy(self):
        '''Deterministic policy emitting the most likely class of each column

        Ties go to the lowest class index.
        '''
        p = np.zeros_like(self.p)
        best = np.argmax(self.p, axis=1)
        groups, classes = best.shape
        for a in range(groups):
            p[a, best[a], np.arange(classes)] = 1.0
        meta = dict(self.meta, kind='argmax')
        return AdjustmentPolicy(p, self.class_names, self.group_names, meta)

    def _check_indices(self, y_hat, a):
        if np.any((y_hat < 0) | (y_hat >= self.num_classes)):
            raise SpaceMismatchError('predicted class index out of range')
        if np.any((a < 0) | (a >= self.num_groups)):
            raise SpaceMismatchError('group index out of range')

    def predict(self, y_hat, a, rng):
        '''Draw one adjusted label for (y_hat, a) from generator rng
        '''
        self._check_indices(np.asarray(y_hat), np.asarray(a))
        cumulative = np.cumsum(self.p[a, :, y_hat])
        index = int(np.searchsorted(cumulative, rng.random(), side='right'))
        return min(index, self.num_classes - 1)

    def predict_many(self, y_hat, a, seed, start=0):
        '''Adjusted labels for aligned index arrays, rows numbered from start
        '''
        y_hat = np.asarray(y_hat, dtype=np.int64)
        a = np.asarray(a, dtype=np.int64)
        self._check_indices(y_hat, a)
        if len(y_hat) == 0:
            return np.zeros(0, dtype=np.int64)
        uniforms = row_uniforms(seed, start, len(y_hat))
        cumulative = np.cumsum(self.p[a, :, y_hat], axis=1)
        drawn = (uniforms[:, np.newaxis] >= cumulative).sum(axis=1)
        return np.minimum(drawn, self.num_classes - 1)

    def columns(self, y_hat, a):
        '''Adjusted distribution p[a][.][y_hat] for every row, shape (N, C)
        '''
        return self.p[np.asarray(a), :, np.asarray(y_hat)]

    def align(self, ds):
        '''Map a dataset's indices onto this policy's label dictionaries
        '''
        class_index = {name: i for i, name in enumerate(self.class_names)}
        group_index = {name: i for i, name in enumerate(self.group_names)}
        unknown_classes = [
            name for name in ds.class_names if name not in class_index
        ]
        unknown_groups = [
            name for name in ds.group_names if name not in group_index
        ]
        if unknown_groups:
            raise SpaceMismatchError(
                'groups unseen by the policy: {}'.format(
                    ', '.join(unknown_groups)
                )
            )
        if unknown_classes:
            raise SpaceMismatchError(
                'classes unknown to the policy: {}'.format(
                    ', '.join(unknown_classes)
                )
            )
        class_map = np.array([class_index[name] for name in ds.class_names])
        group_map = np.array([group_index[name] for name in ds.group_names])
        return class_map[ds.y], class_map[ds.y_hat], group_map[ds.a]

    def analytic_confusions(self, em):
        return analytic_confusions(self, em)

    def to_dict(self):
        return {
            'version': POLICY_FORMAT_VERSION,
            'orientation': ORIENTATION,
            'class_names': list(self.class_names),
            'group_names': list(self.group_names),
            'matrices': self.p.tolist(),
            'meta': self.meta,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path):
        atomic_write_text(path, self.to_json() + '\n')

    @classmethod
    def from_dict(cls, data):
        version = data.get('version')
        if version != POLICY_FORMAT_VERSION:
            raise ValueError('Unsupported policy version: {}'.format(version))
        return cls(
            data['matrices'], data['class_names'], data['group_names'],
            data.get('meta', {}),
        )

    @classmethod
    def load(cls, path):
        try:
            with open(path, 'r', encoding='utf-8') as ifile:
                return cls.from_dict(json.load(ifile))
        except OSError as error:
            raise IngestionError(
                'Invalid policy file {}: {}'.format(path, error)
            ) from error
        except (KeyError, ValueError) as error:
            raise IngestionError(
                'Malformed policy file {}: {}'.format(path, error)
            ) from error


def from_solution(lp, sol, class_names=None, group_names=None, meta=None):
    '''Build the policy from an optimal LP solution
    '''
    if sol.status is SolveStatus.INFEASIBLE:
        raise InfeasibleError('fairness program is infeasible')
    if sol.status is SolveStatus.ITERATION_LIMIT:
        raise IterationLimitError(
            'solver stopped at the iteration limit after {} pivots'.format(
                sol.iterations
            )
        )
    if sol.status is not SolveStatus.OPTIMAL:
        raise SolverError('solver finished with status {}'.format(
            sol.status.value
        ))
    index = lp.var_index
    p = index.unflatten(sol.x)
    if class_names is None:
        class_names = ['c{}'.format(j) for j in range(index.classes)]
    if group_names is None:
        group_names = ['g{}'.format(a) for a in range(index.groups)]
    info = {
        'solver_status': sol.status.value,
        'objective_value': sol.objective,
        'iterations': sol.iterations,
    }
    if lp.fairness is not None:
        info['criterion'] = lp.fairness.criterion.value
        info['epsilon'] = lp.fairness.epsilon
        info['pairing'] = lp.fairness.pairing.value
    if lp.objective is not None:
        info['objective'] = lp.objective.kind.value
    info.update(meta or {})
    drift = float(np.abs(p.sum(axis=1) - 1.0).max())
    logger.debug('Policy columns renormalized, max drift %.3g', drift)
    try:
        return AdjustmentPolicy(p, class_names, group_names, info)
    except ValueError as error:
        raise SolverError(
            'optimal solution is not a valid policy: {}'.format(error)
        ) from error


def analytic_confusions(policy, em):
    '''W^a = P^a z[a] for every group
    '''
    if policy.p.shape != em.z.shape:
        raise ValueError('policy and model shapes differ')
    return np.einsum('aik,akj->aij', policy.p, em.z)


def false_detection_rates(policy, em):
    '''FDR^a = diag(P^a v[a]), shape (G, C)
    '''
    return np.einsum('aik,aki->ai', policy.p, em.v)


def class_marginals(policy, em):
    '''D^a = P^a Pr(Y_hat | A=a), shape (G, C)
    '''
    return np.einsum('aik,ak->ai', policy.p, em.p_yhat_given_a)
