'''Empirical distributions consumed by the linear program

Orientation used throughout the package:

* z[a][k][j] = Pr(Y_hat=k | Y=j, A=a), columns sum to one
* v[a][j][c] = sum over c' != c of z[a][j][c'] Pr(Y=c', A=a) / Pr(Y!=c, A=a)
* p_yhat_given_a[a][k] = Pr(Y_hat=k | A=a)

so that W^a = P^a z[a], FDR^a = diag(P^a v[a]) and D^a = P^a Pr(Y_hat|A=a).
'''
import json
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import EmptyCellError, EstimationError

logger = logging.getLogger(__name__)


def _readonly(array):
    array = np.array(array, dtype=np.float64)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class EmpiricalModel:
    p_a: np.ndarray
    p_ya: np.ndarray
    z: np.ndarray
    v: np.ndarray
    p_yhat_given_a: np.ndarray
    n_cells: np.ndarray
    class_names: tuple = ()
    group_names: tuple = ()
    smoothing: float = 0.0

    def __post_init__(self):
        for name in ('p_a', 'p_ya', 'z', 'v', 'p_yhat_given_a'):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        n_cells = np.array(self.n_cells, dtype=np.int64)
        n_cells.setflags(write=False)
        object.__setattr__(self, 'n_cells', n_cells)
        groups, classes = self.p_ya.shape
        object.__setattr__(self, 'class_names', tuple(
            self.class_names or ('c{}'.format(j) for j in range(classes))
        ))
        object.__setattr__(self, 'group_names', tuple(
            self.group_names or ('g{}'.format(a) for a in range(groups))
        ))
        if self.z.shape != (groups, classes, classes):
            raise ValueError('z must have shape (G, C, C)')
        if self.v.shape != (groups, classes, classes):
            raise ValueError('v must have shape (G, C, C)')

    @property
    def num_groups(self):
        return self.p_ya.shape[0]

    @property
    def num_classes(self):
        return self.p_ya.shape[1]

    def to_json(self):
        '''Debugging dump, group-indexed, row-major nested lists
        '''
        return json.dumps({
            'class_names': list(self.class_names),
            'group_names': list(self.group_names),
            'smoothing': self.smoothing,
            'p_a': self.p_a.tolist(),
            'p_ya': self.p_ya.tolist(),
            'z': self.z.tolist(),
            'v': self.v.tolist(),
            'p_yhat_given_a': self.p_yhat_given_a.tolist(),
            'n_cells': self.n_cells.tolist(),
        }, indent=2)


def build_v(z, p_ya, group_names=None):
    '''Mixture matrices turning FDR into a linear function of P^a

    Column c of v[a] mixes the columns c' != c of z[a] with weights
    Pr(Y=c', A=a) / Pr(Y!=c, A=a).
    '''
    z = np.asarray(z, dtype=np.float64)
    p_ya = np.asarray(p_ya, dtype=np.float64)
    groups, classes = p_ya.shape
    v = np.zeros((groups, classes, classes))
    for a in range(groups):
        # Pr(Y != c, A=a) for every c
        others = p_ya[a].sum() - p_ya[a]
        if (others <= 0).any():
            name = group_names[a] if group_names else a
            raise EstimationError(
                'group {} has a single observed class; '
                'false detection rates are undefined'.format(name)
            )
        weighted = z[a] * p_ya[a][np.newaxis, :]
        v[a] = (weighted.sum(axis=1)[:, np.newaxis] - weighted) / others
    return v


def fit_empirical(ds, smoothing=0.0):
    '''Estimate every distribution the linear program uses from counts

    smoothing: added to every count of a conditional distribution before it
    is normalized. With smoothing 0 an empty (Y=j, A=a) cell is an error.
    '''
    if smoothing < 0:
        raise ValueError('smoothing must be nonnegative')
    groups, classes = ds.num_groups, ds.num_classes
    counts = ds.counts().astype(np.float64)
    n_cells = counts.sum(axis=2).astype(np.int64)
    if smoothing == 0:
        empty = [
            (ds.group_names[a], ds.class_names[j])
            for a in range(groups) for j in range(classes)
            if n_cells[a][j] == 0
        ]
        if empty:
            raise EmptyCellError(empty)
    total = float(ds.n)
    p_ya = n_cells / total
    p_a = n_cells.sum(axis=1) / total
    # counts[a][j][k] -> z[a][k][j]
    smoothed = np.transpose(counts, (0, 2, 1)) + smoothing
    z = smoothed / smoothed.sum(axis=1, keepdims=True)
    yhat_counts = counts.sum(axis=1) + smoothing
    p_yhat_given_a = yhat_counts / yhat_counts.sum(axis=1, keepdims=True)
    v = build_v(z, p_ya, ds.group_names)
    logger.debug(
        'Fitted empirical model for %s with smoothing %s', ds, smoothing
    )
    return EmpiricalModel(
        p_a=p_a,
        p_ya=p_ya,
        z=z,
        v=v,
        p_yhat_given_a=p_yhat_given_a,
        n_cells=n_cells,
        class_names=ds.class_names,
        group_names=ds.group_names,
        smoothing=float(smoothing),
    )
