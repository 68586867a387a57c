'''Datasets of prediction triples and their fold plans

An AdjustmentDataset holds aligned index sequences for the true label, the
blackbox prediction and the protected group, plus the ordered names those
indices refer to. Ingestion builds the dictionaries from the sorted union of
the true and predicted label values, so the adjusted predictor's sample space
covers both.
'''
import csv
import io
import logging
from dataclasses import dataclass

import numpy as np

from .dataset_reader import PredictionReader
from .exceptions import IngestionError
from .utils import atomic_write_text

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ColumnSchema:
    y: str = 'y'
    y_hat: str = 'y_hat'
    a: str = 'a'


def _frozen_indices(values):
    array = np.array(values, dtype=np.int64).reshape(-1)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class AdjustmentDataset:
    y: np.ndarray
    y_hat: np.ndarray
    a: np.ndarray
    class_names: tuple
    group_names: tuple

    def __post_init__(self):
        object.__setattr__(self, 'y', _frozen_indices(self.y))
        object.__setattr__(self, 'y_hat', _frozen_indices(self.y_hat))
        object.__setattr__(self, 'a', _frozen_indices(self.a))
        object.__setattr__(self, 'class_names', tuple(self.class_names))
        object.__setattr__(self, 'group_names', tuple(self.group_names))
        n = len(self.y)
        if n == 0:
            raise ValueError('dataset must contain at least one row')
        if len(self.y_hat) != n or len(self.a) != n:
            raise ValueError('y, y_hat and a must have equal lengths')
        if len(self.class_names) < 2:
            raise ValueError('at least two classes are required')
        if len(self.group_names) < 1:
            raise ValueError('at least one protected group is required')
        if len(set(self.class_names)) != len(self.class_names):
            raise ValueError('class names must be distinct')
        if len(set(self.group_names)) != len(self.group_names):
            raise ValueError('group names must be distinct')
        for name, values, bound in (
                ('y', self.y, self.num_classes),
                ('y_hat', self.y_hat, self.num_classes),
                ('a', self.a, self.num_groups)):
            if values.min() < 0 or values.max() >= bound:
                raise ValueError('{} index out of range'.format(name))

    @property
    def n(self):
        return len(self.y)

    @property
    def num_classes(self):
        return len(self.class_names)

    @property
    def num_groups(self):
        return len(self.group_names)

    def __len__(self):
        return self.n

    def __repr__(self):
        return 'AdjustmentDataset[N={},C={},G={}]'.format(
            self.n, self.num_classes, self.num_groups
        )

    def subset(self, indices):
        '''Rows at indices, keeping the label dictionaries
        '''
        indices = np.asarray(indices, dtype=np.int64)
        return AdjustmentDataset(
            self.y[indices], self.y_hat[indices], self.a[indices],
            self.class_names, self.group_names,
        )

    def counts(self):
        '''Count tensor n[a][j][k] of (A=a, Y=j, Y_hat=k)
        '''
        counts = np.zeros(
            (self.num_groups, self.num_classes, self.num_classes),
            dtype=np.int64,
        )
        np.add.at(counts, (self.a, self.y, self.y_hat), 1)
        return counts

    @classmethod
    def from_counts(cls, counts, class_names=None, group_names=None):
        '''Build a dataset holding exactly counts[a][j][k] rows of (a, j, k)

        Rows come out grouped by (a, j, k) in index order.
        '''
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim != 3 or counts.shape[1] != counts.shape[2]:
            raise ValueError('counts must have shape (G, C, C)')
        if (counts < 0).any():
            raise ValueError('counts must be nonnegative')
        groups, classes, _ = counts.shape
        a_idx, y_idx, k_idx = np.indices(counts.shape)
        flat = counts.reshape(-1)
        a = np.repeat(a_idx.reshape(-1), flat)
        y = np.repeat(y_idx.reshape(-1), flat)
        y_hat = np.repeat(k_idx.reshape(-1), flat)
        if class_names is None:
            class_names = ['c{}'.format(j) for j in range(classes)]
        if group_names is None:
            group_names = ['g{}'.format(g) for g in range(groups)]
        return cls(y, y_hat, a, class_names, group_names)


@dataclass(frozen=True, eq=False)
class SplitPlan:
    folds: int
    seed: int
    assignments: np.ndarray

    def __post_init__(self):
        assignments = np.array(self.assignments, dtype=np.int64)
        assignments.setflags(write=False)
        object.__setattr__(self, 'assignments', assignments)

    def fold_sizes(self):
        return np.bincount(self.assignments, minlength=self.folds)

    def test_indices(self, fold):
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.assignments != fold)


def load_dataset(path, schema=None):
    '''Load prediction triples from a CSV file

    Label dictionaries are the sorted distinct values: classes from the union
    of the true and predicted columns, groups from the group column.
    '''
    schema = schema or ColumnSchema()
    columns = PredictionReader(path).read_rows(
        [schema.y, schema.y_hat, schema.a]
    )
    y_values = columns[schema.y]
    yhat_values = columns[schema.y_hat]
    a_values = columns[schema.a]
    class_names = sorted(set(y_values) | set(yhat_values))
    group_names = sorted(set(a_values))
    if len(group_names) < 2:
        raise IngestionError(
            'single protected group in {}: {}'.format(path, group_names[0])
        )
    if len(class_names) < 2:
        raise IngestionError(
            'single class in {}: {}'.format(path, class_names[0])
        )
    class_index = {name: i for i, name in enumerate(class_names)}
    group_index = {name: i for i, name in enumerate(group_names)}
    ds = AdjustmentDataset(
        [class_index[v] for v in y_values],
        [class_index[v] for v in yhat_values],
        [group_index[v] for v in a_values],
        class_names,
        group_names,
    )
    logger.info('Loaded %s from %s', ds, path)
    return ds


def dataset_to_csv(ds, schema=None, extra=None):
    '''Render a dataset (and optional extra columns) as CSV text

    extra: list of (column name, sequence of string values, one per row)
    '''
    schema = schema or ColumnSchema()
    extra = extra or []
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow([schema.y, schema.y_hat, schema.a] + [
        name for name, _ in extra
    ])
    classes = ds.class_names
    groups = ds.group_names
    for row in range(ds.n):
        writer.writerow([
            classes[ds.y[row]], classes[ds.y_hat[row]], groups[ds.a[row]],
        ] + [values[row] for _, values in extra])
    return buffer.getvalue()


def write_dataset(ds, path, schema=None):
    atomic_write_text(path, dataset_to_csv(ds, schema))


def make_splits(ds, folds=5, seed=0):
    '''Assign every row to one of `folds` folds

    Rows of (y, a) cells with at least `folds` members are laid out first,
    cell by cell in shuffled order, then the rows of smaller cells in one
    shuffled block; fold = position modulo folds. Fold sizes therefore
    differ by at most one and every large cell is spread evenly.
    '''
    if folds < 2:
        raise IngestionError('folds must be at least 2, got {}'.format(folds))
    if folds > ds.n:
        raise IngestionError(
            'folds ({}) exceeds number of rows ({})'.format(folds, ds.n)
        )
    rng = np.random.default_rng(seed)
    cell = ds.a * ds.num_classes + ds.y
    order = []
    leftovers = []
    for cell_id in range(ds.num_groups * ds.num_classes):
        members = np.flatnonzero(cell == cell_id)
        if len(members) >= folds:
            order.append(rng.permutation(members))
        else:
            leftovers.append(members)
    if leftovers:
        order.append(rng.permutation(np.concatenate(leftovers)))
    order = np.concatenate(order)
    assignments = np.empty(ds.n, dtype=np.int64)
    assignments[order] = np.arange(ds.n) % folds
    return SplitPlan(folds=folds, seed=seed, assignments=assignments)
