'''Collection of multiclass fairness criteria

Each criterion says which scalars must agree across protected groups. A
criterion exposes them as linear functionals of one group's adjustment matrix
P^a (flattened row-major, index i * C + k), which is what lets the linear
program enforce them, and names the metric object whose between-group gap
is reported in the fairness-discrimination sweep.

New criteria inherit from Criterion and register with `register_criterion`.
'''
from enum import Enum

import numpy as np


class CriterionKind(Enum):
    TERM_BY_TERM = 'term-by-term'
    CLASSWISE_ODDS = 'classwise'
    EQUAL_OPPORTUNITY = 'opportunity'
    DEMOGRAPHIC_PARITY = 'parity'


_criteria = {}


def register_criterion(kind):
    '''Register a criterion class with a kind. Retrieve via CriterionFactory
    '''
    def wrapper(cls):
        if kind in _criteria:
            raise ValueError(
                'The criterion kind {} has been taken'.format(kind)
            )
        _criteria[kind] = cls
        cls.kind = kind
        return cls
    return wrapper


class CriterionFactory:
    '''Factory for criteria by kind or by command line name
    '''
    @staticmethod
    def get_criterion(kind):
        return _criteria[CriterionKind(kind)]()


class GroupQuantities:
    def __init__(self, w, fdr, d):
        '''Post-adjustment quantities of one group

        w: C x C confusion matrix Pr(Y_adj=i | Y=j)
        fdr: length-C false detection rates
        d: length-C class marginal Pr(Y_adj=i)
        '''
        self.w = np.asarray(w, dtype=np.float64)
        self.fdr = np.asarray(fdr, dtype=np.float64)
        self.d = np.asarray(d, dtype=np.float64)

    @property
    def tdr(self):
        return np.diag(self.w)

    @property
    def youden_j(self):
        return self.tdr - self.fdr


class Criterion:
    kind = None

    def functionals(self, em, a):
        '''Return (labels, F) with F of shape (Q, C * C) for group a
        '''
        raise NotImplementedError('To be implemented')

    def measure_object(self, quantities):
        '''Vector whose mean absolute between-group difference is the gap
        '''
        raise NotImplementedError('To be implemented')

    def values(self, em, a, p_a):
        '''Constrained scalars of group a under the adjustment matrix p_a
        '''
        _, functionals = self.functionals(em, a)
        return functionals @ np.asarray(p_a, dtype=np.float64).reshape(-1)


def _confusion_entry(em, a, i, j):
    classes = em.num_classes
    row = np.zeros(classes * classes)
    # W^a_ij = sum_k P^a_ik z[a][k][j]
    row[i * classes:(i + 1) * classes] = em.z[a][:, j]
    return row


@register_criterion(CriterionKind.TERM_BY_TERM)
class TermByTerm(Criterion):
    def functionals(self, em, a):
        classes = em.num_classes
        labels = []
        rows = []
        for i in range(classes):
            for j in range(classes):
                labels.append('W[{},{}]'.format(i, j))
                rows.append(_confusion_entry(em, a, i, j))
        return labels, np.array(rows)

    def measure_object(self, quantities):
        return quantities.w.reshape(-1)


@register_criterion(CriterionKind.EQUAL_OPPORTUNITY)
class EqualOpportunity(Criterion):
    def functionals(self, em, a):
        classes = em.num_classes
        labels = ['TDR[{}]'.format(i) for i in range(classes)]
        rows = [_confusion_entry(em, a, i, i) for i in range(classes)]
        return labels, np.array(rows)

    def measure_object(self, quantities):
        return quantities.tdr


@register_criterion(CriterionKind.CLASSWISE_ODDS)
class ClasswiseOdds(Criterion):
    def functionals(self, em, a):
        classes = em.num_classes
        labels, diagonal = EqualOpportunity().functionals(em, a)
        rows = list(diagonal)
        for c in range(classes):
            row = np.zeros(classes * classes)
            # FDR^a_c = sum_j P^a_cj v[a][j][c]
            row[c * classes:(c + 1) * classes] = em.v[a][:, c]
            labels.append('FDR[{}]'.format(c))
            rows.append(row)
        return labels, np.array(rows)

    def measure_object(self, quantities):
        return quantities.youden_j


@register_criterion(CriterionKind.DEMOGRAPHIC_PARITY)
class DemographicParity(Criterion):
    def functionals(self, em, a):
        classes = em.num_classes
        labels = []
        rows = []
        for i in range(classes):
            row = np.zeros(classes * classes)
            # D^a_i = sum_k P^a_ik Pr(Y_hat=k | A=a)
            row[i * classes:(i + 1) * classes] = em.p_yhat_given_a[a]
            labels.append('D[{}]'.format(i))
            rows.append(row)
        return labels, np.array(rows)

    def measure_object(self, quantities):
        return quantities.d
