'''Represent the expected losses minimized by the linear program

Every loss is reduced to mismatch weights m[a][i][j] = Pr(A=a, Y=j) l(i, j, a)
with a zero diagonal, so the expected loss of a policy is
sum over a, i, j of W^a_ij m[a][i][j].
'''
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import EstimationError


class ObjectiveKind(Enum):
    UNWEIGHTED = 'unweighted'
    WEIGHTED = 'weighted'
    CUSTOM = 'custom'


@dataclass(frozen=True, eq=False)
class ObjectiveSpec:
    kind: ObjectiveKind = ObjectiveKind.WEIGHTED
    custom_loss: object = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', ObjectiveKind(self.kind))
        if self.kind is ObjectiveKind.CUSTOM:
            if self.custom_loss is None:
                raise ValueError('custom objective requires custom_loss')
            loss = np.array(self.custom_loss, dtype=np.float64)
            if loss.ndim != 3 or loss.shape[1] != loss.shape[2]:
                raise ValueError('custom_loss must have shape (G, C, C)')
            if not np.isfinite(loss).all() or (loss < 0).any():
                raise ValueError('custom_loss entries must be finite and >= 0')
            loss.setflags(write=False)
            object.__setattr__(self, 'custom_loss', loss)
        elif self.custom_loss is not None:
            raise ValueError(
                'custom_loss is only accepted with the custom objective'
            )


_losses = {}


def register_loss(kind):
    '''Register a loss class for an ObjectiveKind. Retrieve via LossFactory
    '''
    def wrapper(cls):
        if kind in _losses:
            raise ValueError('The loss kind {} has been taken'.format(kind))
        _losses[kind] = cls
        return cls
    return wrapper


class LossFactory:
    '''Factory to get the loss matching an ObjectiveSpec
    '''
    @staticmethod
    def get_loss(objective=None):
        if objective is None:
            objective = ObjectiveSpec()
        cls = _losses[objective.kind]
        if objective.kind is ObjectiveKind.CUSTOM:
            return cls(objective.custom_loss)
        return cls()


def _off_diagonal(classes):
    return 1.0 - np.eye(classes)


class Loss:
    def mismatch_weights(self, em):
        raise NotImplementedError('To be implemented')


@register_loss(ObjectiveKind.UNWEIGHTED)
class UnweightedLoss(Loss):
    def mismatch_weights(self, em):
        '''Zero-one loss: weights are the joint probabilities Pr(A=a, Y=j)
        '''
        off = _off_diagonal(em.num_classes)
        return em.p_ya[:, np.newaxis, :] * off[np.newaxis, :, :]


@register_loss(ObjectiveKind.WEIGHTED)
class WeightedLoss(Loss):
    def mismatch_weights(self, em):
        '''l = 1 / Pr(Y=j, A=a): every (group, class) cell weighs the same
        '''
        empty = np.argwhere(em.p_ya <= 0)
        if len(empty):
            cells = ', '.join(
                '(A={}, Y={})'.format(
                    em.group_names[a] if em.group_names else a,
                    em.class_names[j] if em.class_names else j,
                )
                for a, j in empty
            )
            raise EstimationError(
                'weighted objective undefined for zero joint cells: {}'.format(
                    cells
                )
            )
        off = _off_diagonal(em.num_classes)
        return np.broadcast_to(
            off, (em.num_groups, em.num_classes, em.num_classes)
        ).copy()


@register_loss(ObjectiveKind.CUSTOM)
class CustomLoss(Loss):
    def __init__(self, loss):
        self.loss = np.array(loss, dtype=np.float64)

    def mismatch_weights(self, em):
        '''loss[a][i][j] = l(i, j, a); the diagonal is ignored
        '''
        shape = (em.num_groups, em.num_classes, em.num_classes)
        if self.loss.shape != shape:
            raise ValueError('custom_loss must have shape {}, got {}'.format(
                shape, self.loss.shape
            ))
        off = _off_diagonal(em.num_classes)
        return self.loss * off[np.newaxis, :, :] * em.p_ya[:, np.newaxis, :]
