'''Exceptions for fairadj package

Every exception carries the exit code the command line app returns when it
surfaces the error.
'''


class FairAdjError(Exception):
    exit_code = 1


class IngestionError(FairAdjError, ValueError):
    exit_code = 3


class EstimationError(FairAdjError, ValueError):
    exit_code = 4


class EmptyCellError(EstimationError):
    def __init__(self, cells, context=None):
        '''cells: list of (group name, class name) with no observations
        '''
        self.cells = list(cells)
        self.context = context
        listing = ', '.join(
            '(A={}, Y={})'.format(group, label) for group, label in self.cells
        )
        message = 'empty (Y, A) cells: {}'.format(listing)
        if context:
            message = '{}: {}'.format(context, message)
        super().__init__(message)


class SolverError(FairAdjError):
    exit_code = 9


class InfeasibleError(SolverError):
    exit_code = 5


class IterationLimitError(SolverError):
    exit_code = 6


class SpaceMismatchError(FairAdjError, ValueError):
    exit_code = 7


class RankDeficientError(FairAdjError, ValueError):
    exit_code = 8
