'''A simple wrapper connecting estimation, the linear program and the policy
'''
import logging

from .estimation import fit_empirical
from .fairness_lp import FairnessSpec, assemble
from .lp_solver import solve
from .objectives import ObjectiveSpec
from .policy import from_solution

logger = logging.getLogger(__name__)


class FairAdjuster:
    def __init__(
            self,
            spec=None,
            objective=None,
            smoothing=0.0,
            tol=1e-9,
            max_iter=10000,
            solver=None):
        '''Glue logic needed to turn prediction triples into a fair policy

        spec: FairnessSpec, default term-by-term equalized odds, eps 0
        objective: ObjectiveSpec, default weighted loss
        smoothing: additive smoothing for the empirical estimates
        solver: default the package simplex, customize if needed
        '''
        self.spec = spec or FairnessSpec()
        self.objective = objective or ObjectiveSpec()
        self.smoothing = smoothing
        self.tol = tol
        self.max_iter = max_iter
        self.solver = solver or solve
        self.em = None
        self.lp = None
        self.solution = None

    def fit(self, ds, meta=None):
        '''Estimate, solve and wrap the solution for one dataset
        '''
        em = fit_empirical(ds, self.smoothing)
        info = {'n_train': ds.n, 'smoothing': self.smoothing}
        info.update(meta or {})
        return self.fit_model(em, info)

    def fit_model(self, em, meta=None):
        '''Solve for an already estimated model
        '''
        lp = assemble(em, self.objective, self.spec)
        self.em, self.lp, self.solution = em, lp, None
        solution = self.solver(lp, tol=self.tol, max_iter=self.max_iter)
        self.solution = solution
        logger.info(
            'Solve finished: %s after %d pivots, objective %.6g',
            solution.status.value, solution.iterations, solution.objective,
        )
        return from_solution(
            lp, solution, em.class_names or None, em.group_names or None,
            meta,
        )
