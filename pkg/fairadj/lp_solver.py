'''Dense revised simplex for the small adjustment programs

Solves  min c'x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  lo <= x <= hi.

The problem is brought to standard form (slacks for the inequality rows,
explicit rows for finite upper bounds, rows with a negative right-hand side
flipped) and solved with a two-phase method: phase one minimizes the sum of
artificial variables, artificials still basic at zero are pivoted out or, if
their row is redundant, the row is dropped; phase two minimizes the real
objective from the feasible basis found.

Pricing is Dantzig's rule (most negative reduced cost, lowest index on ties)
until a run of degenerate pivots is seen, after which Bland's rule takes
over for the rest of the phase. The leaving row is always the lowest basic
variable index among ratio ties. Identical inputs therefore give identical
vertices.
'''
import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from .exceptions import SolverError

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-9
FEASIBILITY_TOL = 1e-8
BOUND_TOL = 1e-9
DEGENERATE_RUN = 25


class SolveStatus(Enum):
    OPTIMAL = 'Optimal'
    INFEASIBLE = 'Infeasible'
    UNBOUNDED = 'Unbounded'
    ITERATION_LIMIT = 'IterationLimit'


@dataclass(eq=False)
class LinearProgram:
    '''Minimal program description; AssembledLP has the same attributes
    '''
    c: np.ndarray
    a_eq: np.ndarray = None
    b_eq: np.ndarray = None
    a_ub: np.ndarray = None
    b_ub: np.ndarray = None
    bounds: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64).reshape(-1)
        n = len(self.c)
        for a_name, b_name in (('a_eq', 'b_eq'), ('a_ub', 'b_ub')):
            rows = getattr(self, a_name)
            rhs = getattr(self, b_name)
            if rows is None:
                rows, rhs = np.zeros((0, n)), np.zeros(0)
            setattr(self, a_name,
                    np.asarray(rows, dtype=np.float64).reshape(-1, n))
            setattr(self, b_name,
                    np.asarray(rhs, dtype=np.float64).reshape(-1))
        if self.bounds is None:
            self.bounds = np.tile([0.0, np.inf], (n, 1))
        self.bounds = np.asarray(self.bounds, dtype=np.float64).reshape(n, 2)


@dataclass(eq=False)
class LPSolution:
    x: np.ndarray
    objective: float
    status: SolveStatus
    iterations: int
    dual_objective: float = float('nan')
    dropped_rows: list = field(default_factory=list)

    @property
    def is_optimal(self):
        return self.status is SolveStatus.OPTIMAL


class _StandardForm:
    def __init__(self, lp):
        '''min cost'x, A x = b, x >= 0, b >= 0, with an initial basis hint

        Column layout: shifted structural variables, inequality slacks,
        upper-bound slacks. `slack_of_row[r]` is a column usable as the
        initial basic variable of row r, or -1 when row r needs an
        artificial.
        '''
        c = np.asarray(lp.c, dtype=np.float64)
        n = len(c)
        a_eq = np.asarray(lp.a_eq, dtype=np.float64).reshape(-1, n)
        b_eq = np.asarray(lp.b_eq, dtype=np.float64).reshape(-1)
        a_ub = np.asarray(lp.a_ub, dtype=np.float64).reshape(-1, n)
        b_ub = np.asarray(lp.b_ub, dtype=np.float64).reshape(-1)
        bounds = np.asarray(lp.bounds, dtype=np.float64).reshape(n, 2)
        lower = bounds[:, 0]
        if not np.isfinite(lower).all():
            raise ValueError('variables need finite lower bounds')
        upper = bounds[:, 1]
        if (upper < lower).any():
            raise ValueError('upper bound below lower bound')
        boxed = np.flatnonzero(np.isfinite(upper))
        m_eq, m_ub, m_box = len(b_eq), len(b_ub), len(boxed)
        m = m_eq + m_ub + m_box
        width = n + m_ub + m_box
        A = np.zeros((m, width))
        b = np.zeros(m)
        slack_of_row = np.full(m, -1, dtype=np.int64)
        A[:m_eq, :n] = a_eq
        b[:m_eq] = b_eq - a_eq @ lower
        rows = slice(m_eq, m_eq + m_ub)
        A[rows, :n] = a_ub
        A[rows, n:n + m_ub] = np.eye(m_ub)
        b[rows] = b_ub - a_ub @ lower
        slack_of_row[rows] = np.arange(n, n + m_ub)
        for offset, j in enumerate(boxed):
            r = m_eq + m_ub + offset
            A[r, j] = 1.0
            A[r, n + m_ub + offset] = 1.0
            b[r] = upper[j] - lower[j]
            slack_of_row[r] = n + m_ub + offset
        flipped = b < 0
        A[flipped] *= -1.0
        b[flipped] *= -1.0
        slack_of_row[flipped] = -1
        self.A = A
        self.b = b
        self.cost = np.concatenate([c, np.zeros(m_ub + m_box)])
        self.constant = float(c @ lower)
        self.slack_of_row = slack_of_row
        self.num_structural = n
        self.lower = lower
        self.upper = upper


class _Phase:
    def __init__(self, A, b, cost, basis, tol, budget):
        self.A = A
        self.b = b
        self.cost = cost
        self.basis = list(basis)
        self.tol = tol
        self.budget = budget
        self.iterations = 0
        self.bland = False

    def factor(self):
        with warnings.catch_warnings():
            warnings.simplefilter('error', LinAlgWarning)
            try:
                lu, piv = lu_factor(self.A[:, self.basis], check_finite=False)
            except LinAlgWarning as warning:
                raise SolverError('singular basis: {}'.format(warning))
        if not np.isfinite(np.diagonal(lu)).all():
            raise SolverError('singular basis: non-finite factorization')
        return lu, piv

    def run(self):
        '''Iterate until optimal, unbounded or out of budget
        '''
        degenerate = 0
        while True:
            lu = self.factor()
            x_basic = lu_solve(lu, self.b, check_finite=False)
            duals = lu_solve(
                lu, self.cost[self.basis], trans=1, check_finite=False
            )
            reduced = self.cost - duals @ self.A
            reduced[self.basis] = 0.0
            candidates = np.flatnonzero(reduced < -self.tol)
            if len(candidates) == 0:
                return SolveStatus.OPTIMAL
            if self.iterations >= self.budget:
                return SolveStatus.ITERATION_LIMIT
            if self.bland:
                entering = int(candidates[0])
            else:
                entering = int(candidates[np.argmin(reduced[candidates])])
            direction = lu_solve(lu, self.A[:, entering], check_finite=False)
            positive = np.flatnonzero(direction > PIVOT_TOL)
            if len(positive) == 0:
                return SolveStatus.UNBOUNDED
            ratios = np.maximum(x_basic[positive], 0.0) / direction[positive]
            best = ratios.min()
            ties = positive[ratios <= best + self.tol]
            leaving = int(min(ties, key=lambda r: self.basis[r]))
            self.basis[leaving] = entering
            self.iterations += 1
            if best <= self.tol:
                degenerate += 1
                if degenerate >= DEGENERATE_RUN and not self.bland:
                    logger.debug(
                        'Switching to Bland rule after %d degenerate pivots',
                        degenerate,
                    )
                    self.bland = True
            else:
                degenerate = 0

    def values(self):
        return lu_solve(self.factor(), self.b, check_finite=False)

    def duals(self):
        return lu_solve(
            self.factor(), self.cost[self.basis], trans=1, check_finite=False
        )


def _drive_out_artificials(phase, first_artificial):
    '''Pivot basic artificials out, dropping rows that are redundant

    Returns the indices (in the standard form) of dropped rows. A basis
    position is not a row: the row dropped is the one the artificial was
    created for, which the dependency found always involves.
    '''
    dropped = []
    row_ids = list(range(len(phase.b)))
    position = 0
    while position < len(phase.basis):
        artificial = phase.basis[position]
        if artificial < first_artificial:
            position += 1
            continue
        lu = phase.factor()
        unit = np.zeros(len(phase.basis))
        unit[position] = 1.0
        row = lu_solve(lu, unit, trans=1, check_finite=False) @ phase.A
        row[first_artificial:] = 0.0
        row[phase.basis] = 0.0
        usable = np.flatnonzero(np.abs(row) > 1e-7)
        if len(usable):
            phase.basis[position] = int(usable[np.argmax(np.abs(row[usable]))])
            position += 1
            continue
        redundant = int(np.flatnonzero(phase.A[:, artificial])[0])
        dropped.append(row_ids.pop(redundant))
        phase.A = np.delete(phase.A, redundant, axis=0)
        phase.b = np.delete(phase.b, redundant)
        del phase.basis[position]
    return dropped


def constraint_violation(lp, x):
    '''Largest equality residual, inequality excess and bound excess of x
    '''
    c = np.asarray(lp.c, dtype=np.float64).reshape(-1)
    n = len(c)
    x = np.asarray(x, dtype=np.float64)
    a_eq = np.asarray(lp.a_eq, dtype=np.float64).reshape(-1, n)
    a_ub = np.asarray(lp.a_ub, dtype=np.float64).reshape(-1, n)
    bounds = np.asarray(lp.bounds, dtype=np.float64).reshape(n, 2)
    eq = np.abs(a_eq @ x - np.asarray(lp.b_eq).reshape(-1))
    ub = a_ub @ x - np.asarray(lp.b_ub).reshape(-1)
    with np.errstate(invalid='ignore'):
        box = np.maximum(bounds[:, 0] - x, x - bounds[:, 1])
    return (
        float(eq.max(initial=0.0)),
        float(np.maximum(ub, 0.0).max(initial=0.0)),
        float(np.maximum(box, 0.0).max(initial=0.0)),
    )


def _check_optimal_point(lp, x):
    if not np.isfinite(x).all():
        raise SolverError('solver produced a non-finite point')
    eq, ub, box = constraint_violation(lp, x)
    if eq > FEASIBILITY_TOL or ub > FEASIBILITY_TOL or box > BOUND_TOL:
        raise SolverError(
            'optimal point violates constraints: eq {:.3g}, ub {:.3g}, '
            'bounds {:.3g}'.format(eq, ub, box)
        )


def solve(lp, tol=1e-9, max_iter=10000):
    '''Solve the program to an optimal basic feasible solution

    Solver outcomes are reported through the status. SolverError is raised
    only for numerical breakdown: a singular basis, or an optimal point that
    fails the residual check.
    '''
    if tol <= 0:
        raise ValueError('tol must be positive')
    form = _StandardForm(lp)
    m, width = form.A.shape
    n = form.num_structural
    if m == 0:
        if (form.cost < -tol).any():
            return LPSolution(None, float('-inf'), SolveStatus.UNBOUNDED, 0)
        x = form.lower.copy()
        return LPSolution(x, float(np.asarray(lp.c) @ x),
                          SolveStatus.OPTIMAL, 0, form.constant)

    needs_artificial = np.flatnonzero(form.slack_of_row < 0)
    basis = form.slack_of_row.copy()
    basis[needs_artificial] = width + np.arange(len(needs_artificial))
    A = np.hstack([form.A, np.zeros((m, len(needs_artificial)))])
    A[needs_artificial, width + np.arange(len(needs_artificial))] = 1.0
    iterations = 0
    dropped = []

    if len(needs_artificial):
        phase_cost = np.zeros(A.shape[1])
        phase_cost[width:] = 1.0
        phase = _Phase(A, form.b, phase_cost, basis, tol, max_iter)
        status = phase.run()
        iterations += phase.iterations
        if status is SolveStatus.ITERATION_LIMIT:
            return LPSolution(None, float('nan'), status, iterations)
        infeasibility = float(phase_cost[phase.basis] @ phase.values())
        logger.debug('Phase one finished: infeasibility %.3g after %d pivots',
                     infeasibility, phase.iterations)
        if infeasibility > FEASIBILITY_TOL * (1.0 + np.abs(form.b).max()):
            return LPSolution(None, float('nan'), SolveStatus.INFEASIBLE,
                              iterations)
        dropped = _drive_out_artificials(phase, width)
        if dropped:
            logger.debug('Dropped %d redundant rows', len(dropped))
        A = phase.A[:, :width]
        b = phase.b
        basis = phase.basis
    else:
        A = form.A
        b = form.b

    phase = _Phase(A, b, form.cost, basis, tol, max_iter - iterations)
    status = phase.run()
    iterations += phase.iterations
    values = np.zeros(A.shape[1])
    values[phase.basis] = phase.values()
    shifted = np.clip(values[:n], 0.0, form.upper - form.lower)
    x = form.lower + shifted
    objective = float(np.asarray(lp.c, dtype=np.float64) @ x)
    if status is not SolveStatus.OPTIMAL:
        return LPSolution(x, objective, status, iterations,
                          dropped_rows=dropped)
    _check_optimal_point(lp, x)
    dual_objective = float(phase.duals() @ b) + form.constant
    logger.debug('Phase two finished: objective %.12g after %d pivots',
                 objective, iterations)
    return LPSolution(x, objective, status, iterations, dual_objective,
                      dropped)


def parse_lp_text(text):
    '''Read a program written by `fairness_lp.dump_lp`

    Format: optional comment lines, then `min` or `max`, the objective
    coefficients, one constraint per line with `=`, `<=` or `>=`, and `end`.
    A comment `# variables N bounds LO HI` sets the bounds of all variables
    (default [0, inf)). A `max` program is returned negated, as a `min`.
    '''
    lines = [line.strip() for line in text.strip().splitlines()
             if line.strip()]
    lo, hi = 0.0, np.inf
    body = []
    for line in lines:
        if line.startswith('#'):
            tokens = line[1:].split()
            if 'bounds' in tokens:
                at = tokens.index('bounds')
                lo, hi = float(tokens[at + 1]), float(tokens[at + 2])
            continue
        body.append(line)
    if not body or body[0].lower() not in ('min', 'max'):
        raise ValueError("First line must be 'min' or 'max'")
    sign = 1.0 if body[0].lower() == 'min' else -1.0
    c = sign * np.array([float(value) for value in body[1].split()])
    eq_rows, eq_rhs, ub_rows, ub_rhs = [], [], [], []
    for line in body[2:]:
        if line.lower() == 'end':
            break
        if '<=' in line:
            left, rhs = line.split('<=')
            flip = 1.0
        elif '>=' in line:
            left, rhs = line.split('>=')
            flip = -1.0
        elif '=' in line:
            left, rhs = line.split('=')
            flip = None
        else:
            raise ValueError('Constraint line must contain <=, >=, or =')
        row = np.array([float(value) for value in left.split()])
        if len(row) != len(c):
            raise ValueError('Constraint has wrong number of coefficients')
        if flip is None:
            eq_rows.append(row)
            eq_rhs.append(float(rhs))
        else:
            ub_rows.append(flip * row)
            ub_rhs.append(flip * float(rhs))
    n = len(c)
    return LinearProgram(
        c=c,
        a_eq=np.array(eq_rows).reshape(-1, n),
        b_eq=np.array(eq_rhs),
        a_ub=np.array(ub_rows).reshape(-1, n),
        b_ub=np.array(ub_rhs),
        bounds=np.tile([lo, hi], (n, 1)),
    )
