"""
Gated track-to-detection assignment back-ends.

Both back-ends solve the same problem: among the pairs allowed by the gate,
pick as many one-to-one pairs as possible and, among those, the pairing of
minimal total cost.
"""

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

try:
    from ortools.linear_solver import pywraplp
    ORTOOLS_AVAILABLE = True
except ImportError:
    ORTOOLS_AVAILABLE = False

from ..core.errors import ConfigurationError, NumericalError


@dataclass
class Assignment:
    """Result of one assignment solve."""

    pairs: List[Tuple[int, int]]
    unassigned_tracks: List[int]
    unassigned_detections: List[int]
    total_cost: float = 0.0
    solve_time: float = 0.0
    assigner_name: str = "unknown"
    metadata: Dict = field(default_factory=dict)


def _forbidden_cost(cost: np.ndarray) -> float:
    """A cost larger than any feasible assignment's total."""
    finite = cost[np.isfinite(cost)]
    if finite.size == 0:
        return 1.0
    return 1.0 + min(cost.shape) * float(np.max(np.abs(finite)))


def _complete(pairs: List[Tuple[int, int]], cost: np.ndarray, name: str, elapsed: float, **metadata) -> Assignment:
    pairs = sorted(pairs)
    tracks = {r for r, _ in pairs}
    dets = {c for _, c in pairs}
    return Assignment(
        pairs=pairs,
        unassigned_tracks=[r for r in range(cost.shape[0]) if r not in tracks],
        unassigned_detections=[c for c in range(cost.shape[1]) if c not in dets],
        total_cost=float(sum(cost[r, c] for r, c in pairs)),
        solve_time=elapsed,
        assigner_name=name,
        metadata=metadata,
    )


class BaseAssigner(ABC):
    """Abstract base class for assignment back-ends."""

    def __init__(self, name: str):
        self.name = name
        self.solve_time = 0.0

    @abstractmethod
    def solve(self, cost: np.ndarray) -> Assignment:
        """
        Assign rows (tracks) to columns (detections).

        Args:
            cost: (n_tracks, n_detections) matrix; np.inf marks gated-out pairs

        Returns:
            The assignment
        """

    def _start_timing(self):
        self._start_time = time.perf_counter()

    def _end_timing(self) -> float:
        self.solve_time = time.perf_counter() - self._start_time
        return self.solve_time


class HungarianAssigner(BaseAssigner):
    """Rectangular assignment with scipy's linear_sum_assignment."""

    def __init__(self):
        super().__init__("hungarian")

    def solve(self, cost: np.ndarray) -> Assignment:
        self._start_timing()
        cost = np.asarray(cost, dtype=float)
        if cost.size == 0:
            return _complete([], cost, self.name, self._end_timing())

        big = _forbidden_cost(cost)
        padded = np.where(np.isfinite(cost), cost, big)
        rows, cols = linear_sum_assignment(padded)
        pairs = [(int(r), int(c)) for r, c in zip(rows, cols) if np.isfinite(cost[r, c])]
        return _complete(pairs, cost, self.name, self._end_timing())


class ILPAssigner(BaseAssigner):
    """Assignment as a 0/1 integer program solved by OR-Tools."""

    def __init__(self, time_limit: float = 10.0, backend: str = "SCIP"):
        super().__init__("ilp")
        self.time_limit = time_limit
        self.backend = backend

        if not ORTOOLS_AVAILABLE:
            raise ImportError("OR-Tools is required for the ILP assigner. Install with: pip install ortools")

    def solve(self, cost: np.ndarray) -> Assignment:
        self._start_timing()
        cost = np.asarray(cost, dtype=float)
        feasible = [(int(r), int(c)) for r, c in zip(*np.nonzero(np.isfinite(cost)))]
        if not feasible:
            return _complete([], cost, self.name, self._end_timing(), status='empty')

        solver = pywraplp.Solver.CreateSolver(self.backend)
        if not solver:
            raise NumericalError(f"could not create {self.backend} solver")
        solver.SetTimeLimit(int(self.time_limit * 1000))

        # x[r, c] = 1 if track r takes detection c
        x = {(r, c): solver.IntVar(0, 1, f"x_{r}_{c}") for r, c in feasible}

        for r in range(cost.shape[0]):
            row = [x[key] for key in x if key[0] == r]
            if row:
                solver.Add(solver.Sum(row) <= 1)
        for c in range(cost.shape[1]):
            col = [x[key] for key in x if key[1] == c]
            if col:
                solver.Add(solver.Sum(col) <= 1)

        # Every pair earns a reward larger than any total cost, so cardinality comes first
        big = _forbidden_cost(cost)
        objective = solver.Objective()
        for (r, c), var in x.items():
            objective.SetCoefficient(var, big - cost[r, c])
        objective.SetMaximization()

        status = solver.Solve()
        if status not in (pywraplp.Solver.OPTIMAL, pywraplp.Solver.FEASIBLE):
            raise NumericalError("assignment program has no solution")
        pairs = [(int(r), int(c)) for (r, c), var in x.items() if var.solution_value() > 0.5]
        return _complete(pairs, cost, self.name, self._end_timing(),
                         status='optimal' if status == pywraplp.Solver.OPTIMAL else 'feasible')


def make_assigner(name: str) -> BaseAssigner:
    """Assigner by configuration name."""
    if name == "hungarian":
        return HungarianAssigner()
    if name == "ilp":
        return ILPAssigner()
    raise ConfigurationError(f"unknown assigner {name!r}; expected 'hungarian' or 'ilp'", "$.assigner")
