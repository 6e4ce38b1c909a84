"""Steady-state perturbation experiments and per-row sensing systems.

Each experiment applies step inputs at a chosen set of states and records
the steady-state output vector. Concatenating experiments column-wise
gives Y (p x m) and U (p x m) with Y = Q0 Y + P0 U. Solving for one row
of [Q P] at a time yields the sensing system

    [A1 A2] [x1; x2] = b,   A1 = Y^T minus column i, A2 = U^T column i

where the known zero diagonal of Q and the off-diagonal zeros of P have
already been eliminated.

The whole-system form (stacking all rows through a Kronecker product of
the transposed data matrices) is deliberately not constructed: prior
knowledge differs row by row, and the row form carries strictly more of
it.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .errors import IllPosedNetworkError, ParameterError
from .networks import Network, steady_gains

CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class ExperimentPlan:
    """Active input states (1-based) and the step magnitude applied at each."""

    inputs: tuple
    magnitudes: tuple

    @classmethod
    def make(cls, inputs, magnitude=1.0) -> "ExperimentPlan":
        """Build a plan from an input set and a scalar or per-input magnitude map."""
        inputs = tuple(sorted(int(i) for i in inputs))
        if len(inputs) == 0:
            raise ParameterError("plan needs at least one input")
        if len(set(inputs)) != len(inputs):
            raise ParameterError(f"duplicate inputs in plan: {inputs}")
        if isinstance(magnitude, dict):
            try:
                mags = tuple(float(magnitude[i]) for i in inputs)
            except KeyError as exc:
                raise ParameterError(f"magnitude map missing input {exc}") from exc
        else:
            mags = tuple(float(magnitude) for _ in inputs)
        return cls(inputs=inputs, magnitudes=mags)

    def validate_against(self, p: int):
        if any(i < 1 or i > p for i in self.inputs):
            raise ParameterError(f"plan inputs {self.inputs} outside 1..{p}")


@dataclass(frozen=True)
class DataSet:
    """Concatenated experiment data: Y, U are p x m; usage counts input applications."""

    Y: np.ndarray
    U: np.ndarray
    usage: np.ndarray
    plans: tuple

    @property
    def p(self) -> int:
        return self.Y.shape[0]

    @property
    def m(self) -> int:
        return self.Y.shape[1]


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def simulate(net: Network, plans) -> DataSet:
    """Steady-state response columns Y(:,j) = (I - Q0)^-1 P0 U(:,j) for each plan."""
    plans = tuple(
        plan if isinstance(plan, ExperimentPlan) else ExperimentPlan.make(plan) for plan in plans
    )
    if len(plans) == 0:
        raise ParameterError("need at least one experiment plan")
    p = net.p
    for plan in plans:
        plan.validate_against(p)

    Q0, P0 = steady_gains(net)
    M = np.eye(p) - Q0
    if np.linalg.cond(M) > CONDITION_LIMIT:
        raise IllPosedNetworkError("(I - Q0) is numerically singular")

    U = np.zeros((p, len(plans)))
    usage = np.zeros(p, dtype=int)
    for j, plan in enumerate(plans):
        for state, mag in zip(plan.inputs, plan.magnitudes):
            U[state - 1, j] = mag
            usage[state - 1] += 1
    Y = np.linalg.solve(M, P0 @ U)
    return DataSet(Y=_freeze(Y), U=_freeze(U), usage=_freeze(usage), plans=plans)


@dataclass(frozen=True)
class RowSystem:
    """Sensing system for one row: A1 x1 + A2 x2 = b with x2 the diagonal P entry.

    col_map maps A1 column index (0-based) to the original state (1-based)
    it multiplies, i.e. onto {1..p} \\ {row}.
    """

    row: int
    A1: np.ndarray
    A2: np.ndarray
    b: np.ndarray
    col_map: dict


def assemble_row_system(data: DataSet, i: int) -> RowSystem:
    """Row i's sensing system; the known zero Q(i,i) column is dropped from Y^T."""
    p = data.p
    if not 1 <= i <= p:
        raise ParameterError(f"row index {i} outside 1..{p}")
    Yt = data.Y.T
    Ut = data.U.T
    keep = [j for j in range(p) if j != i - 1]
    A1 = Yt[:, keep].copy()
    A2 = Ut[:, [i - 1]].copy()
    b = Yt[:, i - 1].copy()
    col_map = {c: j + 1 for c, j in enumerate(keep)}
    return RowSystem(row=i, A1=_freeze(A1), A2=_freeze(A2), b=_freeze(b), col_map=col_map)


def true_row_solution(net: Network, sys: RowSystem):
    """Ground-truth (x1, x2) for a row system simulated from net (test oracle helper)."""
    Q0, P0 = steady_gains(net)
    x1 = np.array([Q0[sys.row - 1, sys.col_map[c] - 1] for c in range(len(sys.col_map))])
    x2 = P0[sys.row - 1, sys.row - 1]
    return x1, x2


def _matrix_to_csv(M: np.ndarray) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"exp_{j + 1}" for j in range(M.shape[1])])
    for row in M:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def _matrix_from_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ParameterError("empty CSV")
    return np.array([[float(v) for v in row] for row in rows[1:]], dtype=float)


def plans_to_dict(plans) -> dict:
    return {
        "plans": [
            {"inputs": list(plan.inputs), "magnitudes": list(plan.magnitudes)} for plan in plans
        ]
    }


def plans_from_dict(data: dict) -> tuple:
    return tuple(
        ExperimentPlan(inputs=tuple(rec["inputs"]), magnitudes=tuple(rec["magnitudes"]))
        for rec in data["plans"]
    )


def save_dataset(data: DataSet, directory):
    """Write Y.csv / U.csv (rows = states, columns = experiments) plus plans.json."""
    from pathlib import Path

    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "Y.csv").write_text(_matrix_to_csv(data.Y))
    (d / "U.csv").write_text(_matrix_to_csv(data.U))
    (d / "plans.json").write_text(json.dumps(plans_to_dict(data.plans), indent=2))


def load_dataset(directory) -> DataSet:
    from pathlib import Path

    d = Path(directory)
    Y = _matrix_from_csv((d / "Y.csv").read_text())
    U = _matrix_from_csv((d / "U.csv").read_text())
    plans = plans_from_dict(json.loads((d / "plans.json").read_text()))
    return dataset_from_arrays(Y, U, plans)


def dataset_from_arrays(Y, U, plans) -> DataSet:
    """Rebuild a DataSet from raw arrays, recomputing usage from the plans."""
    Y = np.asarray(Y, dtype=float)
    U = np.asarray(U, dtype=float)
    if Y.shape != U.shape or Y.ndim != 2 or Y.shape[1] < 1:
        raise ParameterError(f"Y and U must be equal-shape p x m with m >= 1, got {Y.shape} and {U.shape}")
    if len(plans) != Y.shape[1]:
        raise ParameterError("number of plans must match number of experiment columns")
    plans = tuple(
        plan if isinstance(plan, ExperimentPlan) else ExperimentPlan.make(plan) for plan in plans
    )
    usage = np.zeros(Y.shape[0], dtype=int)
    for plan in plans:
        plan.validate_against(Y.shape[0])
        for state in plan.inputs:
            usage[state - 1] += 1
    return DataSet(Y=_freeze(Y.copy()), U=_freeze(U.copy()), usage=_freeze(usage), plans=plans)
