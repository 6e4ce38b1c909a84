"""Resolution-change algebra for single-input experiments.

When only a subset of states is ever driven directly, the data identify
the network at the lower resolution of the perturbed states: the reduced
coupling (Qhat11, Phat11) after eliminating the unperturbed block, the
direct-influence map Qhat21 into the unperturbed states, and from these a
particular full-size solution in which unperturbed states have no
outgoing edges. The identifiable block also constrains which entries of
the true coupling matrix can be nonzero; constraint_matrix turns that
into a ternary Zero / Nonzero / Unknown pattern.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ResolutionSingularityError

ZERO = 0
NONZERO = 1
UNKNOWN = 2

_GRID_CHARS = {ZERO: "0", NONZERO: "x", UNKNOWN: "?"}
_GRID_CODES = {v: k for k, v in _GRID_CHARS.items()}

GAIN_ZERO_TOL = 1e-9
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class Partition:
    """Split of {1..p} into directly driven (perturbed) and never-driven states."""

    perturbed: tuple
    unperturbed: tuple

    @classmethod
    def from_perturbed(cls, perturbed, p: int) -> "Partition":
        pert = tuple(sorted(int(i) for i in perturbed))
        if len(pert) == 0:
            raise ParameterError("perturbed set must be nonempty")
        if len(set(pert)) != len(pert):
            raise ParameterError(f"duplicate indices in perturbed set {pert}")
        if any(i < 1 or i > p for i in pert):
            raise ParameterError(f"perturbed indices {pert} outside 1..{p}")
        unpert = tuple(i for i in range(1, p + 1) if i not in set(pert))
        return cls(perturbed=pert, unperturbed=unpert)

    @property
    def p(self) -> int:
        return len(self.perturbed) + len(self.unperturbed)


@dataclass(frozen=True)
class StructurePattern:
    """Ternary matrix over {Zero, Nonzero, Unknown} stored as int8 codes."""

    entries: np.ndarray

    @classmethod
    def from_gains(cls, M, tol=GAIN_ZERO_TOL) -> "StructurePattern":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        codes = np.where(np.abs(M) > tol, NONZERO, ZERO).astype(np.int8)
        return cls(entries=codes)

    @classmethod
    def from_grid(cls, text: str) -> "StructurePattern":
        rows = [line for line in text.splitlines() if line.strip()]
        try:
            codes = np.array([[_GRID_CODES[ch] for ch in row] for row in rows], dtype=np.int8)
        except KeyError as exc:
            raise ParameterError(f"unknown grid character {exc}") from exc
        return cls(entries=codes)

    def to_grid(self) -> str:
        return "\n".join("".join(_GRID_CHARS[int(c)] for c in row) for row in self.entries)

    def to_json(self) -> str:
        return json.dumps({"rows": self.to_grid().split("\n")})

    def support(self) -> set:
        """1-based (i, j) positions marked Nonzero."""
        return {(i + 1, j + 1) for i, j in zip(*np.nonzero(self.entries == NONZERO))}

    def __eq__(self, other):
        return isinstance(other, StructurePattern) and np.array_equal(self.entries, other.entries)


def _blocks(Q0, part: Partition):
    Q0 = np.atleast_2d(np.asarray(Q0, dtype=float))
    i1 = [i - 1 for i in part.perturbed]
    i2 = [i - 1 for i in part.unperturbed]
    return Q0[np.ix_(i1, i1)], Q0[np.ix_(i1, i2)], Q0[np.ix_(i2, i1)], Q0[np.ix_(i2, i2)]


def _stable_inverse_apply(M, rhs, what):
    if M.size and np.linalg.cond(M) > CONDITION_LIMIT:
        raise ResolutionSingularityError(f"({what}) is numerically singular")
    return np.linalg.solve(M, rhs) if M.size else rhs


def m_dsf(Q0, P0, part: Partition):
    """Reduced coupling of the perturbed block after eliminating the rest.

    Returns (Qhat11, Phat11): the elimination feeds back through the
    unperturbed states, and the resulting diagonal is absorbed so the
    reduced coupling stays hollow.
    """
    Q11, Q12, Q21, Q22 = _blocks(Q0, part)
    P0 = np.atleast_2d(np.asarray(P0, dtype=float))
    i1 = [i - 1 for i in part.perturbed]
    P11 = P0[np.ix_(i1, i1)]
    if np.any(np.abs(np.diag(P11)) == 0.0):
        raise ParameterError("P diagonal must be nonzero on the perturbed block")

    n2 = len(part.unperturbed)
    if n2:
        Qbar = Q11 + Q12 @ _stable_inverse_apply(np.eye(n2) - Q22, Q21, "I - Q22")
    else:
        Qbar = Q11.copy()
    D = np.diag(np.diag(Qbar))
    ID = np.eye(len(part.perturbed)) - D
    if np.any(np.abs(np.diag(ID)) < 1.0 / CONDITION_LIMIT):
        raise ResolutionSingularityError("(I - D11) is numerically singular")
    Qhat11 = np.linalg.solve(ID, Qbar - D)
    Phat11 = np.linalg.solve(ID, P11)
    np.fill_diagonal(Qhat11, 0.0)
    return Qhat11, Phat11


def hat_q21(Q0, part: Partition):
    """Direct influence of perturbed states on unperturbed ones: (I - Q22)^-1 Q21."""
    _, _, Q21, Q22 = _blocks(Q0, part)
    n2 = len(part.unperturbed)
    if n2 == 0:
        return np.zeros((0, len(part.perturbed)))
    return _stable_inverse_apply(np.eye(n2) - Q22, Q21, "I - Q22")


def particular_solution(Q0, P0, part: Partition):
    """Always-constructible full-size solution with no edges out of unperturbed states.

    Returns (Qhat, Phat) reassembled in original state order: the reduced
    coupling fills the perturbed block, the direct-influence map fills
    the unperturbed rows, and all columns at unperturbed states are zero.
    """
    p = part.p
    Qhat11, Phat11 = m_dsf(Q0, P0, part)
    Q21h = hat_q21(Q0, part)
    Qhat = np.zeros((p, p))
    Phat = np.zeros((p, p))
    i1 = [i - 1 for i in part.perturbed]
    i2 = [i - 1 for i in part.unperturbed]
    Qhat[np.ix_(i1, i1)] = Qhat11
    if i2:
        Qhat[np.ix_(i2, i1)] = Q21h
    Phat[np.ix_(i1, i1)] = Phat11
    return Qhat, Phat


def identifiable_block_pattern(Q0, P0, part: Partition, tol=GAIN_ZERO_TOL) -> StructurePattern:
    """Pattern of the identifiable block (perturbed columns of the particular solution).

    Rows follow original state order; column j corresponds to
    part.perturbed[j].
    """
    Qhat, _ = particular_solution(Q0, P0, part)
    cols = [i - 1 for i in part.perturbed]
    return StructurePattern.from_gains(Qhat[:, cols], tol)


def constraint_matrix(qhat1_pattern: StructurePattern, part: Partition) -> StructurePattern:
    """Ternary constraints on the true coupling implied by the identifiable block.

    A Zero in the identifiable block forces the corresponding direct edge
    to zero, and forces edges from any unperturbed state whose
    direct-influence entry in that column is nonzero (otherwise their
    product would show up). A Nonzero yields a definite edge only when no
    indirect route through an unperturbed state could explain it, which
    restricts definite verdicts to perturbed rows; everything else stays
    Unknown. Diagonal entries are Zero.
    """
    p = part.p
    entries = np.atleast_2d(qhat1_pattern.entries)
    if entries.shape != (p, len(part.perturbed)):
        raise ParameterError(
            f"pattern shape {entries.shape} does not match p={p} x perturbed={len(part.perturbed)}"
        )
    pert_set = set(part.perturbed)
    Qc = np.full((p, p), UNKNOWN, dtype=np.int8)
    np.fill_diagonal(Qc, ZERO)
    for i in range(1, p + 1):
        for col, j in enumerate(part.perturbed):
            if j == i:
                continue
            code = int(entries[i - 1, col])
            if code == ZERO:
                Qc[i - 1, j - 1] = ZERO
                # every product term through an unperturbed state must vanish
                for u in part.unperturbed:
                    if u != i and int(entries[u - 1, col]) == NONZERO:
                        Qc[i - 1, u - 1] = ZERO
            elif code == NONZERO:
                indirect_possible = any(
                    int(entries[u - 1, col]) != ZERO for u in part.unperturbed if u != i
                )
                if i in pert_set and not indirect_possible:
                    Qc[i - 1, j - 1] = NONZERO
    return StructurePattern(entries=Qc)


def cancellation_risk(Q0, part: Partition, entry_tol=1e-6, mass_tol=1e-3) -> bool:
    """Flag near-cancelling path sums: tiny identifiable entries whose
    individual path products are large. Used to resample test networks."""
    Q0 = np.atleast_2d(np.asarray(Q0, dtype=float))
    Q11, Q12, Q21, Q22 = _blocks(Q0, part)
    n2 = len(part.unperturbed)
    if n2 == 0:
        return False
    A22 = np.abs(Q22)
    if np.max(np.abs(np.linalg.eigvals(A22))) >= 1.0:
        return True
    signed = np.vstack(
        [
            Q11 + Q12 @ np.linalg.solve(np.eye(n2) - Q22, Q21),
            np.linalg.solve(np.eye(n2) - Q22, Q21),
        ]
    )
    mass = np.vstack(
        [
            np.abs(Q11) + np.abs(Q12) @ np.linalg.solve(np.eye(n2) - A22, np.abs(Q21)),
            np.linalg.solve(np.eye(n2) - A22, np.abs(Q21)),
        ]
    )
    return bool(np.any((np.abs(signed) < entry_tol) & (mass > mass_tol)))
