"""Sparse recovery with a known-nonzero block.

The row system [A1 A2][x1; x2] = b has a sparse x1 (at most k nonzeros)
and a fully nonzero x2. A QR decomposition of A2 splits the system: the
rows orthogonal to range(A2) determine x1 alone, after which x2 follows
by back-substitution. Uniqueness of the combined solution holds when
m >= 2k + n2, A2 has full column rank, and every 2k-column subset of
Qnull^T A1 has full rank; the certificate reports each condition and a
witness subset when the last one fails.

Also provides the plain l1 route (basis pursuit via linear programming)
and the mutual coherence of a sensing matrix.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.optimize import linprog

from .errors import (
    InfeasibleSystemError,
    ParameterError,
    RankDeficiencyError,
    SolverFailureError,
    SparsityInfeasibleError,
    UndefinedCoherenceError,
)
from .experiments import DataSet, RowSystem, assemble_row_system

RANK_TOL = 1e-8
RESIDUAL_TOL = 1e-8
AMBIGUITY_TOL = 1e-6
SUPPORT_TOL = 1e-6

METHOD_L0 = "l0_exhaustive"
METHOD_BP = "basis_pursuit"

_SUBSET_CHUNK = 4096


def relative_residual(A, x, b) -> float:
    return float(np.linalg.norm(A @ x - b) / max(np.linalg.norm(b), 1.0))


@dataclass(frozen=True)
class QRSplit:
    """Thin/null split of A2: A2 = Qthin R1 with Qnull spanning the complement."""

    Qthin: np.ndarray
    Qnull: np.ndarray
    R1: np.ndarray


def qr_split(A2, tol=RANK_TOL) -> QRSplit:
    """QR-decompose the known-nonzero block; raises if A2 is rank deficient."""
    A2 = np.atleast_2d(np.asarray(A2, dtype=float))
    if A2.ndim != 2:
        raise ParameterError("A2 must be a 2-d matrix")
    m, n2 = A2.shape
    if n2 < 1 or m < n2:
        raise ParameterError(f"need m >= n2 >= 1, got shape {A2.shape}")
    s = np.linalg.svd(A2, compute_uv=False)
    if s[0] == 0.0 or s[-1] / s[0] <= tol:
        raise RankDeficiencyError("A2 is rank deficient; known-nonzero split unavailable")
    Qfull, R = np.linalg.qr(A2, mode="complete")
    return QRSplit(Qthin=Qfull[:, :n2], Qnull=Qfull[:, n2:], R1=R[:n2, :n2])


def null_projector(A2, tol=RANK_TOL) -> np.ndarray:
    """Orthonormal basis of the complement of range(A2); tolerant of rank-deficient A2."""
    A2 = np.atleast_2d(np.asarray(A2, dtype=float))
    U, s, _ = np.linalg.svd(A2, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        rank = 0
    else:
        rank = int(np.sum(s / s[0] > tol))
    return U[:, rank:]


@dataclass(frozen=True)
class UniquenessReport:
    """Certificate for unique (k + n2)-sparse recovery from one row system."""

    m_ok: bool
    a2_full_rank: bool
    all_subsets_ok: bool
    deficient_subset: tuple | None
    checked_subsets: int
    k: int
    subset_size: int
    projected_rows: int

    @property
    def unique(self) -> bool:
        return self.m_ok and self.a2_full_rank and self.all_subsets_ok

    @property
    def witness_informative(self) -> bool:
        """False when every subset is deficient by dimension counting alone,
        in which case the witness singles out nothing."""
        return self.deficient_subset is not None and self.projected_rows >= self.subset_size

    def to_dict(self) -> dict:
        return {
            "m_ok": self.m_ok,
            "a2_full_rank": self.a2_full_rank,
            "all_subsets_ok": self.all_subsets_ok,
            "deficient_subset": None if self.deficient_subset is None else list(self.deficient_subset),
            "checked_subsets": self.checked_subsets,
            "k": self.k,
            "subset_size": self.subset_size,
            "projected_rows": self.projected_rows,
            "unique": self.unique,
        }


def _first_deficient_subset(B, size, tol):
    """Scan column subsets of B in lexicographic order for the first rank-deficient one.

    Returns (subset or None, subsets examined). Columns are normalized
    first so the sigma-ratio test measures dependency, not column scale;
    rank checks run as stacked SVDs over chunks so the certificate stays
    fast at desk scale.
    """
    mB, n = B.shape
    if mB < size:
        # fewer equations than subset columns: every subset is deficient
        return tuple(range(size)), 1
    norms = np.linalg.norm(B, axis=0)
    B = B / np.where(norms > 0.0, norms, 1.0)
    combos = itertools.combinations(range(n), size)
    examined = 0
    while True:
        chunk = list(itertools.islice(combos, _SUBSET_CHUNK))
        if not chunk:
            return None, examined
        idx = np.array(chunk)  # (c, size)
        stack = B[:, idx].transpose(1, 0, 2)  # (c, mB, size)
        sv = np.linalg.svd(stack, compute_uv=False)
        smax = sv[:, 0]
        ratio = np.where(smax > 0, sv[:, -1] / np.where(smax > 0, smax, 1.0), 0.0)
        bad = np.nonzero(ratio <= tol)[0]
        if bad.size:
            examined += int(bad[0]) + 1
            return chunk[int(bad[0])], examined
        examined += len(chunk)


def check_uniqueness(A1, A2, k: int, tol=RANK_TOL) -> UniquenessReport:
    """Evaluate the three uniqueness conditions for the prior-knowledge split.

    Subsets of min(2k, n1) columns of Qnull^T A1 are enumerated in
    lexicographic order; the first rank-deficient one is returned as the
    witness. A1 column indices are 0-based.
    """
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    A1 = np.atleast_2d(np.asarray(A1, dtype=float))
    A2 = np.atleast_2d(np.asarray(A2, dtype=float))
    if A1.shape[0] != A2.shape[0]:
        raise ParameterError("A1 and A2 must have the same number of rows")
    m, n1 = A1.shape
    n2 = A2.shape[1]

    m_ok = m >= 2 * k + n2
    s = np.linalg.svd(A2, compute_uv=False)
    a2_full_rank = bool(s.size and s[0] > 0.0 and s[-1] / s[0] > tol)

    Qnull = null_projector(A2, tol)
    B = Qnull.T @ A1
    size = min(2 * k, n1)
    witness, examined = _first_deficient_subset(B, size, tol)
    return UniquenessReport(
        m_ok=bool(m_ok),
        a2_full_rank=a2_full_rank,
        all_subsets_ok=witness is None,
        deficient_subset=witness,
        checked_subsets=examined,
        k=k,
        subset_size=size,
        projected_rows=B.shape[0],
    )


def deficient_witness(A1, A2, k: int, tol=RANK_TOL):
    """Smallest-scale deficiency probe for experiment targeting.

    Tests subsets at size min(2k, n1, projected rows), so a dependency is
    already visible while m is still too small for the full certificate.
    Returns a tuple of 0-based A1 column indices or None.
    """
    A1 = np.atleast_2d(np.asarray(A1, dtype=float))
    A2 = np.atleast_2d(np.asarray(A2, dtype=float))
    Qnull = null_projector(A2, tol)
    B = Qnull.T @ A1
    size = min(2 * k, A1.shape[1], B.shape[0])
    if size < 1:
        return None
    witness, _ = _first_deficient_subset(B, size, tol)
    return witness


@dataclass(frozen=True)
class L0Solution:
    x1: np.ndarray
    support: tuple  # 0-based column indices
    residual: float


@dataclass(frozen=True)
class AmbiguityReport:
    """Two or more distinct minimum-cardinality solutions fit the data."""

    cardinality: int
    candidates: tuple  # tuple of (support, x1) pairs

    def supports(self) -> tuple:
        return tuple(sup for sup, _ in self.candidates)


def solve_l0(A1red, bred, k: int, restol=RESIDUAL_TOL):
    """Exhaustive minimum-cardinality fit of the reduced system.

    Supports of size 0..k are tried in increasing cardinality with a
    least-squares fit each; the first cardinality with an accepted fit
    wins. Distinct accepted solutions at that cardinality (elementwise
    gap > 1e-6) are returned together as an AmbiguityReport.
    """
    A1red = np.atleast_2d(np.asarray(A1red, dtype=float))
    bred = np.asarray(bred, dtype=float).ravel()
    mred, n1 = A1red.shape
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if n1 < k:
        raise ParameterError(f"need n1 >= k, got n1={n1}, k={k}")
    bnorm = max(np.linalg.norm(bred), 1.0)

    for size in range(0, k + 1):
        accepted = []
        for support in itertools.combinations(range(n1), size):
            if size == 0:
                res = np.linalg.norm(bred) / bnorm
                coeffs = np.zeros(0)
            else:
                sub = A1red[:, support]
                coeffs, _, _, _ = np.linalg.lstsq(sub, bred, rcond=None)
                res = np.linalg.norm(sub @ coeffs - bred) / bnorm
            if res < restol:
                x1 = np.zeros(n1)
                x1[list(support)] = coeffs
                accepted.append((support, x1, float(res)))
        if not accepted:
            continue
        distinct = [accepted[0]]
        for cand in accepted[1:]:
            if all(np.max(np.abs(cand[1] - kept[1])) > AMBIGUITY_TOL for kept in distinct):
                distinct.append(cand)
        if len(distinct) > 1:
            return AmbiguityReport(
                cardinality=size,
                candidates=tuple((sup, x1) for sup, x1, _ in distinct),
            )
        sup, x1, res = distinct[0]
        return L0Solution(x1=x1, support=sup, residual=res)
    raise SparsityInfeasibleError(f"no support of size <= {k} fits the reduced system")


def solve_x2(split: QRSplit, A1, b, x1) -> np.ndarray:
    """Back-substitute x2 = R1^-1 Qthin^T (b - A1 x1)."""
    A1 = np.atleast_2d(np.asarray(A1, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    x1 = np.asarray(x1, dtype=float).ravel()
    rhs = split.Qthin.T @ (b - A1 @ x1)
    return solve_triangular(split.R1, rhs)


@dataclass(frozen=True)
class RecoveryResult:
    """Recovered row: x1 in A1 column order, x2 the diagonal P entry.

    support holds 1-based state indices (mapped through the row system's
    col_map); residual is ||[A1 A2][x1;x2] - b|| / max(||b||, 1).
    """

    x1: np.ndarray
    x2: float
    support: tuple
    residual: float
    method: str
    certificate: UniquenessReport | None = field(default=None)

    def to_dict(self) -> dict:
        return {
            "x1": [float(v) for v in self.x1],
            "x2": float(self.x2),
            "support": list(self.support),
            "residual": float(self.residual),
            "method": self.method,
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
        }


X2_ZERO_TOL = 1e-9


def solve_row_prior(sys: RowSystem, k: int, tol=RANK_TOL, restol=RESIDUAL_TOL):
    """Full prior-knowledge pipeline for one row: split, l0 on the reduced
    system, back-substitute x2, attach the uniqueness certificate.

    Reduced-system candidates whose implied x2 vanishes contradict the
    known-nonzero block and are discarded; if several candidates survive
    the AmbiguityReport is returned instead of a RecoveryResult.
    """
    split = qr_split(sys.A2, tol)
    A1red = split.Qnull.T @ sys.A1
    bred = split.Qnull.T @ sys.b
    solution = solve_l0(A1red, bred, k, restol)
    if isinstance(solution, AmbiguityReport):
        survivors = [
            (sup, x1c)
            for sup, x1c in solution.candidates
            if np.min(np.abs(solve_x2(split, sys.A1, sys.b, x1c))) > X2_ZERO_TOL
        ]
        if len(survivors) != 1:
            if survivors and len(survivors) < len(solution.candidates):
                return AmbiguityReport(cardinality=solution.cardinality, candidates=tuple(survivors))
            return solution
        sup, x1c = survivors[0]
        solution = L0Solution(
            x1=x1c,
            support=sup,
            residual=float(np.linalg.norm(A1red @ x1c - bred) / max(np.linalg.norm(bred), 1.0)),
        )
    x2 = solve_x2(split, sys.A1, sys.b, solution.x1)
    full = np.concatenate([solution.x1, x2])
    A = np.hstack([sys.A1, sys.A2])
    certificate = check_uniqueness(sys.A1, sys.A2, k, tol)
    return RecoveryResult(
        x1=solution.x1,
        x2=float(x2[0]),
        support=tuple(sorted(sys.col_map[c] for c in solution.support)),
        residual=relative_residual(A, full, sys.b),
        method=METHOD_L0,
        certificate=certificate,
    )


def basis_pursuit(A, b, penalized=None, feastol=RESIDUAL_TOL, support_tol=SUPPORT_TOL):
    """Minimum-l1 solution of Ax = b via the split x = u - v linear program.

    penalized selects which entries enter the objective (default: all);
    unpenalized entries are free variables with zero cost. Entries below
    1e-6 * max(1, ||x||_inf) are zeroed on return.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    m, n = A.shape
    if b.size != m:
        raise ParameterError(f"b has length {b.size}, expected {m}")
    if penalized is None:
        pen = np.ones(n, dtype=bool)
    else:
        pen = np.zeros(n, dtype=bool)
        pen[np.asarray(list(penalized), dtype=int)] = True

    ls, _, _, _ = np.linalg.lstsq(A, b, rcond=None)
    if relative_residual(A, ls, b) >= feastol:
        raise InfeasibleSystemError("b is not in the range of A")

    npen = int(pen.sum())
    nfree = n - npen
    A_pen = A[:, pen]
    A_free = A[:, ~pen]
    A_eq = np.hstack([A_pen, -A_pen, A_free])
    c = np.concatenate([np.ones(2 * npen), np.zeros(nfree)])
    bounds = [(0, None)] * (2 * npen) + [(None, None)] * nfree
    res = linprog(c, A_eq=A_eq, b_eq=b, bounds=bounds, method="highs")
    if res.status == 2:
        raise InfeasibleSystemError("LP reports infeasible equality constraints")
    if res.status != 0:
        raise SolverFailureError(
            f"LP did not converge (status {res.status}: {res.message})",
            iterations=int(getattr(res, "nit", -1)),
        )
    x = np.zeros(n)
    x[pen] = res.x[:npen] - res.x[npen : 2 * npen]
    x[~pen] = res.x[2 * npen :]
    x[np.abs(x) < support_tol * max(1.0, np.max(np.abs(x), initial=0.0))] = 0.0
    return x


def coherence(A) -> float:
    """Mutual coherence: max over column pairs of |Ai^T Aj| / (||Ai|| ||Aj||).

    Zero columns are excluded from the pairing (with a warning); fewer
    than two nonzero columns leaves the value undefined.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    norms = np.linalg.norm(A, axis=0)
    nonzero = norms > 0.0
    if np.count_nonzero(nonzero) < 2:
        raise UndefinedCoherenceError("coherence needs at least two nonzero columns")
    if not nonzero.all():
        warnings.warn(
            f"coherence: excluded {np.count_nonzero(~nonzero)} zero column(s)", stacklevel=2
        )
    N = A[:, nonzero] / norms[nonzero]
    G = np.abs(N.T @ N)
    np.fill_diagonal(G, 0.0)
    return float(G.max())


def second_sparse_solution(B, bred, x1, k: int, tol=RANK_TOL, restol=RESIDUAL_TOL):
    """Contradiction construction: a second k-sparse solution of B x = bred.

    Scans rank-deficient column subsets of B (size <= 2k) for a null
    vector that, added to x1 with a coefficient cancelling one of its
    entries, stays k-sparse. Returns the alternative x1 or None if no
    deficient subset yields one.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    bred = np.asarray(bred, dtype=float).ravel()
    x1 = np.asarray(x1, dtype=float).ravel()
    n1 = x1.size
    size = min(2 * k, n1)
    support = set(np.nonzero(np.abs(x1) > AMBIGUITY_TOL)[0])
    for subset in itertools.combinations(range(n1), size):
        if not support & set(subset):
            continue
        sub = B[:, subset]
        _, sv, Vt = np.linalg.svd(sub, full_matrices=True)
        smax = sv[0] if sv.size else 0.0
        rank = int(np.sum(sv / smax > tol)) if smax > 0.0 else 0
        if rank == size:
            continue
        null_dim = size - rank
        for d in range(1, null_dim + 1):
            h = np.zeros(n1)
            h[list(subset)] = Vt[-d]
            if np.linalg.norm(B @ h) > restol * max(np.linalg.norm(bred), 1.0):
                continue
            for j in sorted(support & set(np.nonzero(np.abs(h) > 1e-12)[0])):
                alpha = -x1[j] / h[j]
                cand = x1 + alpha * h
                cand[np.abs(cand) < AMBIGUITY_TOL] = 0.0
                if np.count_nonzero(cand) <= k and np.max(np.abs(cand - x1)) > AMBIGUITY_TOL:
                    if np.linalg.norm(B @ cand - bred) < restol * max(np.linalg.norm(bred), 1.0):
                        return cand
    return None


@dataclass(frozen=True)
class RowReport:
    """Per-row outcome of a whole-network reconstruction."""

    row: int
    status: str  # recovered | ambiguous | failed
    method: str
    residual: float | None = None
    support: tuple = ()
    x2: float | None = None
    unique: bool | None = None
    certificate: UniquenessReport | None = None
    detail: str | None = None

    def to_dict(self) -> dict:
        return {
            "row": self.row,
            "status": self.status,
            "method": self.method,
            "residual": self.residual,
            "support": list(self.support),
            "x2": self.x2,
            "unique": self.unique,
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "detail": self.detail,
        }


def _norm_method(method: str) -> str:
    aliases = {
        "l0": METHOD_L0,
        METHOD_L0: METHOD_L0,
        "bp": METHOD_BP,
        "l1": METHOD_BP,
        METHOD_BP: METHOD_BP,
    }
    if method not in aliases:
        raise ParameterError(f"unknown method {method!r}; use 'l0' or 'bp'")
    return aliases[method]


def reconstruct_network(data: DataSet, k: int, method: str = "l0", tol=RANK_TOL):
    """Row-by-row reconstruction of (Q0, P0) from a data set.

    method 'l0' runs the prior-knowledge split pipeline per row; 'bp'
    runs basis pursuit on [A1 A2] with the known-nonzero x2 left out of
    the l1 objective. Failing rows are reported, not raised; their Qhat
    rows stay zero.
    """
    method = _norm_method(method)
    p = data.p
    Qhat = np.zeros((p, p))
    Phat = np.zeros((p, p))
    reports = []
    for i in range(1, p + 1):
        sys = assemble_row_system(data, i)
        try:
            if method == METHOD_L0:
                result = solve_row_prior(sys, k, tol)
                if isinstance(result, AmbiguityReport):
                    supports = [
                        tuple(sorted(sys.col_map[c] for c in sup)) for sup in result.supports()
                    ]
                    reports.append(
                        RowReport(
                            row=i,
                            status="ambiguous",
                            method=method,
                            unique=False,
                            detail=f"{len(supports)} minimum-cardinality supports fit: {supports}",
                        )
                    )
                    continue
                for c, state in sys.col_map.items():
                    Qhat[i - 1, state - 1] = result.x1[c]
                Phat[i - 1, i - 1] = result.x2
                reports.append(
                    RowReport(
                        row=i,
                        status="recovered",
                        method=method,
                        residual=result.residual,
                        support=result.support,
                        x2=result.x2,
                        unique=result.certificate.unique,
                        certificate=result.certificate,
                    )
                )
            else:
                A = np.hstack([sys.A1, sys.A2])
                n1 = sys.A1.shape[1]
                x = basis_pursuit(A, sys.b, penalized=range(n1))
                for c, state in sys.col_map.items():
                    Qhat[i - 1, state - 1] = x[c]
                Phat[i - 1, i - 1] = x[n1]
                reports.append(
                    RowReport(
                        row=i,
                        status="recovered",
                        method=method,
                        residual=relative_residual(A, x, sys.b),
                        support=tuple(
                            sorted(sys.col_map[c] for c in np.nonzero(x[:n1])[0])
                        ),
                        x2=float(x[n1]),
                    )
                )
        except (RankDeficiencyError, SparsityInfeasibleError, InfeasibleSystemError, SolverFailureError) as exc:
            reports.append(
                RowReport(row=i, status="failed", method=method, unique=False, detail=str(exc))
            )
    return Qhat, Phat, reports
