"""Network model: first-order transfer-element matrices (Q, P).

A network couples p observed states through a hollow matrix Q of
strictly-proper first-order elements g/(s+a) and receives inputs through
a diagonal P of the same element class. Everything downstream works from
the steady-state gains Q(0), P(0), so only g/a matters for the numerics;
poles are kept so serialized networks stay full descriptions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

POLE_RANGE = (0.5, 2.0)
MIN_GAIN = 1e-6
SPECTRAL_TARGET = 0.9


@dataclass(frozen=True)
class TransferElement:
    """First-order lag g/(s+a); steady-state value g/a. gain == 0 encodes an absent edge."""

    gain: float
    pole: float = 1.0

    def __post_init__(self):
        if not self.pole > 0:
            raise ParameterError(f"pole must be positive, got {self.pole}")

    @property
    def is_zero(self) -> bool:
        return self.gain == 0.0

    @property
    def steady_gain(self) -> float:
        return self.gain / self.pole


ZERO_ELEMENT = TransferElement(0.0, 1.0)


@dataclass(frozen=True)
class Network:
    """p coupled states: hollow Q (p x p elements), diagonal P, declared max in-degree k."""

    p: int
    k: int
    Q: tuple  # tuple of p tuples of TransferElement
    Pdiag: tuple  # tuple of p TransferElement (the diagonal of P)
    rescaled: bool = field(default=False, compare=False)

    def row_support(self, i: int) -> tuple:
        """1-based column indices of the nonzero entries in row i (1-based)."""
        return tuple(j + 1 for j, el in enumerate(self.Q[i - 1]) if not el.is_zero)

    def support(self) -> set:
        """Set of 1-based (i, j) positions of nonzero Q entries."""
        return {(i, j) for i in range(1, self.p + 1) for j in self.row_support(i)}


def steady_gains(net: Network):
    """Evaluate (Q, P) at s = 0, returning dense real matrices (Q0, P0)."""
    Q0 = np.array([[el.steady_gain for el in row] for row in net.Q], dtype=float)
    P0 = np.diag([el.steady_gain for el in net.Pdiag]).astype(float)
    return Q0, P0


def spectral_radius(M) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(M, dtype=float)))))


def validate(net: Network) -> list:
    """Check all network invariants; returns a list of violation strings (empty = valid)."""
    violations = []
    if net.p < 2:
        violations.append(f"p must be >= 2, got {net.p}")
    if not 1 <= net.k < max(net.p, 2):
        violations.append(f"k must satisfy 1 <= k < p, got k={net.k}, p={net.p}")
    if len(net.Q) != net.p or any(len(row) != net.p for row in net.Q):
        violations.append("Q is not p x p")
        return violations
    if len(net.Pdiag) != net.p:
        violations.append("P diagonal does not have p entries")
        return violations
    for i in range(net.p):
        if not net.Q[i][i].is_zero:
            violations.append(f"hollow Q violated at ({i + 1},{i + 1})")
        indeg = sum(0 if el.is_zero else 1 for el in net.Q[i])
        if indeg < 1 or indeg > net.k:
            violations.append(f"row {i + 1} in-degree {indeg} outside 1..k={net.k}")
        if net.Pdiag[i].is_zero:
            violations.append(f"P diagonal entry zero at {i + 1}")
    Q0, _ = steady_gains(net)
    rho = spectral_radius(np.abs(Q0))
    if rho >= 1.0:
        violations.append(f"spectral radius of |Q(0)| is {rho:.6g} >= 1")
    return violations


def random_network(p: int, k: int, gain_bound: float, seed: int) -> Network:
    """Draw a random k-sparse network.

    Per-row in-degree is uniform on {1..k}; support positions are uniform
    off-diagonal without replacement; steady-state gains are uniform on
    [-gain_bound, gain_bound] with |g| < 1e-6 redrawn; poles uniform on
    [0.5, 2.0]. If rho(|Q(0)|) >= 1 all Q gains are shrunk by 0.9/rho
    (flagged on the returned network). Deterministic for a fixed seed.
    """
    if p < 2 or not 1 <= k < p:
        raise ParameterError(f"need p >= 2 and 1 <= k < p, got p={p}, k={k}")
    if not gain_bound > 0:
        raise ParameterError(f"gain_bound must be positive, got {gain_bound}")
    rng = np.random.default_rng(seed)

    def draw_gain():
        g = rng.uniform(-gain_bound, gain_bound)
        while abs(g) < MIN_GAIN:
            g = rng.uniform(-gain_bound, gain_bound)
        return g

    gains = np.zeros((p, p))
    poles = np.ones((p, p))
    for i in range(p):
        indeg = int(rng.integers(1, k + 1))
        candidates = np.array([j for j in range(p) if j != i])
        cols = rng.choice(candidates, size=indeg, replace=False)
        for j in cols:
            gains[i, j] = draw_gain()
            poles[i, j] = rng.uniform(*POLE_RANGE)

    p_gains = np.array([draw_gain() for _ in range(p)])
    p_poles = rng.uniform(*POLE_RANGE, size=p)

    rescaled = False
    rho = spectral_radius(np.abs(gains / poles))
    if rho >= 1.0:
        gains *= SPECTRAL_TARGET / rho
        rescaled = True

    Q = tuple(
        tuple(
            TransferElement(gains[i, j], poles[i, j]) if gains[i, j] != 0.0 else ZERO_ELEMENT
            for j in range(p)
        )
        for i in range(p)
    )
    Pdiag = tuple(TransferElement(p_gains[i], p_poles[i]) for i in range(p))
    return Network(p=p, k=k, Q=Q, Pdiag=Pdiag, rescaled=rescaled)


RING_GAIN = 0.5


def ring_network(p: int) -> Network:
    """Directed ring 1 <- p and i <- i-1, steady-state gain 0.5 on every edge and input."""
    if p < 3:
        raise ParameterError(f"ring network needs p >= 3, got {p}")
    el = TransferElement(RING_GAIN, 1.0)
    rows = []
    for i in range(p):
        src = p - 1 if i == 0 else i - 1
        rows.append(tuple(el if j == src else ZERO_ELEMENT for j in range(p)))
    Pdiag = tuple(TransferElement(RING_GAIN, 1.0) for _ in range(p))
    return Network(p=p, k=1, Q=tuple(rows), Pdiag=Pdiag)


def _element_to_json(el: TransferElement):
    return None if el.is_zero else {"g": el.gain, "a": el.pole}


def to_dict(net: Network) -> dict:
    """JSON-ready dict: {"p", "k", "Q": [[{g,a}|null]], "P": [{g,a}]}; null = absent edge."""
    return {
        "p": net.p,
        "k": net.k,
        "Q": [[_element_to_json(el) for el in row] for row in net.Q],
        "P": [{"g": el.gain, "a": el.pole} for el in net.Pdiag],
    }


def from_dict(data: dict) -> Network:
    try:
        p = int(data["p"])
        k = int(data["k"])
        Q = tuple(
            tuple(
                ZERO_ELEMENT if cell is None else TransferElement(float(cell["g"]), float(cell["a"]))
                for cell in row
            )
            for row in data["Q"]
        )
        Pdiag = tuple(TransferElement(float(cell["g"]), float(cell["a"])) for cell in data["P"])
    except (KeyError, TypeError) as exc:
        raise ParameterError(f"malformed network JSON: {exc}") from exc
    if len(Q) != p or any(len(row) != p for row in Q) or len(Pdiag) != p:
        raise ParameterError("network JSON dimensions inconsistent with p")
    return Network(p=p, k=k, Q=Q, Pdiag=Pdiag)


def dumps(net: Network) -> str:
    return json.dumps(to_dict(net), indent=2)


def loads(text: str) -> Network:
    return from_dict(json.loads(text))
