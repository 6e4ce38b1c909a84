"""Iterative experiment design.

Each round applies l step inputs chosen by one of three strategies
(random, biased toward least-used inputs, targeted at rank-deficient
column subsets of the sensing matrix) and appends the steady-state
response, until every row's uniqueness certificate holds or the budget
runs out. Magnitudes are redrawn each round from [0.5, 1.5] so repeated
input sets still add independent data; at l = 1 a repeated input can
only rescale an existing column, so rounds then sample among inputs not
yet applied while any remain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .experiments import DataSet, ExperimentPlan, assemble_row_system, simulate
from .networks import Network
from .recovery import check_uniqueness, deficient_witness

MAGNITUDE_RANGE = (0.5, 1.5)

STRATEGIES = ("random", "biased", "targeted")


@dataclass(frozen=True)
class DesignState:
    """Accumulated data plus the design loop's bookkeeping."""

    data: DataSet | None
    usage: np.ndarray
    k: int
    l: int
    strategy: str
    rng_seed: int
    history: tuple  # one record dict per round
    succeeded: bool = False
    row_reports: tuple = field(default=(), compare=False)

    @property
    def m(self) -> int:
        return 0 if self.data is None else self.data.m


def choose_random(p: int, l: int, rng) -> tuple:
    """Uniform l-subset of {1..p}."""
    if not 1 <= l <= p:
        raise ParameterError(f"need 1 <= l <= p, got l={l}, p={p}")
    picks = rng.choice(p, size=l, replace=False)
    return tuple(sorted(int(i) + 1 for i in picks))


def choose_biased(usage, l: int, rng) -> tuple:
    """l-subset drawn without replacement, weights proportional to 1/(1 + usage)."""
    usage = np.asarray(usage, dtype=float)
    p = usage.size
    if not 1 <= l <= p:
        raise ParameterError(f"need 1 <= l <= p, got l={l}, p={p}")
    chosen = []
    weights = 1.0 / (1.0 + usage)
    available = list(range(p))
    for _ in range(l):
        w = weights[available]
        picked = rng.choice(len(available), p=w / w.sum())
        chosen.append(available.pop(int(picked)) + 1)
    return tuple(sorted(chosen))


def _row_reports(data: DataSet, k: int, tol):
    return tuple(
        check_uniqueness(sys.A1, sys.A2, k, tol)
        for sys in (assemble_row_system(data, i) for i in range(1, data.p + 1))
    )


def choose_targeted(state: DesignState, rng, tol=1e-8) -> tuple:
    """Target rank-deficient column subsets of the per-row sensing matrices.

    Witness columns map to states through each row system's col_map; each
    witness contributes its least-used state (ties to the lowest index).
    A row whose own input column is zero targets that input directly.

    Remaining slots break up confined application patterns: inputs whose
    whole usage falls in the same e experiments give input rows inside an
    e-dimensional coordinate subspace, so any group of more than e such
    inputs is linearly dependent and shows up as exactly the deficient
    subsets the certificate trips over. The fill drains the excess of
    each over-populated pattern group, then spreads the rest by least
    usage with least co-occurrence against this round's picks.
    """
    if state.data is None:
        raise ParameterError("targeted choice needs at least one prior experiment")
    p = state.data.p
    l = state.l
    reports = state.row_reports or _row_reports(state.data, state.k, tol)
    if all(report.unique for report in reports):
        return choose_biased(state.usage, l, rng)  # nothing left to target
    chosen: list = []
    for i, report in enumerate(reports, start=1):
        if len(chosen) >= l:
            break
        if report.unique:
            continue
        if not report.a2_full_rank:
            # the deficient block is the row's own input column
            states = [i]
        elif report.witness_informative:
            sys = assemble_row_system(state.data, i)
            states = [sys.col_map[c] for c in report.deficient_subset]
        else:
            # full-size subsets are all deficient while m is small; probe
            # at the size the projected system can actually support
            sys = assemble_row_system(state.data, i)
            probe = deficient_witness(sys.A1, sys.A2, state.k, tol)
            if probe is None:
                continue
            states = [sys.col_map[c] for c in probe]
        candidates = [s for s in states if s not in chosen]
        if not candidates:
            continue
        best = min(candidates, key=lambda s: (state.usage[s - 1], s))
        chosen.append(best)

    support = state.data.U != 0.0
    patterns = {s: tuple(np.nonzero(support[s - 1])[0]) for s in range(1, p + 1)}
    groups: dict = {}
    for s, pat in patterns.items():
        groups.setdefault(pat, []).append(s)
    excess = []
    for pat, members in groups.items():
        # a pattern over e experiments supports at most e confined inputs;
        # picking a member this round moves it out of the group, but the
        # picks land together in pattern+round, so cap them at e+1
        residual = [s for s in members if s not in chosen]
        need = len(residual) - len(pat)
        if need > 0 and len(pat) > 0:
            take = min(need, len(pat) + 1)
            excess.append((len(pat), -need, pat, sorted(residual, key=lambda s: (state.usage[s - 1], s))[:take]))
    excess.sort(key=lambda item: (item[0], item[1], item[2]))
    for _, _, _, picks in excess:
        for s in picks:
            if len(chosen) >= l:
                break
            chosen.append(s)

    cooc = support.astype(float) @ support.astype(float).T
    while len(chosen) < l:
        usage = state.usage.copy().astype(float)
        usage[[s - 1 for s in chosen]] = np.inf  # exclude already-chosen inputs
        least = np.min(usage)
        ties = np.nonzero(usage == least)[0]
        if len(ties) > 1 and chosen:
            overlap = cooc[np.ix_(ties, [s - 1 for s in chosen])].sum(axis=1)
            ties = ties[overlap == overlap.min()]
        picked = ties[int(rng.integers(len(ties)))]
        chosen.append(int(picked) + 1)
    return tuple(sorted(chosen))


def _choose(state: DesignState, p: int, rng, tol) -> tuple:
    if state.strategy == "random":
        inputs = choose_random(p, state.l, rng)
    elif state.strategy == "biased":
        inputs = choose_biased(state.usage, state.l, rng)
    elif state.strategy == "targeted":
        if state.data is None:
            inputs = choose_random(p, state.l, rng)  # bootstrap round
        else:
            inputs = choose_targeted(state, rng, tol)
    else:
        raise ParameterError(f"unknown strategy {state.strategy!r}; use one of {STRATEGIES}")
    if state.l == 1 and state.usage[inputs[0] - 1] > 0 and np.any(state.usage == 0):
        # a repeated single input rescales an existing column; pick a fresh one
        unapplied = np.nonzero(state.usage == 0)[0]
        inputs = (int(rng.choice(unapplied)) + 1,)
    return inputs


def run_design(
    net: Network,
    strategy: str,
    l: int,
    k: int,
    max_m: int,
    seed: int,
    tol=1e-8,
    stop_when_unique: bool = True,
):
    """Design loop engine; with stop_when_unique=False it runs all max_m
    rounds regardless (the BP benchmark needs every prefix length)."""
    if max_m < 1:
        raise ParameterError(f"max_m must be >= 1, got {max_m}")
    if strategy not in STRATEGIES:
        raise ParameterError(f"unknown strategy {strategy!r}; use one of {STRATEGIES}")
    p = net.p
    if not 1 <= l <= p:
        raise ParameterError(f"need 1 <= l <= p, got l={l}, p={p}")
    rng = np.random.default_rng(seed)
    state = DesignState(
        data=None,
        usage=np.zeros(p, dtype=int),
        k=k,
        l=l,
        strategy=strategy,
        rng_seed=seed,
        history=(),
    )
    plans: list = []
    m_required = None
    for round_no in range(1, max_m + 1):
        inputs = _choose(state, p, rng, tol)
        mags = {s: float(rng.uniform(*MAGNITUDE_RANGE)) for s in inputs}
        plans.append(ExperimentPlan.make(inputs, mags))
        data = simulate(net, plans)
        reports = _row_reports(data, k, tol)
        record = {
            "round": round_no,
            "inputs": list(inputs),
            "magnitudes": [mags[s] for s in inputs],
            "unique_rows": [r.unique for r in reports],
        }
        all_unique = all(r.unique for r in reports)
        state = DesignState(
            data=data,
            usage=data.usage.copy(),
            k=k,
            l=l,
            strategy=strategy,
            rng_seed=seed,
            history=state.history + (record,),
            succeeded=state.succeeded or all_unique,
            row_reports=reports,
        )
        if all_unique and m_required is None:
            m_required = round_no
            if stop_when_unique:
                return m_required, state
    return (m_required if m_required is not None else max_m), state


def run_until_unique(
    net: Network, strategy: str, l: int, k: int, max_m: int, seed: int, tol=1e-8
):
    """Design loop: add experiments until all p row certificates hold.

    Returns (m_required, final DesignState); when the budget max_m is hit
    first the state comes back with succeeded=False (no exception).
    """
    return run_design(net, strategy, l, k, max_m, seed, tol, stop_when_unique=True)


def history_jsonl(state: DesignState) -> str:
    """One JSON record per round."""
    return "\n".join(json.dumps(rec) for rec in state.history) + ("\n" if state.history else "")
