"""Benchmark harness: seeded sweeps emitting plot-ready CSV tables.

Three batch experiments, each over random k-sparse networks:
  * experiments-until-unique per strategy and inputs-per-experiment l,
  * mean sensing-matrix coherence as gain magnitude and m grow,
  * basis-pursuit exact-support success rate per strategy and m.

Networks are shared across strategies and l within a trial index so the
comparisons are paired. All tables are bitwise reproducible for a fixed
seed.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass

import numpy as np

from .design import STRATEGIES, run_design, run_until_unique
from .errors import NumericalError, ParameterError
from .experiments import ExperimentPlan, assemble_row_system, simulate
from .networks import random_network, steady_gains
from .recovery import basis_pursuit, coherence

DEFAULT_GAIN_BOUND = 0.5  # keeps |Q(0)| and |P(0)| entries below 0.5
FIG_INPUTS_PER_EXPERIMENT = 4

# desk-scale profiles: full mirrors the reference protocol, fast keeps CI short
PROFILES = {
    "full": {"p": 20, "k": 2, "trials": 100},
    "fast": {"p": 10, "k": 2, "trials": 25},
}


def _sub_seed(*parts) -> int:
    return int(np.random.SeedSequence(tuple(int(x) for x in parts)).generate_state(1)[0])


def _trial_network(p, k, gain_bound, seed, trial):
    return random_network(p, k, gain_bound, _sub_seed(seed, 101, trial))


def bench_uniqueness(
    p: int,
    k: int,
    trials: int,
    strategies=STRATEGIES,
    l_range=None,
    seed: int = 0,
    gain_bound: float = DEFAULT_GAIN_BOUND,
    max_m: int | None = None,
    tol: float = 1e-8,
):
    """Mean and sd of experiments needed for all-row uniqueness, per (strategy, l)."""
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    if l_range is None:
        l_range = range(1, p + 1)
    if max_m is None:
        max_m = 5 * p
    nets = [_trial_network(p, k, gain_bound, seed, t) for t in range(trials)]
    rows = []
    for strategy in strategies:
        for l in l_range:
            ms = []
            for t, net in enumerate(nets):
                m_req, _ = run_until_unique(
                    net, strategy, l, k, max_m, _sub_seed(seed, 202, t, l), tol
                )
                ms.append(m_req)
            ms = np.array(ms, dtype=float)
            rows.append(
                {
                    "strategy": strategy,
                    "l": int(l),
                    "mean_m": float(ms.mean()),
                    "sd_m": float(ms.std(ddof=0)),
                    "trials": trials,
                }
            )
    return rows


def _random_plans(p, l, m, rng):
    plans = []
    for _ in range(m):
        picks = sorted(int(i) + 1 for i in rng.choice(p, size=l, replace=False))
        mags = {s: float(rng.uniform(0.5, 1.5)) for s in picks}
        plans.append(ExperimentPlan.make(picks, mags))
    return plans


def bench_coherence(
    p: int,
    k: int,
    gain_bounds=(0.5, 2.0),
    trials: int = 100,
    seed: int = 0,
    m_range=None,
    inputs_per_experiment: int = FIG_INPUTS_PER_EXPERIMENT,
):
    """Mean coherence of the per-row sensing matrices [A1 A2] against m."""
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    if m_range is None:
        m_range = range(1, 11)
    m_range = list(m_range)
    m_max = max(m_range)
    rows = []
    for bound in gain_bounds:
        sums = {m: 0.0 for m in m_range}
        counts = {m: 0 for m in m_range}
        for t in range(trials):
            net = random_network(p, k, float(bound), _sub_seed(seed, 303, t, int(bound * 1000)))
            rng = np.random.default_rng(_sub_seed(seed, 404, t, int(bound * 1000)))
            plans = _random_plans(p, inputs_per_experiment, m_max, rng)
            data = simulate(net, plans)
            for m in m_range:
                sub = _prefix(data, m)
                for i in range(1, p + 1):
                    sys = assemble_row_system(sub, i)
                    with warnings.catch_warnings():
                        # rows whose input was never applied have a zero A2
                        # column; exclusion is the documented behavior
                        warnings.simplefilter("ignore", UserWarning)
                        sums[m] += coherence(np.hstack([sys.A1, sys.A2]))
                    counts[m] += 1
        for m in m_range:
            rows.append(
                {"gain_bound": float(bound), "m": int(m), "mean_mu": sums[m] / counts[m]}
            )
    return rows


def _prefix(data, m):
    from .experiments import dataset_from_arrays

    return dataset_from_arrays(data.Y[:, :m], data.U[:, :m], data.plans[:m])


def _bp_support_success(net, data) -> bool:
    """Exact support recovery, no false positives, across every row."""
    Q0, _ = steady_gains(net)
    true_support = set(zip(*np.nonzero(Q0)))
    recovered = set()
    for i in range(1, data.p + 1):
        sys = assemble_row_system(data, i)
        A = np.hstack([sys.A1, sys.A2])
        try:
            x = basis_pursuit(A, sys.b, penalized=range(sys.A1.shape[1]))
        except NumericalError:
            return False
        for c in np.nonzero(x[: sys.A1.shape[1]])[0]:
            recovered.add((i - 1, sys.col_map[int(c)] - 1))
    return recovered == true_support


def _mean_row_coherence(data) -> float:
    total = 0.0
    for i in range(1, data.p + 1):
        sys = assemble_row_system(data, i)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            total += coherence(np.hstack([sys.A1, sys.A2]))
    return total / data.p


@dataclass(frozen=True)
class TrialRecord:
    """One network's trajectory under one strategy.

    bp_success[j] is 1 exactly when basis pursuit recovered every link of
    the network at m = j + 1 experiments with no false positives.
    """

    network_seed: int
    strategy: str
    l: int
    k: int
    p: int
    m_required: int
    coherence_trace: tuple  # (m, mean row coherence) pairs
    bp_success: tuple  # per-m exact-support flags


def run_bp_trial(net, network_seed, strategy, l, k, m_max, seed, tol=1e-8) -> TrialRecord:
    """Run one strategy trajectory to m_max rounds, scoring every prefix."""
    m_required, state = run_design(
        net, strategy, l, k, m_max, seed, tol, stop_when_unique=False
    )
    trace = []
    success = []
    for m in range(1, m_max + 1):
        sub = _prefix(state.data, m)
        trace.append((m, _mean_row_coherence(sub)))
        success.append(_bp_support_success(net, sub))
    return TrialRecord(
        network_seed=network_seed,
        strategy=strategy,
        l=l,
        k=k,
        p=net.p,
        m_required=m_required,
        coherence_trace=tuple(trace),
        bp_success=tuple(success),
    )


def bench_bp(
    p: int,
    k: int,
    l: int = FIG_INPUTS_PER_EXPERIMENT,
    trials: int = 100,
    strategies=STRATEGIES,
    seed: int = 0,
    m_max: int | None = None,
    gain_bound: float = DEFAULT_GAIN_BOUND,
    tol: float = 1e-8,
):
    """Basis-pursuit exact-recovery rate per (strategy, m): the strategy's
    experiment sequence is generated once per trial, then every prefix is
    reconstructed."""
    if trials < 1:
        raise ParameterError(f"trials must be >= 1, got {trials}")
    if m_max is None:
        m_max = p
    rows = []
    for strategy in strategies:
        success = np.zeros(m_max)
        for t in range(trials):
            net_seed = _sub_seed(seed, 101, t)
            net = random_network(p, k, gain_bound, net_seed)
            record = run_bp_trial(
                net, net_seed, strategy, l, k, m_max, _sub_seed(seed, 505, t), tol
            )
            success += np.array(record.bp_success, dtype=float)
        for m in range(1, m_max + 1):
            rows.append(
                {
                    "strategy": strategy,
                    "m": int(m),
                    "success_rate": float(success[m - 1] / trials),
                }
            )
    return rows


def rows_to_csv(rows, columns) -> str:
    """Render result rows as CSV (header row, '.' decimals, LF endings)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return value


UNIQUENESS_COLUMNS = ["strategy", "l", "mean_m", "sd_m", "trials"]
COHERENCE_COLUMNS = ["gain_bound", "m", "mean_mu"]
BP_COLUMNS = ["strategy", "m", "success_rate"]
