import numpy as np
import pytest

from netrecon.errors import ParameterError, ResolutionSingularityError
from netrecon.experiments import ExperimentPlan, simulate
from netrecon.networks import random_network, ring_network, steady_gains
from netrecon.structure import (
    NONZERO,
    UNKNOWN,
    ZERO,
    Partition,
    StructurePattern,
    cancellation_risk,
    constraint_matrix,
    hat_q21,
    identifiable_block_pattern,
    m_dsf,
    particular_solution,
)

RING_QC_GRID = "00????\nx00000\n0x0???\n00?0??\n00??0?\n00???0"


def support_of(M, tol=1e-9):
    return {(i + 1, j + 1) for i, j in zip(*np.nonzero(np.abs(np.asarray(M)) > tol))}


def max_row_sparsity(M, tol=1e-9):
    return int(np.max(np.sum(np.abs(np.asarray(M)) > tol, axis=1)))


def test_partition_construction():
    part = Partition.from_perturbed([3, 1], 5)
    assert part.perturbed == (1, 3)
    assert part.unperturbed == (2, 4, 5)
    assert part.p == 5
    with pytest.raises(ParameterError):
        Partition.from_perturbed([], 5)
    with pytest.raises(ParameterError):
        Partition.from_perturbed([0, 1], 5)
    with pytest.raises(ParameterError):
        Partition.from_perturbed([6], 5)


def test_pattern_grid_round_trip():
    pat = StructurePattern.from_grid("0x?\n?0x\nxx0")
    assert pat.entries[0, 1] == NONZERO
    assert pat.entries[1, 0] == UNKNOWN
    assert StructurePattern.from_grid(pat.to_grid()) == pat
    assert pat.support() == {(1, 2), (2, 3), (3, 1), (3, 2)}


def test_m_dsf_no_feedback_from_unperturbed():
    # when the perturbed block receives nothing back, nothing changes
    Q0 = np.array(
        [
            [0.0, 0.3, 0.0],
            [0.2, 0.0, 0.0],
            [0.4, 0.0, 0.0],
        ]
    )
    P0 = np.diag([1.0, 1.0, 1.0])
    part = Partition.from_perturbed([1, 2], 3)
    Qhat11, Phat11 = m_dsf(Q0, P0, part)
    assert np.allclose(Qhat11, Q0[:2, :2])
    assert np.allclose(Phat11, np.eye(2))


def test_m_dsf_ring_block():
    net = ring_network(6)
    Q0, P0 = steady_gains(net)
    part = Partition.from_perturbed([1, 2, 3], 6)
    Qhat11, _ = m_dsf(Q0, P0, part)
    assert support_of(Qhat11) == {(1, 3), (2, 1), (3, 2)}


def test_m_dsf_data_consistency_small():
    net = random_network(4, 2, 0.5, seed=5)
    Q0, P0 = steady_gains(net)
    part = Partition.from_perturbed([1, 2], 4)
    Qhat11, Phat11 = m_dsf(Q0, P0, part)
    plans = [ExperimentPlan.make([1], 0.9), ExperimentPlan.make([2], 1.2)]
    data = simulate(net, plans)
    Y1 = data.Y[:2]
    U1 = data.U[:2]
    resid = np.linalg.norm(Y1 - Qhat11 @ Y1 - Phat11 @ U1) / np.linalg.norm(Y1)
    assert resid < 1e-9


def test_hat_q21_no_coupling():
    Q0 = np.array(
        [
            [0.0, 0.3, 0.0],
            [0.2, 0.0, 0.0],
            [0.4, 0.1, 0.0],
        ]
    )
    part = Partition.from_perturbed([1, 2], 3)
    assert np.allclose(hat_q21(Q0, part), Q0[2:, :2])


def test_hat_q21_ring_column_three():
    net = ring_network(6)
    Q0, _ = steady_gains(net)
    part = Partition.from_perturbed([1, 2, 3], 6)
    Q21h = hat_q21(Q0, part)
    # rows are states 4,5,6; all direct influence funnels through state 3
    assert {(i + 4, j + 1) for i, j in zip(*np.nonzero(np.abs(Q21h) > 1e-9))} == {
        (4, 3),
        (5, 3),
        (6, 3),
    }


def test_hat_q21_data_check():
    net = random_network(6, 2, 0.5, seed=8)
    Q0, _ = steady_gains(net)
    part = Partition.from_perturbed([1, 2, 3], 6)
    plans = [ExperimentPlan.make([s], 1.1) for s in (1, 2, 3)]
    data = simulate(net, plans)
    Y1, Y2 = data.Y[:3], data.Y[3:]
    Q21h = hat_q21(Q0, part)
    assert np.linalg.norm(Y2 - Q21h @ Y1) / np.linalg.norm(Y2) < 1e-9


def test_particular_solution_ring_support():
    net = ring_network(6)
    Q0, P0 = steady_gains(net)
    part = Partition.from_perturbed([1, 2, 3], 6)
    Qhat, Phat = particular_solution(Q0, P0, part)
    assert support_of(Qhat) == {(1, 3), (2, 1), (3, 2), (4, 3), (5, 3), (6, 3)}
    assert np.allclose(Qhat[:, 3:], 0.0)
    assert np.allclose(Phat[3:], 0.0)


def test_particular_solution_full_partition_identity():
    net = random_network(5, 2, 0.5, seed=3)
    Q0, P0 = steady_gains(net)
    part = Partition.from_perturbed(range(1, 6), 5)
    Qhat, Phat = particular_solution(Q0, P0, part)
    assert np.allclose(Qhat, Q0)
    assert np.allclose(Phat, P0)


def test_particular_solution_data_consistency_random():
    count = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(4, 9))
        net = random_network(p, 2, 0.5, seed)
        n_pert = int(rng.integers(1, p))
        perturbed = sorted(int(v) + 1 for v in rng.choice(p, size=n_pert, replace=False))
        part = Partition.from_perturbed(perturbed, p)
        Q0, P0 = steady_gains(net)
        try:
            Qhat, Phat = particular_solution(Q0, P0, part)
        except ResolutionSingularityError:
            continue
        plans = [
            ExperimentPlan.make([s], float(rng.uniform(0.5, 1.5))) for s in perturbed
        ]
        data = simulate(net, plans)
        resid = np.linalg.norm(data.Y - Qhat @ data.Y - Phat @ data.U)
        assert resid / np.linalg.norm(data.Y) < 1e-9
        count += 1
    assert count >= 95


def test_constraint_matrix_ring_example():
    net = ring_network(6)
    Q0, P0 = steady_gains(net)
    part = Partition.from_perturbed([1, 2, 3], 6)
    qhat1 = identifiable_block_pattern(Q0, P0, part)
    qc = constraint_matrix(qhat1, part)
    assert qc.to_grid() == RING_QC_GRID


def test_constraint_matrix_all_zero_block():
    part = Partition.from_perturbed([1, 2], 4)
    qhat1 = StructurePattern(entries=np.full((4, 2), ZERO, dtype=np.int8))
    qc = constraint_matrix(qhat1, part)
    assert np.all(qc.entries[:, :2] == ZERO)


def test_constraint_matrix_full_partition_copies_pattern():
    net = random_network(5, 2, 0.5, seed=17)
    Q0, P0 = steady_gains(net)
    part = Partition.from_perturbed(range(1, 6), 5)
    qhat1 = identifiable_block_pattern(Q0, P0, part)
    qc = constraint_matrix(qhat1, part)
    assert np.array_equal(qc.entries, qhat1.entries)


def test_constraint_matrix_dimension_mismatch():
    part = Partition.from_perturbed([1, 2], 4)
    with pytest.raises(ParameterError):
        constraint_matrix(StructurePattern(entries=np.zeros((3, 2), dtype=np.int8)), part)


def test_m_dsf_singular_unperturbed_block():
    # unit-gain loop inside the unperturbed block: (I - Q22) singular
    Q0 = np.array(
        [
            [0.0, 0.5, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 1.0, 0.0],
        ]
    )
    part = Partition.from_perturbed([1], 3)
    with pytest.raises(ResolutionSingularityError):
        m_dsf(Q0, np.eye(3), part)


def test_constraint_matrix_soundness_random():
    # every definite verdict must agree with the true coupling matrix
    sound = 0
    for seed in range(100):
        rng = np.random.default_rng(1000 + seed)
        p = int(rng.integers(4, 9))
        net = random_network(p, 2, 0.5, seed)
        n_pert = int(rng.integers(1, p + 1))
        perturbed = sorted(int(v) + 1 for v in rng.choice(p, size=n_pert, replace=False))
        part = Partition.from_perturbed(perturbed, p)
        Q0, P0 = steady_gains(net)
        if cancellation_risk(Q0, part):
            continue
        try:
            qhat1 = identifiable_block_pattern(Q0, P0, part)
        except ResolutionSingularityError:
            continue
        qc = constraint_matrix(qhat1, part)
        for i in range(p):
            for j in range(p):
                if qc.entries[i, j] == ZERO:
                    assert Q0[i, j] == 0.0, (seed, i + 1, j + 1)
                elif qc.entries[i, j] == NONZERO:
                    assert Q0[i, j] != 0.0, (seed, i + 1, j + 1)
        sound += 1
    assert sound >= 90


# --- resolution-change sparsity fixtures ----------------------------------

# a funnel: state 1 reads two unperturbed states that both trace back to
# state 2, so the reduced coupling is strictly sparser than the original
FUNNEL_Q = np.array(
    [
        [0.0, 0.0, 0.3, 0.4],
        [0.5, 0.0, 0.0, 0.0],
        [0.0, 0.4, 0.0, 0.0],
        [0.0, 0.3, 0.0, 0.0],
    ]
)

# a fan-in through two unperturbed hubs with disjoint ancestors, so one
# reduced row collects three sources and sparsity grows
FANOUT_Q = np.zeros((6, 6))
FANOUT_Q[0, 4] = 0.4  # 1 <- 5
FANOUT_Q[0, 5] = 0.3  # 1 <- 6
FANOUT_Q[1, 0] = 0.2  # 2 <- 1
FANOUT_Q[2, 1] = 0.2  # 3 <- 2
FANOUT_Q[3, 2] = 0.2  # 4 <- 3
FANOUT_Q[4, 1] = 0.3  # 5 <- 2
FANOUT_Q[4, 2] = 0.25  # 5 <- 3
FANOUT_Q[5, 3] = 0.35  # 6 <- 4


def test_resolution_can_decrease_sparsity():
    part = Partition.from_perturbed([1, 2], 4)
    Qhat, _ = particular_solution(FUNNEL_Q, np.eye(4), part)
    assert max_row_sparsity(FUNNEL_Q) == 2
    assert max_row_sparsity(Qhat) == 1
    # row 1 now reads only state 2
    assert support_of(Qhat[:2, :2]) == {(1, 2), (2, 1)}


def test_resolution_can_increase_sparsity():
    part = Partition.from_perturbed([1, 2, 3, 4], 6)
    Qhat, _ = particular_solution(FANOUT_Q, np.eye(6), part)
    assert max_row_sparsity(FANOUT_Q) == 2
    assert max_row_sparsity(Qhat) == 3
    # row 1 collects all three perturbed ancestors
    assert {(1, 2), (1, 3), (1, 4)} <= support_of(Qhat)


def test_cancellation_risk_detects_cancelling_paths():
    # direct path 1->3 exactly cancels the route through unperturbed state 2
    Q0 = np.array(
        [
            [0.0, 0.5, 0.25],
            [0.0, 0.0, -0.5],
            [0.5, 0.0, 0.0],
        ]
    )
    part = Partition.from_perturbed([1, 3], 3)
    assert cancellation_risk(Q0, part)
    net = ring_network(4)
    Q0r, _ = steady_gains(net)
    assert not cancellation_risk(Q0r, Partition.from_perturbed([1, 2], 4))
