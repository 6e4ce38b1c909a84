import json

import numpy as np
import pytest

from netrecon import networks
from netrecon.cli import main
from netrecon.experiments import ExperimentPlan, load_dataset, simulate


def run_cli(capsys, *args):
    code = main(list(args))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_generate_ring_matches_library(tmp_path, capsys):
    out = tmp_path / "ring.json"
    code, _, _ = run_cli(capsys, "generate", "--ring", "6", "--out", str(out))
    assert code == 0
    assert json.loads(out.read_text()) == networks.to_dict(networks.ring_network(6))


def test_generate_random_to_stdout(capsys):
    code, stdout, _ = run_cli(capsys, "generate", "--p", "5", "--k", "2", "--seed", "3")
    assert code == 0
    net = networks.from_dict(json.loads(stdout))
    assert networks.validate(net) == []


def test_generate_bad_params_exit_1(capsys):
    code, _, err = run_cli(capsys, "generate", "--ring", "2")
    assert code == 1
    assert "error" in err.lower()


def test_unknown_subcommand_exit_1(capsys):
    code, _, err = run_cli(capsys, "frobnicate")
    assert code == 1


def test_missing_subcommand_exit_1(capsys):
    assert run_cli(capsys)[0] == 1


def test_simulate_writes_dataset(tmp_path, capsys):
    netfile = tmp_path / "net.json"
    netfile.write_text(networks.dumps(networks.ring_network(4)))
    plansfile = tmp_path / "plans.json"
    plansfile.write_text(json.dumps({"plans": [{"inputs": [1]}, {"inputs": [2]}]}))
    outdir = tmp_path / "data"
    code, _, _ = run_cli(
        capsys, "simulate", "--network", str(netfile), "--plans", str(plansfile), "--out", str(outdir)
    )
    assert code == 0
    data = load_dataset(outdir)
    local = simulate(networks.ring_network(4), [ExperimentPlan.make([1]), ExperimentPlan.make([2])])
    assert np.allclose(data.Y, local.Y)
    assert np.allclose(data.U, local.U)


def test_reconstruct_end_to_end(tmp_path, capsys):
    net = networks.random_network(5, 2, 0.5, seed=6)
    netfile = tmp_path / "net.json"
    netfile.write_text(networks.dumps(net))
    plansfile = tmp_path / "plans.json"
    plansfile.write_text(json.dumps({"plans": [{"inputs": [s]} for s in range(1, 6)]}))
    datadir = tmp_path / "data"
    assert run_cli(capsys, "simulate", "--network", str(netfile), "--plans", str(plansfile), "--out", str(datadir))[0] == 0
    outdir = tmp_path / "recon"
    code, _, _ = run_cli(
        capsys, "reconstruct", "--dataset", str(datadir), "--k", "2", "--out", str(outdir)
    )
    assert code == 0
    rows = (outdir / "qhat.csv").read_text().splitlines()
    Qhat = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    Q0, _ = networks.steady_gains(net)
    assert np.allclose(Qhat, Q0, atol=1e-6)
    reports = json.loads((outdir / "report.json").read_text())
    assert len(reports) == 5


def test_reconstruct_missing_dataset_exit_1(tmp_path, capsys):
    code, _, err = run_cli(capsys, "reconstruct", "--dataset", str(tmp_path / "nope"), "--k", "1")
    assert code == 1


def test_infer_structure_ring(tmp_path, capsys):
    netfile = tmp_path / "net.json"
    netfile.write_text(networks.dumps(networks.ring_network(6)))
    outdir = tmp_path / "structure"
    code, _, _ = run_cli(
        capsys, "infer-structure", "--network", str(netfile), "--perturbed", "1,2,3", "--out", str(outdir)
    )
    assert code == 0
    assert (outdir / "constraint_grid.txt").read_text() == "00????\nx00000\n0x0???\n00?0??\n00??0?\n00???0\n"
    qgrid = (outdir / "qhat_grid.txt").read_text().splitlines()
    assert qgrid[0] == "00x000"


def test_infer_structure_numerical_failure_exit_2(tmp_path, capsys):
    netfile = tmp_path / "net.json"
    singular = {
        "p": 3,
        "k": 1,
        "Q": [
            [None, None, {"g": 1.0, "a": 1.0}],
            [{"g": 0.5, "a": 1.0}, None, None],
            [{"g": 1.0, "a": 1.0}, None, None],
        ],
        "P": [{"g": 0.5, "a": 1.0}] * 3,
    }
    netfile.write_text(json.dumps(singular))
    code, _, err = run_cli(capsys, "infer-structure", "--network", str(netfile), "--perturbed", "2")
    assert code == 2


def test_design_history_jsonl(tmp_path, capsys):
    netfile = tmp_path / "net.json"
    netfile.write_text(networks.dumps(networks.ring_network(5)))
    out = tmp_path / "history.jsonl"
    code, _, _ = run_cli(
        capsys,
        "design",
        "--network", str(netfile),
        "--strategy", "targeted",
        "--l", "1",
        "--k", "1",
        "--max-m", "30",
        "--seed", "2",
        "--out", str(out),
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 5  # ring needs every input once
    assert json.loads(lines[-1])["unique_rows"] == [True] * 5


def test_bench_uniqueness_csv(tmp_path, capsys):
    out = tmp_path / "table.csv"
    code, _, _ = run_cli(
        capsys,
        "bench-uniqueness",
        "--p", "5", "--k", "1", "--trials", "2", "--l-range", "1",
        "--strategies", "random",
        "--out", str(out),
    )
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "strategy,l,mean_m,sd_m,trials"
    assert lines[1].startswith("random,1,5.0,")


def test_bench_coherence_stdout(capsys):
    code, stdout, _ = run_cli(
        capsys, "bench-coherence", "--p", "5", "--k", "1", "--trials", "2",
        "--gain-bounds", "0.5", "--m-range", "1,2",
    )
    assert code == 0
    assert stdout.splitlines()[0] == "gain_bound,m,mean_mu"


def test_bench_bp_csv(tmp_path, capsys):
    out = tmp_path / "bp.csv"
    code, _, _ = run_cli(
        capsys, "bench-bp", "--p", "4", "--k", "1", "--l", "2", "--trials", "1",
        "--strategies", "targeted", "--m-max", "4", "--out", str(out),
    )
    assert code == 0
    assert out.read_text().splitlines()[0] == "strategy,m,success_rate"
