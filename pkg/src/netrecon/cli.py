"""Command-line client for the netrecon service.

Every subcommand builds a request, posts it to the service (in-process
by default, or a remote base URL via --server), and writes the response
to --out. Exit codes: 0 success, 1 parameter error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import asyncio
import csv
import io
import json
import sys
from pathlib import Path

import httpx

from .errors import ParameterError


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on bad usage; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _post(path: str, payload: dict, server: str | None):
    if server:
        return httpx.post(server.rstrip("/") + path, json=payload, timeout=None)

    async def _run():
        from .service.app import app

        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(
            transport=transport, base_url="http://netrecon.local", timeout=None
        ) as client:
            return await client.post(path, json=payload)

    return asyncio.run(_run())


def _call(path: str, payload: dict, server: str | None):
    """Post and return (exit_code, body dict or None)."""
    try:
        response = _post(path, payload, server)
    except httpx.HTTPError as exc:
        print(f"error: cannot reach service: {exc}", file=sys.stderr)
        return 2, None
    if response.status_code == 200:
        return 0, response.json()
    try:
        body = response.json()
    except ValueError:
        body = {"detail": response.text}
    detail = body.get("detail", body)
    print(f"error: {detail}", file=sys.stderr)
    if response.status_code == 400:
        return 1, None
    return 2, None


def _write_text(text: str, out: str | None):
    if out is None or out == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)


def _matrix_csv(M) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"col_{j + 1}" for j in range(len(M[0]))])
    for row in M:
        writer.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ParameterError(f"cannot read JSON from {path}: {exc}") from exc


def _csv_to_matrix(path: Path):
    rows = list(csv.reader(io.StringIO(path.read_text())))
    return [[float(v) for v in row] for row in rows[1:]]


def _int_list(text: str):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ParameterError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ParameterError(f"expected comma-separated reals, got {text!r}") from exc


def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed")
    common.add_argument("--out", default=None, help="output path ('-' = stdout)")
    common.add_argument("--tol", type=float, default=1e-8, help="rank tolerance")
    common.add_argument("--server", default=None, help="base URL of a running service")

    parser = _Parser(prog="netrecon", description="sparse network reconstruction toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    gen = sub.add_parser("generate", parents=[common], help="generate a network as JSON")
    gen.add_argument("--ring", type=int, default=None, metavar="P", help="ring network of size P")
    gen.add_argument("--p", type=int, default=None)
    gen.add_argument("--k", type=int, default=2)
    gen.add_argument("--gain-bound", type=float, default=0.5)

    sim = sub.add_parser("simulate", parents=[common], help="simulate steady-state experiments")
    sim.add_argument("--network", required=True, help="network JSON file")
    sim.add_argument("--plans", required=True, help="plans JSON file")

    rec = sub.add_parser("reconstruct", parents=[common], help="reconstruct (Q, P) from a dataset")
    rec.add_argument("--dataset", required=True, help="directory with Y.csv, U.csv, plans.json")
    rec.add_argument("--k", type=int, required=True)
    rec.add_argument("--method", choices=["l0", "bp"], default="l0")

    inf = sub.add_parser("infer-structure", parents=[common], help="resolution-change inference")
    inf.add_argument("--network", required=True, help="network JSON file")
    inf.add_argument("--perturbed", required=True, help="comma-separated perturbed states")

    des = sub.add_parser("design", parents=[common], help="iterative experiment design")
    des.add_argument("--network", required=True, help="network JSON file")
    des.add_argument("--strategy", choices=["random", "biased", "targeted"], default="targeted")
    des.add_argument("--l", type=int, default=1)
    des.add_argument("--k", type=int, default=1)
    des.add_argument("--max-m", type=int, default=100)

    bu = sub.add_parser("bench-uniqueness", parents=[common], help="experiments-until-unique sweep")
    bu.add_argument("--p", type=int, default=None)
    bu.add_argument("--k", type=int, default=2)
    bu.add_argument("--trials", type=int, default=None)
    bu.add_argument("--strategies", default="random,biased,targeted")
    bu.add_argument("--l-range", default=None, help="comma-separated l values")
    bu.add_argument("--gain-bound", type=float, default=0.5)
    bu.add_argument("--max-m", type=int, default=None)
    bu.add_argument("--fast", action="store_true", help="fast profile (p=10, trials=25)")

    bc = sub.add_parser("bench-coherence", parents=[common], help="coherence vs gain sweep")
    bc.add_argument("--p", type=int, default=None)
    bc.add_argument("--k", type=int, default=2)
    bc.add_argument("--trials", type=int, default=None)
    bc.add_argument("--gain-bounds", default="0.5,2.0")
    bc.add_argument("--m-range", default=None, help="comma-separated m values")
    bc.add_argument("--inputs", type=int, default=4, help="inputs per experiment")
    bc.add_argument("--fast", action="store_true")

    bb = sub.add_parser("bench-bp", parents=[common], help="basis-pursuit success sweep")
    bb.add_argument("--p", type=int, default=None)
    bb.add_argument("--k", type=int, default=2)
    bb.add_argument("--l", type=int, default=4)
    bb.add_argument("--trials", type=int, default=None)
    bb.add_argument("--strategies", default="random,biased,targeted")
    bb.add_argument("--m-max", type=int, default=None)
    bb.add_argument("--gain-bound", type=float, default=0.5)
    bb.add_argument("--fast", action="store_true")

    srv = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)

    return parser


def _profile(args, key_p="p", key_trials="trials"):
    fast = getattr(args, "fast", False)
    p = getattr(args, key_p)
    trials = getattr(args, key_trials)
    if p is None:
        p = 10 if fast else 20
    if trials is None:
        trials = 25 if fast else 100
    return p, trials


def _cmd_generate(args):
    if args.ring is not None:
        code, body = _call("/networks/ring", {"p": args.ring}, args.server)
    else:
        if args.p is None:
            print("error: need --ring P or --p P", file=sys.stderr)
            return 1
        code, body = _call(
            "/networks/random",
            {"p": args.p, "k": args.k, "gain_bound": args.gain_bound, "seed": args.seed},
            args.server,
        )
    if code:
        return code
    _write_text(json.dumps(body, indent=2), args.out)
    return 0


def _cmd_simulate(args):
    network = _read_json(args.network)
    plans = _read_json(args.plans)
    code, body = _call(
        "/simulate", {"network": network, "plans": plans.get("plans", plans)}, args.server
    )
    if code:
        return code
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "Y.csv").write_text(_matrix_csv(body["Y"]))
    (outdir / "U.csv").write_text(_matrix_csv(body["U"]))
    (outdir / "plans.json").write_text(json.dumps({"plans": body["plans"]}, indent=2))
    print(f"wrote Y.csv, U.csv, plans.json to {outdir}")
    return 0


def _load_dataset_dir(path: str) -> dict:
    d = Path(path)
    try:
        Y = _csv_to_matrix(d / "Y.csv")
        U = _csv_to_matrix(d / "U.csv")
        plans = _read_json(str(d / "plans.json"))["plans"]
    except (OSError, ValueError, KeyError, IndexError) as exc:
        raise ParameterError(f"cannot load dataset from {path}: {exc}") from exc
    usage = [0] * len(Y)
    for plan in plans:
        for s in plan["inputs"]:
            usage[s - 1] += 1
    return {"Y": Y, "U": U, "usage": usage, "plans": plans}


def _cmd_reconstruct(args):
    dataset = _load_dataset_dir(args.dataset)
    code, body = _call(
        "/reconstruct",
        {"dataset": dataset, "k": args.k, "method": args.method, "tol": args.tol},
        args.server,
    )
    if code:
        return code
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "qhat.csv").write_text(_matrix_csv(body["Q"]))
    (outdir / "phat.csv").write_text(_matrix_csv(body["P"]))
    (outdir / "report.json").write_text(json.dumps(body["reports"], indent=2))
    print(f"wrote qhat.csv, phat.csv, report.json to {outdir}")
    return 0


def _cmd_infer_structure(args):
    network = _read_json(args.network)
    code, body = _call(
        "/structure/infer",
        {"network": network, "perturbed": _int_list(args.perturbed)},
        args.server,
    )
    if code:
        return code
    outdir = Path(args.out or ".")
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "qhat_grid.txt").write_text("\n".join(body["q_hat_grid"]) + "\n")
    (outdir / "constraint_grid.txt").write_text("\n".join(body["constraint_grid"]) + "\n")
    (outdir / "structure.json").write_text(json.dumps(body, indent=2))
    print(f"wrote qhat_grid.txt, constraint_grid.txt, structure.json to {outdir}")
    return 0


def _cmd_design(args):
    network = _read_json(args.network)
    code, body = _call(
        "/design/run",
        {
            "network": network,
            "strategy": args.strategy,
            "l": args.l,
            "k": args.k,
            "max_m": args.max_m,
            "seed": args.seed,
            "tol": args.tol,
        },
        args.server,
    )
    if code:
        return code
    lines = "\n".join(json.dumps(rec) for rec in body["history"])
    _write_text(lines + "\n", args.out)
    if args.out not in (None, "-"):
        print(f"m_required={body['m_required']} succeeded={body['succeeded']}")
    return 0


def _cmd_bench_uniqueness(args):
    p, trials = _profile(args)
    payload = {
        "p": p,
        "k": args.k,
        "trials": trials,
        "strategies": args.strategies.split(","),
        "seed": args.seed,
        "gain_bound": args.gain_bound,
        "tol": args.tol,
    }
    if args.l_range:
        payload["l_range"] = _int_list(args.l_range)
    if args.max_m:
        payload["max_m"] = args.max_m
    code, body = _call("/bench/uniqueness", payload, args.server)
    if code:
        return code
    _write_text(body["csv"], args.out)
    return 0


def _cmd_bench_coherence(args):
    p, trials = _profile(args)
    payload = {
        "p": p,
        "k": args.k,
        "trials": trials,
        "gain_bounds": _float_list(args.gain_bounds),
        "seed": args.seed,
        "inputs_per_experiment": args.inputs,
    }
    if args.m_range:
        payload["m_range"] = _int_list(args.m_range)
    code, body = _call("/bench/coherence", payload, args.server)
    if code:
        return code
    _write_text(body["csv"], args.out)
    return 0


def _cmd_bench_bp(args):
    p, trials = _profile(args)
    payload = {
        "p": p,
        "k": args.k,
        "l": args.l,
        "trials": trials,
        "strategies": args.strategies.split(","),
        "seed": args.seed,
        "gain_bound": args.gain_bound,
        "tol": args.tol,
    }
    if args.m_max:
        payload["m_max"] = args.m_max
    code, body = _call("/bench/bp", payload, args.server)
    if code:
        return code
    _write_text(body["csv"], args.out)
    return 0


def _cmd_serve(args):
    import uvicorn

    uvicorn.run("netrecon.service.app:app", host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "generate": _cmd_generate,
    "simulate": _cmd_simulate,
    "reconstruct": _cmd_reconstruct,
    "infer-structure": _cmd_infer_structure,
    "design": _cmd_design,
    "bench-uniqueness": _cmd_bench_uniqueness,
    "bench-coherence": _cmd_bench_coherence,
    "bench-bp": _cmd_bench_bp,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:  # argparse --help or usage errors
        return int(exc.code or 0)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint():
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
