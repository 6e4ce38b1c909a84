"""FastAPI service wrapping the core package.

Parameter problems map to HTTP 400 and numerical failures to 422, so
thin clients can translate them straight into exit codes.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import bench, design, networks, recovery, structure
from ..errors import NumericalError, ParameterError
from ..experiments import simulate
from . import schemas


def create_app() -> FastAPI:
    app = FastAPI(title="netrecon", version="0.1.0")

    @app.exception_handler(ParameterError)
    def _parameter_error(request: Request, exc: ParameterError):
        return JSONResponse(status_code=400, content={"kind": "parameter", "detail": str(exc)})

    @app.exception_handler(RequestValidationError)
    def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"kind": "parameter", "detail": str(exc)})

    @app.exception_handler(NumericalError)
    def _numerical_error(request: Request, exc: NumericalError):
        return JSONResponse(status_code=422, content={"kind": "numerical", "detail": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/networks/random", response_model=schemas.NetworkModel)
    def random_network(req: schemas.RandomNetworkRequest):
        net = networks.random_network(req.p, req.k, req.gain_bound, req.seed)
        return schemas.NetworkModel.from_network(net)

    @app.post("/networks/ring", response_model=schemas.NetworkModel)
    def ring_network(req: schemas.RingNetworkRequest):
        return schemas.NetworkModel.from_network(networks.ring_network(req.p))

    @app.post("/networks/validate", response_model=schemas.ValidateResponse)
    def validate_network(req: schemas.NetworkModel):
        return schemas.ValidateResponse(violations=networks.validate(req.to_network()))

    @app.post("/simulate", response_model=schemas.DataSetModel)
    def simulate_experiments(req: schemas.SimulateRequest):
        data = simulate(req.network.to_network(), [p.to_plan() for p in req.plans])
        return schemas.DataSetModel.from_dataset(data)

    @app.post("/reconstruct", response_model=schemas.ReconstructResponse)
    def reconstruct(req: schemas.ReconstructRequest):
        data = req.dataset.to_dataset()
        Qhat, Phat, reports = recovery.reconstruct_network(data, req.k, req.method, req.tol)
        return schemas.ReconstructResponse(
            Q=[[float(v) for v in row] for row in Qhat],
            P=[[float(v) for v in row] for row in Phat],
            reports=[r.to_dict() for r in reports],
        )

    @app.post("/structure/infer", response_model=schemas.InferStructureResponse)
    def infer_structure(req: schemas.InferStructureRequest):
        net = req.network.to_network()
        Q0, P0 = networks.steady_gains(net)
        part = structure.Partition.from_perturbed(req.perturbed, net.p)
        Qhat, Phat = structure.particular_solution(Q0, P0, part)
        qhat1 = structure.identifiable_block_pattern(Q0, P0, part)
        constraints = structure.constraint_matrix(qhat1, part)
        qhat_pattern = structure.StructurePattern.from_gains(Qhat)
        return schemas.InferStructureResponse(
            q_hat=[[float(v) for v in row] for row in Qhat],
            p_hat=[[float(v) for v in row] for row in Phat],
            q_hat_grid=qhat_pattern.to_grid().split("\n"),
            constraint_grid=constraints.to_grid().split("\n"),
            q_hat_support=[list(ij) for ij in sorted(qhat_pattern.support())],
        )

    @app.post("/design/run", response_model=schemas.DesignResponse)
    def run_design(req: schemas.DesignRequest):
        net = req.network.to_network()
        m_required, state = design.run_until_unique(
            net, req.strategy, req.l, req.k, req.max_m, req.seed, req.tol
        )
        return schemas.DesignResponse(
            m_required=m_required, succeeded=state.succeeded, history=list(state.history)
        )

    @app.post("/bench/uniqueness", response_model=schemas.BenchTableResponse)
    def bench_uniqueness(req: schemas.BenchUniquenessRequest):
        rows = bench.bench_uniqueness(
            req.p,
            req.k,
            req.trials,
            strategies=req.strategies,
            l_range=req.l_range,
            seed=req.seed,
            gain_bound=req.gain_bound,
            max_m=req.max_m,
            tol=req.tol,
        )
        return schemas.BenchTableResponse(
            columns=bench.UNIQUENESS_COLUMNS,
            rows=rows,
            csv=bench.rows_to_csv(rows, bench.UNIQUENESS_COLUMNS),
        )

    @app.post("/bench/coherence", response_model=schemas.BenchTableResponse)
    def bench_coherence(req: schemas.BenchCoherenceRequest):
        rows = bench.bench_coherence(
            req.p,
            req.k,
            gain_bounds=req.gain_bounds,
            trials=req.trials,
            seed=req.seed,
            m_range=req.m_range,
            inputs_per_experiment=req.inputs_per_experiment,
        )
        return schemas.BenchTableResponse(
            columns=bench.COHERENCE_COLUMNS,
            rows=rows,
            csv=bench.rows_to_csv(rows, bench.COHERENCE_COLUMNS),
        )

    @app.post("/bench/bp", response_model=schemas.BenchTableResponse)
    def bench_bp(req: schemas.BenchBPRequest):
        rows = bench.bench_bp(
            req.p,
            req.k,
            l=req.l,
            trials=req.trials,
            strategies=req.strategies,
            seed=req.seed,
            m_max=req.m_max,
            gain_bound=req.gain_bound,
            tol=req.tol,
        )
        return schemas.BenchTableResponse(
            columns=bench.BP_COLUMNS,
            rows=rows,
            csv=bench.rows_to_csv(rows, bench.BP_COLUMNS),
        )

    return app


app = create_app()
