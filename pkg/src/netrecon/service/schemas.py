"""Pydantic request/response models for the HTTP service.

The network and dataset models double as the on-disk JSON formats, so the
CLI writes service responses to files verbatim.
"""

from __future__ import annotations

from typing import Optional

from pydantic import BaseModel, Field

from .. import networks
from ..experiments import DataSet, ExperimentPlan, dataset_from_arrays


class TransferElementModel(BaseModel):
    g: float
    a: float = Field(gt=0)


class NetworkModel(BaseModel):
    p: int
    k: int
    Q: list[list[Optional[TransferElementModel]]]
    P: list[TransferElementModel]

    @classmethod
    def from_network(cls, net: networks.Network) -> "NetworkModel":
        return cls.model_validate(networks.to_dict(net))

    def to_network(self) -> networks.Network:
        return networks.from_dict(self.model_dump())


class PlanModel(BaseModel):
    inputs: list[int]
    magnitudes: Optional[list[float]] = None

    def to_plan(self) -> ExperimentPlan:
        if self.magnitudes is None:
            return ExperimentPlan.make(self.inputs)
        pairs = dict(zip(self.inputs, self.magnitudes))
        return ExperimentPlan.make(self.inputs, pairs)


class DataSetModel(BaseModel):
    Y: list[list[float]]
    U: list[list[float]]
    usage: list[int]
    plans: list[PlanModel]

    @classmethod
    def from_dataset(cls, data: DataSet) -> "DataSetModel":
        return cls(
            Y=[[float(v) for v in row] for row in data.Y],
            U=[[float(v) for v in row] for row in data.U],
            usage=[int(v) for v in data.usage],
            plans=[
                PlanModel(inputs=list(p.inputs), magnitudes=list(p.magnitudes))
                for p in data.plans
            ],
        )

    def to_dataset(self) -> DataSet:
        return dataset_from_arrays(self.Y, self.U, [p.to_plan() for p in self.plans])


class RandomNetworkRequest(BaseModel):
    p: int
    k: int
    gain_bound: float = 0.5
    seed: int = 0


class RingNetworkRequest(BaseModel):
    p: int


class ValidateResponse(BaseModel):
    violations: list[str]


class SimulateRequest(BaseModel):
    network: NetworkModel
    plans: list[PlanModel]


class ReconstructRequest(BaseModel):
    dataset: DataSetModel
    k: int
    method: str = "l0"
    tol: float = 1e-8


class ReconstructResponse(BaseModel):
    Q: list[list[float]]
    P: list[list[float]]
    reports: list[dict]


class InferStructureRequest(BaseModel):
    network: NetworkModel
    perturbed: list[int]


class InferStructureResponse(BaseModel):
    q_hat: list[list[float]]
    p_hat: list[list[float]]
    q_hat_grid: list[str]
    constraint_grid: list[str]
    q_hat_support: list[list[int]]


class DesignRequest(BaseModel):
    network: NetworkModel
    strategy: str = "targeted"
    l: int = 1
    k: int = 1
    max_m: int = 100
    seed: int = 0
    tol: float = 1e-8


class DesignResponse(BaseModel):
    m_required: int
    succeeded: bool
    history: list[dict]


class BenchUniquenessRequest(BaseModel):
    p: int = 20
    k: int = 2
    trials: int = 100
    strategies: list[str] = ["random", "biased", "targeted"]
    l_range: Optional[list[int]] = None
    seed: int = 0
    gain_bound: float = 0.5
    max_m: Optional[int] = None
    tol: float = 1e-8


class BenchCoherenceRequest(BaseModel):
    p: int = 20
    k: int = 2
    gain_bounds: list[float] = [0.5, 2.0]
    trials: int = 100
    seed: int = 0
    m_range: Optional[list[int]] = None
    inputs_per_experiment: int = 4


class BenchBPRequest(BaseModel):
    p: int = 20
    k: int = 2
    l: int = 4
    trials: int = 100
    strategies: list[str] = ["random", "biased", "targeted"]
    seed: int = 0
    m_max: Optional[int] = None
    gain_bound: float = 0.5
    tol: float = 1e-8


class BenchTableResponse(BaseModel):
    columns: list[str]
    rows: list[dict]
    csv: str
