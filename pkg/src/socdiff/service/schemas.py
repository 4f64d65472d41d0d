"""Request/response bodies for the HTTP service.

The evaluation responses mirror the report JSON written by the CLI, so a
thin client can persist them without reshaping. `workers` is accepted on
requests but never echoed back: it changes scheduling, not results, and
reports must not depend on it.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..diffusion import KernelSpec


class DatasetUpload(BaseModel):
    items_text: str
    social_text: Optional[str] = None
    unknown_user_rule: Literal["skip", "add"] = "skip"
    # labels used in parse error messages, so clients can pass file paths
    items_name: str = "items"
    social_name: str = "social"


class SynthSpec(BaseModel):
    communities: int = 2
    users_per_community: int = 50
    items_per_community: int = 50
    intra_collect: float = 0.2
    inter_collect: float = 0.01
    intra_friend: float = 0.1
    inter_friend: float = 0.005
    seed: int = 0


class DatasetInfo(BaseModel):
    dataset_id: str
    origin: Literal["upload", "synth"]
    n_users: int
    n_items: int
    n_links: int
    n_social_links: int
    mean_user_degree: float
    mean_social_degree: float
    diagnostics: dict = {}


class KernelParams(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    method: Literal["md", "hc", "hybrid", "smd", "grm"]
    p: Optional[float] = None
    lam: Optional[float] = Field(None, alias="lambda")
    social_steps: int = 1
    friendless_rule: Literal["retain", "drop"] = "retain"

    def kernel(self) -> KernelSpec:
        # KernelSpec rejects inconsistent combinations (p without smd, ...)
        return KernelSpec(self.method, lam=self.lam, p=self.p,
                          social_steps=self.social_steps,
                          friendless_rule=self.friendless_rule)


class EvaluateRequest(KernelParams):
    probe_fraction: float = 0.1
    runs: int = 10
    master_seed: int = 0
    top_l: int = 20
    workers: Optional[int] = None


class SweepRequest(EvaluateRequest):
    grid: list[float]


class ColdstartRequest(BaseModel):
    method: Literal["smd", "grm"] = "smd"
    p: Optional[float] = None
    social_steps: int = 1
    friendless_rule: Literal["retain", "drop"] = "retain"
    max_degree: int = 3
    top_l: int = 20
    workers: Optional[int] = None

    @model_validator(mode="after")
    def _needs_p(self):
        if self.method == "smd" and self.p is None:
            raise ValueError("cold-start with method=smd requires p")
        return self

    def kernel(self) -> KernelSpec:
        if self.method == "grm":
            return KernelSpec("grm")
        return KernelSpec("smd", p=self.p, social_steps=self.social_steps,
                          friendless_rule=self.friendless_rule)


class VerifyRequest(BaseModel):
    seed: int = 0
    instances: int = 50
    friendless_rule: Literal["retain", "drop"] = "retain"


class MetricsBody(BaseModel):
    rs: float
    precision: float
    inter_diversity: float
    intra_diversity: float
    coverage: float
    novelty: float
    congestion: float
    l: int
    users_evaluated: float


class EvaluationResponse(BaseModel):
    config: dict
    mean: MetricsBody
    runs: list[MetricsBody]
    run_seeds: list[int]


class SweepPointBody(BaseModel):
    parameter: float
    mean: MetricsBody
    runs: list[MetricsBody]


class SweepResponse(BaseModel):
    config: dict
    optimal_parameter: float
    points: list[SweepPointBody]
    run_seeds: list[int]


class ColdstartResponse(BaseModel):
    config: dict
    smd: MetricsBody
    grm: MetricsBody
    improvements: dict[str, Optional[float]]
    selected_users: list[int]
    excluded_no_friends: int
    excluded_no_links: int
    lost_mass: float


class PropertyBody(BaseModel):
    name: str
    passed: bool
    detail: str


class VerifyResponse(BaseModel):
    passed: bool
    results: list[PropertyBody]


class DegreeHistogram(BaseModel):
    kind: Literal["collection", "popularity", "social"]
    histogram: dict[str, int]


class ExportBody(BaseModel):
    items_text: str
    social_text: str


class HealthResponse(BaseModel):
    status: str = "ok"
    version: str
