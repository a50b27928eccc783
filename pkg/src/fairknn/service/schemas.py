"""Request/response models for the query service."""
from __future__ import annotations

from pydantic import BaseModel, Field

from ..core import AttributeSchema
from ..pipeline import MethodResult


class QueryRequest(BaseModel):
    vector: list[float]
    k: int = Field(ge=0)
    constraints: dict[str, dict[str, int]]
    force_ilp: bool = False
    quota_boost: int = Field(default=1, ge=1)


class ViolationOut(BaseModel):
    attribute: str
    value: str
    expected: int
    got: int


class QueryResponse(BaseModel):
    status: str
    selected: list[int]
    cost: float
    solver: str
    verified: bool
    violations: list[ViolationOut]
    scanned: int
    n_candidates: int
    search_ms: float
    post_ms: float


class AttributeOut(BaseModel):
    name: str
    values: list[str]


class DatasetInfo(BaseModel):
    name: str
    n: int
    d: int
    m: int
    distance: str
    attributes: list[AttributeOut]
    partitions: int


class LoadRequest(BaseModel):
    name: str
    data_path: str
    index_path: str


def response_payload(res: MethodResult, schema: AttributeSchema) -> dict:
    """Shared shape for service responses and CLI output."""
    violations = [
        {
            "attribute": schema.names()[v.attr],
            "value": schema.values(v.attr)[v.value],
            "expected": v.expected,
            "got": v.got,
        }
        for v in res.verification.violations
    ]
    return {
        "status": res.selection.status,
        "selected": list(res.selection.selected),
        "cost": res.selection.cost,
        "solver": res.selection.solver,
        "verified": res.verification.ok,
        "violations": violations,
        "scanned": res.scanned,
        "n_candidates": res.n_candidates,
        "search_ms": res.search_time * 1e3,
        "post_ms": res.post_time * 1e3,
    }
