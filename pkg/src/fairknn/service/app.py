"""FastAPI application serving fairness-constrained k-NN queries.

The service holds named (dataset, index) pairs in memory; both are
immutable after load, so request handling needs no locking. The CLI
`query --server` talks to these endpoints.
"""
from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from ..core import FairnessSpec, Query
from ..datasets import Dataset, ingest
from ..index_io import FairIndex, IndexFormatError, load_index
from ..pipeline import answer_query
from .schemas import (AttributeOut, DatasetInfo, LoadRequest, QueryRequest, QueryResponse,
                      response_payload)


class IndexStore:
    """Named dataset + index pairs served by the app."""

    def __init__(self) -> None:
        self._entries: dict[str, tuple[Dataset, FairIndex]] = {}

    def add(self, name: str, ds: Dataset, index: FairIndex) -> None:
        index.check_dataset(ds)
        self._entries[name] = (ds, index)

    def load(self, name: str, data_path: str, index_path: str) -> None:
        self.add(name, ingest(data_path), load_index(index_path))

    def get(self, name: str) -> tuple[Dataset, FairIndex] | None:
        return self._entries.get(name)

    def names(self) -> list[str]:
        return sorted(self._entries)


def _info(name: str, ds: Dataset, index: FairIndex) -> DatasetInfo:
    return DatasetInfo(
        name=name, n=ds.n, d=ds.d, m=ds.schema.m, distance=str(ds.kind),
        attributes=[AttributeOut(name=a, values=list(ds.schema.values(j)))
                    for j, a in enumerate(ds.schema.names())],
        partitions=len(index.partitions))


def create_app(store: IndexStore | None = None) -> FastAPI:
    app = FastAPI(title="fairknn", description="fairness-constrained k-NN query service")
    app.state.store = store if store is not None else IndexStore()

    def _get(name: str) -> tuple[Dataset, FairIndex]:
        entry = app.state.store.get(name)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"no dataset named {name!r}")
        return entry

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.get("/datasets", response_model=list[DatasetInfo])
    def list_datasets() -> list[DatasetInfo]:
        return [_info(name, *app.state.store.get(name)) for name in app.state.store.names()]

    @app.get("/datasets/{name}", response_model=DatasetInfo)
    def dataset_info(name: str) -> DatasetInfo:
        return _info(name, *_get(name))

    @app.post("/datasets", response_model=DatasetInfo, status_code=201)
    def load_dataset(req: LoadRequest) -> DatasetInfo:
        try:
            app.state.store.load(req.name, req.data_path, req.index_path)
        except FileNotFoundError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except (IndexFormatError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return _info(req.name, *_get(req.name))

    @app.post("/datasets/{name}/query", response_model=QueryResponse)
    def run_query(name: str, req: QueryRequest) -> QueryResponse:
        ds, index = _get(name)
        try:
            spec = FairnessSpec.from_names(ds.schema, req.k, req.constraints)
            vector = np.asarray(req.vector, dtype=np.float64)
            if vector.shape != (ds.d,):
                raise ValueError(f"vector must have dimension {ds.d}, got {vector.shape[0]}")
            query = Query(vector, spec)
            res = answer_query(ds, index, query, force_ilp=req.force_ilp,
                               quota_boost=req.quota_boost)
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return QueryResponse(**response_payload(res, ds.schema))

    return app
