import numpy as np
import pytest

from fairknn import AttributeSchema, Dataset, DistanceKind, FairnessSpec

GENDER = ("Male", "Female", "Non-binary")
RACE = ("White", "Black", "Hispanic", "Asian", "Indigenous", "Mixed")
AGE = ("<30", "30-50", ">50")

# the running bus-driver example: 10 records, schema sizes (3, 6, 3)
DRIVER_ROWS = [
    (1, "Male", "White", "30-50"),
    (2, "Female", "Black", "<30"),
    (3, "Non-binary", "Hispanic", ">50"),
    (4, "Female", "Asian", "30-50"),
    (5, "Male", "Hispanic", "<30"),
    (6, "Female", "White", ">50"),
    (7, "Male", "Black", "30-50"),
    (8, "Non-binary", "White", "<30"),
    (9, "Female", "Indigenous", ">50"),
    (10, "Male", "Mixed", "30-50"),
]


def driver_schema() -> AttributeSchema:
    return AttributeSchema.of(("Gender", GENDER), ("Race", RACE), ("Age", AGE))


def driver_dataset() -> Dataset:
    schema = driver_schema()
    ids = np.array([r[0] for r in DRIVER_ROWS], dtype=np.int64)
    attrs = np.array(
        [[GENDER.index(g), RACE.index(r), AGE.index(a)] for _, g, r, a in DRIVER_ROWS],
        dtype=np.int64)
    # simple 2-d embeddings: record i sits at (i, 0), so distance to the
    # origin equals the id and orderings are easy to reason about
    emb = np.array([[float(r[0]), 0.0] for r in DRIVER_ROWS])
    return Dataset(schema, DistanceKind.euclidean(), ids, emb, attrs)


@pytest.fixture
def drivers() -> Dataset:
    return driver_dataset()


@pytest.fixture
def gender_race_spec() -> FairnessSpec:
    # k=5: two Male / three Female, four Hispanic / one White
    return FairnessSpec(5, {0: {0: 2, 1: 3}, 1: {2: 4, 0: 1}})
