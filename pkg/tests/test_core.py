"""Distance family and domain-type behavior.

Expected values here are either hand-computable (3-4-5 triangle and
friends) or checked against an independently computed formula inside
the test.
"""
import math

import numpy as np
import pytest

from fairknn import AttributeSchema, DistanceKind, FairnessSpec, distance, distances
from fairknn.core import VectorRecord, count_values, validate_record


# ----------------------------------------------------------------- distances

def test_euclidean_345_triangle():
    assert distance(np.array([3.0, 4.0]), np.array([0.0, 0.0]), DistanceKind.euclidean()) == 5.0


def test_manhattan_hand_value():
    # |1-4| + |2-6| = 7
    assert distance(np.array([1.0, 2.0]), np.array([4.0, 6.0]), DistanceKind.manhattan()) == 7.0


def test_minkowski_3_hand_value():
    # (|0-1|^3 + |0-1|^3)^(1/3) = 2^(1/3)
    got = distance(np.array([0.0, 0.0]), np.array([1.0, 1.0]), DistanceKind.minkowski(3))
    assert got == pytest.approx(2.0 ** (1.0 / 3.0), abs=1e-12)


def test_minkowski_uses_absolute_differences():
    # negative coordinate differences with odd p would go complex without |.|
    got = distance(np.array([0.0, 0.0]), np.array([-2.0, -2.0]), DistanceKind.minkowski(3))
    assert got == pytest.approx(16.0 ** (1.0 / 3.0), abs=1e-12)
    assert got > 0.0


def test_minkowski_special_cases_match_named_kinds():
    rng = np.random.default_rng(11)
    pts = rng.normal(size=(64, 7))
    q = rng.normal(size=7)
    np.testing.assert_allclose(
        distances(pts, q, DistanceKind.minkowski(2)),
        distances(pts, q, DistanceKind.euclidean()), atol=1e-9)
    np.testing.assert_allclose(
        distances(pts, q, DistanceKind.minkowski(1)),
        distances(pts, q, DistanceKind.manhattan()), atol=1e-9)


def test_cosine_hand_values():
    kind = DistanceKind.cosine()
    e1 = np.array([1.0, 0.0])
    assert distance(e1, np.array([0.0, 1.0]), kind) == pytest.approx(1.0)
    assert distance(e1, np.array([5.0, 0.0]), kind) == pytest.approx(0.0)
    assert distance(e1, np.array([-3.0, 0.0]), kind) == pytest.approx(2.0)


def test_cosine_scale_invariance_and_range():
    rng = np.random.default_rng(12)
    pts = rng.normal(size=(50, 5))
    q = rng.normal(size=5)
    d1 = distances(pts, q, DistanceKind.cosine())
    d2 = distances(pts * 7.5, q * 0.01, DistanceKind.cosine())
    np.testing.assert_allclose(d1, d2, atol=1e-12)
    assert np.all(d1 >= 0.0) and np.all(d1 <= 2.0)


def test_cosine_zero_vector_is_an_error():
    kind = DistanceKind.cosine()
    with pytest.raises(ValueError):
        distance(np.array([0.0, 0.0]), np.array([1.0, 0.0]), kind)
    with pytest.raises(ValueError):
        distance(np.array([1.0, 0.0]), np.array([0.0, 0.0]), kind)


@pytest.mark.parametrize("kind", [
    DistanceKind.euclidean(), DistanceKind.manhattan(),
    DistanceKind.minkowski(3), DistanceKind.minkowski(1.5),
])
def test_metric_properties_on_random_triples(kind):
    rng = np.random.default_rng(13)
    for _ in range(50):
        x, y, z = rng.normal(size=(3, 6))
        dxy = distance(x, y, kind)
        assert dxy >= 0.0
        assert distance(x, x, kind) == 0.0
        assert dxy == pytest.approx(distance(y, x, kind), abs=1e-12)
        assert dxy <= distance(x, z, kind) + distance(z, y, kind) + 1e-9


def test_distances_matches_scalar_loop():
    rng = np.random.default_rng(14)
    pts = rng.normal(size=(20, 4))
    q = rng.normal(size=4)
    for kind in (DistanceKind.euclidean(), DistanceKind.manhattan(),
                 DistanceKind.cosine(), DistanceKind.minkowski(2.5)):
        vec = distances(pts, q, kind)
        ref = np.array([distance(p, q, kind) for p in pts])
        np.testing.assert_allclose(vec, ref, atol=1e-12)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError, match="dimension mismatch"):
        distances(np.zeros((3, 4)), np.zeros(5), DistanceKind.euclidean())


def test_distance_kind_parse_and_str():
    assert DistanceKind.parse("euclidean") == DistanceKind.euclidean()
    assert DistanceKind.parse("minkowski:3").p == 3.0
    assert DistanceKind.parse(str(DistanceKind.minkowski(2.5))) == DistanceKind.minkowski(2.5)
    with pytest.raises(ValueError):
        DistanceKind.parse("chebyshev")
    with pytest.raises(ValueError):
        DistanceKind.parse("minkowski")
    with pytest.raises(ValueError):
        DistanceKind.parse("euclidean:2")
    with pytest.raises(ValueError):
        DistanceKind.minkowski(0.0)
    with pytest.raises(ValueError):
        DistanceKind.minkowski(math.inf)


# -------------------------------------------------------------------- schema

def test_schema_accessors():
    schema = AttributeSchema.of(("Gender", ("Male", "Female")), ("Age", ("<30", "30+")))
    assert schema.m == 2
    assert schema.names() == ("Gender", "Age")
    assert schema.sizes() == (2, 2)
    assert schema.values(1) == ("<30", "30+")
    assert schema.attr_index("Age") == 1
    assert schema.value_index(0, "Female") == 1
    with pytest.raises(KeyError):
        schema.attr_index("Race")
    with pytest.raises(KeyError):
        schema.value_index(0, "Other")


def test_schema_validation():
    with pytest.raises(ValueError):
        AttributeSchema.of()
    with pytest.raises(ValueError):
        AttributeSchema.of(("A", ("x",)), ("A", ("y",)))
    with pytest.raises(ValueError):
        AttributeSchema.of(("A", ()))
    with pytest.raises(ValueError):
        AttributeSchema.of(("A", ("x", "x")))


def test_validate_record():
    schema = AttributeSchema.of(("A", ("x", "y")))
    ok = VectorRecord(3, np.zeros(4), (1,))
    validate_record(ok, schema, 4)
    with pytest.raises(ValueError):
        validate_record(VectorRecord(-1, np.zeros(4), (0,)), schema, 4)
    with pytest.raises(ValueError):
        validate_record(VectorRecord(1, np.zeros(4), (0, 0)), schema, 4)
    with pytest.raises(ValueError):
        validate_record(VectorRecord(1, np.zeros(4), (2,)), schema, 4)
    with pytest.raises(ValueError):
        validate_record(VectorRecord(1, np.zeros(3), (0,)), schema, 4)


# ------------------------------------------------------------- fairness spec

def test_spec_counts_must_sum_to_k():
    FairnessSpec(5, {0: {0: 2, 1: 3}})
    with pytest.raises(ValueError, match="sum to"):
        FairnessSpec(5, {0: {0: 2, 1: 2}})
    with pytest.raises(ValueError, match="sum to"):
        FairnessSpec(5, {0: {0: 2, 1: 3}, 1: {0: 4}})


def test_spec_rejects_bad_shapes():
    with pytest.raises(ValueError):
        FairnessSpec(-1, {0: {0: 0}})
    with pytest.raises(ValueError):
        FairnessSpec(5, {})
    with pytest.raises(ValueError):
        FairnessSpec(5, {0: {0: 6, 1: -1}})


def test_spec_accessors(gender_race_spec):
    spec = gender_race_spec
    assert spec.constrained() == (0, 1)
    assert spec.count(0, 0) == 2
    assert spec.count(0, 2) == 0  # unlisted value means "exactly zero"
    assert spec.count(2, 0) == 0  # unconstrained attribute
    assert spec.positive_values(1) == (0, 2)


def test_spec_zero_count_value_is_not_positive():
    spec = FairnessSpec(3, {0: {0: 3, 1: 0}})
    assert spec.positive_values(0) == (0,)
    assert spec.count(0, 1) == 0


def test_spec_names_roundtrip(drivers):
    named = {"Gender": {"Male": 2, "Female": 3}, "Race": {"Hispanic": 4, "White": 1}}
    spec = FairnessSpec.from_names(drivers.schema, 5, named)
    assert spec.constraints[0] == {0: 2, 1: 3}
    assert spec.constraints[1] == {2: 4, 0: 1}
    back = spec.to_names(drivers.schema)
    assert back == {"Gender": {"Male": 2, "Female": 3}, "Race": {"White": 1, "Hispanic": 4}}
    spec.validate_against(drivers.schema)
    with pytest.raises(ValueError):
        FairnessSpec(1, {7: {0: 1}}).validate_against(drivers.schema)
    with pytest.raises(ValueError):
        FairnessSpec(1, {0: {9: 1}}).validate_against(drivers.schema)


def test_count_values(drivers):
    # bus-driver table: 4 Male, 4 Female, 2 Non-binary
    got = count_values(drivers.attrs, 0, (0, 1, 2))
    assert got == {0: 4, 1: 4, 2: 2}
