import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logitlab.store import (
    LabelVector,
    LogitMatrix,
    ParseError,
    RobustFlags,
    ValidationError,
    load_flags,
    load_labels,
    load_matrix,
    store_flags,
    store_labels,
    store_matrix,
    validate_bundle,
)

finite_doubles = st.floats(allow_nan=False, allow_infinity=False, width=64)


def test_text_parse_basic(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("2,3\n1.0,2.0,3.0\n4.0,5.0,6.0\n")
    m = load_matrix(p, "text")
    assert np.array_equal(m.values, [[1, 2, 3], [4, 5, 6]])


def test_binary_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    m = LogitMatrix(rng.standard_normal((17, 5)))
    p = tmp_path / "m.lgt"
    store_matrix(m, p, "binary")
    back = load_matrix(p, "binary")
    assert m.values.tobytes() == back.values.tobytes()


def test_binary_layout(tmp_path):
    m = LogitMatrix([[0.1, 0.2]])
    p = tmp_path / "m.lgt"
    store_matrix(m, p, "binary")
    raw = p.read_bytes()
    assert raw[:4] == b"LGT1"
    assert len(raw) == 4 + 8 + 16


def test_text_identity_matrix(tmp_path):
    m = LogitMatrix(np.eye(2))
    p = tmp_path / "m.txt"
    store_matrix(m, p, "text")
    lines = p.read_text().splitlines()
    assert lines[0] == "2,2"
    assert [float(x) for x in lines[1].split(",")] == [1.0, 0.0]
    assert [float(x) for x in lines[2].split(",")] == [0.0, 1.0]


def test_nan_in_text_is_parse_error(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("1,2\n1.0,NaN\n")
    with pytest.raises(ParseError, match="row 0, column 1"):
        load_matrix(p, "text")


def test_ragged_row_is_parse_error(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("2,3\n1,2,3\n4,5\n")
    with pytest.raises(ParseError, match="row 1"):
        load_matrix(p, "text")


def test_bad_header(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("nonsense\n")
    with pytest.raises(ParseError):
        load_matrix(p, "text")


def test_truncated_binary(tmp_path):
    m = LogitMatrix([[1.0, 2.0], [3.0, 4.0]])
    p = tmp_path / "m.lgt"
    store_matrix(m, p, "binary")
    p.write_bytes(p.read_bytes()[:-4])
    with pytest.raises(ParseError):
        load_matrix(p, "binary")


def test_matrix_invariants():
    with pytest.raises(ValidationError):
        LogitMatrix(np.empty((0, 2)))
    with pytest.raises(ValidationError):
        LogitMatrix([[1.0]])
    with pytest.raises(ValidationError, match="row 0, column 1"):
        LogitMatrix([[1.0, np.inf]])


def test_matrix_immutable():
    m = LogitMatrix([[1.0, 2.0]])
    with pytest.raises(ValueError):
        m.values[0, 0] = 9.0


def test_validate_bundle_paths():
    logits = LogitMatrix(np.zeros((3, 10)))
    labels = LabelVector([0, 1, 2])
    b = validate_bundle(logits, labels)
    assert b.flags is None
    with pytest.raises(ValidationError, match="label out of range at index 1"):
        validate_bundle(logits, LabelVector([0, 10, 2]))
    with pytest.raises(ValidationError, match="flags length mismatch"):
        validate_bundle(logits, labels, RobustFlags([True, False]))
    with pytest.raises(ValidationError, match="labels length mismatch"):
        validate_bundle(logits, LabelVector([0, 1]))
    with pytest.raises(ValidationError, match="class_names length mismatch"):
        validate_bundle(logits, labels, class_names=["a"])


def test_labels_flags_round_trip(tmp_path):
    labels = LabelVector([3, 1, 4, 1, 5])
    flags = RobustFlags([True, False, True, True, False])
    store_labels(labels, tmp_path / "y.txt")
    store_flags(flags, tmp_path / "f.txt")
    assert np.array_equal(load_labels(tmp_path / "y.txt").labels, labels.labels)
    assert np.array_equal(load_flags(tmp_path / "f.txt").flags, flags.flags)
    (tmp_path / "bad.txt").write_text("2\n")
    with pytest.raises(ParseError):
        load_flags(tmp_path / "bad.txt")


@settings(max_examples=25, deadline=None)
@given(
    rows=st.lists(
        st.lists(finite_doubles, min_size=2, max_size=6),
        min_size=1,
        max_size=8,
    ).filter(lambda rows: len({len(r) for r in rows}) == 1)
)
def test_round_trips_exact(rows, tmp_path_factory):
    m = LogitMatrix(np.array(rows, dtype=np.float64))
    d = tmp_path_factory.mktemp("rt")
    store_matrix(m, d / "b.lgt", "binary")
    store_matrix(m, d / "t.txt", "text")
    assert load_matrix(d / "b.lgt", "binary").values.tobytes() == m.values.tobytes()
    assert np.array_equal(load_matrix(d / "t.txt", "text").values, m.values)
