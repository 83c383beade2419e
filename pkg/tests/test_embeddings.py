"""Embedding file parsing and vector-similarity primitives."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctxrel.embeddings import (
    DimensionUndeterminable,
    DimMismatch,
    EmptyInput,
    ZeroVariance,
    ZeroVector,
    cosine,
    parse_embeddings,
    pearson,
)


class TestParseEmbeddings:
    def test_minimal_file_with_header(self):
        table, diag = parse_embeddings(b"2 3\na 1 0 0\nb 0 1 0\n", expect_header=True)
        assert table.dim == 3
        assert table.count == 2
        assert diag.declared_count == 2
        assert diag.lines_read == 2
        np.testing.assert_array_equal(table.lookup("a"), [1.0, 0.0, 0.0])

    def test_arity_mismatch_skipped(self):
        table, diag = parse_embeddings(b"2 3\na 1 0 0\nb 0 1\n", expect_header=True)
        assert table.count == 1
        assert diag.malformed_lines == 1

    def test_duplicate_first_wins(self):
        table, diag = parse_embeddings(b"a 1 0 0\na 2 0 0\n")
        assert table.count == 1
        assert diag.duplicate_tokens == 1
        np.testing.assert_array_equal(table.lookup("a"), [1.0, 0.0, 0.0])

    def test_dim_from_first_row_without_header(self):
        table, _ = parse_embeddings(b"a 1 2\nb 3 4\n")
        assert table.dim == 2

    def test_crlf_accepted(self):
        table, _ = parse_embeddings(b"a 1 0\r\nb 0 1\r\n")
        assert table.count == 2
        np.testing.assert_array_equal(table.lookup("b"), [0.0, 1.0])

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            parse_embeddings(b"")

    def test_malformed_first_row_without_header(self):
        with pytest.raises(DimensionUndeterminable):
            parse_embeddings(b"a one two\n")

    def test_bad_header(self):
        with pytest.raises(DimensionUndeterminable):
            parse_embeddings(b"not a header\na 1 0\n", expect_header=True)

    def test_unicode_tokens(self):
        table, _ = parse_embeddings("苹果 0.5 -0.25\n沙拉 1 2\n".encode("utf-8"))
        assert "苹果" in table
        np.testing.assert_array_equal(table.lookup("苹果"), [0.5, -0.25])

    def test_non_finite_values_malformed(self):
        table, diag = parse_embeddings(b"a 1 0\nb nan 0\nc inf 1\n")
        assert table.count == 1
        assert diag.malformed_lines == 2

    def test_deterministic(self):
        data = b"3 2\na 1 0\nb 0 1\nb 2 2\nc 1\n"
        t1, d1 = parse_embeddings(data, expect_header=True)
        t2, d2 = parse_embeddings(data, expect_header=True)
        assert d1 == d2
        assert list(t1.tokens()) == list(t2.tokens())
        for token in t1.tokens():
            np.testing.assert_array_equal(t1.lookup(token), t2.lookup(token))

    def test_diagnostics_invariant(self):
        data = b"a 1 0\nb x 0\na 9 9\nc 3 4\n"
        _, diag = parse_embeddings(data)
        assert diag.lines_read >= diag.malformed_lines + diag.duplicate_tokens

    def test_vectors_are_read_only(self):
        table, _ = parse_embeddings(b"a 1 0\nb 0 1\n")
        with pytest.raises(ValueError):
            table.lookup("a")[0] = 5.0


class TestLookup:
    def test_hit_and_miss(self):
        table, _ = parse_embeddings(b"a 1 0 0\n")
        np.testing.assert_array_equal(table.lookup("a"), [1.0, 0.0, 0.0])
        assert table.lookup("z") is None

    def test_case_sensitive(self):
        table, _ = parse_embeddings(b"a 1 0 0\n")
        assert table.lookup("A") is None


class TestCosine:
    def test_identity(self):
        assert cosine([1.0, 0.0], [1.0, 0.0]) == pytest.approx(1.0, abs=1e-15)

    def test_orthogonal(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0, abs=1e-15)

    def test_45_degrees(self):
        # (1,1)·(1,0) / (sqrt(2)·1) = 1/sqrt(2)
        assert cosine([1.0, 1.0], [1.0, 0.0]) == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-15)

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            cosine([0.0, 0.0], [1.0, 0.0])

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            cosine([1.0, 0.0], [1.0, 0.0, 0.0])


class TestPearson:
    def test_exact_linear(self):
        assert pearson([1.0, 2.0], [2.0, 4.0]) == pytest.approx(1.0, abs=1e-15)

    def test_exact_antilinear(self):
        assert pearson([1.0, 2.0], [2.0, 1.0]) == pytest.approx(-1.0, abs=1e-15)

    def test_half_correlation(self):
        # centered u=(-1,0,1), v=(-1,1,0): sum uv = 1, |u||v| = 2
        assert pearson([1.0, 2.0, 3.0], [1.0, 3.0, 2.0]) == pytest.approx(0.5, abs=1e-15)

    def test_zero_variance(self):
        with pytest.raises(ZeroVariance):
            pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])

    def test_too_short(self):
        with pytest.raises(ZeroVariance):
            pearson([1.0], [2.0])

    def test_dim_mismatch(self):
        with pytest.raises(DimMismatch):
            pearson([1.0, 2.0], [1.0, 2.0, 3.0])


finite_vectors = st.integers(min_value=2, max_value=16).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n),
        st.lists(st.floats(-1e3, 1e3), min_size=n, max_size=n),
    )
)


@settings(max_examples=200, deadline=None)
@given(finite_vectors)
def test_similarity_symmetry_and_bounds(uv):
    u, v = np.array(uv[0]), np.array(uv[1])
    try:
        c1, c2 = cosine(u, v), cosine(v, u)
    except ZeroVector:
        pass
    else:
        assert c1 == pytest.approx(c2, abs=1e-12)
        assert abs(c1) <= 1.0 + 1e-12
    try:
        p1, p2 = pearson(u, v), pearson(v, u)
    except ZeroVariance:
        pass
    else:
        assert p1 == pytest.approx(p2, abs=1e-12)
        assert abs(p1) <= 1.0 + 1e-12


@settings(max_examples=100, deadline=None)
@given(
    finite_vectors,
    st.floats(min_value=1e-3, max_value=1e3, allow_nan=False),
)
def test_cosine_scale_invariance(uv, c):
    u, v = np.array(uv[0]), np.array(uv[1])
    try:
        base = cosine(u, v)
    except ZeroVector:
        return
    assert cosine(c * u, v) == pytest.approx(base, abs=1e-9)
