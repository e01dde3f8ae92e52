import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from alignlab import simmetrics
from alignlab.simmetrics import (
    alignment_report,
    center,
    cka,
    hsic_linear,
    ingest_matrix,
    mutual_knn,
    svcca,
    write_matrix,
)


def random_orthogonal(d, seed=0):
    q, _ = np.linalg.qr(np.random.default_rng(seed).normal(size=(d, d)))
    return q


RNG = np.random.default_rng(0)
FA = RNG.normal(size=(64, 12))
FB = FA @ RNG.normal(size=(12, 12)) + 0.1 * RNG.normal(size=(64, 12))


# ------------------------------------------------------------------- HSIC


def test_hsic_hand_value():
    # centered single column [1, -1]: HSIC = (f^T f)^2 / (n-1)^2 = 4
    f = np.array([[1.0], [-1.0]])
    assert hsic_linear(f, f) == pytest.approx(4.0)


def test_hsic_zero_for_uncorrelated_columns():
    fa = np.array([[1.0], [-1.0]])
    fb = center(np.array([[1.0], [1.0]]))  # constant -> centered to zero
    assert hsic_linear(fa, fb) == 0.0


def test_hsic_row_count_mismatch():
    with pytest.raises(ValueError, match="differ"):
        hsic_linear(np.ones((3, 2)), np.ones((4, 2)))


# -------------------------------------------------------------------- CKA


def test_cka_self_is_one():
    assert cka(FA, FA) == pytest.approx(1.0, abs=1e-12)


def test_cka_orthogonal_invariance():
    q = random_orthogonal(12, seed=1)
    assert abs(cka(FA, FB) - cka(FA, FB @ q)) < 1e-9


def test_cka_isotropic_scale_invariance():
    assert abs(cka(FA, FB) - cka(3.7 * FA, 0.2 * FB)) < 1e-9


def test_cka_translation_invariance():
    assert abs(cka(FA, FB) - cka(FA + 5.0, FB - 2.0)) < 1e-9


def test_cka_range_and_degenerate():
    assert 0.0 <= cka(FA, RNG.normal(size=(64, 12))) <= 1.0
    with pytest.raises(ValueError, match="degenerate"):
        cka(np.ones((10, 3)), FA[:10])


# ------------------------------------------------------------------ SVCCA


def test_svcca_self_is_one():
    score, k = svcca(FA, FA)
    assert score == pytest.approx(1.0, abs=1e-6)
    assert 1 <= k <= 12


def test_svcca_orthogonal_invariance_self():
    q = random_orthogonal(12, seed=2)
    s_self, _ = svcca(FA, FA)
    s_rot, _ = svcca(FA, FA @ q)
    assert abs(s_self - s_rot) < 1e-6


def test_svcca_orthogonal_stability_cross():
    # rotating one side of a cross comparison shifts the truncated
    # subspaces slightly; the score should stay close but not bit-equal
    q = random_orthogonal(12, seed=2)
    s1, _ = svcca(FA, FB)
    s2, _ = svcca(FA, FB @ q)
    assert abs(s1 - s2) < 1e-2


def test_svcca_range():
    s, _ = svcca(FA, RNG.normal(size=(64, 12)))
    assert 0.0 <= s <= 1.0


def test_svcca_variance_keep_validation():
    with pytest.raises(ValueError, match="variance_keep"):
        svcca(FA, FB, variance_keep=0.0)


def test_svcca_rank_collapse_error():
    with pytest.raises(ValueError, match="rank collapse"):
        svcca(np.zeros((10, 3)), FA[:10])


# ------------------------------------------------------------- Mutual-KNN


def brute_force_mknn(fa, fb, k):
    """O(n^2) reference: shared neighbor pairs / (n*k), ties by row index."""

    def knn(f):
        n = f.shape[0]
        sets = []
        for i in range(n):
            d = [(np.sum((f[i] - f[j]) ** 2), j) for j in range(n) if j != i]
            d.sort()  # ties break on the ascending index
            sets.append({j for _, j in d[:k]})
        return sets

    sa, sb = knn(fa), knn(fb)
    n = fa.shape[0]
    return sum(len(sa[i] & sb[i]) for i in range(n)) / (n * k)


def test_mknn_self_is_exactly_one():
    assert mutual_knn(FA, FA, k=5) == 1.0


def test_mknn_matches_brute_force():
    rng = np.random.default_rng(3)
    for n, k in ((12, 1), (30, 4), (50, 7)):
        fa = rng.normal(size=(n, 5))
        fb = rng.normal(size=(n, 5))
        assert mutual_knn(fa, fb, k=k) == pytest.approx(brute_force_mknn(fa, fb, k))


def test_mknn_hand_value():
    # two clusters on a line; with k=1 in A everyone pairs within cluster.
    # B swaps one cluster's points far apart so half the relations break.
    fa = np.array([[0.0], [0.1], [10.0], [10.1]])
    fb = np.array([[0.0], [0.1], [10.0], [30.0]])
    # A neighbors: 0<->1, 2<->3. B neighbors: 0<->1, 3->2 kept, 2->1 changed
    assert mutual_knn(fa, fb, k=1) == pytest.approx(3 / 4)


def test_mknn_k_validation():
    with pytest.raises(ValueError, match="k must be"):
        mutual_knn(FA, FB, k=0)
    with pytest.raises(ValueError, match="k must be"):
        mutual_knn(FA, FB, k=64)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 1000), n=st.integers(5, 24), k=st.integers(1, 4))
def test_mknn_brute_force_property(seed, n, k):
    rng = np.random.default_rng(seed)
    fa = rng.normal(size=(n, 3))
    fb = rng.normal(size=(n, 3))
    assert mutual_knn(fa, fb, k=k) == pytest.approx(brute_force_mknn(fa, fb, k))


# ----------------------------------------------------------------- report


def test_alignment_report_fields():
    rep = alignment_report(FA, FB, knn_k=4)
    assert 0.0 <= rep.cka <= 1.0
    assert 0.0 <= rep.svcca <= 1.0
    assert 0.0 <= rep.mknn <= 1.0
    assert rep.k_used == 4
    d = rep.to_dict()
    assert set(d) == {"cka", "svcca", "mknn", "k_used", "svcca_k"}


# ------------------------------------------------------------------- I/O


def test_matrix_round_trip(tmp_path):
    path = tmp_path / "m.csv"
    write_matrix(FA, path)
    np.testing.assert_array_equal(ingest_matrix(path), FA)


def test_ingest_header_autodetect(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("dim0,dim1\n1.0,2.0\n3.0,4.0\n")
    np.testing.assert_array_equal(ingest_matrix(path), [[1.0, 2.0], [3.0, 4.0]])


def test_ingest_ragged_row_reports_line(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1.0,2.0\n3.0\n")
    with pytest.raises(ValueError, match="row 2"):
        ingest_matrix(path)


def test_ingest_non_numeric_reports_line(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1.0,2.0\n3.0,abc\n")
    with pytest.raises(ValueError, match="row 2"):
        ingest_matrix(path)


def test_ingest_non_finite_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1.0,inf\n")
    with pytest.raises(ValueError, match="non-finite"):
        ingest_matrix(path)


def test_ingest_empty_rejected(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("\n\n")
    with pytest.raises(ValueError, match="no numeric rows"):
        ingest_matrix(path)
