"""Conditional vectors: log-frequency masses and training-by-sampling."""

import numpy as np
import pytest

from tabsynth.condvec import (FrequencyTable, condition_of_row,
                              draw_real_batch, make_condition,
                              matching_rows, sample_condition)
from tabsynth.transform import EncodingLayout, Segment


def layout_1cat(n_classes=3):
    segs = [Segment("c", "class", 0, n_classes, 0)]
    return EncodingLayout(segs, n_classes, n_classes, ["c"])


def layout_2col():
    # one 2-mode numeric column (alpha + modes), one 3-class categorical
    segs = [Segment("x", "alpha", 0, 1, -1),
            Segment("x", "mode", 1, 2, 0),
            Segment("c", "class", 3, 3, 2)]
    return EncodingLayout(segs, 6, 5, ["x", "c"])


def onehot_matrix(counts, width):
    rows = []
    for j, c in enumerate(counts):
        row = np.zeros(width)
        row[j] = 1.0
        rows.extend([row] * c)
    return np.array(rows)


# frozen oracle: normalized log1p masses for counts {900, 90, 10}
MASS_900_90_10 = (0.49616221099135105, 0.3289654290664176,
                  0.17487235994223133)


def test_log_frequency_masses_match_oracle():
    layout = layout_1cat()
    X = onehot_matrix([900, 90, 10], 3)
    freq = FrequencyTable.from_encoded(X, layout)
    assert np.allclose(freq.masses[0], MASS_900_90_10, atol=1e-12)
    assert np.isclose(freq.masses[0].sum(), 1.0, atol=1e-9)


def test_uniform_counts_give_uniform_masses():
    freq = FrequencyTable(layout_1cat(), [np.array([40.0, 40.0, 40.0])])
    assert np.allclose(freq.masses[0], 1.0 / 3.0)


def test_zero_count_has_zero_mass():
    freq = FrequencyTable(layout_1cat(), [np.array([10.0, 0.0, 5.0])])
    assert freq.masses[0][1] == 0.0


def test_condition_vector_shape():
    layout = layout_2col()
    cond = make_condition(layout, 1, 2)
    assert cond.vec.shape == (5,)
    assert cond.vec.sum() == 1.0
    assert cond.vec[2 + 2] == 1.0
    assert cond.column == "c"


def test_sample_condition_distributions():
    layout = layout_2col()
    freq = FrequencyTable(layout, [np.array([500.0, 500.0]),
                                   np.array([900.0, 90.0, 10.0])])
    rng = np.random.default_rng(0)
    n = 100_000
    col_hits = np.zeros(2)
    class_hits = np.zeros(3)
    for _ in range(n):
        cond = sample_condition(freq, rng)
        col_hits[cond.segment_index] += 1
        if cond.segment_index == 1:
            class_hits[cond.local] += 1
    assert np.abs(col_hits / n - 0.5).max() < 0.01
    emp = class_hits / class_hits.sum()
    assert np.abs(emp - np.array(MASS_900_90_10)).max() < 0.02


def test_sampled_condition_always_has_support():
    layout = layout_1cat()
    X = onehot_matrix([37, 0, 5], 3)
    freq = FrequencyTable.from_encoded(X, layout)
    rng = np.random.default_rng(1)
    for _ in range(500):
        cond = sample_condition(freq, rng)
        assert matching_rows(X, layout, cond).size > 0


def test_draw_real_batch_singleton_support():
    layout = layout_1cat()
    X = onehot_matrix([5, 1, 4], 3)
    cond = make_condition(layout, 0, 1)
    rng = np.random.default_rng(2)
    idx = draw_real_batch(X, layout, cond, rng, 16)
    assert (idx == 5).all()


def test_draw_real_batch_uniformity_chi_square():
    # 10 satisfying rows, 10k draws; chi-square gof at alpha=0.01, df=9
    layout = layout_1cat(2)
    X = np.zeros((40, 2))
    X[:10, 0] = 1.0
    X[10:, 1] = 1.0
    cond = make_condition(layout, 0, 0)
    rng = np.random.default_rng(3)
    idx = draw_real_batch(X, layout, cond, rng, 10_000)
    counts = np.bincount(idx, minlength=10)[:10]
    expected = 10_000 / 10.0
    chi2 = (((counts - expected) ** 2) / expected).sum()
    assert chi2 < 21.665994333461924   # chi2.ppf(0.99, 9)


def test_condition_of_row_reads_back_the_set_bit():
    layout = layout_2col()
    row = np.zeros(6)
    row[0] = 0.3
    row[2] = 1.0     # mode 1 of x
    row[4] = 1.0     # class 1 of c
    c0 = condition_of_row(row, layout, 0)
    assert (c0.column, c0.local) == ("x", 1)
    c1 = condition_of_row(row, layout, 1)
    assert (c1.column, c1.local) == ("c", 1)


def test_empty_condition_mass_errors():
    layout = layout_1cat()
    freq = FrequencyTable(layout, [np.zeros(3)])
    with pytest.raises(ValueError):
        sample_condition(freq, np.random.default_rng(0))
