"""Channel statistics and reduction against plain-Python oracles."""

import numpy as np
import pytest

from _oracles import oracle_entropy, oracle_pdf, oracle_std
from eigenseg.channel_select import (
    DEFAULT_BINS,
    ReductionConfig,
    channel_delta,
    channel_entropy,
    channel_histogram,
    channel_std,
    dcr_select,
    entropy_scores,
    ncr_select,
    std_scores,
)
from eigenseg.errors import ConfigError, DimensionError, InsufficientInstances
from eigenseg.tensor_io import FeatureMap, LabelMask


def build_map(arrays):
    """Stack per-channel (H, W) arrays into a FeatureMap."""
    return FeatureMap(np.stack(arrays, axis=-1))


def test_histogram_matches_oracle_on_random_data():
    rng = np.random.default_rng(100)
    fm = FeatureMap(rng.standard_normal((9, 11, 8)))
    for c in range(fm.channels):
        pdf = channel_histogram(fm, c, bins=30)
        expect = oracle_pdf(fm.data[:, :, c].ravel(), 30)
        assert pdf.shape == (30,)
        assert np.abs(pdf - np.array(expect)).max() == 0.0
        assert abs(pdf.sum() - 1.0) < 1e-12


def test_histogram_constant_channel():
    fm = build_map([np.full((4, 5), 2.5)])
    pdf = channel_histogram(fm, 0, bins=7)
    assert pdf[0] == 1.0
    assert pdf[1:].sum() == 0.0
    assert channel_entropy(pdf) == 0.0


def test_histogram_two_level_channel():
    chan = np.zeros((6, 5))
    chan[:3] = 1.0  # half the pixels high: maximum lands in the last bin
    fm = build_map([chan])
    pdf = channel_histogram(fm, 0, bins=10)
    assert pdf[0] == 0.5
    assert pdf[-1] == 0.5
    assert pdf[1:-1].sum() == 0.0
    assert abs(channel_entropy(pdf) - 1.0) < 1e-15


def test_entropy_and_std_match_oracles():
    rng = np.random.default_rng(101)
    channels = [
        rng.uniform(-1, 1, (8, 8)),
        rng.standard_normal((8, 8)),
        np.where(rng.random((8, 8)) < 0.3, 0.0, 5.0),
        np.full((8, 8), -3.25),
    ]
    fm = build_map(channels)
    for c in range(fm.channels):
        values = fm.data[:, :, c].ravel()
        ent = channel_entropy(channel_histogram(fm, c, DEFAULT_BINS))
        assert abs(ent - oracle_entropy(oracle_pdf(values, DEFAULT_BINS))) < 1e-12
        assert abs(channel_std(fm, c) - oracle_std(values)) < 1e-12


def test_score_lists_are_channel_ordered():
    rng = np.random.default_rng(102)
    fm = FeatureMap(rng.standard_normal((5, 5, 6)))
    ents = entropy_scores(fm)
    stds = std_scores(fm)
    assert [s.channel_index for s in ents] == list(range(6))
    assert [s.channel_index for s in stds] == list(range(6))
    for s in stds:
        assert s.score == channel_std(fm, s.channel_index)


def test_ncr_keeps_lowest_entropy_in_original_order():
    rng = np.random.default_rng(103)
    constant = np.full((10, 10), 1.0)  # entropy 0
    two_level = np.where(rng.random((10, 10)) < 0.5, 0.0, 1.0)  # ~1 bit
    noisy = rng.uniform(-1, 1, (10, 10))  # close to log2(30) bits
    fm = build_map([noisy, constant, two_level])
    reduced, kept = ncr_select(fm, keep_m=2)
    assert kept == [1, 2]
    assert reduced.channels == 2
    assert (reduced.data == fm.data[:, :, [1, 2]]).all()


def test_dcr_keeps_highest_std_in_original_order():
    flat = np.zeros((6, 6))
    small = np.tile(np.array([0.0, 0.1]), (6, 3))
    large = np.tile(np.array([-5.0, 5.0]), (6, 3))
    fm = build_map([small, flat, large])
    reduced, kept = dcr_select(fm, keep_n=2)
    assert kept == [0, 2]
    assert (reduced.data == fm.data[:, :, [0, 2]]).all()


def test_ties_break_by_ascending_channel_index():
    rng = np.random.default_rng(104)
    chan = rng.standard_normal((7, 7))
    fm = build_map([chan, chan.copy(), chan.copy()])
    _, kept_low = ncr_select(fm, keep_m=2)
    _, kept_high = dcr_select(fm, keep_n=2)
    assert kept_low == [0, 1]
    assert kept_high == [0, 1]


def test_reduction_slices_are_bit_identical():
    rng = np.random.default_rng(105)
    fm = FeatureMap(rng.standard_normal((6, 7, 20)))
    reduced, kept = ncr_select(fm, keep_m=9)
    assert reduced.data.tobytes() == fm.data[:, :, kept].tobytes()
    second, kept2 = dcr_select(reduced, keep_n=4)
    assert second.data.tobytes() == reduced.data[:, :, kept2].tobytes()


def test_two_stage_reduction_composes():
    rng = np.random.default_rng(106)
    fm = FeatureMap(rng.standard_normal((6, 6, 12)))
    mid, kept_m = ncr_select(fm, keep_m=8)
    out, kept_n = dcr_select(mid, keep_n=3)
    original = [kept_m[i] for i in kept_n]
    assert (out.data == fm.data[:, :, original]).all()


def test_reduction_validation():
    fm = FeatureMap(np.zeros((3, 3, 4)))
    with pytest.raises(ConfigError):
        ncr_select(fm, keep_m=0)
    with pytest.raises(ConfigError):
        ncr_select(fm, keep_m=5)
    with pytest.raises(ConfigError):
        dcr_select(fm, keep_n=0)
    with pytest.raises(ConfigError):
        channel_histogram(fm, 4)
    with pytest.raises(ConfigError):
        channel_histogram(fm, 0, bins=1)
    with pytest.raises(ConfigError):
        channel_std(fm, -1)
    with pytest.raises(ConfigError):
        ReductionConfig(bins=1)
    with pytest.raises(ConfigError):
        ReductionConfig(keep_m=2, keep_n=3)


def test_channel_delta_pairwise_gaps():
    chan = np.zeros((4, 4))
    chan[:2, :] = 1.0  # instance 1 mean 1.0
    chan[2:, :2] = 4.0  # instance 2 mean 4.0
    labels = np.zeros((4, 4), dtype=np.int64)
    labels[:2, :] = 1
    labels[2:, :2] = 2
    fm = build_map([chan])
    assert channel_delta(fm, LabelMask(labels), 0) == 3.0
    with pytest.raises(InsufficientInstances):
        channel_delta(fm, LabelMask((labels == 1).astype(np.int64)), 0)
    with pytest.raises(DimensionError):
        channel_delta(fm, LabelMask(np.zeros((2, 2), dtype=np.int64)), 0)
