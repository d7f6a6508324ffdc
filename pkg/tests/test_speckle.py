import math

import numpy as np
import pytest
from scipy import stats

from fracgi.objects import ObjectMask, letter_a_mask
from fracgi.speckle import (
    SampleSet,
    SpeckleConfig,
    bucket_signal,
    dump_samples,
    generate_frame,
    load_samples,
    run_simulation,
)
from fracgi.theory import ErlangModel

GAMMA_3_2 = 0.886226925452758  # sqrt(pi)/2, half-integer Gamma identity


def config(n=16, i0=1.0, seed=42):
    return SpeckleConfig(i0=i0, seed=seed, n=n)


# -- determinism -------------------------------------------------------------


def test_frame_determinism_bitwise():
    cfg = config()
    a = generate_frame(cfg, 123)
    b = generate_frame(cfg, 123)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, generate_frame(cfg, 124))
    assert not np.array_equal(a, generate_frame(config(seed=43), 123))


def test_batches_match_single_frames():
    cfg = config(n=9)
    mask = ObjectMask(width=3, height=3, units=np.linspace(0, 1, 9))
    samples = run_simulation(cfg, mask, 50)
    collected = {}
    for first, refs, buckets in samples.iter_batches(batch_size=7):
        for row in range(refs.shape[0]):
            collected[first + row] = (refs[row].copy(), buckets[row])
    for j in (0, 13, 49):
        assert np.array_equal(collected[j][0], generate_frame(cfg, j))
        assert collected[j][1] == bucket_signal(collected[j][0], mask)


def test_batch_size_does_not_change_results():
    cfg = config(n=5)
    mask = ObjectMask(width=5, height=1, units=np.array([1, 0, 0.5, 1, 0.0]))
    samples = run_simulation(cfg, mask, 40)
    b_small = samples.buckets(batch_size=3)
    b_large = samples.buckets(batch_size=4096)
    assert np.array_equal(b_small, b_large)


# -- distribution oracles ----------------------------------------------------


def test_sample_mean_matches_exponential_mean():
    # law of large numbers: 4 standard errors at N=1e6
    cfg = config(n=1_000_000, i0=1.0, seed=11)
    draws = generate_frame(cfg, 0)
    se = 1.0 / math.sqrt(draws.size)
    assert abs(draws.mean() - 1.0) < 4 * se


def test_fractional_moment_of_reference():
    cfg = config(n=1_000_000, i0=1.0, seed=12)
    powered = generate_frame(cfg, 0) ** 0.5
    se = powered.std() / math.sqrt(powered.size)
    assert abs(powered.mean() - GAMMA_3_2) < 4 * se


def test_per_unit_variance():
    cfg = config(n=200_000, i0=2.5, seed=13)
    draws = generate_frame(cfg, 0)
    # exponential variance = i0^2; SE of the variance estimate ~ i0^2*sqrt(8/N)
    est = draws.var()
    se = 2.5**2 * math.sqrt(8.0 / draws.size)
    assert abs(est - 2.5**2) < 5 * se


def test_all_draws_positive():
    cfg = config(n=100_000, seed=3)
    assert generate_frame(cfg, 7).min() > 0


@pytest.mark.parametrize("m", [2, 5])
def test_bucket_histogram_ks_against_erlang(m):
    mask = ObjectMask(width=m, height=1, units=np.ones(m))
    cfg = config(n=m, seed=21 + m)
    samples = run_simulation(cfg, mask, 100_000)
    model = ErlangModel(m=m, scale=1.0)
    result = stats.kstest(samples.buckets(), lambda x: model.cdf(x))
    assert result.pvalue > 1e-3


def test_bucket_lag1_autocorrelation():
    mask = letter_a_mask()
    cfg = config(n=mask.n, seed=5)
    buckets = run_simulation(cfg, mask, 100_000).buckets()
    centered = buckets - buckets.mean()
    rho = (centered[:-1] * centered[1:]).mean() / centered.var()
    assert abs(rho) < 5.0 / math.sqrt(buckets.size)


# -- bucket signal -----------------------------------------------------------


def test_bucket_examples():
    m = ObjectMask(width=2, height=1, units=np.array([1.0, 0.0]))
    assert bucket_signal(np.array([3.0, 5.0]), m) == 3.0
    z = ObjectMask(width=2, height=1, units=np.zeros(2))
    assert bucket_signal(np.array([3.0, 5.0]), z) == 0.0
    w = ObjectMask(width=2, height=1, units=np.array([0.5, 0.25]))
    assert bucket_signal(np.array([2.0, 4.0]), w) == 2.0


def test_bucket_length_mismatch():
    m = ObjectMask(width=2, height=1, units=np.array([1.0, 0.0]))
    with pytest.raises(ValueError):
        bucket_signal(np.array([1.0, 2.0, 3.0]), m)


def test_bucket_partial_sum_bound():
    # I_B >= t_i * I_i for every unit (support constraint of the joint law)
    mask = ObjectMask(width=6, height=1, units=np.array([0.1, 0.9, 1.0, 0.0, 0.5, 0.3]))
    cfg = config(n=6, seed=9)
    for frame in run_simulation(cfg, mask, 200):
        slack = frame.bucket - mask.units * frame.reference
        assert slack.min() > -1e-12 * frame.bucket


def test_mean_bucket_matches_weighted_sum():
    mask = ObjectMask(width=3, height=1, units=np.array([0.2, 0.5, 1.0]))
    cfg = config(n=3, i0=2.0, seed=17)
    buckets = run_simulation(cfg, mask, 200_000).buckets()
    expected = 2.0 * mask.units.sum()
    se = buckets.std() / math.sqrt(buckets.size)
    assert abs(buckets.mean() - expected) < 5 * se


# -- sample-set contracts ----------------------------------------------------


def test_single_frame_run():
    mask = letter_a_mask()
    samples = run_simulation(config(n=mask.n), mask, 1)
    frames = list(samples)
    assert len(frames) == 1
    assert frames[0].index == 0


def test_invalid_counts():
    mask = letter_a_mask()
    with pytest.raises(ValueError):
        run_simulation(config(n=mask.n), mask, 0)
    with pytest.raises(ValueError):
        run_simulation(config(n=3), mask, 10)  # n mismatch
    with pytest.raises(ValueError):
        SpeckleConfig(i0=0.0, seed=1, n=4)


def test_reiteration_is_identical():
    mask = letter_a_mask()
    samples = run_simulation(config(n=mask.n, seed=8), mask, 64)
    first = [f.bucket for f in samples]
    second = [f.bucket for f in samples]
    assert first == second


# -- raw sample dump ---------------------------------------------------------


def test_dump_round_trip(tmp_path):
    mask = ObjectMask(width=4, height=1, units=np.array([1.0, 0.0, 0.5, 1.0]))
    cfg = config(n=4, i0=1.5, seed=33)
    samples = run_simulation(cfg, mask, 25)
    path = tmp_path / "samples.bin"
    dump_samples(samples, path)
    header, meta, refs = load_samples(path)
    assert header == {"n": 4, "n_frames": 25, "i0": 1.5, "seed": 33}
    assert meta["index"].tolist() == list(range(25))
    for j in (0, 11, 24):
        assert np.array_equal(refs[j], generate_frame(cfg, j))
        assert meta["bucket"][j] == bucket_signal(refs[j], mask)


def test_dump_is_little_endian(tmp_path):
    mask = ObjectMask(width=1, height=1, units=np.array([1.0]))
    samples = run_simulation(config(n=1, seed=1), mask, 2)
    path = tmp_path / "s.bin"
    dump_samples(samples, path)
    raw = path.read_bytes()
    header_end = raw.index(b"\n") + 1
    # second record's index field: frame 1 as little-endian u64
    record_size = 8 + 8 + 8
    idx_bytes = raw[header_end + record_size : header_end + record_size + 8]
    assert int.from_bytes(idx_bytes, "little") == 1
