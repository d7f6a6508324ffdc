import math

import numpy as np
import pytest

from fracgi.metrics import (
    MetricsError,
    class_moment_stats,
    class_moment_stats_multi,
    empirical_peak_snr,
    empirical_visibility,
    image_metrics,
)
from fracgi.moments import GhostImage, MomentOrder, multi_order_pass
from fracgi.objects import ObjectMask, classify_units, letter_a_mask
from fracgi.speckle import SpeckleConfig, run_simulation


def make_image(joint, joint2=None, n_samples=1000):
    joint = np.asarray(joint, dtype=float)
    joint2 = np.asarray(joint2 if joint2 is not None else joint**2 * 1.5, dtype=float)
    return GhostImage(
        width=joint.size,
        height=1,
        mu=1.0,
        nu=1.0,
        n_samples=n_samples,
        g=np.ones_like(joint),
        joint_mean=joint,
        joint2_mean=joint2,
        ref_mean=np.ones_like(joint),
        bucket_mean=1.0,
        bucket2_mean=1.5,
    )


def classes_for(values):
    return classify_units(ObjectMask(width=len(values), height=1, units=np.array(values, float)))


# -- visibility --------------------------------------------------------------


def test_constant_image_zero_visibility():
    image = make_image([2.0, 2.0])
    assert empirical_visibility(image, classes_for([1.0, 0.0])) == 0.0


def test_visibility_three_to_one():
    image = make_image([3.0, 1.0])
    assert empirical_visibility(image, classes_for([1.0, 0.0])) == pytest.approx(0.5)


def test_visibility_accepts_raw_array():
    assert empirical_visibility(np.array([3.0, 1.0]), classes_for([1.0, 0.0])) == pytest.approx(0.5)


def test_visibility_empty_class():
    with pytest.raises(MetricsError):
        empirical_visibility(make_image([1.0, 2.0]), classes_for([1.0, 1.0]))
    with pytest.raises(MetricsError):
        empirical_visibility(make_image([1.0, 2.0]), classes_for([0.0, 0.0]))


# -- peak SNR ----------------------------------------------------------------


def test_peak_snr_sqrt_n_scaling():
    a = make_image([3.0, 1.0], joint2=[10.0, 2.0], n_samples=1000)
    b = make_image([3.0, 1.0], joint2=[10.0, 2.0], n_samples=2000)
    ca = classes_for([1.0, 0.0])
    assert empirical_peak_snr(b, ca) == pytest.approx(
        math.sqrt(2.0) * empirical_peak_snr(a, ca)
    )


def test_peak_snr_zero_contrast():
    image = make_image([2.0, 2.0], joint2=[6.0, 6.0])
    assert empirical_peak_snr(image, classes_for([1.0, 0.0])) == 0.0


def test_peak_snr_degenerate_variance():
    image = make_image([3.0, 1.0], joint2=[9.0, 1.0])  # second moment == square
    with pytest.raises(MetricsError):
        empirical_peak_snr(image, classes_for([1.0, 0.0]))


def test_image_metrics_reports_exclusions():
    image = make_image([3.0, 1.0, 2.0])
    m = image_metrics(image, classes_for([1.0, 0.0, 0.5]))
    assert m.excluded_fractional == 1
    assert m.mean_signal == pytest.approx(3.0)
    assert m.mean_background == pytest.approx(1.0)


# -- class-pooled streaming stats ---------------------------------------------


@pytest.fixture(scope="module")
def run20():
    mask = letter_a_mask()
    cfg = SpeckleConfig(i0=1.0, seed=202, n=mask.n)
    return mask, classify_units(mask), run_simulation(cfg, mask, 20_000)


def test_class_stats_match_accumulator_means(run20):
    mask, classes, samples = run20
    order = MomentOrder(0.618, 0.5)
    stats = class_moment_stats(samples, classes, order)
    (image,) = multi_order_pass(samples, [order])
    assert stats.joint_mean["signal"] == pytest.approx(
        image.joint_mean[classes.one_units].mean(), rel=1e-12
    )
    assert stats.joint_mean["background"] == pytest.approx(
        image.joint_mean[classes.zero_units].mean(), rel=1e-12
    )
    assert stats.bucket_mean == pytest.approx(image.bucket_mean, rel=1e-12)


def test_class_stats_multi_shares_pass(run20):
    _, classes, samples = run20
    orders = [MomentOrder(0.618, 0.5), MomentOrder(-1.414, 0.5)]
    multi = class_moment_stats_multi(samples, classes, orders)
    for order, stats in zip(orders, multi):
        single = class_moment_stats(samples, classes, order)
        assert stats.joint_mean == single.joint_mean
        assert stats.joint_se == single.joint_se


def test_null_pairing_kills_contrast(run20):
    _, classes, samples = run20
    stats = class_moment_stats(samples, classes, MomentOrder(1.414, 0.5), pair_shift=1)
    for label in ("signal", "background"):
        assert abs(stats.g(label) - 1.0) < 5 * stats.g_se(label)


def test_paired_run_shows_contrast(run20):
    _, classes, samples = run20
    stats = class_moment_stats(samples, classes, MomentOrder(1.414, 0.5))
    assert stats.g("signal") - 1.0 > 5 * stats.g_se("signal")


def test_empty_mask_classes_rejected(run20):
    _, _, samples = run20
    gray = classify_units(
        ObjectMask(width=49, height=1, units=np.full(49, 0.5))
    )
    with pytest.raises(MetricsError):
        class_moment_stats(samples, gray, MomentOrder(1.0, 1.0))


# -- convergence to the closed forms ------------------------------------------


@pytest.fixture(scope="module")
def convergence_runs():
    from fracgi.theory import peak_snr, visibility

    mask = letter_a_mask()
    classes = classify_units(mask)
    order = MomentOrder(1.0, 1.0)
    out = {}
    for n in (20_000, 200_000):
        samples = run_simulation(SpeckleConfig(i0=1.0, seed=303, n=mask.n), mask, n)
        (image,) = multi_order_pass(samples, [order])
        stats = class_moment_stats(samples, classes, order)
        out[n] = (image, stats)
    return classes, out, visibility(20, 1, 1), peak_snr


def test_empirical_visibility_converges(convergence_runs):
    classes, runs, v_true, _ = convergence_runs
    deviations = {}
    for n, (image, stats) in runs.items():
        deviations[n] = abs(empirical_visibility(image, classes) - v_true)
    assert deviations[200_000] < deviations[20_000]
    # at the larger N: within 5 pooled standard errors (delta method on V)
    image, stats = runs[200_000]
    s, b = stats.joint_mean["signal"], stats.joint_mean["background"]
    ds, db = stats.joint_se["signal"], stats.joint_se["background"]
    se_v = 2.0 * math.sqrt((b * ds) ** 2 + (s * db) ** 2) / (s + b) ** 2
    assert deviations[200_000] < 5 * se_v


def test_empirical_peak_snr_magnitude(convergence_runs):
    classes, runs, _, peak_snr = convergence_runs
    for n, (image, _) in runs.items():
        expected = peak_snr(20, 1, 1, n)
        assert empirical_peak_snr(image, classes) == pytest.approx(expected, rel=0.10)
