"""Command-line front end: simulate, predict, sweep, validate.

Exit codes: 0 success, 1 runtime/validation failure, 2 usage error,
3 mathematical domain error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


from . import metrics, moments, reports, speckle, theory
from .objects import MaskError, ObjectMask, block_mask, classify_units, letter_a_mask, load_object

__all__ = ["main", "builtin_mask"]

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2
EXIT_DOMAIN = 3

WORKERS_ENV = "FRACGI_WORKERS"

# the six-order reconstruction grid used by the validation command
DEFAULT_ORDERS = "-2.7183:0.5,-1.414:0.5,-0.618:0.5,0.618:0.5,1.414:0.5,2.7183:0.5"


class UsageError(ValueError):
    pass


def builtin_mask(m: int = 20) -> ObjectMask:
    """Built-in binary test object with exactly m effective units; the
    letter-A bitmap when m matches its 20 units, a block mask otherwise."""
    return letter_a_mask() if m == 20 else block_mask(m)


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
    if value < 1:
        raise UsageError(f"{WORKERS_ENV} must be positive, got {value}")
    return value


def _parse_orders(text: str, allow_negative_nu: bool) -> list[moments.MomentOrder]:
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 2:
            raise UsageError(f"--orders entries must be mu:nu pairs, got {chunk!r}")
        try:
            mu, nu = float(parts[0]), float(parts[1])
        except ValueError:
            raise UsageError(f"--orders entry {chunk!r} is not numeric")
        if mu == 0:
            raise UsageError("--orders: mu = 0 is not allowed (constant image)")
        pairs.append(
            moments.MomentOrder(mu=mu, nu=nu, allow_small_negative_nu=allow_negative_nu)
        )
    if not pairs:
        raise UsageError("--orders is empty")
    return pairs


def _parse_range(text: str, flag: str) -> list[float]:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"{flag} must be lo:hi:step, got {text!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"{flag} has non-numeric parts: {text!r}")
    if step <= 0:
        raise UsageError(f"{flag} step must be positive, got {step:g}")
    if hi < lo:
        raise UsageError(f"{flag} range is empty ({lo:g} > {hi:g})")
    count = int(round((hi - lo) / step))
    values = [round(lo + k * step, 12) for k in range(count + 1)]
    return [v for v in values if v <= hi + 1e-12]


def _check_order_domain(mask_or_m, orders) -> None:
    for order in orders:
        flags = theory.validity_domain(mask_or_m, order.mu, order.nu)
        if not flags.moment_finite:
            raise theory.DomainError(
                f"orders mu={order.mu:g}, nu={order.nu:g}: " + "; ".join(flags.reasons)
            )


def _load_mask(args) -> ObjectMask:
    if args.object is None:
        return builtin_mask()
    return load_object(args.object, binarize_threshold=args.binarize)


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    mask = _load_mask(args)
    orders = _parse_orders(args.orders, args.unsafe_negative_nu)
    classes = classify_units(mask)
    _check_order_domain(mask, orders)
    if args.n_samples < 2:
        raise UsageError("--n-samples must be at least 2")

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = speckle.SpeckleConfig(i0=args.i0, seed=args.seed, n=mask.n)
    samples = speckle.run_simulation(config, mask, args.n_samples)
    images = moments.multi_order_pass(samples, orders, workers=args.workers)

    results = []
    for idx, (order, image) in enumerate(zip(orders, images), start=1):
        name = f"ghost_{idx:02d}_mu{order.mu:g}_nu{order.nu:g}.pgm"
        reports.write_ghost_image(image, out_dir / name)
        v_emp = rp_emp = mean_sig = mean_bg = None
        if classes.one_units.size and classes.zero_units.size:
            im = metrics.image_metrics(image, classes)
            v_emp, rp_emp = im.v_empirical, im.rp_empirical
            mean_sig, mean_bg = im.mean_signal, im.mean_background
        v_ana = rp_ana = None
        if classes.is_binary and classes.m is not None and classes.m >= 2:
            pred = theory.predict(classes.m, order.mu, order.nu, args.n_samples, args.i0)
            v_ana, rp_ana = pred.visibility, pred.peak_snr
        results.append(
            reports.OrderResult(
                mu=order.mu,
                nu=order.nu,
                v_empirical=v_emp,
                rp_empirical=rp_emp,
                mean_signal=mean_sig,
                mean_background=mean_bg,
                v_analytic=v_ana,
                rp_analytic=rp_ana,
            )
        )
        print(
            f"{name}: V_emp={v_emp if v_emp is None else f'{v_emp:.6g}'} "
            f"Rp_emp={rp_emp if rp_emp is None else f'{rp_emp:.6g}'} "
            f"V_analytic={v_ana if v_ana is None else f'{v_ana:.6g}'}"
        )

    report = reports.RunReport(
        mask_digest=reports.mask_digest(mask),
        i0=args.i0,
        seed=args.seed,
        n_samples=args.n_samples,
        orders=tuple((o.mu, o.nu) for o in orders),
        results=tuple(results),
    )
    reports.write_report(report, out_dir / "report.json")
    return EXIT_OK


def cmd_predict(args) -> int:
    pred = theory.predict(args.m, args.mu, args.nu, args.n, args.i0)
    payload = {
        "m": pred.m,
        "mu": pred.mu,
        "nu": pred.nu,
        "i0": pred.i0,
        "n_samples": pred.n_samples,
        "moment_background": pred.moment_background,
        "moment_signal": pred.moment_signal,
        "visibility": pred.visibility,
        "peak_snr": pred.peak_snr,
        "rp_per_sqrt_n": pred.rp_per_sqrt_n,
        "moment_finite": pred.moment_finite,
        "variance_finite": pred.variance_finite,
    }
    print(json.dumps(payload, sort_keys=True, separators=(",", ":")))
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        m_values = [int(v) for v in args.m.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"--m must be comma-separated integers, got {args.m!r}")
    if not m_values or any(m < 2 for m in m_values):
        raise UsageError("--m values must be integers >= 2")
    mu_values = _parse_range(args.mu, "--mu")
    nu_values = _parse_range(args.nu, "--nu")
    if any(v == 0.0 for v in mu_values):
        mu_values = [v for v in mu_values if v != 0.0]
        print("note: mu = 0 excluded from the sweep grid", file=sys.stderr)
    if not mu_values or not nu_values:
        raise UsageError("sweep grid is empty")

    rows = []
    for m in m_values:
        for mu in mu_values:
            for nu in nu_values:
                flags = theory.validity_domain(m, mu, nu)
                v = theory.visibility(m, mu, nu) if flags.moment_finite else None
                rp = (
                    theory.peak_snr_per_sqrt_n(m, mu, nu)
                    if flags.variance_finite
                    else None
                )
                rows.append((m, mu, nu, v, rp, flags.moment_finite, flags.variance_finite))
    reports.write_sweep_csv(rows, args.out)
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    if args.m < 2:
        raise UsageError("--m must be at least 2 for the binary closed forms")
    if args.n_samples < 2:
        raise UsageError("--n-samples must be at least 2")
    mask = builtin_mask(args.m)
    classes = classify_units(mask)
    orders = _parse_orders(args.orders, allow_negative_nu=False)
    _check_order_domain(args.m, orders)
    config = speckle.SpeckleConfig(i0=args.i0, seed=args.seed, n=mask.n)
    samples = speckle.run_simulation(config, mask, args.n_samples)

    shift = 1 if args.null_pairing else 0
    all_ok = True
    print(
        f"validate: m={args.m} N={args.n_samples} seed={args.seed} "
        f"{'null-pairing' if args.null_pairing else 'paired'}"
    )
    all_stats = metrics.class_moment_stats_multi(samples, classes, orders, pair_shift=shift)
    for order, stats in zip(orders, all_stats):
        if args.null_pairing:
            for label in ("signal", "background"):
                g = stats.g(label)
                se = stats.g_se(label)
                ok = abs(g - 1.0) < 5.0 * se
                all_ok &= ok
                print(
                    f"{'PASS' if ok else 'FAIL'} mu={order.mu:g} nu={order.nu:g} "
                    f"{label}: |g-1|={abs(g - 1):.3e} < 5*SE={5 * se:.3e}"
                )
            continue
        expected = {
            "signal": theory.moment_signal(args.m, order.mu, order.nu, args.i0),
            "background": theory.moment_background(args.m, order.mu, order.nu, args.i0),
        }
        for label, target in expected.items():
            got = stats.joint_mean[label]
            se = stats.joint_se[label]
            ok = abs(got - target) <= 5.0 * se
            all_ok &= ok
            print(
                f"{'PASS' if ok else 'FAIL'} mu={order.mu:g} nu={order.nu:g} "
                f"{label}: emp={got:.6g} analytic={target:.6g} "
                f"dev={abs(got - target) / se if se else float('inf'):.2f} SE"
            )
    print("all checks passed" if all_ok else "some checks FAILED")
    return EXIT_OK if all_ok else EXIT_RUNTIME


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fracgi",
        description="Thermal-light ghost imaging via fractional-order moments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the forward model and reconstruct")
    sim.add_argument("--object", help="mask file (PGM or CSV); built-in letter A if omitted")
    sim.add_argument("--binarize", type=float, default=None, metavar="T",
                     help="threshold in (0,1) mapping values to {0,1}")
    sim.add_argument("--i0", type=float, default=1.0, help="mean speckle intensity")
    sim.add_argument("--n-samples", type=int, required=True, help="frame count N")
    sim.add_argument("--orders", required=True, help="comma-separated mu:nu pairs")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--workers", type=int, default=None)
    sim.add_argument("--unsafe-negative-nu", action="store_true",
                     help="admit nu in (-1/2, 0] (heavy-tailed estimates)")
    sim.set_defaults(func=cmd_simulate)

    pred = sub.add_parser("predict", help="closed-form predictions for binary masks")
    pred.add_argument("--m", type=int, required=True, help="effective unit count")
    pred.add_argument("--mu", type=float, required=True)
    pred.add_argument("--nu", type=float, required=True)
    pred.add_argument("--n", type=int, default=120000, help="sampling count N")
    pred.add_argument("--i0", type=float, default=1.0)
    pred.set_defaults(func=cmd_predict)

    sweep = sub.add_parser("sweep", help="visibility / relative-SNR surfaces as CSV")
    sweep.add_argument("--m", required=True, help="comma-separated unit counts")
    sweep.add_argument("--mu", required=True, help="lo:hi:step")
    sweep.add_argument("--nu", required=True, help="lo:hi:step")
    sweep.add_argument("--out", required=True, help="output CSV path")
    sweep.set_defaults(func=cmd_sweep)

    val = sub.add_parser("validate", help="Monte-Carlo vs closed-form self check")
    val.add_argument("--m", type=int, default=20)
    val.add_argument("--n-samples", type=int, default=200000)
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--i0", type=float, default=1.0)
    val.add_argument("--orders", default=DEFAULT_ORDERS)
    val.add_argument("--null-pairing", action="store_true",
                     help="decorrelate bucket/reference pairing (contrast must vanish)")
    val.add_argument("--workers", type=int, default=None)
    val.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "workers", None) is None and hasattr(args, "workers"):
            args.workers = _default_workers()
        if getattr(args, "workers", 1) is not None and getattr(args, "workers", 1) < 1:
            raise UsageError("--workers must be positive")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MaskError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (theory.DomainError, moments.OrderDomainError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except Exception as exc:  # noqa: BLE001 - stable exit-code contract
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
