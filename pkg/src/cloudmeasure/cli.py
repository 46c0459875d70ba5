"""Command-line front end.

Subcommands: ``generate`` (measure zoo to CSV/JSON-lines), ``analyze``
(flatness + doubling + density + moments per center), ``cascade`` (the
multiscale normal-frame run), ``classify`` (regular/singular labels) and
``schedule`` (exponent-ledger audit).

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical
failure.  Reports are deterministic: identical flags and seed give
byte-identical files, independent of the worker-pool size (results are
reduced in fixed center order).  The default parallelism comes from the
CLOUDMEASURE_WORKERS environment variable.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import cascade as cas
from . import doubling as dbl
from . import flatness as flat
from . import generators as gen
from . import moments as mom
from .errors import (
    CloudMeasureError,
    DataFormatError,
    EmptyRegionError,
    InfeasibleScheduleError,
    ResolutionExhaustedError,
)
from .measure import build_index, load_cloud, save_cloud
from .report import dumps_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _workers(args) -> int:
    if getattr(args, "workers", None):
        return max(1, args.workers)
    env = os.environ.get("CLOUDMEASURE_WORKERS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _parallel_map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _parse_indices(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad index list {text!r}") from None


def _parse_coords(text: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",")], dtype=float)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad coordinate list {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cloudmeasure",
        description="Multiscale flatness and doubling statistics of weighted point clouds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="sample a zoo measure to a file")
    p_gen.add_argument("--kind", required=True, choices=gen.KINDS)
    p_gen.add_argument("--n", type=int, default=None)
    p_gen.add_argument("--m", type=int, default=None)
    p_gen.add_argument("--N", type=int, default=100_000)
    p_gen.add_argument("--extent", type=float, default=1.0)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--beta0", type=float, default=0.5, help="holder_graph roughness exponent")
    p_gen.add_argument("--amplitude", type=float, default=0.1, help="holder_graph amplitude")
    p_gen.add_argument("--density-id", default="radial_power")
    p_gen.add_argument("--c", type=float, default=0.2, help="perturbed_density strength")
    p_gen.add_argument("--alpha", type=float, default=0.5, help="perturbed_density exponent")

    p_an = sub.add_parser("analyze", help="flatness/doubling/density/moment report per center")
    p_an.add_argument("--input", required=True)
    p_an.add_argument("--n", type=int, default=None, help="intrinsic dimension if no sidecar")
    p_an.add_argument("--centers", type=_parse_indices, required=True,
                      help="comma-separated sample indices used as centers")
    p_an.add_argument("--r-max", type=float, default=None)
    p_an.add_argument("--min-count", type=int, default=dbl.MIN_BALL_COUNT)
    p_an.add_argument("--resolution", type=int, default=10_000)
    p_an.add_argument("--seed", type=int, default=0)
    p_an.add_argument("--workers", type=int, default=None)
    p_an.add_argument("--out", default=None)
    p_an.add_argument("--csv-prefix", default=None,
                      help="also write <prefix>_doubling.csv and <prefix>_density.csv")

    p_cas = sub.add_parser("cascade", help="multiscale normal-frame run at one center")
    p_cas.add_argument("--input", required=True)
    p_cas.add_argument("--n", type=int, default=None)
    group = p_cas.add_mutually_exclusive_group(required=True)
    group.add_argument("--center-index", type=int, default=None)
    group.add_argument("--center", type=_parse_coords, default=None)
    p_cas.add_argument("--kappa", type=float, required=True)
    p_cas.add_argument("--alpha", type=float, default=1.0)
    p_cas.add_argument("--r1", type=float, default=None)
    p_cas.add_argument("--k", type=int, default=None, help="levels; default m - n")
    p_cas.add_argument("--out", default=None)

    p_cls = sub.add_parser("classify", help="regular/singular labels per center")
    p_cls.add_argument("--input", required=True)
    p_cls.add_argument("--n", type=int, default=None)
    p_cls.add_argument("--centers", type=_parse_indices, required=True)
    p_cls.add_argument("--eta", type=float, default=0.3)
    p_cls.add_argument("--r-max", type=float, required=True)
    p_cls.add_argument("--min-count", type=int, default=dbl.MIN_BALL_COUNT)
    p_cls.add_argument("--resolution", type=int, default=2000)
    p_cls.add_argument("--out", default=None)

    p_sch = sub.add_parser("schedule", help="exponent ledger for (kappa, alpha, k)")
    p_sch.add_argument("--kappa", type=float, required=True)
    p_sch.add_argument("--alpha", type=float, default=1.0)
    p_sch.add_argument("--k", type=int, default=3)
    p_sch.add_argument("--out", default=None)

    return parser


def _cmd_generate(args) -> int:
    kind = args.kind
    defaults = {
        "plane": (2, 3),
        "sphere": (2, 3),
        "kp_cone": (3, 4),
        "holder_graph": (2, 3),
        "perturbed_density": (2, 3),
    }
    n = args.n if args.n is not None else defaults[kind][0]
    m = args.m if args.m is not None else defaults[kind][1]
    params = {}
    if kind == "holder_graph":
        params = {"beta0": args.beta0, "amplitude": args.amplitude}
    elif kind == "perturbed_density":
        params = {"density_id": args.density_id, "c": args.c, "alpha": args.alpha}
    spec = gen.GeneratorSpec(
        kind=kind, n=n, m=m, N=args.N, extent=args.extent, params=params, seed=args.seed
    )
    cloud = gen.generate(spec)
    save_cloud(cloud, args.out)
    sys.stdout.write(f"wrote {cloud.size} samples to {args.out}\n")
    return EXIT_OK


def _radii_for_center(indexed, center, r_max, min_count):
    return dbl.reliable_radius_grid(indexed, center, r_max, min_count=min_count)


def _cmd_analyze(args) -> int:
    cloud = load_cloud(args.input, n=args.n)
    indexed = build_index(cloud)
    spread = cloud.points.max(axis=0) - cloud.points.min(axis=0)
    r_max = args.r_max if args.r_max is not None else 0.25 * float(np.linalg.norm(spread))
    centers = [cloud.points[i] for i in args.centers]

    def one(center):
        entry: dict = {"center": center.tolist()}
        warnings = []
        try:
            radii = _radii_for_center(indexed, center, r_max, args.min_count)
        except ResolutionExhaustedError as exc:
            return {"center": center.tolist(), "warnings": [str(exc)]}
        profile = flat.flatness_profile(indexed, center, radii, resolution=args.resolution)
        entry["flatness"] = profile.to_dict()
        entry["doubling"] = dbl.doubling_profile(indexed, center, radii).to_dict()
        try:
            entry["density"] = dbl.density_estimate(indexed, center, radii).to_dict()
        except ResolutionExhaustedError as exc:
            warnings.append(str(exc))
        entry["moments"] = [mom.moment_form(indexed, center, float(r)).to_dict() for r in radii]
        entry["warnings"] = warnings
        return entry

    results = _parallel_map(one, centers, _workers(args))
    for cid, entry in zip(args.centers, results):
        entry["center_id"] = cid
        if "flatness" in entry:
            entry["flatness"]["center_id"] = cid
    summary = "flat"
    for entry in results:
        thetas = [s["theta"] for s in entry.get("flatness", {}).get("scales", [])]
        if thetas and max(thetas) >= 0.3:
            summary = "non-flat centers present"
    payload = {
        "config": {
            "command": "analyze",
            "input": args.input,
            "centers": args.centers,
            "r_max": r_max,
            "min_count": args.min_count,
            "resolution": args.resolution,
            "seed": args.seed,
            "workers": _workers(args),
        },
        "summary": summary,
        "centers": results,
    }
    _write(args.out, dumps_report(payload))
    if args.csv_prefix:
        profiles = [
            dbl.doubling_profile(indexed, c, _radii_for_center(indexed, c, r_max, args.min_count))
            for c in centers
        ]
        reports = []
        for c in centers:
            try:
                reports.append(
                    dbl.density_estimate(
                        indexed, c, _radii_for_center(indexed, c, r_max, args.min_count)
                    )
                )
            except ResolutionExhaustedError:
                pass
        with open(f"{args.csv_prefix}_doubling.csv", "w") as fh:
            fh.write(dbl.doubling_csv(profiles, ids=args.centers))
        with open(f"{args.csv_prefix}_density.csv", "w") as fh:
            fh.write(dbl.density_csv(reports, ids=args.centers[: len(reports)]))
    return EXIT_OK


def _cmd_cascade(args) -> int:
    cloud = load_cloud(args.input, n=args.n)
    indexed = build_index(cloud)
    center = (
        cloud.points[args.center_index] if args.center_index is not None else args.center
    )
    k = args.k if args.k is not None else cloud.m - cloud.n
    try:
        schedule = cas.make_schedule(args.kappa, args.alpha, k)
        ledger = cas.check_schedule(schedule)
        if not ledger.all_pass:
            sys.stderr.write(dumps_report({"ledger": ledger.to_dict()}))
            return EXIT_CONFIG
    except InfeasibleScheduleError as exc:
        sys.stderr.write(f"infeasible schedule: {exc}\n")
        return EXIT_CONFIG
    r1 = args.r1 if args.r1 is not None else cas.default_start_radius(indexed, center)
    result = cas.run_cascade(indexed, center, r1, schedule)
    payload = {
        "config": {
            "command": "cascade",
            "input": args.input,
            "kappa": args.kappa,
            "alpha": args.alpha,
            "k": k,
            "r1": r1,
        },
        "ledger": cas.check_schedule(schedule).to_dict(),
        "result": result.to_dict(),
    }
    _write(args.out, dumps_report(payload))
    return EXIT_OK


def _cmd_classify(args) -> int:
    cloud = load_cloud(args.input, n=args.n)
    indexed = build_index(cloud)
    centers = np.stack([cloud.points[i] for i in args.centers])
    radii = dbl.reliable_radius_grid(indexed, centers[0], args.r_max, min_count=args.min_count)
    report = flat.classify_points(
        indexed, centers, args.eta, radii, resolution=args.resolution
    )
    payload = {
        "config": {
            "command": "classify",
            "input": args.input,
            "centers": args.centers,
            "eta": args.eta,
            "r_max": args.r_max,
            "resolution": args.resolution,
        },
        "report": report.to_dict(),
    }
    _write(args.out, dumps_report(payload))
    return EXIT_OK


def _cmd_schedule(args) -> int:
    try:
        schedule = cas.make_schedule(args.kappa, args.alpha, args.k)
    except InfeasibleScheduleError as exc:
        sys.stderr.write(f"infeasible schedule: {exc}\n")
        return EXIT_CONFIG
    ledger = cas.check_schedule(schedule)
    payload: dict = {
        "config": {"command": "schedule", "kappa": args.kappa, "alpha": args.alpha, "k": args.k},
        "schedule": schedule.to_dict(),
        "ledger": ledger.to_dict(),
    }
    if ledger.all_pass:
        payload["prediction"] = cas.predicted_exponent(schedule, ledger).to_dict()
        _write(args.out, dumps_report(payload))
        return EXIT_OK
    _write(args.out, dumps_report(payload))
    return EXIT_CONFIG


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "analyze": _cmd_analyze,
        "cascade": _cmd_cascade,
        "classify": _cmd_classify,
        "schedule": _cmd_schedule,
    }
    try:
        return handlers[args.command](args)
    except DataFormatError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return EXIT_DATA
    except InfeasibleScheduleError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except (ResolutionExhaustedError, EmptyRegionError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except CloudMeasureError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
