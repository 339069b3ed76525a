"""Batch audit driver.

Every subcommand reads a bundle directory, runs one analysis, and writes
machine-readable output (JSON-lines, CSV, or JSON) to --out or stdout.
Diagnostics go to stderr. Exit codes: 0 success, 2 invalid input,
3 computation failure. Reruns with the same flags and seed are
byte-identical.
"""

from __future__ import annotations

import argparse
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import ambiguity, detector, regions
from .bounds import (compute_bound_params, confidence_lower_bound,
                     confidence_upper_bound, delta_for_confidence)
from .bundle import load_bundle
from .errors import (ComputationError, MissingFile, TauOutOfRange,
                     ValidationError)
from .features import ReducedSpace, empirical_bound
from .hull import TrainingGeometry

_TAU_TABLE = (0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 0.99)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True)


def _write_out(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise MissingFile(f"config file unreadable: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config file is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError("config file must hold a JSON object")
    return cfg


def _setting(args, cfg: dict, key: str, default=None):
    """Flag wins, then config file, then default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    return cfg.get(key, default)


def _open_bundle(args, cfg):
    path = _setting(args, cfg, "bundle")
    if path is None:
        raise ValidationError("--bundle is required")
    bundle = load_bundle(path)
    dtype = _setting(args, cfg, "dtype")
    if dtype is not None:
        if dtype not in ("f32", "f64"):
            raise ValidationError(f"dtype must be f32 or f64, got {dtype!r}")
        if dtype == "f32":
            for block in (bundle.train, bundle.eval):
                if block is not None:
                    block.x = block.x.astype(np.float32).astype(np.float64)
    space = ReducedSpace.from_head(bundle.head)
    if bundle.phi_l2_bound is not None:
        space = space.with_bound(bundle.phi_l2_bound)
    else:
        blocks = [bundle.train.x]
        if bundle.eval is not None:
            blocks.append(bundle.eval.x)
        space = space.with_bound(empirical_bound(*blocks))
    geom = TrainingGeometry.from_bundle(space, bundle)
    return bundle, space, geom


def _require_eval(bundle):
    if bundle.eval is None:
        raise ValidationError("bundle has no eval set")
    return bundle.eval


def _map_ordered(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# subcommands

def cmd_score(args) -> int:
    cfg = _load_config(args.config)
    bundle, space, geom = _open_bundle(args, cfg)
    ev = _require_eval(bundle)
    conf = ambiguity.AmbiguityConfig(
        epsilon=float(_setting(args, cfg, "epsilon", 1e-3)),
        alpha=float(_setting(args, cfg, "alpha", 1.0)),
        eps_bar=float(_setting(args, cfg, "eps_bar", 0.01)))
    threads = int(_setting(args, cfg, "threads", 1))

    def one(i: int) -> str:
        p = ambiguity.profile(space, geom, ev.x[i], conf, sample_id=str(i))
        return _dump(p.to_dict())

    lines = _map_ordered(one, range(len(ev)), threads)
    _write_out("\n".join(lines) + "\n", _setting(args, cfg, "out"))
    return 0


def cmd_gate(args) -> int:
    cfg = _load_config(args.config)
    bundle, space, geom = _open_bundle(args, cfg)
    ev = _require_eval(bundle)
    conf = ambiguity.AmbiguityConfig(
        epsilon=float(_setting(args, cfg, "epsilon", 1e-3)),
        alpha=float(_setting(args, cfg, "alpha", 1.0)),
        eps_bar=float(_setting(args, cfg, "eps_bar", 0.01)))
    threads = int(_setting(args, cfg, "threads", 1))

    train_profiles = _map_ordered(
        lambda i: ambiguity.profile(space, geom, bundle.train.x[i], conf,
                                    sample_id=f"train-{i}"),
        range(len(bundle.train)), threads)
    pct = float(_setting(args, cfg, "percentile", 99.0))
    calib = ambiguity.build_calibration(train_profiles, "percentile", pct)
    tau = _setting(args, cfg, "tau")
    if tau is not None:
        conf.tau = float(tau)

    def one(i: int) -> str:
        d = ambiguity.infer(space, geom, ev.x[i], conf, calib, str(i))
        return _dump(d.to_dict())

    lines = _map_ordered(one, range(len(ev)), threads)
    _write_out("\n".join(lines) + "\n", _setting(args, cfg, "out"))
    return 0


def cmd_bounds(args) -> int:
    cfg = _load_config(args.config)
    bundle, space, _ = _open_bundle(args, cfg)
    params = compute_bound_params(space)
    n = space.n_classes
    sys.stderr.write(
        f"pair norms: min {params.rho_min:.6g}, max {params.rho_max:.6g}, "
        f"{n} classes\n")

    rows = []
    for tau in _TAU_TABLE:
        try:
            rows.append((tau, delta_for_confidence(tau, params.rho_min, n)))
        except TauOutOfRange:
            rows.append((tau, None))

    buf = io.StringIO()
    buf.write("tau,delta,distance,lower_bound,upper_bound\n")
    for tau, delta in rows:
        if delta is None:
            buf.write(f"{tau},,,,\n")
            continue
        lower = confidence_lower_bound(delta, params.rho_min, n)
        upper = confidence_upper_bound(delta, params.rho_max)
        buf.write(f"{tau},{delta:.10g},{delta:.10g},{lower:.10g},{upper:.10g}\n")
    grid = np.linspace(0.0, 2.0 * max((d for _, d in rows if d is not None),
                                      default=1.0), 41)
    for r in grid:
        lower = confidence_lower_bound(float(r), params.rho_min, n)
        upper = confidence_upper_bound(float(r), params.rho_max)
        buf.write(f",,{r:.10g},{lower:.10g},{upper:.10g}\n")
    _write_out(buf.getvalue(), _setting(args, cfg, "out"))
    return 0


def cmd_regions(args) -> int:
    cfg = _load_config(args.config)
    bundle, space, geom = _open_bundle(args, cfg)
    tau_conf = float(_setting(args, cfg, "tau_conf", 0.9))
    delta_h = float(_setting(args, cfg, "delta_h", 0.0))
    samples = int(_setting(args, cfg, "mc_samples", 100_000))
    seed = _setting(args, cfg, "seed")
    if seed is None:
        raise ValidationError("--seed is required for Monte Carlo commands")
    seed = int(seed)
    params = compute_bound_params(space)

    report: dict = {
        "n_classes": space.n_classes,
        "dim": space.dim,
        "domain_bound": space.require_bound(),
        "rho_min": params.rho_min,
        "rho_max": params.rho_max,
        "tau_conf": tau_conf,
        "delta_h": delta_h,
        "mc_samples": samples,
        "seed": seed,
    }

    polys = {}
    if space.dim <= regions.MAX_VERTEX_DIM:
        for i in range(space.n_classes):
            for j in range(i + 1, space.n_classes):
                key = f"{i}-{j}"
                try:
                    poly = regions.enumerate_boundary_vertices(space, i, j)
                except regions.NoInterface:
                    polys[key] = {"status": "no_interface"}
                    continue
                except ComputationError as exc:
                    polys[key] = {"status": "failed",
                                  "detail": type(exc).__name__}
                    continue
                vol = regions.polytope_volume(poly)
                entry = {
                    "status": "degenerate" if vol.degenerate else "ok",
                    "vertices": int(poly.vertices.shape[0]),
                    "volume": vol.volume,
                }
                try:
                    entry["slice_upper_bound"] = \
                        regions.slice_volume_upper_bound(space, i, j)
                except ComputationError:
                    pass
                polys[key] = entry
    else:
        sys.stderr.write(
            f"dim {space.dim} above vertex-enumeration limit "
            f"{regions.MAX_VERTEX_DIM}; skipping polytopes\n")
        report["polytopes_skipped"] = "DimensionTooHigh"
    report["polytopes"] = polys

    multi = regions.high_confidence_fraction_multi(
        space, tau_conf, n_samples=samples, seed=seed)
    report["confident_fraction"] = {
        "delta": multi.delta,
        "slab_fraction": multi.slab_fraction,
        "slab_ci": list(multi.slab_ci),
        "bound": multi.bound,
        "bound_ci": list(multi.bound_ci),
        "measured": multi.measured,
        "measured_ci": list(multi.measured_ci),
    }
    if space.n_classes == 2:
        binary = regions.high_confidence_fraction_binary(space, tau_conf)
        report["binary_chain"] = {
            "delta": binary.delta,
            "boundary_volume": binary.boundary_volume,
            "degenerate": binary.boundary_degenerate,
            "crude_bound": binary.crude_bound,
            "polytope_bound": binary.polytope_bound,
        }
    plain, grown = regions.overconfident_unknown_fraction(
        space, geom, tau_conf, delta_h, n_samples=samples, seed=seed)
    report["overconfident_outside_support"] = {
        tag: {
            "box_fraction": rep.box_fraction,
            "slab_fraction": rep.slab_fraction,
            "intersection_fraction": rep.intersection_fraction,
            "bound": rep.bound,
            "measured": rep.measured,
            "measured_ci": list(rep.measured_ci),
        }
        for tag, rep in (("box", plain), ("box_offset", grown))
    }
    _write_out(_dump(report) + "\n", _setting(args, cfg, "out"))
    return 0


def _read_profiles(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return [ambiguity.GeometryProfile.from_dict(json.loads(line))
                    for line in fh if line.strip()]
    except OSError as exc:
        raise MissingFile(f"profiles file unreadable: {exc}") from exc
    except (json.JSONDecodeError, KeyError) as exc:
        raise ValidationError(f"profiles file malformed: {exc}") from exc


def cmd_detector(args) -> int:
    cfg = _load_config(args.config)
    if args.action == "train":
        pos = detector.FeatureTable.from_profiles(
            _read_profiles(args.positive), label=1)
        neg = detector.FeatureTable.from_profiles(
            _read_profiles(args.negative), label=0)
        model = detector.train_detector(
            pos, neg, lam=float(_setting(args, cfg, "lam", 1e-4)))
        _write_out(model.to_json() + "\n", _setting(args, cfg, "out"))
        return 0
    if not args.model:
        raise ValidationError("detector eval needs --model")
    try:
        with open(args.model, encoding="utf-8") as fh:
            model = detector.DetectorModel.from_json(fh.read())
    except OSError as exc:
        raise MissingFile(f"model file unreadable: {exc}") from exc
    pos = detector.FeatureTable.from_profiles(
        _read_profiles(args.positive), label=1)
    neg = detector.FeatureTable.from_profiles(
        _read_profiles(args.negative), label=0)
    table = detector.FeatureTable(
        pos.ids + neg.ids, np.vstack([pos.x, neg.x]),
        np.concatenate([pos.y, neg.y]))
    metrics = detector.evaluate(model, table)
    _write_out(_dump(metrics) + "\n", _setting(args, cfg, "out"))
    return 0


# ---------------------------------------------------------------------------
# argument plumbing

def _add_common(p: argparse.ArgumentParser, bundle: bool = True) -> None:
    if bundle:
        p.add_argument("--bundle", help="bundle directory")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--config", help="JSON file of flag defaults")
    p.add_argument("--dtype", help="override embedding dtype (f32 or f64)")


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="ambit", description="geometry audits for linear classifier heads")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="per-sample geometry profiles")
    _add_common(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--eps-bar", dest="eps_bar", type=float)
    p.add_argument("--threads", type=int)
    p.set_defaults(run=cmd_score)

    p = sub.add_parser("gate", help="abstain/classify decisions")
    _add_common(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--eps-bar", dest="eps_bar", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--percentile", type=float)
    p.add_argument("--threads", type=int)
    p.set_defaults(run=cmd_gate)

    p = sub.add_parser("bounds", help="confidence-bound tables")
    _add_common(p)
    p.set_defaults(run=cmd_bounds)

    p = sub.add_parser("regions", help="volumetric region report")
    _add_common(p)
    p.add_argument("--tau-conf", dest="tau_conf", type=float)
    p.add_argument("--delta-h", dest="delta_h", type=float)
    p.add_argument("--mc-samples", dest="mc_samples", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(run=cmd_regions)

    p = sub.add_parser("detector", help="train or evaluate the failure detector")
    p.add_argument("action", choices=("train", "eval"))
    p.add_argument("--positive", required=True, help="failure profiles (JSON-lines)")
    p.add_argument("--negative", required=True, help="normal profiles (JSON-lines)")
    p.add_argument("--model", help="model JSON (eval only)")
    p.add_argument("--lam", type=float)
    _add_common(p, bundle=False)
    p.set_defaults(run=cmd_detector)
    return top


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except ValidationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except ComputationError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
