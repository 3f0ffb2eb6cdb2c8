"""Command-line surface: data ingestion, fitting, simulation, prediction,
symmetry testing, and covariance-surface export.

Verbs: ingest | fit | simulate | predict | test-symmetry | eval-cov.
Every command is deterministic given (config, seed), echoes its resolved
configuration into the output, and exits 0 on success, 1 on validation
errors, 2 on numerical failure.  ASYMCOV_THREADS caps internal parallelism.
"""

import argparse
import json
import os
import sys

import numpy as np
import pandas as pd

from .data import Dataset, PointSet
from .errors import AsymcovError, NumericalError, ValidationError
from .fitting import FitOptions, FitResult, fit_mle, lrt_symmetry
from .likelihood import DENSE_CAP, build_neighbor_plan
from .predict import rolling_prediction
from .spacetime import SpaceTimeSpec, spec_from_dict, spec_to_dict, st_cov
from .spectral import SimRequest, SpectralProposal, replicate_rng, simulate_unconditional

_KM_PER_DEG_LAT = 110.574
_KM_PER_DEG_LON = 111.320


def _n_threads():
    try:
        return max(1, int(os.environ.get("ASYMCOV_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------


def ingest_station_csv(
    path,
    sqrt_transform=True,
    n_harmonics=6,
    period=365.25,
    phase="fractional",
    train_end=None,
    value_col="value",
):
    """Station-CSV ingestion and preprocessing.

    Expects columns station_id, date, value plus either (lon, lat) or
    (x_km, y_km).  Pipeline: optional square-root transform, per-station
    mean removal, least-squares removal of n_harmonics seasonal harmonic
    pairs (period in days; phase 'fractional' counts continuous days since
    the first date, 'doy' uses day-of-year), and lon/lat projection to
    kilometers via a local equirectangular map about the station centroid.
    Mean parameters are estimated on the training window only and applied
    to the holdout.

    Returns (train: Dataset, holdout: Dataset | None, info: dict).
    """
    df = pd.read_csv(path)
    needed = {"station_id", "date", value_col}
    if not needed.issubset(df.columns):
        raise ValidationError(f"CSV must contain columns {sorted(needed)}")
    bad = df[df[value_col].isna()]
    if len(bad):
        raise ValidationError(f"malformed value at line {bad.index[0] + 2}")
    try:
        dates = pd.to_datetime(df["date"], format="mixed")
    except (ValueError, TypeError) as exc:
        raise ValidationError(f"unparseable date column: {exc}")

    vals = df[value_col].to_numpy(dtype=float)
    if sqrt_transform:
        if np.any(vals < 0):
            line = int(np.argmax(vals < 0)) + 2
            raise ValidationError(f"negative value under sqrt transform at line {line}")
        vals = np.sqrt(vals)

    if {"x_km", "y_km"}.issubset(df.columns):
        xy = df[["x_km", "y_km"]].to_numpy(dtype=float)
        proj = "pre-projected"
    elif {"lon", "lat"}.issubset(df.columns):
        lon = df["lon"].to_numpy(dtype=float)
        lat = df["lat"].to_numpy(dtype=float)
        stations = df["station_id"].to_numpy()
        uniq = pd.unique(stations)
        lon0 = np.mean([lon[stations == s][0] for s in uniq])
        lat0 = np.mean([lat[stations == s][0] for s in uniq])
        xy = np.column_stack(
            [
                (lon - lon0) * _KM_PER_DEG_LON * np.cos(np.deg2rad(lat0)),
                (lat - lat0) * _KM_PER_DEG_LAT,
            ]
        )
        proj = f"equirectangular about ({lon0:.4f}, {lat0:.4f})"
    else:
        raise ValidationError("CSV needs either (lon, lat) or (x_km, y_km) columns")

    epoch = dates.min()
    tdays = (dates - epoch).dt.total_seconds().to_numpy() / 86400.0
    if phase == "fractional":
        tau = tdays
    elif phase == "doy":
        tau = dates.dt.dayofyear.to_numpy(dtype=float)
    else:
        raise ValidationError("phase must be 'fractional' or 'doy'")

    if train_end is not None:
        cutoff = (pd.to_datetime(train_end) - epoch).total_seconds() / 86400.0
        train_mask = tdays < cutoff
    else:
        train_mask = np.ones(len(df), dtype=bool)
    if not train_mask.any():
        raise ValidationError("training window is empty")

    station_codes, station_idx = np.unique(df["station_id"].to_numpy(), return_inverse=True)
    n_st = len(station_codes)
    # design: station indicators + harmonic pairs, fit on training rows only
    cols = [np.eye(n_st)[station_idx]]
    for k in range(1, n_harmonics + 1):
        ang = 2.0 * np.pi * k * tau / period
        cols.append(np.column_stack([np.sin(ang), np.cos(ang)]))
    X = np.column_stack(cols)
    beta, *_ = np.linalg.lstsq(X[train_mask], vals[train_mask], rcond=None)
    resid = vals - X @ beta

    def build(mask):
        if not mask.any():
            return None
        return Dataset(
            PointSet(xy[mask], tdays[mask]),
            resid[mask],
            meta={"stations": station_codes.tolist()},
        )

    info = {
        "n_train": int(train_mask.sum()),
        "n_holdout": int((~train_mask).sum()),
        "stations": station_codes.tolist(),
        "projection": proj,
        "epoch": str(epoch.date()),
        "sqrt_transform": bool(sqrt_transform),
        "n_harmonics": int(n_harmonics),
        "period": float(period),
        "phase": phase,
        "station_means": beta[:n_st].tolist(),
        "harmonic_coefs": beta[n_st:].tolist(),
    }
    return build(train_mask), build(~train_mask), info


# ---------------------------------------------------------------------------
# command plumbing
# ---------------------------------------------------------------------------


def _load_config(args):
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
    return cfg


def _spec_from_config(cfg, args):
    doc = dict(cfg.get("spec", {}))
    if getattr(args, "family", None):
        doc["family"] = args.family
    if getattr(args, "spatial", None):
        doc["spatial_kind"] = args.spatial
    if getattr(args, "temporal", None):
        doc["temporal_kind"] = args.temporal
    for key in (
        "sigma", "a_s", "a_t", "alpha_s", "alpha_t", "nu_s", "nu_t",
        "xi", "b", "delta", "nugget",
    ):
        v = getattr(args, key, None)
        if v is not None:
            doc[key] = v
    doc.setdefault("family", "separable_type")
    return spec_from_dict(doc)


def _echo_config(args, extra=None):
    doc = {k: v for k, v in vars(args).items() if k != "func" and v is not None}
    if extra:
        doc.update(extra)
    return doc


def _write_sidecar(out_path, config):
    with open(str(out_path) + ".config.json", "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True, default=str)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_ingest(args):
    train, holdout, info = ingest_station_csv(
        args.data,
        sqrt_transform=not args.no_sqrt,
        n_harmonics=args.harmonics,
        period=args.period,
        phase=args.phase,
        train_end=args.train_end,
    )
    prefix = args.out
    train.to_csv(prefix + "_train.csv")
    if holdout is not None:
        holdout.to_csv(prefix + "_holdout.csv")
    info["config"] = _echo_config(args)
    with open(prefix + "_info.json", "w") as fh:
        json.dump(info, fh, indent=2, sort_keys=True, default=str)
    print(f"ingested {info['n_train']} training rows, {info['n_holdout']} holdout rows")
    return 0


def _fit_from_args(args, data, asymmetric):
    cfg = _load_config(args)
    cfg.setdefault("spec", {}).setdefault("dim", data.points.dim)
    spec = _spec_from_config(cfg, args)
    opts = FitOptions(
        asymmetric=asymmetric,
        estimate_alpha=bool(getattr(args, "estimate_alpha", False)),
        estimate_nu=bool(getattr(args, "estimate_nu", False)),
        estimate_b=bool(getattr(args, "estimate_b", False)),
        max_iter=args.max_iter,
    )
    plan = None
    if not args.dense and (args.neighbors or data.n > DENSE_CAP):
        m = args.neighbors or 30
        plan = build_neighbor_plan(data.points, m=m, time_weight=args.time_weight)
    init = cfg.get("init")
    return fit_mle(spec, data, plan=plan, options=opts, init=init), spec


def cmd_fit(args):
    data = Dataset.from_csv(args.data)
    fit, _ = _fit_from_args(args, data, asymmetric=args.asym)
    fit.to_json(args.out, extra={"config": _echo_config(args)})
    print(
        f"family={fit.family} k={fit.k} loglik={fit.loglik:.1f} aic={fit.aic:.1f} "
        f"converged={fit.converged} seconds={fit.wall_time:.1f}"
    )
    if not fit.converged:
        print("fit did not converge within max-iter", file=sys.stderr)
        return 2
    return 0


def cmd_test_symmetry(args):
    data = Dataset.from_csv(args.data)
    fit_sym, _ = _fit_from_args(args, data, asymmetric=False)
    args_warm = args
    fit_asym, _ = _fit_from_args(args_warm, data, asymmetric=True)
    rep = lrt_symmetry(fit_sym, fit_asym)
    doc = {
        "statistic": rep["statistic"],
        "df": rep["df"],
        "p_value": rep["p_value"],
        "loglik_sym": fit_sym.loglik,
        "loglik_asym": fit_asym.loglik,
        "aic_sym": fit_sym.aic,
        "aic_asym": fit_asym.aic,
        "config": _echo_config(args),
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    print(f"LRT statistic={rep['statistic']:.3f} df={rep['df']} p={rep['p_value']:.4f}")
    return 0


def cmd_simulate(args):
    cfg = _load_config(args)
    spec = _spec_from_config(cfg, args)
    nx, ny, nt = (int(v) for v in args.grid.split("x"))
    ext, text = args.extent, args.t_extent
    xs = np.linspace(0.0, ext, nx)
    ts = np.linspace(0.0, text, nt)
    if spec.dim == 2:
        ys = np.linspace(0.0, ext, ny)
        X, Y, T = np.meshgrid(xs, ys, ts, indexing="ij")
        pts = PointSet(np.column_stack([X.ravel(), Y.ravel()]), T.ravel())
    else:
        X, T = np.meshgrid(xs, ts, indexing="ij")
        pts = PointSet(X.ravel()[:, None], T.ravel())
    prop_s = SpectralProposal(nu=args.proposal_nu, a=args.proposal_a)
    prop_t = SpectralProposal(nu=args.proposal_nu, a=args.proposal_a)
    rows = []
    for rep in range(args.replicates):
        req = SimRequest(spec, pts, L=args.L, proposal_s=prop_s, proposal_t=prop_t,
                         seed=args.seed)
        y = simulate_unconditional(req, rng=replicate_rng(args.seed, rep))
        rows.append(y)
    with open(args.out, "w") as fh:
        hdr = ["x", "y", "t", "value", "replicate"] if spec.dim == 2 else ["x", "t", "value", "replicate"]
        fh.write(",".join(hdr) + "\n")
        for rep, y in enumerate(rows):
            block = np.column_stack([pts.space, pts.time, y, np.full(pts.n, rep)])
            np.savetxt(fh, block, delimiter=",", fmt="%.10g")
    _write_sidecar(args.out, _echo_config(args, {"spec": spec_to_dict(spec)}))
    print(f"wrote {args.replicates} replicate(s) x {pts.n} points to {args.out}")
    return 0


def cmd_eval_cov(args):
    cfg = _load_config(args)
    spec = _spec_from_config(cfg, args)
    hs = np.linspace(-args.h_max, args.h_max, args.n_h)
    us = np.linspace(-args.u_max, args.u_max, args.n_u)
    with open(args.out, "w") as fh:
        if spec.dim == 2:
            fh.write("h1,h2,u,cov\n")
            for u in us:
                H = np.column_stack([np.repeat(hs, args.n_h), np.tile(hs, args.n_h)])
                c = st_cov(spec, H, np.full(H.shape[0], u))
                np.savetxt(fh, np.column_stack([H, np.full(H.shape[0], u), c]),
                           delimiter=",", fmt="%.10g")
        else:
            fh.write("h,u,cov\n")
            for u in us:
                c = st_cov(spec, hs, np.full(len(hs), u))
                np.savetxt(fh, np.column_stack([hs, np.full(len(hs), u), c]),
                           delimiter=",", fmt="%.10g")
    _write_sidecar(args.out, _echo_config(args, {"spec": spec_to_dict(spec)}))
    print(f"wrote covariance surface to {args.out}")
    return 0


def cmd_predict(args):
    with open(args.model) as fh:
        doc = json.load(fh)
    spec = spec_from_dict(doc["spec"])
    data = Dataset.from_csv(args.data)
    table = rolling_prediction(
        data,
        spec,
        design=args.design,
        horizon=args.horizon,
        t_start=args.t_start,
        t_end=args.t_end,
        m_mean=args.m_mean,
        m_sim=args.m_sim,
        n_draws=args.n_draws,
        seed=args.seed,
        time_weight=args.time_weight,
        n_jobs=_n_threads(),
    )
    table.to_csv(args.out)
    _write_sidecar(args.out, _echo_config(args))
    kept = sum(1 for r in table.rows if not r.skipped)
    print(f"wrote {kept} score rows to {args.out} (mean CRPS {table.mean_crps():.4f})")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="asymcov", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add_spec_flags(q):
        q.add_argument("--config", help="JSON config file (section 'spec', 'init')")
        q.add_argument("--family", choices=[
            "separable_type", "gneiting_sqexp", "gneiting_cauchy",
            "lagrangian_sqexp", "iso_exponential", "iso_matern"])
        q.add_argument("--spatial", dest="spatial")
        q.add_argument("--temporal", dest="temporal")
        for name in ("sigma", "a_s", "a_t", "alpha_s", "alpha_t", "nu_s", "nu_t",
                     "xi", "b", "delta", "nugget"):
            q.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)

    q = sub.add_parser("ingest", help="preprocess a station CSV")
    q.add_argument("--data", required=True)
    q.add_argument("--out", required=True, help="output prefix")
    q.add_argument("--no-sqrt", action="store_true")
    q.add_argument("--harmonics", type=int, default=6)
    q.add_argument("--period", type=float, default=365.25)
    q.add_argument("--phase", choices=["fractional", "doy"], default="fractional")
    q.add_argument("--train-end", dest="train_end")
    q.set_defaults(func=cmd_ingest)

    for name, fn, asym_flag in (("fit", cmd_fit, True), ("test-symmetry", cmd_test_symmetry, False)):
        q = sub.add_parser(name)
        add_spec_flags(q)
        q.add_argument("--data", required=True)
        q.add_argument("--out", required=True)
        q.add_argument("--neighbors", type=int, help="Vecchia conditioning-set size")
        q.add_argument("--dense", action="store_true")
        q.add_argument("--time-weight", dest="time_weight", type=float, default=1e6)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--max-iter", dest="max_iter", type=int, default=500)
        q.add_argument("--estimate-alpha", dest="estimate_alpha", action="store_true")
        q.add_argument("--estimate-nu", dest="estimate_nu", action="store_true")
        q.add_argument("--estimate-b", dest="estimate_b", action="store_true")
        if asym_flag:
            q.add_argument("--asym", action="store_true")
        q.set_defaults(func=fn)

    q = sub.add_parser("simulate", help="unconditional spectral simulation")
    add_spec_flags(q)
    q.add_argument("--grid", default="61x61x12", help="nx x ny x nt")
    q.add_argument("--extent", type=float, default=10.0)
    q.add_argument("--t-extent", dest="t_extent", type=float, default=11.0)
    q.add_argument("-L", type=int, default=1000)
    q.add_argument("--replicates", type=int, default=1)
    q.add_argument("--proposal-nu", dest="proposal_nu", type=float, default=0.5)
    q.add_argument("--proposal-a", dest="proposal_a", type=float, default=1.0)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_simulate)

    q = sub.add_parser("eval-cov", help="export a covariance surface as CSV")
    add_spec_flags(q)
    q.add_argument("--h-max", dest="h_max", type=float, default=5.0)
    q.add_argument("--u-max", dest="u_max", type=float, default=5.0)
    q.add_argument("--n-h", dest="n_h", type=int, default=41)
    q.add_argument("--n-u", dest="n_u", type=int, default=41)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_eval_cov)

    q = sub.add_parser("predict", help="rolling prediction scoring")
    q.add_argument("--model", required=True, help="fit JSON with a 'spec' section")
    q.add_argument("--data", required=True)
    q.add_argument("--design", choices=["all_locations", "leave_one_out"],
                   default="all_locations")
    q.add_argument("--horizon", type=int, default=1)
    q.add_argument("--t-start", dest="t_start", type=float)
    q.add_argument("--t-end", dest="t_end", type=float)
    q.add_argument("--m-mean", dest="m_mean", type=int, default=60)
    q.add_argument("--m-sim", dest="m_sim", type=int, default=8)
    q.add_argument("--n-draws", dest="n_draws", type=int, default=50)
    q.add_argument("--time-weight", dest="time_weight", type=float, default=1e6)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--out", required=True)
    q.set_defaults(func=cmd_predict)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except AsymcovError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
