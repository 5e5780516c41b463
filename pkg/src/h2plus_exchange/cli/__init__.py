"""Command-line driver: sweeps, extrapolation, fits and diagnostics."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from fractions import Fraction
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import gmpy2

from ..accel import extrapolate_J
from ..asymptotics import FitInput, fit_jk, fit_wk, scale_J, select_degree
from ..basis import enumerate_basis
from ..exchange import ExchangeRecord, local_energy
from ..integrals import build_matrices
from ..mpkernel import PrecisionContext, default_digits, mpf, to_str
from ..perturbation import Resolvent
from .config import ConfigError, RunConfig, canonical_R
from .pipeline import SeriesOptions, compute_point, context_for, converged_hs, converged_rs
from .store import ResultsStore

log = logging.getLogger("h2plus_exchange")


class MissingGridPointError(LookupError):
    pass


def _digits_for(R: str, cfg: RunConfig) -> int:
    return cfg.digits if cfg.digits is not None else default_digits(mpf(R))


def _options(cfg: RunConfig) -> SeriesOptions:
    return SeriesOptions(cfg.hs_max_order, cfg.rs_max_order, cfg.tol_digits)


def _point_worker(args):
    """Runs in a worker process; returns plain rows so nothing precision-bound is pickled."""
    R, omegas, methods, formulas, digits, opts = args
    recs = compute_point(R, omegas, methods, formulas, digits, opts)
    return [(r.R, r.Omega, r.method, r.formula, r.order, r.digits, to_str(r.J), r.provenance)
            for r in recs]


# --------------------------------------------------------------------------
# subcommands


def cmd_sweep(cfg: RunConfig) -> ResultsStore:
    store = ResultsStore(cfg.output)
    if not cfg.cache:
        store._rows.clear()
    todo, cached = [], []
    for R in cfg.all_R():
        digits = _digits_for(R, cfg)
        keys = [(R, o, m, f, "converged", digits)
                for o in cfg.omegas for m in cfg.methods for f in cfg.formulas]
        if cfg.cache and all(store.has(*k) for k in keys):
            cached.append(R)
        else:
            todo.append((R, cfg.omegas, cfg.methods, cfg.formulas, digits, _options(cfg)))
    failures, timings = [], {}
    t0 = time.perf_counter()

    def collect(job, result):
        for R, om, meth, form, order, digits, J, prov in result:
            store.add(ExchangeRecord(R, om, meth, form, order, J, digits, prov))
            timings.setdefault(R, {})[f"{om}/{meth}/{form}"] = prov.get("seconds")
        store.flush()               # an interrupted sweep keeps finished points
        log.info("R=%s done", job[0])

    if cfg.jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            futures = [(job, pool.submit(_point_worker, job)) for job in todo]
            for job, fut in futures:
                try:
                    collect(job, fut.result())
                except Exception as exc:  # recorded, sweep continues
                    failures.append({"R": job[0], "error": f"{type(exc).__name__}: {exc}"})
    else:
        for job in todo:
            try:
                collect(job, _point_worker(job))
            except Exception as exc:
                failures.append({"R": job[0], "error": f"{type(exc).__name__}: {exc}"})
    store.flush()
    store.write_manifest(cfg.to_dict(), computed=[j[0] for j in todo if j[0] not in {f["R"] for f in failures}],
                         cached=cached, failures=failures, seconds=round(time.perf_counter() - t0, 3),
                         point_timings=timings, digits={R: _digits_for(R, cfg) for R in cfg.all_R()})
    return store


def cmd_extrapolate(cfg: RunConfig, store: ResultsStore | None = None) -> list:
    """Levin-extrapolate every (R, method, formula) ladder found in the store."""
    store = store or ResultsStore(cfg.output)
    out = []
    for R in cfg.all_R():
        digits = _digits_for(R, cfg)
        for method in cfg.methods:
            for formula in cfg.formulas:
                rows = [store.get(R, o, method, formula, "converged", digits) for o in cfg.omegas]
                if any(r is None for r in rows):
                    continue
                with PrecisionContext(digits).activate():
                    recs = [ExchangeRecord(R, o, method, formula, "converged", gmpy2.mpfr(r["J"]), digits)
                            for o, r in zip(cfg.omegas, rows)]
                    ext = extrapolate_J(recs) if len(recs) > 1 else recs[0]
                    ext = ExchangeRecord(R, "extrapolated", method, formula, "converged", ext.J, digits,
                                         {"orders": f"ladder {cfg.omega_min}-{cfg.omega_max}"})
                    store.add(ext)
                    out.append(ext)
    store.flush()
    return out


def _series(store, cfg, Rs, method, formula, omega):
    missing, values = [], []
    for R in Rs:
        row = store.get(R, omega, method, formula, "converged", _digits_for(R, cfg))
        if row is None:
            missing.append((R, omega, method, formula))
        else:
            values.append(row["J"])
    return values, missing


def cmd_fit(cfg: RunConfig, store: ResultsStore | None = None) -> dict:
    store = store or ResultsStore(cfg.output)
    cmd_extrapolate(cfg, store)
    train, test = cfg.grid.training(), cfg.grid.test_points()
    digits = max(_digits_for(R, cfg) for R in train + test)
    results, extrapolated = {}, {}
    out = Path(cfg.output)
    with PrecisionContext(digits).activate():
        for method in cfg.methods:
            for formula in cfg.formulas:
                Jt, miss1 = _series(store, cfg, train, method, formula, "extrapolated")
                Js, miss2 = _series(store, cfg, test, method, formula, "extrapolated")
                if miss1 or miss2:
                    raise MissingGridPointError(f"missing records: {miss1 + miss2}")
                Jt = [mpf(v) for v in Jt]
                Js = [mpf(v) for v in Js]
                L = cfg.fit_L
                if L is None:
                    L = select_degree([c for c in cfg.fit_candidates if len(train) >= c + 5],
                                      train, Jt, test, Js)
                fit = fit_jk(FitInput(train, Jt, test, Js, L))
                tag = f"{method}_{formula}"
                results[tag] = fit
                extrapolated[tag] = dict(zip(train + test, Jt + Js))
                payload = {
                    "method": method, "formula": formula, "L": L,
                    "j": [to_str(c, 20) for c in fit.j],
                    "test_residuals": [to_str(r, 6) for r in fit.test_residuals],
                    "train_residuals": [to_str(r, 6) for r in fit.train_residuals],
                    "condition": to_str(fit.condition, 6),
                    "grid": {"training": train, "test": test,
                             "omega_ladder": [cfg.omega_min, cfg.omega_max]},
                }
                with open(out / f"fit_{tag}.json", "w") as fh:
                    json.dump(payload, fh, indent=2)
                    fh.write("\n")
                raw, _ = _series(store, cfg, train + test, method, formula, cfg.omega_max)
                with open(out / f"fitdata_{tag}.csv", "w", newline="") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["R", "J_raw", "J_extrapolated", "J_scaled", "set"])
                    for i, R in enumerate(train + test):
                        J = extrapolated[tag][R]
                        w.writerow([R, raw[i], to_str(J, digits), to_str(scale_J(R, J), digits),
                                    "train" if i < len(train) else "test"])
        for formula in cfg.formulas:
            if f"RS_{formula}" in extrapolated and f"HS_{formula}" in extrapolated:
                Rs = train + test
                w = fit_wk(Rs, [extrapolated[f"RS_{formula}"][R] for R in Rs],
                           [extrapolated[f"HS_{formula}"][R] for R in Rs])
                with open(out / f"fit_wk_{formula}.json", "w") as fh:
                    json.dump({"formula": formula, "w": {str(k): to_str(v, 20) for k, v in w.items()}},
                              fh, indent=2)
                    fh.write("\n")
    return results


def cmd_diagnose(cfg: RunConfig, R: str, omega: int, npoints: int | None = None) -> dict:
    """Local energy along the axis and SRS correction ratios at one (R, Omega)."""
    R = canonical_R(R)
    npoints = npoints or cfg.diagnose_grid
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    ctx = context_for(mpf(R), cfg.digits)
    tag = f"R{R}_O{omega}"
    with ctx.activate():
        mats = build_matrices(enumerate_basis(omega, Fraction(R)), ctx)
        res = Resolvent(mats)
        opts = _options(cfg)
        hs = converged_hs(mats, opts, res)
        rs = converged_rs(mats, opts, res)
        E_ref = sum(hs.Eg, mpf(0))
        grid = [mpf(-1) + mpf(2 * i) / (npoints + 1) for i in range(1, npoints + 1)]
        prof = local_energy(mats, hs.phi_sum(), "g", grid, E_ref)
        with open(out / f"localenergy_{tag}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eta", "E_loc", "E_loc_minus_E_ref"])
            for eta, e, d in zip(prof.eta, prof.E_loc, prof.errors()):
                w.writerow([to_str(eta, 12), to_str(e, ctx.digits), to_str(d, 12)])
        J = rs.corrections
        with open(out / f"ratios_{tag}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "J_n", "ratio_next"])
            for n in range(1, len(J) + 1):
                ratio = to_str(J[n] / J[n - 1], 12) if n < len(J) and J[n - 1] != 0 else ""
                w.writerow([n, to_str(J[n - 1], ctx.digits), ratio])
        with open(out / f"series_{tag}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "E_RS", "norm_RS", "E_g", "E_u", "norm_HS"])
            for n in range(max(len(rs.series.E), len(hs.Eg))):
                row = [n]
                for E, phi in ((rs.series.E, rs.series.phi),):
                    row += [to_str(E[n], ctx.digits) if n < len(E) else "",
                            to_str(gmpy2.sqrt(mats.S.dot(phi[n]).dot(phi[n])), 12) if n < len(phi) else ""]
                row += [to_str(hs.Eg[n], ctx.digits) if n < len(hs.Eg) else "",
                        to_str(hs.Eu[n], ctx.digits) if n < len(hs.Eu) else "",
                        to_str(gmpy2.sqrt(mats.S.dot(hs.phi[n]).dot(hs.phi[n])), 12) if n < len(hs.phi) else ""]
                w.writerow(row)
        summary = {"R": R, "Omega": omega, "digits": ctx.digits, "n_crit": rs.n_crit,
                   "hs_orders": hs.converged_at or hs.max_order, "E_ref": to_str(E_ref, ctx.digits)}
    with open(out / f"diagnose_{tag}.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return summary


def cmd_dump_basis(cfg: RunConfig, omega: int, R: str = "10") -> Path:
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    ctx = context_for(mpf(R), cfg.digits)
    path = out / f"basis_O{omega}.csv"
    with ctx.activate(), open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "center", "N", "M", "norm"])
        for i, f in enumerate(enumerate_basis(omega, Fraction(R))):
            w.writerow([i, f.center, f.N, f.M, to_str(f.norm, ctx.digits)])
    return path


def cmd_dump_matrices(cfg: RunConfig, R: str, omega: int) -> Path:
    R = canonical_R(R)
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    ctx = context_for(mpf(R), cfg.digits)
    path = out / f"matrices_R{R}_O{omega}.csv"
    with ctx.activate():
        mats = build_matrices(enumerate_basis(omega, Fraction(R)), ctx)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["matrix", "row", "col", "value"])
            for name in ("S", "T", "Ua", "Ub", "H0", "V", "half_right", "flux"):
                M = getattr(mats, name)
                for i in range(M.shape[0]):
                    for j in range(M.shape[1]):
                        w.writerow([name, i, j, to_str(M[i, j], ctx.digits)])
    return path


# --------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML run configuration")
    common.add_argument("--digits", type=int, help="override the working precision")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="worker processes for sweeps")
    common.add_argument("--no-cache", action="store_true", help="recompute cached records")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="h2plus-exchange", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep", parents=[common], help="compute J over the R grid and Omega ladder")
    sub.add_parser("extrapolate", parents=[common], help="Levin-extrapolate stored ladders")
    sub.add_parser("fit", parents=[common], help="extrapolate, then fit the asymptotic constants")
    d = sub.add_parser("diagnose", parents=[common], help="local energy and SRS ratios at one point")
    d.add_argument("--R", required=True)
    d.add_argument("--omega", type=int, required=True)
    d.add_argument("--points", type=int)
    b = sub.add_parser("dump-basis", parents=[common], help="write the basis functions as CSV")
    b.add_argument("--omega", type=int, required=True)
    m = sub.add_parser("dump-matrices", parents=[common], help="write all operator matrices as CSV")
    m.add_argument("--R", required=True)
    m.add_argument("--omega", type=int, required=True)
    return p


def load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.digits is not None:
        cfg.digits = args.digits
    if args.out is not None:
        cfg.output = args.out
    if args.jobs is not None:
        cfg.jobs = args.jobs
    if args.no_cache:
        cfg.cache = False
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s")
    try:
        cfg = load_config(args)
        if args.command == "sweep":
            store = cmd_sweep(cfg)
            print(f"{len(store)} records in {store.records_path}")
        elif args.command == "extrapolate":
            print(f"{len(cmd_extrapolate(cfg))} extrapolated records")
        elif args.command == "fit":
            for tag, fit in cmd_fit(cfg).items():
                print(tag, "L =", fit.L, " ".join(to_str(c, 12) for c in fit.j[:4]))
        elif args.command == "diagnose":
            print(json.dumps(cmd_diagnose(cfg, args.R, args.omega, args.points)))
        elif args.command == "dump-basis":
            print(cmd_dump_basis(cfg, args.omega))
        elif args.command == "dump-matrices":
            print(cmd_dump_matrices(cfg, args.R, args.omega))
    except (ConfigError, MissingGridPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0
