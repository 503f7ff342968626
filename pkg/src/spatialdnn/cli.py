"""Command-line front end.

Every command reads one YAML config (see ``spatialdnn.config``), writes CSV
files under ``--out`` and starts each file with a comment line carrying the
config hash and master seed, so reruns with the same inputs are
byte-identical.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections import defaultdict

import numpy as np
import yaml

from . import config as cfgmod
from .grf import MaternParams, child_seed, simulate_dataset
from .grid import GridMapping, fit_real, ingest_grid
from .inference import SubsampleLadder, kl_ladder, subsample_ci
from .regress import (
    DesignEntry, ScenarioConfig, ScenarioRow, SplitSpec, TrainConfig, assemble_local, fit_local,
    run_scenario,
)
from .sampling import SamplingDesign, build_sites, write_neighborhoods

log = logging.getLogger("spatialdnn")

COMMANDS = ("simulate", "scenario", "fit", "ci", "kl", "ingest", "fit-real", "dump-effective-config")


class Writer:
    """CSV writer that stamps the provenance header and formats numbers."""

    def __init__(self, cfg, command):
        self.cfg = cfg
        self.command = command
        self.header = f"# spatialdnn {command} config_sha256={cfgmod.config_hash(cfg)} seed={cfg['seed']}\n"
        os.makedirs(cfg["out"], exist_ok=True)

    def fmt(self, v):
        if isinstance(v, (bool, np.bool_)):
            return str(bool(v))
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        if isinstance(v, (float, np.floating)):
            return repr(float(v)) if self.cfg["full_precision"] else f"{float(v):.6g}"
        return str(v)

    def path(self, name):
        return os.path.join(self.cfg["out"], name)

    def write(self, name, columns, rows):
        with open(self.path(name), "w", newline="") as fh:
            fh.write(self.header)
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(self.fmt(v) for v in row) + "\n")
        return self.path(name)


def _scenario(cfg, name):
    sc = next(s for s in cfg["scenarios"] if s["name"] == name)
    return MaternParams(float(sc["sigma2"]), float(sc["phi"]), float(sc["kappa"]))


def _train(cfg):
    return TrainConfig(**cfg["train"])


def _split(cfg, seed):
    s = cfg["split"]
    return SplitSpec(s["train"], s["val"], s["test"], seed=seed)


def replication_seeds(cfg):
    return [child_seed(cfg["seed"], "replication", i) % 2**63 for i in range(cfg["replications"])]


def _design_for_n(cfg, n):
    for d in cfg["designs"]:
        if int(d["n"]) == int(n):
            return d
    raise cfgmod.ConfigError(f"no design with n={n} in designs")


def _sites(cfg, lambda_n, eta_n):
    return build_sites(SamplingDesign.box(cfg["dimension"], float(lambda_n), float(eta_n)))


def cmd_simulate(cfg):
    w = Writer(cfg, "simulate")
    sim = cfg["simulate"]
    params = _scenario(cfg, sim["scenario"])
    sites = _sites(cfg, sim["lambda_n"], sim["eta_n"])
    data = simulate_dataset(sites, params, int(sim["n"]), cfg["seed"],
                            response_noise_sd=cfg["response_noise_sd"])
    d = cfg["dimension"]
    w.write("sites.csv", ["site_index"] + [f"x{k + 1}" for k in range(d)],
            ([i, *map(float, s)] for i, s in enumerate(sites.sites)))
    names = [f"X{k + 1}" for k in range(data.p)] + ["Y"]

    def rows():
        for name, arr in zip(names, list(data.covariates) + [data.response]):
            for t, row in enumerate(arr):
                for i, v in enumerate(row):
                    yield name, t, i, float(v)

    w.write("dataset.csv", ["variable", "replicate", "site_index", "value"], rows())
    manifest = {
        "command": "simulate",
        "config_sha256": cfgmod.config_hash(cfg),
        "seed": cfg["seed"],
        "scenario": sim["scenario"],
        "sigma2": params.sigma2,
        "phi": params.phi,
        "kappa": params.nu,
        "lambda_n": float(sim["lambda_n"]),
        "eta_n": float(sim["eta_n"]),
        "n": int(sim["n"]),
        "dimension": d,
        "site_count": sites.count,
        "response_noise_sd": cfg["response_noise_sd"],
        "covariate_streams": [f"X{k + 1}" for k in range(data.p)],
    }
    with open(w.path("manifest.yaml"), "w") as fh:
        fh.write(yaml.safe_dump(manifest, sort_keys=True))
    return [w.path("sites.csv"), w.path("dataset.csv"), w.path("manifest.yaml")]


def scenario_configs(cfg):
    seeds = tuple(replication_seeds(cfg))
    designs = tuple(DesignEntry(float(d["lambda_n"]), int(d["n"]), float(d["eta_n"])) for d in cfg["designs"])
    for sc in cfg["scenarios"]:
        yield ScenarioConfig(
            name=sc["name"],
            matern=MaternParams(float(sc["sigma2"]), float(sc["phi"]), float(sc["kappa"])),
            designs=designs,
            deltas=tuple(float(x) for x in cfg["deltas"]),
            seeds=seeds,
            train=_train(cfg),
            split_fractions=(cfg["split"]["train"], cfg["split"]["val"], cfg["split"]["test"]),
            dimension=cfg["dimension"],
            target_sites=cfg["target_sites"],
            response_noise_sd=cfg["response_noise_sd"],
            guard=cfg["guard"],
        )


def cmd_scenario(cfg):
    w = Writer(cfg, "scenario")
    rows = []
    for sc in scenario_configs(cfg):
        rows.extend(run_scenario(sc, jobs=cfg["jobs"]))
    table = w.write("scenario_results.csv", ScenarioRow.FIELDS,
                    ([getattr(r, f) for f in ScenarioRow.FIELDS] for r in rows))
    plot = w.write("scenario_plot.csv", ["scenario", "lambda_n", "n", "eta_n", "delta", "mspe"],
                   ([r.scenario, r.lambda_n, r.n, r.eta_n, r.delta_n, r.mspe_mean] for r in rows))
    return [table, plot]


def cmd_fit(cfg):
    w = Writer(cfg, "fit")
    f = cfg["fit"]
    sites = _sites(cfg, f["lambda_n"], f["eta_n"])
    data = simulate_dataset(sites, _scenario(cfg, f["scenario"]), int(f["n"]), cfg["seed"],
                            response_noise_sd=cfg["response_noise_sd"])
    site = int(f["site"]) if f["site"] is not None else int(sites.central_sites(1)[0])
    local = assemble_local(data.response, data.covariates, sites, site, float(f["delta"]),
                           _split(cfg, cfg["seed"]), cfg["guard"])
    res = fit_local(local, _train(cfg), cfg["seed"])
    out = [w.write("fit.csv", ["site", "delta", "gamma_n", "q", "mspe", "best_epoch", "epochs_run"],
                   [[site, float(f["delta"]), local.neighborhood.gamma_n, local.q, res.mspe,
                     res.best_epoch, res.epochs_run]])]
    out.append(w.write("curve.csv", ["epoch", "train_loss", "val_loss"],
                       ([e, a, b] for e, (a, b) in enumerate(zip(res.train_curve, res.val_curve)))))
    res.params.to_csv(w.path("params.csv"))
    write_neighborhoods(w.path("neighborhood.csv"), [local.neighborhood])
    return out + [w.path("params.csv"), w.path("neighborhood.csv")]


def ci_rows(cfg):
    c = cfg["ci"]
    params = _scenario(cfg, c["scenario"])
    rows = []
    for n in c["n_ladder"]:
        d = _design_for_n(cfg, n)
        sites = _sites(cfg, d["lambda_n"], d["eta_n"])
        for seed in replication_seeds(cfg):
            data = simulate_dataset(sites, params, int(n), seed, response_noise_sd=cfg["response_noise_sd"])
            for site in sites.central_sites(c["sites"]):
                ladder = SubsampleLadder.build(sites, int(site), c["ladder"])
                res = subsample_ci(data.response, data.covariates, sites, int(site), ladder, _train(cfg),
                                   c["alpha"], seed, _split(cfg, seed), c["reference"], cfg["guard"])
                rows.append((int(n), seed, res))
    return rows


def cmd_ci(cfg):
    w = Writer(cfg, "ci")
    rows = ci_rows(cfg)
    out = [w.write("ci.csv", ["site", "alpha", "B", "mean", "lambda", "lower", "upper", "n", "seed"],
                   ([r.site, r.alpha, r.B, r.mean, r.spread, r.lower, r.upper, n, s] for n, s, r in rows))]
    widths = defaultdict(list)
    for n, _s, r in rows:
        widths[n].append(r.width)
    out.append(w.write("ci_widths.csv", ["n", "mean_width", "count"],
                       ([n, float(np.mean(v)), len(v)] for n, v in sorted(widths.items()))))
    return out


def kl_rows(cfg):
    k = cfg["kl"]
    d = _design_for_n(cfg, k["n"])
    sites = _sites(cfg, d["lambda_n"], d["eta_n"])
    out = []
    for sc in cfg["scenarios"]:
        params = MaternParams(float(sc["sigma2"]), float(sc["phi"]), float(sc["kappa"]))
        for seed in replication_seeds(cfg):
            data = simulate_dataset(sites, params, int(k["n"]), seed, response_noise_sd=cfg["response_noise_sd"])
            for site in sites.central_sites(k["sites"]):
                pts = kl_ladder(data.response, data.covariates, sites, int(site), cfg["deltas"], _train(cfg),
                                [seed], k["bins"], k["epsilon"], k["replicates"], cfg["guard"])
                out.extend((sc["name"], int(k["n"]), p) for p in pts)
    return out


def cmd_kl(cfg):
    w = Writer(cfg, "kl")
    rows = kl_rows(cfg)
    return [w.write("kl.csv", ["site", "delta", "kl", "bins", "epsilon", "seed", "scenario", "n"],
                    ([p.site, p.delta, p.kl, p.bins, p.epsilon, p.seed, name, n] for name, n, p in rows))]


def _mapping(cfg):
    g = cfg["grid"]
    return GridMapping(g["lon"], g["lat"], g["time"], g["response"], tuple(g["covariates"]))


def cmd_ingest(cfg):
    w = Writer(cfg, "ingest")
    out = []
    mapping = _mapping(cfg)
    summary = []
    for k, path in enumerate(cfg["grid"]["paths"]):
        grid = ingest_grid(path, mapping)
        out.append(w.write(f"grid{k}_sites.csv", ["site_index", "lon", "lat"],
                           ([i, float(a), float(b)] for i, (a, b) in enumerate(grid.sites.sites))))
        names = [mapping.response] + list(mapping.covariates)
        arrays = [grid.response] + list(grid.covariates)

        def rows(names=names, arrays=arrays):
            for name, arr in zip(names, arrays):
                for t, row in enumerate(arr):
                    for i, v in enumerate(row):
                        yield name, t, i, float(v)

        out.append(w.write(f"grid{k}_fields.csv", ["variable", "replicate", "site_index", "value"], rows()))
        targets = [(tuple(t), grid.nearest_pixel(*t)) for t in cfg["grid"]["targets"]]
        summary.append([k, path, grid.eta, grid.sites.count, len(grid.times)])
        if targets:
            out.append(w.write(f"grid{k}_targets.csv", ["target_lon", "target_lat", "site_index", "lon", "lat"],
                               ([t[0], t[1], i, *map(float, grid.sites.sites[i])] for t, i in targets)))
    out.append(w.write("ingest_summary.csv", ["grid", "path", "eta", "site_count", "time_count"], summary))
    return out


def cmd_fit_real(cfg):
    w = Writer(cfg, "fit-real")
    g = cfg["grid"]
    if not g["targets"]:
        raise cfgmod.ConfigError("grid.targets must list at least one (lon, lat) target")
    rows = []
    for path in g["paths"]:
        grid = ingest_grid(path, _mapping(cfg))
        rows.extend(fit_real(grid, [tuple(t) for t in g["targets"]], g["deltas"], _train(cfg),
                             cfg["seed"], g["guard"], _split(cfg, cfg["seed"])))
    return [w.write("fit_real.csv", ["eta", "delta", "rmse", "mspe", "gamma_n"],
                    ([r.eta, r.delta, r.rmse, r.mspe, r.gamma_n] for r in rows))]


def cmd_dump(cfg):
    text = cfgmod.dump(cfg)
    os.makedirs(cfg["out"], exist_ok=True)
    path = os.path.join(cfg["out"], "effective_config.yaml")
    with open(path, "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    return [path]


HANDLERS = {
    "simulate": cmd_simulate,
    "scenario": cmd_scenario,
    "fit": cmd_fit,
    "ci": cmd_ci,
    "kl": cmd_kl,
    "ingest": cmd_ingest,
    "fit-real": cmd_fit_real,
    "dump-effective-config": cmd_dump,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="spatialdnn", description=__doc__.split("\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="YAML configuration file")
    parser.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--jobs", type=int, help="worker processes")
    parser.add_argument("--full-precision", action="store_true", help="write floats at full precision")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def resolve_config(args) -> dict:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.parse("")
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise cfgmod.ConfigError("--seed must be an unsigned 64-bit integer")
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out"] = args.out
    if args.jobs is not None:
        cfg["jobs"] = args.jobs
    if args.full_precision:
        cfg["full_precision"] = True
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        paths = HANDLERS[args.command](cfg)
    except (cfgmod.ConfigError, OSError) as exc:
        print(f"spatialdnn {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"spatialdnn {args.command}: error: {exc}", file=sys.stderr)
        return 1
    if args.command != "dump-effective-config":
        for p in paths:
            print(p)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
