"""``vbdrisk`` command line: one subcommand per pipeline stage plus ``pipeline``."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, coarsegeo, epimodel, flux, geo, homeloc, ingest, riskmap, synth, world
from ._backend import NAME as BACKEND
from .errors import ConfigError, VbdError

log = logging.getLogger("vbdrisk")


# --- helpers ----------------------------------------------------------------

def _existing(path: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"input not found: {path}")
    return p


def _out(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_json(path) -> dict:
    try:
        with open(_existing(path), encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _patches(ref: str | None) -> list[geo.Patch]:
    if ref in (None, "builtin"):
        return world.florida_patches()
    return geo.load_patches(_existing(ref), vector_ratio=world.DEFAULT_VECTOR_RATIO)


def _neighborhoods(ref: str | None) -> list[geo.Neighborhood]:
    if ref in (None, "builtin"):
        return world.miami_neighborhoods()
    return geo.load_neighborhoods(_existing(ref))


def _hash_inputs(resolved: dict, files: list[str]) -> str:
    h = hashlib.sha256(json.dumps(resolved, sort_keys=True, default=str).encode())
    for f in sorted(files):
        p = Path(f)
        if p.is_file():
            h.update(p.read_bytes())
    return h.hexdigest()


def write_run_meta(out: Path, command: str, args: argparse.Namespace, seeds: dict | None = None) -> None:
    resolved = {k: v for k, v in vars(args).items() if k not in ("func", "out", "log_level")}
    files = [v for v in resolved.values() if isinstance(v, str) and Path(v).is_file()]
    _dump(out / "run_meta.json", {
        "command": command,
        "arguments": resolved,
        "config_hash": _hash_inputs(resolved, files),
        "seeds": seeds or ({"seed": resolved["seed"]} if "seed" in resolved else {}),
        "versions": {"vbdrisk": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__, "kernels": BACKEND},
    })


# --- subcommands ------------------------------------------------------------

def cmd_synth(args) -> None:
    cfg_dict = _load_json(args.config) if args.config else {}
    for key in ("seed", "n_users", "home_rate", "travel_fraction"):
        v = getattr(args, key)
        if v is not None:
            cfg_dict[key] = v
    cfg = synth.SynthConfig.from_dict(cfg_dict)
    out = _out(args)
    result = synth.synth_generate(cfg)
    synth.write_synth(result, out)
    geo.write_geojson(out / "patches.geojson", synth.resolve_patches(cfg.patches))
    geo.write_geojson(out / "neighborhoods.geojson", synth.resolve_neighborhoods(cfg.neighborhoods))
    _dump(out / "synth_config.json", cfg.to_dict())
    write_run_meta(out, "synth-data", args, {"seed": cfg.seed})


def cmd_snowball(args) -> None:
    graph = ingest.load_graph(_existing(args.graph))
    profiles = ingest.load_profiles(_existing(args.profiles))
    seeds = [s for s in args.seeds.split(",") if s]
    zones = [z for z in args.keep_zones.split(",") if z] if args.keep_zones else None
    if zones is None:
        zones = sorted({p.profile_home for p in profiles.values() if p.profile_home})
    sample = ingest.snowball_sample(graph, seeds, ingest.zone_predicate(zones), profiles)
    out = _out(args)
    (out / "sample.txt").write_text("".join(u + "\n" for u in sorted(sample)), encoding="utf-8")
    write_run_meta(out, "snowball", args)


def cmd_fit_zones(args) -> None:
    corpus = coarsegeo.load_corpus(_existing(args.corpus))
    model = coarsegeo.fit(corpus, l2=args.l2, max_epochs=args.max_epochs)
    out = _out(args)
    model.save(out / "zone_model.json")
    write_run_meta(out, "fit-zones", args)


def _air_volume(args) -> float:
    if args.air_volume is not None:
        return float(args.air_volume)
    if not args.air_traffic:
        raise ConfigError("give --air-traffic or --air-volume")
    table = ingest.load_air_traffic(_existing(args.air_traffic))
    key = (args.source, args.dest_region)
    if key not in table:
        raise ConfigError(f"air traffic has no row for {key}")
    return table[key]


def cmd_flux(args) -> None:
    patches = _patches(args.patches)
    events = ingest.load_events(_existing(args.events))
    model = coarsegeo.ZoneModel.load(_existing(args.zone_model)) if args.zone_model else None
    vsets = flux.build_visit_sets(events, patches, args.min_confidence, model)
    dests = [p.id for p in patches if p.id != args.source]
    fvec = flux.estimate_source_flux(vsets, args.source, dests, _air_volume(args))
    rates = flux.to_rate_matrix(fvec, patches, args.source, args.return_factor)
    out = _out(args)
    flux.write_flux_vector(out / "flux_persons.csv", fvec, args.source)
    rates.to_csv(out / "flux.csv")
    with open(out / "visit_sets.jsonl", "w", encoding="utf-8") as fh:
        for vs in vsets:
            fh.write(json.dumps({"user_id": vs.user_id, "zones": sorted(vs.zones_visited)}) + "\n")
    write_run_meta(out, "flux-estimate", args)


def run_county(patches, rates, mcfg: epimodel.ModelConfig, source: str, tol: float, t_max: float,
               init: epimodel.EpiState | None = None):
    graph = epimodel.PatchGraph(patches, rates)
    pinned = source if mcfg.pin_source else None
    if init is None:
        init = epimodel.initial_state(graph, pinned, mcfg.source_prevalence if pinned else 0.0, mcfg.params)
    ss = epimodel.integrate_to_steady(init, graph, mcfg.params, tol=tol, t_max=t_max, pinned=pinned)
    risks = epimodel.risk_scores(ss)
    ranked = epimodel.rank_patches(risks, exclude=[source])
    ih = dict(zip(ss.ids, ss.state["I_h"].tolist()))
    return ss, ranked, ih


def _init_state(path, patches) -> epimodel.EpiState:
    d = _load_json(path)
    y = np.zeros((7, len(patches)))
    for k, p in enumerate(patches):
        if p.id not in d:
            raise ConfigError(f"initial state lacks patch {p.id!r}")
        for c, name in enumerate(epimodel.COMPARTMENTS):
            y[c, k] = float(d[p.id].get(name, 0.0))
    return epimodel.EpiState(y)


def cmd_county(args) -> None:
    patches = _patches(args.patches)
    rates = flux.FluxMatrix.from_csv(_existing(args.flux), [p.id for p in patches])
    mcfg = epimodel.ModelConfig.from_dict(_load_json(args.params)) if args.params else epimodel.ModelConfig()
    init = _init_state(args.init, patches) if args.init else None
    ss, ranked, ih = run_county(patches, rates, mcfg, args.source, args.tol, args.t_max, init)
    out = _out(args)
    riskmap.write_county_risk(out / "county_risk.csv", ranked, ih)
    _dump(out / "county_meta.json", {"tol": args.tol, "t_elapsed": ss.t_elapsed,
                                     "t_reached": ss.t_reached, "residual": ss.residual,
                                     "converged": ss.converged, "relative_risk": True,
                                     "params": mcfg.to_dict()})
    write_run_meta(out, "county-risk", args)


def cmd_cluster(args) -> None:
    events = ingest.load_events(_existing(args.events))
    out = _out(args)
    with open(out / "clusters.jsonl", "w", encoding="utf-8") as fh:
        for uid, evs in sorted(homeloc.group_by_user(events).items()):
            for k, c in enumerate(homeloc.dbscan_user(evs, args.eps, args.min_pts)):
                fh.write(json.dumps({"user_id": uid, "cluster": k, "lat": c.centroid.lat,
                                     "lon": c.centroid.lon, "n_events": len(c.members)}) + "\n")
    write_run_meta(out, "cluster", args)


def build_records(events, tz_offset, homes=None):
    index = homeloc.LocationIndex(events)
    recs = homeloc.user_records(homeloc.group_by_user(events), index, tz_offset)
    flat = [r for uid in sorted(recs) for r in recs[uid]]
    if homes is not None:
        homeloc.label_records(flat, homes)
    return flat


def cmd_features(args) -> None:
    events = ingest.load_events(_existing(args.events))
    homes = _load_json(args.truth)["homes"] if args.truth else None
    out = _out(args)
    homeloc.write_records(out / "records.csv", build_records(events, args.tz_offset, homes))
    write_run_meta(out, "features", args)


def _cascade_config(d: dict | None) -> homeloc.CascadeConfig:
    d = dict(d or {})
    if "widths" in d:
        d["widths"] = tuple(d["widths"])
    try:
        return homeloc.CascadeConfig(**d)
    except TypeError as exc:
        raise ConfigError(f"bad cascade config: {exc}") from None


def cmd_train_cascade(args) -> None:
    records = homeloc.read_records(_existing(args.records))
    cfg = _cascade_config(_load_json(args.config) if args.config else None)
    if args.trees is not None:
        cfg.n_trees = args.trees
    model = homeloc.train_cascade(records, seed=args.seed, config=cfg, tz_offset=args.tz_offset)
    out = _out(args)
    model.save(out / "cascade.json")
    write_run_meta(out, "train-cascade", args)


def cmd_predict(args) -> None:
    events = ingest.load_events(_existing(args.events))
    model = homeloc.CascadeModel.load(_existing(args.model))
    preds = homeloc.predict_homes(events, model, jobs=args.jobs)
    out = _out(args)
    homeloc.write_predictions(out / "predictions.json", preds)
    write_run_meta(out, "predict-homes", args)


def cmd_neighborhood(args) -> None:
    nbhds = _neighborhoods(args.neighborhoods)
    visitors = ingest.load_events(_existing(args.visitors))
    if args.profiles:
        profiles = ingest.load_profiles(_existing(args.profiles))
        visitors = riskmap.source_resident_events(visitors, profiles, args.source_zone)
    preds = homeloc.read_predictions(_existing(args.homes))
    vt = riskmap.visitor_shares(visitors, nbhds, per_user=args.per_user)
    rt = riskmap.resident_shares(preds, nbhds)
    rs = riskmap.intersect_high_risk(vt, rt, args.top_k)
    ranked = ih = None
    patches = []
    if args.county_risk:
        ranked, ih = riskmap.read_county_risk(_existing(args.county_risk))
        patches = _patches(args.patches)
    riskmap.emit_report(_out(args), [vt, rt], rs, nbhds, ranked, ih, patches)
    write_run_meta(Path(args.out), "neighborhood-risk", args)


# --- pipeline ---------------------------------------------------------------

PIPELINE_KEYS = {"seed", "synth", "training_synth", "source_zone", "dest_region", "air_volume",
                 "air_traffic", "snowball_seeds", "model", "min_confidence", "return_factor",
                 "top_k", "tol", "t_max", "cascade", "zone_l2", "zone_max_epochs", "tz_offset"}


def run_pipeline(cfg: dict, out: Path, jobs: int = 1) -> dict:
    unknown = set(cfg) - PIPELINE_KEYS
    if unknown:
        raise ConfigError(f"unknown pipeline config keys: {sorted(unknown)}")
    seed = int(cfg.get("seed", 0))
    source = cfg.get("source_zone", world.SOURCE_ID)
    tz = float(cfg.get("tz_offset", -4.0))
    scfg = synth.SynthConfig.from_dict({"seed": seed, **cfg.get("synth", {})})
    tcfg = synth.SynthConfig.from_dict({"seed": seed + 1, "home_rate_spread": 0.6,
                                        **cfg.get("training_synth", {})})
    patches = synth.resolve_patches(scfg.patches)
    nbhds = synth.resolve_neighborhoods(scfg.neighborhoods)
    summary: dict = {}

    # traces
    data = synth.synth_generate(scfg)
    synth.write_synth(data, out / "synth")
    profiles = {p.user_id: p for p in data.profiles}
    seeds = cfg.get("snowball_seeds") or [p.user_id for p in data.profiles
                                          if p.profile_home == source][:3]
    sample = ingest.snowball_sample(data.graph, seeds,
                                    ingest.zone_predicate([p.id for p in patches]), profiles)
    (out / "synth" / "sample.txt").write_text("".join(u + "\n" for u in sorted(sample)))
    events = [ev for ev in data.events if ev.user_id in sample]
    summary["sampled_users"] = len(sample)

    # zone classifier and flux
    training = synth.synth_generate(tcfg)
    zmodel = coarsegeo.fit([(t, z) for z, t in training.corpus], l2=float(cfg.get("zone_l2", 1.0)),
                           max_epochs=int(cfg.get("zone_max_epochs", 300)))
    (out / "zones").mkdir(parents=True, exist_ok=True)
    zmodel.save(out / "zones" / "zone_model.json")
    vsets = flux.build_visit_sets(events, patches, float(cfg.get("min_confidence", 0.5)), zmodel)
    if "air_traffic" in cfg:
        table = ingest.load_air_traffic(_existing(cfg["air_traffic"]))
        key = (source, cfg.get("dest_region", "FL"))
        if key not in table:
            raise ConfigError(f"air traffic has no row for {key}")
        air = table[key]
    else:
        air = float(cfg.get("air_volume", 8000.0))
    dests = [p.id for p in patches if p.id != source]
    fvec = flux.estimate_source_flux(vsets, source, dests, air)
    rates = flux.to_rate_matrix(fvec, patches, source, float(cfg.get("return_factor", 1.0)))
    (out / "flux").mkdir(parents=True, exist_ok=True)
    flux.write_flux_vector(out / "flux" / "flux_persons.csv", fvec, source)
    rates.to_csv(out / "flux" / "flux.csv")

    # county model
    mcfg = epimodel.ModelConfig.from_dict(cfg.get("model", {}))
    ss, ranked, ih = run_county(patches, rates, mcfg, source, float(cfg.get("tol", 1e-9)),
                                float(cfg.get("t_max", 200_000.0)))
    summary["county_top"] = [pid for pid, _ in ranked[:5]]
    summary["t_elapsed"] = ss.t_elapsed

    # home location
    train_recs = build_records(training.events, tz, training.homes)
    cmodel = homeloc.train_cascade(train_recs, seed=seed, config=_cascade_config(cfg.get("cascade")),
                                   tz_offset=tz)
    (out / "homeloc").mkdir(parents=True, exist_ok=True)
    cmodel.save(out / "homeloc" / "cascade.json")
    preds = homeloc.predict_homes(events, cmodel, jobs=jobs)
    homeloc.write_predictions(out / "homeloc" / "predictions.json", preds)
    traveled = {vs.user_id for vs in vsets if source in vs.zones_visited}
    fl_travelers = [p for p in preds if p.user_id in traveled
                    and (profiles.get(p.user_id) is None or profiles[p.user_id].profile_home != source)]

    # neighborhoods
    visitors = riskmap.source_resident_events(events, profiles, source)
    vt = riskmap.visitor_shares(visitors, nbhds)
    rt = riskmap.resident_shares(fl_travelers, nbhds)
    rs = riskmap.intersect_high_risk(vt, rt, int(cfg.get("top_k", 5)))
    riskmap.emit_report(out / "report", [vt, rt], rs, nbhds, ranked, ih, patches)
    summary["high_risk"] = sorted(rs.neighborhoods)
    summary["homes_accepted"] = sum(p.home is not None for p in preds)
    summary["users"] = len(preds)
    _dump(out / "summary.json", summary)
    return summary


def cmd_pipeline(args) -> None:
    cfg = _load_json(args.config)
    if "air_traffic" in cfg:
        # relative paths resolve against the config file's directory
        cfg["air_traffic"] = str(Path(args.config).parent / cfg["air_traffic"])
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = _out(args)
    run_pipeline(cfg, out, args.jobs)
    write_run_meta(out, "pipeline", args, {"seed": cfg.get("seed", 0)})


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vbdrisk", description=__doc__)
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker threads where supported")
        p.set_defaults(func=func)
        return p

    p = add("synth-data", cmd_synth, "generate a seeded synthetic dataset")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--n-users", type=int)
    p.add_argument("--home-rate", type=float)
    p.add_argument("--travel-fraction", type=float)

    p = add("snowball", cmd_snowball, "follower-graph snowball sample")
    p.add_argument("--graph", required=True)
    p.add_argument("--profiles", required=True)
    p.add_argument("--seeds", required=True, help="comma-separated seed user ids")
    p.add_argument("--keep-zones", help="comma-separated profile zones to expand (default: all)")

    p = add("fit-zones", cmd_fit_zones, "train the text zone classifier")
    p.add_argument("--corpus", required=True)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)

    p = add("flux-estimate", cmd_flux, "estimate source-to-patch flux")
    p.add_argument("--events", required=True)
    p.add_argument("--patches", default="builtin")
    p.add_argument("--source", default=world.SOURCE_ID)
    p.add_argument("--air-traffic")
    p.add_argument("--dest-region", default="FL")
    p.add_argument("--air-volume", type=float)
    p.add_argument("--zone-model")
    p.add_argument("--min-confidence", type=float, default=0.5)
    p.add_argument("--return-factor", type=float, default=1.0)

    p = add("county-risk", cmd_county, "steady-state county risk from a flux matrix")
    p.add_argument("--patches", default="builtin")
    p.add_argument("--flux", required=True)
    p.add_argument("--params")
    p.add_argument("--source", default=world.SOURCE_ID)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--init", help="JSON initial state per patch")
    g.add_argument("--init-susceptible", action="store_true", help="all-susceptible start (default)")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--t-max", type=float, default=200_000.0)

    p = add("cluster", cmd_cluster, "per-user DBSCAN of geo-tags")
    p.add_argument("--events", required=True)
    p.add_argument("--eps", type=float, default=100.0)
    p.add_argument("--min-pts", type=int, default=1)

    p = add("features", cmd_features, "ten-feature cluster records")
    p.add_argument("--events", required=True)
    p.add_argument("--tz-offset", type=float, default=-4.0)
    p.add_argument("--truth", help="truth.json with planted homes, to label records")

    p = add("train-cascade", cmd_train_cascade, "train forest, scorer and verifier")
    p.add_argument("--records", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.add_argument("--trees", type=int)
    p.add_argument("--tz-offset", type=float, default=-4.0)

    p = add("predict-homes", cmd_predict, "run the cascade on activity traces")
    p.add_argument("--events", required=True)
    p.add_argument("--model", required=True)

    p = add("neighborhood-risk", cmd_neighborhood, "visitor/resident shares and high-risk set")
    p.add_argument("--visitors", required=True)
    p.add_argument("--homes", required=True)
    p.add_argument("--neighborhoods", default="builtin")
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--profiles", help="filter visitors to this profile zone")
    p.add_argument("--source-zone", default=world.SOURCE_ID)
    p.add_argument("--per-user", action="store_true")
    p.add_argument("--county-risk")
    p.add_argument("--patches", default="builtin")

    p = add("pipeline", cmd_pipeline, "run every stage from one config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except VbdError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
