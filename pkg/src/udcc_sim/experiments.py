"""Bundled case-study sweeps and the sweep runner."""

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor

from .config import defaults, derive_seed, expand, validate
from .system import simulate

HBM_13PCT_MISS_RANGE = 19284288  # 16 MB / 0.87, 64-aligned

_RO_HIT = {"traffic.read_pct": 100, "traffic.range": 6 << 20}
_WO_HIT = {"traffic.read_pct": 0, "traffic.range": 6 << 20}
_RO_MISS = {"traffic.read_pct": 100, "traffic.range": 128 << 20}
_WO_MISS = {"traffic.read_pct": 0, "traffic.range": 128 << 20}


def _with(base, **kw):
    out = dict(base)
    out.update({k.replace("__", "."): v for k, v in kw.items()})
    return out


def _hbm_points():
    points = []
    for orb in (256, 512, 1024, 2048, 4096):
        points.append({"dram.preset": "hbm", "orb_size": orb, "crb_size": max(32, orb // 8),
                       "traffic.pattern": "random", "traffic.read_pct": 100,
                       "traffic.range": HBM_13PCT_MISS_RANGE})
    return points


def preset_points(name):
    """Return the list of (possibly sweeping) config fragments for a preset."""
    orbs = [2, 4, 8, 16, 32, 64, 128, 256, 512, 1024]
    if name == "validate":
        return [{"mode": ["dram_only", "dram_cache"], "traffic.pattern": ["linear", "random"],
                 "traffic.read_pct": 100, "traffic.range": 6 << 20}]
    if name == "cs1-scheduling":
        return [
            {"policy": ["fcfs", "frfcfs"], "traffic.pattern": "random",
             "traffic.read_pct": [100, 0], "traffic.hit_ratio": [0, 100]},
            {"policy": ["fcfs", "frfcfs"], "traffic.pattern": "random",
             "traffic.read_pct": 70, "traffic.hit_ratio": [0, 25, 50, 75, 100]},
        ]
    if name == "cs2-buffers":
        pts = []
        for wl in (_RO_HIT, _WO_HIT, _WO_MISS):
            pts.append(_with(wl, dram__preset=["ddr3", "ddr4", "ddr5"], orb_size=orbs))
        return pts + _hbm_points()
    if name == "cs3-nvm-speed":
        return [_with(wl, nvm__preset=["slow", "base", "fast"], orb_size=512) for wl in (_RO_MISS, _WO_MISS)]
    if name == "cs5-wear":
        return [_with(_WO_MISS, nvm__wear_leveling=[False, True])]
    raise ValueError("unknown experiment preset %r (expected one of %s)"
                     % (name, ", ".join(PRESETS)))


PRESETS = ("validate", "cs1-scheduling", "cs2-buffers", "cs3-nvm-speed", "cs5-wear")


def build_points(fragments, base):
    """Expand preset fragments on top of ``base`` into concrete run points."""
    points = []
    for frag in fragments:
        cfg = dict(base)
        cfg.update(frag)
        if "traffic.range" in frag:
            cfg["traffic.hit_ratio"] = None
        if "traffic.hit_ratio" in frag:
            cfg["traffic.range"] = None
        validate(cfg)
        for coords, point in expand(cfg):
            # coordinates include the fixed keys of the fragment so that
            # points from different fragments get distinct seeds
            full = {k: v for k, v in frag.items() if not isinstance(v, list)}
            full.update(coords)
            if base.get("traffic.seed") is None:
                point["traffic.seed"] = derive_seed(point["seed"], full)
            points.append((full, point))
    return points


def _run_one(args):
    coords, point = args
    try:
        return simulate(point).to_dict(), None
    except Exception as exc:  # reported with the failing sweep point
        return None, "%s: %s" % (type(exc).__name__, exc)


class SweepError(RuntimeError):
    pass


def run_points(points, jobs=1):
    """Run every point; results come back in point order."""
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, points))
    else:
        results = [_run_one(p) for p in points]
    out = []
    for (coords, _), (report, err) in zip(points, results):
        if err is not None:
            raise SweepError("sweep point %s failed: %s" % (_label(coords), err))
        out.append((coords, report))
    return out


def _label(coords):
    if not coords:
        return "(single run)"
    return ", ".join("%s=%s" % kv for kv in sorted(coords.items(), key=lambda kv: kv[0]))


SUMMARY_FIELDS = ("llc_bandwidth", "dram_bus_util", "nvm_bus_util", "hit_ratio",
                  "access_amplification", "avg_orb_latency", "avg_nvm_write_queue_latency",
                  "wear_events", "dram_accesses", "nvm_reads", "nvm_writes",
                  "demand_reads", "demand_writes")


def write_results(results, out_dir):
    """One JSON report per point plus ``summary.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    axes = []
    for coords, _ in results:
        for k in coords:
            if k not in axes:
                axes.append(k)
    with open(os.path.join(out_dir, "summary.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["point"] + axes + list(SUMMARY_FIELDS))
        for i, (coords, report) in enumerate(results):
            writer.writerow([i] + [coords.get(k, "") for k in axes]
                            + [report[f] for f in SUMMARY_FIELDS])
            with open(os.path.join(out_dir, "point-%03d.json" % i), "w") as rf:
                json.dump({"coords": coords, "report": report}, rf, indent=2, sort_keys=True)


def run_preset(name, out_dir=None, duration=None, jobs=1, base=None):
    cfg = defaults()
    if base:
        cfg.update(base)
    if duration is not None:
        cfg["traffic.duration"] = duration
    points = build_points(preset_points(name), cfg)
    results = run_points(points, jobs)
    if out_dir is not None:
        write_results(results, out_dir)
    return results
