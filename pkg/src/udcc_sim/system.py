"""Assemble one simulated system from a configuration point and run it."""

import json

from . import dram as dram_mod
from . import nvm as nvm_mod
from .channel import DataBus
from .config import DRAM_OVERRIDES, NVM_OVERRIDES, defaults, derive_seed
from .controller import Controller, ControllerConfig
from .dram import DramInterface
from .kernel import SimulationError, Simulator, ns
from .memtypes import CacheGeometry, TagStore
from .nvm import NvmInterface
from .stats import Stats
from .workload import (Requestor, TraceRequestor, TrafficConfig, TrafficGenerator,
                       hit_ratio_footprint, read_trace)


class AccessTrace:
    """Per-packet record of device accesses and state transitions."""

    def __init__(self):
        self.accesses = {}
        self.transitions = []

    def access(self, tick, pkt_id, kind, writeback=False):
        self.accesses.setdefault(pkt_id, []).append(kind)

    def transition(self, tick, pkt_id, src, dst, writeback=False):
        self.transitions.append((tick, pkt_id, str(src), str(dst), writeback))


class System:
    """Everything one run needs, wired together but not yet started."""

    def __init__(self, point, trace=None):
        cfg = defaults()
        cfg.update(point)
        self.cfg = cfg
        self.sim = sim = Simulator()
        settle = cfg["warmup.settle"]
        duration = cfg["traffic.duration"]
        self.window = (settle, settle + duration)
        self.stats = stats = Stats(settle, settle + duration, cfg["stats.timeseries_interval"])

        record = stats.record_bus_busy
        shared_bus = cfg["shared_bus"]
        if shared_bus == "auto":
            # DDR DIMMs and NVDIMMs share a channel; HBM sits on its own bus
            shared_bus = "false" if cfg["dram.preset"] == "hbm" else "true"
        if shared_bus == "true":
            shared = DataBus("shared", record)
            dbus = nbus = shared
        else:
            dbus = DataBus("dram", record)
            nbus = DataBus("nvm", record)
        over = {k: cfg["dram." + k] for k in DRAM_OVERRIDES if cfg["dram." + k] is not None}
        dtiming = dram_mod.preset(cfg["dram.preset"], addr_map=cfg["dram.addr_map"], **over)
        self.dram = DramInterface(dtiming, dbus)
        over = {k: cfg["nvm." + k] for k in NVM_OVERRIDES if cfg["nvm." + k] is not None}
        self.nvm = NvmInterface(
            sim, nvm_mod.preset(cfg["nvm.preset"], **over), nbus,
            max_pending_reads=cfg["nvm.max_pending_reads"],
            write_buffer_size=cfg["nvm.write_buffer"],
            write_units=cfg["nvm.write_units"],
            wear_leveling=cfg["nvm.wear_leveling"],
            wear_interval=cfg["nvm.wear_interval"],
            wear_stall=ns(cfg["nvm.wear_stall_ns"]),
            wear_gate=cfg["nvm.wear_gate"])

        self.geo = CacheGeometry(cfg["cache_size"])
        cache_mode = cfg["mode"] == "dram_cache"
        self.tags = TagStore(self.geo) if cache_mode else None
        ccfg = ControllerConfig(orb_size=cfg["orb_size"], crb_size=cfg["crb_size"],
                                policy=cfg["policy"], mode=cfg["mode"],
                                wb_queue_size=cfg["wb_queue_size"],
                                nvm_priority=cfg["nvm_priority"])
        self.ctrl = Controller(sim, ccfg, self.dram, self.nvm, stats, self.tags, trace)

        self._trace_file = None
        if cfg["trace.path"]:
            self._trace_file = open(cfg["trace.path"])
            self.source = TraceRequestor(sim, self.ctrl, read_trace(self._trace_file),
                                         start=0, end=settle + duration)
            self.prefilled = 0
        else:
            seed = cfg["traffic.seed"]
            if seed is None:
                seed = derive_seed(cfg["seed"], {})
            rng_range = cfg["traffic.range"]
            if rng_range is None:
                target = cfg["traffic.hit_ratio"]
                rng_range = hit_ratio_footprint(100 if target is None else target, self.geo)
            tcfg = TrafficConfig(pattern=cfg["traffic.pattern"], read_pct=cfg["traffic.read_pct"],
                                 range_bytes=rng_range, start_addr=cfg["traffic.start"],
                                 inject_interval=cfg["traffic.inject_interval"],
                                 duration=settle + duration, seed=seed)
            self.gen = TrafficGenerator(tcfg)
            self.prefilled = 0
            if cache_mode and cfg["warmup"] == "functional":
                self.prefilled = self.gen.prefill(self.tags)
            self.source = Requestor(sim, self.ctrl, self.gen)

    def run(self):
        try:
            self.sim.run()
        finally:
            if self._trace_file is not None:
                self._trace_file.close()
        if not self.ctrl.drained():
            raise SimulationError("event queue empty but controller not drained")
        inv = self.ctrl.invariants()
        bad = [k for k, ok in inv.items() if not ok]
        if bad:
            raise SimulationError("invariant violated: %s" % ", ".join(bad))
        return self.stats.finalize(self.sim.now, self.nvm.wear_events, inv,
                                   cache_mode=self.cfg["mode"] == "dram_cache")


def simulate(point, trace=None, timeseries=None):
    """Run one configuration point and return its :class:`StatsReport`."""
    system = System(point, trace)
    report = system.run()
    if timeseries is not None:
        system.stats.write_timeseries(timeseries)
    return report


def report_json(report):
    return json.dumps(report.to_dict(), indent=2, sort_keys=True)
