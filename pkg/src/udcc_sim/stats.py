"""Measurement: device counters, bus-busy accounting, latencies, reports."""

import csv
from dataclasses import asdict, dataclass, field

import numpy as np

from .kernel import SimulationError

BLOCK = 64

CATEGORIES = ("read_hit", "write_hit", "read_miss_clean", "read_miss_dirty",
              "write_miss_clean", "write_miss_dirty")

# (DRAM accesses, NVM reads, NVM writes) each category costs.
CATEGORY_COST = {
    "read_hit": (1, 0, 0),
    "write_hit": (2, 0, 0),
    "read_miss_clean": (2, 1, 0),
    "read_miss_dirty": (2, 1, 1),
    "write_miss_clean": (2, 1, 0),
    "write_miss_dirty": (2, 1, 1),
}


@dataclass
class StatsReport:
    llc_bandwidth: float
    dram_bus_util: float
    nvm_bus_util: float
    dram_accesses: int
    nvm_reads: int
    nvm_writes: int
    demand_reads: int
    demand_writes: int
    hit_ratio: float
    access_amplification: float
    avg_orb_latency: float
    avg_nvm_write_queue_latency: float
    wear_events: int
    window_ns: float
    responses_in_window: int
    categories: dict = field(default_factory=dict)
    latency_ns: dict = field(default_factory=dict)
    orb_latency_ns: dict = field(default_factory=dict)
    nvm_write_queue_latency_ns: dict = field(default_factory=dict)
    state_time_ns: dict = field(default_factory=dict)
    invariants: dict = field(default_factory=dict)
    misses_per_kilo_requests: float = 0.0

    def to_dict(self):
        return asdict(self)


def _summary(samples):
    if not samples:
        return {"mean": 0.0, "p50": 0.0, "p95": 0.0, "p99": 0.0, "count": 0}
    arr = np.asarray(samples, dtype=np.float64) / 1000.0
    p50, p95, p99 = np.percentile(arr, [50, 95, 99])
    return {"mean": round(float(arr.mean()), 4), "p50": round(float(p50), 4),
            "p95": round(float(p95), 4), "p99": round(float(p99), 4),
            "count": int(arr.size)}


class Stats:
    """Event-sourced counters for one run.

    Bandwidth and utilization are measured over ``[window_start,
    window_end)``; access counters cover the whole run so that the
    amplification identity holds exactly once the run has drained.
    """

    def __init__(self, window_start=0, window_end=None, timeseries_interval=None):
        self.window_start = window_start
        self.window_end = window_end
        self.counts = dict.fromkeys(CATEGORIES, 0)
        self.dram_accesses = 0
        self.nvm_reads = 0
        self.nvm_writes = 0
        self.demand_reads = 0
        self.demand_writes = 0
        self.accepted = 0
        self.done = 0
        self._busy = {"dram": 0, "nvm": 0}
        self._last_end = {"dram": 0, "nvm": 0}
        self._responded = set()
        self.window_responses = 0
        self.latencies = []
        self.orb_latencies = []
        self.nvm_wq_latencies = []
        self.state_time = {}
        self.timeseries_interval = timeseries_interval
        self._ts_bytes = {}
        self._ts_busy = {}

    def in_window(self, tick):
        return tick >= self.window_start and (self.window_end is None or tick < self.window_end)

    def record_bus_busy(self, device, start, end):
        if start < self._last_end[device]:
            raise SimulationError(
                "%s bus overlap: burst at %d starts before previous end %d"
                % (device, start, self._last_end[device]))
        self._last_end[device] = end
        lo = start if start > self.window_start else self.window_start
        hi = end
        if self.window_end is not None and hi > self.window_end:
            hi = self.window_end
        if hi > lo:
            self._busy[device] += hi - lo
        if self.timeseries_interval:
            key = (start // self.timeseries_interval, device)
            self._ts_busy[key] = self._ts_busy.get(key, 0) + (end - start)

    def record_response(self, pkt, tick):
        if pkt.id in self._responded:
            raise SimulationError("duplicate response for packet %d" % pkt.id)
        self._responded.add(pkt.id)
        if pkt.is_read:
            self.demand_reads += 1
        else:
            self.demand_writes += 1
        if self.in_window(tick):
            self.window_responses += 1
            self.latencies.append(tick - pkt.arrival)
        if self.timeseries_interval:
            key = tick // self.timeseries_interval
            self._ts_bytes[key] = self._ts_bytes.get(key, 0) + BLOCK

    def record_category(self, name):
        self.counts[name] += 1

    def record_done(self, pkt, tick):
        self.done += 1
        if self.in_window(tick):
            self.orb_latencies.append(tick - pkt.arrival)

    def record_nvm_write_queue(self, enqueued, started):
        if self.in_window(started):
            self.nvm_wq_latencies.append(started - enqueued)

    def add_state_time(self, state, duration):
        self.state_time[state] = self.state_time.get(state, 0) + duration

    @property
    def responses(self):
        return len(self._responded)

    def window_ticks(self, end_tick):
        end = self.window_end if self.window_end is not None else end_tick
        return max(0, end - self.window_start)

    def check_identity(self):
        """Per-category costs must reproduce the device counters exactly."""
        dram = nvm_r = nvm_w = 0
        for name, n in self.counts.items():
            d, r, w = CATEGORY_COST[name]
            dram += d * n
            nvm_r += r * n
            nvm_w += w * n
        expected = (dram, nvm_r, nvm_w)
        actual = (self.dram_accesses, self.nvm_reads, self.nvm_writes)
        return expected == actual, expected, actual

    def finalize(self, end_tick, wear_events=0, invariants=None, cache_mode=True):
        window = self.window_ticks(end_tick)
        demand = self.demand_reads + self.demand_writes
        if demand != self.responses:
            raise SimulationError("response accounting mismatch")
        invariants = dict(invariants or {})
        if cache_mode:
            ok, expected, actual = self.check_identity()
            invariants["amplification_identity"] = ok
            if not ok:
                raise SimulationError(
                    "amplification identity failed: categories imply %s, counters %s"
                    % (expected, actual))
        total = self.dram_accesses + self.nvm_reads + self.nvm_writes
        hits = self.counts["read_hit"] + self.counts["write_hit"]
        misses = sum(self.counts.values()) - hits
        seconds = window / 1e12
        return StatsReport(
            llc_bandwidth=round(self.window_responses * BLOCK / seconds / 1e9, 6) if window else 0.0,
            dram_bus_util=round(100.0 * self._busy["dram"] / window, 4) if window else 0.0,
            nvm_bus_util=round(100.0 * self._busy["nvm"] / window, 4) if window else 0.0,
            dram_accesses=self.dram_accesses,
            nvm_reads=self.nvm_reads,
            nvm_writes=self.nvm_writes,
            demand_reads=self.demand_reads,
            demand_writes=self.demand_writes,
            hit_ratio=round(100.0 * hits / demand, 4) if demand and cache_mode else 0.0,
            access_amplification=round(total / demand, 6) if demand else 0.0,
            avg_orb_latency=_summary(self.orb_latencies)["mean"],
            avg_nvm_write_queue_latency=_summary(self.nvm_wq_latencies)["mean"],
            wear_events=wear_events,
            window_ns=window / 1000.0,
            responses_in_window=self.window_responses,
            categories=dict(self.counts),
            latency_ns=_summary(self.latencies),
            orb_latency_ns=_summary(self.orb_latencies),
            nvm_write_queue_latency_ns=_summary(self.nvm_wq_latencies),
            state_time_ns={str(k): round(v / 1000.0, 3) for k, v in sorted(
                self.state_time.items(), key=lambda kv: str(kv[0]))},
            invariants=invariants,
            misses_per_kilo_requests=round(1000.0 * misses / demand, 4) if demand and cache_mode else 0.0,
        )

    def write_timeseries(self, path):
        """Per-interval LLC bandwidth and bus utilization as CSV."""
        if not self.timeseries_interval:
            raise ValueError("timeseries interval not configured")
        step = self.timeseries_interval
        keys = set(self._ts_bytes) | {k for k, _ in self._ts_busy}
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["start_ns", "llc_bandwidth_gbps", "dram_bus_util", "nvm_bus_util"])
            for k in sorted(keys):
                seconds = step / 1e12
                writer.writerow([
                    k * step / 1000.0,
                    round(self._ts_bytes.get(k, 0) / seconds / 1e9, 6),
                    round(100.0 * self._ts_busy.get((k, "dram"), 0) / step, 4),
                    round(100.0 * self._ts_busy.get((k, "nvm"), 0) / step, 4),
                ])
