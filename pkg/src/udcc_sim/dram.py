"""Cycle-level DRAM interface: banks, open rows and data-bus occupancy.

The model is command-level rather than cycle-accurate.  Each access is
planned once, when the controller picks it: the bank is precharged and/or
activated as needed, the column command is placed no earlier than the
previous one plus ``tBURST``, and the burst is placed on the data bus.
Decisions are taken ``tRP + tRCD`` ahead of the column-command slot so that
a row miss to an idle bank can be prepared without a bubble.

Switching the data bus between directions costs a turnaround: a read column
command waits ``tWTR`` after the last write burst ends, and a write burst
starts at least ``tRTW`` after the last read burst.  This is what makes
write batching (and so buffer capacity) matter for write traffic.
"""

from dataclasses import dataclass, replace

from .channel import DataBus
from .kernel import ns

BLOCK = 64


@dataclass(frozen=True)
class DramTiming:
    tBURST: int
    tRCD: int
    tCL: int
    tRP: int
    tWL: int
    num_banks: int
    row_bytes: int
    tWTR: int = 0
    tRTW: int = 0
    frontend_latency: int = ns(10)
    backend_latency: int = ns(6)
    addr_map: str = "RoBaCo"
    name: str = "custom"

    def __post_init__(self):
        for field in ("tBURST", "tRCD", "tCL", "tRP", "tWL", "num_banks", "row_bytes"):
            if getattr(self, field) <= 0:
                raise ValueError("DRAM timing field %s must be > 0" % field)
        if self.tWTR < 0 or self.tRTW < 0:
            raise ValueError("turnaround times must be >= 0")
        if self.row_bytes % BLOCK:
            raise ValueError("row_bytes must be a multiple of 64")
        if self.addr_map not in ADDR_MAPS:
            raise ValueError("unknown address map %r (expected one of %s)"
                             % (self.addr_map, ", ".join(ADDR_MAPS)))

    @property
    def lookahead(self):
        return self.tRP + self.tRCD


# RoBaCo: low bits select the column, then the bank, then the row.
# RoCoBa: consecutive blocks rotate over banks first.
ADDR_MAPS = ("RoBaCo", "RoCoBa")

PRESETS = {
    # tRTW is two clocks of bus idle time
    "ddr3": DramTiming(tBURST=5000, tRCD=ns(13.75), tCL=ns(13.75), tRP=ns(13.75),
                       tWL=ns(10), num_banks=16, row_bytes=8192,
                       tWTR=ns(7.5), tRTW=ns(2.5), name="ddr3"),
    "ddr4": DramTiming(tBURST=3333, tRCD=ns(14.16), tCL=ns(14.16), tRP=ns(14.16),
                       tWL=ns(10), num_banks=16, row_bytes=8192,
                       tWTR=ns(7.5), tRTW=ns(1.666), name="ddr4"),
    "ddr5": DramTiming(tBURST=1905, tRCD=ns(14), tCL=ns(14), tRP=ns(14),
                       tWL=ns(12), num_banks=32, row_bytes=8192,
                       tWTR=ns(10), tRTW=ns(0.952), name="ddr5"),
    # One aggregated channel standing in for all HBM pseudo channels.
    "hbm": DramTiming(tBURST=250, tRCD=ns(14), tCL=ns(14), tRP=ns(14),
                      tWL=ns(4), num_banks=128, row_bytes=2048,
                      tWTR=ns(7.5), tRTW=ns(2), name="hbm"),
}

DECLARED_PEAK_GBPS = {"ddr3": 12.8, "ddr4": 19.2, "ddr5": 33.6, "hbm": 256.0}


def preset(name, **overrides):
    try:
        timing = PRESETS[name.lower()]
    except KeyError:
        raise ValueError("unknown DRAM preset %r (expected one of %s)"
                         % (name, ", ".join(PRESETS))) from None
    return replace(timing, **overrides) if overrides else timing


def peak_bandwidth(timing):
    """Peak data-bus bandwidth in bytes per second."""
    return BLOCK * 1e12 / timing.tBURST


def decode(addr, timing):
    """Map a byte address to ``(bank, row, column)``."""
    blk = addr // BLOCK
    cols = timing.row_bytes // BLOCK
    banks = timing.num_banks
    if timing.addr_map == "RoBaCo":
        col = blk % cols
        rest = blk // cols
        return rest % banks, rest // banks, col
    bank = blk % banks
    rest = blk // banks
    return bank, rest // cols, rest % cols


class BankState:
    __slots__ = ("open_row", "busy_until", "col_ready", "pre_ready")

    def __init__(self):
        self.open_row = None
        self.busy_until = 0
        # earliest column command to the open row
        self.col_ready = 0
        # earliest precharge / activate for a new row
        self.pre_ready = 0


class DramInterface:
    """Bank and bus bookkeeping for one DRAM channel."""

    def __init__(self, timing, bus=None):
        self.timing = timing
        self.bus = bus if bus is not None else DataBus("dram")
        self.banks = [BankState() for _ in range(timing.num_banks)]
        self.cmd_free = 0
        # turnaround limits left by the last write / read burst
        self.read_cmd_after = 0
        self.write_data_after = 0
        self.row_hits = 0
        self.row_misses = 0
        self.reads = 0
        self.writes = 0
        cols = timing.row_bytes // BLOCK
        self._cols = cols
        self._banks = timing.num_banks
        self._robaco = timing.addr_map == "RoBaCo"

    def decode(self, addr):
        blk = addr // BLOCK
        if self._robaco:
            rest = blk // self._cols
            return rest % self._banks, rest // self._banks
        rest = blk // self._banks
        return blk % self._banks, rest // self._cols

    def next_decision(self):
        return self.cmd_free - self.timing.lookahead

    def column_ready(self, bank, row, now):
        """Earliest column-command tick for ``row`` in ``bank``, ignoring the bus."""
        b = self.banks[bank]
        t = self.timing
        if b.open_row == row:
            return b.col_ready if b.col_ready > now else now
        start = b.pre_ready if b.pre_ready > now else now
        if b.open_row is None:
            return start + t.tRCD
        return start + t.tRP + t.tRCD

    def access(self, is_read, bank, row, now, device="dram"):
        """Plan one 64 B access; return ``(bus_start, completion)``."""
        t = self.timing
        b = self.banks[bank]
        if b.open_row == row:
            col = b.col_ready if b.col_ready > now else now
            self.row_hits += 1
        else:
            start = b.pre_ready if b.pre_ready > now else now
            col = start + t.tRCD
            if b.open_row is not None:
                col += t.tRP
            self.row_misses += 1
        if col < self.cmd_free:
            col = self.cmd_free
        if is_read:
            if col < self.read_cmd_after:
                col = self.read_cmd_after
            cas = t.tCL
        else:
            cas = t.tWL
        data = col + cas
        floor = self.bus.free_at
        if not is_read and floor < self.write_data_after:
            floor = self.write_data_after
        if data < floor:
            data = floor
            col = data - cas
        start = self.bus.reserve(data, t.tBURST, device)
        end = start + t.tBURST
        self.cmd_free = col + t.tBURST
        b.open_row = row
        b.col_ready = col + t.tBURST
        if end > b.pre_ready:
            b.pre_ready = end
        if end > b.busy_until:
            b.busy_until = end
        if is_read:
            self.reads += 1
            self.write_data_after = end + t.tRTW
        else:
            self.writes += 1
            self.read_cmd_after = end + t.tWTR
        return start, end
