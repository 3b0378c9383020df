"""NVRAM interface: media latencies, bounded queues, wear-leveling stalls.

Reads hold one of ``max_pending_reads`` slots from issue until their data
has crossed the bus: the media is busy for ``tREAD``, then the transfer
port is occupied for ``tBURST`` so that an idle read completes exactly
``tREAD + tSEND`` after issue.

Writes cross the bus at issue and then sit in the write buffer until the
media commits them.  At most ``write_units`` commits are in flight at once,
each lasting ``tWRITE``; the buffer slot is released when the commit ends.
"""

from collections import deque
from dataclasses import dataclass, replace

from .channel import DataBus
from .kernel import ns, us

BLOCK = 64


@dataclass(frozen=True)
class NvmTiming:
    tREAD: int
    tWRITE: int
    tSEND: int
    tBURST: int
    name: str = "custom"

    def __post_init__(self):
        for field in ("tREAD", "tWRITE", "tSEND", "tBURST"):
            if getattr(self, field) <= 0:
                raise ValueError("NVM timing field %s must be > 0" % field)
        if self.tBURST > self.tSEND:
            raise ValueError("tBURST must fit inside the tSEND window")


PRESETS = {
    "slow": NvmTiming(ns(300), ns(1000), ns(28.32), ns(6.664), "slow"),
    "base": NvmTiming(ns(150), ns(500), ns(14.16), ns(3.332), "base"),
    "fast": NvmTiming(ns(75), ns(250), ns(7.08), ns(1.666), "fast"),
}


def preset(name, **overrides):
    try:
        timing = PRESETS[name.lower()]
    except KeyError:
        raise ValueError("unknown NVM preset %r (expected one of %s)"
                         % (name, ", ".join(PRESETS))) from None
    return replace(timing, **overrides) if overrides else timing


def peak_bandwidth(timing):
    return BLOCK * 1e12 / timing.tBURST


class NvmInterface:
    """Timing model of one NVM device.

    ``on_read_done(req)`` fires when a read's data has arrived,
    ``on_write_done(req)`` when a write's media commit finishes and
    ``on_write_start(req, tick)`` when that commit begins.
    """

    def __init__(self, sim, timing, bus=None, max_pending_reads=64,
                 write_buffer_size=128, write_units=13, wear_leveling=False,
                 wear_interval=14000, wear_stall=us(60), wear_gate="all",
                 on_read_done=None, on_write_done=None, on_write_start=None):
        if wear_gate not in ("all", "writes"):
            raise ValueError("wear_gate must be 'all' or 'writes'")
        if write_units <= 0 or max_pending_reads <= 0 or write_buffer_size <= 0:
            raise ValueError("NVM queue sizes must be positive")
        self.sim = sim
        self.timing = timing
        self.bus = bus if bus is not None else DataBus("nvm")
        self.max_pending_reads = max_pending_reads
        self.write_buffer_size = write_buffer_size
        self.write_units = write_units
        self.wear_leveling = wear_leveling
        self.wear_interval = wear_interval
        self.wear_stall = wear_stall
        self.wear_gate = wear_gate
        self.on_read_done = on_read_done
        self.on_write_done = on_write_done
        self.on_write_start = on_write_start

        self.pending_reads = 0
        self.write_buffer = 0
        self.writes_since_wear_event = 0
        self.wear_stall_until = 0
        self.wear_events = 0
        self.wear_event_ticks = []
        self.reads = 0
        self.writes = 0
        self.max_pending_seen = 0
        self.max_buffer_seen = 0
        self._media_queue = deque()
        self._units_busy = 0
        self._resume_scheduled = False

    def _stalled(self, is_read, now):
        if now >= self.wear_stall_until:
            return False
        return not is_read or self.wear_gate == "all"

    def can_accept(self, is_read, now):
        if self._stalled(is_read, now):
            return False
        if is_read:
            return self.pending_reads < self.max_pending_reads
        return self.write_buffer < self.write_buffer_size

    def issue_read(self, req, now):
        """Start a read; return its completion tick on an idle port."""
        t = self.timing
        self.pending_reads += 1
        if self.pending_reads > self.max_pending_seen:
            self.max_pending_seen = self.pending_reads
        self.reads += 1
        start = now
        if self.wear_gate == "all" and self.wear_stall_until > start:
            start = self.wear_stall_until
        media_ready = start + t.tREAD
        self.sim.schedule(media_ready + t.tSEND - t.tBURST, self._read_transfer, req)
        return media_ready + t.tSEND

    def _read_transfer(self, req):
        now = self.sim.now
        start = self.bus.reserve(now, self.timing.tBURST, "nvm")
        self.sim.schedule(start + self.timing.tBURST, self._read_done, req)

    def _read_done(self, req):
        self.pending_reads -= 1
        if self.on_read_done is not None:
            self.on_read_done(req)

    def issue_write(self, req, now):
        """Move a write into the buffer; return the tick its data is buffered."""
        t = self.timing
        self.write_buffer += 1
        if self.write_buffer > self.max_buffer_seen:
            self.max_buffer_seen = self.write_buffer
        self.writes += 1
        start = self.bus.reserve(now, t.tBURST, "nvm")
        admit = start + t.tBURST
        self._media_queue.append((req, admit))
        if self.wear_leveling:
            self.writes_since_wear_event += 1
            if self.writes_since_wear_event >= self.wear_interval:
                self.wear_event(now)
        self._start_writes()
        return admit

    def wear_event(self, now):
        self.wear_stall_until = now + self.wear_stall
        self.writes_since_wear_event = 0
        self.wear_events += 1
        self.wear_event_ticks.append(now)

    def _start_writes(self, _=None):
        sim = self.sim
        now = sim.now
        queue = self._media_queue
        while queue and self._units_busy < self.write_units:
            if now < self.wear_stall_until:
                if not self._resume_scheduled:
                    self._resume_scheduled = True
                    sim.schedule(self.wear_stall_until, self._resume)
                return
            req, admit = queue.popleft()
            start = admit if admit > now else now
            self._units_busy += 1
            if self.on_write_start is not None:
                self.on_write_start(req, start)
            sim.schedule(start + self.timing.tWRITE, self._write_commit, req)

    def _resume(self, _):
        self._resume_scheduled = False
        self._start_writes()

    def _write_commit(self, req):
        self._units_busy -= 1
        self.write_buffer -= 1
        if self.on_write_done is not None:
            self.on_write_done(req)
        self._start_writes()

    def stall_active(self, now):
        return now < self.wear_stall_until
