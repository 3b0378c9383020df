"""Demand-request sources: synthetic traffic generators and trace replay."""

from dataclasses import dataclass
from math import gcd

import numpy as np

from .controller import Outcome
from .memtypes import BLOCK_SIZE, MemPacket

PATTERNS = ("linear", "random")

MB = 1 << 20
GB = 1 << 30

# Random-traffic footprints giving the named hit ratios on a 16 MB cache.
_FOOTPRINTS = {0: 6 * GB, 25: 64 * MB, 50: 32 * MB, 75: 20 * MB, 100: 6 * MB}
_REFERENCE_CACHE = 16 * MB


@dataclass
class TrafficConfig:
    pattern: str = "linear"
    read_pct: int = 100
    range_bytes: int = 6 * MB
    start_addr: int = 0
    # None means max-rate injection
    inject_interval: int = None
    duration: int = 0
    seed: int = 1

    def __post_init__(self):
        if self.pattern not in PATTERNS:
            raise ValueError("pattern must be one of %s, got %r" % (PATTERNS, self.pattern))
        if not 0 <= self.read_pct <= 100:
            raise ValueError("read_pct must be within 0..100")
        if self.range_bytes < BLOCK_SIZE or self.range_bytes % BLOCK_SIZE:
            raise ValueError("range_bytes must be a positive multiple of 64")
        if self.start_addr % BLOCK_SIZE:
            raise ValueError("start_addr must be 64-aligned")
        if self.inject_interval is not None and self.inject_interval <= 0:
            raise ValueError("inject_interval must be positive")


def hit_ratio_footprint(target, geo):
    """Random-traffic footprint that yields ``target`` percent hits."""
    if geo.capacity != _REFERENCE_CACHE:
        raise ValueError("footprint table assumes a 16 MB cache; set traffic.range explicitly")
    try:
        return _FOOTPRINTS[int(target)]
    except (KeyError, ValueError):
        raise ValueError("no footprint for a %s%% hit ratio (supported: %s); "
                         "set traffic.range explicitly"
                         % (target, ", ".join(str(k) for k in _FOOTPRINTS))) from None


def mixing_period(read_pct):
    return 100 // gcd(read_pct, 100)


class TrafficGenerator:
    """Address and read/write stream for one :class:`TrafficConfig`.

    Reads and writes are interleaved with an error accumulator, so any run
    of ``mixing_period(read_pct)`` consecutive requests holds exactly the
    configured share of reads.
    """

    def __init__(self, cfg):
        self.cfg = cfg
        self.rng = np.random.default_rng(cfg.seed)
        self.blocks = cfg.range_bytes // BLOCK_SIZE
        self._batch = []
        self.pos = 0
        self.acc = 0
        self.next_id = 0

    def _kind(self):
        self.acc += self.cfg.read_pct
        if self.acc >= 100:
            self.acc -= 100
            return True
        return False

    def _addr(self):
        if self.cfg.pattern == "linear":
            blk = self.pos
            self.pos = blk + 1 if blk + 1 < self.blocks else 0
        else:
            if not self._batch:
                self._batch = self.rng.integers(0, self.blocks, 4096).tolist()
                self._batch.reverse()
            blk = self._batch.pop()
        return self.cfg.start_addr + blk * BLOCK_SIZE

    def next_request(self, now):
        if now >= self.cfg.duration:
            return None
        pkt = MemPacket(self.next_id, self._addr(), self._kind(), now)
        self.next_id += 1
        return pkt

    def skip(self, n):
        """Advance a linear stream by ``n`` requests without producing them."""
        if self.cfg.pattern != "linear":
            raise ValueError("skip is only defined for linear traffic")
        self.pos = (self.pos + n) % self.blocks
        self.acc = (self.acc + n * self.cfg.read_pct) % 100

    def prefill(self, tags, limit=None):
        """Functional warm-up: stream this generator's own requests through ``tags``.

        Linear traffic makes one full pass over its range, of which only the
        final ``num_blocks`` requests can leave state behind, so the rest is
        skipped.  Random traffic plays ``8 x footprint`` requests, which
        touches all but ~0.03% of the footprint; footprints over twice the
        cache stop at ``4 x num_blocks`` since most of what they touch is
        evicted again anyway.  Returns the number of requests played.
        """
        n = tags.geo.num_blocks
        if self.cfg.pattern == "linear":
            count = self.blocks
            if count > n:
                self.skip(count - n)
                count = n
        else:
            count = 8 * self.blocks if self.blocks <= 2 * n else 4 * n
        if limit is not None:
            count = min(count, limit)
        if self.cfg.pattern == "linear":
            blks = (self.pos + np.arange(count, dtype=np.int64)) % self.blocks
            self.pos = (self.pos + count) % self.blocks
        else:
            blks = self.rng.integers(0, self.blocks, count)
        p = self.cfg.read_pct
        total = self.acc + p * np.arange(1, count + 1, dtype=np.int64)
        reads = total // 100 > (total - p) // 100
        self.acc = (self.acc + count * p) % 100
        tags.replay(self.cfg.start_addr // BLOCK_SIZE + blks, reads)
        return count


class Requestor:
    """Feeds a generator into the controller, honouring Retry.

    With ``inject_interval`` unset, a new request is offered as soon as the
    previous one was taken; after a Retry the same packet is re-offered
    when the controller frees a slot.
    """

    def __init__(self, sim, ctrl, gen, start=0):
        self.sim = sim
        self.ctrl = ctrl
        self.gen = gen
        self.start = start
        self.interval = gen.cfg.inject_interval
        self.end = start + gen.cfg.duration
        self.pending = None
        self.blocked = False
        self.offered = 0
        ctrl.on_slot_free = self._slot_free
        sim.schedule(start, self._tick)

    def _make(self, now):
        if now >= self.end:
            return None
        pkt = self.gen.next_request(now - self.start)
        if pkt is not None:
            pkt.arrival = now
        return pkt

    def _offer(self, pkt):
        if self.ctrl.recv(pkt) is Outcome.RETRY:
            self.pending = pkt
            self.blocked = True
            return False
        self.offered += 1
        return True

    def _tick(self, _):
        now = self.sim.now
        if self.interval is None:
            self._pump(now)
            return
        pkt = self._make(now)
        if pkt is None:
            return
        if self._offer(pkt):
            self.sim.schedule(now + self.interval, self._tick)

    def _pump(self, now):
        while True:
            pkt = self.pending
            self.pending = None
            if pkt is None:
                pkt = self._make(now)
                if pkt is None:
                    return
            if not self._offer(pkt):
                return

    def _slot_free(self):
        if not self.blocked:
            return
        self.blocked = False
        now = self.sim.now
        if self.interval is None:
            self._pump(now)
            return
        pkt = self.pending
        self.pending = None
        if now >= self.end:
            return
        if self._offer(pkt):
            self.sim.schedule(now + self.interval, self._tick)


# -- trace replay ---------------------------------------------------------------

@dataclass(frozen=True)
class TraceRecord:
    tick: int
    addr: int
    is_read: bool
    size: int


class TraceError(ValueError):
    pass


def read_trace(stream):
    """Yield one 64 B :class:`TraceRecord` per block touched by each line.

    Lines are ``<tick> <hex-addr> <R|W> <size>``; ``#`` starts a comment.
    """
    last = None
    for lineno, raw in enumerate(stream, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise TraceError("line %d: expected '<tick> <addr> <R|W> <size>', got %r"
                             % (lineno, raw.rstrip("\n")))
        tick_s, addr_s, kind, size_s = parts
        try:
            tick = int(tick_s)
            addr = int(addr_s, 16)
            size = int(size_s)
        except ValueError:
            raise TraceError("line %d: bad number in %r" % (lineno, raw.rstrip("\n"))) from None
        kind = kind.upper()
        if kind not in ("R", "W"):
            raise TraceError("line %d: kind must be R or W, got %r" % (lineno, parts[2]))
        if tick < 0 or addr < 0 or size <= 0:
            raise TraceError("line %d: negative tick/address or empty size" % lineno)
        if last is not None and tick < last:
            raise TraceError("line %d: tick %d goes backwards (previous %d)" % (lineno, tick, last))
        last = tick
        first = addr - addr % BLOCK_SIZE
        stop = addr + size
        a = first
        while a < stop:
            yield TraceRecord(tick, a, kind == "R", BLOCK_SIZE)
            a += BLOCK_SIZE


class TraceRequestor:
    """Replays trace records at their ticks (offset by ``start``).

    A record that meets Retry is re-offered when a slot frees; later
    records queue behind it, keeping file order.
    """

    def __init__(self, sim, ctrl, records, start=0, end=None):
        self.sim = sim
        self.ctrl = ctrl
        self.records = iter(records)
        self.start = start
        self.end = end
        self.next_id = 0
        self.offered = 0
        self.blocked = False
        self.pending = None
        ctrl.on_slot_free = self._slot_free
        self._advance()

    def _advance(self):
        rec = next(self.records, None)
        if rec is None:
            self.pending = None
            return
        when = self.start + rec.tick
        if self.end is not None and when >= self.end:
            self.pending = None
            return
        self.pending = rec
        self.sim.schedule(max(when, self.sim.now), self._fire)

    def _fire(self, _):
        self._drain()

    def _drain(self):
        now = self.sim.now
        while self.pending is not None and self.start + self.pending.tick <= now:
            rec = self.pending
            pkt = MemPacket(self.next_id, rec.addr, rec.is_read, self.start + rec.tick)
            if self.ctrl.recv(pkt) is Outcome.RETRY:
                self.blocked = True
                return
            self.next_id += 1
            self.offered += 1
            rec = next(self.records, None)
            if rec is None or (self.end is not None and self.start + rec.tick >= self.end):
                self.pending = None
                return
            self.pending = rec
            if self.start + rec.tick > now:
                self.sim.schedule(self.start + rec.tick, self._fire)
                return

    def _slot_free(self):
        if self.blocked:
            self.blocked = False
            self._drain()
