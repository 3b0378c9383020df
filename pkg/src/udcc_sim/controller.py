"""Unified DRAM-cache / NVM controller.

Every demand packet lives in the Outstanding Request Buffer (ORB) while it
walks the packet state machine.  A packet whose cache block already has a
live ORB entry waits in the Conflict Request Buffer (CRB) and is promoted,
oldest first, when that entry completes.  Dirty victims become separate
writeback sub-requests queued for the NVM.

Only the ORB, the CRB and the writeback queue are bounded; the per-stage
queues in between are not.
"""

import heapq
from collections import deque
from dataclasses import dataclass
from enum import Enum
from itertools import count

from .kernel import SimulationError
from .memtypes import (BLOCK_SIZE, PacketState, WRITEBACK_EDGES, block_address,
                       is_legal)
from .scheduler import DramQueue, Policy, select

S = PacketState


class Mode(Enum):
    DRAM_CACHE = "dram_cache"
    DRAM_ONLY = "dram_only"
    NVM_ONLY = "nvm_only"


class Outcome(Enum):
    ACCEPTED = "accepted"
    SENT_TO_CRB = "sent_to_crb"
    RETRY = "retry"


@dataclass
class ControllerConfig:
    orb_size: int = 256
    crb_size: int = 32
    policy: Policy = Policy.FRFCFS
    mode: Mode = Mode.DRAM_CACHE
    wb_queue_size: int = 128
    # writebacks jump ahead of demand NVM reads once the queue is this full
    wb_drain_frac: float = 0.75
    # "reads" (default) or "writes": who goes first below the drain mark
    nvm_priority: str = "reads"
    write_high_frac: float = 0.5
    write_low_frac: float = 0.25

    def __post_init__(self):
        if self.orb_size < 1 or self.crb_size < 0 or self.wb_queue_size < 1:
            raise ValueError("buffer sizes must be positive")
        if self.nvm_priority not in ("reads", "writes"):
            raise ValueError("nvm_priority must be 'reads' or 'writes'")
        self.policy = Policy(self.policy)
        self.mode = Mode(self.mode)


class OrbEntry:
    __slots__ = ("pkt", "state", "key", "index", "tag", "resolution", "victim_tag",
                 "timestamps", "order", "bank", "row", "qtoken", "state_since",
                 "responded")

    def __init__(self, pkt, key, index, tag, now):
        self.pkt = pkt
        self.state = S.RECV_PKT
        self.key = key
        self.index = index
        self.tag = tag
        self.resolution = "unresolved"
        self.victim_tag = None
        self.timestamps = {S.RECV_PKT: now}
        self.order = pkt.id
        self.bank = 0
        self.row = 0
        self.qtoken = 0
        self.state_since = now
        self.responded = False

    def __repr__(self):
        return "OrbEntry(%r, %s, %s)" % (self.pkt, self.state, self.resolution)


class Writeback:
    """Dirty-victim writeback sub-request."""

    __slots__ = ("addr", "parent", "order", "enqueued", "state", "state_since", "id")

    def __init__(self, addr, parent, now):
        self.addr = addr
        self.parent = parent
        self.id = parent.pkt.id
        self.order = parent.order
        self.enqueued = now
        self.state = S.DRAM_READ_RESP
        self.state_since = now


class Controller:

    def __init__(self, sim, cfg, dram, nvm, stats, tag_store=None, trace=None):
        self.sim = sim
        self.cfg = cfg
        self.dram = dram
        self.nvm = nvm
        self.stats = stats
        self.tags = tag_store
        self.trace = trace
        self.mode = cfg.mode
        self.policy = cfg.policy
        if self.mode is Mode.DRAM_CACHE and tag_store is None:
            raise ValueError("dram_cache mode needs a tag store")
        self.num_blocks = tag_store.geo.num_blocks if tag_store is not None else 0

        self.orb = {}
        self.crb = {}
        self.crb_count = 0
        nb = dram.timing.num_banks if dram is not None else 1
        tokens = count(1)
        self.dram_reads = DramQueue(nb, tokens)
        self.dram_writes = DramQueue(nb, tokens)
        self.nvm_reads = []
        self.nvm_writes = deque()
        self.wb_blocked = deque()
        self.draining = False
        self._high = max(1, int(cfg.orb_size * cfg.write_high_frac))
        self._low = int(cfg.orb_size * cfg.write_low_frac)
        self._wb_drain = max(1, int(cfg.wb_queue_size * cfg.wb_drain_frac))
        self._dram_pending = False
        self._nvm_pending = False
        self.on_slot_free = None

        self.max_orb = 0
        self.max_crb = 0
        self.max_wb = 0
        self.retries = 0

        if nvm is not None:
            nvm.on_read_done = self._nvm_read_done
            nvm.on_write_done = self._nvm_write_done
            nvm.on_write_start = self._nvm_write_start
        self._frontend = dram.timing.frontend_latency if dram is not None else 0
        self._backend = dram.timing.backend_latency if dram is not None else 0

    # -- admission -----------------------------------------------------------

    def recv(self, pkt):
        """Offer a packet; return an :class:`Outcome`."""
        if self.mode is Mode.DRAM_CACHE:
            key = (pkt.addr // BLOCK_SIZE) % self.num_blocks
            if key in self.orb:
                if self.crb_count < self.cfg.crb_size:
                    q = self.crb.get(key)
                    if q is None:
                        q = self.crb[key] = deque()
                    q.append(pkt)
                    self.crb_count += 1
                    if self.crb_count > self.max_crb:
                        self.max_crb = self.crb_count
                    return Outcome.SENT_TO_CRB
                self.retries += 1
                return Outcome.RETRY
        else:
            key = pkt.id
        if len(self.orb) >= self.cfg.orb_size:
            self.retries += 1
            return Outcome.RETRY
        self._admit(pkt, key)
        return Outcome.ACCEPTED

    def _admit(self, pkt, key):
        now = self.sim.now
        if self.mode is Mode.DRAM_CACHE:
            blk = pkt.addr // BLOCK_SIZE
            e = OrbEntry(pkt, key, key, blk // self.num_blocks, now)
            e.bank, e.row = self.dram.decode(key * BLOCK_SIZE)
        else:
            e = OrbEntry(pkt, key, None, None, now)
            if self.mode is Mode.DRAM_ONLY:
                e.bank, e.row = self.dram.decode(pkt.addr)
        self.orb[key] = e
        self.stats.accepted += 1
        if len(self.orb) > self.max_orb:
            self.max_orb = len(self.orb)
        if self._frontend:
            self.sim.schedule(now + self._frontend, self._enqueue, e)
        else:
            self._enqueue(e)

    def _enqueue(self, e):
        if self.mode is Mode.NVM_ONLY:
            if e.pkt.is_read:
                heapq.heappush(self.nvm_reads, (e.order, e.pkt.id, e))
            else:
                self.nvm_writes.append(e)
            self._kick_nvm()
            return
        if self.mode is Mode.DRAM_ONLY and not e.pkt.is_read:
            self.dram_writes.push(e)
        else:
            self.dram_reads.push(e)
        self._kick_dram()

    # -- state machine helpers -------------------------------------------------

    def _move(self, e, new):
        now = self.sim.now
        if not is_legal(e.state, new):
            raise SimulationError("illegal transition %s -> %s for %r" % (e.state, new, e))
        self.stats.add_state_time(e.state, now - e.state_since)
        if self.trace is not None:
            self.trace.transition(now, e.pkt.id, e.state, new)
        e.state = new
        e.state_since = now
        e.timestamps[new] = now

    def _move_wb(self, wb, new):
        now = self.sim.now
        if (wb.state, new) not in WRITEBACK_EDGES:
            raise SimulationError("illegal writeback transition %s -> %s" % (wb.state, new))
        if self.trace is not None:
            self.trace.transition(now, wb.id, wb.state, new, writeback=True)
        wb.state = new
        wb.state_since = now

    def _respond(self, e, tick):
        if e.responded:
            raise SimulationError("second response for %r" % e)
        e.responded = True
        self.stats.record_response(e.pkt, tick)

    def _complete(self, e):
        now = self.sim.now
        self.stats.record_done(e.pkt, now)
        del self.orb[e.key]
        q = self.crb.get(e.key)
        if q:
            pkt = q.popleft()
            self.crb_count -= 1
            if not q:
                del self.crb[e.key]
            self._admit(pkt, e.key)
        if self.on_slot_free is not None:
            self.on_slot_free()

    # -- DRAM side ---------------------------------------------------------------

    def _kick_dram(self):
        if not self._dram_pending:
            self._dram_pending = True
            t = self.dram.next_decision()
            now = self.sim.now
            self.sim.schedule(t if t > now else now, self._dram_decide)

    def _dram_decide(self, _):
        self._dram_pending = False
        reads, writes = self.dram_reads, self.dram_writes
        nw = writes.count
        if self.draining and nw <= self._low:
            self.draining = False
        elif not self.draining and nw >= self._high:
            self.draining = True
        if nw and (self.draining or not reads.count):
            q = writes
        elif reads.count:
            q = reads
        else:
            return
        now = self.sim.now
        e = select(q, self.policy, self.dram, now)
        q.remove(e)
        is_read = q is reads
        _, end = self.dram.access(is_read, e.bank, e.row, now)
        self.stats.dram_accesses += 1
        if self.trace is not None:
            self.trace.access(now, e.pkt.id, "DRAM_RD" if is_read else "DRAM_WR")
        if self.mode is Mode.DRAM_CACHE:
            if is_read:
                self._move(e, S.DRAM_READ)
                self.sim.schedule(end, self._dram_read_done, e)
            else:
                self.sim.schedule(end, self._dram_write_done, e)
        else:
            self.sim.schedule(end, self._direct_done, e)
        if reads.count or writes.count:
            self._kick_dram()

    def _dram_read_done(self, e):
        self._move(e, S.DRAM_READ_RESP)
        tags = self.tags
        index = e.index
        cur = tags.tags[index]
        is_read = e.pkt.is_read
        now = self.sim.now
        if cur == e.tag:
            e.resolution = "hit"
            if is_read:
                self.stats.record_category("read_hit")
                self._respond(e, now + self._backend)
                self._move(e, S.DONE)
                self._complete(e)
            else:
                self.stats.record_category("write_hit")
                tags.dirty[index] = 1
                self._move(e, S.DRAM_WRITE)
                self._respond(e, now + self._backend)
                self.dram_writes.push(e)
                self._kick_dram()
            return
        victim_dirty = cur >= 0 and tags.dirty[index] == 1
        e.resolution = "miss_dirty" if victim_dirty else "miss_clean"
        self.stats.record_category(("read_" if is_read else "write_") + e.resolution)
        tags.tags[index] = e.tag
        tags.dirty[index] = 0 if is_read else 1
        if victim_dirty:
            e.victim_tag = cur
            if len(self.nvm_writes) >= self.cfg.wb_queue_size:
                self.wb_blocked.append(e)
                return
            self._enqueue_writeback(e)
        self._to_nvm_wait(e)

    def _enqueue_writeback(self, e):
        addr = block_address(e.victim_tag, e.index, self.tags.geo)
        self.nvm_writes.append(Writeback(addr, e, self.sim.now))
        if len(self.nvm_writes) > self.max_wb:
            self.max_wb = len(self.nvm_writes)

    def _to_nvm_wait(self, e):
        self._move(e, S.NVM_READ_WAIT_ISSUE)
        heapq.heappush(self.nvm_reads, (e.order, e.pkt.id, e))
        self._kick_nvm()

    def _dram_write_done(self, e):
        self._move(e, S.DONE)
        self._complete(e)

    def _direct_done(self, e):
        # dram_only / nvm_only: one device access per demand packet
        self._respond(e, self.sim.now + self._backend)
        e.state = S.DONE
        self._complete(e)

    # -- NVM side ------------------------------------------------------------------

    def _kick_nvm(self):
        if not self._nvm_pending:
            self._nvm_pending = True
            self.sim.schedule(self.sim.now, self._nvm_decide)

    def _nvm_decide(self, _):
        self._nvm_pending = False
        now = self.sim.now
        nvm = self.nvm
        has_r = bool(self.nvm_reads)
        has_w = bool(self.nvm_writes)
        if not has_r and not has_w:
            return
        read_ok = has_r and nvm.can_accept(True, now)
        write_ok = has_w and nvm.can_accept(False, now)
        writes_first = (self.cfg.nvm_priority == "writes"
                        or len(self.nvm_writes) >= self._wb_drain)
        if write_ok and (writes_first or not read_ok):
            self._issue_nvm_write(now)
        elif read_ok:
            self._issue_nvm_read(now)
        else:
            # blocked: a freed slot or the end of a wear stall re-kicks us
            if nvm.stall_active(now):
                self._nvm_pending = True
                self.sim.schedule(nvm.wear_stall_until, self._nvm_decide)
            return
        if self.nvm_reads or self.nvm_writes:
            self._nvm_pending = True
            self.sim.schedule(now + nvm.timing.tBURST, self._nvm_decide)

    def _issue_nvm_read(self, now):
        _, _, e = heapq.heappop(self.nvm_reads)
        if self.mode is Mode.DRAM_CACHE:
            self._move(e, S.NVM_READ)
        self.nvm.issue_read(e, now)
        self.stats.nvm_reads += 1
        if self.trace is not None:
            self.trace.access(now, e.pkt.id, "NVM_RD")

    def _issue_nvm_write(self, now):
        w = self.nvm_writes.popleft()
        self.stats.nvm_writes += 1
        if self.mode is Mode.NVM_ONLY:
            admit = self.nvm.issue_write(w, now)
            if self.trace is not None:
                self.trace.access(now, w.pkt.id, "NVM_WR")
            self.sim.schedule(admit, self._direct_done, w)
            return
        self._move_wb(w, S.NVM_WRITE)
        self.nvm.issue_write(w, now)
        if self.trace is not None:
            self.trace.access(now, w.id, "NVM_WR", writeback=True)
        size = self.cfg.wb_queue_size
        while self.wb_blocked and len(self.nvm_writes) < size:
            e = self.wb_blocked.popleft()
            self._enqueue_writeback(e)
            self._to_nvm_wait(e)

    def _nvm_read_done(self, e):
        now = self.sim.now
        if self.mode is Mode.NVM_ONLY:
            self._direct_done(e)
        else:
            self._move(e, S.NVM_READ_RESP)
            self._move(e, S.DRAM_WRITE)
            # reads are answered from the NVM data; writes once the merged
            # fill+data write is queued
            self._respond(e, now + self._backend)
            self.dram_writes.push(e)
            self._kick_dram()
        self._kick_nvm()

    def _nvm_write_start(self, w, tick):
        if isinstance(w, Writeback):
            self.stats.record_nvm_write_queue(w.enqueued, tick)

    def _nvm_write_done(self, w):
        if isinstance(w, Writeback):
            self._move_wb(w, S.DONE)
        self._kick_nvm()

    # -- post-run checks ---------------------------------------------------------

    def drained(self):
        return (not self.orb and not self.crb_count and not self.nvm_writes
                and not self.nvm_reads and not self.wb_blocked
                and self.dram_reads.count == 0 and self.dram_writes.count == 0)

    def invariants(self):
        nvm = self.nvm
        return {
            "orb_within_capacity": self.max_orb <= self.cfg.orb_size,
            "crb_within_capacity": self.max_crb <= self.cfg.crb_size,
            "wb_queue_within_capacity": self.max_wb <= self.cfg.wb_queue_size,
            "nvm_reads_within_capacity": nvm is None or nvm.max_pending_seen <= nvm.max_pending_reads,
            "nvm_write_buffer_within_capacity": nvm is None or nvm.max_buffer_seen <= nvm.write_buffer_size,
            "all_done": self.drained() and self.stats.done == self.stats.accepted,
            "one_response_per_packet": self.stats.responses == self.stats.accepted,
        }
