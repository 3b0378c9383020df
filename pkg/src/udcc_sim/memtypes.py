"""Packets, packet states, cache geometry and the functional tag store."""

from dataclasses import dataclass
from enum import Enum

import numpy as np

BLOCK_SIZE = 64
BLOCK_MASK = ~(BLOCK_SIZE - 1)


class PacketState(Enum):
    RECV_PKT = "Recv_Pkt"
    DRAM_READ = "DRAM_Read"
    DRAM_READ_RESP = "DRAM_Read_Resp"
    DRAM_WRITE = "DRAM_Write"
    NVM_READ_WAIT_ISSUE = "NVM_Read_Wait_Issue"
    NVM_READ = "NVM_Read"
    NVM_READ_RESP = "NVM_Read_Resp"
    NVM_WRITE = "NVM_Write"
    DONE = "Done"

    def __str__(self):
        return self.value


S = PacketState

_DEMAND_EDGES = frozenset({
    (S.RECV_PKT, S.DRAM_READ),
    (S.DRAM_READ, S.DRAM_READ_RESP),
    (S.DRAM_READ_RESP, S.DONE),
    (S.DRAM_READ_RESP, S.DRAM_WRITE),
    (S.DRAM_READ_RESP, S.NVM_READ_WAIT_ISSUE),
    (S.NVM_READ_WAIT_ISSUE, S.NVM_READ),
    (S.NVM_READ, S.NVM_READ_RESP),
    (S.NVM_READ_RESP, S.DRAM_WRITE),
    (S.DRAM_WRITE, S.DONE),
})

# Only victim-writeback sub-requests take these two edges.
WRITEBACK_EDGES = frozenset({
    (S.DRAM_READ_RESP, S.NVM_WRITE),
    (S.NVM_WRITE, S.DONE),
})

LEGAL_TRANSITIONS = _DEMAND_EDGES | WRITEBACK_EDGES


def legal_transitions():
    return LEGAL_TRANSITIONS


def is_legal(src, dst, writeback=False):
    if writeback:
        return (src, dst) in WRITEBACK_EDGES
    return (src, dst) in _DEMAND_EDGES


class MemPacket:
    """One 64 B demand request."""

    __slots__ = ("id", "addr", "is_read", "size", "arrival")

    def __init__(self, id, addr, is_read, arrival=0):
        self.id = id
        self.addr = addr & BLOCK_MASK
        self.is_read = is_read
        self.size = BLOCK_SIZE
        self.arrival = arrival

    def __repr__(self):
        return "MemPacket(id=%d, addr=%#x, %s, arrival=%d)" % (
            self.id, self.addr, "R" if self.is_read else "W", self.arrival)


@dataclass(frozen=True)
class CacheGeometry:
    capacity: int
    block_size: int = BLOCK_SIZE

    def __post_init__(self):
        if self.block_size != BLOCK_SIZE:
            raise ValueError("block size must be %d bytes" % BLOCK_SIZE)
        blocks, rem = divmod(self.capacity, self.block_size)
        if rem or blocks <= 0 or blocks & (blocks - 1):
            raise ValueError(
                "capacity %d is not a power-of-two multiple of %d"
                % (self.capacity, self.block_size))

    @property
    def num_blocks(self):
        return self.capacity // self.block_size


def block_index(addr, geo):
    return (addr // BLOCK_SIZE) % geo.num_blocks


def tag_of(addr, geo):
    return addr // (BLOCK_SIZE * geo.num_blocks)


def block_address(tag, index, geo):
    """Reconstruct the byte address held in cache slot ``index`` under ``tag``."""
    return (tag * geo.num_blocks + index) * BLOCK_SIZE


@dataclass(frozen=True)
class CacheLineMeta:
    valid: bool = False
    dirty: bool = False
    tag: int = 0

    def __post_init__(self):
        if self.dirty and not self.valid:
            raise ValueError("a dirty line must be valid")


class TagStore:
    """Direct-mapped tag/valid/dirty array.

    Stored as two flat lists for speed: ``tags[i] == -1`` marks an invalid
    slot.
    """

    def __init__(self, geo):
        self.geo = geo
        n = geo.num_blocks
        self.tags = [-1] * n
        self.dirty = bytearray(n)

    def meta(self, index):
        tag = self.tags[index]
        if tag < 0:
            return CacheLineMeta()
        return CacheLineMeta(True, bool(self.dirty[index]), tag)

    def set(self, index, tag, dirty):
        self.tags[index] = tag
        self.dirty[index] = 1 if dirty else 0

    def access(self, addr, is_read):
        """Functional access with insert-on-miss, write-back semantics.

        Returns ``(hit, victim_dirty)``; used for warm-up and oracles.
        """
        n = self.geo.num_blocks
        blk = addr // BLOCK_SIZE
        index = blk % n
        tag = blk // n
        cur = self.tags[index]
        if cur == tag:
            if not is_read:
                self.dirty[index] = 1
            return True, False
        victim_dirty = cur >= 0 and self.dirty[index] == 1
        self.tags[index] = tag
        self.dirty[index] = 0 if is_read else 1
        return False, victim_dirty

    def replay(self, blocks, is_read):
        """Apply a whole access sequence at once; same end state as ``access``.

        ``blocks`` are block numbers (address // 64) and ``is_read`` a
        parallel boolean array.  Each slot ends up holding the tag of its
        last access; it is dirty if a write hit that tag after it was last
        brought in (or if the line was already dirty and never replaced).
        """
        blocks = np.asarray(blocks, dtype=np.int64)
        m = blocks.size
        if m == 0:
            return
        writes = ~np.asarray(is_read, dtype=bool)
        n = self.geo.num_blocks
        slot = blocks % n
        tag = blocks // n
        order = np.lexsort((np.arange(m), slot))
        s, t, w = slot[order], tag[order], writes[order]
        new_group = np.ones(m, dtype=bool)
        new_group[1:] = s[1:] != s[:-1]
        new_run = new_group.copy()
        new_run[1:] |= t[1:] != t[:-1]
        run_id = np.cumsum(new_run) - 1
        last = np.ones(m, dtype=bool)
        last[:-1] = new_group[1:]
        last_idx = np.flatnonzero(last)
        final_run = run_id[last_idx]
        run_dirty = np.bincount(run_id, weights=w) > 0
        slots = s[last_idx]
        tags = t[last_idx]
        dirty = run_dirty[final_run]
        single_run = run_id[np.flatnonzero(new_group)] == final_run
        old_tags = np.array(self.tags, dtype=np.int64)
        old_dirty = np.frombuffer(bytes(self.dirty), dtype=np.uint8).astype(bool)
        dirty |= single_run & (old_tags[slots] == tags) & old_dirty[slots]
        old_tags[slots] = tags
        old_dirty[slots] = dirty
        self.tags[:] = old_tags.tolist()
        self.dirty[:] = old_dirty.astype(np.uint8).tobytes()

    def valid_count(self):
        return sum(1 for t in self.tags if t >= 0)
