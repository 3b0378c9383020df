"""Candidate queues and request-selection policies for the DRAM side."""

import heapq
from enum import Enum
from itertools import count


class Policy(Enum):
    FCFS = "fcfs"
    FRFCFS = "frfcfs"


class DramQueue:
    """Pending DRAM accesses indexed by age, bank, and (bank, row).

    Removal is lazy: every push stamps the entry with a fresh token and
    heap items whose token no longer matches are discarded when they reach
    the top.  ``entry.order`` is the age key; smaller is older.
    """

    def __init__(self, num_banks, tokens=None):
        self._all = []
        self._bank = [[] for _ in range(num_banks)]
        self._row = {}
        self.bank_count = [0] * num_banks
        self.active = set()
        self.count = 0
        # queues that trade entries must share one token source
        self._tokens = tokens if tokens is not None else count(1)

    def __len__(self):
        return self.count

    def push(self, entry):
        token = next(self._tokens)
        entry.qtoken = token
        item = (entry.order, token, entry)
        heapq.heappush(self._all, item)
        heapq.heappush(self._bank[entry.bank], item)
        key = (entry.bank, entry.row)
        heap = self._row.get(key)
        if heap is None:
            self._row[key] = [item]
        else:
            heapq.heappush(heap, item)
        self.bank_count[entry.bank] += 1
        self.active.add(entry.bank)
        self.count += 1
        if len(self._all) > 4 * self.count + 256:
            self._compact()

    def _compact(self):
        # stale items below the heap tops are never popped otherwise
        live = [item for item in self._all if item[2].qtoken == item[1]]
        heapq.heapify(live)
        self._all = live
        self._bank = [[] for _ in self._bank]
        self._row = {}
        for item in live:
            e = item[2]
            self._bank[e.bank].append(item)
            self._row.setdefault((e.bank, e.row), []).append(item)
        for heap in self._bank:
            heapq.heapify(heap)
        for heap in self._row.values():
            heapq.heapify(heap)

    def remove(self, entry):
        entry.qtoken = 0
        self.bank_count[entry.bank] -= 1
        if not self.bank_count[entry.bank]:
            self.active.discard(entry.bank)
        self.count -= 1

    @staticmethod
    def _top(heap):
        pop = heapq.heappop
        while heap:
            order, token, entry = heap[0]
            if entry.qtoken == token:
                return entry
            pop(heap)
        return None

    def oldest(self):
        return self._top(self._all)

    def oldest_in_bank(self, bank):
        return self._top(self._bank[bank])

    def oldest_in_row(self, bank, row):
        heap = self._row.get((bank, row))
        if heap is None:
            return None
        entry = self._top(heap)
        if entry is None:
            del self._row[(bank, row)]
        return entry

    def banks(self):
        return sorted(self.active)


def select(queue, policy, dram, now):
    """Pick the next access from ``queue``.

    FCFS takes the oldest entry.  FR-FCFS takes the oldest row hit; without
    one it takes the entry whose bank can issue its column command first,
    oldest on ties.
    """
    if policy is Policy.FCFS:
        return queue.oldest()
    top = DramQueue._top
    rows = queue._row
    dbanks = dram.banks
    best = None
    for b in queue.active:
        row = dbanks[b].open_row
        if row is None:
            continue
        heap = rows.get((b, row))
        if heap:
            e = top(heap)
            if e is not None and (best is None or e.order < best.order):
                best = e
    if best is not None:
        return best
    # No row hits, so every candidate needs an activate (and a precharge if
    # its bank has a row open); the bank state alone fixes the column time.
    t = dram.timing
    rcd, rp = t.tRCD, t.tRP
    best_t = None
    tied = []
    for b in queue.active:
        bs = dbanks[b]
        c = bs.pre_ready if bs.pre_ready > now else now
        c += rcd if bs.open_row is None else rcd + rp
        if best_t is None or c < best_t:
            best_t = c
            tied = [b]
        elif c == best_t:
            tied.append(b)
    bheaps = queue._bank
    for b in tied:
        e = top(bheaps[b])
        if best is None or e.order < best.order:
            best = e
    return best
