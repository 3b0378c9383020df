"""Deterministic discrete-event engine.

Time is an integer count of picoseconds.  Events are ordered by
``(when, seq)`` where ``seq`` is the insertion ordinal, so events that
share a tick are dispatched first-in first-out.
"""

import heapq

TICKS_PER_NS = 1000
TICKS_PER_US = 1000 * TICKS_PER_NS
TICKS_PER_MS = 1000 * TICKS_PER_US
TICKS_PER_S = 1000 * TICKS_PER_MS


def ns(value):
    """Convert nanoseconds to ticks, rounding to the nearest picosecond."""
    return int(round(value * TICKS_PER_NS))


def us(value):
    return int(round(value * TICKS_PER_US))


class SimulationError(RuntimeError):
    """A model invariant was violated; the run cannot continue."""


class Simulator:
    """Event queue plus simulation clock.

    Actions are plain callables invoked with a single argument.  The queue
    stores ``(when, seq, action, arg)`` tuples; ``seq`` makes the order total.
    """

    def __init__(self):
        self._queue = []
        self._seq = 0
        self.now = 0
        self.dispatched = 0

    def __len__(self):
        return len(self._queue)

    def schedule(self, when, action, arg=None):
        if when < self.now:
            raise SimulationError(
                "event %r scheduled in the past (when=%d, now=%d)"
                % (getattr(action, "__name__", action), when, self.now))
        seq = self._seq
        self._seq = seq + 1
        heapq.heappush(self._queue, (when, seq, action, arg))
        return seq

    def peek(self):
        """Tick of the next pending event, or None."""
        return self._queue[0][0] if self._queue else None

    def run_until(self, limit, trace=None):
        """Dispatch every event with ``when <= limit``; return the final clock.

        The clock ends at ``limit`` even if the queue empties earlier.  When
        ``trace`` is a list, ``(when, seq)`` of each dispatched event is
        appended to it.
        """
        queue = self._queue
        pop = heapq.heappop
        while queue and queue[0][0] <= limit:
            when, seq, action, arg = pop(queue)
            self.now = when
            if trace is not None:
                trace.append((when, seq))
            action(arg)
            self.dispatched += 1
        if limit > self.now:
            self.now = limit
        return self.now

    def run(self, trace=None):
        """Dispatch until the queue is empty; return the final clock."""
        queue = self._queue
        pop = heapq.heappop
        while queue:
            when, seq, action, arg = pop(queue)
            self.now = when
            if trace is not None:
                trace.append((when, seq))
            action(arg)
            self.dispatched += 1
        return self.now
