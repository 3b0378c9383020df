"""Data-bus occupancy.

A :class:`DataBus` is a single transfer timeline.  Reservations are granted
in call order and never before the end of the previous one, which makes
bus exclusivity hold by construction; the stats recorder still checks it.
"""


class DataBus:

    def __init__(self, name="bus", recorder=None):
        self.name = name
        self.free_at = 0
        self.recorder = recorder

    def reserve(self, earliest, duration, device):
        start = earliest if earliest > self.free_at else self.free_at
        end = start + duration
        self.free_at = end
        if self.recorder is not None:
            self.recorder(device, start, end)
        return start
