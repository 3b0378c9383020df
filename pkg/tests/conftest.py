import pytest

from udcc_sim.channel import DataBus
from udcc_sim.controller import Controller, ControllerConfig
from udcc_sim.dram import DramInterface, preset as dram_preset
from udcc_sim.kernel import Simulator
from udcc_sim.memtypes import CacheGeometry, MemPacket, TagStore
from udcc_sim.nvm import NvmInterface, preset as nvm_preset
from udcc_sim.stats import Stats
from udcc_sim.system import AccessTrace

MB = 1 << 20


class Micro:
    """A hand-wired controller with a 16 MB cache and an access trace."""

    def __init__(self, lines=(), **cfg):
        self.sim = Simulator()
        self.stats = Stats()
        bus = DataBus("shared", self.stats.record_bus_busy)
        self.dram = DramInterface(dram_preset("ddr4"), bus)
        self.nvm = NvmInterface(self.sim, nvm_preset("base"), bus)
        self.tags = TagStore(CacheGeometry(16 * MB))
        for index, tag, dirty in lines:
            self.tags.set(index, tag, dirty)
        self.trace = AccessTrace()
        self.ctrl = Controller(self.sim, ControllerConfig(**cfg), self.dram, self.nvm,
                               self.stats, self.tags, self.trace)
        self.next_id = 0

    def packet(self, addr, is_read):
        pkt = MemPacket(self.next_id, addr, is_read, self.sim.now)
        self.next_id += 1
        return pkt

    def offer(self, addr, is_read):
        return self.ctrl.recv(self.packet(addr, is_read))

    def run(self):
        self.sim.run()
        return self.stats.finalize(self.sim.now, self.nvm.wear_events, self.ctrl.invariants())


@pytest.fixture
def micro():
    return Micro


def pytest_configure(config):
    config._verdicts = []


@pytest.fixture
def verdict(request, capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def emit(number, ok, detail):
        line = "criterion %2d: %s  %s" % (number, "PASS" if ok else "FAIL", detail)
        request.config._verdicts.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_verdicts", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
