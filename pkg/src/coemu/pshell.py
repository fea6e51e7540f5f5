"""MMIO shell: CSR banks, semi-blocking FIFOs, and the control block.

The shell is the only surface a host ever touches.  Its address map is fixed:

    BASE = 0x4000_0000
    BASE + 0x0000 + 4*i     output CSR i   (host writes, DUT reads)
    BASE + 0x1000 + 4*i     input CSR i    (DUT writes, host reads)
    BASE + 0x2000 + 0x10*i  host-to-DUT FIFO i data port (+4: credits)
    BASE + 0x3000 + 0x10*i  DUT-to-host FIFO i data port (+4: occupancy)
    BASE + 0x4000           control block (run/step/status/cycle counters)

Host-side MMIO is never allowed to block: a write with no credit is dropped,
a read from an empty FIFO returns the 0xFFFFFFFF sentinel, and every such
event lands in a sticky violation log instead of halting anything.  The
DUT-side FIFO ports are the blocking half: would-block there is a normal
outcome the pipeline retries.
"""

from __future__ import annotations

from dataclasses import dataclass
from collections import deque

BASE = 0x4000_0000
REGION_SIZE = 0x1000
OFF_CSR_OUT = 0x0000
OFF_CSR_IN = 0x1000
OFF_FIFO_H2D = 0x2000
OFF_FIFO_D2H = 0x3000
OFF_CONTROL = 0x4000
FIFO_STRIDE = 0x10
SENTINEL = 0xFFFFFFFF

# Control block register offsets, relative to BASE + OFF_CONTROL.
CTRL_MODE = 0x00      # write 1 = run, 0 = pause
CTRL_STEP = 0x04      # write n = grant a budget of n DUT cycles
CTRL_STATUS = 0x08    # bit0 halted, bit1 gated, bit2 paused
CTRL_STATUS_HALTED = 1 << 0
CTRL_STATUS_GATED = 1 << 1
CTRL_STATUS_PAUSED = 1 << 2
CTRL_CYCLE_LO = 0x0C
CTRL_CYCLE_HI = 0x10
CTRL_TICK_LO = 0x14
CTRL_TICK_HI = 0x18
CTRL_VIOL_COUNT = 0x1C

VIOLATION_KINDS = ("write-no-credit", "read-empty", "unmapped-address", "reserved-op")


@dataclass(frozen=True)
class MmioViolation:
    tick: int
    kind: str
    address: int

    def line(self) -> str:
        return f"tick={self.tick} kind={self.kind} addr=0x{self.address:08X}"


@dataclass
class PShellConfig:
    num_csrs_out: int = 4
    num_csrs_in: int = 4
    num_fifos_h2d: int = 1
    num_fifos_d2h: int = 3
    fifo_depth: int = 16
    # Optional per-FIFO depth overrides, keyed by ("h2d"|"d2h", index).
    depth_overrides: dict | None = None

    def depth_of(self, side: str, index: int) -> int:
        if self.depth_overrides:
            return self.depth_overrides.get((side, index), self.fifo_depth)
        return self.fifo_depth

    def validate(self) -> None:
        if not (0 < self.num_csrs_out * 4 <= REGION_SIZE):
            raise ValueError(f"output CSR bank ({self.num_csrs_out} regs) overflows its 0x1000 region")
        if not (0 < self.num_csrs_in * 4 <= REGION_SIZE):
            raise ValueError(f"input CSR bank ({self.num_csrs_in} regs) overflows its 0x1000 region")
        if not (0 < self.num_fifos_h2d * FIFO_STRIDE <= REGION_SIZE):
            raise ValueError("h2d FIFO bank overflows its 0x1000 region")
        if not (0 < self.num_fifos_d2h * FIFO_STRIDE <= REGION_SIZE):
            raise ValueError("d2h FIFO bank overflows its 0x1000 region")
        for side in ("h2d", "d2h"):
            count = self.num_fifos_h2d if side == "h2d" else self.num_fifos_d2h
            for i in range(count):
                depth = self.depth_of(side, i)
                if depth < 2 or depth & (depth - 1):
                    raise ValueError(f"{side} FIFO {i}: depth {depth} must be a power of two >= 2")


class SbFifo:
    """Semi-blocking FIFO: blocking ready/valid toward the DUT, credit
    counting toward the host.  Conservation (credits + occupancy == depth)
    holds at every quiescent point by construction."""

    __slots__ = ("index", "side", "depth", "_q", "pushes_accepted", "pushes_dropped", "pops_empty")

    def __init__(self, side: str, index: int, depth: int):
        self.side = side
        self.index = index
        self.depth = depth
        self._q: deque[int] = deque()
        self.pushes_accepted = 0
        self.pushes_dropped = 0
        self.pops_empty = 0

    @property
    def occupancy(self) -> int:
        return len(self._q)

    @property
    def credits(self) -> int:
        return self.depth - len(self._q)

    def push(self, word: int) -> bool:
        if len(self._q) >= self.depth:
            self.pushes_dropped += 1
            return False
        self._q.append(word & 0xFFFFFFFF)
        self.pushes_accepted += 1
        return True

    def pop(self):
        if not self._q:
            self.pops_empty += 1
            return None
        return self._q.popleft()

    def peek(self):
        return self._q[0] if self._q else None

    def snapshot(self) -> dict:
        return {
            "side": self.side,
            "index": self.index,
            "depth": self.depth,
            "occupancy": self.occupancy,
            "credits": self.credits,
            "contents": list(self._q),
        }


class ControlBlock:
    """Run-control registers.  The kernel installs command callbacks and
    refreshes the status words; a shell without a kernel still maps the
    region and simply stores whatever is written."""

    __slots__ = ("mode", "step_grant", "status", "dut_cycle", "host_tick", "on_mode", "on_step")

    def __init__(self):
        self.mode = 0
        self.step_grant = 0
        self.status = 0
        self.dut_cycle = 0
        self.host_tick = 0
        self.on_mode = None
        self.on_step = None

    def write(self, offset: int, value: int) -> bool:
        if offset == CTRL_MODE:
            self.mode = value & 1
            if self.on_mode:
                self.on_mode(self.mode)
            return True
        if offset == CTRL_STEP:
            self.step_grant = value
            if self.on_step:
                self.on_step(value)
            return True
        return False

    def read(self, offset: int):
        if offset == CTRL_MODE:
            return self.mode
        if offset == CTRL_STEP:
            return self.step_grant
        if offset == CTRL_STATUS:
            return self.status
        if offset == CTRL_CYCLE_LO:
            return self.dut_cycle & 0xFFFFFFFF
        if offset == CTRL_CYCLE_HI:
            return (self.dut_cycle >> 32) & 0xFFFFFFFF
        if offset == CTRL_TICK_LO:
            return self.host_tick & 0xFFFFFFFF
        if offset == CTRL_TICK_HI:
            return (self.host_tick >> 32) & 0xFFFFFFFF
        return None  # CTRL_VIOL_COUNT is answered by the shell itself


class PShell:
    def __init__(self, config: PShellConfig | None = None):
        self.config = config or PShellConfig()
        self.config.validate()
        self.csrs_out = [0] * self.config.num_csrs_out
        self.csrs_in = [0] * self.config.num_csrs_in
        self.fifos_h2d = [SbFifo("h2d", i, self.config.depth_of("h2d", i))
                          for i in range(self.config.num_fifos_h2d)]
        self.fifos_d2h = [SbFifo("d2h", i, self.config.depth_of("d2h", i))
                          for i in range(self.config.num_fifos_d2h)]
        self.control = ControlBlock()
        self.violations: list[MmioViolation] = []
        self.host_tick = 0

    # ---------------------------------------------------------------- host side

    def _violate(self, kind: str, addr: int) -> None:
        self.violations.append(MmioViolation(self.host_tick, kind, addr & 0xFFFFFFFF))

    def mmio_write(self, addr: int, data: int) -> bool:
        """Apply a host write.  Returns True if it took effect; a False
        return always leaves a violation log entry behind."""
        data &= 0xFFFFFFFF
        kind, idx, off = self._decode(addr)
        if kind == "bad":
            self._violate("unmapped-address", addr)
            return False
        if kind == "csr_out":
            self.csrs_out[idx] = data
            return True
        if kind == "h2d_data":
            if self.fifos_h2d[idx].push(data):
                return True
            self._violate("write-no-credit", addr)
            return False
        if kind == "control":
            if self.control.write(off, data):
                return True
            self._violate("reserved-op", addr)
            return False
        # Input CSRs, credit/occupancy ports and d2h data are not host-writable.
        self._violate("reserved-op", addr)
        return False

    def mmio_read(self, addr: int) -> int:
        kind, idx, off = self._decode(addr)
        if kind == "bad":
            self._violate("unmapped-address", addr)
            return SENTINEL
        if kind == "csr_out":
            return self.csrs_out[idx]
        if kind == "csr_in":
            return self.csrs_in[idx]
        if kind == "h2d_credits":
            return self.fifos_h2d[idx].credits
        if kind == "d2h_occupancy":
            return self.fifos_d2h[idx].occupancy
        if kind == "d2h_data":
            word = self.fifos_d2h[idx].pop()
            if word is None:
                self._violate("read-empty", addr)
                return SENTINEL
            return word
        if kind == "control":
            if off == CTRL_VIOL_COUNT:
                return len(self.violations) & 0xFFFFFFFF
            value = self.control.read(off)
            if value is None:
                self._violate("reserved-op", addr)
                return SENTINEL
            return value & 0xFFFFFFFF
        # h2d data port read: popping the DUT's inbox from the host side
        # is not a defined operation.
        self._violate("reserved-op", addr)
        return SENTINEL

    def _decode(self, addr: int):
        if addr & 3 or not (BASE <= addr < BASE + OFF_CONTROL + REGION_SIZE):
            return "bad", 0, 0
        off = addr - BASE
        region, off = off >> 12, off & 0xFFF
        if region == 0:
            idx = off >> 2
            return ("csr_out", idx, off) if idx < len(self.csrs_out) else ("bad", 0, 0)
        if region == 1:
            idx = off >> 2
            return ("csr_in", idx, off) if idx < len(self.csrs_in) else ("bad", 0, 0)
        if region == 2:
            idx, port = off >> 4, off & 0xF
            if idx >= len(self.fifos_h2d) or port > 4:
                return "bad", 0, 0
            return ("h2d_data" if port == 0 else "h2d_credits", idx, off)
        if region == 3:
            idx, port = off >> 4, off & 0xF
            if idx >= len(self.fifos_d2h) or port > 4:
                return "bad", 0, 0
            return ("d2h_data" if port == 0 else "d2h_occupancy", idx, off)
        if region == 4 and off <= CTRL_VIOL_COUNT:
            return "control", 0, off
        return "bad", 0, 0

    # ---------------------------------------------------------------- DUT side

    def dut_fifo_push(self, index: int, word: int) -> bool:
        """Push one word toward the host; False means would-block."""
        fifo = self.fifos_d2h[index]
        if fifo.credits == 0:
            return False
        fifo.push(word)
        return True

    def dut_fifo_pop(self, index: int):
        """Pop one host-supplied word; None means would-block."""
        return self.fifos_h2d[index].pop()

    def dut_csr_read(self, index: int) -> int:
        return self.csrs_out[index]

    def dut_csr_write(self, index: int, value: int) -> None:
        self.csrs_in[index] = value & 0xFFFFFFFF

    # ---------------------------------------------------------------- reporting

    def violation_lines(self) -> list[str]:
        return [v.line() for v in self.violations]

    def address_of(self, kind: str, index: int = 0, port: int = 0) -> int:
        """Compute the mapped address of a shell resource; the inverse of the
        decoder, handy for drivers and tests."""
        if kind == "csr_out":
            return BASE + OFF_CSR_OUT + 4 * index
        if kind == "csr_in":
            return BASE + OFF_CSR_IN + 4 * index
        if kind == "h2d":
            return BASE + OFF_FIFO_H2D + FIFO_STRIDE * index + port
        if kind == "d2h":
            return BASE + OFF_FIFO_D2H + FIFO_STRIDE * index + port
        if kind == "control":
            return BASE + OFF_CONTROL + port
        raise ValueError(f"unknown resource kind {kind!r}")
