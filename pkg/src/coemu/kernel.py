"""Emulation kernel: drives the DUT clock against a modeled host.

Host time advances in ticks; DUT time advances in cycles.  Each tick the
host makes one unit of progress on its own work (draining FIFOs, servicing
timing requests, answering bridged MMIO), then the kernel decides whether
the DUT clock may advance.  A cycle runs only when

* every FIFO the DUT might push this cycle has worst-case headroom,
* no hardware timer has reached its due point with the host still behind,
* no pause is active and the step budget is not exhausted.

Otherwise the clock is gated and the tick is charged to exactly one reason.
Gating is what keeps the DUT deterministic: its cycle-by-cycle behavior is
a function of the program and the timing parameters alone, never of how
fast the host happens to be.  The invariance tests lean on that hard.

The conservative headroom rule (reserve the worst case every cycle, not
the actual push) costs throughput when FIFOs are shallow but needs no
lookahead into the DUT; with deep FIFOs the reservation is free and the
slowdown converges to max(1, drain_cost / push_interval).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
import random

from .pshell import CTRL_STATUS_GATED, CTRL_STATUS_HALTED, CTRL_STATUS_PAUSED
from .timing import HardwareTimer, TimingLog
from .transport import DirectTransport

B_BACKPRESSURE = 1
B_TIMER = 2
B_PAUSE = 4
B_STEP = 8

GATE_KEYS = ("backpressure", "timer_wait", "host_pause", "step_exhausted")


class WatchdogError(RuntimeError):
    pass


@dataclass
class HostCostModel:
    """Host-side cost, in ticks, of each kind of work.  One unit runs at a
    time; starting a unit consumes its first tick."""

    ticks_per_char: int = 1
    ticks_per_commit: int = 1
    ticks_per_sample: int = 5
    ticks_per_io: int = 2
    data_delay: int = 0        # extra ticks to fetch miss data after service
    ticks_idle: int = 1        # host ticks per ungated DUT cycle
    jitter_max: int = 0        # uniform extra cost in [0, jitter_max] per unit
    jitter_seed: int = 0

    def validate(self):
        for name in ("ticks_per_char", "ticks_per_commit", "ticks_per_sample",
                     "ticks_per_io", "ticks_idle"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.data_delay < 0 or self.jitter_max < 0:
            raise ValueError("delays must be >= 0")


@dataclass
class RunSummary:
    dut_cycles: int
    host_ticks: int
    gated: dict

    def to_dict(self) -> dict:
        return {"dut_cycles": self.dut_cycles, "host_ticks": self.host_ticks,
                "gated": dict(self.gated)}

    @property
    def slowdown(self) -> float:
        return self.host_ticks / self.dut_cycles if self.dut_cycles else 0.0


@dataclass
class DrainedStreams:
    chars: bytearray = field(default_factory=bytearray)
    commit_words: list = field(default_factory=list)
    sample_words: list = field(default_factory=list)


class Kernel:
    """Owns the tick loop.  Wires together a shell, a DUT model, an optional
    DRAM timing model, stdin replay, and an optional lockstep checker."""

    def __init__(self, shell, dut, cost: HostCostModel | None = None, *,
                 dram=None, stdin_script: bytes = b"", stdin_period: int = 0,
                 char_fifo: int | None = 0, commit_fifo: int | None = 1,
                 sample_fifo: int | None = 2, stdin_fifo: int = 0,
                 stdin_status_csr: int = 0, lockstep=None,
                 collect_trace: bool = False, trace_timing: bool = False,
                 watchdog_gate_ticks: int = 1_000_000, transport=None):
        self.shell = shell
        self.dut = dut
        if transport is None:
            transport = DirectTransport(shell)
        self.transport = transport
        self.cost = cost or HostCostModel()
        self.cost.validate()
        self.dram = dram
        self.lockstep = lockstep
        self.divergence = None

        self.char_fifo = char_fifo
        self.commit_fifo = commit_fifo
        self.sample_fifo = sample_fifo
        self.stdin_fifo = stdin_fifo
        self.stdin_status_csr = stdin_status_csr
        self._check_depths()

        self.stdin_script = bytes(stdin_script)
        self.stdin_period = stdin_period
        self._stdin_idx = 0
        self._stdin_eof_sent = False
        self._stdin_done = False
        self._needs_cache: dict = {}
        self._ctrl = getattr(shell, "control", None)
        d2h = shell.fifos_d2h
        self._char_f = d2h[char_fifo] if char_fifo is not None else None
        self._commit_f = d2h[commit_fifo] if commit_fifo is not None else None
        self._sample_f = d2h[sample_fifo] if sample_fifo is not None else None
        self._char_port = (shell.address_of("d2h", char_fifo)
                           if char_fifo is not None else None)
        self._commit_port = (shell.address_of("d2h", commit_fifo)
                             if commit_fifo is not None else None)
        self._sample_port = (shell.address_of("d2h", sample_fifo)
                             if sample_fifo is not None else None)

        self.dut_cycle = 0
        self.host_tick = 0
        self.gated = {k: 0 for k in GATE_KEYS}
        self.stall_counts = {}
        self.trace = [] if collect_trace else None
        self.collect_trace = collect_trace
        self.timing_log = TimingLog() if trace_timing else None

        self._unit = None                  # (kind, remaining, payload)
        self._io_queue = deque()           # requests awaiting timing service
        self._data_queue = deque()         # timers awaiting their data fetch
        self.mailbox = deque()             # bridged MMIO: (op, addr, data, reply)
        self.active_timer = None
        self._rng = random.Random(self.cost.jitter_seed) if self.cost.jitter_max else None

        self._paused = False
        self._stepping = False
        self._step_budget = 0
        self._idle_debt = 0
        self._gate_streak = 0
        self.watchdog_gate_ticks = watchdog_gate_ticks
        self.drained = DrainedStreams()

        ctrl = getattr(shell, "control", None)
        if ctrl is not None:
            ctrl.on_mode = self._on_mode_write
            ctrl.on_step = self._on_step_write

    def _check_depths(self):
        if self.commit_fifo is not None and getattr(self.dut.cfg, "emit_commits", False):
            if self.shell.config.depth_of("d2h", self.commit_fifo) < 4:
                raise ValueError("commit FIFO depth must be >= 4 (one full record)")
        if self.sample_fifo is not None and getattr(self.dut.cfg, "sample_interval", 0):
            if self.shell.config.depth_of("d2h", self.sample_fifo) < 2:
                raise ValueError("sample FIFO depth must be >= 2 (one full sample)")

    # --------------------------------------------------------------- control

    def pause(self):
        self._paused = True
        self._stepping = False

    def step_n(self, n: int):
        self._paused = False
        self._stepping = True
        self._step_budget = max(0, n)

    def resume(self):
        self._paused = False
        self._stepping = False

    def _on_mode_write(self, value: int):
        if value & 1:
            self.resume()
        else:
            self.pause()

    def _on_step_write(self, value: int):
        self.step_n(value)

    # --------------------------------------------------------------- host work

    def _jitter(self) -> int:
        return self._rng.randint(0, self.cost.jitter_max) if self._rng else 0

    def _start_unit(self):
        """Pick the next host work unit, highest priority first: drain the
        outbound FIFOs in role order, then timing service, then the miss
        data fetch, then one bridged MMIO request."""
        c = self.cost
        f = self._char_f
        if f is not None and f.occupancy >= 1:
            return ["char", c.ticks_per_char + self._jitter(), None]
        f = self._commit_f
        if f is not None and f.occupancy >= 4:
            return ["commit", c.ticks_per_commit + self._jitter(), None]
        f = self._sample_f
        if f is not None and f.occupancy >= 2:
            return ["sample", c.ticks_per_sample + self._jitter(), None]
        if self._io_queue:
            return ["io", c.ticks_per_io + self._jitter(), self._io_queue.popleft()]
        if self._data_queue:
            return ["data", max(1, c.data_delay + self._jitter()), self._data_queue.popleft()]
        if self.mailbox:
            return ["mmio", 1 + self._jitter(), self.mailbox.popleft()]
        return None

    def _complete_unit(self, kind, payload):
        tr = self.transport
        if kind == "char":
            w = tr.read32(self._char_port)
            self.drained.chars.append(w & 0xFF)
        elif kind == "commit":
            port = self._commit_port
            rec = tuple(tr.read32(port) for _ in range(4))
            self.drained.commit_words.extend(rec)
            if self.lockstep is not None and self.divergence is None:
                d = self.lockstep.feed_record(rec)
                if d is not None:
                    self.divergence = d
        elif kind == "sample":
            port = self._sample_port
            self.drained.sample_words.append(tr.read32(port))
            self.drained.sample_words.append(tr.read32(port))
        elif kind == "io":
            req = payload
            if self.dram is None:
                raise RuntimeError("DUT issued a memory request but no DRAM model is attached")
            latency = self.dram.service(req)
            if self.timing_log is not None:
                self.timing_log.record(req, latency)
            if req.kind == "mem-read":
                t = self.active_timer
                assert t is not None and t.request.req_id == req.req_id
                t.program(latency)
                if self.cost.data_delay == 0:
                    t.mark_data_ready()
                else:
                    self._data_queue.append(t)
            # Posted writes only touch bank state.
        elif kind == "data":
            payload.mark_data_ready()
        elif kind == "mmio":
            op, addr, data, reply = payload
            if op == "write":
                self.shell.mmio_write(addr, data)
                if reply is not None:
                    reply(None)
            else:
                value = self.shell.mmio_read(addr)
                if reply is not None:
                    reply(value)

    def _host_work_tick(self):
        if self._unit is None:
            self._unit = self._start_unit()
        if self._unit is not None:
            self._unit[1] -= 1
            if self._unit[1] <= 0:
                kind, _, payload = self._unit
                self._unit = None
                self._complete_unit(kind, payload)

    # --------------------------------------------------------------- stdin

    def _stdin_topup(self):
        """Feed arrived script bytes into the inbound FIFO.  Arrival is a
        function of the DUT cycle about to run, so replay is exact for any
        host speed.  Byte i arrives at cycle (i+1)*period; period 0 means
        everything is available up front."""
        if self._stdin_done:
            return
        script = self.stdin_script
        n = len(script)
        if self._stdin_idx < n:
            fifo = self.shell.fifos_h2d[self.stdin_fifo]
            port = self.shell.address_of("h2d", self.stdin_fifo)
            nxt = self.dut_cycle + 1
            p = self.stdin_period
            while self._stdin_idx < n and fifo.credits > 0:
                if p and (self._stdin_idx + 1) * p > nxt:
                    break
                self.transport.write32(port, script[self._stdin_idx])
                self._stdin_idx += 1
        if self._stdin_idx >= n and not self._stdin_eof_sent:
            self._stdin_eof_sent = True
            v = self.shell.csrs_out[self.stdin_status_csr] | 1
            self.transport.write32(
                self.shell.address_of("csr_out", self.stdin_status_csr), v)
            self._stdin_done = True

    # --------------------------------------------------------------- gating

    def _gate_reasons(self) -> int:
        r = 0
        hn = self.dut.headroom_needed()
        # Aggregate per-FIFO demand once per distinct tuple; a DUT returns
        # interned tuples so this cache stays tiny.
        try:
            needs = self._needs_cache[hn]
        except KeyError:
            agg: dict[int, int] = {}
            for f, n in hn:
                agg[f] = agg.get(f, 0) + n
            needs = self._needs_cache[hn] = tuple(agg.items())
        except TypeError:
            agg = {}
            for f, n in hn:
                agg[f] = agg.get(f, 0) + n
            needs = tuple(agg.items())
        fifos = self.shell.fifos_d2h
        for f, n in needs:
            if fifos[f].credits < n:
                r |= B_BACKPRESSURE
                break
        t = self.active_timer
        if t is not None:
            base = self.dram.params.base_latency if self.dram is not None else 1
            if t.verdict(base) == "gate":
                r |= B_TIMER
        if self._paused:
            r |= B_PAUSE
        elif self._stepping and self._step_budget <= 0:
            r |= B_STEP
        return r

    @staticmethod
    def _gate_key(reasons: int) -> str:
        if reasons & B_BACKPRESSURE:
            return "backpressure"
        if reasons & B_TIMER:
            return "timer_wait"
        if reasons & B_PAUSE:
            return "host_pause"
        return "step_exhausted"

    # --------------------------------------------------------------- the loop

    def _tick(self) -> bool:
        """One host tick.  Returns True when a DUT cycle ran."""
        self.host_tick += 1
        self.shell.host_tick = self.host_tick
        self._host_work_tick()
        self._stdin_topup()

        ran = False
        if self._idle_debt > 0:
            self._idle_debt -= 1
        else:
            reasons = self._gate_reasons()
            if reasons:
                self.gated[self._gate_key(reasons)] += 1
                if reasons & (B_BACKPRESSURE | B_TIMER):
                    self._gate_streak += 1
                    if self._gate_streak > self.watchdog_gate_ticks:
                        raise WatchdogError(
                            f"no DUT progress in {self._gate_streak} gated ticks "
                            f"at cycle {self.dut_cycle}")
            else:
                self._gate_streak = 0
                t = self.active_timer
                if t is not None and not t.delivered:
                    t.step()
                    if t.programmed and t.data_ready and t.elapsed >= t.latency:
                        t.deliver()
                        self.dut.complete_mem(t.request.req_id)
                        self.active_timer = None
                self.dut_cycle += 1
                out = self.dut.step(self.dut_cycle)
                ran = True
                self._idle_debt = self.cost.ticks_idle - 1
                ev = out.event
                self.stall_counts[ev] = self.stall_counts.get(ev, 0) + 1
                if self.trace is not None:
                    self.trace.append((self.dut_cycle, ev, out.event_pc))
                if out.mem_req is not None:
                    req = out.mem_req
                    if req.kind == "mem-read":
                        assert self.active_timer is None, "read port supports one miss"
                        self.active_timer = HardwareTimer(req)
                    self._io_queue.append(req)
                if self._stepping and self._step_budget > 0:
                    self._step_budget -= 1

        ctrl = self._ctrl
        if ctrl is not None:
            ctrl.dut_cycle = self.dut_cycle
            ctrl.host_tick = self.host_tick
            status = 0
            if self.dut.halted:
                status |= CTRL_STATUS_HALTED
            if not ran:
                status |= CTRL_STATUS_GATED
            if self._paused:
                status |= CTRL_STATUS_PAUSED
            ctrl.status = status
        return ran

    def run_until(self, *, cycles: int | None = None, halted: bool = False,
                  max_ticks: int | None = None, predicate=None) -> RunSummary:
        """Advance until a stop condition.  `cycles` counts from now;
        `halted` runs to DUT halt; `predicate(kernel)` is checked between
        ticks.  Always stops on halt or lockstep divergence."""
        target = self.dut_cycle + cycles if cycles is not None else None
        tick0 = self.host_tick
        while True:
            if self.dut.halted or self.divergence is not None:
                break
            if target is not None and self.dut_cycle >= target:
                break
            if predicate is not None and predicate(self):
                break
            if max_ticks is not None and self.host_tick - tick0 >= max_ticks:
                break
            self._tick()
        return self.summary()

    def summary(self) -> RunSummary:
        return RunSummary(self.dut_cycle, self.host_tick, dict(self.gated))

    # --------------------------------------------------------------- queries

    @property
    def exit_code(self) -> int:
        return getattr(self.dut, "exit_code", 0)

    def drain_remaining(self):
        """Pop everything still sitting in the outbound FIFOs, at zero host
        cost.  Used after a run ends so checkers and reports see the tail."""
        sh = self.shell
        tr = self.transport
        if self.char_fifo is not None:
            f = sh.fifos_d2h[self.char_fifo]
            port = sh.address_of("d2h", self.char_fifo)
            while f.occupancy:
                self.drained.chars.append(tr.read32(port) & 0xFF)
        if self.commit_fifo is not None:
            f = sh.fifos_d2h[self.commit_fifo]
            port = sh.address_of("d2h", self.commit_fifo)
            while f.occupancy >= 4:
                rec = tuple(tr.read32(port) for _ in range(4))
                self.drained.commit_words.extend(rec)
                if self.lockstep is not None and self.divergence is None:
                    d = self.lockstep.feed_record(rec)
                    if d is not None:
                        self.divergence = d
        if self.sample_fifo is not None:
            f = sh.fifos_d2h[self.sample_fifo]
            port = sh.address_of("d2h", self.sample_fifo)
            while f.occupancy >= 2:
                self.drained.sample_words.append(tr.read32(port))
                self.drained.sample_words.append(tr.read32(port))

    def finish_lockstep(self):
        """Close out the lockstep stream after draining; reports truncation
        if either side still has records."""
        if self.lockstep is not None and self.divergence is None:
            d = self.lockstep.finish(dut_halted=self.dut.halted)
            if d is not None:
                self.divergence = d
        return self.divergence
