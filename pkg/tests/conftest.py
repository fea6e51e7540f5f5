"""Shared builders for the suite."""
from __future__ import annotations

import random
from pathlib import Path

from coemu import (DramModel, DramModelParams, GoldenModel, HostCostModel, Kernel,
                   LockstepChecker, Pipeline, PipelineConfig, PShell, PShellConfig,
                   assemble)
from coemu.dut import CycleOut
from coemu.isa import EV_DCACHE_MISS, EV_FRONTEND_EMPTY
from coemu.timing import IoRequest

ROOT = Path(__file__).resolve().parent.parent
BENCH_DIR = ROOT / "bench"
CORPUS_DIR = Path(__file__).resolve().parent / "sv_corpus"
BAD_DIR = Path(__file__).resolve().parent / "sv_bad"

# name -> (source path, extra RunConfig keys)
BENCHES = (
    ("loaduse", BENCH_DIR / "loaduse.s", {}),
    ("chase", BENCH_DIR / "chase.s", {}),
    ("branchy", BENCH_DIR / "branchy.s", {}),
    ("stream", BENCH_DIR / "stream.s", {"dmem_mode": "dram"}),
    ("hello", BENCH_DIR / "hello.s", {}),
)


def build(src, *, cfg=None, cost=None, shell_cfg=None, dram=None, stdin=b"",
          period=0, lockstep=False, trace=False, **kernel_kw):
    """Assemble source text and wire a shell/pipeline/kernel triple."""
    entry, mem = assemble(src)
    cfg = cfg or PipelineConfig()
    if dram is None and cfg.dmem_mode == "dram":
        dram = DramModel(DramModelParams())
    shell = PShell(shell_cfg or PShellConfig())
    dut = Pipeline(entry, mem, shell, cfg)
    ls = LockstepChecker(GoldenModel(entry, mem, stdin)) if lockstep else None
    kernel = Kernel(shell, dut, cost or HostCostModel(), dram=dram,
                    stdin_script=stdin, stdin_period=period, lockstep=ls,
                    collect_trace=trace, **kernel_kw)
    return shell, dut, kernel


class _TrafficCfg:
    emit_commits = False
    sample_interval = 0
    coverage_enabled = False


class TrafficDut:
    """Minimal DUT that issues randomized one-outstanding reads with
    interleaved posted writes.  Exercises the timer path without the
    pipeline in the loop; the log keeps (kind, addr, issue, deliver)
    rows for an independent latency replay."""

    def __init__(self, seed, n_reads, gap_max=3):
        self.cfg = _TrafficCfg()
        self.halted = False
        self.rng = random.Random(seed)
        self.n_reads = n_reads
        self.gap_max = gap_max
        self.reads_done = 0
        self.outstanding = None
        self._delivered = False
        self._next_free = 1
        self._writes_left = 0
        self._next_id = 0
        self._last_read = None
        self.log = []

    def headroom_needed(self):
        return ()

    def complete_mem(self, req_id):
        assert self.outstanding is not None and self.outstanding.req_id == req_id
        self.outstanding = None
        self._delivered = True

    def _new_addr(self):
        # Cluster half the traffic on two lines to provoke bank-busy waits.
        if self.rng.random() < 0.5:
            return self.rng.choice((0x0000, 0x0040))
        return self.rng.randrange(0, 1 << 18) & ~3

    def step(self, cycle):
        if self._delivered:
            self._delivered = False
            self._last_read[3] = cycle
            self.reads_done += 1
            if self.reads_done >= self.n_reads:
                self.halted = True
                return CycleOut(EV_FRONTEND_EMPTY, 0, None, None, True)
            self._next_free = cycle + self.rng.randrange(0, self.gap_max + 1)
            self._writes_left = self.rng.randrange(0, 3)
        req = None
        if not self.halted and self.outstanding is None and cycle >= self._next_free:
            addr = self._new_addr()
            if self._writes_left > 0:
                self._writes_left -= 1
                req = IoRequest(self._next_id, "mem-write", addr, cycle)
                self.log.append(["write", addr, cycle, cycle])
            else:
                req = IoRequest(self._next_id, "mem-read", addr, cycle)
                self._last_read = ["read", addr, cycle, -1]
                self.log.append(self._last_read)
                self.outstanding = req
            self._next_id += 1
        ev = EV_DCACHE_MISS if self.outstanding is not None else EV_FRONTEND_EMPTY
        return CycleOut(ev, 0, None, req, self.halted)


def replay_dram_latencies(log, params=None):
    """Independent replay of the banked latency recurrence over a traffic
    log, in issue order.  Returns the programmed latency for every row
    (writes included, though nothing observes theirs)."""
    p = params or DramModelParams()
    shift = p.line_bytes.bit_length() - 1
    free = [0] * p.bank_count
    out = []
    for kind, addr, issue, _deliver in log:
        bank = (addr >> shift) & (p.bank_count - 1)
        wait = free[bank] - issue
        if wait < 0:
            wait = 0
        latency = max(1, p.base_latency + wait)
        free[bank] = issue + wait + p.bank_busy
        out.append(latency)
    return out


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    import sys
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None) if mod else None
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        name, status = results[n]
        terminalreporter.write_line(f"criterion {n} ({name}): {status}")
