"""Tick-loop behavior: gating math, non-interference, stdin replay,
run control, and the watchdog."""
import pytest

from coemu import (DramModel, DramModelParams, HostCostModel, PipelineConfig,
                   PShellConfig)
from coemu.isa import STALL_NAMES
from coemu.kernel import GATE_KEYS, RunSummary, WatchdogError
from coemu.pshell import CTRL_STATUS, CTRL_STATUS_HALTED, CTRL_STATUS_PAUSED

from conftest import build

SLED = "_start:\n" + "\n".join(f"  addi x1, x0, {i & 7}" for i in range(900)) + "\n  ecall\n"

MISS = """
_start:
  lw t0, 0x100(x0)
  add t1, t0, t0
  ecall
.org 0x100
  .word 21
"""

ECHO = """
_start:
loop:
  li a7, 2
  ecall
  li t0, -1
  beq a0, t0, done
  li a7, 1
  ecall
  j loop
done:
  li a7, 3
  li a0, 0
  ecall
"""

SPAM = """
_start:
loop:
  li a7, 1
  li a0, 65
  ecall
  j loop
"""


def sled(interval, depth, tps):
    return build(SLED,
                 cfg=PipelineConfig(sample_interval=interval),
                 cost=HostCostModel(ticks_per_sample=tps),
                 shell_cfg=PShellConfig(depth_overrides={("d2h", 2): depth}))


def warm_slowdown(interval, depth, tps, total=600, warmup=200):
    _, _, k = sled(interval, depth, tps)
    k.run_until(cycles=warmup)
    t0, c0 = k.host_tick, k.dut_cycle
    k.run_until(cycles=total - warmup)
    return (k.host_tick - t0) / (k.dut_cycle - c0)


def test_shallow_sample_fifo_serializes_on_the_host():
    # depth 2 forces a drain (5 ticks) between samples: cycle N lands on
    # host tick 1 + 5(N - 1)
    _, _, k = sled(1, 2, 5)
    k.run_until(cycles=10)
    assert (k.dut_cycle, k.host_tick) == (10, 46)


def test_steady_slowdown_matches_sample_cost():
    _, _, k = sled(1, 2, 32)
    s = k.run_until(cycles=300)
    assert 31 <= s.slowdown <= 33


def test_sparse_sampling_divides_the_cost():
    assert abs(warm_slowdown(10, 2, 32) - 4.1) < 0.05


@pytest.mark.parametrize("interval,want", [(1, 32.0), (4, 8.0), (32, 1.0), (100, 1.0)])
def test_deep_fifo_slowdown_is_drain_rate_bound(interval, want):
    assert abs(warm_slowdown(interval, 64, 32) - want) < 0.05


def test_miss_timing_is_cycle_exact():
    _, dut, k = build(MISS, cfg=PipelineConfig(dmem_mode="dram"),
                      dram=DramModel(DramModelParams()), trace=True)
    k.run_until(halted=True, max_ticks=100_000)
    names = [STALL_NAMES[ev] for (_, ev, _) in k.trace]
    assert k.dut_cycle == 27
    assert names.count("dcache-miss") == 20
    assert dut.regs[6] == 42


def test_slow_host_io_gates_but_does_not_change_cycles():
    _, _, k1 = build(MISS, cfg=PipelineConfig(dmem_mode="dram"),
                     dram=DramModel(DramModelParams()), trace=True)
    k1.run_until(halted=True, max_ticks=100_000)
    _, _, k2 = build(MISS, cfg=PipelineConfig(dmem_mode="dram"),
                     dram=DramModel(DramModelParams()),
                     cost=HostCostModel(ticks_per_io=500, data_delay=300), trace=True)
    k2.run_until(halted=True, max_ticks=100_000)
    assert k2.dut_cycle == k1.dut_cycle == 27
    assert k2.trace == k1.trace
    assert k2.gated["timer_wait"] > 0
    assert k2.host_tick > k1.host_tick


def run_echo(period):
    _, dut, k = build(ECHO, cfg=PipelineConfig(emit_commits=True),
                      stdin=b"hi!", period=period, lockstep=True, trace=True)
    k.run_until(halted=True, max_ticks=200_000)
    k.drain_remaining()
    return dut, k, k.finish_lockstep()


def test_stdin_echo_and_eof_sentinel():
    dut, k, div = run_echo(0)
    assert bytes(k.drained.chars) == b"hi!"
    assert div is None
    assert dut.exit_code == 0 and k.exit_code == 0


def test_scheduled_stdin_stalls_but_echoes_the_same():
    dut, k, div = run_echo(50)
    waits = sum(1 for (_, ev, _) in k.trace if STALL_NAMES[ev] == "syscall-wait")
    assert bytes(k.drained.chars) == b"hi!"
    assert div is None and waits > 0


def test_stdin_arrival_does_not_change_commit_stream():
    _, k0, _ = run_echo(0)
    _, k1, _ = run_echo(50)
    assert k1.drained.commit_words == k0.drained.commit_words


def test_pause_and_resume_via_control_mmio():
    sh, _, k = sled(0, 16, 1)
    mode = sh.address_of("control")
    k.run_until(cycles=3)
    sh.mmio_write(mode, 0)
    s0 = k.run_until(cycles=10, max_ticks=40)
    assert k.dut_cycle == 3
    assert s0.gated["host_pause"] == 40
    assert sh.mmio_read(sh.address_of("control", port=CTRL_STATUS)) & CTRL_STATUS_PAUSED
    sh.mmio_write(mode, 1)
    k.run_until(cycles=5)
    assert k.dut_cycle == 8


def test_step_grant_runs_exactly_n_cycles():
    sh, _, k = sled(0, 16, 1)
    sh.mmio_write(sh.address_of("control"), 0)
    sh.mmio_write(sh.address_of("control", port=0x04), 7)
    k.run_until(cycles=100, max_ticks=60)
    assert k.dut_cycle == 7
    assert k.gated["step_exhausted"] > 0
    sh.mmio_write(sh.address_of("control", port=0x04), 2)
    k.run_until(cycles=100, max_ticks=60)
    assert k.dut_cycle == 9


def test_status_reports_halt():
    sh, dut, k = build("_start:\n  ecall\n")
    k.run_until(halted=True)
    assert dut.halted
    assert sh.mmio_read(sh.address_of("control", port=CTRL_STATUS)) & CTRL_STATUS_HALTED


def test_watchdog_fires_when_nothing_drains():
    _, _, k = build(SPAM, char_fifo=None, watchdog_gate_ticks=200)
    with pytest.raises(WatchdogError, match="no DUT progress"):
        k.run_until(halted=True, max_ticks=100_000)


def test_backpressure_outranks_pause_in_gate_accounting():
    _, _, k = build(SPAM, char_fifo=None)
    k.run_until(predicate=lambda kk: kk.gated["backpressure"] > 0,
                max_ticks=10_000)
    assert k.gated["backpressure"] > 0
    k.pause()
    before = dict(k.gated)
    k.run_until(max_ticks=10)
    assert k.gated["backpressure"] == before["backpressure"] + 10
    assert k.gated["host_pause"] == before["host_pause"]


def test_summary_round_trip():
    s = RunSummary(10, 45, {g: 0 for g in GATE_KEYS})
    d = s.to_dict()
    assert d["dut_cycles"] == 10 and d["host_ticks"] == 45
    assert set(d["gated"]) == set(GATE_KEYS)
    assert s.slowdown == 4.5
    assert RunSummary(0, 9, {}).slowdown == 0.0


def test_exit_code_propagates():
    _, _, k = build("_start:\n  li a7, 3\n  li a0, 70\n  ecall\n")
    k.run_until(halted=True)
    assert k.exit_code == 70


def test_cost_model_validation():
    with pytest.raises(ValueError):
        HostCostModel(ticks_per_char=0).validate()
    with pytest.raises(ValueError):
        HostCostModel(data_delay=-1).validate()
