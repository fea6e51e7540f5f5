"""Decode and aggregate the per-cycle profiling sample stream.

Each sample is two FIFO words: the low 32 bits of the cycle number,
then the attributed PC packed with the event class in the top nibble.
Every cycle whose number is a multiple of the sampling interval emits
one sample, so at interval 1 the stream is an exact cycle-by-cycle
account and the aggregate stack sums to the total cycle count.  At
wider intervals the stack is estimated by scaling sample counts by the
interval, which keeps the estimator unbiased: the per-class error is
bounded by interval times the number of contiguous runs of that class.
"""

from __future__ import annotations

import csv
import json
from collections import Counter, defaultdict
from dataclasses import dataclass

from .isa import MASK32, STALL_NAMES

SAMPLE_PC_MASK = 0x0FFFFFFF
SAMPLE_EVENT_SHIFT = 28


@dataclass(frozen=True)
class Sample:
    dut_cycle: int
    attributed_pc: int
    event: int

    @property
    def event_name(self) -> str:
        return STALL_NAMES[self.event]


def pack_sample(cycle: int, pc: int, event: int) -> tuple[int, int]:
    return cycle & MASK32, (pc & SAMPLE_PC_MASK) | (event << SAMPLE_EVENT_SHIFT)


def decode_samples(words) -> list[Sample]:
    """Turn a drained sample-word list back into Sample records."""
    if len(words) % 2:
        raise ValueError("sample stream has an odd word count: %d" % len(words))
    out = []
    for i in range(0, len(words), 2):
        cyc = words[i] & MASK32
        packed = words[i + 1] & MASK32
        ev = packed >> SAMPLE_EVENT_SHIFT
        if ev >= len(STALL_NAMES):
            raise ValueError("sample %d carries unknown event class %d" % (i // 2, ev))
        out.append(Sample(cyc, packed & SAMPLE_PC_MASK, ev))
    return out


def stall_stack(samples, interval: int) -> dict[str, int]:
    """Aggregate samples into {class name: cycles}.

    interval 1 gives the exact stack; otherwise each sample stands for
    `interval` cycles.  Classes that never appear are omitted.
    """
    counts = Counter(s.event for s in samples)
    return {STALL_NAMES[ev]: n * interval for ev, n in sorted(counts.items())}


def per_pc_table(samples, interval: int) -> dict[int, dict[str, int]]:
    """{pc: {class name: cycles}}, pcs ascending."""
    table: dict[int, Counter] = defaultdict(Counter)
    for s in samples:
        table[s.attributed_pc][s.event] += interval
    return {
        pc: {STALL_NAMES[ev]: n for ev, n in sorted(evs.items())}
        for pc, evs in sorted(table.items())
    }


def contiguous_runs(events, event: int) -> int:
    """Number of maximal runs of `event` in an exact event sequence.

    This is the quantity the estimation error bound is stated against:
    |estimate - exact| <= interval * runs for every class.
    """
    runs = 0
    prev = False
    for e in events:
        cur = e == event
        if cur and not prev:
            runs += 1
        prev = cur
    return runs


@dataclass(frozen=True)
class SlowdownReport:
    interval: int
    host_ticks: int
    dut_cycles: int

    @property
    def slowdown(self) -> float:
        if self.dut_cycles == 0:
            return 1.0
        return self.host_ticks / self.dut_cycles

    def to_dict(self) -> dict:
        return {
            "interval": self.interval,
            "host_ticks": self.host_ticks,
            "dut_cycles": self.dut_cycles,
            "slowdown": self.slowdown,
        }


def write_stall_stack_csv(path, stack: dict[str, int]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["class", "cycles"])
        for name, cycles in stack.items():
            w.writerow([name, cycles])


def write_per_pc_csv(path, table: dict[int, dict[str, int]]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["pc", "class", "cycles"])
        for pc, evs in table.items():
            for name, cycles in evs.items():
                w.writerow(["0x%08X" % pc, name, cycles])


def write_slowdown_json(path, reports) -> None:
    payload = [r.to_dict() for r in reports]
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
