"""Memory timing: a banked DRAM latency model and the hardware timers that
replay host-computed latencies in DUT time.

The model is deliberately small.  A request to bank b issued at DUT cycle c
costs

    L = base_latency + max(0, bank_free_cycle[b] - c)

after which the bank is busy again until c + (L - base_latency) + bank_busy.
Latency is a pure function of the parameters and the request history, so two
runs that issue the same requests at the same DUT cycles always see the same
latencies, no matter what the host was doing in between.

A HardwareTimer lives in DUT time.  It elapses one unit per running DUT
cycle and refuses to release data early: data that arrives before the
programmed latency has elapsed is held, and a timer that expires without
data tells the kernel to gate until the data shows up.  Either way the
pipeline observes exactly the programmed latency.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class IoRequest:
    req_id: int
    kind: str            # "mem-read" or "mem-write"
    address: int
    issue_cycle: int

    def trace_line(self, latency: int) -> str:
        return (f"req={self.req_id} addr=0x{self.address:08X} "
                f"issue={self.issue_cycle} L={latency} deliver={self.issue_cycle + latency}")


@dataclass
class DramModelParams:
    base_latency: int = 20
    bank_count: int = 8
    bank_busy: int = 10
    line_bytes: int = 64

    def validate(self):
        if self.base_latency < 1:
            raise ValueError("base_latency must be >= 1")
        if self.bank_count < 1 or self.bank_count & (self.bank_count - 1):
            raise ValueError("bank_count must be a power of two")
        if self.line_bytes < 4 or self.line_bytes & (self.line_bytes - 1):
            raise ValueError("line_bytes must be a power of two >= 4")
        if self.bank_busy < 0:
            raise ValueError("bank_busy must be >= 0")


class DramModel:
    """Bank-busy latency model; all state is the per-bank free cycle."""

    def __init__(self, params: DramModelParams | None = None):
        self.params = params or DramModelParams()
        self.params.validate()
        self._line_shift = self.params.line_bytes.bit_length() - 1
        self.bank_free_cycle = [0] * self.params.bank_count
        self.requests_serviced = 0

    def bank_of(self, address: int) -> int:
        return (address >> self._line_shift) & (self.params.bank_count - 1)

    def service(self, request: IoRequest) -> int:
        """Compute the latency for one request and account its bank time.
        Requests must be presented in issue order."""
        bank = self.bank_of(request.address)
        wait = self.bank_free_cycle[bank] - request.issue_cycle
        if wait < 0:
            wait = 0
        latency = self.params.base_latency + wait
        self.bank_free_cycle[bank] = request.issue_cycle + wait + self.params.bank_busy
        self.requests_serviced += 1
        return max(1, latency)


class HardwareTimer:
    """Replays one request's latency in DUT cycles.

    Lifecycle: created unprogrammed when the DUT issues the request; the
    host programs the latency (and, possibly later, marks the data ready);
    the kernel steps it once per running DUT cycle and asks try_deliver
    before each cycle."""

    __slots__ = ("request", "latency", "elapsed", "data_ready", "delivered", "data")

    def __init__(self, request: IoRequest):
        self.request = request
        self.latency = None
        self.elapsed = 0
        self.data_ready = False
        self.delivered = False
        self.data = None

    @property
    def programmed(self) -> bool:
        return self.latency is not None

    def program(self, latency: int) -> None:
        if self.programmed:
            raise RuntimeError("timer already programmed")
        if latency < 1:
            raise ValueError("latency must be >= 1")
        self.latency = latency

    def mark_data_ready(self, data=None) -> None:
        self.data_ready = True
        self.data = data

    def step(self) -> None:
        """Advance one running DUT cycle.  Gated cycles never call this,
        which is what makes the delivery cycle host-independent: elapsed
        counts DUT cycles since issue, programmed or not."""
        if not self.delivered:
            self.elapsed += 1

    def verdict(self, min_latency: int) -> str:
        """Verdict for the cycle about to run (so tested at elapsed+1):
        'held' (still counting), 'ready' (step then deliver, the dependent
        may issue this cycle), or 'gate' (the latency or the data is not
        known yet and the due point would be reached; the cycle must not
        run or delivery timing would leak host speed).  min_latency is the
        floor of any programmable latency, used while unprogrammed."""
        if self.delivered:
            return "held"
        due = self.elapsed + 1
        if not self.programmed:
            return "gate" if due >= min_latency else "held"
        if due < self.latency:
            return "held"
        if not self.data_ready:
            return "gate"
        return "ready"

    def deliver(self):
        assert self.programmed and self.data_ready and self.elapsed >= self.latency
        self.delivered = True
        return self.data


@dataclass
class TimingTraceEntry:
    request: IoRequest
    latency: int

    def line(self) -> str:
        return self.request.trace_line(self.latency)


class TimingLog:
    """Deterministic request trace, one line per serviced request."""

    def __init__(self):
        self.entries: list[TimingTraceEntry] = []

    def record(self, request: IoRequest, latency: int) -> None:
        self.entries.append(TimingTraceEntry(request, latency))

    def lines(self) -> list[str]:
        return [e.line() for e in self.entries]
