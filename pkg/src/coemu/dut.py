"""Five-stage in-order pipeline: IF, ISS, EX1, EX2, WB.

Scheduling model, in brief:

* Single issue, full bypassing.  ALU results are ready at the end of EX1,
  load data at the end of EX2 (a pipelined 2-cycle data access), so a
  back-to-back load-use pair costs one bubble.
* The optional catch-up ALU sits in EX2.  An integer op or conditional
  branch whose operand is produced in EX2 (a load, or another catch-up op)
  is dispatched down that path instead of stalling: one extra cycle of
  latency, fully pipelined, zero bubbles.  A non-eligible consumer of a
  catch-up result still pays one bubble.
* Branches resolve in EX1 against the frontend's prediction (2 bubbles on
  a mispredict).  A catch-up branch resolves in EX2 and a mismatch there
  flushes everything behind it, replay-style (3 bubbles).
* Every cycle either commits or is charged to exactly one stall class.
  Bubbles carry their class and blamed PC from birth to the commit stage,
  so cycle accounting happens where retirement happens and always sums to
  the cycle count.

Syscalls (ECALL, selector in a7): 1 = sendchar(a0) into the char FIFO,
2 = getchar from the stdin FIFO into a0, 3 = exit(a0).  Any other selector
also exits.  A sendchar that would overflow is a host problem and is fenced
off by the kernel before the cycle runs; a getchar on an empty FIFO is an
architecturally real wait and holds the commit stage.
"""

from __future__ import annotations

from dataclasses import dataclass

from .isa import (
    EV_BRANCH_MISPREDICT, EV_CATCHUP_DEP, EV_CATCHUP_FLUSH, EV_COMMIT,
    EV_DCACHE_MISS, EV_FRONTEND_EMPTY, EV_ICACHE_MISS, EV_LOAD_ARITH,
    EV_LOAD_CONTROL, EV_RAW_OTHER, EV_SYSCALL_WAIT, MASK32,
    alu_eval, branch_taken, decode, u32,
)
from .pshell import SENTINEL
from .timing import IoRequest

SYS_SENDCHAR = 1
SYS_GETCHAR = 2
SYS_EXIT = 3

MUTATIONS = ("add-sub-swap", "drop-ex2-bypass", "branch-polarity", "jal-offby4", "stale-load")

# Commit record word 3 packing: rd index plus flags.
RD_FLAG_WRITE = 1 << 8
RD_FLAG_HALT = 1 << 9

# ----------------------------------------------------------------- coverage

# Every single-bit mux select the pipeline exposes to toggle coverage, in
# fixed order.  This list is part of the DUT's interface: the static
# coverpoint extractor finds one condition per entry in the SV rendering
# of this core, and the runtime reports coverage against the same ids.
COVER_SIGNALS = (
    "fe_redirect",
    "fe_predict_taken",
    "fe_icache_stall",
    "fe_fetch_valid",
    "iss_issue_valid",
    "iss_dispatch_catchup",
    "iss_hold_load_use",
    "iss_hold_catchup_dep",
    "iss_hold_mem_pending",
    "iss_hold_raw_other",
    "byp_rs1_ex2",
    "byp_rs2_ex2",
    "byp_rs1_rf",
    "byp_rs2_rf",
    "alu_src_imm",
    "ex1_branch_resolve",
    "ex1_branch_taken",
    "ex1_flush",
    "ex1_mem_issue",
    "ex1_passthrough",
    "ex2_catchup_exec",
    "ex2_catchup_branch",
    "ex2_catchup_flush",
    "ex2_dmem_read",
    "ex2_dmem_write",
    "wb_commit",
    "wb_write_rd",
    "wb_halt",
    "wb_hold_syscall",
    "fifo_push_char",
    "fifo_push_commit",
    "fifo_push_sample",
    "fifo_pop_stdin",
    "fifo_stdin_eof",
)

COVER_WORDS = (len(COVER_SIGNALS) + 31) // 32

_B = {name: 1 << i for i, name in enumerate(COVER_SIGNALS)}
_ALL_SIGNALS_MASK = (1 << len(COVER_SIGNALS)) - 1


class CoverageBits:
    """Toggle coverage over the select list: a point is covered once its
    signal has been observed in both states.  Bits only ever set, so the
    covered set grows monotonically."""

    __slots__ = ("seen0", "seen1")

    def __init__(self):
        self.seen0 = 0
        self.seen1 = 0

    def observe(self, valuation: int) -> None:
        self.seen1 |= valuation
        self.seen0 |= ~valuation & _ALL_SIGNALS_MASK

    @property
    def covered(self) -> int:
        return self.seen0 & self.seen1

    def covered_ids(self) -> list[int]:
        cov = self.covered
        return [i for i in range(len(COVER_SIGNALS)) if cov >> i & 1]

    def word(self, k: int) -> int:
        if not 0 <= k < COVER_WORDS:
            return 0
        return (self.covered >> (32 * k)) & MASK32


@dataclass
class PipelineConfig:
    catchup_enabled: bool = False
    branch_predictor: str = "static-nt"     # "static-nt" | "2bit"
    predictor_size: int = 64
    btb_size: int = 64
    icache_mode: str = "perfect"            # "perfect" | "miss"
    icache_miss_latency: int = 4
    icache_line_words: int = 8
    dmem_mode: str = "perfect"              # "perfect" | "dram"
    sample_interval: int = 0                # 0 disables sampling
    emit_commits: bool = False
    coverage_enabled: bool = False
    mutation: str | None = None
    # Shell wiring.
    fifo_char: int = 0
    fifo_commit: int = 1
    fifo_sample: int = 2
    fifo_stdin: int = 0
    csr_stdin_status: int = 0               # output CSR, bit0 = stdin closed
    csr_cover_base: int = 0                 # first input CSR for coverage words

    def validate(self):
        if self.branch_predictor not in ("static-nt", "2bit"):
            raise ValueError(f"unknown branch predictor {self.branch_predictor!r}")
        if self.icache_mode not in ("perfect", "miss"):
            raise ValueError(f"unknown icache mode {self.icache_mode!r}")
        if self.dmem_mode not in ("perfect", "dram"):
            raise ValueError(f"unknown dmem mode {self.dmem_mode!r}")
        if self.mutation is not None and self.mutation not in MUTATIONS:
            raise ValueError(f"unknown mutation {self.mutation!r}; choose from {MUTATIONS}")
        if self.sample_interval < 0:
            raise ValueError("sample_interval must be >= 0")
        if self.icache_mode == "miss" and self.icache_miss_latency < 1:
            raise ValueError("icache_miss_latency must be >= 1")
        for n in (self.predictor_size, self.btb_size, self.icache_line_words):
            if n < 1 or n & (n - 1):
                raise ValueError("table sizes must be powers of two")


class _Slot:
    """One in-flight instruction."""

    __slots__ = ("instr", "pc", "catchup", "result", "pred_next",
                 "addr", "store_val", "fault")

    def __init__(self, instr, pc, pred_next):
        self.instr = instr
        self.pc = pc
        self.catchup = False
        self.result = None
        self.pred_next = pred_next
        self.addr = 0
        self.store_val = 0
        self.fault = None


class _Bub:
    """A pipeline bubble, tagged at birth with its stall class and the PC
    it is blamed on.  Flows to WB like an instruction."""

    __slots__ = ("tag", "pc")

    def __init__(self, tag, pc):
        self.tag = tag
        self.pc = pc


class CycleOut:
    """What one DUT cycle produced, as seen by the kernel."""

    __slots__ = ("event", "event_pc", "commit", "mem_req", "halted")

    def __init__(self, event, event_pc, commit, mem_req, halted):
        self.event = event
        self.event_pc = event_pc
        self.commit = commit            # (pc, instr, rd|flags, wdata) or None
        self.mem_req = mem_req          # IoRequest or None
        self.halted = halted


class Pipeline:
    def __init__(self, entry: int, mem: dict[int, int], shell, config: PipelineConfig | None = None):
        self.cfg = config or PipelineConfig()
        self.cfg.validate()
        self.shell = shell
        self.mem = mem
        self.entry = entry & MASK32
        self._icode: dict[int, object] = {}
        self._ic_shift = 2 + (self.cfg.icache_line_words.bit_length() - 1)
        base = []
        if self.cfg.sample_interval:
            base.append((self.cfg.fifo_sample, 2))
        if self.cfg.emit_commits:
            base.append((self.cfg.fifo_commit, 4))
        self._needs_base = tuple(base)
        self._needs_char = self._needs_base + ((self.cfg.fifo_char, 1),)
        self.cover = CoverageBits()
        self._cov_last_written = None
        self.reset()

    def reset(self):
        self.regs = [0] * 32
        self.halted = False
        self.halt_reason = None
        self.exit_code = 0
        self.commits = 0
        self.cover_valuation = 0
        self.fetch_pc = self.entry
        self.outstanding = None            # (req_id, rd, pc) of the miss in flight
        self._pending_rd = 0               # bitmask of regs awaiting delivery
        self._next_req_id = 0
        self._last_store = (None, 0, -9)   # (addr, old value, cycle) for the stale-load mutant
        self._ic_lines: set[int] = set()
        self._ic_wait = 0
        self._bp_ctr = [1] * self.cfg.predictor_size    # weakly not-taken
        self._btb_pc = [None] * self.cfg.btb_size
        self._btb_tgt = [0] * self.cfg.btb_size
        entry = self.entry
        self.s_iss = _Bub(EV_FRONTEND_EMPTY, entry)
        self.s_ex1 = _Bub(EV_FRONTEND_EMPTY, entry)
        self.s_ex2 = _Bub(EV_FRONTEND_EMPTY, entry)
        self.s_wb = _Bub(EV_FRONTEND_EMPTY, entry)
        self.s_if = None
        self._fill_if()

    # ------------------------------------------------------------- frontend

    def _decode_at(self, pc):
        instr = self._icode.get(pc)
        if instr is None:
            instr = decode(self.mem.get(pc, 0))
            self._icode[pc] = instr
        return instr

    def _predict(self, pc, instr):
        """Next-fetch prediction.  Static mode always falls through."""
        if self.cfg.branch_predictor == "static-nt" or not (instr.is_branch or instr.is_jump):
            return u32(pc + 4), False
        idx = (pc >> 2) & (self.cfg.btb_size - 1)
        if self._btb_pc[idx] != pc:
            return u32(pc + 4), False
        if instr.is_jump:
            return self._btb_tgt[idx], True
        if self._bp_ctr[(pc >> 2) & (self.cfg.predictor_size - 1)] >= 2:
            return self._btb_tgt[idx], True
        return u32(pc + 4), False

    def _train(self, pc, taken, target, is_jump):
        if self.cfg.branch_predictor != "2bit":
            return
        if not is_jump:
            i = (pc >> 2) & (self.cfg.predictor_size - 1)
            c = self._bp_ctr[i]
            self._bp_ctr[i] = min(3, c + 1) if taken else max(0, c - 1)
        if taken:
            j = (pc >> 2) & (self.cfg.btb_size - 1)
            self._btb_pc[j] = pc
            self._btb_tgt[j] = target

    def _fill_if(self):
        """Fetch into the IF slot, or hold an icache-miss bubble there.
        The miss port is blocking: a redirect does not cancel the wait."""
        pc = self.fetch_pc
        if self.cfg.icache_mode == "miss":
            if self._ic_wait > 0:
                self._ic_wait -= 1
                self.s_if = _Bub(EV_ICACHE_MISS, pc)
                return _B["fe_icache_stall"]
            line = pc >> self._ic_shift
            if line not in self._ic_lines:
                self._ic_lines.add(line)
                self._ic_wait = self.cfg.icache_miss_latency - 1
                self.s_if = _Bub(EV_ICACHE_MISS, pc)
                return _B["fe_icache_stall"]
        instr = self._decode_at(pc)
        pred_next, pred_taken = self._predict(pc, instr)
        self.s_if = _Slot(instr, pc, pred_next)
        self.fetch_pc = pred_next
        return _B["fe_fetch_valid"] | (_B["fe_predict_taken"] if pred_taken else 0)

    # ------------------------------------------------------------- operands

    def _read_operand(self, r, ex2_slot, which):
        """Operand for an instruction executing EX1.  Issue already
        guaranteed readiness, so the only live bypass is the EX2-resident
        producer; everything else is in the (post-commit) register file."""
        if r == 0:
            return 0, 0
        if (self.cfg.mutation != "drop-ex2-bypass"
                and type(ex2_slot) is _Slot
                and ex2_slot.result is not None
                and ex2_slot.instr.writes_rd
                and ex2_slot.instr.rd == r):
            return ex2_slot.result, _B["byp_rs1_ex2"] if which == 1 else _B["byp_rs2_ex2"]
        return self.regs[r], _B["byp_rs1_rf"] if which == 1 else _B["byp_rs2_rf"]

    @staticmethod
    def _writes_reg(slot, r):
        instr = slot.instr
        if instr.writes_rd and instr.rd == r:
            return True
        # A getchar writes a0 and the selector is not knowable this early,
        # so any in-flight ECALL conservatively counts as an a0 producer.
        return instr.is_ecall and r == 10

    def _sources(self, instr):
        if instr.is_ecall:
            return (10, 17)
        srcs = ()
        if instr.reads_rs1 and instr.rs1:
            srcs = (instr.rs1,)
        if instr.reads_rs2 and instr.rs2:
            srcs += (instr.rs2,)
        return srcs

    # ------------------------------------------------------------- kernel API

    def sendchar_imminent(self) -> bool:
        wb = self.s_wb
        # By WB every a7 producer has committed, so the selector is stable.
        return type(wb) is _Slot and wb.instr.is_ecall and self.regs[17] == SYS_SENDCHAR

    def headroom_needed(self):
        """Worst-case FIFO words the next cycle may push, per FIFO index.
        The kernel refuses to run a cycle without this much room."""
        if self.sendchar_imminent():
            return self._needs_char
        return self._needs_base

    def complete_mem(self, req_id: int) -> None:
        """Timing delivery for the outstanding miss; frees the port and the
        destination scoreboard.  The architectural value was captured at
        issue; this call only ends the wait."""
        out = self.outstanding
        if out is None or out[0] != req_id:
            raise RuntimeError(f"no outstanding request {req_id}")
        self.outstanding = None
        self._pending_rd &= ~(1 << out[1])

    # ------------------------------------------------------------- the cycle

    def step(self, cycle: int) -> CycleOut:
        assert not self.halted, "stepping a halted DUT"
        cfg = self.cfg
        mut = cfg.mutation
        cov = 0
        mem_req = None
        commit = None

        s_wb, s_ex2, s_ex1, s_iss, s_if = self.s_wb, self.s_ex2, self.s_ex1, self.s_iss, self.s_if

        # ---- WB: commit, hold, or account a bubble.
        wb_free = True
        if type(s_wb) is _Bub:
            event, event_pc = s_wb.tag, s_wb.pc
        else:
            instr = s_wb.instr
            event, event_pc = EV_COMMIT, s_wb.pc
            rd_field = 0
            wdata = 0
            emit_record = True
            if s_wb.fault is not None:
                self._halt(s_wb.fault)
                cov |= _B["wb_halt"]
                emit_record = False
            elif instr.illegal:
                self._halt(f"illegal instruction 0x{instr.word:08X} at pc 0x{s_wb.pc:08X}")
                cov |= _B["wb_halt"]
                emit_record = False
            elif instr.is_ebreak:
                self._halt(f"ebreak at pc 0x{s_wb.pc:08X}")
                cov |= _B["wb_halt"]
            elif instr.is_ecall:
                sel = self.regs[17]
                if sel == SYS_SENDCHAR:
                    ok = self.shell.dut_fifo_push(cfg.fifo_char, self.regs[10] & 0xFF)
                    assert ok, "sendchar push must be pre-gated by the kernel"
                    cov |= _B["fifo_push_char"]
                elif sel == SYS_GETCHAR:
                    word = self.shell.dut_fifo_pop(cfg.fifo_stdin)
                    if word is not None:
                        cov |= _B["fifo_pop_stdin"]
                        self.regs[10] = word & MASK32
                        rd_field = 10 | RD_FLAG_WRITE
                        wdata = self.regs[10]
                    elif self.shell.dut_csr_read(cfg.csr_stdin_status) & 1:
                        # Input closed: return the all-ones sentinel.
                        cov |= _B["fifo_stdin_eof"]
                        self.regs[10] = SENTINEL
                        rd_field = 10 | RD_FLAG_WRITE
                        wdata = SENTINEL
                    else:
                        # Architecturally real wait: hold the commit stage.
                        emit_record = False
                        wb_free = False
                        event = EV_SYSCALL_WAIT
                        cov |= _B["wb_hold_syscall"]
                else:
                    # exit(a0); unknown selectors exit too.
                    self._halt("exit", self.regs[10])
                    wdata = self.regs[10]
                    cov |= _B["wb_halt"]
            elif instr.writes_rd:
                wdata = s_wb.result & MASK32
                self.regs[instr.rd] = wdata
                rd_field = instr.rd | RD_FLAG_WRITE
                cov |= _B["wb_write_rd"]
            elif instr.is_store:
                wdata = s_wb.store_val

            if emit_record:
                if self.halted:
                    rd_field |= RD_FLAG_HALT
                commit = (s_wb.pc, instr.word, rd_field, wdata)
                self.commits += 1
                cov |= _B["wb_commit"]
                if cfg.emit_commits:
                    push = self.shell.dut_fifo_push
                    ok = (push(cfg.fifo_commit, commit[0]) and push(cfg.fifo_commit, commit[1])
                          and push(cfg.fifo_commit, commit[2]) and push(cfg.fifo_commit, commit[3]))
                    assert ok, "commit push must be pre-gated by the kernel"
                    cov |= _B["fifo_push_commit"]

        # ---- EX2: late ALU, data access completion, catch-up resolution.
        ex2_flush_pc = None
        if wb_free and type(s_ex2) is _Slot and s_ex2.fault is None:
            instr = s_ex2.instr
            if s_ex2.catchup:
                # Catch-up operands come from the post-commit register file:
                # every producer wrote back this cycle or earlier.
                a = self.regs[instr.rs1] if instr.reads_rs1 else 0
                b = self.regs[instr.rs2] if instr.reads_rs2 else 0
                if instr.is_branch:
                    taken = branch_taken(instr.op, a, b)
                    if mut == "branch-polarity":
                        taken = not taken
                    target = u32(s_ex2.pc + instr.imm) if taken else u32(s_ex2.pc + 4)
                    cov |= _B["ex2_catchup_branch"] | (_B["ex1_branch_taken"] if taken else 0)
                    self._train(s_ex2.pc, taken, u32(s_ex2.pc + instr.imm), False)
                    if target != s_ex2.pred_next:
                        ex2_flush_pc = s_ex2.pc
                        self.fetch_pc = target
                        cov |= _B["ex2_catchup_flush"] | _B["fe_redirect"]
                else:
                    op = instr.op
                    if mut == "add-sub-swap" and op in ("add", "sub"):
                        op = "sub" if op == "add" else "add"
                    s_ex2.result = alu_eval(op, a, (instr.imm & MASK32) if not instr.reads_rs2 else b)
                    cov |= _B["ex2_catchup_exec"]
            elif instr.is_load and cfg.dmem_mode == "perfect":
                value = self.mem.get(s_ex2.addr, 0)
                if mut == "stale-load":
                    st_addr, st_old, st_cycle = self._last_store
                    if st_addr == s_ex2.addr and st_cycle == cycle - 1:
                        value = st_old
                s_ex2.result = value
                cov |= _B["ex2_dmem_read"]
            elif instr.is_store:
                addr = s_ex2.addr
                self._last_store = (addr, self.mem.get(addr, 0), cycle)
                self.mem[addr] = s_ex2.store_val
                self._icode.pop(addr, None)   # keep fetch coherent with stores
                cov |= _B["ex2_dmem_write"]

        # ---- EX1: early ALU, branch resolution, memory issue.
        ex1_flush_pc = None
        if wb_free and ex2_flush_pc is None and type(s_ex1) is _Slot:
            instr = s_ex1.instr
            op = instr.op
            if s_ex1.catchup:
                cov |= _B["ex1_passthrough"]
            elif op in ("ecall", "ebreak", "illegal"):
                pass
            elif op == "lui":
                s_ex1.result = instr.imm & MASK32
            elif op == "auipc":
                s_ex1.result = u32(s_ex1.pc + instr.imm)
            else:
                a, c1 = self._read_operand(instr.rs1, s_ex2, 1) if instr.reads_rs1 else (0, 0)
                b, c2 = self._read_operand(instr.rs2, s_ex2, 2) if instr.reads_rs2 else (0, 0)
                cov |= c1 | c2
                if instr.is_branch:
                    taken = branch_taken(op, a, b)
                    if mut == "branch-polarity":
                        taken = not taken
                    target = u32(s_ex1.pc + instr.imm) if taken else u32(s_ex1.pc + 4)
                    cov |= _B["ex1_branch_resolve"] | (_B["ex1_branch_taken"] if taken else 0)
                    self._train(s_ex1.pc, taken, u32(s_ex1.pc + instr.imm), False)
                    if target != s_ex1.pred_next:
                        ex1_flush_pc = s_ex1.pc
                        self.fetch_pc = target
                        cov |= _B["ex1_flush"] | _B["fe_redirect"]
                elif op == "jal" or op == "jalr":
                    s_ex1.result = u32(s_ex1.pc + 4)
                    if op == "jal":
                        target = u32(s_ex1.pc + instr.imm)
                        if mut == "jal-offby4":
                            target = u32(target + 4)
                    else:
                        target = u32(a + instr.imm) & ~1
                    cov |= _B["ex1_branch_resolve"] | _B["ex1_branch_taken"]
                    self._train(s_ex1.pc, True, target, True)
                    if target != s_ex1.pred_next:
                        ex1_flush_pc = s_ex1.pc
                        self.fetch_pc = target
                        cov |= _B["ex1_flush"] | _B["fe_redirect"]
                elif instr.is_load:
                    addr = u32(a + instr.imm)
                    s_ex1.addr = addr
                    if addr & 3:
                        s_ex1.fault = f"misaligned load of 0x{addr:08X} at pc 0x{s_ex1.pc:08X}"
                    elif cfg.dmem_mode == "dram":
                        mem_req = IoRequest(self._next_req_id, "mem-read", addr, cycle)
                        self._next_req_id += 1
                        self.outstanding = (mem_req.req_id, instr.rd, s_ex1.pc)
                        self._pending_rd |= 1 << instr.rd
                        # Value is architectural now; delivery only ends the wait.
                        s_ex1.result = self.mem.get(addr, 0)
                        cov |= _B["ex1_mem_issue"]
                elif instr.is_store:
                    addr = u32(a + instr.imm)
                    s_ex1.addr = addr
                    s_ex1.store_val = b & MASK32
                    if addr & 3:
                        s_ex1.fault = f"misaligned store to 0x{addr:08X} at pc 0x{s_ex1.pc:08X}"
                    elif cfg.dmem_mode == "dram":
                        # Posted write: bank accounting only, nothing waits on it.
                        mem_req = IoRequest(self._next_req_id, "mem-write", addr, cycle)
                        self._next_req_id += 1
                        cov |= _B["ex1_mem_issue"]
                else:
                    if mut == "add-sub-swap" and op in ("add", "sub"):
                        op = "sub" if op == "add" else "add"
                    imm_b = not instr.reads_rs2
                    if imm_b:
                        cov |= _B["alu_src_imm"]
                    s_ex1.result = alu_eval(op, a, (instr.imm & MASK32) if imm_b else b)

        # ---- ISS: hazard check and dispatch.
        issued = None
        stall_tag = None
        stall_pc = 0
        if wb_free and ex1_flush_pc is None and ex2_flush_pc is None and type(s_iss) is _Slot:
            instr = s_iss.instr
            want_catchup = False
            for r in self._sources(instr):
                if self._pending_rd >> r & 1:
                    stall_tag = EV_DCACHE_MISS
                    stall_pc = self.outstanding[2] if self.outstanding else s_iss.pc
                    break
                if type(s_ex1) is _Slot and self._writes_reg(s_ex1, r):
                    pi = s_ex1.instr
                    if pi.is_ecall:
                        stall_tag, stall_pc = EV_RAW_OTHER, s_ex1.pc
                        break
                    if pi.is_load or s_ex1.catchup:
                        slow_load = pi.is_load and cfg.dmem_mode == "dram"
                        if cfg.catchup_enabled and instr.catchup_ok and not slow_load:
                            want_catchup = True
                            continue
                        if slow_load:
                            stall_tag, stall_pc = EV_DCACHE_MISS, s_ex1.pc
                        elif pi.is_load:
                            tag = EV_LOAD_CONTROL if (instr.is_branch or instr.is_jump) else EV_LOAD_ARITH
                            stall_tag, stall_pc = tag, s_ex1.pc
                        else:
                            stall_tag, stall_pc = EV_CATCHUP_DEP, s_ex1.pc
                        break
                    continue    # EX1 ALU result bypasses from EX2 next cycle
                if type(s_ex2) is _Slot and self._writes_reg(s_ex2, r) and s_ex2.instr.is_ecall:
                    stall_tag, stall_pc = EV_RAW_OTHER, s_ex2.pc
                    break
            if stall_tag is None and instr.is_load and cfg.dmem_mode == "dram" and self.outstanding:
                # Single outstanding read per port.
                stall_tag, stall_pc = EV_DCACHE_MISS, self.outstanding[2]
            if stall_tag is None:
                issued = s_iss
                issued.catchup = want_catchup
                cov |= _B["iss_issue_valid"] | (_B["iss_dispatch_catchup"] if want_catchup else 0)
            else:
                cov |= {
                    EV_LOAD_ARITH: _B["iss_hold_load_use"],
                    EV_LOAD_CONTROL: _B["iss_hold_load_use"],
                    EV_CATCHUP_DEP: _B["iss_hold_catchup_dep"],
                    EV_DCACHE_MISS: _B["iss_hold_mem_pending"],
                    EV_RAW_OTHER: _B["iss_hold_raw_other"],
                }[stall_tag]

        # ---- Shift.  Flushes squash real slots; bubbles keep their tags.
        if wb_free:
            self.s_wb = s_ex2
            if ex2_flush_pc is not None:
                self.s_ex2 = _Bub(EV_CATCHUP_FLUSH, ex2_flush_pc) if type(s_ex1) is _Slot else s_ex1
                self.s_ex1 = _Bub(EV_CATCHUP_FLUSH, ex2_flush_pc) if type(s_iss) is _Slot else s_iss
                self.s_iss = _Bub(EV_CATCHUP_FLUSH, ex2_flush_pc) if type(s_if) is _Slot else s_if
                cov |= self._fill_if()
            elif ex1_flush_pc is not None:
                self.s_ex2 = s_ex1
                self.s_ex1 = _Bub(EV_BRANCH_MISPREDICT, ex1_flush_pc) if type(s_iss) is _Slot else s_iss
                self.s_iss = _Bub(EV_BRANCH_MISPREDICT, ex1_flush_pc) if type(s_if) is _Slot else s_if
                cov |= self._fill_if()
            else:
                self.s_ex2 = s_ex1
                if issued is not None or type(s_iss) is _Bub:
                    self.s_ex1 = s_iss
                    self.s_iss = s_if
                    cov |= self._fill_if()
                else:
                    # Stall: ISS and IF hold, a tagged bubble enters EX1.
                    self.s_ex1 = _Bub(stall_tag, stall_pc)

        # ---- Sampling and coverage export.
        if cfg.sample_interval and cycle % cfg.sample_interval == 0:
            push = self.shell.dut_fifo_push
            ok = (push(cfg.fifo_sample, cycle & MASK32)
                  and push(cfg.fifo_sample, (event_pc & 0x0FFFFFFF) | (event << 28)))
            assert ok, "sample push must be pre-gated by the kernel"
            cov |= _B["fifo_push_sample"]

        self.cover_valuation = cov
        if cfg.coverage_enabled:
            self.cover.observe(cov)
            covered = self.cover.covered
            if covered != self._cov_last_written:
                self._cov_last_written = covered
                for k in range(COVER_WORDS):
                    self.shell.dut_csr_write(cfg.csr_cover_base + k, self.cover.word(k))

        return CycleOut(event, event_pc, commit, mem_req, self.halted)

    def _halt(self, reason, code=0):
        self.halted = True
        self.halt_reason = reason
        self.exit_code = code

    # ------------------------------------------------------------- queries

    def cover_read_word(self, k: int) -> int:
        return self.cover.word(k)

    def cover_report(self) -> dict:
        covered = set(self.cover.covered_ids())
        return {
            "total": len(COVER_SIGNALS),
            "covered": len(covered),
            "covered_ids": sorted(covered),
            "uncovered": [name for i, name in enumerate(COVER_SIGNALS) if i not in covered],
        }
