"""Architectural reference model and lockstep comparison.

The reference executes one instruction at a time with no timing at all and
produces the same commit records the pipeline emits: {pc, instruction word,
rd|flags, wdata}.  Lockstep checking consumes the pipeline's record stream
as the host drains it and reports the first difference with its commit
index and the field that disagrees, so a mismatch points at the guilty
instruction rather than at a register dump.
"""

from __future__ import annotations

from dataclasses import dataclass

from .isa import MASK32, alu_eval, branch_taken, decode, u32
from .pshell import SENTINEL

RD_FLAG_WRITE = 1 << 8
RD_FLAG_HALT = 1 << 9

SYS_SENDCHAR = 1
SYS_GETCHAR = 2


class GoldenModel:
    """In-order architectural execution, one instruction per step."""

    def __init__(self, entry: int, mem: dict[int, int], stdin_script: bytes = b""):
        self.pc = entry & MASK32
        self.mem = dict(mem)
        self.regs = [0] * 32
        self.stdin = list(stdin_script)
        self._stdin_idx = 0
        self.chars_out = bytearray()
        self.halted = False
        self.halt_reason = None
        self.exit_code = 0
        self.instret = 0

    def step(self):
        """Execute one instruction; return its commit record, or None when
        the instruction halts the machine without committing."""
        assert not self.halted
        pc = self.pc
        word = self.mem.get(pc, 0)
        instr = decode(word)
        regs = self.regs
        rd_field = 0
        wdata = 0
        next_pc = u32(pc + 4)

        if instr.illegal:
            self._halt(f"illegal instruction 0x{word:08X} at pc 0x{pc:08X}")
            return None
        if instr.is_ebreak:
            self._halt(f"ebreak at pc 0x{pc:08X}")
        elif instr.is_ecall:
            sel = regs[17]
            if sel == SYS_SENDCHAR:
                self.chars_out.append(regs[10] & 0xFF)
            elif sel == SYS_GETCHAR:
                if self._stdin_idx < len(self.stdin):
                    regs[10] = self.stdin[self._stdin_idx] & MASK32
                    self._stdin_idx += 1
                else:
                    regs[10] = SENTINEL
                rd_field = 10 | RD_FLAG_WRITE
                wdata = regs[10]
            else:
                self._halt("exit", regs[10])
                wdata = regs[10]
        elif instr.is_load:
            addr = u32(regs[instr.rs1] + instr.imm)
            if addr & 3:
                self._halt(f"misaligned load of 0x{addr:08X} at pc 0x{pc:08X}")
                return None
            if instr.rd:
                regs[instr.rd] = self.mem.get(addr, 0)
                rd_field = instr.rd | RD_FLAG_WRITE
                wdata = regs[instr.rd]
        elif instr.is_store:
            addr = u32(regs[instr.rs1] + instr.imm)
            if addr & 3:
                self._halt(f"misaligned store to 0x{addr:08X} at pc 0x{pc:08X}")
                return None
            wdata = regs[instr.rs2] & MASK32
            self.mem[addr] = wdata
        elif instr.is_branch:
            if branch_taken(instr.op, regs[instr.rs1], regs[instr.rs2]):
                next_pc = u32(pc + instr.imm)
        elif instr.op == "jal":
            regs[instr.rd] = u32(pc + 4) if instr.rd else regs[0]
            next_pc = u32(pc + instr.imm)
            if instr.rd:
                rd_field = instr.rd | RD_FLAG_WRITE
                wdata = regs[instr.rd]
        elif instr.op == "jalr":
            link = u32(pc + 4)
            next_pc = u32(regs[instr.rs1] + instr.imm) & ~1
            if instr.rd:
                regs[instr.rd] = link
                rd_field = instr.rd | RD_FLAG_WRITE
                wdata = link
        elif instr.op == "lui":
            if instr.rd:
                regs[instr.rd] = instr.imm & MASK32
                rd_field = instr.rd | RD_FLAG_WRITE
                wdata = regs[instr.rd]
        elif instr.op == "auipc":
            if instr.rd:
                regs[instr.rd] = u32(pc + instr.imm)
                rd_field = instr.rd | RD_FLAG_WRITE
                wdata = regs[instr.rd]
        else:
            value = alu_eval(instr.op, regs[instr.rs1],
                             (instr.imm & MASK32) if not instr.reads_rs2 else regs[instr.rs2])
            if instr.rd:
                regs[instr.rd] = value
                rd_field = instr.rd | RD_FLAG_WRITE
                wdata = value

        regs[0] = 0
        if self.halted:
            rd_field |= RD_FLAG_HALT
        else:
            self.pc = next_pc
        self.instret += 1
        return (pc, word, rd_field, wdata)

    def _halt(self, reason, code=0):
        self.halted = True
        self.halt_reason = reason
        self.exit_code = code

    def run(self, max_instrs: int = 1_000_000) -> list:
        records = []
        while not self.halted:
            if self.instret >= max_instrs:
                raise RuntimeError(f"reference model exceeded {max_instrs} instructions")
            rec = self.step()
            if rec is not None:
                records.append(rec)
        return records


# ------------------------------------------------------------------ lockstep

_FIELDS = ("pc", "instr", "rd", "wdata")


@dataclass(frozen=True)
class Divergence:
    commit_index: int
    field: str                    # one of pc/instr/rd/wdata, or "truncation"
    dut_record: tuple | None
    golden_record: tuple | None

    def describe(self) -> str:
        def fmt(rec):
            if rec is None:
                return "<none>"
            return f"pc=0x{rec[0]:08X} instr=0x{rec[1]:08X} rd=0x{rec[2]:03X} wdata=0x{rec[3]:08X}"
        return (f"divergence at commit {self.commit_index} ({self.field}): "
                f"dut {fmt(self.dut_record)} vs reference {fmt(self.golden_record)}")


class LockstepChecker:
    """Feeds on the drained commit stream, word by word or record by
    record, advancing the reference model one instruction per record."""

    def __init__(self, golden: GoldenModel, max_instrs_per_record: int = 1_000_000):
        self.golden = golden
        self.index = 0
        self._buf = []
        self._budget = max_instrs_per_record

    def _next_golden(self):
        g = self.golden
        steps = 0
        while not g.halted:
            rec = g.step()
            if rec is not None:
                return rec
            steps += 1
            if steps > self._budget:
                raise RuntimeError("reference model stopped committing")
        return None

    def feed_word(self, word: int):
        self._buf.append(word & MASK32)
        if len(self._buf) == 4:
            rec = tuple(self._buf)
            self._buf.clear()
            return self.feed_record(rec)
        return None

    def feed_record(self, rec):
        want = self._next_golden()
        idx = self.index
        self.index += 1
        if want is None:
            return Divergence(idx, "truncation", tuple(rec), None)
        for k, name in enumerate(_FIELDS):
            if rec[k] != want[k]:
                return Divergence(idx, name, tuple(rec), tuple(want))
        return None

    def finish(self, dut_halted: bool = True):
        """Close the stream.  A partial record, or a reference that still
        has commits after the DUT halted, is a truncation divergence."""
        if self._buf:
            return Divergence(self.index, "truncation", tuple(self._buf), None)
        if dut_halted and not self.golden.halted:
            want = self._next_golden()
            if want is not None:
                return Divergence(self.index, "truncation", None, want)
        return None
