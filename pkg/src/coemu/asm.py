"""Small two-pass assembler for the supported RV32I subset.

Enough to write the bundled benchmarks by hand: labels, `.org`, `.word`,
`.equ`, the real instructions the decoder accepts, and the usual pseudo
ops (li, la, mv, nop, j, jr, ret, call, beqz, bnez).  Entry is the
`_start` label when present, otherwise the lowest assembled address.

Sizing is decided in the first pass, so `li` with a symbol that is not yet
defined always takes the two-instruction lui+addi form.
"""

from __future__ import annotations

import re

from .isa import ABI_NAMES, MASK32, sext


class AsmError(Exception):
    def __init__(self, lineno, message):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


_F3_OPIMM = {"addi": 0, "slti": 2, "xori": 4, "ori": 6, "andi": 7}
_F3_SHIFT = {"slli": (1, 0), "srli": (5, 0), "srai": (5, 0x20)}
_F3F7_OP = {
    "add": (0, 0), "sub": (0, 0x20), "sll": (1, 0), "slt": (2, 0),
    "xor": (4, 0), "srl": (5, 0), "sra": (5, 0x20), "or": (6, 0), "and": (7, 0),
}
_F3_BRANCH = {"beq": 0, "bne": 1, "blt": 4, "bge": 5, "bltu": 6, "bgeu": 7}

_MEM_RE = re.compile(r"^(.*)\(\s*(\w+)\s*\)$")


def _reg(tok, lineno):
    r = ABI_NAMES.get(tok.lower())
    if r is None:
        raise AsmError(lineno, f"unknown register {tok!r}")
    return r


def _fits(v, bits):
    lo = -(1 << (bits - 1))
    return lo <= v < (1 << (bits - 1))


def _enc_i(opcode, f3, rd, rs1, imm):
    return ((imm & 0xFFF) << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode

def _enc_r(f3, f7, rd, rs1, rs2):
    return (f7 << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | 0b0110011

def _enc_s(f3, rs1, rs2, imm):
    return (((imm >> 5) & 0x7F) << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) \
        | ((imm & 0x1F) << 7) | 0b0100011

def _enc_b(f3, rs1, rs2, off):
    return ((((off >> 12) & 1) << 31) | (((off >> 5) & 0x3F) << 25) | (rs2 << 20)
            | (rs1 << 15) | (f3 << 12) | (((off >> 1) & 0xF) << 8)
            | (((off >> 11) & 1) << 7) | 0b1100011)

def _enc_u(opcode, rd, value):
    return (value & 0xFFFFF000) | (rd << 7) | opcode

def _enc_j(rd, off):
    return ((((off >> 20) & 1) << 31) | (((off >> 1) & 0x3FF) << 21)
            | (((off >> 11) & 1) << 20) | (((off >> 12) & 0xFF) << 12)
            | (rd << 7) | 0b1101111)


def _split_hi_lo(value):
    value &= MASK32
    lo = sext(value & 0xFFF, 12)
    hi = (value - lo) & MASK32
    return hi, lo


class _Line:
    __slots__ = ("lineno", "addr", "op", "args", "size")

    def __init__(self, lineno, addr, op, args, size=4):
        self.lineno = lineno
        self.addr = addr
        self.op = op
        self.args = args
        self.size = size


class Assembler:
    def __init__(self, base: int = 0):
        self.base = base
        self.symbols: dict[str, int] = {}
        self.lines: list[_Line] = []
        self.mem: dict[int, int] = {}

    # ------------------------------------------------------------- pass 1

    def _value(self, tok, lineno, pass1=False):
        tok = tok.strip()
        neg = tok.startswith("-")
        body = tok[1:] if neg else tok
        try:
            v = int(body, 0)
            return -v if neg else v
        except ValueError:
            pass
        if neg:
            raise AsmError(lineno, f"cannot negate symbol {body!r}")
        if tok in self.symbols:
            return self.symbols[tok]
        if pass1:
            return None
        raise AsmError(lineno, f"undefined symbol {tok!r}")

    def feed(self, text: str):
        pc = self.base
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].split(";", 1)[0].strip()
            if not line:
                continue
            while True:
                m = re.match(r"^([A-Za-z_.$][\w.$]*)\s*:\s*(.*)$", line)
                if not m:
                    break
                label = m.group(1)
                if label in self.symbols:
                    raise AsmError(lineno, f"duplicate label {label!r}")
                self.symbols[label] = pc
                line = m.group(2).strip()
            if not line:
                continue
            parts = line.split(None, 1)
            op = parts[0].lower()
            args = [a.strip() for a in parts[1].split(",")] if len(parts) > 1 else []

            if op == ".org":
                target = self._value(args[0], lineno)
                if target is None or target & 3:
                    raise AsmError(lineno, ".org needs a known word-aligned address")
                pc = target
                continue
            if op == ".equ":
                if len(args) != 2:
                    raise AsmError(lineno, ".equ needs name, value")
                v = self._value(args[1], lineno)
                self.symbols[args[0]] = v & MASK32
                continue
            if op == ".word":
                for a in args:
                    self.lines.append(_Line(lineno, pc, ".word", [a]))
                    pc += 4
                continue
            if op.startswith("."):
                raise AsmError(lineno, f"unsupported directive {op}")

            size = 4
            if op in ("li", "la"):
                v = self._value(args[1], lineno, pass1=True) if len(args) == 2 else None
                if op == "la" or v is None or not _fits(v, 12):
                    size = 8
            self.lines.append(_Line(lineno, pc, op, args, size))
            pc += size

    # ------------------------------------------------------------- pass 2

    def _emit(self, addr, word):
        self.mem[addr] = word & MASK32

    def _branch_off(self, target_tok, pc, lineno, bits):
        v = self._value(target_tok, lineno)
        off = v - pc
        if off & 1:
            raise AsmError(lineno, "branch target must be 2-byte aligned")
        if not _fits(off, bits):
            raise AsmError(lineno, f"branch offset {off} out of range")
        return off

    def _mem_operand(self, tok, lineno):
        m = _MEM_RE.match(tok.strip())
        if not m:
            raise AsmError(lineno, f"expected offset(reg), got {tok!r}")
        off_tok = m.group(1).strip() or "0"
        off = self._value(off_tok, lineno)
        if not _fits(off, 12):
            raise AsmError(lineno, f"offset {off} out of range")
        return off, _reg(m.group(2), lineno)

    def _need(self, args, n, lineno, op):
        if len(args) != n:
            raise AsmError(lineno, f"{op} takes {n} operands")

    def assemble(self):
        for ln in self.lines:
            op, args, pc, lineno = ln.op, ln.args, ln.addr, ln.lineno
            if op == ".word":
                v = self._value(args[0], lineno)
                self._emit(pc, v)
            elif op in _F3_OPIMM:
                self._need(args, 3, lineno, op)
                imm = self._value(args[2], lineno)
                if not _fits(imm, 12):
                    raise AsmError(lineno, f"immediate {imm} out of range")
                self._emit(pc, _enc_i(0b0010011, _F3_OPIMM[op],
                                      _reg(args[0], lineno), _reg(args[1], lineno), imm))
            elif op in _F3_SHIFT:
                self._need(args, 3, lineno, op)
                sh = self._value(args[2], lineno)
                if not 0 <= sh < 32:
                    raise AsmError(lineno, f"shift amount {sh} out of range")
                f3, f7 = _F3_SHIFT[op]
                self._emit(pc, _enc_i(0b0010011, f3, _reg(args[0], lineno),
                                      _reg(args[1], lineno), (f7 << 5) | sh))
            elif op in _F3F7_OP:
                self._need(args, 3, lineno, op)
                f3, f7 = _F3F7_OP[op]
                self._emit(pc, _enc_r(f3, f7, _reg(args[0], lineno),
                                      _reg(args[1], lineno), _reg(args[2], lineno)))
            elif op in _F3_BRANCH:
                self._need(args, 3, lineno, op)
                off = self._branch_off(args[2], pc, lineno, 13)
                self._emit(pc, _enc_b(_F3_BRANCH[op], _reg(args[0], lineno),
                                      _reg(args[1], lineno), off))
            elif op == "lw":
                self._need(args, 2, lineno, op)
                off, rs1 = self._mem_operand(args[1], lineno)
                self._emit(pc, _enc_i(0b0000011, 0b010, _reg(args[0], lineno), rs1, off))
            elif op == "sw":
                self._need(args, 2, lineno, op)
                off, rs1 = self._mem_operand(args[1], lineno)
                self._emit(pc, _enc_s(0b010, rs1, _reg(args[0], lineno), off))
            elif op == "lui":
                self._need(args, 2, lineno, op)
                v = self._value(args[1], lineno)
                self._emit(pc, _enc_u(0b0110111, _reg(args[0], lineno), (v & 0xFFFFF) << 12))
            elif op == "auipc":
                self._need(args, 2, lineno, op)
                v = self._value(args[1], lineno)
                self._emit(pc, _enc_u(0b0010111, _reg(args[0], lineno), (v & 0xFFFFF) << 12))
            elif op == "jal":
                if len(args) == 1:
                    rd, target = 1, args[0]
                else:
                    self._need(args, 2, lineno, op)
                    rd, target = _reg(args[0], lineno), args[1]
                off = self._branch_off(target, pc, lineno, 21)
                self._emit(pc, _enc_j(rd, off))
            elif op == "jalr":
                if len(args) == 2 and "(" in args[1]:
                    off, rs1 = self._mem_operand(args[1], lineno)
                    self._emit(pc, _enc_i(0b1100111, 0, _reg(args[0], lineno), rs1, off))
                else:
                    self._need(args, 3, lineno, op)
                    imm = self._value(args[2], lineno)
                    self._emit(pc, _enc_i(0b1100111, 0, _reg(args[0], lineno),
                                          _reg(args[1], lineno), imm))
            elif op == "ecall":
                self._emit(pc, 0x00000073)
            elif op == "ebreak":
                self._emit(pc, 0x00100073)
            # ---- pseudo instructions
            elif op == "nop":
                self._emit(pc, _enc_i(0b0010011, 0, 0, 0, 0))
            elif op == "mv":
                self._need(args, 2, lineno, op)
                self._emit(pc, _enc_i(0b0010011, 0, _reg(args[0], lineno),
                                      _reg(args[1], lineno), 0))
            elif op in ("li", "la"):
                self._need(args, 2, lineno, op)
                rd = _reg(args[0], lineno)
                v = self._value(args[1], lineno) & MASK32
                if ln.size == 4:
                    self._emit(pc, _enc_i(0b0010011, 0, rd, 0, v & 0xFFF))
                else:
                    hi, lo = _split_hi_lo(v)
                    self._emit(pc, _enc_u(0b0110111, rd, hi))
                    self._emit(pc + 4, _enc_i(0b0010011, 0, rd, rd, lo & 0xFFF))
            elif op == "j":
                self._need(args, 1, lineno, op)
                off = self._branch_off(args[0], pc, lineno, 21)
                self._emit(pc, _enc_j(0, off))
            elif op == "jr":
                self._need(args, 1, lineno, op)
                self._emit(pc, _enc_i(0b1100111, 0, 0, _reg(args[0], lineno), 0))
            elif op == "ret":
                self._emit(pc, _enc_i(0b1100111, 0, 0, 1, 0))
            elif op == "call":
                self._need(args, 1, lineno, op)
                off = self._branch_off(args[0], pc, lineno, 21)
                self._emit(pc, _enc_j(1, off))
            elif op == "beqz":
                self._need(args, 2, lineno, op)
                off = self._branch_off(args[1], pc, lineno, 13)
                self._emit(pc, _enc_b(0, _reg(args[0], lineno), 0, off))
            elif op == "bnez":
                self._need(args, 2, lineno, op)
                off = self._branch_off(args[1], pc, lineno, 13)
                self._emit(pc, _enc_b(1, _reg(args[0], lineno), 0, off))
            else:
                raise AsmError(lineno, f"unknown instruction {op!r}")

        entry = self.symbols.get("_start")
        if entry is None:
            entry = min(self.mem) if self.mem else self.base
        return entry, self.mem


def assemble(text: str, base: int = 0) -> tuple[int, dict[int, int]]:
    a = Assembler(base)
    a.feed(text)
    return a.assemble()


def assemble_file(path, base: int = 0) -> tuple[int, dict[int, int]]:
    with open(path) as fh:
        return assemble(fh.read(), base)
