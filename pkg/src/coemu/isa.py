"""RV32I subset decode and arithmetic helpers.

The supported subset: LUI, AUIPC, JAL, JALR, the conditional branches,
LW, SW, the register and immediate ALU ops (without the unsigned
set-less-than pair), and ECALL/EBREAK.  Anything else decodes to ILLEGAL;
nothing here raises on bad words, the pipeline decides what an ILLEGAL
commit means.
"""

from __future__ import annotations

MASK32 = 0xFFFFFFFF

# Stall classes, one of which labels every non-commit cycle.
STALL_NAMES = (
    "commit",
    "load-arith",
    "load-control",
    "catchup-dep",
    "branch-mispredict",
    "catchup-mispredict-flush",
    "icache-miss",
    "dcache-miss",
    "frontend-empty",
    "syscall-wait",
    "raw-other",
)

EV_COMMIT = 0
EV_LOAD_ARITH = 1
EV_LOAD_CONTROL = 2
EV_CATCHUP_DEP = 3
EV_BRANCH_MISPREDICT = 4
EV_CATCHUP_FLUSH = 5
EV_ICACHE_MISS = 6
EV_DCACHE_MISS = 7
EV_FRONTEND_EMPTY = 8
EV_SYSCALL_WAIT = 9
EV_RAW_OTHER = 10


def u32(x: int) -> int:
    return x & MASK32

def s32(x: int) -> int:
    x &= MASK32
    return x - 0x100000000 if x & 0x80000000 else x

def sext(value: int, bits: int) -> int:
    sign = 1 << (bits - 1)
    return (value & (sign - 1)) - (value & sign)


ABI_NAMES = {}
for _i in range(32):
    ABI_NAMES[f"x{_i}"] = _i
ABI_NAMES.update({
    "zero": 0, "ra": 1, "sp": 2, "gp": 3, "tp": 4,
    "t0": 5, "t1": 6, "t2": 7, "s0": 8, "fp": 8, "s1": 9,
    "a0": 10, "a1": 11, "a2": 12, "a3": 13, "a4": 14, "a5": 15,
    "a6": 16, "a7": 17,
    "s2": 18, "s3": 19, "s4": 20, "s5": 21, "s6": 22, "s7": 23,
    "s8": 24, "s9": 25, "s10": 26, "s11": 27,
    "t3": 28, "t4": 29, "t5": 30, "t6": 31,
})

REG_NAMES = [f"x{i}" for i in range(32)]


class Instr:
    """One decoded instruction with scheduling flags precomputed."""

    __slots__ = (
        "word", "op", "rd", "rs1", "rs2", "imm",
        "writes_rd", "reads_rs1", "reads_rs2",
        "is_load", "is_store", "is_branch", "is_jump",
        "is_ecall", "is_ebreak", "illegal", "catchup_ok",
    )

    def __init__(self, word, op, rd=0, rs1=0, rs2=0, imm=0):
        self.word = word
        self.op = op
        self.rd = rd
        self.rs1 = rs1
        self.rs2 = rs2
        self.imm = imm
        self.is_load = op == "lw"
        self.is_store = op == "sw"
        self.is_branch = op in _BRANCH_OPS
        self.is_jump = op in ("jal", "jalr")
        self.is_ecall = op == "ecall"
        self.is_ebreak = op == "ebreak"
        self.illegal = op == "illegal"
        self.writes_rd = rd != 0 and (
            op in _ALU_OPS or self.is_load or self.is_jump or op in ("lui", "auipc")
        )
        self.reads_rs1 = op in _READS_RS1
        self.reads_rs2 = op in _READS_RS2
        # Integer ALU ops and conditional branches may ride the catch-up path.
        self.catchup_ok = op in _ALU_OPS or self.is_branch

    def __repr__(self):
        return f"Instr({disasm(self)!r})"


_ALU_OPS = frozenset((
    "addi", "slti", "andi", "ori", "xori", "slli", "srli", "srai",
    "add", "sub", "slt", "and", "or", "xor", "sll", "srl", "sra",
    "lui", "auipc",
))
_BRANCH_OPS = frozenset(("beq", "bne", "blt", "bge", "bltu", "bgeu"))
_READS_RS1 = frozenset((
    "addi", "slti", "andi", "ori", "xori", "slli", "srli", "srai",
    "add", "sub", "slt", "and", "or", "xor", "sll", "srl", "sra",
    "lw", "sw", "jalr",
)) | _BRANCH_OPS
_READS_RS2 = frozenset(("add", "sub", "slt", "and", "or", "xor", "sll", "srl", "sra", "sw")) | _BRANCH_OPS

_OPIMM_F3 = {0b000: "addi", 0b010: "slti", 0b100: "xori", 0b110: "ori", 0b111: "andi"}
_OP_F3 = {
    (0b000, 0): "add", (0b000, 0b0100000): "sub",
    (0b001, 0): "sll",
    (0b010, 0): "slt",
    (0b100, 0): "xor",
    (0b101, 0): "srl", (0b101, 0b0100000): "sra",
    (0b110, 0): "or",
    (0b111, 0): "and",
}
_BRANCH_F3 = {0b000: "beq", 0b001: "bne", 0b100: "blt", 0b101: "bge", 0b110: "bltu", 0b111: "bgeu"}

_ILLEGAL_CACHE: dict[int, Instr] = {}
_DECODE_CACHE: dict[int, Instr] = {}


def decode(word: int) -> Instr:
    word &= MASK32
    hit = _DECODE_CACHE.get(word)
    if hit is not None:
        return hit
    instr = _decode_raw(word)
    if len(_DECODE_CACHE) < 1 << 16:
        _DECODE_CACHE[word] = instr
    return instr


def _decode_raw(word):
    opcode = word & 0x7F
    rd = (word >> 7) & 0x1F
    f3 = (word >> 12) & 0x7
    rs1 = (word >> 15) & 0x1F
    rs2 = (word >> 20) & 0x1F
    f7 = (word >> 25) & 0x7F

    if opcode == 0b0110111:
        return Instr(word, "lui", rd=rd, imm=u32(word & 0xFFFFF000))
    if opcode == 0b0010111:
        return Instr(word, "auipc", rd=rd, imm=u32(word & 0xFFFFF000))
    if opcode == 0b1101111:
        imm = sext(((word >> 31) << 20) | (((word >> 12) & 0xFF) << 12)
                   | (((word >> 20) & 1) << 11) | (((word >> 21) & 0x3FF) << 1), 21)
        return Instr(word, "jal", rd=rd, imm=imm)
    if opcode == 0b1100111 and f3 == 0:
        return Instr(word, "jalr", rd=rd, rs1=rs1, imm=sext(word >> 20, 12))
    if opcode == 0b1100011:
        op = _BRANCH_F3.get(f3)
        if op is None:
            return Instr(word, "illegal")
        imm = sext(((word >> 31) << 12) | (((word >> 7) & 1) << 11)
                   | (((word >> 25) & 0x3F) << 5) | (((word >> 8) & 0xF) << 1), 13)
        return Instr(word, op, rs1=rs1, rs2=rs2, imm=imm)
    if opcode == 0b0000011 and f3 == 0b010:
        return Instr(word, "lw", rd=rd, rs1=rs1, imm=sext(word >> 20, 12))
    if opcode == 0b0100011 and f3 == 0b010:
        imm = sext((f7 << 5) | rd, 12)
        return Instr(word, "sw", rs1=rs1, rs2=rs2, imm=imm)
    if opcode == 0b0010011:
        if f3 == 0b001 and f7 == 0:
            return Instr(word, "slli", rd=rd, rs1=rs1, imm=rs2)
        if f3 == 0b101 and f7 == 0:
            return Instr(word, "srli", rd=rd, rs1=rs1, imm=rs2)
        if f3 == 0b101 and f7 == 0b0100000:
            return Instr(word, "srai", rd=rd, rs1=rs1, imm=rs2)
        op = _OPIMM_F3.get(f3)
        if op is None:
            return Instr(word, "illegal")
        return Instr(word, op, rd=rd, rs1=rs1, imm=sext(word >> 20, 12))
    if opcode == 0b0110011:
        op = _OP_F3.get((f3, f7))
        if op is None:
            return Instr(word, "illegal")
        return Instr(word, op, rd=rd, rs1=rs1, rs2=rs2)
    if opcode == 0b1110011 and f3 == 0 and rd == 0 and rs1 == 0:
        if (word >> 20) == 0:
            return Instr(word, "ecall")
        if (word >> 20) == 1:
            return Instr(word, "ebreak")
    return Instr(word, "illegal")


def alu_eval(op: str, a: int, b: int) -> int:
    """Compute an ALU result; a and b are unsigned 32-bit values."""
    if op in ("add", "addi"):
        return u32(a + b)
    if op == "sub":
        return u32(a - b)
    if op in ("and", "andi"):
        return a & b
    if op in ("or", "ori"):
        return a | b
    if op in ("xor", "xori"):
        return a ^ b
    if op in ("slt", "slti"):
        return 1 if s32(a) < s32(b) else 0
    if op in ("sll", "slli"):
        return u32(a << (b & 31))
    if op in ("srl", "srli"):
        return a >> (b & 31)
    if op in ("sra", "srai"):
        return u32(s32(a) >> (b & 31))
    raise ValueError(f"not an ALU op: {op}")


def branch_taken(op: str, a: int, b: int) -> bool:
    if op == "beq":
        return a == b
    if op == "bne":
        return a != b
    if op == "blt":
        return s32(a) < s32(b)
    if op == "bge":
        return s32(a) >= s32(b)
    if op == "bltu":
        return a < b
    if op == "bgeu":
        return a >= b
    raise ValueError(f"not a branch: {op}")


def disasm(instr: Instr) -> str:
    op = instr.op
    if op == "illegal":
        return f".word 0x{instr.word:08X}"
    if op in ("lui", "auipc"):
        return f"{op} x{instr.rd}, 0x{(instr.imm >> 12) & 0xFFFFF:X}"
    if op == "jal":
        return f"jal x{instr.rd}, {instr.imm}"
    if op == "jalr":
        return f"jalr x{instr.rd}, {instr.imm}(x{instr.rs1})"
    if instr.is_branch:
        return f"{op} x{instr.rs1}, x{instr.rs2}, {instr.imm}"
    if op == "lw":
        return f"lw x{instr.rd}, {instr.imm}(x{instr.rs1})"
    if op == "sw":
        return f"sw x{instr.rs2}, {instr.imm}(x{instr.rs1})"
    if op in ("ecall", "ebreak"):
        return op
    if op in ("slli", "srli", "srai") or op.endswith("i"):
        return f"{op} x{instr.rd}, x{instr.rs1}, {instr.imm}"
    return f"{op} x{instr.rd}, x{instr.rs1}, x{instr.rs2}"


def load_image(path) -> tuple[int, dict[int, int]]:
    """Parse a program image: lines of '<hex-addr>: <hex-word>' plus 'entry: <hex-addr>'."""
    entry = None
    mem: dict[int, int] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition(":")
            key = key.strip()
            value = value.strip()
            if not value:
                raise ValueError(f"{path}:{lineno}: malformed image line")
            if key.lower() == "entry":
                entry = int(value, 16)
                continue
            addr = int(key, 16)
            if addr & 3:
                raise ValueError(f"{path}:{lineno}: unaligned image address 0x{addr:X}")
            mem[addr] = int(value, 16) & MASK32
    if entry is None:
        raise ValueError(f"{path}: image has no entry line")
    return entry, mem


def save_image(path, entry: int, mem: dict[int, int]) -> None:
    with open(path, "w") as fh:
        fh.write(f"entry: {entry:08X}\n")
        for addr in sorted(mem):
            fh.write(f"{addr:08X}: {mem[addr] & MASK32:08X}\n")
