"""Run configuration and system assembly.

A RunConfig pins down everything that determines a run: the program,
the pipeline features, the timing parameters, the FIFO geometry, the
host cost model, and the I/O scripts.  The architectural outcome is a
function of the program and timing parameters alone; the host cost
fields move host ticks around without touching it, and the tests lean
on that split.

Configs come from key=value files with flag overrides layered on top;
`build_system` turns one into a wired shell/DUT/kernel ready to run.
"""

from __future__ import annotations

import codecs
import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .asm import AsmError, assemble
from .dut import MUTATIONS, Pipeline, PipelineConfig
from .golden import GoldenModel, LockstepChecker
from .isa import load_image
from .kernel import HostCostModel, Kernel
from .pshell import PShell, PShellConfig
from .timing import DramModel, DramModelParams


class ConfigError(ValueError):
    """Bad key, bad value, or an impossible combination."""


@dataclass
class RunConfig:
    # program
    program: str = ""               # .img image or .s assembly source
    entry: int | None = None        # overrides the image entry point

    # pipeline features
    catchup: bool = False
    branch_predictor: str = "static-nt"   # or "2bit"
    icache_mode: str = "perfect"          # or "miss"
    icache_miss_latency: int = 4
    dmem_mode: str = "perfect"            # or "dram"
    mutation: str = ""                    # one of MUTATIONS, or empty

    # observation
    interval: int = 0               # sampling interval, 0 disables
    commits: bool = False           # emit commit records
    coverage: bool = False
    lockstep: bool = False          # implies commits

    # host cost model
    ticks_per_char: int = 1
    ticks_per_commit: int = 1
    ticks_per_sample: int = 5
    ticks_per_io: int = 2
    data_delay: int = 0
    ticks_idle: int = 1
    jitter_max: int = 0
    seed: int = 0

    # FIFO geometry
    fifo_depth: int = 16
    char_depth: int | None = None
    commit_depth: int | None = None
    sample_depth: int | None = None
    stdin_depth: int | None = None

    # DRAM timing
    dram_base: int = 20
    dram_banks: int = 8
    dram_bank_busy: int = 10
    dram_line: int = 64

    # I/O scripts and run bounds
    stdin: bytes = b""
    stdin_period: int = 0
    max_cycles: int = 0             # 0 = run to halt
    max_ticks: int = 0
    watchdog: int = 1_000_000

    def validate(self) -> None:
        if not self.program:
            raise ConfigError("no program given")
        if self.branch_predictor not in ("static-nt", "2bit"):
            raise ConfigError(f"unknown branch predictor {self.branch_predictor!r}")
        if self.icache_mode not in ("perfect", "miss"):
            raise ConfigError(f"unknown icache mode {self.icache_mode!r}")
        if self.dmem_mode not in ("perfect", "dram"):
            raise ConfigError(f"unknown dmem mode {self.dmem_mode!r}")
        if self.mutation and self.mutation not in MUTATIONS:
            raise ConfigError(f"unknown mutation {self.mutation!r}; "
                              f"choose from {', '.join(MUTATIONS)}")
        if self.interval < 0:
            raise ConfigError("interval must be >= 0")
        for name in ("ticks_per_char", "ticks_per_commit", "ticks_per_sample",
                     "ticks_per_io", "ticks_idle"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.fifo_depth < 2:
            raise ConfigError("fifo_depth must be >= 2")
        for name in ("char_depth", "commit_depth", "sample_depth", "stdin_depth"):
            d = getattr(self, name)
            if d is not None and d < 2:
                raise ConfigError(f"{name} must be >= 2")


_BOOL_WORDS = {"1": True, "true": True, "yes": True, "on": True,
               "0": False, "false": False, "no": False, "off": False}


def _cast(name: str, kind, raw: str):
    if kind in (bool, "bool"):
        try:
            return _BOOL_WORDS[raw.strip().lower()]
        except KeyError:
            raise ConfigError(f"{name}: expected a boolean, got {raw!r}") from None
    if kind in (int, "int"):
        try:
            return int(raw.strip(), 0)
        except ValueError:
            raise ConfigError(f"{name}: expected an integer, got {raw!r}") from None
    if kind is bytes or kind == "bytes":
        s = raw
        if len(s) >= 2 and s[0] == s[-1] and s[0] in "\"'":
            s = s[1:-1]
        return codecs.decode(s, "unicode_escape").encode("latin-1")
    return raw.strip()


def _field_kinds() -> dict[str, object]:
    kinds = {}
    for f in dataclasses.fields(RunConfig):
        t = f.type
        if t == "bool":
            kinds[f.name] = bool
        elif t in ("int", "int | None"):
            kinds[f.name] = int
        elif t == "bytes":
            kinds[f.name] = bytes
        else:
            kinds[f.name] = str
    return kinds


_KINDS = _field_kinds()


def parse_config_file(path) -> dict[str, str]:
    """key = value lines; # starts a comment; blank lines ignored."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, raw = body.partition("=")
        out[key.strip()] = raw.strip()
    return out


def make_config(file_kv: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Layer flag overrides on top of config-file values and validate.

    `file_kv` values are raw strings; `overrides` values are already
    typed (or raw strings, which get cast the same way).
    """
    cfg = RunConfig()
    for source in (file_kv or {}), (overrides or {}):
        for key, raw in source.items():
            if key not in _KINDS:
                raise ConfigError(f"unknown config key {key!r}")
            value = _cast(key, _KINDS[key], raw) if isinstance(raw, str) else raw
            setattr(cfg, key, value)
    cfg.validate()
    return cfg


def load_program(cfg: RunConfig) -> tuple[int, dict[int, int]]:
    path = Path(cfg.program)
    if not path.exists():
        raise ConfigError(f"program not found: {path}")
    if path.suffix == ".s":
        try:
            entry, mem = assemble(path.read_text())
        except AsmError:
            raise
    else:
        entry, mem = load_image(path)
    if cfg.entry is not None:
        entry = cfg.entry
    return entry, mem


@dataclass
class System:
    shell: PShell
    dut: Pipeline
    kernel: Kernel
    golden: GoldenModel | None
    config: RunConfig
    entry: int
    mem: dict[int, int]


def build_system(cfg: RunConfig, *, transport_factory=None) -> System:
    """Wire a complete shell/DUT/kernel stack from a validated config."""
    entry, mem = load_program(cfg)

    overrides = {}
    pcfg = PipelineConfig(
        catchup_enabled=cfg.catchup,
        branch_predictor=cfg.branch_predictor,
        icache_mode=cfg.icache_mode,
        icache_miss_latency=cfg.icache_miss_latency,
        dmem_mode=cfg.dmem_mode,
        sample_interval=cfg.interval,
        emit_commits=cfg.commits or cfg.lockstep,
        coverage_enabled=cfg.coverage,
        mutation=cfg.mutation or None,
    )
    for side, idx, depth in (("d2h", pcfg.fifo_char, cfg.char_depth),
                             ("d2h", pcfg.fifo_commit, cfg.commit_depth),
                             ("d2h", pcfg.fifo_sample, cfg.sample_depth),
                             ("h2d", pcfg.fifo_stdin, cfg.stdin_depth)):
        if depth is not None:
            overrides[(side, idx)] = depth
    shell = PShell(PShellConfig(fifo_depth=cfg.fifo_depth, depth_overrides=overrides))
    dut = Pipeline(entry, mem, shell, pcfg)

    dram = None
    if cfg.dmem_mode == "dram":
        dram = DramModel(DramModelParams(
            base_latency=cfg.dram_base, bank_count=cfg.dram_banks,
            bank_busy=cfg.dram_bank_busy, line_bytes=cfg.dram_line))

    golden = None
    checker = None
    if cfg.lockstep:
        golden = GoldenModel(entry, mem, cfg.stdin)
        checker = LockstepChecker(golden)

    cost = HostCostModel(
        ticks_per_char=cfg.ticks_per_char,
        ticks_per_commit=cfg.ticks_per_commit,
        ticks_per_sample=cfg.ticks_per_sample,
        ticks_per_io=cfg.ticks_per_io,
        data_delay=cfg.data_delay,
        ticks_idle=cfg.ticks_idle,
        jitter_max=cfg.jitter_max,
        jitter_seed=cfg.seed,
    )
    transport = transport_factory(shell) if transport_factory is not None else None
    kernel = Kernel(
        shell, dut, cost, dram=dram,
        stdin_script=cfg.stdin, stdin_period=cfg.stdin_period,
        char_fifo=pcfg.fifo_char, commit_fifo=pcfg.fifo_commit,
        sample_fifo=pcfg.fifo_sample, stdin_fifo=pcfg.fifo_stdin,
        stdin_status_csr=pcfg.csr_stdin_status,
        lockstep=checker, watchdog_gate_ticks=cfg.watchdog,
        transport=transport,
    )
    return System(shell, dut, kernel, golden, cfg, entry, mem)


def run_system(sys_: System):
    """Run to the configured bound and drain; returns the kernel."""
    cfg = sys_.config
    k = sys_.kernel
    k.run_until(
        cycles=cfg.max_cycles or None,
        halted=True,
        max_ticks=cfg.max_ticks or None,
    )
    k.drain_remaining()
    k.finish_lockstep()
    return k
