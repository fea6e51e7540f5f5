"""Software co-emulation of a small pipelined core behind an MMIO shell,
with host-speed-independent timing (scale-down style clock gating)."""

from .isa import EV_COMMIT, STALL_NAMES, decode, disasm, load_image, save_image
from .pshell import PShell, PShellConfig, SbFifo
from .timing import DramModel, DramModelParams, HardwareTimer, IoRequest
from .dut import COVER_SIGNALS, CoverageBits, CycleOut, Pipeline, PipelineConfig
from .golden import Divergence, GoldenModel, LockstepChecker
from .kernel import HostCostModel, Kernel, RunSummary, WatchdogError
from .asm import AsmError, assemble, assemble_file
from .profiler import (Sample, SlowdownReport, decode_samples, pack_sample,
                       per_pc_table, stall_stack)
from .transport import (DirectTransport, FrameDecoder, FramedTransport,
                        MailboxBridge, TcpBridge)

__version__ = "0.1.0"

__all__ = [
    "AsmError", "COVER_SIGNALS", "CoverageBits", "CycleOut",
    "DirectTransport", "Divergence", "DramModel", "DramModelParams",
    "EV_COMMIT", "FrameDecoder", "FramedTransport", "GoldenModel",
    "HardwareTimer", "HostCostModel", "IoRequest", "Kernel",
    "LockstepChecker", "MailboxBridge", "PShell", "PShellConfig",
    "Pipeline", "PipelineConfig", "RunSummary", "STALL_NAMES", "Sample",
    "SbFifo", "SlowdownReport", "TcpBridge", "WatchdogError", "assemble",
    "assemble_file", "decode", "decode_samples", "disasm", "load_image",
    "pack_sample", "per_pc_table", "save_image", "stall_stack",
    "__version__",
]
