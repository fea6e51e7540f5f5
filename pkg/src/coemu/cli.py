"""Command-line driver.

Subcommands: asm, run, profile, verify, coverage, covergen.  Run-style
commands take a key=value config file plus flag overrides; every flag
wins over the file.  Exit codes: 0 ok, 1 config error, 2 lockstep
divergence, 3 parse error, 4 watchdog timeout.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .asm import AsmError, assemble
from .dut import COVER_SIGNALS, COVER_WORDS, MUTATIONS
from .isa import save_image
from .kernel import WatchdogError
from . import profiler
from .runner import (ConfigError, RunConfig, build_system, make_config,
                     parse_config_file, run_system)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_PARSE = 3
EXIT_WATCHDOG = 4


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("program", nargs="?", help="program image (.img) or assembly (.s)")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--stdin-file", help="file whose bytes feed the getchar stream")
    g = p.add_argument_group("config overrides")
    for f in dataclasses.fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.name == "program":
            continue
        if f.type == "bool":
            g.add_argument(flag, dest=f.name, action="store_const", const="true")
            g.add_argument("--no-" + f.name.replace("_", "-"),
                           dest=f.name, action="store_const", const="false")
        else:
            g.add_argument(flag, dest=f.name, metavar="V")


def _gather_config(args) -> RunConfig:
    file_kv = parse_config_file(args.config) if args.config else {}
    overrides = {}
    for f in dataclasses.fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            overrides[f.name] = v
    if args.stdin_file:
        overrides["stdin"] = Path(args.stdin_file).read_bytes()
    return make_config(file_kv, overrides)


def _finish(kernel, *, check_divergence: bool) -> int:
    sh = kernel.shell
    if sh.violations:
        for line in sh.violation_lines():
            print(line, file=sys.stderr)
    if check_divergence and kernel.divergence is not None:
        print(kernel.divergence.describe(), file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


def _summary_dict(kernel) -> dict:
    s = kernel.summary()
    out = s.to_dict()
    out["slowdown"] = s.slowdown
    out["exit_code"] = kernel.exit_code
    out["halted"] = kernel.dut.halted
    out["halt_reason"] = kernel.dut.halt_reason
    out["chars"] = bytes(kernel.drained.chars).decode("latin-1")
    out["violations"] = len(kernel.shell.violations)
    return out


def cmd_asm(args) -> int:
    text = Path(args.source).read_text()
    entry, mem = assemble(text)
    save_image(args.output, entry, mem)
    print(f"{args.output}: {len(mem)} words, entry 0x{entry:08X}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _gather_config(args)
    sys_ = build_system(cfg)
    bridge = None
    if args.listen is not None:
        from .transport import TcpBridge
        bridge = TcpBridge(sys_.kernel, args.listen)
        port = bridge.start()
        print(f"listening on 127.0.0.1:{port}", file=sys.stderr)
    try:
        kernel = run_system(sys_)
    finally:
        if bridge is not None:
            bridge.stop()
    payload = json.dumps(_summary_dict(kernel), indent=2)
    if args.json:
        Path(args.json).write_text(payload + "\n")
    else:
        print(payload)
    return _finish(kernel, check_divergence=cfg.lockstep)


def cmd_profile(args) -> int:
    cfg = _gather_config(args)
    if cfg.interval == 0:
        cfg = dataclasses.replace(cfg, interval=1)
    sys_ = build_system(cfg)
    kernel = run_system(sys_)
    samples = profiler.decode_samples(kernel.drained.sample_words)
    stack = profiler.stall_stack(samples, cfg.interval)
    table = profiler.per_pc_table(samples, cfg.interval)
    report = profiler.SlowdownReport(cfg.interval, kernel.host_tick, kernel.dut_cycle)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    profiler.write_stall_stack_csv(out / "stall_stack.csv", stack)
    profiler.write_per_pc_csv(out / "per_pc.csv", table)
    profiler.write_slowdown_json(out / "slowdown.json", [report])

    total = sum(stack.values())
    print(f"cycles {kernel.dut_cycle}  ticks {kernel.host_tick}  "
          f"slowdown {report.slowdown:.2f}  samples {len(samples)}")
    for name, cycles in sorted(stack.items(), key=lambda kv: -kv[1]):
        print(f"  {name:26s} {cycles:10d}  {100.0 * cycles / total:5.1f}%")
    return _finish(kernel, check_divergence=cfg.lockstep)


def cmd_verify(args) -> int:
    cfg = _gather_config(args)
    if not cfg.lockstep:
        cfg = dataclasses.replace(cfg, lockstep=True)
        cfg.validate()
    sys_ = build_system(cfg)
    kernel = run_system(sys_)
    code = _finish(kernel, check_divergence=True)
    if code == EXIT_OK:
        n = len(kernel.drained.commit_words) // 4
        print(f"lockstep ok: {n} commits, {kernel.dut_cycle} cycles, "
              f"exit {kernel.exit_code}")
    return code


def cmd_coverage(args) -> int:
    cfg = _gather_config(args)
    if not cfg.coverage:
        cfg = dataclasses.replace(cfg, coverage=True)
        cfg.validate()
    sys_ = build_system(cfg)
    kernel = run_system(sys_)
    rep = sys_.dut.cover_report()
    words = [sys_.dut.cover_read_word(k) for k in range(COVER_WORDS)]
    print(f"covered {rep['covered']}/{rep['total']}")
    print("bitmap " + " ".join(f"0x{w:08X}" for w in words))
    for name in rep["uncovered"]:
        print(f"  uncovered: {name}")
    if args.json:
        rep["bitmap"] = words
        rep["signals"] = list(COVER_SIGNALS)
        Path(args.json).write_text(json.dumps(rep, indent=2) + "\n")
    return _finish(kernel, check_divergence=cfg.lockstep)


def cmd_covergen(args) -> int:
    from . import covergen
    return covergen.main_from_args(args)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coemu")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("asm", help="assemble a source file into an image")
    p.add_argument("source")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_asm)

    p = sub.add_parser("run", help="run a program and print a summary")
    _add_config_flags(p)
    p.add_argument("--json", help="write the summary JSON here instead of stdout")
    p.add_argument("--listen", type=int, metavar="PORT",
                   help="serve the wire bridge on a TCP port during the run")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("profile", help="run with sampling and write profile reports")
    _add_config_flags(p)
    p.add_argument("--out", default=".", help="report directory")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("verify", help="run against the reference model in lockstep")
    _add_config_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("coverage", help="run with toggle coverage and report it")
    _add_config_flags(p)
    p.add_argument("--json", help="also write the report as JSON here")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("covergen", help="extract coverpoints from SystemVerilog files")
    p.add_argument("files", nargs="+")
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--include-static", action="store_true",
                   help="keep statically-true/false conditions in the list")
    p.add_argument("--per-case-arm", action="store_true",
                   help="emit one point per case arm instead of per select")
    p.set_defaults(func=cmd_covergen)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AsmError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except WatchdogError as e:
        print(f"watchdog: {e}", file=sys.stderr)
        return EXIT_WATCHDOG
    except FileNotFoundError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
