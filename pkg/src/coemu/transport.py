"""Byte-framed MMIO transport: wire codec, transports, and bridges.

Frame layout, little-endian fields:

    WRITE32 request:  0x01  addr[4]  data[4]     (9 bytes, no response)
    READ32  request:  0x02  addr[4]              (5 bytes)
    READ32  response: data[4]                    (4 bytes)

The decoder is incremental: partial frames sit in its buffer until the
rest arrives, so the stream may be chunked arbitrarily.  After garbage
it resynchronizes by skipping bytes until a known opcode starts the
next frame; every skipped byte is counted.  There is no checksum; the
modeled link is point-to-point.

Two transports present the same write32/read32 surface: DirectTransport
calls the shell, FramedTransport round-trips every access through the
codec (optionally fragmenting the byte stream) so a whole run can be
driven wire-exactly.  MailboxBridge is the inbound side for external
clients: it decodes frames into the kernel's serialized mailbox and
collects read responses in request order.
"""

from __future__ import annotations

import select
import socket
import threading

OP_WRITE32 = 0x01
OP_READ32 = 0x02

WRITE_FRAME_LEN = 9
READ_FRAME_LEN = 5
RESP_LEN = 4


def encode_write32(addr: int, data: int) -> bytes:
    return bytes([OP_WRITE32]) + (addr & 0xFFFFFFFF).to_bytes(4, "little") \
        + (data & 0xFFFFFFFF).to_bytes(4, "little")


def encode_read32(addr: int) -> bytes:
    return bytes([OP_READ32]) + (addr & 0xFFFFFFFF).to_bytes(4, "little")


def encode_response(value: int) -> bytes:
    return (value & 0xFFFFFFFF).to_bytes(4, "little")


def encode_requests(reqs) -> bytes:
    """Serialize ("write", addr, data) / ("read", addr) tuples."""
    out = bytearray()
    for r in reqs:
        if r[0] == "write":
            out += encode_write32(r[1], r[2])
        elif r[0] == "read":
            out += encode_read32(r[1])
        else:
            raise ValueError(f"unknown request kind {r[0]!r}")
    return bytes(out)


class FrameDecoder:
    """Incremental request decoder with skip-to-opcode resync."""

    def __init__(self):
        self._buf = bytearray()
        self.errors = 0          # bytes discarded while resynchronizing
        self.frames = 0

    def feed(self, data) -> list[tuple]:
        """Absorb bytes, return every complete request they finish."""
        self._buf += data
        out = []
        buf = self._buf
        while buf:
            op = buf[0]
            if op == OP_WRITE32:
                if len(buf) < WRITE_FRAME_LEN:
                    break
                addr = int.from_bytes(buf[1:5], "little")
                data_w = int.from_bytes(buf[5:9], "little")
                del buf[:WRITE_FRAME_LEN]
                out.append(("write", addr, data_w))
                self.frames += 1
            elif op == OP_READ32:
                if len(buf) < READ_FRAME_LEN:
                    break
                addr = int.from_bytes(buf[1:5], "little")
                del buf[:READ_FRAME_LEN]
                out.append(("read", addr))
                self.frames += 1
            else:
                del buf[0:1]
                self.errors += 1
        return out


class DirectTransport:
    """In-process transport: plain shell calls."""

    def __init__(self, shell):
        self.shell = shell

    def write32(self, addr: int, data: int) -> None:
        self.shell.mmio_write(addr, data)

    def read32(self, addr: int) -> int:
        return self.shell.mmio_read(addr)


class FramedTransport:
    """Transport that pushes every access through the wire codec.

    `chunker` may split any outgoing byte string into pieces, modeling
    stream fragmentation; decode must be chunking-invariant, which the
    round-trip here exercises on both directions of every access.
    """

    def __init__(self, shell, chunker=None):
        self.shell = shell
        self.decoder = FrameDecoder()
        self._chunker = chunker if chunker is not None else lambda b: (b,)
        self._resp = bytearray()

    def _ship(self, frame: bytes) -> None:
        for piece in self._chunker(frame):
            for req in self.decoder.feed(piece):
                self._apply(req)

    def _apply(self, req) -> None:
        if req[0] == "write":
            self.shell.mmio_write(req[1], req[2])
        else:
            value = self.shell.mmio_read(req[1])
            for piece in self._chunker(encode_response(value)):
                self._resp += piece

    def write32(self, addr: int, data: int) -> None:
        self._ship(encode_write32(addr, data))

    def read32(self, addr: int) -> int:
        self._ship(encode_read32(addr))
        if len(self._resp) < RESP_LEN:
            raise RuntimeError("read32 produced no response; stream desynchronized")
        value = int.from_bytes(self._resp[:RESP_LEN], "little")
        del self._resp[:RESP_LEN]
        return value


class MailboxBridge:
    """Feeds decoded wire frames into a kernel's MMIO mailbox.

    Writes are fire-and-forget.  Reads are answered in request order:
    the mailbox is FIFO and the kernel services one request per host
    work unit, so responses accumulate here already ordered.  pump()
    never blocks and never touches the shell itself.
    """

    def __init__(self, kernel):
        self.kernel = kernel
        self.decoder = FrameDecoder()
        self._tx = bytearray()
        self._lock = threading.Lock()

    def pump(self, data) -> None:
        for req in self.decoder.feed(data):
            if req[0] == "write":
                self.kernel.mailbox.append(("write", req[1], req[2], None))
            else:
                self.kernel.mailbox.append(("read", req[1], 0, self._reply))

    def _reply(self, value: int) -> None:
        with self._lock:
            self._tx += encode_response(value)

    def take_tx(self) -> bytes:
        with self._lock:
            out = bytes(self._tx)
            del self._tx[:]
        return out


class TcpBridge:
    """One-client TCP listener pumping frames into a MailboxBridge.

    start() binds and spawns a daemon thread; the caller keeps ticking
    the kernel on its own thread.  Only mailbox appends and the response
    buffer cross threads, both already serialized.
    """

    def __init__(self, kernel, port: int = 0, host: str = "127.0.0.1"):
        self.bridge = MailboxBridge(kernel)
        self._host = host
        self._port = port
        self._srv = None
        self._thread = None
        self._stop = threading.Event()

    def start(self) -> int:
        self._srv = socket.create_server((self._host, self._port))
        self._srv.settimeout(0.2)
        self._port = self._srv.getsockname()[1]
        self._thread = threading.Thread(target=self._serve, daemon=True)
        self._thread.start()
        return self._port

    def _serve(self) -> None:
        while not self._stop.is_set():
            try:
                conn, _ = self._srv.accept()
            except (TimeoutError, OSError):
                continue
            with conn:
                conn.setblocking(False)
                while not self._stop.is_set():
                    ready, _, _ = select.select([conn], [], [], 0.02)
                    if ready:
                        try:
                            data = conn.recv(4096)
                        except OSError:
                            break
                        if not data:
                            break
                        self.bridge.pump(data)
                    tx = self.bridge.take_tx()
                    if tx:
                        try:
                            conn.sendall(tx)
                        except OSError:
                            break

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
        if self._srv is not None:
            self._srv.close()
