"""Binary bridge to a manipulation model running in another process.

Every frame is::

    b"GRSP" | version u8 (=1) | type u8 | payload length u32 LE | payload

Tensor payloads are ``dtype u8 (1 = float32) | rank u8 | rank * u32 LE dims``
followed by row-major little-endian float32 data. ``VJP_REQ`` carries two
tensors back to back (x, cotangent); ``ERROR`` carries a UTF-8 message.
``HELLO`` and ``HELLO_ACK`` carry four float32 values: height, width,
channels and the output-range code (see ``RANGE_CODES``); 0 means "any".

Transports are a child process speaking over its stdin/stdout, or TCP.
Run ``python -m grasp.serve --model conv`` to serve a built-in
surrogate on stdio, or add ``--tcp HOST:PORT``.
"""
from __future__ import annotations

import argparse
import logging
import os
import selectors
import shlex
import socket
import struct
import subprocess
import sys
import threading

import numpy as np

from ..errors import GraspError, ModelError, ProtocolError, ShapeError
from .base import ManipulationModel

log = logging.getLogger(__name__)

MAGIC = b"GRSP"
VERSION = 1
HEADER = struct.Struct("<4sBBI")
MAX_PAYLOAD = 1 << 30

HELLO = 0x01
HELLO_ACK = 0x02
FORWARD_REQ = 0x10
FORWARD_RESP = 0x11
VJP_REQ = 0x20
VJP_RESP = 0x21
ERROR = 0x7F
MESSAGE_TYPES = {HELLO, HELLO_ACK, FORWARD_REQ, FORWARD_RESP, VJP_REQ, VJP_RESP, ERROR}

DTYPE_F32 = 0x01
RANGE_CODES = {0.0: None, 1.0: (0.0, 1.0), 2.0: (-1.0, 1.0), 255.0: (0.0, 255.0)}


# -- codec --------------------------------------------------------------------

def encode_frame(msg_type: int, payload: bytes = b"", version: int = VERSION) -> bytes:
    return HEADER.pack(MAGIC, version, msg_type, len(payload)) + payload


def decode_header(raw: bytes) -> tuple[int, int]:
    """Validate a 10-byte header and return ``(type, payload_length)``."""
    if len(raw) != HEADER.size:
        raise ProtocolError(f"short header ({len(raw)} bytes)")
    magic, version, msg_type, length = HEADER.unpack(raw)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"protocol version mismatch: got {version}, expected {VERSION}")
    if msg_type not in MESSAGE_TYPES:
        raise ProtocolError(f"unknown message type 0x{msg_type:02x}")
    if length > MAX_PAYLOAD:
        raise ProtocolError(f"payload length {length} exceeds limit")
    return msg_type, length


def encode_tensor(arr) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    head = struct.pack("<BB", DTYPE_F32, arr.ndim) + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + arr.tobytes()


def decode_tensor(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one tensor starting at ``offset``; return it (float64) and the end offset."""
    try:
        dtype, rank = struct.unpack_from("<BB", buf, offset)
        offset += 2
        if dtype != DTYPE_F32:
            raise ProtocolError(f"unsupported dtype code {dtype}")
        dims = struct.unpack_from(f"<{rank}I", buf, offset)
        offset += 4 * rank
    except struct.error as exc:
        raise ProtocolError(f"truncated tensor header: {exc}") from None
    n = int(np.prod(dims, dtype=np.int64)) if rank else 1
    end = offset + 4 * n
    if end > len(buf):
        raise ProtocolError(f"tensor data truncated: need {end - offset} bytes, have {len(buf) - offset}")
    data = np.frombuffer(buf, dtype="<f4", count=n, offset=offset).reshape(dims)
    return data.astype(np.float64), end


def encode_hello(dims, range_code: float) -> bytes:
    h, w, c = (0 if d is None else d for d in dims)
    return struct.pack("<4f", h, w, c, range_code)


def decode_hello(payload: bytes):
    if len(payload) != 16:
        raise ProtocolError(f"HELLO payload must be 16 bytes, got {len(payload)}")
    h, w, c, code = struct.unpack("<4f", payload)
    if code not in RANGE_CODES:
        raise ProtocolError(f"unknown output-range code {code}")
    dims = tuple(None if v == 0 else int(v) for v in (h, w, c))
    return dims, RANGE_CODES[code]


def range_code(output_range) -> float:
    for code, rng in RANGE_CODES.items():
        if rng is not None and tuple(output_range) == rng:
            return code
    raise ProtocolError(f"output range {output_range} has no protocol code")


# -- transports ---------------------------------------------------------------

class _Channel:
    """Byte stream over a socket or a pair of pipe file descriptors."""

    def __init__(self, rfd, wfd, timeout, closer=None, sock=None):
        self.rfd, self.wfd = rfd, wfd
        self.timeout = timeout
        self.sock = sock
        self._closer = closer
        self._sel = None
        if sock is not None:
            sock.settimeout(timeout)
        else:
            self._sel = selectors.DefaultSelector()
            self._sel.register(rfd, selectors.EVENT_READ)

    def _recv_some(self, n):
        if self.sock is not None:
            try:
                return self.sock.recv(n)
            except socket.timeout:
                raise ModelError(f"bridge timed out after {self.timeout}s") from None
        if not self._sel.select(self.timeout):
            raise ModelError(f"bridge timed out after {self.timeout}s")
        return os.read(self.rfd, n)

    def recv_exact(self, n: int) -> bytes:
        chunks, got = [], 0
        while got < n:
            chunk = self._recv_some(min(n - got, 1 << 20))
            if not chunk:
                raise ProtocolError(f"connection closed mid-frame ({got}/{n} bytes)")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def send(self, data: bytes):
        try:
            if self.sock is not None:
                self.sock.sendall(data)
            else:
                view = memoryview(data)
                while view:
                    view = view[os.write(self.wfd, view):]
        except (BrokenPipeError, ConnectionError, OSError) as exc:
            raise ModelError(f"bridge send failed: {exc}") from exc

    def read_frame(self):
        msg_type, length = decode_header(self.recv_exact(HEADER.size))
        return msg_type, self.recv_exact(length)

    def close(self):
        if self._sel is not None:
            self._sel.close()
            self._sel = None
        if self._closer is not None:
            self._closer()
            self._closer = None


# -- client -------------------------------------------------------------------

class BridgeModel(ManipulationModel):
    """A model whose forward pass and VJP run on the far side of a bridge.

    One request is in flight at a time; use several connections for
    parallelism.
    """

    name = "bridge"

    def __init__(self, channel: _Channel, endpoint: str, dims=(None, None, None)):
        self._chan = channel
        self._lock = threading.Lock()
        self._closed = False
        self.endpoint = endpoint
        self._handshake(dims)

    def _handshake(self, dims):
        self._chan.send(encode_frame(HELLO, encode_hello(dims, 0.0)))
        msg_type, payload = self._receive()
        if msg_type == ERROR:
            self.close()
            raise ProtocolError(f"handshake rejected: {payload.decode('utf-8', 'replace')}")
        if msg_type != HELLO_ACK:
            self.close()
            raise ProtocolError(f"expected HELLO_ACK, got 0x{msg_type:02x}")
        try:
            server_dims, out_range = decode_hello(payload)
        except ProtocolError:
            self.close()
            raise
        super().__init__(server_dims, out_range or (0.0, 1.0))

    def _receive(self):
        try:
            return self._chan.read_frame()
        except ProtocolError:
            self.close()
            raise

    def _request(self, req_type, resp_type, payload, expect_shape):
        with self._lock:
            if self._closed:
                raise ModelError(f"bridge to {self.endpoint} is closed")
            self._chan.send(encode_frame(req_type, payload))
            msg_type, body = self._receive()
            if msg_type == ERROR:
                raise ModelError(f"remote model error: {body.decode('utf-8', 'replace')}")
            if msg_type != resp_type:
                self.close()
                raise ProtocolError(f"expected 0x{resp_type:02x}, got 0x{msg_type:02x}")
            try:
                arr, end = decode_tensor(body)
                if end != len(body):
                    raise ProtocolError(f"{len(body) - end} trailing bytes after tensor")
            except ProtocolError:
                self.close()
                raise
        if arr.shape != tuple(expect_shape):
            raise ShapeError(f"remote returned shape {arr.shape}, expected {tuple(expect_shape)}")
        return arr

    def _forward(self, x):
        return self._request(FORWARD_REQ, FORWARD_RESP, encode_tensor(x), x.shape)

    def _vjp(self, x, c):
        return self._request(VJP_REQ, VJP_RESP, encode_tensor(x) + encode_tensor(c), x.shape)

    def describe(self):
        d = super().describe()
        d["endpoint"] = self.endpoint
        return d

    def close(self):
        if not self._closed:
            self._closed = True
            try:
                self._chan.close()
            except OSError:
                pass


def _parse_tcp(addr: str):
    host, _, port = addr.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"bad TCP address {addr!r}, expected HOST:PORT")
    return host, int(port)


def bridge_connect(endpoint, timeout: float = 30.0, dims=(None, None, None)) -> BridgeModel:
    """Open a bridge and perform the handshake.

    ``endpoint`` is ``"tcp://HOST:PORT"``, ``"exec:COMMAND ARGS"`` or an argv
    list for a child process speaking the protocol on stdio.
    """
    if isinstance(endpoint, str) and endpoint.startswith("tcp://"):
        host, port = _parse_tcp(endpoint[len("tcp://"):])
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ModelError(f"cannot connect to {endpoint}: {exc}") from exc
        sock.settimeout(timeout)
        chan = _Channel(None, None, timeout, closer=sock.close, sock=sock)
        return BridgeModel(chan, endpoint, dims)

    if isinstance(endpoint, str):
        if not endpoint.startswith("exec:"):
            raise ValueError(f"unrecognised bridge endpoint {endpoint!r}")
        argv = shlex.split(endpoint[len("exec:"):])
        label = endpoint
    else:
        argv = list(endpoint)
        label = "exec:" + shlex.join(argv)
    try:
        proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0)
    except OSError as exc:
        raise ModelError(f"cannot start {argv!r}: {exc}") from exc

    def closer():
        for f in (proc.stdin, proc.stdout):
            try:
                f.close()
            except OSError:
                pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()

    chan = _Channel(proc.stdout.fileno(), proc.stdin.fileno(), timeout, closer=closer)
    return BridgeModel(chan, label, dims)


# -- server -------------------------------------------------------------------

def serve(model: ManipulationModel, chan: _Channel):
    """Answer requests on one connection until EOF or a malformed frame."""
    from ..image import ImageTensor

    while True:
        try:
            head = chan.recv_exact(HEADER.size)
        except ProtocolError:
            return  # peer closed cleanly between frames (or mid-header)
        try:
            msg_type, length = decode_header(head)
            payload = chan.recv_exact(length)
            if msg_type == HELLO:
                decode_hello(payload)
                ack = encode_hello(model.input_dims, range_code(model.output_range))
                chan.send(encode_frame(HELLO_ACK, ack))
            elif msg_type == FORWARD_REQ:
                x, _ = decode_tensor(payload)
                y = model.forward(ImageTensor(x))
                chan.send(encode_frame(FORWARD_RESP, encode_tensor(y.data)))
            elif msg_type == VJP_REQ:
                x, off = decode_tensor(payload)
                c, _ = decode_tensor(payload, off)
                g = model.vjp(ImageTensor(x), ImageTensor(c))
                chan.send(encode_frame(VJP_RESP, encode_tensor(g.data)))
            else:
                raise ProtocolError(f"unexpected request type 0x{msg_type:02x}")
        except ProtocolError as exc:
            log.warning("closing bridge connection: %s", exc)
            try:
                chan.send(encode_frame(ERROR, str(exc).encode()))
            except GraspError:
                pass
            return
        except GraspError as exc:
            chan.send(encode_frame(ERROR, str(exc).encode()))


def serve_stdio(model: ManipulationModel):
    chan = _Channel(sys.stdin.buffer.fileno(), sys.stdout.buffer.fileno(), None)
    try:
        serve(model, chan)
    finally:
        chan.close()


def serve_tcp(model: ManipulationModel, host="127.0.0.1", port=0, ready=None, stop=None):
    """Accept connections forever (or until ``stop`` is set), one thread each.

    ``ready`` is called with the bound ``(host, port)`` once listening.
    """
    with socket.create_server((host, port)) as srv:
        srv.settimeout(0.2)
        if ready is not None:
            ready(srv.getsockname()[:2])
        while stop is None or not stop.is_set():
            try:
                conn, _ = srv.accept()
            except socket.timeout:
                continue
            conn.settimeout(None)
            chan = _Channel(None, None, None, closer=conn.close, sock=conn)
            threading.Thread(target=_serve_and_close, args=(model, chan), daemon=True).start()


def _serve_and_close(model, chan):
    try:
        serve(model, chan)
    finally:
        chan.close()


def main(argv=None):
    from .surrogates import build_model

    p = argparse.ArgumentParser(description="serve a built-in surrogate over the grasp bridge")
    p.add_argument("--model", default="identity")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--tcp", metavar="HOST:PORT", help="listen on TCP instead of stdio")
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr)
    model = build_model(args.model, seed=args.seed)
    if args.tcp:
        host, port = _parse_tcp(args.tcp)
        serve_tcp(model, host, port, ready=lambda addr: print(f"listening on {addr[0]}:{addr[1]}",
                                                              file=sys.stderr, flush=True))
    else:
        serve_stdio(model)


if __name__ == "__main__":
    main()
