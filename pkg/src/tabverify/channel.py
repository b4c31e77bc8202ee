"""Wire transport: length-prefixed canonical JSON frames.

Every frame is {"type": ..., "session": ..., "body": {...}} serialized as
canonical JSON (sorted keys, no whitespace) behind a 4-byte big-endian
length. Three transports share the framing: an in-process loopback that
drives a handler function, a queue pair, and TCP sockets.
"""

import json
import queue
import socket
import struct


class ChannelError(Exception):
    pass


MAX_FRAME = 64 * 1024 * 1024


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def encode_frame(obj):
    blob = canonical_json(obj).encode("utf-8")
    if len(blob) > MAX_FRAME:
        raise ChannelError("frame too large")
    return struct.pack(">I", len(blob)) + blob


def decode_frame(blob):
    if len(blob) < 4:
        raise ChannelError("truncated frame header")
    (n,) = struct.unpack(">I", blob[:4])
    if len(blob) != 4 + n:
        raise ChannelError("frame length mismatch")
    try:
        return json.loads(blob[4:].decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ChannelError(f"bad frame payload: {exc}") from exc


def make_frame(ftype, session, body):
    return {"type": ftype, "session": session, "body": body}


class LoopbackChannel:
    """Synchronous request/response against an in-process handler.

    Frames still round-trip through the byte encoding, so anything that
    would break on a socket breaks here too.
    """

    def __init__(self, handler):
        self.handler = handler
        self._reply = None

    def send(self, frame):
        incoming = decode_frame(encode_frame(frame))
        reply = self.handler(incoming)
        self._reply = decode_frame(encode_frame(reply))

    def recv(self):
        if self._reply is None:
            raise ChannelError("no pending reply")
        reply, self._reply = self._reply, None
        return reply

    def close(self):
        pass


class QueuePairChannel:
    """One endpoint of an in-process duplex queue pair."""

    def __init__(self, inbox, outbox, timeout=30.0):
        self.inbox = inbox
        self.outbox = outbox
        self.timeout = timeout

    @classmethod
    def pair(cls, timeout=30.0):
        a, b = queue.Queue(), queue.Queue()
        return cls(a, b, timeout), cls(b, a, timeout)

    def send(self, frame):
        self.outbox.put(encode_frame(frame))

    def recv(self):
        try:
            blob = self.inbox.get(timeout=self.timeout)
        except queue.Empty as exc:
            raise ChannelError("channel timed out") from exc
        if blob is None:
            raise ChannelError("channel closed")
        return decode_frame(blob)

    def close(self):
        self.outbox.put(None)


class SocketChannel:
    def __init__(self, sock):
        self.sock = sock

    @classmethod
    def connect(cls, host, port, timeout=30.0):
        s = socket.create_connection((host, port), timeout=timeout)
        return cls(s)

    def send(self, frame):
        try:
            self.sock.sendall(encode_frame(frame))
        except OSError as exc:
            raise ChannelError(f"send failed: {exc}") from exc

    def _read_exact(self, n):
        buf = b""
        while len(buf) < n:
            try:
                chunk = self.sock.recv(n - len(buf))
            except OSError as exc:
                raise ChannelError(f"recv failed: {exc}") from exc
            if not chunk:
                raise ChannelError("peer closed the connection")
            buf += chunk
        return buf

    def recv(self):
        header = self._read_exact(4)
        (n,) = struct.unpack(">I", header)
        if n > MAX_FRAME:
            raise ChannelError("frame too large")
        return decode_frame(header + self._read_exact(n))

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass
