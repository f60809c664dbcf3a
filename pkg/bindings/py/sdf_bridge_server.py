"""Stdio bridge server: drives the sdfsim engine for foreign-language clients.

Speaks a length-prefixed little-endian frame protocol on stdin/stdout:

  request  = u32 payload_len | u8 opcode | u32 handle | body
  response = u32 payload_len | u8 status | body

Opcodes: 1 CREATE (body: UTF-8 config text) -> u32 handle
         2 STEP   (body: u8 has_poses [, u32 n, n*4 f64 poses]) ->
                  u32 n, u32 h, u32 w, student f32[n*h*w], clean f32[n*h*w]
         3 LOSSES (body: u32 n, u32 a, u32 d, f32 mu_deploy[n*a],
                  f32 mu_priv[n*a], f32 z_clean[n*d], f32 z_aug[n*d]) ->
                  f32 behavior, denoise, kl, total
         4 CLOSE  -> empty

Statuses: 0 ok, 1 config parse error, 2 bad handle, 3 busy, 4 internal.
Error responses carry a UTF-8 message as body.
"""

from __future__ import annotations

import struct
import sys

import numpy as np

from sdfsim.config import ConfigError, RunConfig
from sdfsim.session import Session
from sdfsim.training_math import behavior_loss, denoise_loss, kl_loss, total_loss

OP_CREATE, OP_STEP, OP_LOSSES, OP_CLOSE = 1, 2, 3, 4
OK, PARSE_ERROR, BAD_HANDLE, BUSY, INTERNAL = 0, 1, 2, 3, 4


class Server:
    def __init__(self):
        self.sessions: dict[int, Session] = {}
        self.next_handle = 1

    def handle_create(self, body: bytes) -> tuple[int, bytes]:
        try:
            config = RunConfig.from_text(body.decode("utf-8")).validate()
        except ConfigError as exc:
            return PARSE_ERROR, str(exc).encode("utf-8")
        session = Session(config)
        handle = self.next_handle
        self.next_handle += 1
        self.sessions[handle] = session
        return OK, struct.pack("<I", handle)

    def handle_step(self, handle: int, body: bytes) -> tuple[int, bytes]:
        session = self.sessions.get(handle)
        if session is None:
            return BAD_HANDLE, b"no such session handle"
        has_poses = body[0]
        poses = None
        if has_poses:
            (n,) = struct.unpack_from("<I", body, 1)
            poses = np.frombuffer(body, dtype="<f8", count=n * 4, offset=5).reshape(n, 4)
        out = session.step(poses=poses)
        n, _, h, w = out.student.shape
        header = struct.pack("<III", n, h, w)
        return OK, header + out.student.tobytes() + out.clean.tobytes()

    def handle_losses(self, handle: int, body: bytes) -> tuple[int, bytes]:
        if handle not in self.sessions:
            return BAD_HANDLE, b"no such session handle"
        n, a, d = struct.unpack_from("<III", body, 0)
        off = 12
        mu_deploy = np.frombuffer(body, "<f4", n * a, off).reshape(n, a)
        off += 4 * n * a
        mu_priv = np.frombuffer(body, "<f4", n * a, off).reshape(n, a)
        off += 4 * n * a
        z_clean = np.frombuffer(body, "<f4", n * d, off).reshape(n, d)
        off += 4 * n * d
        z_aug = np.frombuffer(body, "<f4", n * d, off).reshape(n, d)
        lb = behavior_loss(mu_deploy, mu_priv)
        ld = denoise_loss(z_clean, z_aug)
        lk = kl_loss(z_aug)
        lt = total_loss(lb, ld, lk)
        return OK, np.array([lb, ld, lk, lt], dtype="<f4").tobytes()

    def handle_close(self, handle: int) -> tuple[int, bytes]:
        if self.sessions.pop(handle, None) is None:
            return BAD_HANDLE, b"no such session handle"
        return OK, b""

    def dispatch(self, payload: bytes) -> tuple[int, bytes]:
        opcode = payload[0]
        (handle,) = struct.unpack_from("<I", payload, 1)
        body = payload[5:]
        try:
            if opcode == OP_CREATE:
                return self.handle_create(body)
            if opcode == OP_STEP:
                return self.handle_step(handle, body)
            if opcode == OP_LOSSES:
                return self.handle_losses(handle, body)
            if opcode == OP_CLOSE:
                return self.handle_close(handle)
            return INTERNAL, f"unknown opcode {opcode}".encode("utf-8")
        except Exception as exc:  # noqa: BLE001 - report, never crash the stream
            return INTERNAL, f"{type(exc).__name__}: {exc}".encode("utf-8")


def _read_exact(stream, n: int) -> bytes | None:
    chunks = []
    remaining = n
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            return None
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def main() -> int:
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    server = Server()
    while True:
        head = _read_exact(stdin, 4)
        if head is None:
            return 0
        (length,) = struct.unpack("<I", head)
        payload = _read_exact(stdin, length)
        if payload is None:
            return 0
        status, body = server.dispatch(payload)
        stdout.write(struct.pack("<I", 1 + len(body)) + bytes([status]) + body)
        stdout.flush()


if __name__ == "__main__":
    sys.exit(main())
