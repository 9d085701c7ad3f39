"""Minimal WebSocket (RFC 6455) framing for the live bridge.

Text frames only, no extensions, no fragmentation beyond what the UI needs.
Hand-rolled because the environment ships no WebSocket package; the browser
side uses the native WebSocket API.
"""
from __future__ import annotations

import base64
import hashlib
import os
import socket
import struct
from typing import Optional

GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class WsError(Exception):
    pass


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def read_http_request(sock: socket.socket, limit: int = 16384) -> dict[str, str]:
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            raise WsError("connection closed during handshake")
        data += chunk
        if len(data) > limit:
            raise WsError("oversized handshake")
    head = data.split(b"\r\n\r\n", 1)[0].decode("latin-1")
    lines = head.split("\r\n")
    headers = {"_request": lines[0]}
    for line in lines[1:]:
        name, _, value = line.partition(":")
        headers[name.strip().lower()] = value.strip()
    return headers


def server_handshake(sock: socket.socket) -> None:
    headers = read_http_request(sock)
    key = headers.get("sec-websocket-key")
    if not key or "upgrade" not in headers.get("connection", "").lower():
        sock.sendall(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        raise WsError("not a websocket upgrade")
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept_key(key)}\r\n\r\n"
    )
    sock.sendall(response.encode("ascii"))


def client_handshake(sock: socket.socket, host: str, path: str = "/") -> None:
    key = base64.b64encode(os.urandom(16)).decode("ascii")
    request = (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n\r\n"
    )
    sock.sendall(request.encode("ascii"))
    data = b""
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            raise WsError("closed during client handshake")
        data += chunk
    status = data.split(b"\r\n", 1)[0]
    if b"101" not in status:
        raise WsError(f"handshake rejected: {status!r}")


def encode_frame(payload: bytes, opcode: int = 0x1, mask: bool = False) -> bytes:
    header = bytearray([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0x00
    if n < 126:
        header.append(mask_bit | n)
    elif n < 1 << 16:
        header.append(mask_bit | 126)
        header += struct.pack(">H", n)
    else:
        header.append(mask_bit | 127)
        header += struct.pack(">Q", n)
    if mask:
        key = os.urandom(4)
        header += key
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return bytes(header) + payload


def send_text(sock: socket.socket, text: str, mask: bool = False) -> None:
    sock.sendall(encode_frame(text.encode("utf-8"), opcode=0x1, mask=mask))


def _read_exact(sock: socket.socket, n: int) -> bytes:
    data = b""
    while len(data) < n:
        chunk = sock.recv(n - len(data))
        if not chunk:
            raise WsError("connection closed")
        data += chunk
    return data


def recv_message(sock: socket.socket) -> Optional[str]:
    """Next text message; None once the peer closes. Responds to pings."""
    while True:
        head = _read_exact(sock, 2)
        opcode = head[0] & 0x0F
        masked = bool(head[1] & 0x80)
        length = head[1] & 0x7F
        if length == 126:
            (length,) = struct.unpack(">H", _read_exact(sock, 2))
        elif length == 127:
            (length,) = struct.unpack(">Q", _read_exact(sock, 8))
        key = _read_exact(sock, 4) if masked else b""
        payload = _read_exact(sock, length) if length else b""
        if masked:
            payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        if opcode == 0x8:  # close
            try:
                sock.sendall(encode_frame(payload, opcode=0x8))
            except OSError:
                pass
            return None
        if opcode == 0x9:  # ping
            sock.sendall(encode_frame(payload, opcode=0xA))
            continue
        if opcode == 0xA:  # pong
            continue
        if opcode in (0x1, 0x2, 0x0):
            return payload.decode("utf-8")
        raise WsError(f"unsupported opcode {opcode}")
