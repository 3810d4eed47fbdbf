"""RemoteEnv: reset/step/close against an ssl-pathlab protocol server.

The client never does numeric work beyond JSON decoding, so observations
and rewards mirror the server bit-for-bit (floats are serialized with full
precision on both ends). One request is in flight at a time; the lifecycle
is make -> (reset -> step*)* -> close.
"""

from __future__ import annotations

import json
import socket
import subprocess
import sys

ACTION_DIM = 6

DEFAULT_SERVER_CMD = [sys.executable, "-m", "ssl_pathlab", "serve"]


class ProtocolError(RuntimeError):
    """Error reported by the server or a broken transport."""


class _StdioTransport:
    def __init__(self, cmd):
        self.proc = subprocess.Popen(
            cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True)

    def request(self, payload: str) -> str:
        if self.proc.poll() is not None:
            raise ProtocolError("server process exited")
        self.proc.stdin.write(payload + "\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise ProtocolError("server closed the stream")
        return line

    def close(self):
        try:
            if self.proc.poll() is None:
                self.proc.stdin.close()
                self.proc.wait(timeout=10)
        except Exception:
            self.proc.kill()


class _TcpTransport:
    def __init__(self, host: str, port: int):
        self.sock = socket.create_connection((host, port))
        self.reader = self.sock.makefile("r", encoding="utf-8")
        self.writer = self.sock.makefile("w", encoding="utf-8")

    def request(self, payload: str) -> str:
        self.writer.write(payload + "\n")
        self.writer.flush()
        line = self.reader.readline()
        if not line:
            raise ProtocolError("server closed the connection")
        return line

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


class RemoteEnv:
    """One remote environment session; not shareable across threads."""

    def __init__(self, transport, env_name: str, obs_dim: int):
        self._transport = transport
        self.env_name = env_name
        self.observation_dim = obs_dim
        self.action_dim = ACTION_DIM
        self._closed = False

    # -- protocol plumbing --------------------------------------------------

    def _rpc(self, request: dict) -> dict:
        if self._closed:
            raise ProtocolError("session already closed")
        line = self._transport.request(json.dumps(request))
        try:
            response = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"bad server response: {exc}")
        if "error" in response:
            raise ProtocolError(response["error"])
        return response

    # -- episodic API --------------------------------------------------------

    def reset(self, seed: int | None = None) -> list[float]:
        request = {"cmd": "reset"}
        if seed is not None:
            request["seed"] = int(seed)
        return self._rpc(request)["obs"]

    def step(self, action):
        action = [float(a) for a in action]
        if len(action) != self.action_dim:
            raise ValueError(f"action must have {self.action_dim} "
                             f"components")
        r = self._rpc({"cmd": "step", "action": action})
        info = {"breakdown": r["breakdown"]}
        return (r["obs"], r["reward"], r["terminated"], r["truncated"],
                info)

    def close(self) -> None:
        if self._closed:
            return
        try:
            self._rpc({"cmd": "close"})
        finally:
            self._closed = True
            self._transport.close()

    def __enter__(self) -> "RemoteEnv":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def make(env_name: str, config: dict | None = None,
         server_cmd: list[str] | None = None,
         address: tuple[str, int] | None = None) -> RemoteEnv:
    """Start (or connect to) a server and send the make handshake.

    By default a server subprocess is spawned over stdio; pass
    ``address=(host, port)`` to use a running TCP server instead.
    """
    if address is not None:
        transport = _TcpTransport(*address)
    else:
        transport = _StdioTransport(server_cmd or DEFAULT_SERVER_CMD)
    request = {"cmd": "make", "env": env_name}
    if config:
        request["config"] = dict(config)
    try:
        line = transport.request(json.dumps(request))
        response = json.loads(line)
    except (OSError, json.JSONDecodeError) as exc:
        transport.close()
        raise ProtocolError(f"handshake failed: {exc}")
    if "error" in response:
        transport.close()
        raise ProtocolError(response["error"])
    return RemoteEnv(transport, env_name, obs_dim=len(response["obs"]))
