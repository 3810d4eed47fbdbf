"""Line-delimited JSON protocol for driving the environments externally.

Requests, one JSON object per line:

    {"cmd": "make", "env": "baseline|proposed|obstacle", "config": {...}}
    {"cmd": "reset", "seed": <int>}
    {"cmd": "step", "action": [6 floats]}
    {"cmd": "close"}

Every successful response has the step shape::

    {"obs": [...], "reward": <float>, "terminated": <bool>,
     "truncated": <bool>, "breakdown": {...}}

(`make` answers with a zero observation of the right dimension so clients
can cache sizes; `close` answers with an empty one.) Failures answer
``{"error": "<message>"}`` and the session keeps going. Responses come in
request order, floats carry full precision.
"""

from __future__ import annotations

import dataclasses
import json
import socket
import sys

from .envs import ENV_NAMES, EnvConfig, FrameSkip, make_env

_ZERO_BREAKDOWN = {"r_d": 0.0, "r_theta": 0.0, "r_t": 0.0,
                   "r_obst": 0.0, "r_hit": 0.0, "total": 0.0}


def _ok(obs, reward=0.0, terminated=False, truncated=False, breakdown=None):
    return {
        "obs": list(obs),
        "reward": reward,
        "terminated": terminated,
        "truncated": truncated,
        "breakdown": dict(_ZERO_BREAKDOWN) if breakdown is None else breakdown,
    }


class ProtocolSession:
    """One environment behind the wire protocol; single-threaded."""

    def __init__(self, default_env: str | None = None,
                 default_config: dict | None = None):
        self.default_env = default_env
        self.default_config = dict(default_config or {})
        self.env = None
        self.closed = False

    def handle_line(self, line: str) -> dict:
        try:
            request = json.loads(line)
        except json.JSONDecodeError as exc:
            return {"error": f"malformed JSON request: {exc}"}
        if not isinstance(request, dict):
            return {"error": "request must be a JSON object"}
        cmd = request.get("cmd")
        handler = getattr(self, f"_cmd_{cmd}", None) if isinstance(
            cmd, str) else None
        if handler is None:
            return {"error": f"unknown cmd {cmd!r}"}
        try:
            return handler(request)
        except Exception as exc:  # any env/config failure becomes an error
            return {"error": str(exc)}

    def _cmd_make(self, request: dict) -> dict:
        name = request.get("env", self.default_env)
        if name not in ENV_NAMES:
            raise ValueError(f"unknown env {name!r}; expected one of "
                             f"{ENV_NAMES}")
        config = {**self.default_config, **request.get("config", {})}
        skip = config.pop("frame_skip", 1)
        known = {f.name for f in dataclasses.fields(EnvConfig)}
        for key in config:
            if key not in known:
                raise ValueError(f"unknown config key {key!r}")
        env = make_env(name, cfg=EnvConfig(**config))
        if skip != 1:
            env = FrameSkip(env, int(skip))
        self.env = env
        return _ok([0.0] * env.observation_dim)

    def _cmd_reset(self, request: dict) -> dict:
        if self.env is None:
            raise RuntimeError("no environment; send make first")
        seed = request.get("seed")
        if seed is not None and not isinstance(seed, int):
            raise ValueError("seed must be an integer")
        obs = self.env.reset(seed=seed)
        return _ok(obs.tolist())

    def _cmd_step(self, request: dict) -> dict:
        if self.env is None:
            raise RuntimeError("no environment; send make first")
        action = request.get("action")
        if not isinstance(action, list) or len(action) != self.env.action_dim:
            raise ValueError(
                f"action must be a list of {self.env.action_dim} floats")
        result = self.env.step(action)
        return _ok(result.observation.tolist(), float(result.reward),
                   bool(result.terminated), bool(result.truncated),
                   result.breakdown.to_dict())

    def _cmd_close(self, request: dict) -> dict:
        self.env = None
        self.closed = True
        return _ok([])


def serve_stream(in_stream, out_stream, default_env: str | None = None,
                 default_config: dict | None = None) -> None:
    """Serve one session over text streams until close or EOF."""
    session = ProtocolSession(default_env, default_config)
    for line in in_stream:
        if not line.strip():
            continue
        response = session.handle_line(line)
        out_stream.write(json.dumps(response) + "\n")
        out_stream.flush()
        if session.closed:
            break


def serve_stdio(default_env: str | None = None,
                default_config: dict | None = None) -> None:
    serve_stream(sys.stdin, sys.stdout, default_env, default_config)


def serve_tcp(host: str, port: int, default_env: str | None = None,
              default_config: dict | None = None, announce=None,
              max_sessions: int | None = None) -> None:
    """Accept connections one at a time, a fresh session per connection."""
    with socket.create_server((host, port)) as server:
        actual = server.getsockname()[1]
        if announce is not None:
            announce(f"listening on {host}:{actual}")
        served = 0
        while max_sessions is None or served < max_sessions:
            conn, _ = server.accept()
            with conn:
                reader = conn.makefile("r", encoding="utf-8")
                writer = conn.makefile("w", encoding="utf-8")
                serve_stream(reader, writer, default_env, default_config)
            served += 1
