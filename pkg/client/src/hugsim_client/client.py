"""Blocking lockstep client for the simulator environment server."""

from __future__ import annotations

import socket
from dataclasses import dataclass

import numpy as np

from .wire import PROTOCOL_VERSION, Frame, WireError, encode, read_frame, unpack_images


class SessionError(Exception):
    """Server answered ERROR or the session state machine was violated."""


@dataclass
class Observation:
    images: dict            # camera name -> (H, W, 3) u8 array
    ego: tuple              # (x, z, theta, v)
    t: float
    sub_scores: dict | None
    done: bool
    reason: str | None
    raw_header: dict
    raw_payload: bytes


class EnvClient:
    """Connects to a server, then reset()/step() in lockstep.

    step() is valid only between reset() and the episode's done flag. The
    final DONE header (reason + score report) is kept on
    `last_score`.
    """

    def __init__(self, address=None, pipe=None, timeout: float = 30.0):
        if (address is None) == (pipe is None):
            raise ValueError("pass exactly one of address=(host, port) or pipe=path")
        if address is not None:
            self._sock = socket.create_connection(address, timeout=timeout)
            self._r = self._sock.makefile("rb")
            self._w = self._sock.makefile("wb")
        else:
            self._sock = None
            # server reads <pipe>.in and writes <pipe>.out
            self._w = open(pipe + ".in", "wb")
            self._r = open(pipe + ".out", "rb")
        self.rig = None
        self.last_score = None
        self._episode_live = False
        self._handshake()

    def _handshake(self):
        self._send(Frame("HELLO", {"version": PROTOCOL_VERSION}))
        reply = self._recv()
        if reply.kind == "ERROR":
            raise SessionError(reply.header.get("error", "handshake refused"))
        if reply.kind != "HELLO":
            raise SessionError(f"expected HELLO, got {reply.kind}")
        self.rig = reply.header.get("rig", [])

    def _send(self, frame: Frame):
        try:
            self._w.write(encode(frame))
            self._w.flush()
        except (OSError, ValueError) as e:
            raise SessionError(f"connection lost while sending: {e}") from e

    def _recv(self) -> Frame:
        try:
            return read_frame(self._r)
        except WireError as e:
            raise SessionError(str(e)) from e

    def _parse_obs(self, frame: Frame) -> Observation:
        if frame.kind == "ERROR":
            raise SessionError(frame.header.get("error", "server error"))
        if frame.kind != "OBS":
            raise SessionError(f"expected OBS, got {frame.kind}")
        h = frame.header
        images = dict(zip(h.get("cameras", []),
                          unpack_images(frame.payload, h.get("shapes", []))))
        return Observation(images=images, ego=tuple(h["ego"]), t=h["t"],
                           sub_scores=h.get("sub_scores"), done=h["done"],
                           reason=h.get("reason"), raw_header=h,
                           raw_payload=frame.payload)

    def reset(self) -> Observation:
        self._send(Frame("RESET"))
        obs = self._parse_obs(self._recv())
        self._episode_live = True
        self.last_score = None
        return obs

    def step(self, waypoints=None, controls=None) -> Observation:
        if not self._episode_live:
            raise SessionError("step() before reset() or after episode end")
        if (waypoints is None) == (controls is None):
            raise ValueError("pass exactly one of waypoints or controls")
        header = {}
        if waypoints is not None:
            header["waypoints"] = [[float(v) for v in wp] for wp in waypoints]
        else:
            header["controls"] = [[float(d), float(a)] for d, a in controls]
        self._send(Frame("ACTION", header))
        obs = self._parse_obs(self._recv())
        if obs.done:
            self._episode_live = False
            final = self._recv()
            if final.kind == "DONE":
                self.last_score = final.header
            elif final.kind == "ERROR":
                raise SessionError(final.header.get("error", "server error"))
        return obs

    def close(self):
        for h in (self._r, self._w, self._sock):
            if h is not None:
                try:
                    h.close()
                except OSError:
                    pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
