"""Environment server: one lockstep session per connection."""

from __future__ import annotations

import os
import socket
import threading

from ..errors import EpisodeDoneError, HugsimError, ProtocolError
from ..metrics.hd import score_report
from ..sim.engine import Environment
from ..sim.scenario import ScenarioConfig
from .protocol import (
    PROTOCOL_VERSION,
    Message,
    pack_images,
    read_message,
    write_message,
)


def _rig_description(config: ScenarioConfig) -> list:
    return [c.to_dict() for c in config.cameras]


def _obs_message(env: Environment, result) -> Message:
    names = [c.name for c in env.config.cameras]
    images = [result.observations[n].color for n in names] \
        if result.observations else []
    payload, shapes = pack_images(images)
    header = {
        "cameras": names if images else [],
        "shapes": shapes,
        "ego": [result.ego.x, result.ego.z, result.ego.theta, result.ego.v],
        "t": env.t,
        "sub_scores": result.sub_scores,
        "done": result.done,
        "reason": result.reason,
    }
    return Message("OBS", header, payload)


class Session:
    """Drives one client through HELLO -> RESET -> OBS/ACTION -> DONE."""

    def __init__(self, rfile, wfile, config: ScenarioConfig,
                 asset_library=None, scene_graph=None,
                 render_observations: bool = True):
        self.rfile = rfile
        self.wfile = wfile
        self.config = config
        self.library = asset_library
        self.scene_graph = scene_graph
        self.render_observations = render_observations

    def _error(self, text: str):
        write_message(self.wfile, Message("ERROR", {"error": text}))

    def run(self) -> None:
        try:
            self._run()
        except (ProtocolError, OSError):
            # client went away or spoke garbage mid-frame; session is over
            pass

    def _run(self) -> None:
        hello = read_message(self.rfile)
        if hello.kind != "HELLO":
            self._error(f"expected HELLO, got {hello.kind}")
            return
        if hello.header.get("version") != PROTOCOL_VERSION:
            self._error(f"protocol version mismatch: server "
                        f"{PROTOCOL_VERSION}, client {hello.header.get('version')}")
            return
        write_message(self.wfile, Message("HELLO", {
            "version": PROTOCOL_VERSION,
            "rig": _rig_description(self.config),
            "scenario_seed": self.config.seed,
        }))

        env = None
        while True:
            try:
                msg = read_message(self.rfile)
            except ProtocolError:
                return
            if msg.kind == "RESET":
                env = Environment(self.config, asset_library=self.library,
                                  scene_graph=self.scene_graph,
                                  render_observations=self.render_observations)
                result = env.reset()
                write_message(self.wfile, _obs_message(env, result))
            elif msg.kind == "ACTION":
                if env is None:
                    self._error("ACTION before RESET")
                    return
                action = {k: msg.header[k] for k in ("waypoints", "controls")
                          if k in msg.header}
                try:
                    result = env.step(action)
                except EpisodeDoneError as e:
                    self._error(str(e))
                    return
                except HugsimError as e:
                    self._error(str(e))
                    return
                write_message(self.wfile, _obs_message(env, result))
                if result.done:
                    write_message(self.wfile, Message("DONE", {
                        "reason": result.reason,
                        "score": score_report(env.score),
                    }))
                    env = None
            elif msg.kind == "DONE":
                return
            else:
                self._error(f"unexpected message kind {msg.kind}")
                return


def serve_tcp(config: ScenarioConfig, host: str = "127.0.0.1", port: int = 0,
              asset_library=None, scene_graph=None,
              render_observations: bool = True, max_sessions=None,
              ready_event: threading.Event | None = None,
              bound: list | None = None):
    """Accept loop; each connection gets its own session thread.

    `bound` (if given) receives the (host, port) actually bound, and
    `ready_event` is set once listening — for tests and embedding.
    """
    srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    srv.bind((host, port))
    srv.listen()
    if bound is not None:
        bound.append(srv.getsockname())
    if ready_event is not None:
        ready_event.set()
    served = 0
    threads = []
    try:
        while max_sessions is None or served < max_sessions:
            conn, _ = srv.accept()
            served += 1
            rfile = conn.makefile("rb")
            wfile = conn.makefile("wb")
            session = Session(rfile, wfile, config, asset_library,
                              scene_graph, render_observations)

            def run(sess=session, c=conn, rf=rfile, wf=wfile):
                try:
                    sess.run()
                finally:
                    for h in (rf, wf, c):
                        try:
                            h.close()
                        except OSError:
                            pass

            th = threading.Thread(target=run, daemon=True)
            th.start()
            threads.append(th)
        for th in threads:
            th.join()
    finally:
        srv.close()


def serve_pipe(config: ScenarioConfig, path: str, asset_library=None,
               scene_graph=None, render_observations: bool = True):
    """Single session over a pair of named pipes <path>.in / <path>.out.

    The client writes to <path>.in and reads from <path>.out.
    """
    in_path, out_path = path + ".in", path + ".out"
    for p in (in_path, out_path):
        if not os.path.exists(p):
            os.mkfifo(p)
    # open order matters: the reader must open first or both sides block
    rfile = open(in_path, "rb")
    wfile = open(out_path, "wb")
    try:
        Session(rfile, wfile, config, asset_library, scene_graph,
                render_observations).run()
    finally:
        rfile.close()
        wfile.close()
