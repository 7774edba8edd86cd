"""Top-level `hugsim` command line."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np
import torch

from ..errors import HugsimError
from ..metrics.hd import ScoreTrace, hd_score, route_completion, score_report
from ..render.api import rasterize
from ..render.export import write_pfm, write_ppm
from ..scene.camera import look_at_camera
from ..scene.io import load_scene
from ..sim.engine import Environment
from ..sim.scenario import ScenarioConfig
from .server import serve_pipe, serve_tcp


def _load_config(path) -> ScenarioConfig:
    config = ScenarioConfig.from_json(path)
    seed_env = os.environ.get("HUGSIM_SEED")
    if seed_env is not None:
        config.seed = int(seed_env)
    return config


def _cmd_serve(args) -> int:
    config = _load_config(args.scenario)
    listen = args.listen
    if ":" in listen:
        host, port = listen.rsplit(":", 1)
        serve_tcp(config, host or "127.0.0.1", int(port),
                  max_sessions=args.max_sessions)
    else:
        serve_pipe(config, listen)
    return 0


def _straight_policy(env):
    return {"controls": [[0.0, 0.0]]}


def _cmd_simulate(args) -> int:
    config = _load_config(args.scenario)
    env = Environment(config, render_observations=not args.no_render)
    env.reset()

    if args.policy == "straight":
        policy = _straight_policy
    else:
        with open(args.controls) as f:
            controls = json.load(f)
        it = iter(controls)

        def policy(env):
            try:
                return {"controls": [next(it)]}
            except StopIteration:
                return {"controls": [[0.0, 0.0]]}

    while not env.done:
        env.step(policy(env))
    env.write_trace(args.out)
    report = score_report(env.score)
    print(json.dumps({"reason": env.reason, "steps": len(env.trace_records()) - 1,
                      "hd_score": report["hd_score"], "R_c": report["R_c"]}))
    return 0


def _cmd_score(args) -> int:
    trace = ScoreTrace()
    path = []
    route = None
    with open(args.trace) as f:
        for line in f:
            rec = json.loads(line)
            path.append(rec["ego"][:2])
            if rec["sub_scores"] is not None:
                s = rec["sub_scores"]
                trace.append(s["NC"], s["DAC"], s["TTC"], s["COM"])
    if args.route:
        route = json.load(open(args.route))
        trace.r_c = route_completion(path, route)
    elif args.route_completion is not None:
        trace.r_c = args.route_completion
    else:
        trace.r_c = 1.0
    report = score_report(trace)
    out = json.dumps(report, indent=1)
    if args.out:
        with open(args.out, "w") as f:
            f.write(out)
    else:
        print(out)
    return 0


def _cmd_render(args) -> int:
    graph = load_scene(args.scene)
    with open(args.camera) as f:
        cam_spec = json.load(f)
    cam = look_at_camera(cam_spec["eye"], cam_spec["target"],
                         cam_spec.get("width", 128), cam_spec.get("height", 128),
                         f=cam_spec.get("f"))
    composed = graph.compose(cam_spec.get("t", 0.0))
    modes = tuple(cam_spec.get("modes", ["color", "depth"]))
    out = rasterize(composed.gaussians, cam, modes=modes, dtype=torch.float32)
    os.makedirs(args.out, exist_ok=True)
    if out.color is not None:
        write_ppm(os.path.join(args.out, "color.ppm"), out.color)
    if out.depth is not None:
        write_pfm(os.path.join(args.out, "depth.pfm"), out.depth)
    write_pfm(os.path.join(args.out, "alpha.pfm"), out.alpha)
    return 0


def _cmd_fit(args) -> int:
    from ..fit import FitConfig, FitFrame, LossWeights, optimize_scene
    from ..render.export import read_ppm
    from ..scene.camera import Camera
    from ..scene.io import save_scene

    graph = load_scene(args.scene)
    with open(args.frames) as f:
        frame_spec = json.load(f)
    frames = []
    base = os.path.dirname(os.path.abspath(args.frames))
    for fs in frame_spec:
        cam = Camera.from_dict(fs["camera"]) if "camera" in fs else \
            look_at_camera(fs["eye"], fs["target"], fs["width"], fs["height"],
                           f=fs.get("f"))
        color = read_ppm(os.path.join(base, fs["image"]))
        frames.append(FitFrame(camera=cam, color=color))
    from ..scene.gaussians import GaussianSet

    config = FitConfig.from_json(args.config) if args.config else FitConfig()
    weights = LossWeights()
    static_parts = GaussianSet.concat([graph.ground, graph.static_bg])
    fitted, _, log, _ = optimize_scene(static_parts, frames, weights,
                                       config, dtype=torch.float32)
    ground_n = len(graph.ground)
    graph.ground = fitted[np.arange(ground_n)]
    graph.static_bg = fitted[np.arange(ground_n, len(fitted))]
    save_scene(graph, args.out)
    if args.log:
        from ..fit import write_log
        write_log(args.log, log)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="hugsim",
                                     description="Closed-loop driving simulator "
                                                 "on decomposed Gaussian scenes")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="serve environments over TCP or a named pipe")
    p.add_argument("--scenario", required=True)
    p.add_argument("--listen", required=True,
                   help="host:port for TCP or a filesystem path for pipes")
    p.add_argument("--max-sessions", type=int, default=None)
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("simulate", help="run a scenario with a local policy")
    p.add_argument("--scenario", required=True)
    p.add_argument("--policy", choices=["straight", "replay-controls"],
                   default="straight")
    p.add_argument("--controls", help="JSON [[delta, accel], ...] for replay-controls")
    p.add_argument("--out", required=True, help="trace JSONL path")
    p.add_argument("--no-render", action="store_true")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("score", help="aggregate a trace into an HD-Score report")
    p.add_argument("--trace", required=True)
    p.add_argument("--route", help="JSON route polyline for route completion")
    p.add_argument("--route-completion", type=float, default=None)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_score)

    p = sub.add_parser("render", help="render a scene from a camera spec")
    p.add_argument("--scene", required=True)
    p.add_argument("--camera", required=True, help="JSON camera spec")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("fit", help="photometric refinement of a scene container")
    p.add_argument("--scene", required=True)
    p.add_argument("--frames", required=True,
                   help="JSON list of {camera|eye/target, image} records")
    p.add_argument("--config", help="FitConfig JSON")
    p.add_argument("--out", required=True, help="output scene container")
    p.add_argument("--log", help="training log JSONL")
    p.set_defaults(func=_cmd_fit)

    args = parser.parse_args(argv)
    if args.command == "simulate" and args.policy == "replay-controls" \
            and not args.controls:
        parser.error("replay-controls policy needs --controls")
    try:
        return args.func(args)
    except HugsimError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
