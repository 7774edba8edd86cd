"""Run one episode against a simulator server with a route-follower planner."""

from __future__ import annotations

import argparse
import json
import sys

from .client import EnvClient, SessionError
from .planners import ConstantHeadingPlanner, RouteFollowerPlanner
from .wire import WireError


def run_episode(client: EnvClient, planner, max_steps: int = 1000):
    """Drive the planner until the episode ends; returns (steps, score)."""
    obs = client.reset()
    steps = 0
    while not obs.done and steps < max_steps:
        wps = planner.plan(obs, obs.ego)
        obs = client.step(waypoints=wps)
        steps += 1
    return steps, client.last_score


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="hugsim-client",
        description="Drive a simulator episode over the wire protocol.")
    conn = ap.add_mutually_exclusive_group(required=True)
    conn.add_argument("--connect", metavar="HOST:PORT",
                      help="TCP address of a running server")
    conn.add_argument("--pipe", metavar="PATH",
                      help="base path of a named-pipe pair (<PATH>.in/.out)")
    ap.add_argument("--route", help="JSON file with a [[x, z], ...] polyline; "
                                    "without it the planner holds heading")
    ap.add_argument("--speed", type=float, default=5.0)
    ap.add_argument("--max-steps", type=int, default=1000)
    ap.add_argument("--timeout", type=float, default=30.0)
    args = ap.parse_args(argv)

    if args.route:
        with open(args.route) as f:
            route = json.load(f)
        planner = RouteFollowerPlanner(route, speed=args.speed)
    else:
        planner = ConstantHeadingPlanner(speed=args.speed)

    kwargs = {"timeout": args.timeout}
    if args.connect:
        host, _, port = args.connect.rpartition(":")
        kwargs["address"] = (host, int(port))
    else:
        kwargs["pipe"] = args.pipe

    try:
        with EnvClient(**kwargs) as client:
            steps, score = run_episode(client, planner, args.max_steps)
    except (WireError, SessionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out = {"steps": steps}
    if score is not None:
        out["reason"] = score.get("reason")
        report = score.get("score", {})
        out["hd_score"] = report.get("hd_score")
        out["R_c"] = report.get("R_c")
    print(json.dumps(out))
    return 0


if __name__ == "__main__":
    sys.exit(main())
