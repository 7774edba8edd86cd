"""HD-Score driving evaluation: per-step sub-scores and aggregation."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError

WEIGHT_TTC = 5.0
WEIGHT_COM = 2.0
TTC_HORIZON = 1.0     # s
COM_ACCEL_MAX = 3.0   # m/s^2
COM_JERK_MAX = 5.0    # m/s^3
COM_YAW_RATE_MAX = 0.95  # rad/s


def point_in_polygon(pt, polygon) -> bool:
    """Even-odd rule; points on an edge count as inside."""
    x, z = float(pt[0]), float(pt[1])
    poly = np.asarray(polygon, dtype=np.float64)
    inside = False
    n = poly.shape[0]
    for i in range(n):
        x1, z1 = poly[i]
        x2, z2 = poly[(i + 1) % n]
        # on-edge check
        ex, ez = x2 - x1, z2 - z1
        px, pz = x - x1, z - z1
        cross = ex * pz - ez * px
        if abs(cross) < 1e-12 and min(x1, x2) - 1e-12 <= x <= max(x1, x2) + 1e-12 \
                and min(z1, z2) - 1e-12 <= z <= max(z1, z2) + 1e-12:
            return True
        if (z1 > z) != (z2 > z):
            xi = x1 + (z - z1) / (z2 - z1) * (x2 - x1)
            if x < xi:
                inside = not inside
    return inside


def drivable_compliance(corners, polygons) -> float:
    """DAC: 1 iff every ego corner lies inside the drivable-area union."""
    if not polygons:
        raise ConfigError("DAC needs at least one drivable-area polygon")
    for c in corners:
        if not any(point_in_polygon(c, p) for p in polygons):
            return 0.0
    return 1.0


def time_to_collision_score(ego_state, ego_box_lw, actor_states, actor_boxes_lw,
                            t_ttc: float = TTC_HORIZON, dt: float = 0.1) -> float:
    """TTC: 0 iff constant-velocity projection predicts overlap within t_ttc."""
    from ..sim.collision import BEVBox, boxes_overlap

    steps = int(round(t_ttc / dt))
    ex, ez, eth, ev = ego_state
    for k in range(1, steps + 1):
        t = k * dt
        ebox = BEVBox(ex + ev * np.cos(eth) * t, ez + ev * np.sin(eth) * t,
                      eth, ego_box_lw[0], ego_box_lw[1])
        for (ax, az, ath, av), (al, aw) in zip(actor_states, actor_boxes_lw):
            abox = BEVBox(ax + av * np.cos(ath) * t, az + av * np.sin(ath) * t,
                          ath, al, aw)
            if boxes_overlap(ebox, abox):
                return 0.0
    return 1.0


def comfort_score(a_lon: float, jerk: float, yaw_rate: float,
                  a_max: float = COM_ACCEL_MAX, j_max: float = COM_JERK_MAX,
                  r_max: float = COM_YAW_RATE_MAX) -> float:
    return 1.0 if (abs(a_lon) <= a_max and abs(jerk) <= j_max
                   and abs(yaw_rate) <= r_max) else 0.0


def hd_score_step(nc: float, dac: float, ttc: float, com: float,
                  weight_ttc: float = WEIGHT_TTC,
                  weight_com: float = WEIGHT_COM) -> float:
    """Gate (NC·DAC) times the weighted mean of the graded sub-scores."""
    return (nc * dac) * (weight_ttc * ttc + weight_com * com) / (weight_ttc + weight_com)


def route_completion(ego_path, route) -> float:
    """Fraction of route arc length covered by the furthest monotone projection."""
    route = np.asarray(route, dtype=np.float64).reshape(-1, 2)
    if route.shape[0] < 2:
        raise ConfigError("route needs at least 2 points")
    seg = np.diff(route, axis=0)
    seg_len = np.hypot(seg[:, 0], seg[:, 1])
    total = float(seg_len.sum())
    if total == 0.0:
        raise ConfigError("route has zero length")
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])

    best = 0.0
    for p in np.asarray(ego_path, dtype=np.float64).reshape(-1, 2):
        rel = p - route[:-1]
        denom = np.maximum(seg_len ** 2, 1e-12)
        u = np.clip((rel * seg).sum(axis=1) / denom, 0.0, 1.0)
        proj = route[:-1] + u[:, None] * seg
        d = np.hypot(*(p - proj).T)
        i = int(np.argmin(d))
        s = cum[i] + u[i] * seg_len[i]
        best = max(best, s)  # monotone: never credit backwards motion
    return min(best / total, 1.0)


@dataclass
class ScoreTrace:
    """Per-step sub-scores plus the global route-completion factor."""

    steps: list = field(default_factory=list)  # dicts with NC/DAC/TTC/COM
    weight_ttc: float = WEIGHT_TTC
    weight_com: float = WEIGHT_COM
    r_c: float = 0.0

    def append(self, nc, dac, ttc, com):
        for name, v in (("NC", nc), ("DAC", dac), ("TTC", ttc), ("COM", com)):
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"sub-score {name}={v} outside [0, 1]")
        self.steps.append({"NC": nc, "DAC": dac, "TTC": ttc, "COM": com})

    def step_scores(self) -> list[float]:
        return [hd_score_step(s["NC"], s["DAC"], s["TTC"], s["COM"],
                              self.weight_ttc, self.weight_com)
                for s in self.steps]


def hd_score(trace: ScoreTrace) -> float:
    """Route completion times the mean per-step score."""
    if not trace.steps:
        return 0.0
    return trace.r_c * float(np.mean(trace.step_scores()))


def score_report(trace: ScoreTrace) -> dict:
    steps = trace.step_scores()
    means = {k: float(np.mean([s[k] for s in trace.steps])) if trace.steps else 0.0
             for k in ("NC", "DAC", "TTC", "COM")}
    return {
        "per_step": steps,
        "R_c": trace.r_c,
        "hd_score": hd_score(trace),
        "sub_score_means": means,
    }


def write_score_report(trace: ScoreTrace, path) -> None:
    with open(path, "w") as f:
        json.dump(score_report(trace), f, indent=1)
