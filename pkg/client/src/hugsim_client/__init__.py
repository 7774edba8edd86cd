"""Client SDK for the hugsim wire protocol."""

from .client import EnvClient, Observation, SessionError
from .planners import ConstantHeadingPlanner, PlannerAdapter, RouteFollowerPlanner
from .wire import Frame, PROTOCOL_VERSION, WireError, encode, read_frame, unpack_images

__all__ = [
    "ConstantHeadingPlanner",
    "EnvClient",
    "Frame",
    "Observation",
    "PROTOCOL_VERSION",
    "PlannerAdapter",
    "RouteFollowerPlanner",
    "SessionError",
    "WireError",
    "encode",
    "read_frame",
    "unpack_images",
]
