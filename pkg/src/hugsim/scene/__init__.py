from .camera import Camera, look_at_camera
from .gaussians import Gaussian, GaussianSet, covariance_3d, quat_to_rotmat
from .graph import (ComposedScene, InsertedActorRef, NativeActor, SceneGraph,
                    actor_rotation, compose_scene)
from .ground import GroundPlaneSet, GroundSurface, GroundWindow, build_ground_planes
from .io import load_scene, save_scene
from .schema import SemanticSchema, default_schema
from .synthetic import (ActorSpec, BuildingBox, SyntheticSceneSpec,
                        build_synthetic_scene, camera_path_poses,
                        make_box_gaussians)

__all__ = [
    "Camera", "look_at_camera", "Gaussian", "GaussianSet", "covariance_3d",
    "quat_to_rotmat", "ComposedScene", "InsertedActorRef", "NativeActor",
    "SceneGraph", "actor_rotation", "compose_scene", "GroundPlaneSet",
    "GroundSurface", "GroundWindow", "build_ground_planes", "load_scene",
    "save_scene", "SemanticSchema", "default_schema", "ActorSpec",
    "BuildingBox", "SyntheticSceneSpec", "build_synthetic_scene",
    "camera_path_poses", "make_box_gaussians",
]
