from .library import AssetLibrary, load_asset, save_asset
from .vehicle import (
    VehicleAsset,
    add_shadow,
    default_vehicle_init,
    place_actor,
    reconstruct_vehicle,
)

__all__ = [
    "AssetLibrary",
    "VehicleAsset",
    "add_shadow",
    "default_vehicle_init",
    "load_asset",
    "place_actor",
    "reconstruct_vehicle",
    "save_asset",
]
