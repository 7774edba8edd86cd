"""hugsim: a desk-scale closed-loop driving simulator on decomposed 3D Gaussians."""

__version__ = "0.1.0"
