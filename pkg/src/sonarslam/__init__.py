"""Desk-scale 3D-sonar SLAM toolkit.

Simulated compact 3D sonar with material-dependent returns and multipath
faults, scan-matching odometry with constant-velocity or external-odometry
priors, Euclidean loop closure with pose-graph optimization, camera-sonar
extrinsic calibration, and trajectory evaluation.
"""

from sonarslam.geometry import (
    PointCloud,
    Pose,
    Scan,
    compose,
    conjugate,
    exp,
    inverse,
    log,
    transform_cloud,
)

__version__ = "0.1.0"

__all__ = [
    "PointCloud",
    "Pose",
    "Scan",
    "compose",
    "conjugate",
    "exp",
    "inverse",
    "log",
    "transform_cloud",
    "__version__",
]
