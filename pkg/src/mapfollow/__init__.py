"""Simulated person-following robot with people-aware 2D LiDAR SLAM."""

__version__ = "0.1.0"
