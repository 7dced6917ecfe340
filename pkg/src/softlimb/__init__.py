"""Simulation and reinforcement-learning workbench for a hybrid rigid/soft robotic limb
with redundant cameras and camera-kill fault injection."""

__version__ = "0.1.0"
