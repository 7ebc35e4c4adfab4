"""Multi-tier UAV edge computing: slotted-time simulator and online optimizer.

Vehicles on the ground offload computation tasks to low-tier UAVs, which
split each task with a single high-tier UAV acting as backup server and
relay target. The package provides the per-slot decision pipeline
(matching, task split, CPU allocation, trajectory planning), the queue-based
online controller that trades task delay against per-UAV energy stability,
baseline policies, and a metrics/CLI layer for batch experiments.
"""

__version__ = "0.1.0"
