"""Multi-object, multi-grasp detection: geometry, data, targets, a toy two-stage detector, evaluation."""
from .geometry import AxisAlignedBox, GraspRect, angle_difference, is_correct, jaccard_index

__version__ = "0.1.0"

__all__ = ["AxisAlignedBox", "GraspRect", "angle_difference", "is_correct", "jaccard_index", "__version__"]
