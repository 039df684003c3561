"""Breast MRI density quantification.

Ingest MRI series into LPS volumes, segment breast and fibroglandular tissue
with a patch-based sliding-window harness, compute the dense-to-breast voxel
ratio, and run cohort statistics against mammography report categories.
"""

__version__ = "0.1.0"
