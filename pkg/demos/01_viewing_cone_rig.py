#!/usr/bin/env python3
"""
Viewing-cone rig tour
=====================

Builds the default capture rig (13 cameras on a 45-degree cone around
the workspace center) and prints where each camera sits, then shows the
four-view inference preset expressed as azimuth offsets.
"""

import math

import numpy as np

from nvsforge.camera import RigSpec, generate_rig, preset_rig_inference

spec = RigSpec()
print(f"rig: distance {spec.distance_m} m, elevation {spec.elevation_deg} deg, "
      f"azimuth +/-{spec.azimuth_halfrange_deg} deg every {spec.azimuth_step_deg} deg")
print()

# Each pose maps world points into its camera frame; the camera center
# is the point the pose sends to the origin.
print(f"{'azimuth':>8} {'camera center (x, y, z)':>30} {'dist':>7} {'elev':>7}")
for azimuth, pose in generate_rig(spec):
    c = pose.camera_center
    dist = np.linalg.norm(c - spec.center)
    elev = math.degrees(math.atan2(c[2], math.hypot(c[0], c[1])))
    print(f"{azimuth:8.1f} ({c[0]:8.4f}, {c[1]:8.4f}, {c[2]:8.4f})   {dist:7.4f} {elev:7.2f}")

print()

# The inference preset is relative: offsets are applied to whatever
# camera captured the source video, not to a fixed world circle.
offsets = [offset for offset, _ in preset_rig_inference()]
print("inference preset azimuth offsets:", offsets)

# Every rig camera looks at the workspace center: the center must land
# on the optical axis (x = y = 0 in camera coordinates, z > 0).
for azimuth, pose in generate_rig(spec):
    in_cam = pose.rotation @ spec.center + pose.translation
    assert abs(in_cam[0]) < 1e-12 and abs(in_cam[1]) < 1e-12 and in_cam[2] > 0
print("all cameras verified to look at the workspace center")
