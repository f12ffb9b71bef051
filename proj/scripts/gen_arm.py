#!/usr/bin/env python3
"""Regenerates data/panda_like_arm.json and data/grippers.json.

Joint frames follow the published modified-DH table of the Franka Panda.
Each link is approximated by capsules; collision spheres are placed along
every capsule axis at spacing s with radius sqrt(r^2 + (s/2)^2), which
covers the capsule surface.
"""
import json
import math
import pathlib

DH = [  # a, d, alpha (modified DH: Rx(alpha) Tx(a) Rz(q) Tz(d))
    (0.0, 0.333, 0.0),
    (0.0, 0.0, -math.pi / 2),
    (0.0, 0.316, math.pi / 2),
    (0.0825, 0.0, math.pi / 2),
    (-0.0825, 0.384, -math.pi / 2),
    (0.0, 0.0, math.pi / 2),
    (0.088, 0.0, math.pi / 2),
]
LIMITS = [
    (-2.8973, 2.8973),
    (-1.7628, 1.7628),
    (-2.8973, 2.8973),
    (-3.0718, -0.0698),
    (-2.8973, 2.8973),
    (-0.0175, 3.7525),
    (-2.8973, 2.8973),
]
HOME = [0.0, -math.pi / 4, 0.0, -3 * math.pi / 4, 0.0, math.pi / 2, math.pi / 4]

# Capsules per link in the link frame: (a, b, radius).
CAPSULES = [
    [((0, 0, -0.19), (0, 0, -0.02), 0.06)],
    [((0, 0, 0), (0, -0.2, 0), 0.06)],
    [((0, 0, -0.12), (0, 0, 0), 0.055), ((0, 0, 0), (0.0825, 0, 0), 0.055)],
    [((0, 0, 0), (-0.0825, 0.12, 0), 0.055)],
    [((0.0825, 0, -0.384), (0, 0, -0.264), 0.05), ((0, 0, -0.264), (0, 0, 0), 0.05)],
    [((0, 0, 0), (0.088, 0, 0), 0.05)],
    [((0, 0, -0.02), (0, 0, 0.08), 0.045)],
]


def quat_rx(a):
    return [math.sin(a / 2), 0.0, 0.0, math.cos(a / 2)]


def fixed_pose(a, d, alpha):
    return [a, -math.sin(alpha) * d, math.cos(alpha) * d] + quat_rx(alpha)


def cover(capsules, spacing=0.04):
    spheres = []
    for a, b, r in capsules:
        length = math.dist(a, b)
        n = max(1, math.ceil(length / spacing))
        rad = math.sqrt(r * r + (length / n / 2) ** 2)
        for k in range(n + 1):
            t = k / n
            c = [a[i] + t * (b[i] - a[i]) for i in range(3)]
            spheres.append({"center": [round(x, 6) for x in c], "radius": round(rad + 1e-6, 6)})
    return spheres


def r6(v):
    return [round(x, 9) for x in v]


def main():
    root = pathlib.Path(__file__).resolve().parent.parent / "data"
    joints = []
    for i, (a, d, alpha) in enumerate(DH):
        joints.append({
            "name": f"joint{i + 1}",
            "origin": r6(fixed_pose(a, d, alpha)),
            "axis": [0.0, 0.0, 1.0],
            "limit": list(LIMITS[i]),
            "capsules": [{"a": list(c[0]), "b": list(c[1]), "radius": c[2]} for c in CAPSULES[i]],
            "spheres": cover(CAPSULES[i]),
        })
    arm = {
        "name": "panda_like",
        "joints": joints,
        "tool": [0.0, 0.0, 0.107, 0.0, 0.0, 0.0, 1.0],
        "home": r6(HOME),
    }
    (root / "panda_like_arm.json").write_text(json.dumps(arm, indent=2) + "\n")

    # Gripper geometry in the flange frame; approach axis is +Z.
    i_shape = {
        "shape": "I",
        "tcp": [0.0, 0.0, 0.20, 0.0, 0.0, 0.0, 1.0],
        "approach_axis": [0.0, 0.0, 1.0],
        "capsules": [{"a": [0, 0, 0.0], "b": [0, 0, 0.04], "radius": 0.04},
                     {"a": [0, 0, 0.04], "b": [0, 0, 0.175], "radius": 0.015}],
    }
    i_shape["spheres"] = cover([((0, 0, 0.0), (0, 0, 0.04), 0.04)], 0.04) + \
        cover([((0, 0, 0.04), (0, 0, 0.175), 0.015)], 0.03)
    l_shape = {
        "shape": "L",
        "tcp": [0.09, 0.0, 0.15, 0.0, 0.0, 0.0, 1.0],
        "approach_axis": [0.0, 0.0, 1.0],
        "capsules": [{"a": [0, 0, 0.0], "b": [0, 0, 0.06], "radius": 0.045},
                     {"a": [0, 0, 0.07], "b": [0.09, 0, 0.07], "radius": 0.025},
                     {"a": [0.09, 0, 0.07], "b": [0.09, 0, 0.125], "radius": 0.015}],
    }
    l_shape["spheres"] = cover([((0, 0, 0.0), (0, 0, 0.06), 0.045)], 0.04) + \
        cover([((0, 0, 0.07), (0.09, 0, 0.07), 0.025)], 0.03) + \
        cover([((0.09, 0, 0.07), (0.09, 0, 0.125), 0.015)], 0.03)
    (root / "grippers.json").write_text(json.dumps({"I": i_shape, "L": l_shape}, indent=2) + "\n")


if __name__ == "__main__":
    main()
