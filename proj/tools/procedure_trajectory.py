#!/usr/bin/env python3
"""Writes the keyframes for scenarios/procedure.yaml.

Tool 1 (diathermy) traces a closed ring on the upper face, then tool 2
(scissors) snips along the same ring until the disk comes free.
"""

import argparse
import math

RING_RADIUS = 0.012
TOP = 0.002
TIP_RADIUS = 0.0015
PRESS = 0.0002
TRACE_POINTS = 72
TRACE_TIME = 3.0
SNIPS = 32
SNIP_PERIOD = 0.2


def ring(i, n):
    a = 2.0 * math.pi * i / n
    return RING_RADIUS * math.cos(a), RING_RADIUS * math.sin(a)


def row(t, tool, p, jaw, active):
    return f"{t:.6f},{tool},{p[0]:.9f},{p[1]:.9f},{p[2]:.9f},1,0,0,0,{jaw:g},{int(active)}"


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("output")
    out = parser.parse_args().output

    rows = ["time,tool,px,py,pz,qw,qx,qy,qz,jaw,active"]
    hover = TOP + TIP_RADIUS + 0.005
    touch = TOP + TIP_RADIUS - PRESS

    x, y = ring(0, TRACE_POINTS)
    rows.append(row(0.0, 1, (x, y, hover), 1, False))
    rows.append(row(0.3, 1, (x, y, touch), 1, True))
    t = 0.3
    for i in range(1, TRACE_POINTS + 1):
        t = 0.3 + TRACE_TIME * i / TRACE_POINTS
        x, y = ring(i, TRACE_POINTS)
        rows.append(row(t, 1, (x, y, touch), 1, True))
    rows.append(row(t + 0.2, 1, (x, y, 0.03), 1, False))

    below = -0.004
    park = (0.0, 0.0, 0.05)
    rows.append(row(0.0, 2, park, 1, False))
    start = t + 0.4
    x, y = ring(0, SNIPS)
    rows.append(row(start, 2, park, 1, False))
    t = start + 0.2
    for k in range(SNIPS):
        x, y = ring(k, SNIPS)
        rows.append(row(t, 2, (x, y, below), 1, True))
        rows.append(row(t + 0.5 * SNIP_PERIOD, 2, (x, y, below), 0, True))
        t += SNIP_PERIOD
    rows.append(row(t, 2, (x, y, below), 1, False))
    rows.append(row(t + 0.3, 2, park, 1, False))

    with open(out, "w") as f:
        f.write("\n".join(rows) + "\n")


if __name__ == "__main__":
    main()
