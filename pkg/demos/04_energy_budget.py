#!/usr/bin/env python3
"""Energy-per-inference arithmetic for picking an operating point.

Given per-model current estimates and inference latencies at several
frequency levels, tabulate energy per inference (current x voltage x time)
and find the cheapest configuration that still meets a frame deadline.
"""
from pmcpower.cli import compute_energy_mws

SUPPLY_VOLTAGE = 3.85  # volts

# (model variant, frequency MHz, estimated current mA, inference latency ms)
OPERATING_POINTS = [
    ("small", 250, 230.0, 16.0),
    ("small", 470, 440.0, 9.1),
    ("small", 700, 640.0, 6.9),
    ("medium", 250, 300.0, 28.4),
    ("medium", 470, 560.0, 16.0),
    ("medium", 700, 780.0, 12.1),
    ("large", 250, 335.0, 63.8),
    ("large", 470, 630.0, 36.6),
    ("large", 700, 895.0, 28.1),
]

FRAME_DEADLINE_MS = 33.3  # 30 frames per second


def main():
    print(f"{'variant':<8s} {'MHz':>5s} {'mA':>7s} {'ms':>7s} {'mWs':>8s}  meets 30 FPS?")
    feasible = []
    for variant, mhz, current, latency in OPERATING_POINTS:
        energy = compute_energy_mws(current, SUPPLY_VOLTAGE, latency)
        meets = latency <= FRAME_DEADLINE_MS
        if meets:
            feasible.append((energy, variant, mhz))
        print(f"{variant:<8s} {mhz:>5d} {current:>7.1f} {latency:>7.2f} "
              f"{energy:>8.2f}  {'yes' if meets else 'no'}")

    energy, variant, mhz = min(feasible)
    print(f"\ncheapest point under the deadline: {variant} at {mhz} MHz "
          f"({energy:.2f} mWs per inference)")
    print("raising the clock buys latency but always costs energy here, so the "
          "right move is the lowest frequency that still makes the deadline.")


if __name__ == "__main__":
    main()
