#!/usr/bin/env python3
"""Print the closed-form compression factor grid for several frame-stack
lengths and change densities (the theory behind the CLI's `theory` command)."""

from deobs.analytics import sweep

F_VALUES = [1, 2, 3, 4, 6, 8, 10]
PHI_VALUES = [0.0, 0.01, 0.05, 0.10, 0.25, 0.50, 1.0]


def main() -> None:
    table = sweep(F_VALUES, PHI_VALUES, 84 * 84)
    by_f: dict[int, list[float]] = {}
    for f, _, factor in table:
        by_f.setdefault(f, []).append(factor)

    header = "f\\phi " + "".join(f"{phi:>8.2f}" for phi in PHI_VALUES)
    print(header)
    print("-" * len(header))
    for f in F_VALUES:
        print(f"{f:<5d} " + "".join(f"{x:>8.2f}" for x in by_f[f]))


if __name__ == "__main__":
    main()
