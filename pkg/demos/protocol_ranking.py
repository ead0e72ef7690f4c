"""
Census and sensitivity ranking of the two-pulse measurement protocols.

Enumerates every (preparation, readout) pulse-pair protocol, reports how the
raw count collapses to the independent set, then ranks the independent
protocols by their best achievable time-normalized sensitivity at a
reference rate pair.  Ends with the robustness trade-off: how much
sensitivity the pulse-error-free protocol gives up against the overall
winner as the rate asymmetry varies.
"""

import numpy as np

from spinrelax.protocols import (
    ROBUST_LABEL,
    census,
    rank_protocols,
    sensitivity_ratio_curve,
)
from spinrelax.rates import RatePair

RANKING_RATES = RatePair(1.0, 3.0)  # 1/ms


def main():
    report = census()
    print("protocol census")
    print(f"  raw pulse-pair combinations : {report.raw_count}")
    print(f"  with a usable signal        : {report.valid_count}")
    print(f"  distinct measurements       : {report.measurement_count}")
    print(f"  measurement label classes   : {report.function_class_count}")
    print(f"  distinct model functions    : {report.distinct_function_count}")
    print(f"  independent protocols       : {report.independent_count}")
    print(f"  pulse-error-free pairs      : {', '.join(report.eta_insensitive_measurements)}")
    print(f"  pulse-error-free protocols  : {', '.join(report.eta_insensitive_protocols)}")

    ranking = rank_protocols(RANKING_RATES)
    print(f"\nranking at G+ = {RANKING_RATES.gamma_plus} /ms, G- = {RANKING_RATES.gamma_minus} /ms")
    print(f"{'protocol':>18} {'tau+ (ms)':>10} {'tau- (ms)':>10} {'cost (sqrt s)':>14} {'vs best':>8}")
    for e in ranking.entries[:8]:
        print(
            f"{e.label:>18} {e.delays.tau_plus:>10.4f} {e.delays.tau_minus:>10.4f} "
            f"{e.cost:>14.5f} {e.cost_ratio:>8.4f}"
        )
    robust_rank = 1 + next(
        k for k, e in enumerate(ranking.entries) if e.label == ROBUST_LABEL
    )
    print(f"  ... ({len(ranking.entries)} rows; pulse-error-free protocol ranks #{robust_rank})")

    print("\nrobust-vs-optimal cost ratio across rate asymmetry")
    print(f"{'G+/G-':>8} {'robust':>10} {'optimal':>10} {'ratio':>7}")
    for ratio, c_robust, c_optimal, cost_ratio in sensitivity_ratio_curve(
        np.geomspace(0.25, 4.0, 5)
    ):
        print(f"{ratio:>8.3f} {c_robust:>10.5f} {c_optimal:>10.5f} {cost_ratio:>7.4f}")
    print(
        "\nThe pulse-error-free protocol stays within a modest constant factor of"
        " the best protocol at every asymmetry, which is the price of dropping"
        " all sensitivity to pi-pulse fidelity."
    )


if __name__ == "__main__":
    main()
