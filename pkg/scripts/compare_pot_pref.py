"""Sweep all six potential/preference pairs on one scenario and tabulate
mean inter-survey time and mean reward per transition for each pair."""

import argparse
import dataclasses
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from surplan import default_case_study, load_scenario, offline_phase, run_experiment

POTENTIALS = ("max-sum", "max-single")
PREFERENCES = ("threshold", "cubic", "cube-root")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "scenario", nargs="?", type=Path, default=None,
        help="scenario file (default: the built-in 10x10 case study)",
    )
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--runs", type=int, default=None)
    parser.add_argument("--iterations", type=int, default=None)
    args = parser.parse_args()

    if args.scenario is None:
        scenario = default_case_study()
    else:
        scenario = load_scenario(args.scenario)
    replacements = {
        key: value
        for key, value in (
            ("seed", args.seed), ("runs", args.runs), ("iterations", args.iterations)
        )
        if value is not None
    }
    if replacements:
        scenario = dataclasses.replace(scenario, **replacements)

    offline = offline_phase(scenario.ts, scenario.formula, scenario.surveillance_prop)
    print(
        f"{scenario.name}: {scenario.runs} runs x {scenario.iterations} iterations, "
        f"seed {scenario.seed}"
    )
    print(f"{'potential':<12} {'preference':<12} {'inter-survey':>14} {'reward/step':>14}")
    for pot in POTENTIALS:
        for pref in PREFERENCES:
            result = run_experiment(
                dataclasses.replace(
                    scenario, potential_name=pot, preference_name=pref
                ),
                offline=offline,
            )
            survey = result.stats.inter_survey_time.avg
            reward = result.stats.reward_per_transition.avg
            print(f"{pot:<12} {pref:<12} {survey:>14.2f} {reward:>14.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
