"""Acceptance criteria 1-11, each run through its preset at full settings.

Every criterion prints one ``PASS``/``FAIL`` line with its key numbers.
"""

import pytest

from osgood_lab import harness as H

# criterion -> (preset, overrides, runtime budget in seconds, metrics to print)
CRITERIA = {
    1: ("osgood-certificate", [], 5, ["stable_line_max_error", "off_line_min_slack"]),
    2: ("seminorm-propagation", [], 120, ["initial_limit", "transported_limit", "agreement"]),
    3: ("local-structure", [], 300, ["max_sup_b", "min_margin"]),
    4: ("sharpness-lipschitz", [], 120, ["slope", "control_max"]),
    5: ("lemma-lp", [], 30, ["min_ratio", "max_ratio", "out_of_range"]),
    6: ("euler-steady", [], 600, ["drift_l2", "control_energy_drift", "control_enstrophy_drift"]),
    7: ("euler-perturbed", [], 1200, ["max_sup_b", "max_source_const", "max_bound_usage"]),
    8: ("euler-two-vortex", [], 1800, ["period", "oracle_period", "relative_error"]),
    9: ("lightcone", [], 1800, ["max_exterior_ratio", "front_speed", "allowed_speed"]),
    10: ("interp", [], 60, ["violations", "min_slack"]),
    11: ("euler-breakdown", [], 3600, ["final_sup_b_n256", "final_sup_b_n512"]),
}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    preset, overrides, budget, keys = CRITERIA[number]
    m = H.run_preset(H.make_config(preset, overrides))
    in_time = m.wall_time < budget
    ok = m.passed and in_time
    failed = [k for k, v in m.checks.items() if not v] + ([] if in_time else ["runtime"])
    numbers = ", ".join(f"{k}={m.metrics[k]:.6g}" for k in keys)
    note = f" failed: {', '.join(failed)}" if failed else ""
    print(f"\n{'PASS' if ok else 'FAIL'} criterion {number} ({preset}): {numbers}; "
          f"{m.wall_time:.1f}s of {budget}s{note}")
    assert ok, f"criterion {number} failed checks {failed}"
