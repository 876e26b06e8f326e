"""Shared fixtures plus the acceptance-criteria report.

Acceptance tests record one line per criterion through the ``criterion``
fixture; the terminal summary prints the collected PASS/FAIL lines after the
normal pytest output so the run ends with a per-criterion scoreboard.
"""

from __future__ import annotations

import pytest

CRITERIA_LABELS = {
    1: "FWER control, Bonferroni + aGRAPA + eps-greedy",
    2: "FDR control, eBH",
    3: "adaptivity benefit, TPR vs epsilon at fixed budget",
    4: "deferred-selection equivalence of the non-adaptive baseline",
    5: "anytime p-value validity at the null",
    6: "selection rules match the enumeration oracle",
    7: "boundary mean wealth stays a supermartingale",
    8: "two-metric merged FWER control",
    9: "quantile-risk certification via the indicator reduction",
    10: "determinism and replay",
}

_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    def record(num: int, passed: bool, detail: str = "") -> None:
        _RESULTS[num] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not any(num in _RESULTS for num in CRITERIA_LABELS):
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(CRITERIA_LABELS):
        label = CRITERIA_LABELS[num]
        if num in _RESULTS:
            passed, detail = _RESULTS[num]
            status = "PASS" if passed else "FAIL"
            suffix = f"  [{detail}]" if detail else ""
            terminalreporter.write_line(f"{status}  criterion {num:2d}: {label}{suffix}")
        else:
            terminalreporter.write_line(f"MISS  criterion {num:2d}: {label}  [did not run]")
