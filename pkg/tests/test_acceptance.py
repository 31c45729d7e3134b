"""Acceptance gate: every shipped guarantee, one pass/fail line each.

Each criterion is the same code path `mixbound selftest` runs; the budgets
are part of the gate, so a pass here means both correct and fast enough.
Criterion 6 is the long one (a 50-config Monte Carlo sweep).
"""
import subprocess
import sys

import pytest

from mixbound.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize(
    "number",
    [num for num, _, _, _ in CRITERIA],
    ids=[f"{num:02d}-{name.replace(' ', '-')}" for num, name, _, _ in CRITERIA],
)
def test_criterion(number, capsys):
    result = run_criterion(number)
    with capsys.disabled():
        sys.stdout.write("\n" + result.line + "\n")
    assert result.passed, result.line
    assert result.seconds <= result.budget, result.line


def test_selftest_command_is_the_same_gate():
    proc = subprocess.run(
        [sys.executable, "-m", "mixbound.cli", "selftest",
         "--criteria", "1,7,10"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stdout + proc.stderr
    lines = [l for l in proc.stdout.splitlines() if l.strip()]
    passes = [l for l in lines if l.startswith("PASS")]
    assert len(passes) == 3
