"""Full acceptance battery. Each criterion prints one status line and must pass."""

from __future__ import annotations

import pytest

from bbspectra.acceptance import PASS, Battery, BatteryConfig


@pytest.fixture(scope="module")
def results(acceptance_lines):
    battery = Battery(BatteryConfig())
    out = {}
    print()
    for step in battery.steps():
        res = step()
        print(res.line, flush=True)
        acceptance_lines.append(res.line)
        out[res.number] = res
    return out


@pytest.mark.parametrize("number", range(1, 11))
def test_criterion(results, number):
    res = results[number]
    assert res.status == PASS, res.line


def test_asymmetry_scales_quadratically(results):
    ratios = results[5].measured["ratio"]
    assert max(ratios) / min(ratios) <= 1.15
