import json
import math

import pytest

from cartanflow import verify
from cartanflow.verify import CheckRecord, VerifyReport, check_names, fit_slope, run_verify


def test_registry_covers_each_area():
    names = check_names()
    assert names == sorted(names) and len(names) == len(set(names))
    for prefix in ("kernel.", "lie.", "flow.", "cartan."):
        assert any(n.startswith(prefix) for n in names)


def test_small_run_is_deterministic_and_passes():
    a = run_verify(seed=3, scale=0.05)
    b = run_verify(seed=3, scale=0.05)
    assert a.to_json(timing=False) == b.to_json(timing=False)
    assert a.all_passed, "\n".join(a.summary_lines())


def test_checks_are_independent_of_selection():
    name = check_names()[0]
    alone = run_verify(seed=11, scale=0.05, only=[name]).checks[0]
    together = [c for c in run_verify(seed=11, scale=0.05, only=check_names()[:3]).checks if c.name == name][0]
    assert alone == together


def test_report_schema():
    rep = run_verify(seed=1, scale=0.05, only=check_names()[:2])
    js = json.loads(rep.to_json())
    assert set(js) == {"seed", "wall_time_s", "checks"}
    assert set(js["checks"][0]) == {"name", "cases", "max_error", "tol", "pass"}


def test_crashing_check_is_recorded(monkeypatch):
    def boom(rng, cfg, scale):
        raise RuntimeError("boom")
    monkeypatch.setitem(verify._CHECKS, "zz.crash", boom)
    rep = run_verify(only=["zz.crash"])
    assert rep.checks[0].max_error == math.inf and not rep.all_passed


def test_record_and_slope():
    assert CheckRecord("a", 1, 1e-9, 1e-8).passed
    assert not CheckRecord("a", 1, 1e-7, 1e-8).passed
    assert fit_slope([1e-3, 1e-4, 1e-5], [2e-3, 2e-4, 2e-5]) == pytest.approx(1.0)
    assert not VerifyReport(0, 0.0, [CheckRecord("a", 1, math.inf, 1.0)]).all_passed
