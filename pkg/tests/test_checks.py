import json

import pytest

from shufflelab import cli
from shufflelab.checks import SUITES, CheckResult, run_theory_checks


def test_all_checks_pass():
    results = run_theory_checks("all")
    assert {r.name for r in results} == {
        "variance-decomp", "wor-prefix", "block-prefix", "prefix-mc", "order-lb", "rev-identity",
        "paired-rev-slope", "perm-var", "remainder-bound", "apr-trace"}
    failed = [r.line() for r in results if not r.passed]
    assert not failed, failed


def test_named_check_values():
    by_name = {r.name: r for r in run_theory_checks("all")}
    assert by_name["wor-prefix"].measured["max_rel_error"] <= 1e-10
    assert 2.7 <= by_name["paired-rev-slope"].measured["slope"] <= 3.3
    assert by_name["order-lb"].measured["max_abs_error"] <= 1e-13
    assert all(r.reference for r in by_name.values())


@pytest.mark.parametrize("suite", sorted(SUITES))
def test_suite_selection(suite):
    assert {r.suite for r in run_theory_checks(suite)} == {suite}


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_theory_checks("nope")


def test_line_format():
    r = CheckResult("x", "apr", False, {"err": 0.5, "n": 3}, "tol", "ref")
    assert r.line() == "FAIL x: err=0.5, n=3 [tol]"


def test_cli_json_report(capsys):
    assert cli.main(["check", "--suite", "variance", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert [r["name"] for r in report] == ["variance-decomp", "wor-prefix", "block-prefix", "prefix-mc"]
    assert all(r["passed"] for r in report)
