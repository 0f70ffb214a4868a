"""Suite-wide fairness audit and the acceptance summary lines.

Every matching produced through the public producers during the session is
checked for matched red stubs == matched blue stubs == edge count, and any
violation fails the test that produced it.
"""
import functools
import re
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

import stubmatch  # noqa: E402
from stubmatch import Color  # noqa: E402
from stubmatch.matcher import Matching  # noqa: E402

AUDIT = {"matchings": 0, "violations": []}

PRODUCERS = ("run_2cimc", "run_greedy", "stable_matching", "brute_force_stable",
             "finite_component_scheme", "percolating_scheme", "alternating_truncation")


def _matchings(result):
    if isinstance(result, Matching):
        yield result
    elif isinstance(result, (tuple, list)):
        for item in result:
            yield from _matchings(item)
    elif hasattr(result, "matching"):
        yield result.matching


def audit_matching(cfg, m: Matching) -> None:
    AUDIT["matchings"] += 1
    m.validate(cfg)
    red = cfg.colors == Color.RED
    used = cfg.stubs - m.remaining
    e = m.edge_array()
    deg = np.bincount(e.ravel(), minlength=cfg.n) if e.size else np.zeros(cfg.n, np.int64)
    matched_red, matched_blue = int(used[red].sum()), int(used[~red].sum())
    ok = (matched_red == matched_blue == len(m.edges) == int(deg[red].sum()) == int(deg[~red].sum()))
    if not ok:
        AUDIT["violations"].append((matched_red, matched_blue, len(m.edges)))
        raise AssertionError(f"unfair matching: red {matched_red}, blue {matched_blue}, edges {len(m.edges)}")


def _wrap(fn):
    @functools.wraps(fn)
    def inner(cfg, *args, **kwargs):
        result = fn(cfg, *args, **kwargs)
        for m in _matchings(result):
            audit_matching(cfg, m)
        return result
    inner.__wrapped_for_audit__ = True
    return inner


def _install_audit():
    mods = [m for name, m in sys.modules.items() if name == "stubmatch" or name.startswith("stubmatch.")]
    originals = {name: getattr(stubmatch.matcher if hasattr(stubmatch.matcher, name) else stubmatch.schemes, name)
                 for name in PRODUCERS}
    for name, fn in originals.items():
        if getattr(fn, "__wrapped_for_audit__", False):
            continue
        wrapped = _wrap(fn)
        for mod in mods:
            if getattr(mod, name, None) is fn:
                setattr(mod, name, wrapped)


import stubmatch.cli  # noqa: E402,F401  (make sure every module is loaded before wrapping)

_install_audit()

# ---------------------------------------------------------------- acceptance summary

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    match = re.search(r"test_acceptance\.py::test_c(\d+)_", report.nodeid)
    if not match:
        return
    n = int(match.group(1))
    failed = report.failed
    entry = _ACCEPTANCE.setdefault(n, {"passed": True, "detail": ""})
    if report.when == "call" or failed:
        entry["passed"] = entry["passed"] and not failed and not report.skipped
        for key, value in report.user_properties:
            if key == "detail":
                entry["detail"] = value


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        e = _ACCEPTANCE[n]
        if n == 3:
            e["passed"] = e["passed"] and not AUDIT["violations"]
            e["detail"] = (f"{AUDIT['matchings']} matchings audited over the whole session, "
                           f"{len(AUDIT['violations'])} violations")
        tr.write_line(f"criterion {n:2d}: {'PASS' if e['passed'] else 'FAIL'}  {e['detail']}")


@pytest.fixture
def detail(record_property):
    """Attach a one-line measurement summary to the acceptance line."""
    return lambda text: record_property("detail", text)
