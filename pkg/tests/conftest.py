import pytest

CRITERIA = {
    1: "Rabi calibration of the 2 pi convention",
    2: "synchronization minima, rectangular Rx(pi/2), unfiltered",
    3: "filtering degrades synchronization",
    4: "static shaping, Hann and Kaiser",
    5: "DRAG versus Hann, filtered",
    6: "sub-1e-3 error at t_g = 4/dEz",
    7: "t_g x dEz invariance",
    8: "converted-time rectangular CZ prediction",
    9: "CZ noise landscape is non-monotone",
    10: "SWAP dynamic phase correction",
    11: "CZ versus SWAP-class gate under charge noise",
    12: "first-order Magnus prediction versus simulation",
    13: "1/f noise spectrum",
    14: "valley correction of the Zeeman difference",
}

_RESULTS: dict = {}


@pytest.fixture
def criterion():
    """Record one checked part of an acceptance criterion and assert it."""

    def record(number: int, ok: bool, detail: str):
        _RESULTS.setdefault(number, []).append((bool(ok), detail))
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, f"criterion {number} ({CRITERIA[number]}): {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n, name in CRITERIA.items():
        parts = _RESULTS.get(n)
        if parts is None:
            terminalreporter.write_line(f"criterion {n:2d} NOT RUN  {name}")
            continue
        status = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"criterion {n:2d} {status}  {name}: {detail}")
