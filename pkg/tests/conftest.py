import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy.interpolate import BSpline
from scipy.stats import qmc

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


def sobol_points(n: int, D: int, seed: int = 0) -> np.ndarray:
    """Scrambled Sobol points in [0, 1)^D."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)  # n need not be a power of two
        pts = qmc.Sobol(d=D, scramble=True, seed=seed).random(n)
    return np.minimum(pts, np.nextafter(1.0, 0.0))


def bspline_oracle(mbar: int, u: np.ndarray) -> np.ndarray:
    """Cardinal B-spline on [0, mbar + 1) from scipy, half-open at the right end."""
    u = np.asarray(u, dtype=float)
    el = BSpline.basis_element(np.arange(mbar + 2, dtype=float), extrapolate=False)
    v = np.nan_to_num(el(u), nan=0.0)
    v[(u < 0) | (u >= mbar + 1)] = 0.0
    return v


def dilated_oracle(l: int, j: int, mbar: int, p: float, b: int, x: np.ndarray) -> np.ndarray:
    fac = 1.0 if np.isinf(p) else float(b) ** (l / p)
    return fac * bspline_oracle(mbar, x * float(b) ** l - j)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_CRITERIA: dict = {}


def pytest_runtest_logreport(report):
    num = dict(report.user_properties).get("criterion")
    if num is None:
        return
    entry = _CRITERIA.setdefault(num, {"title": dict(report.user_properties)["title"],
                                       "ok": True, "detail": ""})
    if report.failed:
        entry["ok"] = False
    if report.when == "call":
        entry["detail"] = dict(report.user_properties).get("measured", "")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        status = "PASS" if e["ok"] else "FAIL"
        line = f"criterion {num:2d} {status}  {e['title']}"
        if e["detail"]:
            line += f"  [{e['detail']}]"
        terminalreporter.write_line(line)


@pytest.fixture(autouse=True)
def _criterion_properties(request, record_property):
    mark = request.node.get_closest_marker("criterion")
    if mark is not None:
        record_property("criterion", mark.args[0])
        record_property("title", mark.args[1])
