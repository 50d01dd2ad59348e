import numpy as np
import pytest

from groupspam.core import Dataset, GroupStructure
from groupspam.smoother import SmootherSet

# criterion id -> (title, passed, detail), filled by the acceptance tests
ACCEPTANCE = {}


def additive_data(n=60, p=6, seed=0, noise=0.3, t=0.0):
    """Small additive dataset with signal in the first three covariates."""
    rng = np.random.default_rng(seed)
    W = rng.uniform(-2.5, 2.5, size=(n, p))
    U = rng.uniform(-2.5, 2.5, size=(n, 1))
    x = (W + t * U) / (1 + t)
    y = np.sin(x[:, 0]) + 0.5 * x[:, 1] ** 2 - x[:, min(2, p - 1)]
    y = y + noise * rng.standard_normal(n)
    return Dataset(x, y)


@pytest.fixture
def small():
    ds = additive_data()
    return ds, SmootherSet.from_dataset(ds)


@pytest.fixture
def small_groups():
    return GroupStructure((("a", (0, 1)), ("b", (2, 3)), ("c", (4, 5))), 6)


@pytest.fixture
def acceptance(request):
    """Record the outcome line of one acceptance criterion."""
    notes = {}

    def note(cid, title, detail):
        notes.update(cid=cid, title=title, detail=detail)

    yield note
    if notes:
        rep = getattr(request.node, "rep_call", None)
        passed = rep is not None and rep.passed
        ACCEPTANCE[notes["cid"]] = (notes["title"], passed, notes["detail"])


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call":
        item.rep_call = rep
    return rep


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: (len(c), c)):
        title, passed, detail = ACCEPTANCE[cid]
        tr.write_line("%s criterion %s: %s | %s" % ("PASS" if passed else "FAIL", cid, title, detail))
