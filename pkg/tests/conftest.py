import numpy as np
import pytest
from hypothesis import strategies as st

from pbbmoea import expr as E

# Each randomized suite checks PROPERTY_CASES cases: hypothesis draws
# EXAMPLES structured inputs plus a seed, and every example checks BATCH
# numpy-generated cases derived from that seed.
PROPERTY_CASES = 10_000
BATCH = 10
EXAMPLES = PROPERTY_CASES // BATCH
seeds = st.integers(0, 2**63 - 1)


def _leaf(n):
    return st.one_of(
        st.integers(0, n - 1).map(E.var),
        st.floats(-3, 3, allow_nan=False).map(lambda c: E.const(round(c, 3))),
    )


def _grow(children):
    """Compositions that stay inside every operator's domain on any real box."""
    unary = st.sampled_from([
        E.neg, E.exp, E.sin, E.cos, E.atan, E.fabs,
        lambda a: a**2, lambda a: a**3,
        lambda a: E.sqrt(a**2 + 0.5),
        lambda a: E.log(a**2 + 1),
        lambda a: 1 / (a**2 + 1),
        lambda a: E.power(E.fabs(a), 2.5),
    ])
    binary = st.sampled_from([E.add, E.sub, E.mul, E.minimum, E.maximum])
    return st.one_of(
        st.tuples(unary, children).map(lambda t: t[0](t[1])),
        st.tuples(binary, children, children).map(lambda t: t[0](t[1], t[2])),
    )


def expressions(n=2, max_leaves=8):
    return st.recursive(_leaf(n), _grow, max_leaves=max_leaves)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance report -------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def report(criterion: int, ok: bool, detail: str):
    """Record and print one acceptance line, then fail the test if needed."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
