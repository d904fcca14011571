import io
import time

import pytest

from conicbundles.cli import main


def run_cli(*argv):
    """Run the CLI in-process; returns (exit code, stdout text, seconds)."""
    buf = io.StringIO()
    t0 = time.perf_counter()
    rc = main(list(argv), out=buf)
    return rc, buf.getvalue(), time.perf_counter() - t0


def csv_body(text):
    return [line for line in text.splitlines() if line and not line.startswith("#")]


@pytest.fixture(scope="session")
def classify_runs():
    """`dp classify` output per degree, computed at most once per session.

    The degree 4 run takes more than a minute on one core, so the dp tests
    and the acceptance suite share it.
    """
    cache = {}

    def get(d):
        if d not in cache:
            cache[d] = run_cli("dp", "classify", "--degree", str(d))
        return cache[d]

    return get
