import numpy as np
import pytest

from melsynth.corpus import Corpus


@pytest.fixture(scope="session")
def tiny_corpus() -> Corpus:
    """2 tracks x 3 patches, 3 s each; shared by the fast unit tests."""
    return Corpus.generate(n_tracks=2, seed=7, seconds=3.0,
                           instruments=[0, 1, 2], validation_tracks=1)


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-8)
    return float((np.abs(analytic - numeric) / denom).max())


def numeric_grad(loss_fn, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function of x (in place)."""
    grad = np.zeros_like(x)
    flat, gflat = x.ravel(), grad.ravel()
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = loss_fn()
        flat[i] = keep - eps
        lo = loss_fn()
        flat[i] = keep
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


# ---------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion at the end of the run


@pytest.fixture
def acceptance(request):
    """Returns a callable the acceptance tests use to attach the measured
    values that the end-of-run summary prints next to PASS/FAIL."""
    notes = getattr(request.config, "_acceptance_notes", None)
    if notes is None:
        notes = request.config._acceptance_notes = {}

    def note(text: str):
        notes[request.node.nodeid] = text
    return note


def pytest_terminal_summary(terminalreporter):
    stats = terminalreporter.stats
    results = {}
    for outcome in ("passed", "failed", "error"):
        for report in stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py::" in nodeid:
                results[nodeid] = "PASS" if outcome == "passed" else "FAIL"
    if not results:
        return
    notes = getattr(terminalreporter.config, "_acceptance_notes", {})
    terminalreporter.write_sep("-", "acceptance criteria")
    for nodeid in sorted(results):
        name = nodeid.split("::")[-1].replace("test_", "", 1)
        line = f"{results[nodeid]}  {name}"
        if nodeid in notes:
            line += f"  ({notes[nodeid]})"
        terminalreporter.write_line(line)
