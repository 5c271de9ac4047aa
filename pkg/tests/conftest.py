import pytest

# one-line titles of the acceptance criteria, keyed by number
CRITERIA = {
    1: "algebraic identities (est^2 = r^T Theta^-1 r, Galerkin optimality)",
    2: "polynomial exactness for Example 1 with p=2, q=3, m=4, n=5",
    3: "Example 1 uniform rates",
    4: "Example 2 uniform and adaptive rates",
    5: "Example 3 uniform and adaptive rates",
    6: "operator oracles (fractional integrals, coupling entries, Slobodeckij moments, adjoint)",
    7: "Theta SPD on random meshes and the discrete inf-sup failure guard",
    8: "adaptivity: refinement towards x = 0 and Doerfler inequality plus minimality",
}

_outcomes = {}     # criterion -> list of bool
_notes = {}        # criterion -> list of measured values


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): test belongs to acceptance criterion n")


@pytest.fixture
def note(request):
    """Record a measured value for the acceptance summary line of this test's criterion."""
    mark = request.node.get_closest_marker("criterion")

    def add(text):
        if mark is not None:
            _notes.setdefault(mark.args[0], []).append(str(text))
    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _outcomes.setdefault(mark.args[0], []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        results = _outcomes.get(n)
        if not results:
            status = "NOT RUN"
        else:
            status = "PASS" if all(results) else "FAIL"
        line = f"criterion {n}: {status}: {title}"
        if _notes.get(n):
            line += " [" + "; ".join(_notes[n]) + "]"
        terminalreporter.write_line(line)
