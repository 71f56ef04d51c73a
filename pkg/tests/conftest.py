import pytest

from graphene_search import LatticeSpec, build_search_hamiltonian, eig_sym


@pytest.fixture(scope="session")
def spec12():
    return LatticeSpec(12, 12)


@pytest.fixture(scope="session")
def spectrum12(spec12):
    """Eigendecomposition of the gamma = 1 search Hamiltonian, marked (0,0,A)."""
    return eig_sym(build_search_hamiltonian(spec12, 1.0))


_RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion as a list of ``(label, ok, detail)`` sub-checks.

    Prints a single PASS/FAIL line and returns the failing sub-checks.
    """
    store = request.config.stash[_RESULTS]

    def record(number, title, checks):
        failed = [c for c in checks if not c[1]]
        detail = "; ".join(f"{label}: {d} [{'ok' if ok else 'FAIL'}]" for label, ok, d in checks)
        line = f"criterion {number:>2} {'PASS' if not failed else 'FAIL'}  {title} | {detail}"
        store[number] = line
        print(line)
        return failed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
