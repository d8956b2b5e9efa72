from collections import OrderedDict

import pytest

# criterion id -> list of (part, ok, detail), filled by the acceptance suite
_CRITERIA = OrderedDict()


@pytest.fixture(scope="session")
def criterion():
    def record(cid, part, ok, detail=""):
        _CRITERIA.setdefault(cid, []).append((part, bool(ok), detail))
        return bool(ok)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: int(c[1:])):
        parts = _CRITERIA[cid]
        verdict = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        body = "; ".join(f"{p} {'ok' if ok else 'FAILED'} ({d})" if d else f"{p} {'ok' if ok else 'FAILED'}"
                         for p, ok, d in parts)
        tr.write_line(f"{verdict} {cid}: {body}")
