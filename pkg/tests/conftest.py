import contextlib
import time

import pytest

ACCEPTANCE: dict[int, str] = {}


class _Record:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.detail = ""
        self.start = time.perf_counter()

    def line(self, status: str, extra: str = "") -> str:
        elapsed = time.perf_counter() - self.start
        parts = [f"criterion {self.number:>2}: {status}  {self.title}", f"({elapsed:.2f}s)"]
        if self.detail:
            parts.append(f"- {self.detail}")
        if extra:
            parts.append(f"- {extra}")
        return " ".join(parts)


@pytest.fixture
def criterion():
    """``with criterion(n, title) as rec:`` records a PASS/FAIL line for the acceptance summary."""

    @contextlib.contextmanager
    def open_record(number: int, title: str):
        rec = _Record(number, title)
        try:
            yield rec
        except AssertionError as exc:
            first = str(exc).strip().splitlines()[0] if str(exc).strip() else "assertion failed"
            ACCEPTANCE[number] = rec.line("FAIL", first)
            print(ACCEPTANCE[number])
            raise
        ACCEPTANCE[number] = rec.line("PASS")
        print(ACCEPTANCE[number])

    return open_record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
