"""Shared record of acceptance verdicts, filled by test_acceptance and printed by conftest."""

ACCEPTANCE = {}


def record(n, passed, text):
    line = f"criterion {n:>2}: {'PASS' if passed else 'FAIL'}  {text}"
    ACCEPTANCE[n] = line
    print(line)
    return passed
