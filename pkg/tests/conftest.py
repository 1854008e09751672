import random

import pytest

from hatchsens.model import Band, default_thresholds


def crc16_bitserial(data: bytes) -> int:
    """Independent bit-serial CRC-16/CCITT-FALSE used to check the codec."""
    crc = 0xFFFF
    for byte in data:
        for bit in range(8):
            msb = (crc >> 15) & 1
            inbit = (byte >> (7 - bit)) & 1
            crc = (crc << 1) & 0xFFFF
            if msb ^ inbit:
                crc ^= 0x1021
    return crc


def random_band(rng: random.Random) -> Band:
    edges = sorted(rng.uniform(-100.0, 100.0) for _ in range(4))
    return Band(*edges)


@pytest.fixture
def thresholds():
    return default_thresholds()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    results = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance" in rep.nodeid and "::" in rep.nodeid:
                results[rep.nodeid.split("::")[-1]] = outcome
    if results:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name in sorted(results):
            status = "PASS" if results[name] == "passed" else "FAIL"
            terminalreporter.write_line(f"{name}: {status}")
