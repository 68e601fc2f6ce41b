import numpy as np
import pytest

from trafficjoint.trace import ClassLabel, FlowTrace

ACCEPTANCE_LINES: list[str] = []


def record_acceptance(criterion: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


VO = ClassLabel(0, "VO")
VI = ClassLabel(1, "VI")
GM = ClassLabel(2, "GM")


def make_trace(times, sizes=None, uplink=None, udp=None, label=VO, duration=None):
    n = len(times)
    return FlowTrace(
        times,
        sizes if sizes is not None else [100] * n,
        uplink if uplink is not None else [True] * n,
        udp if udp is not None else [False] * n,
        label,
        "test",
        duration,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
