import numpy as np
import pytest

from trajenv.trajstore import AgentKind, DatasetBundle, SceneMeta, Track


def scene(scene_id="s1", dataset_id="d1", rate=10.0, area=100.0):
    return SceneMeta(scene_id, dataset_id, rate, area)


def track(positions, agent_id="a", kind=AgentKind.PEDESTRIAN, meta=None, start_frame=0, frames=None):
    meta = meta or scene()
    positions = np.asarray(positions, dtype=float)
    if frames is None:
        frames = np.arange(start_frame, start_frame + len(positions))
    return Track.from_frames(agent_id, kind, meta, frames, positions)


def bundle(tracks, metas=None):
    metas = metas or [scene()]
    return DatasetBundle({m.scene_id: m for m in metas}, tuple(tracks))


def line(start, velocity, n, rate=10.0):
    """Positions of uniform straight motion sampled at ``rate`` Hz."""
    t = np.arange(n) / rate
    return np.asarray(start, float) + np.outer(t, velocity)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record a one-line PASS/FAIL verdict; lines are echoed in the terminal summary."""

    def _report(name, ok, detail=""):
        status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
        line = f"{status}  {name}" + (f"  ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
