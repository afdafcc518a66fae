import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from tdaccess.io import PROFILE_COLUMNS, write_csv  # noqa: E402
from tdaccess.synthgen import SynthSpec, generate  # noqa: E402

# fixed example database-free runs so the suite is reproducible
settings.register_profile("repro", derandomize=True, database=None)
settings.load_profile("repro")

SMALL_CITY = SynthSpec(rings=5, radials=8, ring_spacing_km=2.0)

# Filled by tests/test_acceptance.py, echoed after the run.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_city(tmp_path_factory):
    return generate(SMALL_CITY, tmp_path_factory.mktemp("small_city"))


@pytest.fixture(scope="session")
def small_run(small_city):
    from tdaccess.pipeline import run_pipeline

    return run_pipeline(small_city)


def write_minimal_scenario(root: Path, *, links=None, profiles=None, extra_cfg=""):
    """Two nodes 2 km apart, one oneway link, two populated 2 km zones."""
    root.mkdir(parents=True, exist_ok=True)
    write_csv(root / "nodes.csv", ["id", "x", "y"], [["a", 1000, 1000], ["b", 3000, 1000]])
    write_csv(
        root / "links.csv",
        ["id", "from", "to", "length_m", "freeflow_kmh", "frc", "oneway", "profile_id"],
        links if links is not None else [["ab", "a", "b", 2000, 60, 2, 1, ""]],
    )
    if profiles is not None:
        write_csv(root / "profiles.csv", ["id"] + PROFILE_COLUMNS[: len(profiles[0]) - 1], profiles)
    write_csv(root / "population.csv", ["cell_x", "cell_y", "pop"], [[0, 0, 10], [1000, 0, 20], [2000, 0, 30], [3000, 1000, 40]])
    lines = ["nodes = nodes.csv", "links = links.csv", "population = population.csv", "output_dir = out"]
    if profiles is not None:
        lines.append("profiles = profiles.csv")
    (root / "scenario.cfg").write_text("\n".join(lines) + "\n" + extra_cfg, encoding="utf-8")
    return root / "scenario.cfg"


@pytest.fixture
def minimal_cfg(tmp_path):
    return write_minimal_scenario(tmp_path / "minimal")


def flat_profile(value, n=203):
    return np.full(n, float(value))
