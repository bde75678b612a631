from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
SCENARIO_DIR = REPO_ROOT / "scenarios"


@pytest.fixture(scope="session")
def atlanta_text() -> str:
    return (SCENARIO_DIR / "atlanta.licain").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def bioweapon_text() -> str:
    return (SCENARIO_DIR / "bioweapon.licain").read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def scenario_paths() -> dict[str, Path]:
    return {
        "atlanta": SCENARIO_DIR / "atlanta.licain",
        "bioweapon": SCENARIO_DIR / "bioweapon.licain",
    }
