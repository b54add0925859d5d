from pathlib import Path

import pytest

from evshield import gridmodel

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def scenario_text(name: str) -> str:
    return (SCENARIO_DIR / name).read_text()


@pytest.fixture(scope="session")
def desk2_text():
    return scenario_text("desk_2m.scn")


@pytest.fixture(scope="session")
def desk4_text():
    return scenario_text("desk_4m.scn")


@pytest.fixture(scope="session")
def smib_text():
    return scenario_text("smib.scn")


@pytest.fixture(scope="session")
def desk2_grid(desk2_text):
    return gridmodel.load_grid(desk2_text)


@pytest.fixture(scope="session")
def desk4_grid(desk4_text):
    return gridmodel.load_grid(desk4_text)


@pytest.fixture(scope="session")
def smib_grid(smib_text):
    return gridmodel.load_grid(smib_text)


@pytest.fixture(scope="session")
def desk2_plant(desk2_grid):
    op = gridmodel.solve_powerflow(desk2_grid)
    return gridmodel.linearize(desk2_grid, op)


@pytest.fixture(scope="session")
def desk4_plant(desk4_grid):
    op = gridmodel.solve_powerflow(desk4_grid)
    return gridmodel.linearize(desk4_grid, op)


@pytest.fixture(scope="session")
def smib_plant(smib_grid):
    op = gridmodel.solve_powerflow(smib_grid)
    return gridmodel.linearize(smib_grid, op)
