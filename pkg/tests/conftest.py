import pytest

from slitlab.analysis import analyze
from slitlab.ccdsim import BeamModel, SensorModel, generate_frameset

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def sensor():
    return SensorModel()


@pytest.fixture(scope="session")
def beam():
    return BeamModel()


@pytest.fixture(scope="session")
def quiet_sensor(sensor):
    return sensor.noiseless()


@pytest.fixture(scope="session")
def noiseless_frames(quiet_sensor, beam):
    return generate_frameset(quiet_sensor, beam, 4, seed=42)


@pytest.fixture(scope="session")
def noisy_frames(sensor, beam):
    return generate_frameset(sensor, beam, 1500, seed=42)


@pytest.fixture(scope="session")
def noiseless_result(noiseless_frames, quiet_sensor, beam):
    return analyze(noiseless_frames, beam.geometry, quiet_sensor.pixel_pitch,
                   positions=quiet_sensor.positions())


@pytest.fixture(scope="session")
def noisy_result(noisy_frames, sensor, beam):
    return analyze(noisy_frames, beam.geometry, sensor.pixel_pitch,
                   positions=sensor.positions())


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
