import numpy as np
import pytest

from echotutor.geometry import ProbePose
from echotutor.volume import PhantomSpec, generate_phantom

TARGET_POSE = ProbePose(np.array([0.5, 0.5, 0.0]))


@pytest.fixture(scope="session")
def vol64():
    return generate_phantom(PhantomSpec(resolution=(64, 64, 64)))


@pytest.fixture(scope="session")
def vol128():
    return generate_phantom(PhantomSpec())


@pytest.fixture(scope="session")
def vol256():
    return generate_phantom(PhantomSpec(resolution=(256, 256, 256)))


@pytest.fixture(scope="session")
def target_pose():
    return TARGET_POSE
