import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sphere8.geometry import CorrespondenceSet, RelativePose, unit
from sphere8.rng import make_rng
from sphere8.synth import NoiseModel, SceneConfig, make_trial, sample_pose

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def exact_scene(seed, n=50, depth=(1.0, 10.0)):
    """Noise-free scene built directly from landmarks, independent of the synth module."""
    rng = np.random.default_rng(seed)
    pose, baseline = sample_pose(rng)
    X = unit(rng.normal(size=(n, 3))) * rng.uniform(*depth, size=(n, 1))
    X2 = X @ pose.R.T + baseline * pose.t
    return pose, CorrespondenceSet(unit(X), unit(X2)), X, baseline


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def noisy_trial():
    return make_trial(3, SceneConfig(n_points=200), NoiseModel(kappa=500.0, outlier_ratio=0.2), seed=11)


def random_rotation(rng):
    q = unit(rng.normal(size=4))
    a, b, c, d = q
    return np.array([
        [a*a + b*b - c*c - d*d, 2*(b*c - a*d), 2*(b*d + a*c)],
        [2*(b*c + a*d), a*a - b*b + c*c - d*d, 2*(c*d - a*b)],
        [2*(b*d - a*c), 2*(c*d + a*b), a*a - b*b - c*c + d*d],
    ])


def random_pose(rng):
    return RelativePose(random_rotation(rng), unit(rng.normal(size=3)))


ACCEPTANCE = pytest.StashKey()


@pytest.fixture
def acceptance_line(request):
    """Record a one-line verdict; printed inline and again in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        if reporter is not None:
            reporter.write_line("")
            reporter.write_line(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
