import numpy as np
import pytest


def central_difference_grads(f, arrays, step=1e-4):
    """Numeric gradient of scalar f() w.r.t. each array, perturbing in place."""
    grads = {}
    for name, arr in arrays.items():
        g = np.zeros_like(arr)
        flat = arr.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = f()
            flat[i] = orig - step
            f_minus = f()
            flat[i] = orig
            gf[i] = (f_plus - f_minus) / (2.0 * step)
        grads[name] = g
    return grads


def assert_grads_close(analytic, numeric, rtol=1e-4, atol=1e-7):
    for name, num in numeric.items():
        ana = analytic[name]
        assert ana is not None, f"no analytic gradient for {name}"
        diff = np.abs(ana - num)
        scale = np.abs(ana) + np.abs(num)
        bad = (diff > atol) & (diff > rtol * scale)
        assert not bad.any(), (
            f"{name}: worst abs diff {diff.max():.3e}, "
            f"worst rel {np.max(diff / np.maximum(scale, 1e-30)):.3e}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[acceptance] {name}: {outcome}", flush=True)
