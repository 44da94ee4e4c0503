import sys

import numpy as np
import pytest

from nafdyn.models import REGISTRY, SCATTERING_MODELS, build_model

SMALL_BATHS = {"spin_boson": {"n_modes": 20}, "fmo7": {"n_modes": 5},
               "singlet_fission": {"n_modes": 10}, "cavity2level": {"n_modes": 20},
               "cavity3level": {"n_modes": 20}}


def model_spec(name, small=True):
    spec = {"name": name}
    if name in SCATTERING_MODELS:
        spec["p0"] = 20.0
    if small:
        spec.update(SMALL_BATHS.get(name, {}))
    return spec


def random_geometry(model, rng, spread=2.0):
    init = model.nuclear_init
    R = init.mean_R + spread * init.sigma_R * rng.standard_normal(model.N)
    if model.hard_wall is not None:
        R = np.abs(R) + 0.5
    return R


@pytest.fixture(params=sorted(REGISTRY))
def any_model(request):
    return build_model(model_spec(request.param))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 13):
        parts = module.RESULTS.get(n)
        if not parts:
            terminalreporter.write_line(f"criterion {n:2d}: FAIL (not run or errored)")
            continue
        ok = all(p[0] for p in parts)
        detail = "; ".join(p[1] for p in parts)
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
