import functools

import numpy as np
import pytest

from multidiscrete import build_plan, preset_scenarios, run_replication
from multidiscrete.calibration import CalibrationOptions
from multidiscrete.eval_harness import load_preset_config

SEED = 2345

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


@functools.lru_cache(maxsize=None)
def preset_plan(base, seed=SEED):
    cfg = load_preset_config(base)
    return build_plan(cfg.margins, cfg.correlation, CalibrationOptions(seed=seed),
                      labels=cfg.labels)


@functools.lru_cache(maxsize=None)
def preset_table(name, replications=200, seed=SEED):
    base = name.rsplit("-", 1)[0]
    scen = next(s for s in preset_scenarios(replications) if s.name == name)
    return run_replication(scen, seed, plan=preset_plan(base, seed))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
