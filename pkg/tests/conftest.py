import dataclasses

import pytest

from hideseek.config import ObservationSection, ParallelConfig, TrainPhase
from hideseek.presets import preset
from hideseek.sensors import GridSensorConfig

COARSE_SPATIAL = GridSensorConfig(90, 90, 180, 0.1, 20, 45, 0.5, 32)
COARSE_FRONTAL = GridSensorConfig(42, 42, 84, 0.1, 20, 42, 0.5, 400)


def small_config(name="hideseek_curriculum", *, seed=0, steps=600, batch=32, instances=(1, 2), workers=1,
                 phases=None, hidden=8, **episode):
    """A desk-sized run config: coarse grids, short episodes, tiny network."""
    cfg = preset(name).config
    ep = dataclasses.replace(cfg.episode, max_env_steps=steps, **episode)
    if phases is None:
        team = "hiders" if cfg.is_hideseek else "single_agent"
        opp = "scripted_random" if cfg.is_hideseek else "none"
        phases = (TrainPhase(team, opp, 2 * steps),)
    total = sum(p.step_budget for p in phases)
    return dataclasses.replace(
        cfg,
        run=dataclasses.replace(cfg.run, seed=seed, total_env_steps=total, checkpoint_interval=1),
        parallel=ParallelConfig(instances[0], instances[1], workers),
        learn=dataclasses.replace(cfg.learn, batch_size=batch, hidden_units=hidden),
        episode=ep,
        spatial_sensor=COARSE_SPATIAL,
        frontal_sensor=COARSE_FRONTAL,
        observation=ObservationSection(True, True),
        phases=tuple(phases),
    ).validate()


@pytest.fixture
def tiny_cfg():
    return small_config()


ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
