from pathlib import Path

import numpy as np
import pytest

from src.core.config import Settings, format_config, load_config, parse_config
from src.core.exceptions import ConfigError
from src.models.schema import default_snapshot_ladder
from src.solver.scenario import initial_state

EXPERIMENTS = Path(__file__).resolve().parent.parent / "experiments"

BASE = """\
a = 0
b = 1
k = 20
tau = 0.01
t_end = 0.1
cost = relativistic
gamma = 1
m = 1
init = uniform
init_support = 0.25, 0.75
"""


def test_shipped_p7_config():
    cfg = load_config(str(EXPERIMENTS / "p7_linear.cfg"))
    assert (cfg.a, cfg.b, cfg.k) == (-4.0, 4.0, 1000)
    assert cfg.tau == 0.01 and cfg.t_end == 2.0
    assert cfg.cost.kind == "p_power" and cfg.cost.p == 7.0
    assert cfg.m == 1.0
    assert cfg.potential.is_constant
    assert cfg.init.support == (-0.3, 0.3)
    assert cfg.floor == 1e-3
    assert cfg.jko.n_steps == 200


@pytest.mark.parametrize("name", sorted(p.name for p in EXPERIMENTS.glob("*.cfg")))
def test_every_shipped_config_parses(name):
    cfg = load_config(str(EXPERIMENTS / name))
    assert cfg.snapshot_steps


def test_k_below_two_is_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config(BASE.replace("k = 20", "k = 0"))
    assert "k must be ≥ 2" in str(info.value)
    assert info.value.line == 3


def test_missing_gamma_is_named():
    with pytest.raises(ConfigError) as info:
        parse_config(BASE.replace("gamma = 1\n", ""))
    assert "gamma" in str(info.value)


def test_unknown_key_reports_location():
    with pytest.raises(ConfigError) as info:
        parse_config(BASE + "  colour = blue\n")
    assert info.value.line == 11
    assert info.value.column == 3
    assert str(info.value).startswith("line 11, column 3: unknown key 'colour'")


@pytest.mark.parametrize("line", ["tau 0.01", "tau =", "9lives = 3"])
def test_malformed_lines(line):
    with pytest.raises(ConfigError) as info:
        parse_config(BASE + line + "\n")
    assert info.value.line == 11


def test_duplicate_key():
    with pytest.raises(ConfigError) as info:
        parse_config(BASE + "k = 30\n")
    assert "duplicate" in str(info.value)


def test_comments_are_ignored():
    cfg = parse_config("# header\n" + BASE.replace("k = 20", "k = 20  # points"))
    assert cfg.k == 20


def test_horizon_must_be_whole_steps():
    with pytest.raises(ConfigError) as info:
        parse_config(BASE.replace("t_end = 0.1", "t_end = 0.015"))
    assert "integer" in str(info.value)


def test_snapshot_times_must_be_step_multiples():
    with pytest.raises(ConfigError):
        parse_config(BASE + "snapshot_times = 0.015\n")
    cfg = parse_config(BASE + "snapshot_times = 0.05, 0.02, 0.1\n")
    assert cfg.snapshot_steps == [2, 5, 10]


def test_default_snapshot_ladder():
    times = default_snapshot_ladder(0.01, 2.0)
    steps = np.rint(np.array(times) / 0.01)
    assert times[0] == pytest.approx(0.01)
    assert times[-1] <= 2.0
    assert np.all(np.diff(steps) > 0)
    assert np.allclose(np.array(times) / 0.01, steps)
    cfg = parse_config(BASE)
    assert cfg.snapshot_steps[0] == 1


def test_init_support_outside_domain():
    with pytest.raises(ConfigError) as info:
        parse_config(BASE.replace("init_support = 0.25, 0.75", "init_support = -0.5, 0.5"))
    assert "init_support" in str(info.value)


def test_quadratic_potential():
    cfg = parse_config(BASE + "potential = quadratic\npotential_weight = 2\npotential_center = 0.5\n")
    assert cfg.potential.kind == "quadratic"
    assert cfg.potential.coefficients == (2.0,)
    assert cfg.potential.domain == (0.0, 1.0)
    assert not cfg.energy.potential.is_constant


def test_format_round_trip():
    cfg = load_config(str(EXPERIMENTS / "qlaplace.cfg"))
    assert parse_config(format_config(cfg)) == cfg
    tuned = parse_config(BASE + "newton_tol = 1e-10\nmin_gap = 1e-12\n")
    assert parse_config(format_config(tuned)) == tuned


def test_csv_initial_density(tmp_path):
    (tmp_path / "init.csv").write_text("x,u\n0.2,0\n0.5,2\n0.8,0\n", encoding="utf-8")
    text = BASE.replace("init = uniform\ninit_support = 0.25, 0.75\n", "init = csv\ninit_file = init.csv\n")
    cfg = parse_config(text, base_dir=tmp_path)
    assert cfg.init.file == str(tmp_path / "init.csv")
    x0 = initial_state(cfg)
    assert x0.k == 20
    # symmetric hat: the median sits at its peak
    assert x0.values[10] == pytest.approx(0.5, abs=1e-9)


def test_missing_csv_file(tmp_path):
    text = BASE.replace("init = uniform\ninit_support = 0.25, 0.75\n", "init = csv\ninit_file = nowhere.csv\n")
    cfg = parse_config(text, base_dir=tmp_path)
    with pytest.raises(ConfigError):
        initial_state(cfg)


def test_unreadable_config_path(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.cfg"))


def test_environment_settings(monkeypatch):
    monkeypatch.setenv("LAGFLOW_OUT", "/tmp/lagflow-runs")
    monkeypatch.setenv("MAX_WORKERS", "4")
    env = Settings()
    assert env.LAGFLOW_OUT == "/tmp/lagflow-runs"
    assert env.MAX_WORKERS == 4
