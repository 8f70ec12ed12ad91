import pytest

from pentimento.bti import Regime
from pentimento.cli import bundled
from pentimento.experiment import Calibrate, Condition, Measure
from pentimento.runconfig import ConfigError, load_config, parse_lengths, parse_phases


def test_bundled_configs_load():
    for name, hours in [("experiment1.cfg", 400), ("experiment2.cfg", 200), ("experiment3.cfg", 225)]:
        cfg = load_config(bundled(name).read_text(), name)
        assert len(cfg.routes) == 64 and len(cfg.burn) == 64
        assert cfg.schedule.total_hours == hours
    assert load_config(bundled("experiment3.cfg").read_text()).theta == "fleet"
    assert load_config(bundled("experiment2.cfg").read_text()).env.regime is Regime.CLOUD


def test_lengths_syntax():
    assert parse_lengths("1000*2, 500") == [1000, 1000, 500]
    assert len(parse_lengths("standard")) == 64


def test_explicit_phases():
    text = "calibrate\nmeasure\nrepeat 3: condition X 2; measure\ncondition ~X 1h\n"
    phases = parse_phases(text)
    assert phases[:2] == (Calibrate(), Measure())
    assert phases[2:8] == (Condition("X", 2.0), Measure()) * 3
    assert phases[-1] == Condition("~X", 1.0)


def test_custom_config():
    cfg = load_config(
        "[run]\nlengths_ps = 500*3\nburn_bits = 101\nphases =\n  calibrate\n  repeat 2: condition 1 5; measure\n"
        "regime = cloud\nnoise_sigma_ps = 0.8\nseed = 4\n"
    )
    assert [r.nominal_delay_ps for r in cfg.routes] == [500] * 3
    assert cfg.burn.bits == (1, 0, 1)
    assert cfg.schedule.total_hours == 10
    assert cfg.env.noise_sigma_ps == 0.8 and cfg.seed == 4


@pytest.mark.parametrize(
    "text, line",
    [
        ("[run]\nburn_seed = 1\nschedule = experiment9\n", 3),
        ("[run]\nburn_seed = 1\nschedule = experiment2\nbogus = 3\n", 4),
        ("[run]\nburn_bits = 10\nschedule = experiment2\n", 2),
        ("[run]\nburn_seed = 1\nschedule = experiment2\nregime = orbit\n", 4),
        ("[run]\nburn_seed = 1\nphases = measure\n  jump\n", 3),
    ],
)
def test_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError, match=f":{line}:"):
        load_config(text, "x.cfg")


def test_structural_errors():
    with pytest.raises(ConfigError):
        load_config("no section here\n")
    with pytest.raises(ConfigError):
        load_config("[other]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_config("[run]\nschedule = experiment2\n")  # no burn source


def test_inline_comments_are_ignored():
    cfg = load_config(
        "[run]\n"
        "lengths_ps = 1000*16, 2000*16, 5000*16, 10000*16   # or: standard\n"
        "burn_seed = 7                                      # or: burn_bits = 0110...\n"
        "schedule = experiment2                             # or: phases = (see below)\n"
        "regime = cloud\n"
        "seed = 11\n"
    )
    assert len(cfg.routes) == 64 and cfg.seed == 11 and cfg.schedule_name == "experiment2"
