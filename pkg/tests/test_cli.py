import dataclasses

import numpy as np
import pytest

from uavnav import cli
from uavnav.config import (
    ConfigError,
    RunConfig,
    config_fingerprint,
    default_config,
    derive_seed,
    echo_config,
    load_config,
    stream,
)

MICRO = """
profile = desk
airspace_x = 300.0
airspace_y = 300.0
destination_x = 240.0
destination_y = 240.0
bs_positions = 80,80; 220,220
num_measurements = 20
buffer_capacity = 120
minibatch = 16
episodes = 5
step_cap = 40
n_ms = 5
hidden_sizes = 16,16
n_eval_starts = 3
topmap_resolution = 50.0
"""


@pytest.fixture()
def micro_cfg_file(tmp_path):
    path = tmp_path / "micro.cfg"
    path.write_text(MICRO)
    return path


# --- Config loading -----------------------------------------------------------


def test_empty_file_gives_paper_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = load_config(path)
    assert cfg.tau == 50.0
    assert cfg.slot_seconds == 0.5
    assert cfg.buffer_capacity == 20000
    assert cfg.minibatch == 128
    assert cfg.n_ms == 30
    assert cfg.target_sync_episodes == 5
    assert cfg.episodes == 2000
    assert cfg.step_cap == 400
    assert cfg.gamma == 1.0
    assert cfg.epsilon_init == 0.5
    assert cfg.r_destination == 400.0
    assert cfg.r_boundary == -10000.0
    assert len(cfg.bs_positions) == 4


def test_out_of_range_gamma_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("gamma = 1.2\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("not_a_key = 1\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_malformed_line_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("just some words\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_bad_value_rejected(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("episodes = many\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_config_round_trip(tmp_path, micro_cfg_file):
    cfg = load_config(micro_cfg_file)
    echoed = tmp_path / "echo.cfg"
    echo_config(cfg, echoed)
    assert load_config(echoed) == cfg


def test_round_trip_paper_defaults(tmp_path):
    cfg = default_config("paper")
    echoed = tmp_path / "echo.cfg"
    echo_config(cfg, echoed)
    assert load_config(echoed) == cfg


def test_desk_profile_pins():
    cfg = default_config("desk")
    assert cfg.airspace_x == 600.0
    assert len(cfg.bs_positions) == 2
    assert cfg.num_measurements == 200
    assert cfg.buffer_capacity == 4000
    assert cfg.minibatch == 64
    assert cfg.episodes == 600


def test_fingerprint_tracks_content():
    a = default_config("desk")
    b = dataclasses.replace(a, seed=99)
    assert config_fingerprint(a) != config_fingerprint(b)
    assert config_fingerprint(a) == config_fingerprint(default_config("desk"))


def test_comments_and_blank_lines(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# full comment\n\ntau = 40.0  # trailing comment\n")
    assert load_config(path).tau == 40.0


# --- Seed streams ------------------------------------------------------------


def test_streams_are_labeled_and_reproducible():
    a = stream(7, "starts").uniform(size=4)
    b = stream(7, "starts").uniform(size=4)
    c = stream(7, "fading").uniform(size=4)
    d = stream(8, "starts").uniform(size=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
    assert derive_seed(7, "x", 1) != derive_seed(7, "x", 2)


# --- CLI dispatch ---------------------------------------------------------------


def test_unknown_flag_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["train", "--bogus", "1"])
    assert exc.value.code == 2


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.main(["frobnicate"])
    assert exc.value.code == 2


def test_missing_config_file_is_config_error(tmp_path, capsys):
    rc = cli.main(["train", "--config", str(tmp_path / "nope.cfg")])
    assert rc == 2


def test_bad_config_value_is_config_error(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("gamma = 1.2\n")
    rc = cli.main(["train", "--config", str(path)])
    assert rc == 2


def test_train_command(tmp_path, micro_cfg_file, capsys):
    out = tmp_path / "run"
    rc = cli.main(
        ["train", "--config", str(micro_cfg_file), "--variant", "qier",
         "--seed", "7", "--out", str(out)]
    )
    assert rc == 0
    assert (out / "episodes.csv").exists()
    assert (out / "checkpoint_final.npz").exists()
    cfg = load_config(out / "config_resolved.txt")
    assert cfg.seed == 7 and cfg.variant == "qier"


def test_topmap_command(tmp_path, micro_cfg_file, capsys):
    out = tmp_path / "map"
    rc = cli.main(["topmap", "--config", str(micro_cfg_file), "--out", str(out)])
    assert rc == 0
    grid = np.loadtxt(out / "topmap.csv", delimiter=",")
    assert grid.shape == (6, 6)
    assert (out / "topmap.pgm").exists()
    assert (out / "topmap.meta").exists()


def test_eval_command(tmp_path, micro_cfg_file, capsys):
    run_dir = tmp_path / "run"
    assert cli.main(
        ["train", "--config", str(micro_cfg_file), "--out", str(run_dir)]
    ) == 0
    out = tmp_path / "eval"
    rc = cli.main(
        ["eval", "--config", str(run_dir / "config_resolved.txt"),
         "--checkpoint", str(run_dir / "checkpoint_final.npz"), "--out", str(out)]
    )
    assert rc == 0
    assert (out / "eval_episodes.csv").exists()
    assert (out / "straight_episodes.csv").exists()
    assert len(list((out / "trajectories").glob("*.csv"))) == 3


def test_compare_command(tmp_path, micro_cfg_file, capsys):
    out = tmp_path / "cmp"
    rc = cli.main(
        ["compare", "--config", str(micro_cfg_file), "--variants", "qier,er",
         "--out", str(out)]
    )
    assert rc == 0
    text = (out / "returns_ma.csv").read_text()
    assert text.splitlines()[0] == "variant,episode,return,return_ma"
    assert "qier," in text and "er," in text
    assert (out / "comparison_slots.csv").exists()


def test_compare_rejects_unknown_variant(tmp_path, micro_cfg_file, capsys):
    rc = cli.main(
        ["compare", "--config", str(micro_cfg_file), "--variants", "qier,bogus",
         "--out", str(tmp_path / "x")]
    )
    assert rc == 2


def test_buffers_selftest(capsys):
    assert cli.main(["buffers-selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4


def test_train_determinism_via_cli(tmp_path, micro_cfg_file, capsys):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    cli.main(["train", "--config", str(micro_cfg_file), "--seed", "3", "--out", str(out_a)])
    cli.main(["train", "--config", str(micro_cfg_file), "--seed", "3", "--out", str(out_b)])
    assert (out_a / "episodes.csv").read_bytes() == (out_b / "episodes.csv").read_bytes()
