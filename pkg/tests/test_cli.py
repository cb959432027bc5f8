import json

import pytest

from qscarpet.cli import main
from qscarpet.config import ENV_OUT, RunConfig
from qscarpet.grid import ConfigError
from qscarpet.report import sha256_file

FAST = {
    "metric": {"max_level": 2, "qs_triples": 2000},
    "walk": {"trials": 2000, "horizon": 500, "short_horizon": 100},
    "dim": {"h_depths": {"2": 5}, "level_depths": {"2": 5}, "f_depth": 3, "glued_depth": 2},
    "census": {"strict_depth": 3, "samples": 5000, "rows": 40, "per_row": 100},
    "frostman": {"depth": 4, "samples": 200},
    "glue": {"max_block": 4, "continuity_depth": 2},
}


@pytest.fixture
def fast_config(tmp_path):
    path = tmp_path / "fast.json"
    path.write_text(json.dumps(FAST))
    return str(path)


def read_tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_construct_is_deterministic_and_manifested(tmp_path):
    args = ["construct", "--M", "5", "--r", "1/126", "--n", "2", "--depth", "2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = read_tree(tmp_path / "a"), read_tree(tmp_path / "b")
    assert a == b
    root = tmp_path / "a" / "construct"
    manifest = json.loads((root / "manifest.json").read_text())
    listed = set(manifest["files"])
    on_disk = {k.split("/", 1)[1] for k in a if not k.endswith("manifest.json")}
    assert listed == on_disk
    for name, digest in manifest["files"].items():
        assert sha256_file(root / name) == digest
    assert manifest["config"]["grid"]["r"] == "1/126"
    assert {"traces.json", "survivors.json", "weights/level_2.csv", "pattern_sawtooth.svg"} <= listed


def test_traces_hold_exact_values(tmp_path):
    assert main(["construct", "--depth", "2", "--out", str(tmp_path)]) == 0
    traces = json.loads((tmp_path / "construct" / "traces.json").read_text())
    assert traces["h"]["1/25"] == ["1/5", "1/5"]
    assert traces["glued"]["1/2"] == ["1/2", "1/2"]


def test_even_M_is_a_config_error(tmp_path, capsys):
    assert main(["construct", "--M", "6", "--out", str(tmp_path)]) == 2
    assert "odd" in capsys.readouterr().err


@pytest.mark.parametrize(
    "body",
    ['{"grid": {"M": 5, "r": 0.007}}', '{"nope": 1}', "[1, 2]", "{not json", '{"walk": {"trials": 0}}'],
)
def test_bad_config_files(tmp_path, body):
    path = tmp_path / "c.json"
    path.write_text(body)
    assert main(["construct", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_missing_config_file(tmp_path):
    assert main(["construct", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == 2


def test_unwritable_output_is_an_io_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["construct", "--depth", "1", "--out", str(blocker)]) == 3


def test_flags_override_the_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"grid": {"M": 7, "r": "1/400"}, "seed": 4}')
    cfg = RunConfig.load(path, {"grid.r": "1/500", "seed": 9})
    assert cfg.grid.M == 7 and str(cfg.grid.r) == "1/500" and cfg.seed == 9


def test_strict_mode_checks_walk_p():
    with pytest.raises(ConfigError):
        RunConfig.load(None, {"grid.M": 79, "grid.r": "1/1000000", "grid.mode": "strict", "walk.p": "1/2"})


def test_env_var_sets_the_output_root(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUT, str(tmp_path / "env"))
    assert main(["render", "--depth", "1"]) == 0
    assert (tmp_path / "env" / "render" / "walk_region.svg").exists()


def test_verify_passes_on_selected_checks(tmp_path, fast_config):
    code = main(
        ["verify", "--config", fast_config, "--only", "weight_bound,content_decay,glue", "--out", str(tmp_path)]
    )
    assert code == 0
    summary = json.loads((tmp_path / "verify" / "summary.json").read_text())
    assert summary["passed"] and set(summary["checks"]) == {"weight_bound", "content_decay", "glue"}


def test_injected_bad_weight_fails_verify(tmp_path, fast_config):
    code = main(
        ["verify", "--config", fast_config, "--only", "weight_bound", "--inject-bad-weight", "--out", str(tmp_path)]
    )
    assert code == 1
    report = json.loads((tmp_path / "verify" / "weight_bound.json").read_text())
    assert not report["passed"]
    assert report["details"]["levels"]["1"]["first_violations"] == ["((3, 3),)"]


def test_unknown_check_is_a_config_error(tmp_path):
    assert main(["verify", "--only", "nope", "--out", str(tmp_path)]) == 2


def test_verify_reports_are_byte_identical(tmp_path, fast_config):
    codes = [main(["verify", "--config", fast_config, "--out", str(tmp_path / d)]) for d in "ab"]
    assert codes[0] == codes[1]
    a, b = read_tree(tmp_path / "a"), read_tree(tmp_path / "b")
    assert a == b
    names = {k.split("/")[-1] for k in a}
    assert {"summary.json", "manifest.json", "diameter_audit.csv", "exit_times.csv"} <= names


def test_dim_and_walk_commands(tmp_path, fast_config):
    assert main(["dim", "--config", fast_config, "--out", str(tmp_path)]) == 0
    extras = json.loads((tmp_path / "dim" / "dim_extras.json").read_text())
    assert extras["line"]["slope"] == pytest.approx(1.0)
    code = main(["walk", "--config", fast_config, "--out", str(tmp_path)])
    assert code in (0, 1)
    walk = json.loads((tmp_path / "walk" / "walk_bound.json").read_text())
    assert walk["details"]["bound_below_quarter"]
    assert (tmp_path / "walk" / "walk_region.svg").exists()
