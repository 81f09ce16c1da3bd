"""Command-line interface: subcommands, exit codes, seed resolution."""

import json
from pathlib import Path

import pytest

from mmrb.cli import SEED_ENV, load_run_config, main, resolve_seed
from mmrb.errors import ConfigError
from mmrb.report import write_report

from test_report import sample_report

FIXTURES = Path(__file__).parent / "fixtures"

ALL_LABELS = ["R", "D", "E", "L", "RD", "RE", "RL", "DE", "DL", "EL",
              "RDE", "RDL", "REL", "DEL", "RDEL"]


@pytest.fixture(autouse=True)
def clean_seed_env(monkeypatch):
    monkeypatch.delenv(SEED_ENV, raising=False)


@pytest.fixture()
def dataset_dir(tmp_path):
    out = tmp_path / "dataset"
    assert main(["synth", "--out", str(out), "--samples", "2", "--size", "16",
                 "--classes", "3"]) == 0
    return out


def write_config(tmp_path, **extra):
    doc = {"manifest": "dataset/manifest.json", "work_dir": "runs", **extra}
    path = tmp_path / "run.json"
    path.write_text(json.dumps(doc))
    return path


# ---------------------------------------------------------------------------
# seed resolution

def test_seed_precedence(monkeypatch):
    assert resolve_seed(None, None) == 0
    assert resolve_seed(None, 3) == 3
    monkeypatch.setenv(SEED_ENV, "4")
    assert resolve_seed(None, 3) == 4
    assert resolve_seed(5, 3) == 5


def test_seed_env_must_be_integer(monkeypatch, tmp_path):
    monkeypatch.setenv(SEED_ENV, "not-a-number")
    assert main(["synth", "--out", str(tmp_path / "d")]) == 2


# ---------------------------------------------------------------------------
# synth

def test_synth_writes_dataset_and_prints_manifest(tmp_path, capsys):
    out = tmp_path / "d"
    assert main(["synth", "--out", str(out), "--samples", "2", "--size", "16",
                 "--classes", "3", "--seed", "5"]) == 0
    printed = capsys.readouterr().out.strip()
    assert printed == str(out / "manifest.json")
    assert (out / "manifest.json").is_file()


def test_synth_is_deterministic(tmp_path):
    for name in ("a", "b"):
        main(["synth", "--out", str(tmp_path / name), "--samples", "2",
              "--size", "16", "--classes", "3", "--seed", "5"])
    a = {p.relative_to(tmp_path / "a"): p.read_bytes()
         for p in sorted((tmp_path / "a").rglob("*")) if p.is_file()}
    b = {p.relative_to(tmp_path / "b"): p.read_bytes()
         for p in sorted((tmp_path / "b").rglob("*")) if p.is_file()}
    assert a == b


def test_synth_requires_out(tmp_path):
    with pytest.raises(SystemExit) as err:
        main(["synth"])
    assert err.value.code == 2


def test_synth_rejects_bad_geometry(tmp_path):
    assert main(["synth", "--out", str(tmp_path / "d"), "--size", "4"]) == 1


# ---------------------------------------------------------------------------
# corrupt

def test_corrupt_emm_drop_letters(dataset_dir, tmp_path, capsys):
    out = tmp_path / "c"
    assert main(["corrupt", "--manifest", str(dataset_dir / "manifest.json"),
                 "--out", str(out), "--emm", "--drop", "E,L"]) == 0
    assert capsys.readouterr().out.strip() == str(out / "manifest.json")
    meta = json.loads((out / "scenario.json").read_text())
    assert meta["scenario"] == "emm-RD"
    assert meta["kind"] == "emm"
    assert meta["corrupted"] == ["event", "lidar"]
    assert meta["intact_label"] == "RD"
    assert meta["seed"] == 0
    from mmrb.dataset import parse_manifest, read_tensor
    m = parse_manifest(out / "manifest.json", strict=True)
    for s in m.samples:
        assert (read_tensor(m.resolve(s.inputs["event"])).data == 0).all()


def test_corrupt_rmm_names_and_seed(dataset_dir, tmp_path):
    out = tmp_path / "c"
    assert main(["corrupt", "--manifest", str(dataset_dir / "manifest.json"),
                 "--out", str(out), "--rmm", "--r", "0.5", "--drop", "depth",
                 "--seed", "9"]) == 0
    meta = json.loads((out / "scenario.json").read_text())
    assert meta["scenario"] == "rmm-r0.5-REL"
    assert meta["r"] == 0.5
    assert meta["seed"] == 9


def test_corrupt_nm_defaults_to_all_modalities(dataset_dir, tmp_path):
    out = tmp_path / "c"
    assert main(["corrupt", "--manifest", str(dataset_dir / "manifest.json"),
                 "--out", str(out), "--nm", "--level", "mid"]) == 0
    meta = json.loads((out / "scenario.json").read_text())
    assert meta["scenario"] == "nm-mid"
    assert meta["corrupted"] == ["rgb", "depth", "event", "lidar"]
    assert meta["intact_label"] is None
    assert meta["noise"] == {"density": 0.1, "sigma": 0.2, "mu": 0.0}


@pytest.mark.parametrize("extra", [
    ["--emm", "--r", "0.5"],
    ["--emm", "--level", "low"],
    ["--rmm"],
    ["--rmm", "--r", "1.5"],
    ["--rmm", "--r", "0.5", "--level", "low"],
    ["--nm", "--r", "0.5"],
    ["--nm", "--level", "bogus"],
    ["--emm", "--drop", "X"],
])
def test_corrupt_flag_conflicts_exit_2(dataset_dir, tmp_path, extra):
    argv = ["corrupt", "--manifest", str(dataset_dir / "manifest.json"),
            "--out", str(tmp_path / "c")] + extra
    assert main(argv) == 2


def test_corrupt_missing_manifest_exits_1(tmp_path):
    assert main(["corrupt", "--manifest", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "c"), "--emm"]) == 1


# ---------------------------------------------------------------------------
# run configs

def test_load_run_config_resolves_relative_paths(dataset_dir, tmp_path):
    path = write_config(tmp_path, parallelism=2, keep_artifacts=True,
                        rmm_r=[0.5], p_grid=[0.1], nm_levels=["low"],
                        predictor={"builtin": "constant", "params": {"class_id": 1}})
    cfg = load_run_config(path)
    assert cfg.manifest == tmp_path / "dataset" / "manifest.json"
    assert cfg.work_dir == tmp_path / "runs"
    assert cfg.parallelism == 2 and cfg.keep_artifacts
    assert cfg.rmm_r == (0.5,) and cfg.p_grid == (0.1,)
    assert cfg.nm_levels[0].name == "low"
    assert cfg.predictor.builtin == "constant"


def test_load_run_config_custom_noise_level(dataset_dir, tmp_path):
    path = write_config(tmp_path, nm_levels=[
        {"name": "harsh", "density": 0.3, "sigma": 0.6}])
    cfg = load_run_config(path)
    level = cfg.nm_levels[0]
    assert (level.name, level.params.density, level.params.sigma,
            level.params.mu) == ("harsh", 0.3, 0.6, 0.0)


def test_load_run_config_seed_chain(dataset_dir, tmp_path, monkeypatch):
    path = write_config(tmp_path, global_seed=3)
    assert load_run_config(path).global_seed == 3
    monkeypatch.setenv(SEED_ENV, "4")
    assert load_run_config(path).global_seed == 4
    assert load_run_config(path, seed_flag=5).global_seed == 5


@pytest.mark.parametrize("extra,detail", [
    ({"surprise": 1}, "unknown key"),
    ({"rmm_r": [1.5]}, r"rmm_r\[0\]"),
    ({"rmm_r": 0.5}, "expected a list"),
    ({"p_grid": [1.0]}, r"p_grid\[0\]"),
    ({"nm_levels": ["bogus"]}, "unknown level"),
    ({"nm_levels": [{"name": "x", "density": 2.0, "sigma": 0.1}]}, "density"),
    ({"predictor": {"builtin": "nope"}}, "unknown builtin"),
    ({"predictor": {"novel": 1}}, "unknown key"),
    ({"global_seed": True}, "expected an integer"),
    ({"parallelism": "two"}, "expected an integer"),
    ({"emm": "yes"}, "true/false"),
])
def test_load_run_config_schema_errors(dataset_dir, tmp_path, extra, detail):
    path = write_config(tmp_path, **extra)
    with pytest.raises(ConfigError, match=detail):
        load_run_config(path)


def test_load_run_config_requires_manifest(tmp_path):
    path = tmp_path / "run.json"
    path.write_text("{}")
    with pytest.raises(ConfigError, match="manifest"):
        load_run_config(path)
    path.write_text("[]")
    with pytest.raises(ConfigError, match="JSON object"):
        load_run_config(path)


# ---------------------------------------------------------------------------
# run

def test_run_executes_and_prints_summary(dataset_dir, tmp_path, capsys):
    config = write_config(tmp_path, rmm_r=[0.5], nm_levels=["low"])
    assert main(["run", str(config)]) == 0
    out = capsys.readouterr().out
    assert "emm" in out and "rmm r=0.5" in out and "nm low" in out
    assert "100.00" in out  # ground-truth predictor everywhere
    report_path = Path(out.strip().splitlines()[-1])
    assert report_path.is_file()
    doc = json.loads(report_path.read_text())
    assert doc["emm"]["avg"] == 100.0


def test_run_rejects_invalid_config_with_exit_2(dataset_dir, tmp_path, capsys):
    config = write_config(tmp_path, rmm_r=[1.5])
    assert main(["run", str(config)]) == 2
    assert "rmm_r[0]" in capsys.readouterr().err


def test_run_missing_config_exits_2(tmp_path):
    assert main(["run", str(tmp_path / "absent.json")]) == 2


# ---------------------------------------------------------------------------
# aggregate

def test_aggregate_constant_scores(tmp_path, capsys):
    path = tmp_path / "constant.json"
    path.write_text(json.dumps({l: 50.0 for l in ALL_LABELS}))
    assert main(["aggregate", str(path)]) == 0
    line = capsys.readouterr().out.strip()
    assert line == "constant: avg=50.00 e(0.2)=50.00 e(0.1)=50.00 e(0.05)=50.00"


def test_aggregate_published_row_matches_reference_metrics(tmp_path, capsys):
    scores = json.loads((FIXTURES / "deliver_emm_scores.json").read_text())
    metrics = json.loads((FIXTURES / "deliver_emm_metrics.json").read_text())
    path = tmp_path / "cmnext.json"
    path.write_text(json.dumps(scores["CMNeXt"]))
    assert main(["aggregate", str(path)]) == 0
    line = capsys.readouterr().out.strip()
    want = metrics["CMNeXt"]
    assert line == (f"cmnext: avg={want['avg']:.2f}"
                    f" e(0.2)={want['expected']['0.2']:.2f}"
                    f" e(0.1)={want['expected']['0.1']:.2f}"
                    f" e(0.05)={want['expected']['0.05']:.2f}")


def test_aggregate_custom_grid_and_output_file(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({l: 50.0 for l in ALL_LABELS}))
    out = tmp_path / "agg.json"
    assert main(["aggregate", str(path), "--p-grid", "0.3", "--out", str(out)]) == 0
    assert "e(0.3)=50.00" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["c"]["avg"] == 50.0
    assert doc["c"]["expected"] == {"0.3": 50.0}


def test_aggregate_missing_combination_exits_1(tmp_path, capsys):
    partial = {l: 50.0 for l in ALL_LABELS if l not in ("RD", "EL")}
    path = tmp_path / "partial.json"
    path.write_text(json.dumps(partial))
    assert main(["aggregate", str(path)]) == 1
    err = capsys.readouterr().err
    assert "missing 2 combination(s)" in err
    assert "{R,D}" in err and "{E,L}" in err


def test_aggregate_rejects_malformed_records(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("[1]")
    assert main(["aggregate", str(path)]) == 1
    path.write_text(json.dumps({"R": "high"}))
    assert main(["aggregate", str(path)]) == 1
    assert main(["aggregate", str(tmp_path / "absent.json")]) == 1


def test_aggregate_rejects_bad_p_grid(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({l: 50.0 for l in ALL_LABELS}))
    assert main(["aggregate", str(path), "--p-grid", "abc"]) == 2
    assert main(["aggregate", str(path), "--p-grid", "1.0"]) == 2
    assert main(["aggregate", str(path), "--p-grid", ""]) == 2


# ---------------------------------------------------------------------------
# report

def test_report_emits_csv_bundle(tmp_path, capsys):
    report_path = tmp_path / "main.json"
    write_report(sample_report(), report_path)
    out = tmp_path / "csv"
    assert main(["report", str(report_path), "--out", str(out)]) == 0
    printed = capsys.readouterr().out.strip().splitlines()
    assert str(out / "emm_combinations.csv") in printed
    header = (out / "emm_combinations.csv").read_text().splitlines()[0]
    assert header == "combination,main"


def test_report_deduplicates_column_names(tmp_path):
    report_path = tmp_path / "main.json"
    write_report(sample_report(), report_path)
    out = tmp_path / "csv"
    assert main(["report", str(report_path), str(report_path),
                 "--out", str(out)]) == 0
    header = (out / "emm_combinations.csv").read_text().splitlines()[0]
    assert header == "combination,main,main_2"


def test_report_rejects_non_reports(tmp_path):
    bad = tmp_path / "x.json"
    bad.write_text("{}")
    assert main(["report", str(bad), "--out", str(tmp_path / "csv")]) == 1
