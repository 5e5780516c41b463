import json

import pytest
import yaml

from h2plus_exchange.cli import MissingGridPointError, cmd_dump_basis, cmd_fit, main
from h2plus_exchange.cli.config import ConfigError, GridSpec, RunConfig, canonical_R
from h2plus_exchange.cli.store import ResultsStore, StoreIntegrityError
from h2plus_exchange.exchange import ExchangeRecord


def write_config(tmp_path, **kw):
    data = {"grid": {"start": 20, "stop": 20, "step": 1}, "omega_min": 2, "omega_max": 2,
            "method": "HS", "formula": "volume", "digits": 40, "output": str(tmp_path / "out")}
    data.update(kw)
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def test_canonical_R():
    assert canonical_R(60) == canonical_R("60.0") == "60"
    assert canonical_R("62.50") == "62.5"


def test_grid_spec_points():
    g = GridSpec("60", "72", "6", [63, 69])
    assert g.training() == ["60", "66", "72"]
    assert g.test_points() == ["63", "69"]


@pytest.mark.parametrize("bad", [
    {"method": "XX"},
    {"formula": "both-ish"},
    {"omega_min": 5, "omega_max": 3},
    {"digits": 10},
    {"grid": {"start": 3, "stop": 9, "step": 3}},
    {"grid": {"start": 60, "stop": 66, "step": 6, "test": [66]}},
    {"colour": "blue"},
])
def test_config_rejects_bad_input(tmp_path, bad):
    with pytest.raises(ConfigError):
        RunConfig.load(write_config(tmp_path, **bad))


def test_main_reports_config_error(tmp_path, capsys):
    assert main(["sweep", "--config", str(write_config(tmp_path, method="XX"))]) == 2
    assert "error" in capsys.readouterr().err


def test_sweep_cache_and_byte_identical_records(tmp_path):
    cfg_path = write_config(tmp_path)
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg_path)]) == 0
    first = (out / "records.csv").read_bytes()
    rows = ResultsStore(out).rows()
    assert len(rows) == 1
    assert rows[0]["R"] == "20" and rows[0]["Omega"] == "2" and float(rows[0]["J"]) < 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["computed"] == ["20"] and manifest["failures"] == []

    assert main(["sweep", "--config", str(cfg_path)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["computed"] == [] and manifest["cached"] == ["20"]
    assert (out / "records.csv").read_bytes() == first

    assert main(["sweep", "--config", str(cfg_path), "--no-cache"]) == 0
    assert json.loads((out / "manifest.json").read_text())["computed"] == ["20"]
    assert (out / "records.csv").read_bytes() == first


def test_store_detects_conflicting_values(tmp_path):
    store = ResultsStore(tmp_path)
    store.add(ExchangeRecord("60", 7, "HS", "volume", "converged", "-1.000000000000000000000e-26", 40))
    store.add(ExchangeRecord("60", 7, "HS", "volume", "converged", "-1.000000000000000000000e-26", 40))
    with pytest.raises(StoreIntegrityError):
        store.add(ExchangeRecord("60", 7, "HS", "volume", "converged", "-1.1e-26", 40))


def test_store_round_trip_sorted(tmp_path):
    store = ResultsStore(tmp_path)
    for R in ("66", "60", "150"):
        store.add(ExchangeRecord(R, 7, "HS", "volume", "converged", "-1e-30", 40))
    store.flush()
    assert [r["R"] for r in ResultsStore(tmp_path).rows()] == ["60", "66", "150"]


@pytest.mark.parametrize("omega", [0, 1, 3, 5])
def test_dump_basis_row_count(tmp_path, omega):
    cfg = RunConfig(output=str(tmp_path), digits=30)
    path = cmd_dump_basis(cfg, omega)
    lines = path.read_text().splitlines()
    assert len(lines) - 1 == (omega + 1) * (omega + 2)


def test_fit_with_missing_points_raises(tmp_path):
    cfg = RunConfig(output=str(tmp_path), digits=40)
    with pytest.raises(MissingGridPointError):
        cmd_fit(cfg)
    assert main(["fit", "--out", str(tmp_path), "--digits", "40"]) == 2


def test_diagnose_writes_outputs(tmp_path):
    out = tmp_path / "diag"
    assert main(["diagnose", "--R", "12", "--omega", "2", "--points", "5",
                 "--digits", "40", "--out", str(out)]) == 0
    for name in ("localenergy", "ratios", "series"):
        assert (out / f"{name}_R12_O2.csv").exists()
    summary = json.loads((out / "diagnose_R12_O2.json").read_text())
    assert summary["R"] == "12" and summary["Omega"] == 2
    assert len((out / "localenergy_R12_O2.csv").read_text().splitlines()) == 6


def test_dump_matrices(tmp_path):
    assert main(["dump-matrices", "--R", "10", "--omega", "1", "--digits", "30", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "matrices_R10_O1.csv").read_text().splitlines()
    n = 2 * 3
    assert len(lines) - 1 == 8 * n * n
