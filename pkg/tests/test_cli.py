import csv
import io
import math
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest
import yaml

from udnbeam import cli
from udnbeam.config import RunConfig
from udnbeam.errors import NonConvergenceError
from udnbeam.model import db_to_linear, linear_to_db

GOLDEN = Path(__file__).parent / "golden"


def write_cfg(tmp_path, doc, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return path


def body(text):
    # the backend line is the only environment-dependent provenance
    return [line for line in text.splitlines() if not line.startswith("# backend:")]


def read_rows(path):
    lines = [line for line in Path(path).read_text().splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


SMALL = {
    "scenario": "general",
    "sweep": {"var": "density_per_km2", "values": [10, 1000]},
    "params": {"beta1": 1},
    "sim": {"trials": 400, "seed": 3},
}


@pytest.mark.parametrize("preset,stems", [
    ("fig3", ["fig3_T0dB_d0_5m", "fig3_T0dB_d0_10m", "fig3_T7dB_d0_5m", "fig3_T7dB_d0_10m"]),
    ("fig4", ["fig4_fixed_beams", "fig4_adapted_beams"]),
    ("fig2", ["fig2_beta1_1", "fig2_beta1_2", "fig2_beta1_3"]),
])
def test_presets_match_golden(tmp_path, preset, stems):
    assert cli.main([preset, "--no-mc", "--out", str(tmp_path)]) == 0
    for stem in stems:
        got = (tmp_path / f"{stem}.csv").read_text()
        want = (GOLDEN / f"{stem}.csv").read_text()
        assert body(got) == body(want), stem
        ET.fromstring((tmp_path / f"{stem}.svg").read_text())
        for row in read_rows(tmp_path / f"{stem}.csv"):
            assert 0 <= float(row["coverage_analytic"]) <= 1
            assert float(row["ase_analytic"]) >= 0


def test_fig4_adapted_coverage_tends_to_one_and_ase_is_linear():
    rows = read_rows(GOLDEN / "fig4_adapted_beams.csv")
    lam = np.array([float(r["sweep_value"]) for r in rows])
    cov = np.array([float(r["coverage_analytic"]) for r in rows])
    ase = np.array([float(r["ase_analytic"]) for r in rows])
    assert cov[-1] > 0.998
    dense = lam >= 1e5
    slope = ase[dense] / lam[dense]
    assert np.ptp(slope) / slope.mean() < 0.01


def test_fig3_curves_decrease_and_smaller_d0_helps():
    for t in (0, 7):
        small = read_rows(GOLDEN / f"fig3_T{t}dB_d0_5m.csv")
        big = read_rows(GOLDEN / f"fig3_T{t}dB_d0_10m.csv")
        for rows in (small, big):
            ase = [float(r["ase_analytic"]) for r in rows]
            assert all(b < a for a, b in zip(ase, ase[1:]))
        assert all(float(s["ase_analytic"]) > float(b["ase_analytic"]) for s, b in zip(small, big))


def test_sweep_with_mc_is_byte_identical_across_runs_and_workers(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    outs = []
    for i, workers in enumerate(("1", "1", "2")):
        out = tmp_path / f"out{i}.csv"
        assert cli.main(["sweep", "--config", str(cfg), "--out", str(out), "--workers", workers]) == 0
        outs.append(out.read_text())
    assert outs[0] == outs[1]
    strip = lambda t: [l for l in t.splitlines() if not l.startswith("# config")]
    assert strip(outs[0]) == strip(outs[2])
    rows = read_rows(tmp_path / "out0.csv")
    assert [r["sweep_value"] for r in rows] == ["10", "1000"]
    for r in rows:
        cov, se = float(r["coverage_mc"]), float(r["coverage_mc_se"])
        assert abs(cov - float(r["coverage_analytic"])) <= 4 * se + 1e-3
    assert "columns" not in outs[0]
    header = [l for l in outs[0].splitlines() if not l.startswith("#")][0]
    assert tuple(header.split(",")) == cli.CSV_COLUMNS


def test_flag_overrides(tmp_path):
    cfg = write_cfg(tmp_path, SMALL)
    out = tmp_path / "o.csv"
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(out), "--no-mc", "--seed", "99",
                     "--toggle-mu-convention", "campbell", "--toggle-thm3-d0", "d0sq"]) == 0
    text = out.read_text()
    assert '"seed": 99' in text and '"campbell"' in text and '"d0sq"' in text
    assert all(r["coverage_mc"] == "nan" for r in read_rows(out))


def test_bad_key_is_named_and_exits_2(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {**SMALL, "params": {"beta_one": 1}})
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "x.csv")]) == 2
    assert "params.beta_one" in capsys.readouterr().err
    assert not list(tmp_path.glob("x*"))


@pytest.mark.parametrize("doc", [
    {"scenario": "corollary", "params": {"beta1": 1}},
    {"scenario": "adapted", "sweep": {"var": "alignment_probability", "values": [0.5]}},
    {"sweep": {"var": "density_per_km2", "values": [-1]}},
    {"sim": {"trials": 0}},
    {"conventions": {"mu": "other"}},
    {"scenario": "nope"},
])
def test_invalid_configs_exit_2(tmp_path, doc):
    cfg = write_cfg(tmp_path, doc)
    assert cli.main(["validate-config", "--config", str(cfg)]) == 2


def test_validate_config_prints_resolved(tmp_path, capsys):
    cfg = write_cfg(tmp_path, SMALL)
    assert cli.main(["validate-config", "--config", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert '"beta1": 1' in out and '"trials": 400' in out


def test_exponent_without_sign_reads_as_number(tmp_path):
    # plain YAML 1.1 would read 1.0e4 as a string
    cfg = tmp_path / "run.yaml"
    cfg.write_text("sweep:\n  var: density_per_km2\n  start: 10\n  stop: 1.0e4\n  num: 4\n"
                   "params:\n  d0_m: 1e1\n")
    run = RunConfig.load(cfg)
    assert run.grid[-1] == pytest.approx(1e4)
    assert run.params["d0_m"] == 10.0


def test_infeasible_adaptation_exits_4(tmp_path):
    doc = {"scenario": "adapted", "sweep": {"var": "density_per_km2", "values": [1, 100]},
           "params": {"snr_at_d0_db": None, "side_bs_db": None, "side_ue_db": None, "beta1": 0},
           "adaptation": {"K_per_km2": 10.0}, "sim": {"enabled": False}}
    cfg = write_cfg(tmp_path, doc)
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "a.csv")]) == 4
    assert not (tmp_path / "a.csv").exists()


def test_nonconvergence_exits_3_and_leaves_nothing(tmp_path, monkeypatch):
    def boom(cfg, value):
        raise NonConvergenceError("no", 0.5, 1.0)

    monkeypatch.setattr(cli, "evaluate_point", boom)
    cfg = write_cfg(tmp_path, SMALL)
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "n.csv")]) == 3
    assert sorted(p.name for p in tmp_path.iterdir()) == ["run.yaml"]


def test_atomic_write_cleans_up_on_failure(tmp_path):
    target = tmp_path / "keep.csv"
    target.write_text("old\n")
    with pytest.raises(TypeError):
        cli.write_atomic({target: "new\n", tmp_path / "b.csv": object()})
    assert target.read_text() == "old\n"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["keep.csv"]


def test_adjudicate_requires_enough_trials(tmp_path):
    assert cli.main(["adjudicate", "--trials", "1000", "--out", str(tmp_path / "r.md")]) == 2
    assert cli.main(["adjudicate", "--no-mc", "--out", str(tmp_path / "r.md")]) == 2


def test_verdict_rule():
    assert cli._verdict({"a": 0.5, "b": 0.9}, 0.51, 0.01) == (("a",), "a")
    assert cli._verdict({"a": 0.5, "b": 0.52}, 0.51, 0.01)[1] == "inconclusive"
    assert cli._verdict({"a": 0.1, "b": 0.9}, 0.5, 0.01)[1] == "neither"


def test_mu_experiment_separates_conventions():
    from udnbeam.asymptotics import adapted_coverage_limit
    K, p = cli.mu_experiment()
    paper = adapted_coverage_limit(K, p, "paper").value
    campbell = adapted_coverage_limit(K, p, "campbell").value
    assert campbell == pytest.approx(math.exp(-0.7), rel=1e-12)
    assert paper == pytest.approx(math.exp(-2.8), rel=1e-12)


@pytest.mark.parametrize("db", [-30.0, -7.5, 0.0, 7.0, 20.0, 33.3])
def test_db_round_trip_at_boundary(db):
    assert linear_to_db(db_to_linear(db)) == pytest.approx(db, abs=1e-12)
    cfg = RunConfig(params={**RunConfig().params, "threshold_db": db})
    assert linear_to_db(cfg.network_params(1000.0).threshold) == pytest.approx(db, abs=1e-12)
