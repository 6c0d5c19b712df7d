import json

import numpy as np
import pytest

from sada.cli import main, parse_gamma_grid, read_config_file


def make_csv(tmp_path, name="data.csv", K=2, N=80, n=30, seed=0, constant=False):
    rng = np.random.default_rng(seed)
    y = 0.5 + rng.standard_normal(N)
    cols = []
    for k in range(K):
        if constant:
            cols.append(np.full(N, 1.5))
        elif k == 0:
            cols.append(0.8 * y + 0.3 * rng.standard_normal(N))
        else:
            cols.append(rng.standard_normal(N))
    lines = ["x_1,y," + ",".join(f"yhat_{k + 1}" for k in range(K))]
    for i in range(N):
        label = repr(float(y[i])) if i < n else ""
        lines.append(f"1.0,{label}," + ",".join(repr(float(c[i])) for c in cols))
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


def read_estimates(out_dir):
    rows = {}
    lines = (out_dir / "estimates.csv").read_text().splitlines()[1:]
    for line in lines:
        method, comp, est, se, lo, hi = line.split(",")
        rows[(method, int(comp))] = (float(est), float(lo), float(hi))
    return rows


def test_estimate_writes_reports_and_sada_interval_no_wider(tmp_path, capsys):
    csv_path = make_csv(tmp_path)
    out = tmp_path / "out"
    assert main(["estimate", str(csv_path), "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert [r["method"] for r in report["records"]] == ["naive", "sada"]
    assert report["centering"] is True
    rows = read_estimates(out)
    naive_width = rows[("naive", 1)][2] - rows[("naive", 1)][1]
    sada_width = rows[("sada", 1)][2] - rows[("sada", 1)][1]
    assert sada_width <= naive_width + 1e-12
    assert "wrote" in capsys.readouterr().out


def test_estimate_narrower_at_lower_level(tmp_path):
    csv_path = make_csv(tmp_path)
    out90, out95 = tmp_path / "o90", tmp_path / "o95"
    assert main(["estimate", str(csv_path), "--level", "0.9", "--out", str(out90)]) == 0
    assert main(["estimate", str(csv_path), "--level", "0.95", "--out", str(out95)]) == 0
    w90 = read_estimates(out90)[("naive", 1)]
    w95 = read_estimates(out95)[("naive", 1)]
    assert (w90[2] - w90[1]) < (w95[2] - w95[1])


def test_unknown_model_flag_exits_two(tmp_path, capsys):
    csv_path = make_csv(tmp_path)
    with pytest.raises(SystemExit) as exc:
        main(["estimate", str(csv_path), "--model", "loess"])
    assert exc.value.code == 2


def test_unknown_model_in_config_exits_two(tmp_path, capsys):
    csv_path = make_csv(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model = loess\n")
    assert main(["estimate", str(csv_path), "--config", str(cfg)]) == 2
    assert "ConfigError" in capsys.readouterr().err


def test_oracle_method_rejected_on_real_data(tmp_path, capsys):
    csv_path = make_csv(tmp_path)
    assert main(["estimate", str(csv_path), "--methods", "oracle"]) == 2


def test_data_error_exits_three(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x_1,y,yhat_1\n1.0,abc,2.0\n2.0,,1.0\n")
    assert main(["estimate", str(bad)]) == 3
    err = capsys.readouterr().err
    assert err.startswith("ParseError:") and "row 2" in err


def test_missing_file_exits_three(tmp_path, capsys):
    assert main(["estimate", str(tmp_path / "nope.csv")]) == 3


def test_numerical_failure_exits_four(tmp_path, capsys):
    # duplicated feature column makes the OLS Jacobian singular
    rng = np.random.default_rng(5)
    lines = ["x_1,x_2,y,yhat_1"]
    for i in range(20):
        x = float(rng.standard_normal())
        label = repr(float(rng.standard_normal())) if i < 10 else ""
        lines.append(f"{x!r},{x!r},{label},{float(rng.standard_normal())!r}")
    path = tmp_path / "collinear.csv"
    path.write_text("\n".join(lines) + "\n")
    assert main(["estimate", str(path), "--model", "ols"]) == 4
    assert "SingularJacobian" in capsys.readouterr().err


def test_config_file_parsing(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nlevel = 0.9\nreps = 7\nmethods = naive,sada\n")
    parsed = read_config_file(cfg)
    assert parsed == {"level": "0.9", "reps": "7", "methods": "naive,sada"}
    bad = tmp_path / "bad.cfg"
    bad.write_text("not a pair\n")
    with pytest.raises(Exception):
        read_config_file(bad)


def test_cli_flag_overrides_config(tmp_path):
    csv_path = make_csv(tmp_path)
    cfg = tmp_path / "run.cfg"
    cfg.write_text("level = 0.5\n")
    out = tmp_path / "out"
    assert main([
        "estimate", str(csv_path), "--config", str(cfg), "--level", "0.95", "--out", str(out)
    ]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["level"] == 0.95


def test_parse_gamma_grid_forms():
    assert parse_gamma_grid("0,0.5,1") == [0.0, 0.5, 1.0]
    assert parse_gamma_grid("0:1:11")[1] == pytest.approx(0.1)
    with pytest.raises(Exception):
        parse_gamma_grid("0:1")
    with pytest.raises(Exception):
        parse_gamma_grid("oops")


def test_simulate_deterministic_bytes(tmp_path):
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    args = ["simulate", "--reps", "6", "--gamma-grid", "0,1", "--methods", "naive,sada",
            "--seed", "7", "--total-rows", "60", "--labeled-rows", "20"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert (out1 / "results.csv").read_bytes() == (out2 / "results.csv").read_bytes()
    assert (out1 / "efficiency.svg").read_bytes() == (out2 / "efficiency.svg").read_bytes()


def test_simulate_single_rep_emits_degenerate_flag(tmp_path):
    out = tmp_path / "one"
    assert main(["simulate", "--reps", "1", "--gamma-grid", "0.5", "--methods", "sada",
                 "--out", str(out), "--total-rows", "40", "--labeled-rows", "10"]) == 0
    assert "degenerate_sd" in (out / "results.csv").read_text()


def test_compare_sorted_by_variance_and_k1_equivalence(tmp_path):
    csv_path = make_csv(tmp_path, K=1)
    out = tmp_path / "out"
    assert main(["compare", str(csv_path), "--out", str(out)]) == 0
    lines = (out / "compare.csv").read_text().splitlines()
    header = lines[0].split(",")
    rows = {ln.split(",")[0]: ln.split(",") for ln in lines[1:]}
    assert set(rows) == {"naive", "ppi:1", "ppi_pp:1", "sada"}
    variances = [float(ln.split(",")[1]) for ln in lines[1:]]
    assert variances == sorted(variances)
    est_idx = header.index("estimate_1")
    assert abs(float(rows["sada"][est_idx]) - float(rows["ppi_pp:1"][est_idx])) <= 1e-10
    assert rows["sada"][header.index("weights")] != ""


def test_simulate_default_grid_emits_eleven_gammas(tmp_path):
    out = tmp_path / "grid"
    assert main(["simulate", "--reps", "5", "--methods", "naive,sada",
                 "--seed", "3", "--out", str(out),
                 "--total-rows", "50", "--labeled-rows", "15"]) == 0
    lines = (out / "results.csv").read_text().splitlines()
    assert len(lines) == 1 + 11 * 2  # header + 11 gammas x 2 methods
    gammas = {line.split(",")[0] for line in lines[1:]}
    assert len(gammas) == 11


def test_compare_perfect_prediction_reaches_oracle_scaling(tmp_path):
    # yhat_1 == y on every row: SADA's estimated variance should scale like
    # n/N times the naive variance
    rng = np.random.default_rng(21)
    N, n = 400, 100
    y = 0.5 + rng.standard_normal(N)
    lines = ["x_1,y,yhat_1"]
    for i in range(N):
        label = repr(float(y[i])) if i < n else ""
        lines.append(f"1.0,{label},{float(y[i])!r}")
    path = tmp_path / "perfect.csv"
    path.write_text("\n".join(lines) + "\n")
    out = tmp_path / "out"
    assert main(["compare", str(path), "--out", str(out)]) == 0
    rows = (out / "compare.csv").read_text().splitlines()
    header = rows[0].split(",")
    var = {ln.split(",")[0]: float(ln.split(",")[1]) for ln in rows[1:]}
    ratio = var["sada"] / var["naive"]
    assert 0.5 * (n / N) <= ratio <= 2.0 * (n / N)


def test_compare_constant_predictions_collapse_to_naive(tmp_path):
    csv_path = make_csv(tmp_path, K=2, constant=True)
    out = tmp_path / "out"
    assert main(["compare", str(csv_path), "--out", str(out)]) == 0
    lines = (out / "compare.csv").read_text().splitlines()
    header = lines[0].split(",")
    est_idx = header.index("estimate_1")
    estimates = {ln.split(",")[0]: float(ln.split(",")[est_idx]) for ln in lines[1:]}
    for method, est in estimates.items():
        assert abs(est - estimates["naive"]) < 1e-10, method
