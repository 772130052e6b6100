import json

import pytest

from bayespred.cli import OUTPUT_DIR_ENV, config_from_args, build_parser, main, read_config


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_exact_risk_row(capsys):
    code, out, _ = run(capsys, "risk", "--family", "poisson", "--theta", "1", "--n", "10", "--prior", "jeffreys", "--exact")
    assert code == 0
    header, cols, row = out.splitlines()[:3]
    rec = dict(zip(cols.split(","), row.split(",")))
    assert float(rec["std_error"]) == 0.0 and rec["method"] == "exact"


def test_header_reference_and_roundtrip(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    argv = ["risk", "--family", "poisson", "--theta", "1", "--n", "100", "--prior", "alpha:0.5",
            "--reps", "2000", "--seed", "7", "--output", "r.csv"]
    assert main(argv) == 0
    text = (tmp_path / "r.csv").read_text()
    header = json.loads(text.splitlines()[0][2:])
    assert header["reference"]["p_over_2n[n=100]"] == pytest.approx(0.005)
    cfg = read_config(text)
    assert cfg == config_from_args(build_parser().parse_args(argv))


def test_json_output(capsys):
    code, out, _ = run(capsys, "alpha-search", "--family", "normal-location-scale", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and set(doc) >= {"config", "rows"}
    argmin = [r for r in doc["rows"] if r["kind"] == "argmin"][0]
    assert argmin["alpha"] == pytest.approx(2 / 3, abs=1e-8)


def test_alpha_search_poisson_roots(capsys):
    code, out, _ = run(capsys, "alpha-search", "--family", "poisson")
    assert code == 0 and "0.59175170953" in out and "1.40824829046" in out


def test_alpha_search_mvn_scale_lemma(capsys):
    code, out, _ = run(capsys, "alpha-search", "--family", "mvn-scale", "--dim", "2", "--lemma1", "--format", "json")
    rows = json.loads(out)["rows"]
    assert code == 0 and [r for r in rows if r["kind"] == "argmin"][0]["alpha"] == pytest.approx(0.5, abs=1e-6)


def test_expansion_check_exact(capsys):
    code, out, _ = run(capsys, "expansion-check", "--family", "bernoulli-canonical", "--theta", "1", "--format", "json")
    assert code == 0
    assert json.loads(out)["rows"][0]["rel_gap"] < 0.05


def test_laplacian_scan_empty_range(capsys):
    code, out, _ = run(capsys, "laplacian-scan", "--dim", "2", "--shrink-alpha", "-0.1", "--format", "json")
    assert code == 0 and "empty" in out


def test_identities_pass(capsys):
    code, out, _ = run(capsys, "identities", "--family", "poisson", "--theta", "1")
    assert code == 0 and "False" not in out


def test_exit_codes(capsys):
    assert run(capsys, "risk", "--family", "poisson", "--theta", "1", "--n", "10", "--prior", "beta(")[0] == 2
    code, _, err = run(capsys, "risk", "--family", "poisson", "--theta", "1", "--n", "10", "--reps", "1000")
    assert code == 2 and "seed" in err
    code, _, err = run(capsys, "expansion-check", "--family", "normal-location-scale", "--theta", "0,1",
                       "--reps", "1000", "--seed", "0")
    assert code == 1 and "noise" in err
    code, _, err = run(capsys, "risk", "--family", "poisson", "--theta", "1;-1", "--n", "10", "--exact")
    assert code == 1 and "-1" in err


MC_COMMANDS = [
    ["risk", "--family", "poisson", "--theta", "1", "--n", "100", "--prior", "alpha:0.5", "--reps", "100000", "--seed", "7"],
    ["risk", "--family", "mvn-location", "--dim", "3", "--theta", "0,0,0", "--n", "10", "--prior", "shrink:-0.25", "--reps", "5000", "--seed", "1"],
    ["dominance", "--dim", "3", "--shrink-alpha", "-0.25", "--n", "25", "--reps", "5000", "--seed", "11"],
    ["identities", "--family", "bernoulli-canonical", "--theta", "0.3", "--method", "monte-carlo", "--reps", "20000", "--seed", "2"],
]


@pytest.mark.parametrize("argv", MC_COMMANDS, ids=lambda a: a[0])
def test_determinism_across_threads(argv, tmp_path, monkeypatch):
    outs = []
    for threads in ("1", "3"):
        d = tmp_path / f"t{threads}"
        d.mkdir()
        monkeypatch.setenv(OUTPUT_DIR_ENV, str(d))
        assert main(argv + ["--threads", threads, "--output", "out.csv"]) == 0
        outs.append((d / "out.csv").read_bytes())
    assert outs[0] == outs[1]
