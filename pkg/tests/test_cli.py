import json
from dataclasses import fields

import pytest

from isingtrack import read_event
from isingtrack.cli import RunConfig, build_parser, main, parse_range, resolve_config
from isingtrack.errors import ConfigError

# field -> (flag, value on the command line, value in the config file, parsed flag value)
PRECEDENCE = {
    "epsilon": ("--epsilon", "0.001", 0.01, 0.001),
    "lam": ("--lambda", "3", 2, 3),
    "alpha": ("--alpha", "0.5", 0.25, 0.5),
    "beta": ("--beta", "0.5", 0.25, 0.5),
    "gamma": ("--gamma", "1.5", 1.0, 1.5),
    "delta": ("--delta", "2.0", 3.0, 2.0),
    "threshold": ("--threshold", "0.4", 0.3, 0.4),
    "weight_mode": ("--weight-mode", "dp_smooth", "step", "dp_smooth"),
    "max_skip": ("--max-skip", "2", 1, 2),
    "layers": ("--layers", "6", 5, "6"),
    "particles": ("--particles", "7", 8, "7"),
    "layer_spacing": ("--spacing", "20", 25.0, 20.0),
    "half_aperture_x": ("--aperture-x", "10", 20.0, 10.0),
    "half_aperture_y": ("--aperture-y", "11", 21.0, 11.0),
    "smear_sigma": ("--smear", "0.1", 0.2, 0.1),
    "hit_efficiency": ("--efficiency", "0.9", 0.8, 0.9),
    "seed": ("--seed", "4", 5, 4),
    "events": ("--events", "3", 9, 3),
    "mode": ("--mode", "hhl-oracle", "hhl-circuit", "hhl-oracle"),
    "input": ("--input", "a", "b", "a"),
    "output": ("--output", "c", "d", "c"),
    "format": ("--format", "json", "csv", "json"),
}


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_precedence_covers_every_field():
    assert set(PRECEDENCE) == {f.name for f in fields(RunConfig)}


@pytest.mark.parametrize("name", sorted(PRECEDENCE))
def test_flag_beats_file_beats_default(tmp_path, name):
    flag, cli_value, file_value, parsed = PRECEDENCE[name]
    parser = build_parser()
    config = tmp_path / "c.json"
    config.write_text(json.dumps({name: file_value}))
    default = getattr(resolve_config(parser.parse_args(["calibrate"])), name)
    assert default == getattr(RunConfig(), name)
    from_file = resolve_config(parser.parse_args(["calibrate", "--config", str(config)]))
    assert getattr(from_file, name) == file_value
    both = resolve_config(parser.parse_args(["calibrate", "--config", str(config), flag, cli_value]))
    assert getattr(both, name) == parsed


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "c.json"
    bad.write_text('{"nonsense": 1}')
    code, _, err = run(["calibrate", "--config", bad], capsys)
    assert code == 2 and json.loads(err)["exit_code"] == 2
    code, _, _ = run(["calibrate", "--config", tmp_path / "missing.json"], capsys)
    assert code == 2
    cfg = tmp_path / "alias.json"
    cfg.write_text('{"lambda": 4}')
    assert resolve_config(build_parser().parse_args(["calibrate", "--config", str(cfg)])).lam == 4


def test_parse_range():
    assert parse_range(5) == [5]
    assert parse_range("2:5") == [2, 3, 4, 5]
    assert parse_range("2,4,8") == [2, 4, 8]
    assert parse_range("5:4") == []
    with pytest.raises(ConfigError):
        parse_range("x")


def test_generate(tmp_path, capsys):
    out = tmp_path / "ev"
    code, stdout, _ = run(["generate", "--layers", 3, "--particles", 5, "--events", 10, "--seed", 7,
                           "--output", out], capsys)
    assert code == 0
    manifest = json.loads(stdout)["events"]
    assert len(manifest) == 10
    files = sorted(out.glob("event_*.json"))
    assert len(files) == 10
    assert all(read_event(f).n_hits == 15 for f in files)

    again = tmp_path / "ev2"
    run(["generate", "--layers", 3, "--particles", 5, "--events", 10, "--seed", 7, "--output", again], capsys)
    for f in files:
        assert f.read_bytes() == (again / f.name).read_bytes()


def test_generate_zero_events(tmp_path, capsys):
    code, stdout, _ = run(["generate", "--events", 0, "--output", tmp_path / "none"], capsys)
    assert code == 0 and json.loads(stdout) == {"events": []}


def test_reconstruct_classical(tmp_path, capsys):
    ev = tmp_path / "ev"
    run(["generate", "--layers", 3, "--particles", 5, "--events", 4, "--output", ev], capsys)
    out = tmp_path / "reco"
    code, stdout, _ = run(["reconstruct", "--input", ev, "--output", out, "--epsilon", "1e-9"], capsys)
    assert code == 0
    summary = json.loads(stdout)
    assert summary["segment_efficiency"] == 1.0 and summary["segment_purity"] == 1.0
    assert summary["eff_track"] == 1.0 and summary["fake_rate"] == 0.0
    lines = (out / "metrics.csv").read_text().splitlines()
    assert len(lines) == 1 + 4 + 1 and lines[-1].startswith("summary,")
    assert len((out / "event_00000.tracks.txt").read_text().splitlines()) == 5
    assert len((out / "event_00000.solution.txt").read_text().splitlines()) == 50


def test_reconstruct_circuit_matches_classical(tmp_path, capsys):
    ev = tmp_path / "ev"
    run(["generate", "--layers", 3, "--particles", 2, "--events", 2, "--seed", 3, "--output", ev], capsys)
    for mode in ("classical", "hhl-circuit", "hhl-oracle"):
        assert run(["reconstruct", "--input", ev, "--output", tmp_path / mode, "--mode", mode], capsys)[0] == 0

    def flags(mode, name):
        return [line.split()[2] for line in (tmp_path / mode / f"{name}.solution.txt").read_text().splitlines()]

    for name in ("event_00000", "event_00001"):
        assert flags("hhl-circuit", name) == flags("classical", name) == flags("hhl-oracle", name)
    hhl_rows = (tmp_path / "hhl-circuit" / "hhl.csv").read_text().splitlines()
    assert len(hhl_rows) == 3 and "qpe_residual" in hhl_rows[0]


def test_reconstruct_missing_input(tmp_path, capsys):
    code, _, err = run(["reconstruct", "--input", tmp_path / "nowhere", "--output", tmp_path / "o"], capsys)
    assert code == 3
    rec = json.loads(err)
    assert rec["exit_code"] == 3 and "nowhere" in rec["message"]


def test_reconstruct_reports_event_on_bad_file(tmp_path, capsys):
    ev = tmp_path / "ev"
    ev.mkdir()
    (ev / "broken.json").write_text("{")
    code, _, err = run(["reconstruct", "--input", ev, "--output", tmp_path / "o"], capsys)
    assert code == 3 and json.loads(err)["event"] == "broken.json"


def test_calibrate(capsys):
    code, stdout, _ = run(["calibrate", "--events", 30, "--seed", 2], capsys)
    first = json.loads(stdout)["threshold"]
    assert code == 0 and 0.38 <= first <= 0.50
    _, again, _ = run(["calibrate", "--events", 30, "--seed", 2], capsys)
    assert json.loads(again)["threshold"] == first
    code, _, err = run(["calibrate", "--events", 5, "--layers", 2, "--particles", 1], capsys)
    assert code == 3 and json.loads(err)["error"] == "DegenerateBatchError"


def test_study_kappa_and_sparsity(tmp_path, capsys):
    out = tmp_path / "k.csv"
    code, _, _ = run(["study", "kappa", "--particles", "2:10", "--layers", "3:8", "--epsilon", "1e-9",
                      "--output", out], capsys)
    assert code == 0
    rows = out.read_text().splitlines()[1:]
    assert len(rows) == 9 * 6
    assert all(float(r.split(",")[-1]) < 5 for r in rows)

    code, stdout, _ = run(["study", "sparsity", "--particles", 1, "--layers", "2:12"], capsys)
    header, *rows = stdout.splitlines()
    col = header.split(",").index("max_row_nnz")
    assert all(int(r.split(",")[col]) <= 3 for r in rows)


def test_study_empty_range(capsys):
    code, stdout, _ = run(["study", "sparsity", "--particles", "5:4", "--layers", 3], capsys)
    assert code == 0
    assert stdout == "particles,layers,seed,n_doublets,n_pad,nnz,max_row_nnz,density,kappa\n"


def test_hhl_report_default_grid(capsys):
    code, stdout, _ = run(["hhl-report"], capsys)
    header, *rows = stdout.splitlines()
    assert code == 0
    assert header == "n,n_pad,n_b,n_q,total_qubits,kappa,success_probability,fidelity"
    got = [(int(r.split(",")[0]), int(r.split(",")[4])) for r in rows]
    assert got == [(8, 8), (18, 12), (32, 12), (50, 14), (12, 10), (27, 12), (48, 14)]
    code, stdout, _ = run(["hhl-report", "--layers", 3, "--particles", 2, "--mode", "hhl-circuit"], capsys)
    assert code == 0 and len(stdout.splitlines()) == 2
