import csv

import pytest

from nlteleport import cli
from nlteleport.config import ConfigError, config_hash, load_record, parse_config


def run(tmp_path, text, command, *extra, name="exp.cfg"):
    cfg = tmp_path / name
    cfg.write_text(text)
    return cli.main([command, "--config", str(cfg), *extra])


def rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_parse_defaults_and_errors():
    cfg = parse_config("experiment = deterministic-sweep\ns_max_db = 4, 7\n")
    assert cfg["s_max_db"] == [4.0, 7.0] and cfg["restarts"] == 430 and cfg["seed"] == 0
    with pytest.raises(ConfigError, match="'smax'"):
        parse_config("experiment = deterministic-sweep\nsmax = 4\n")
    with pytest.raises(ConfigError, match="'restarts'"):
        parse_config("experiment = optimize\nscheme = canonical\nrestarts = many\n")
    with pytest.raises(ConfigError, match="'scheme'"):
        parse_config("experiment = optimize\n")
    with pytest.raises(ConfigError, match="experiment"):
        parse_config("s_max_db = 4\n")
    with pytest.raises(ConfigError, match="but the command runs"):
        parse_config("experiment = optimize\nscheme = canonical\n", "deterministic-sweep")


def test_hash_ignores_spelling_of_defaults():
    a = parse_config("experiment = optimize\nscheme = canonical\n")
    b = parse_config("experiment = optimize\nscheme = canonical\nrestarts = 430\nn = 0.0\n")
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({**a, "seed": 1})


def test_unknown_key_exit_code(tmp_path, capsys):
    code = run(tmp_path, "experiment = deterministic-sweep\nrestart = 3\n", "deterministic-sweep",
               "--out", str(tmp_path / "o.csv"))
    assert code == 1
    assert "'restart'" in capsys.readouterr().err
    assert not (tmp_path / "o.csv").exists()


def test_missing_config_file(tmp_path):
    assert cli.main(["optimize", "--config", str(tmp_path / "nope.cfg")]) == 1


SWEEP = """experiment = deterministic-sweep
schemes = canonical, nonlinear
ancillas = two-component
s_max_db = 4
n = 0, 0.1
restarts = 4
"""


def test_sweep_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(tmp_path, SWEEP, "deterministic-sweep", "--out", str(a)) == 0
    assert run(tmp_path, SWEEP, "deterministic-sweep", "--out", str(b), "--workers", "2") == 0
    assert a.read_bytes() == b.read_bytes()
    head = a.read_text().splitlines()[:2]
    assert head[0].startswith("# config_hash: ") and head[1] == "# seed: 0"
    got = rows(a)
    assert [(r["scheme"], r["n"]) for r in got] == [
        ("canonical", "0.0"), ("canonical", "0.1"), ("nonlinear", "0.0"), ("nonlinear", "0.1")]
    by = {(r["scheme"], r["n"]): float(r["xi_db"]) for r in got}
    for s in ("canonical", "nonlinear"):
        assert by[(s, "0.1")] > by[(s, "0.0")]
    c = tmp_path / "c.csv"
    assert run(tmp_path, SWEEP, "deterministic-sweep", "--out", str(c), "--seed", "3") == 0
    assert c.read_text().splitlines()[1] == "# seed: 3"


def test_no_squeezing_means_no_nonlinear_squeezing(tmp_path):
    text = """experiment = deterministic-sweep
schemes = canonical, nonlinear, ideal-cubic
ancillas = cubic-finite
gaussian_ancilla = true
s_max_db = 0
restarts = 20
"""
    out = tmp_path / "zero.csv"
    assert run(tmp_path, text, "deterministic-sweep", "--out", str(out)) == 0
    assert all(float(r["xi_db"]) >= -1e-9 for r in rows(out))


OPT = """experiment = optimize
scheme = nonlinear
ancilla = two-component
s_max_db = 6
restarts = 12
seed = 2
"""


@pytest.fixture(scope="module")
def stored(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("opt")
    out = tmp / "best.txt"
    assert run(tmp, OPT, "optimize", "--out", str(out)) == 0
    return tmp, out


def test_optimize_record_is_reproducible(stored):
    tmp, out = stored
    again = tmp / "again.txt"
    assert run(tmp, OPT, "optimize", "--out", str(again)) == 0
    assert out.read_bytes() == again.read_bytes()
    assert out.with_suffix(".log.csv").read_bytes() == again.with_suffix(".log.csv").read_bytes()
    assert len(rows(out.with_suffix(".log.csv"))) == 12
    rec = load_record(out)
    assert rec["scheme"] == "nonlinear" and "cluster.alpha1" in rec and "ancilla.u" in rec


def test_stored_record_replays_through_fock(stored):
    tmp, out = stored
    text = f"experiment = probabilistic-sweep\nsource = stored\nparams = {out}\np_points = 4\n"
    curve = tmp / "curve.csv"
    assert run(tmp, text, "probabilistic-sweep", "--out", str(curve)) == 0
    full = [r for r in rows(curve) if r["mode"] == "aggregate-states" and float(r["P"]) == 1.0]
    assert len(full) == 1
    target = 10 ** (float(load_record(out)["xi_db"]) / 10)
    assert float(full[0]["xi"]) == pytest.approx(target, rel=0.02)


def test_missing_stored_params_points_to_optimizer(tmp_path, capsys):
    text = f"experiment = probabilistic-sweep\nsource = stored\nparams = {tmp_path / 'none.txt'}\n"
    assert run(tmp_path, text, "probabilistic-sweep") == 1
    assert "nlteleport optimize" in capsys.readouterr().err


def test_preset_chi_list_must_match(tmp_path):
    text = "experiment = probabilistic-sweep\ndb = 6\neta = 1\nchi = 0.1, 0.2\n"
    assert run(tmp_path, text, "probabilistic-sweep") == 1


def test_validate(capsys):
    assert cli.main(["validate"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(ln.split()[0] in ("PASS", "NOTE") for ln in lines)
