import json

import pytest

from hermcont import experiments as ex
from hermcont.cli import main


def _write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_catalog_lists_all_presets(capsys):
    assert main(["catalog", "--json"]) == 0
    names = {e["name"] for e in json.loads(capsys.readouterr().out)}
    assert names == {"torus-flat", "torus-perturbed", "sphere-blowup", "sphere-perturbed",
                     "ot-explicit-family", "ot-stretched-calabi", "identity-fuzz"}


@pytest.mark.parametrize("name", sorted(ex.PRESETS))
def test_presets_validate(name):
    assert main(["validate", name]) == 0


@pytest.mark.parametrize("text,field,line", [
    ("name: a\nbackend: torus-spectral\ngrid: 4\n", "grid", 3),
    ("name: a\nbackend: torus-spectral\nt_schedule:\n  start: 1\n  end: 0.5\n", "t_schedule.end", 5),
    ("name: a\nbackend: sphere-symmetric\nn: 1\nvariant: unnormalized\nprofile: [1, -2]\n", "profile", 5),
    ("name: a\nbackend: sphere-symmetric\nn: 1\n", "variant", None),
    ("name: a\nbackend: nope\n", "backend", 2),
    ("name: a\nbackend: torus-spectral\nbogus: 1\n", "bogus", 3),
    ("name: a\nbackend: torus-spectral\ncheckpoints: 21\n", "checkpoints", 3),
    ("name: a\nbackend: torus-spectral\nn: 1\nphi0: [[1.5, 0.1, 0]]\n", "phi0[0]", None),
    ("name: a\nbackend: ot-explicit\nn: 1\n", "n", 3),
    ("name: a\nbackend: torus-spectral\ntolerances:\n  damping: 2\n", "tolerances.damping", 4),
])
def test_invalid_configs_name_field_and_line(tmp_path, text, field, line):
    with pytest.raises(ex.ConfigError) as err:
        ex.load_config(_write(tmp_path, text))
    assert err.value.field == field
    if line is not None:
        assert err.value.line == line
        assert f":{line}: {field}:" in str(err.value)


def test_invalid_config_exit_code(tmp_path, capsys):
    path = _write(tmp_path, "name: a\nbackend: torus-spectral\ngrid: 4\n")
    assert main(["validate", path]) == 2
    assert main(["run", path]) == 2
    assert "grid" in capsys.readouterr().err


def test_parse_error_is_reported(tmp_path):
    with pytest.raises(ex.ConfigError) as err:
        ex.load_config(_write(tmp_path, "name: [unclosed\n"))
    assert err.value.line is not None


def test_json_configs_are_accepted(tmp_path):
    cfg = ex.load_config(_write(tmp_path, json.dumps({"name": "j", "backend": "torus-spectral", "n": 1}),
                                "cfg.json"))
    assert cfg["n"] == 1 and cfg["grid"] == 64


def test_run_writes_artifacts(tmp_path, output_root):
    path = _write(tmp_path, """
name: small-torus
backend: torus-spectral
variant: normalized
n: 1
grid: 32
phi0: [[1, -0.5, 0.0], [2, 0.0, 0.1]]
t_schedule: {start: 0, end: 100, count: 8, spacing: log}
checkpoints: 4
""")
    assert main(["run", path]) == 0
    out = output_root / "small-torus"
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "ok" and report["exit_code"] == 0
    assert all(a["passed"] for a in report["assertions"])
    assert all("claim" in a for a in report["assertions"])
    assert len(list((out / "states").glob("*.json"))) <= 4
    rows = (out / "run.csv").read_text().splitlines()
    assert len(rows) == 9
    first = (out / "run.csv").read_bytes()
    assert main(["run", path]) == 0
    assert (out / "run.csv").read_bytes() == first


def test_torus_newton_failure_exits_3(tmp_path, output_root):
    path = _write(tmp_path, """
name: starved
backend: torus-spectral
n: 1
grid: 32
phi0: cosine
tolerances: {newton_tol: 1.0e-16, max_newton: 1}
t_schedule: {start: 0.1, end: 10, count: 4, spacing: log}
""")
    assert main(["run", path]) == 3
    report = json.loads((output_root / "starved" / "report.json").read_text())
    assert report["status"] == "singularity"
    assert "diagnostic" in report["summary"]


def test_failed_assertion_exits_4(tmp_path, output_root):
    # too few states near T for the blow-up fit
    path = _write(tmp_path, """
name: coarse-sphere
backend: sphere-symmetric
variant: unnormalized
n: 1
grid: 64
tolerances: {bisect_rtol: 0.3}
t_schedule: {start: 0.5, end: 1.2, count: 2, spacing: linear}
""")
    assert main(["run", path]) == 4
    report = json.loads((output_root / "coarse-sphere" / "report.json").read_text())
    failed = {a["name"] for a in report["assertions"] if not a["passed"]}
    assert "blowup_fit_T" in failed


def test_verify_identities_verb(capsys):
    assert main(["verify-identities", "--n", "1", "--count", "3"]) == 0
    captured = capsys.readouterr()
    assert json.loads(captured.out)["passed"]
    assert "skipped" in captured.err
    assert main(["verify-identities", "--count", "0"]) == 2


def test_output_root_override(output_root):
    cfg = ex.validate_config({"name": "x", "backend": "torus-spectral", "output": "sub/dir"})
    assert ex.output_dir(cfg) == output_root / "sub" / "dir"
