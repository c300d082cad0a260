import hashlib
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from mdrc.errors import ScenarioInvalid
from mdrc.experiments import cli
from mdrc.experiments.runner import run_scenario, settle_time, verify
from mdrc.experiments.scenario import builtin_names, load_scenario, parse_scenario
from mdrc.experiments.svg import line_plot, nice_ticks
from mdrc.model import assemble_Q
from mdrc.simulator import evaluate_cost

TINY = """
name = "tiny"
[plant]
A = [[-1.0]]
B = [[1.0]]
E = [[1.0]]
c_o = [[1.0]]
[cost]
Qbar = [[3.0]]
R = [[1.0]]
T = 0.5
target = [0.0]
[simulation]
T = 0.5
step = 1.0e-3
x0 = [0.0]
"""


def tiny(tmp_path, controllers='[[controllers]]\nname = "proposed"\nkind = "finite_horizon"\n'):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY + controllers)
    return path


def test_builtins_have_reference_parameters():
    assert {"example_a", "example_b", "scalar", "undetectable"} <= set(builtin_names())
    a = load_scenario("example_a")
    assert np.array_equal(a.plant.A, [[-4, 0, 0], [0, 3, 1], [0, -2, -1]])
    assert np.array_equal(assemble_Q(a.plant, a.cost), np.diag([0, 0, 1e4]))
    assert np.array_equal(a.x0, [1, 1, 0])
    kinds = {c.name: c for c in a.controllers}
    assert kinds["proposed"].params["tau"] == 0.05
    assert kinds["pid"].params == {"K_p": 80.0, "K_i": 400.0, "K_d": 10.0}
    assert a.disturbance(0.49)[0] == 0 and a.disturbance(0.5)[0] == 3
    b = load_scenario("example_b")
    assert np.array_equal(b.plant.A, [[-0.42, 106.16], [41.67, 41.67]])
    assert b.cost.T == 1.2 and np.array_equal(b.cost.P_T, np.zeros((2, 2)))
    assert np.allclose(b.cost.r, [60.0, 0.0])
    assert b.step == 1e-4
    assert {c.kind for c in b.controllers} == {"finite_horizon", "pid", "gesobc"}


def test_empty_controller_list_rejected_before_writing(tmp_path):
    path = tiny(tmp_path, controllers="")
    out = tmp_path / "out"
    with pytest.raises(ScenarioInvalid):
        load_scenario(str(path), out)
    assert not out.exists()
    assert cli.main(["run", str(path), "--out-dir", str(out)]) == 2
    assert not out.exists()


def test_invalid_documents():
    with pytest.raises(ScenarioInvalid):
        parse_scenario({"name": "x"})
    with pytest.raises(ScenarioInvalid):
        load_scenario("no_such_scenario")


def test_run_writes_deterministic_artifacts(tmp_path):
    s = load_scenario("scalar")
    res = run_scenario(s, tmp_path)
    root = tmp_path / "scalar"
    names = sorted(p.name for p in root.iterdir())
    assert names == ["control.svg", "infinite.csv", "output.svg", "proposed.csv", "receding.csv",
                     "summary.csv"]
    digest = {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in root.iterdir()}
    run_scenario(s, tmp_path)
    assert digest == {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in root.iterdir()}
    # summary is the single source of truth for J_sim
    for row in res.rows:
        lg = res.logs[row.controller]
        assert row.J_sim == evaluate_cost(lg, s.plant, s.cost.with_horizon(s.T)).J_sim


def test_failure_marker(tmp_path):
    path = tiny(tmp_path, '[[controllers]]\nname = "bad"\nkind = "gesobc"\nK_x = [[60.0]]\n'
                          'K_d = [[0.0]]\n[[controllers]]\nname = "ok"\nkind = "finite_horizon"\n')
    doc = path.read_text().replace("T = 0.5\nstep", "T = 100.0\nstep").replace(
        "T = 0.5\ntarget", "T = 100.0\ntarget").replace("x0 = [0.0]", "x0 = [1.0]")
    path.write_text(doc)
    s = load_scenario(str(path))
    res = run_scenario(s, tmp_path)
    status = {r.controller: r.status for r in res.rows}
    assert status == {"bad": "diverged", "ok": "ok"}
    assert (tmp_path / "tiny" / "bad.failed").exists()
    assert (tmp_path / "tiny" / "bad.csv").exists()


def test_verify_scalar_closed_form():
    rep = verify(load_scenario("scalar"), seed=1, samples=3)
    by = {c.name: c for c in rep.checks}
    assert by["scalar_closed_form"].status == "pass"
    assert by["gare"].status == "pass" and by["oracle"].status == "pass"


def test_verify_undetectable():
    rep = verify(load_scenario("undetectable"), samples=2)
    by = {c.name: c for c in rep.checks}
    assert by["detectability"].status == "fail"
    assert by["gare"].status == "fail" and "NoConvergence" in by["gare"].detail
    assert not rep.passed


def test_cli_exit_codes(tmp_path, capsys):
    # zero initial state on the reference: every residual vanishes
    assert cli.main(["verify", str(tiny(tmp_path))]) == 0
    assert "tiny: PASS" in capsys.readouterr().out
    assert cli.main(["verify", "undetectable"]) == 1
    assert cli.main(["list"]) == 0
    assert "example_a" in capsys.readouterr().out


def test_cli_run(tmp_path, capsys):
    assert cli.main(["run", "scalar", "--out-dir", str(tmp_path), "--step", "2e-3"]) == 0
    out = capsys.readouterr().out
    assert "proposed" in out and (tmp_path / "scalar" / "summary.csv").exists()


def test_settle_time():
    t = np.linspace(0, 1, 11)
    y = np.array([0, 50, 58, 59.5, 60.5, 59.9, 60, 60, 60, 60, 60.0])
    assert settle_time(t, y, 60.0) == pytest.approx(0.3)
    assert np.isnan(settle_time(t, y - 10, 60.0))


def test_nice_ticks():
    assert nice_ticks(0, 1.2) == [0.0, 0.25, 0.5, 0.75, 1.0, 1.25]
    ticks = nice_ticks(-3.7, 88.1)
    assert ticks[0] <= -3.7 and ticks[-1] >= 88.1
    assert nice_ticks(5, 5)[0] <= 4


def test_svg_is_well_formed(tmp_path):
    path = tmp_path / "p.svg"
    t = np.linspace(0, 1, 5000)
    line_plot([("a", t, np.sin(t)), ("b", t, np.full_like(t, np.nan))], path, title="x")
    root = ET.parse(path).getroot()
    assert root.get("width") == "800" and root.get("height") == "600"
    lines = root.findall("{http://www.w3.org/2000/svg}polyline")
    assert len(lines) == 2 and len(lines[0].get("points").split()) <= 2000
