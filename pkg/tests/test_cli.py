import json

import pytest

from bgboltz import cli
from bgboltz.checks import Verdict, below, within


def _report(verdicts, version=cli.SCHEMA_VERSION):
    return {"schema_version": version, "verdicts": [v.to_dict() for v in verdicts]}


def test_unknown_key_exits_with_config_error(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[grid]\nn_speeed = 10\n")
    assert cli.main(["heat", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "grid.n_speeed" in capsys.readouterr().err


def test_bad_value_and_section_are_named(tmp_path, capsys):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[heat]\ndrift = fast\n")
    assert cli.main(["heat", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "heat.drift" in capsys.readouterr().err
    cfg.write_text("[colour]\nx = 1\n")
    assert cli.main(["heat", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "colour" in capsys.readouterr().err


def test_short_window_rejected(tmp_path, capsys):
    cfg = tmp_path / "w.ini"
    cfg.write_text("[semigroup]\nwindow_start = 10\nwindow_end = 50\n")
    assert cli.main(["semigroup", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "semigroup" in capsys.readouterr().err


def test_settings_from_config_types(tmp_path):
    cfg = tmp_path / "ok.ini"
    cfg.write_text("[run]\nseed = 7\ncache = no\n[background]\nmu = 0.05\nlam = 1.01\n"
                   "[chi1]\nscales = 1, 0.5\n")
    st = cli.settings_from_config(cli.read_config(cfg))
    assert st.seed == 7 and st.use_cache is False
    assert st.b.mu_axial == 0.05 and st.chi.b.lam == 1.01
    assert st.linearity_scales == (1.0, 0.5)


def test_report_diff_cases():
    v = within("a.slope", 1, -1.0, -0.99, 0.05, "note")
    w = within("a.slope", 1, -1.0, -0.97, 0.05, "note")
    assert cli.report_diff(_report([v]), _report([v])) == ""
    diff = cli.report_diff(_report([v]), _report([w])).splitlines()
    assert len(diff) == 1 and "a.slope" in diff[0]
    with pytest.raises(cli.SchemaError):
        cli.report_diff(_report([v]), _report([v], version=99))


def test_csv_uses_fixed_precision(tmp_path):
    path = tmp_path / "t.csv"
    cli.write_csv(path, ["x", "y"], [[1.0, "tag"], [None, 2]])
    assert path.read_text().splitlines() == ["x,y", "1.000000000000e+00,tag", ",2"]


def test_exploratory_verdicts_gate_only_in_strict_mode():
    from bgboltz.checks import ExperimentResult, Settings
    res = ExperimentResult("x", [below("ok", 1, 1.0, 0.5), below("side", 1, 1.0, 2.0,
                                                                  exploratory=True)])
    assert cli.build_report([res], Settings(), strict=False)["all_passed"]
    assert not cli.build_report([res], Settings(), strict=True)["all_passed"]


def test_lemmas_run_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        assert cli.main(["lemmas", "--out", str(out)]) == 0
        outs.append(out)
    names = sorted(p.name for p in outs[0].iterdir() if p.name != "metadata.json")
    assert "report.json" in names
    for n in names:
        assert (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()
    rep = json.loads((outs[0] / "report.json").read_text())
    assert rep["schema_version"] == cli.SCHEMA_VERSION and rep["all_passed"]


def test_diff_command(tmp_path, capsys):
    a = tmp_path / "a.json"
    a.write_text(json.dumps(_report([within("c", 1, 0.0, 0.0, 1.0)])))
    assert cli.main(["diff", str(a), str(a)]) == 0
