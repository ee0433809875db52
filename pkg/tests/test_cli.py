import pytest

from spacetime_hp.cli import (
    ConfigError,
    emit_table,
    main,
    parse_config,
    run_study,
    run_verification,
    write_outputs,
)
from spacetime_hp.metrics import StudyRecord

U1_SMALL = """
[study]
problem = u1
levels = 2
strategy = auto

[temporal]
scheme = uniform
p = 1
m0 = 4

[spatial]
scheme = uniform
initial_elements = 4
"""


def test_parse_roundtrip_normalized():
    cfg = parse_config(U1_SMALL)
    assert cfg.problem == "u1"
    assert cfg.levels == 2
    again = parse_config(cfg.to_text())
    assert again == cfg


def test_parse_requires_problem():
    with pytest.raises(ConfigError, match="problem"):
        parse_config("[study]\nlevels = 2\n")


def test_parse_rejects_bad_sigma():
    bad = U1_SMALL.replace("scheme = uniform\np = 1\nm0 = 4", "scheme = hp\nsigma = 1.2")
    with pytest.raises(ConfigError, match=r"sigma in \(0,1\)"):
        parse_config(bad)


def test_parse_rejects_unknown_problem():
    with pytest.raises(ConfigError, match="unknown problem"):
        parse_config(U1_SMALL.replace("problem = u1", "problem = u9"))


def test_parse_rejects_bad_numbers():
    with pytest.raises(ConfigError, match="levels"):
        parse_config(U1_SMALL.replace("levels = 2", "levels = two"))


def test_run_study_produces_monotone_records():
    cfg = parse_config(U1_SMALL)
    records, failures = run_study(cfg, log=lambda *a, **k: None)
    assert failures == []
    assert len(records) == 2
    assert records[0].MN == 12 and records[1].MN == 56
    assert records[1].error < records[0].error
    assert records[0].error == pytest.approx(7.33e-2, rel=0.01)


def test_run_study_partial_failure_isolation():
    # hp rule yields m1 < 3 on the coarsest level: that level is skipped,
    # later levels still run
    text = U1_SMALL.replace(
        "scheme = uniform\np = 1\nm0 = 4",
        "scheme = hp\nsigma = 0.31\nmu_hp = 2.0\nm1_factor = 1.4\nm2 = 1",
    ).replace("levels = 2", "levels = 3")
    cfg = parse_config(text)
    records, failures = run_study(cfg, log=lambda *a, **k: None)
    assert [lvl for lvl, _ in failures] == [0, 1]
    assert all("m1" in reason for _, reason in failures)
    assert len(records) == 1


def test_emit_table_formatting():
    assert emit_table([]).count("\n") == 1
    recs = [StudyRecord(MN=12, M=4, N=3, h_x=0.25, k_max=0.5, error=7.33e-2)]
    table = emit_table(recs)
    lines = table.strip().split("\n")
    assert len(lines) == 2
    assert "7.330e-02" in lines[1]
    assert lines[1].split()[-1] == "-"
    assert "0.25000" in lines[1]


def test_main_exit_codes(tmp_path):
    cfg_path = tmp_path / "study.cfg"
    cfg_path.write_text(U1_SMALL)
    assert main([str(cfg_path), "--levels", "1", "--out", str(tmp_path / "out")]) == 0
    bad = tmp_path / "bad.cfg"
    bad.write_text(U1_SMALL.replace("problem = u1", "problem = zzz"))
    assert main([str(bad)]) == 1
    assert main([str(tmp_path / "missing.cfg")]) == 1


def test_main_partial_exit_code(tmp_path):
    text = U1_SMALL.replace(
        "scheme = uniform\np = 1\nm0 = 4",
        "scheme = hp\nsigma = 0.31\nmu_hp = 2.0\nm1_factor = 1.4\nm2 = 1",
    )
    cfg_path = tmp_path / "study.cfg"
    cfg_path.write_text(text)
    assert main([str(cfg_path)]) == 2


def test_dense_cap_skips_level_with_reason(monkeypatch):
    # the dense strategy refuses levels beyond the materialization cap;
    # earlier levels survive and the reason is recorded
    import spacetime_hp.cli as cli_mod

    monkeypatch.setattr(cli_mod, "DENSE_LIMIT", 100)
    text = U1_SMALL.replace("strategy = auto", "strategy = dense").replace(
        "levels = 2", "levels = 3"
    )
    cfg = parse_config(text)
    records, failures = run_study(cfg, log=lambda *a, **k: None)
    assert len(records) == 2
    assert len(failures) == 1 and failures[0][0] == 2
    assert "refused" in failures[0][1]


def test_memory_guard_skips_level(monkeypatch):
    import spacetime_hp.cli as cli_mod

    monkeypatch.setattr(cli_mod, "MEMORY_GUARD", 100)
    cfg = parse_config(U1_SMALL.replace("levels = 2", "levels = 3"))
    records, failures = run_study(cfg, log=lambda *a, **k: None)
    assert len(records) == 2
    assert len(failures) == 1
    assert "memory guard" in failures[0][1]


def test_outputs_deterministic(tmp_path):
    cfg = parse_config(U1_SMALL)
    records1, _ = run_study(cfg, log=lambda *a, **k: None)
    records2, _ = run_study(cfg, log=lambda *a, **k: None)
    from dataclasses import replace

    a, b = tmp_path / "a", tmp_path / "b"
    write_outputs(replace(cfg, out=str(a)), records1)
    write_outputs(replace(cfg, out=str(b)), records2)
    for name in ("table.txt", "series.dat"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    # records.tsv carries wall time and is excluded from bit-identity
    assert (a / "records.tsv").exists()


def test_override_strategy(tmp_path):
    cfg_path = tmp_path / "study.cfg"
    cfg_path.write_text(U1_SMALL)
    assert main([str(cfg_path), "--levels", "1", "--strategy", "bartels-stewart"]) == 0


def test_run_verification_passes():
    assert run_verification(seed=0, log=lambda *a, **k: None)


def test_mesh_export_option(tmp_path):
    text = """
[study]
problem = u2
levels = 1
strategy = auto
out = {out}

[temporal]
scheme = p
m = 4

[spatial]
scheme = graded
initial_level = 1
beta = 0.6
radius = 0.25
export_meshes = true
""".format(out=tmp_path / "meshes")
    cfg = parse_config(text)
    records, failures = run_study(cfg, log=lambda *a, **k: None)
    assert failures == []
    assert (tmp_path / "meshes" / "mesh_level0.txt").exists()
