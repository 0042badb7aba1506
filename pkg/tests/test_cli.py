import csv
import os
import subprocess
import sys

import pytest

from promaclab.cli import (
    CSV_SCHEMAS,
    EXIT_CONFIG,
    EXIT_INFEASIBLE,
    EXIT_OK,
    FIGURE_MANIFEST,
    figure_manifest,
    main,
)


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


class TestScenarios:
    def test_deps_prints_length_six_ruler(self, tmp_path, capsys):
        out = tmp_path / "deps.csv"
        assert main(["deps", "--order", "4", "--g", "1", "--out", str(out)]) == EXIT_OK
        assert "length 6" in capsys.readouterr().out
        rows = read_csv(out)
        assert rows[0] == list(CSV_SCHEMAS["deps"])
        assert rows[1] == ["4", "1", "0", "6", "0 1 4 6"]

    def test_resilience_sandwich_row(self, tmp_path):
        out = tmp_path / "res.csv"
        rc = main(["resilience", "--scheme", "window", "--tag-bits", "16",
                   "--drops", "2", "--out", str(out)])
        assert rc == EXIT_OK
        rows = read_csv(out)
        assert rows[0] == list(CSV_SCHEMAS["resilience"])
        assert rows[-1][4:] == ["2", "0", "0"]

    def test_channel_runs(self, tmp_path):
        out = tmp_path / "ch.csv"
        rc = main(["channel", "--preset", "high-error", "--scheme", "window",
                   "--tag-bits", "8", "--runs", "3", "--events", "100",
                   "--out", str(out)])
        assert rc == EXIT_OK
        rows = read_csv(out)
        assert rows[0] == list(CSV_SCHEMAS["channel"])
        assert rows[1][0] == "window" and rows[1][2] == "high-error"

    def test_memory_and_dos_and_jam(self, tmp_path):
        assert main(["memory", "--out", str(tmp_path / "m.csv")]) == EXIT_OK
        assert main(["dos", "--drops", "2", "--out", str(tmp_path / "d.csv")]) == EXIT_OK
        assert main(["jam", "--curve", "window:32", "--q", "0.9",
                     "--runs", "2", "--events", "50",
                     "--out", str(tmp_path / "j.csv")]) == EXIT_OK
        for name, scenario in (("m", "memory"), ("d", "dos"), ("j", "jam")):
            rows = read_csv(tmp_path / f"{name}.csv")
            assert rows[0] == list(CSV_SCHEMAS[scenario])
            assert len(rows) > 1


class TestExitCodes:
    def test_unknown_scenario_is_config_error(self):
        assert main(["frobnicate"]) == EXIT_CONFIG

    def test_bad_combination_is_config_error(self, tmp_path):
        rc = main(["channel", "--scheme", "cumac", "--tag-bits", "10",
                   "--preset", "low-error", "--runs", "2", "--events", "10",
                   "--out", str(tmp_path / "x.csv")])
        assert rc == EXIT_CONFIG

    def test_missing_channel_is_config_error(self, tmp_path):
        rc = main(["channel", "--scheme", "window", "--tag-bits", "8",
                   "--runs", "2", "--events", "10", "--out", str(tmp_path / "x.csv")])
        assert rc == EXIT_CONFIG

    def test_bound_exhausted_is_infeasible(self, tmp_path):
        rc = main(["deps", "--order", "4", "--count", "500", "--bound", "8",
                   "--out", str(tmp_path / "x.csv")])
        assert rc == EXIT_INFEASIBLE

    def test_unreachable_order_is_infeasible(self, tmp_path):
        rc = main(["deps", "--order", "12", "--g", "3", "--out", str(tmp_path / "x.csv")])
        assert rc == EXIT_INFEASIBLE


class TestReproducibility:
    def test_identical_seeds_identical_bytes(self, tmp_path):
        args = ["channel", "--preset", "high-error", "--scheme", "window",
                "--tag-bits", "8", "--runs", "3", "--events", "120", "--seed", "5"]
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(args + ["--out", str(a)]) == EXIT_OK
        assert main(args + ["--out", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_env_seed_fallback(self, tmp_path, monkeypatch):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["jam", "--curve", "spmac:16:2", "--q", "0.5", "--runs", "2",
                "--events", "40"]
        monkeypatch.setenv("PROMAC_SEED", "99")
        assert main(args + ["--out", str(a)]) == EXIT_OK
        monkeypatch.setenv("PROMAC_SEED", "100")
        assert main(args + ["--out", str(b)]) == EXIT_OK
        assert a.read_bytes() != b.read_bytes()


class TestConfigFile:
    def test_file_values_apply_and_flags_override(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text("tag-bits = 16\ndrops = 2\nscheme = window\n")
        out1 = tmp_path / "1.csv"
        assert main(["resilience", "--config", str(cfg), "--out", str(out1)]) == EXIT_OK
        rows = read_csv(out1)
        assert rows[1][1] == "16"
        assert rows[-1][4] == "2"
        # explicit flag beats the file
        out2 = tmp_path / "2.csv"
        assert main(["resilience", "--config", str(cfg), "--tag-bits", "32",
                     "--out", str(out2)]) == EXIT_OK
        assert read_csv(out2)[1][1] == "32"

    def test_config_equivalent_to_flags(self, tmp_path):
        flags = ["dos", "--drops", "2"]
        cfg = tmp_path / "dos.cfg"
        cfg.write_text("drops = 2\n")
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(flags + ["--out", str(a)]) == EXIT_OK
        assert main(["dos", "--config", str(cfg), "--out", str(b)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()


class TestManifest:
    def test_manifest_lists_all_figures(self, tmp_path):
        out = tmp_path / "man.csv"
        assert main(["manifest", "--out", str(out)]) == EXIT_OK
        rows = read_csv(out)
        assert len(rows) - 1 == len(FIGURE_MANIFEST) >= 8
        figures = {r[0] for r in rows[1:]}
        for fam in ("fig4", "fig5", "fig6", "fig8", "fig9", "fig10", "fig11", "fig12"):
            assert any(f.startswith(fam) for f in figures)

    def test_manifest_stable(self):
        assert figure_manifest() == figure_manifest()

    @pytest.mark.parametrize("figure_id", [f for f, _, _ in FIGURE_MANIFEST])
    def test_every_entry_runs(self, figure_id, tmp_path):
        out = tmp_path / f"{figure_id}.csv"
        rc = main(["figure", figure_id, "--runs", "2", "--events", "60",
                   "--out", str(out)])
        assert rc == EXIT_OK
        rows = read_csv(out)
        scenario = {f: s for f, s, _ in FIGURE_MANIFEST}[figure_id]
        assert rows[0] == list(CSV_SCHEMAS[scenario])
        assert len(rows) > 1


class TestConsoleScript:
    def test_installed_entry_point(self, tmp_path):
        out = tmp_path / "o.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "promaclab.cli", "deps", "--order", "2",
             "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert read_csv(out)[1] == ["2", "1", "0", "1", "0 1"]
