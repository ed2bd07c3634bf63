"""
Command-line surface: tables, manifests, replay and exit codes.

Categories:
  1. Analytic commands
  2. Simulation outputs
  3. Manifests and replay
  4. Errors and exit codes
"""

import csv
import io

import pytest

from campus_epi.cli import float_grid, int_grid, main
from campus_epi.config import get_settings


@pytest.fixture(autouse=True)
def fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    """Stdout runs drop their manifest in the working directory."""
    monkeypatch.chdir(tmp_path)
    return tmp_path


def _rows(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


# ═══════════════════════════════════════════════════════════
# TEST CATEGORY 1: Analytic commands
# ═══════════════════════════════════════════════════════════

def test_grid_arguments():
    assert float_grid("0.3,0.5") == [0.3, 0.5]
    assert len(float_grid("0:3:0.05")) == 61
    assert float_grid("0:3:0.05")[-1] == 3.0
    assert int_grid("9:12") == [9, 10, 11, 12]
    assert int_grid("30,70") == [30, 70]


def test_ranges_stop_at_their_end():
    assert float_grid("0:1:0.35") == [0.0, 0.35, 0.7]
    assert int_grid("0:10:6") == [0, 6]
    assert int_grid("20:65:10")[-1] == 60


def test_cutoff_range_rows_within_bounds(capsys):
    assert main(["cutoff", "--p", "0.008", "--k", "20:65:10"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert [int(r["k"]) for r in rows] == [20, 30, 40, 50, 60]


def test_dorm_default_npg_grid(capsys):
    assert main(["dorm", "--variant", "single", "--local", "0.5"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert len(rows) == 61
    assert list(rows[0]) == ["variant", "local", "pl", "npg", "zeta", "error"]
    assert all(r["error"] == "" for r in rows)
    assert float(rows[0]["zeta"]) == 0.0
    zetas = [float(r["zeta"]) for r in rows]
    assert zetas == sorted(zetas)


def test_dorm_double_without_campus_spread(capsys):
    assert main(["dorm", "--variant", "double", "--local", "0.3,0.5", "--npg", "0", "--pl", "0.7"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert [float(r["zeta"]) for r in rows] == [0.0, 0.0]
    assert all(r["pl"] == "0.7" for r in rows)


def test_dorm_solver_failure_recorded_in_error_column(capsys, monkeypatch):
    monkeypatch.setenv("CAMPUS_EPI_FIXED_POINT_MAX_ITERATIONS", "2")
    get_settings.cache_clear()
    assert main(["dorm", "--variant", "double", "--local", "0.5", "--npg", "1"]) == 0
    (row,) = _rows(capsys.readouterr().out)
    assert row["zeta"] == "nan"
    assert "not reached in 2 iterations" in row["error"]


def test_dorm_gd_grid(capsys):
    assert main(["dorm", "--gd-grid", "--local", "0.1,0.9"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert len(rows) == 2 * 1001
    assert rows[0]["z"] == "0" and rows[-1]["z"] == "1"


@pytest.mark.parametrize("schedule, rho", [("scenario1", 87.0), ("scenario2", 129.380), ("range10to120", 251.5)])
def test_classes_radius(capsys, schedule, rho):
    assert main(["classes", "--schedule", schedule, "--p", "0.01"]) == 0
    (row,) = _rows(capsys.readouterr().out)
    assert float(row["rho"]) == pytest.approx(rho, abs=0.05)
    assert float(row["r0"]) == pytest.approx(rho / 100, abs=0.0005)


def test_classes_prints_two_block(capsys):
    assert main(["classes", "--schedule", "scenario2"]) == 0
    err = capsys.readouterr().err
    assert "129.380" in err and "25.288" in err


def test_cutoff_sweep(capsys):
    assert main(["cutoff", "--p", "0.01", "--k", "9,120"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert float(rows[0]["r0"]) == 0.0
    assert float(rows[1]["r0"]) == pytest.approx(2.515, abs=0.0005)


def test_cutoff_find_max_safe(capsys):
    assert main(["cutoff", "--p", "0.0039,1", "--find-max-safe"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert [int(r["k"]) for r in rows] == [120, 9]


# ═══════════════════════════════════════════════════════════
# TEST CATEGORY 2: Simulation outputs
# ═══════════════════════════════════════════════════════════

def test_simulate_writes_tables(tmp_path):
    out = tmp_path / "results"
    argv = [
        "simulate", "--runs", "20", "--seed", "3", "--output-dir", str(out),
        "--final-sizes", "--trace-run",
    ]
    assert main(argv) == 0
    summary = _rows((out / "summary.csv").read_text())[0]
    assert summary["runs"] == "20"
    finals = _rows((out / "final_sizes.csv").read_text())
    assert len(finals) == 20
    trace = _rows((out / "trace.csv").read_text())
    assert trace[0]["p50"] == "1"
    run = _rows((out / "run.csv").read_text())
    assert run[0] == {"step": "0", "week": "0", "infectious": "1", "cumulative": "1"}
    assert run[-1]["cumulative"] == finals[0]["final_size"]
    assert (out / "simulate.manifest").is_file()


def test_simulate_single_run_summary(tmp_path):
    out = tmp_path / "one"
    assert main(["simulate", "--runs", "1", "--seed", "8", "--output-dir", str(out), "--final-sizes"]) == 0
    summary = _rows((out / "summary.csv").read_text())[0]
    (final,) = _rows((out / "final_sizes.csv").read_text())
    assert summary["final_size_p50"] == final["final_size"]
    assert float(summary["p_no_community"]) == float(final["final_size"] == "1")


def test_output_identical_across_thread_counts(tmp_path, monkeypatch):
    outputs = []
    for threads in ("1", "2"):
        monkeypatch.setenv("CAMPUS_EPI_THREADS", threads)
        get_settings.cache_clear()
        out = tmp_path / f"threads{threads}"
        assert main(["simulate", "--schedule", "scenario2", "--runs", "300", "--seed", "5", "--output-dir", str(out)]) == 0
        outputs.append({name: (out / name).read_bytes() for name in ("trace.csv", "summary.csv", "simulate.manifest")})
    assert outputs[0] == outputs[1]


# ═══════════════════════════════════════════════════════════
# TEST CATEGORY 3: Manifests and replay
# ═══════════════════════════════════════════════════════════

def test_replay_simulation(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", "--runs", "25", "--seed", "11", "--output-dir", str(out), "--final-sizes"]) == 0
    assert main(["replay", "--manifest", str(out / "simulate.manifest")]) == 0


def test_replay_table_with_output_file(tmp_path):
    table = tmp_path / "cutoff.csv"
    assert main(["cutoff", "--p", "0.008", "--k", "20:60:10", "--output", str(table)]) == 0
    manifest = tmp_path / "cutoff.csv.manifest"
    text = manifest.read_text()
    assert "command=cutoff" in text and "checksum=sha256:" in text
    assert main(["replay", "--manifest", str(manifest)]) == 0


def test_stdout_output_gets_manifest_in_working_dir(workdir, capsys):
    assert main(["classes", "--schedule", "scenario1", "--p", "0.01"]) == 0
    assert capsys.readouterr().out.startswith("schedule,p,rho,r0")
    manifest = workdir / "classes.manifest"
    assert "command=classes" in manifest.read_text()
    assert main(["replay", "--manifest", str(manifest)]) == 0


def test_replay_detects_tampering(tmp_path):
    table = tmp_path / "classes.csv"
    assert main(["classes", "--p", "0.01", "--output", str(table)]) == 0
    manifest = tmp_path / "classes.csv.manifest"
    lines = manifest.read_text().splitlines()
    lines = [("checksum=sha256:" + "0" * 64) if line.startswith("checksum=") else line for line in lines]
    manifest.write_text("\n".join(lines) + "\n")
    assert main(["replay", "--manifest", str(manifest)]) == 1


def test_replay_missing_manifest(tmp_path):
    assert main(["replay", "--manifest", str(tmp_path / "absent.manifest")]) == 1


# ═══════════════════════════════════════════════════════════
# TEST CATEGORY 4: Errors and exit codes
# ═══════════════════════════════════════════════════════════

def test_unknown_schedule_is_usage_error():
    assert main(["classes", "--schedule", "no-such-schedule"]) == 2


def test_malformed_schedule_file(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("30\nlarge\n")
    assert main(["classes", "--schedule", str(path)]) == 2


def test_infeasible_schedule_exit_code(tmp_path):
    path = tmp_path / "huge.txt"
    path.write_text("12\n1\n1\n1\n3\n3\n3\n3\n")
    assert main(["simulate", "--schedule", str(path), "--runs", "2", "--output-dir", str(tmp_path / "o")]) == 4


def test_indivisible_seats_exit_code(tmp_path):
    path = tmp_path / "odd.txt"
    path.write_text("10\n11\n12\n1\n")
    assert main(["classes", "--schedule", str(path)]) == 4


@pytest.mark.parametrize(
    "argv",
    [
        ["classes", "--p", "2"],
        ["dorm", "--npg", "3:0"],
        ["dorm", "--pl", "1.5"],
        ["simulate", "--runs", "0"],
    ],
)
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == 2
