"""Command line behavior: subcommands, exit codes, deterministic output."""

import json

import pytest

from rfoverlay.cli import EXIT_IO, EXIT_MISMATCH, EXIT_OK, EXIT_USAGE, main


def write_config(tmp_path, **overrides):
    cfg = {
        "node_count": 6,
        "seed": 9,
        "workload": {"lambda": 2.0, "threshold": 2, "intervals": 12},
    }
    cfg.update(overrides)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


# -- simulate / verify ---------------------------------------------------------


def test_simulate_writes_trace_and_metrics(tmp_path, capsys):
    config = write_config(tmp_path)
    trace_path = tmp_path / "run.jsonl"
    metrics_path = tmp_path / "metrics.txt"
    code = main([
        "simulate", "--config", config,
        "--trace", str(trace_path), "--metrics", str(metrics_path),
    ])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "wrote trace" in out and "wrote metrics" in out
    assert trace_path.read_text().count("\n") > 0
    table = metrics_path.read_text()
    assert table.startswith("interval")
    assert "total" in table


def test_simulate_and_verify_roundtrip(tmp_path, capsys):
    config = write_config(tmp_path)
    trace_path = str(tmp_path / "run.jsonl")
    assert main(["simulate", "--config", config, "--trace", trace_path, "--verify"]) == EXIT_OK
    assert "verification: PASSED (12 intervals)" in capsys.readouterr().out
    assert main(["verify", "--config", config, "--trace", trace_path]) == EXIT_OK
    assert "verification: PASSED" in capsys.readouterr().out


def test_simulate_output_is_reproducible(tmp_path):
    config = write_config(tmp_path)
    first = tmp_path / "a.jsonl"
    second = tmp_path / "b.jsonl"
    main(["simulate", "--config", config, "--trace", str(first)])
    main(["simulate", "--config", config, "--trace", str(second)])
    assert first.read_bytes() == second.read_bytes()


def test_verify_flags_a_corrupted_trace(tmp_path, capsys):
    config = write_config(tmp_path)
    trace_path = tmp_path / "run.jsonl"
    main(["simulate", "--config", config, "--trace", str(trace_path)])
    capsys.readouterr()

    lines = trace_path.read_text().splitlines()
    events = [json.loads(line) for line in lines]
    index = max(
        i for i, e in enumerate(events)
        if e["kind"] == "ViewChange" and "view" in e["detail"]
    )
    events[index]["detail"]["view"]["tre"] = {"kind": "hint", "node": 777}
    lines[index] = json.dumps(events[index])
    trace_path.write_text("\n".join(lines) + "\n")

    code = main(["verify", "--config", config, "--trace", str(trace_path)])
    assert code == EXIT_MISMATCH
    out = capsys.readouterr().out
    assert "verification: FAILED" in out
    assert "mismatch" in out


def test_verify_rejects_garbage(tmp_path, capsys):
    config = write_config(tmp_path)
    trace_path = tmp_path / "junk.jsonl"
    trace_path.write_text("this is not a trace\n")
    code = main(["verify", "--config", config, "--trace", str(trace_path)])
    assert code == EXIT_MISMATCH
    assert "malformed trace" in capsys.readouterr().err


# -- exit codes -------------------------------------------------------------------


def test_usage_errors_exit_2(capsys):
    assert main([]) == EXIT_USAGE
    capsys.readouterr()
    assert main(["simulate"]) == EXIT_USAGE  # --config is required
    capsys.readouterr()
    assert main(["oracle", "--count", "0"]) == EXIT_USAGE
    capsys.readouterr()


def test_help_exits_0(capsys):
    assert main(["--help"]) == EXIT_OK
    assert "simulate" in capsys.readouterr().out


def test_missing_files_exit_3(tmp_path, capsys):
    assert main(["simulate", "--config", str(tmp_path / "absent.json")]) == EXIT_IO
    assert "i/o error" in capsys.readouterr().err
    config = write_config(tmp_path)
    assert main(["verify", "--config", config, "--trace", str(tmp_path / "no.jsonl")]) == EXIT_IO


def test_bad_config_exits_2(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"node_count": 3, "mystery": true}')
    assert main(["simulate", "--config", str(path)]) == EXIT_USAGE
    assert "unknown config keys" in capsys.readouterr().err


# -- oracle -------------------------------------------------------------------------


def test_oracle_prints_the_reference_assignment(capsys):
    assert main(["oracle", "--topology", "basic", "--count", "10", "--down", "2,5,6"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "n0: trust-ore"
    assert lines[1] == "n1: hint n3"
    assert lines[4] == "n4: hint n7"
    assert lines[5] == "n5: hint n7"
    assert len(lines) == 10


def test_oracle_directional_output(capsys):
    assert main(["oracle", "--topology", "brf", "--count", "10", "--down", "2,5,6"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[4] == "n4: cw=n7 ccw=n3"
    assert main(["oracle", "--topology", "sbrf", "--count", "10", "--down", "2,5,6"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[5] == "n5: candidate=n4"
    assert lines[0] == "n0: cw=n1 ccw=n9"


def test_oracle_empty_system(capsys):
    assert main(["oracle", "--count", "3", "--down", "0,1,2"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == [
        "n0: system-empty", "n1: system-empty", "n2: system-empty",
    ]


def test_oracle_rejects_bad_down_lists(capsys):
    assert main(["oracle", "--count", "3", "--down", "7"]) == EXIT_USAGE
    capsys.readouterr()
    assert main(["oracle", "--count", "3", "--down", "x"]) == EXIT_USAGE
    capsys.readouterr()


# -- sweep ----------------------------------------------------------------------------


def test_sweep_reports_each_seed_in_order(tmp_path, capsys):
    config = write_config(tmp_path, workload={"lambda": 2.0, "threshold": 2, "intervals": 6})
    assert main(["sweep", "--config", config, "--seeds", "3:7", "--jobs", "2"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert [line.split()[0] for line in lines[:-1]] == [
        "seed=3", "seed=4", "seed=5", "seed=6",
    ]
    assert all("verification=PASSED" in line for line in lines[:-1])
    assert lines[-1] == "sweep: 4/4 passed"


def test_sweep_rejects_bad_ranges(tmp_path, capsys):
    config = write_config(tmp_path)
    assert main(["sweep", "--config", config, "--seeds", "5"]) == EXIT_USAGE
    capsys.readouterr()
    assert main(["sweep", "--config", config, "--seeds", "7:7"]) == EXIT_USAGE
    capsys.readouterr()


# -- pmf ---------------------------------------------------------------------------------


def test_pmf_prints_the_distribution(capsys):
    assert main(["pmf", "--rate", "1.0", "--max-k", "3"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "k=0 p=0.367879441171"
    assert lines[1] == "k=1 p=0.367879441171"
    assert len(lines) == 4


def test_pmf_rejects_bad_rates(capsys):
    assert main(["pmf", "--rate", "0"]) == EXIT_USAGE
    capsys.readouterr()
    assert main(["pmf", "--rate", "99"]) == EXIT_USAGE
    capsys.readouterr()
