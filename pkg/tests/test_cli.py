from __future__ import annotations

from liqexhaust.cli import build_parser, main


def test_synth_then_simulate_from_files(tmp_path, capsys):
    assert main(["synth", "--profile", "debridge", "--duration", "43200", "--seed", "3", "--out", str(tmp_path)]) == 0
    out = tmp_path / "report.csv"
    inst = tmp_path / "inst.csv"
    args = [
        "simulate",
        "--traces", str(tmp_path / "traces.csv"),
        "--liquidity-events", str(tmp_path / "liquidity_events.csv"),
        "--src-blockchain", "solana", "--dst-blockchain", "ethereum", "--bridge", "debridge",
        "--k", "1", "--warmup", "7200", "--format", "csv", "--out", str(out), "--instances", str(inst),
    ]
    assert main(args) == 0
    text = out.read_text()
    assert "# source=traces:traces.csv" in text and "# window_mode=causal-expanding" in text
    assert inst.read_text().startswith("t_s,induction_cost")
    assert main(args) == 0
    assert out.read_text() == text


def test_environment_defaults(monkeypatch):
    monkeypatch.setenv("ATTACK_WINDOW", "600")
    monkeypatch.setenv("VOLUME_MULTIPLIER", "2")
    args = build_parser().parse_args(["simulate", "--profile", "mayan"])
    assert args.attack_window == "600" and args.volume_multiplier == "2"
    args = build_parser().parse_args(["simulate", "--profile", "mayan", "--attack-window", "300"])
    assert args.attack_window == "300"


def test_sweep_and_byzantine(capsys):
    rc = main(["sweep", "--profile", "mayan", "--duration", "28800", "--warmup", "3600", "--k", "0,1", "--attack-windows", "300,1000", "--format", "jsonl"])
    assert rc == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith('{"meta"') and len(lines) == 5
    rc = main(["byzantine", "--profile", "across", "--duration", "28800", "--placement", "uniform", "--count", "5", "--format", "table"])
    assert rc == 0
    assert "median_failed_intents" in capsys.readouterr().out


def test_triggers_plot_and_errors(tmp_path, capsys):
    assert main(["triggers", "--profile", "mayan", "--duration", "7200", "--k", "0", "--plot", "--resolution", "600"]) == 0
    assert capsys.readouterr().out.startswith("t_s,liquidity,trigger\n")
    assert main(["simulate", "--traces", str(tmp_path / "missing.csv"), "--liquidity-events", "x", "--bridge", "b",
                 "--src-blockchain", "solana", "--dst-blockchain", "base"]) == 2
