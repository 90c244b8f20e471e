"""Receiver pipeline and command line checks on small scenes."""

import json

import numpy as np
import pytest

import gpsentry.cli as cli
from gpsentry.apt import SpoofingAlert
from gpsentry.forge import (AttackScenario, SatelliteSpec, SceneConfig,
                            forge_scene)
from gpsentry.receiver import (ChannelSummary, PvtRecord, ReceiverConfig,
                               RunReport, run_trace)

TWO_SATS = [SatelliteSpec(5, 40.0, 55.0), SatelliteSpec(17, 210.0, 35.0)]


def test_config_file_parsing(tmp_path):
    path = tmp_path / "rx.conf"
    path.write_text(
        "# comment line\n"
        "sample_rate_hz = 4.092e6\n"
        "prns = 1,7,13   # trailing comment\n"
        "max_channels=6\n"
        "snap_to_sample = false\n"
        "\n")
    cfg = ReceiverConfig.from_file(str(path))
    assert cfg.sample_rate_hz == 4.092e6
    assert cfg.prns == (1, 7, 13)
    assert cfg.max_channels == 6
    assert cfg.snap_to_sample is False
    # untouched keys keep defaults
    assert cfg.tau_max_ns == 500.0


def test_config_override_errors(tmp_path):
    cfg = ReceiverConfig()
    with pytest.raises(ValueError):
        cfg.with_override("no_such_key", "1")
    with pytest.raises(ValueError):
        cfg.with_override("snap_to_sample", "maybe")
    bad = tmp_path / "bad.conf"
    bad.write_text("just a line without equals\n")
    with pytest.raises(ValueError):
        ReceiverConfig.from_file(str(bad))


def test_report_text_and_output_files(tmp_path):
    rep = RunReport(input_path="trace.cf32", sample_rate_hz=2.046e6,
                    processed_s=4.0)
    rep.channels.append(ChannelSummary(0, 5, "primary", True, 44.9,
                                       4000, 0))
    rep.alerts.append(SpoofingAlert("apt", "apt_separation", 5, 2.0,
                                    {"separation_ns": 977.5}))
    rep.pvt.append(PvtRecord(3.0, 5, (1.0, 2.0, 3.0), 100.0, 2.5, 1.2))
    text = rep.text()
    assert "verdict: spoofed" in text
    assert "apt_separation: 1" in text
    assert "ch00 prn= 5" in text
    assert rep.spoofing_detected

    rp, ap_, pv = (tmp_path / n for n in ("r.txt", "a.jsonl", "p.csv"))
    rep.write_outputs(str(rp), str(ap_), str(pv))
    assert rp.read_text() == text
    alert = json.loads(ap_.read_text().splitlines()[0])
    assert alert["kind"] == "apt_separation"
    assert alert["prn"] == 5
    lines = pv.read_text().splitlines()
    assert lines[0].startswith("time_s,n_sats")
    assert lines[1].startswith("3.000,5,")


def test_clean_scene_locks_and_stays_clean():
    cfg = SceneConfig(duration_s=2.5, seed=5, satellites=TWO_SATS)
    samples, side = forge_scene(cfg, out_path=None)
    rcfg = ReceiverConfig(sample_rate_hz=side["sample_rate_hz"],
                          prns=(5, 17))
    rep = run_trace(rcfg, samples=samples)
    assert rep.alerts == []
    assert rep.verdict == "clean"
    locked = {c.prn: c for c in rep.channels if c.locked}
    assert set(locked) == {5, 17}
    for summary in locked.values():
        assert summary.role == "primary"
        assert summary.cn0_dbhz == pytest.approx(45.0, abs=4.0)
    assert rep.processed_s == pytest.approx(2.48, abs=0.05)


def test_separated_copy_raises_arrival_alert():
    sc = AttackScenario(kind="noncoherent_unmodified", start_s=0.05,
                        delay_ns=1200.0, power_db=3.0,
                        carrier_offset_hz=90.0)
    cfg = SceneConfig(duration_s=3.2, seed=6, satellites=TWO_SATS,
                      scenario=sc)
    samples, side = forge_scene(cfg, out_path=None)
    rcfg = ReceiverConfig(sample_rate_hz=side["sample_rate_hz"],
                          prns=(5, 17))
    rep = run_trace(rcfg, samples=samples)
    assert rep.spoofing_detected
    kinds = {a.kind for a in rep.alerts}
    assert kinds == {"apt_separation"}
    prns_flagged = {a.prn for a in rep.alerts}
    assert prns_flagged <= {5, 17} and prns_flagged
    # evidence lands within one sample (488.76 ns) of the forged offset;
    # the 2.046 MHz grid rounds 2.455 samples to 2 or 3 depending on
    # where the code phase falls
    one_sample_ns = 1e9 / side["sample_rate_hz"]
    for a in rep.alerts:
        assert abs(a.detail["separation_ns"] - 1200.0) <= one_sample_ns
    roles = {c.role for c in rep.channels}
    assert "auxiliary" in roles


def test_cli_forge_run_and_errors(tmp_path, capsys):
    trace = tmp_path / "attack.cf32"
    rc = cli.main([
        "forge", str(trace), "--kind", "noncoherent_unmodified",
        "--duration", "2.6", "--seed", "3",
        "--sat", "5:40:55", "--sat", "17:210:35",
        "--start-s", "0.05", "--delay-ns", "1200",
        "--carrier-offset-hz", "90"])
    assert rc == 0
    assert trace.exists() and (tmp_path / "attack.cf32.json").exists()

    report = tmp_path / "report.txt"
    alerts = tmp_path / "alerts.jsonl"
    fixes = tmp_path / "fixes.csv"
    rc = cli.main(["run", str(trace), "--set", "prns=5,17",
                   "--report", str(report), "--alerts", str(alerts),
                   "--pvt", str(fixes), "--quiet"])
    assert rc == 2
    assert "verdict: spoofed" in report.read_text()
    assert alerts.read_text().strip()
    assert fixes.read_text().startswith("time_s,")
    capsys.readouterr()

    rc = cli.main(["run", str(tmp_path / "missing.cf32"), "--quiet"])
    assert rc == 1
    err = capsys.readouterr().err
    assert "error:" in err


def test_cli_geometry(capsys):
    rc = cli.main(["geometry", "--trials", "20", "--sats", "6",
                   "--seed", "2"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "gdop: median=" in out
    assert "max displacement:" in out
