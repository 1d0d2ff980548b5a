import csv
import math

import numpy as np
import pytest

from rhevcal.cli import main

BASE_CONFIG = """\
[array]
elements = 8
amp_spread_db = 4.0
phase_spread_deg = 180.0

[modulation]
bits = 6

[sampling]
samples_per_period = 64
periods = 2

[noise]
snr_db = inf

[run]
seed = 1
trials = 3
"""


def write_config(tmp_path, text=BASE_CONFIG, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


class TestConfigErrors:
    def test_unknown_key_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE_CONFIG + "\n[noise2]\nsnrdb = -20\n")
        code = main(["calibrate", "--config", cfg, "--out", str(tmp_path)])
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert "noise2" in err

    def test_typo_key_named_in_diagnostic(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE_CONFIG.replace("snr_db = inf", "snrdb = -20"))
        code = main(["calibrate", "--config", cfg, "--out", str(tmp_path)])
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert "snrdb" in err

    def test_missing_config(self, tmp_path, capsys):
        code = main(["calibrate", "--config", str(tmp_path / "nope.ini")])
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_bad_value(self, tmp_path, capsys):
        cfg = write_config(tmp_path, BASE_CONFIG.replace("elements = 8", "elements = two"))
        assert main(["calibrate", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_invalid_range(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG.replace("elements = 8", "elements = 1"))
        assert main(["calibrate", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_unknown_format(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["calibrate", "--config", cfg, "--out", str(tmp_path),
                     "--format", "csv,png"]) == 2


class TestCalibrateCommand:
    def test_noiseless_error_bound(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["calibrate", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        header, rows = read_csv(out / "calibrate.csv")
        assert header == ["channel", "preset_gamma_db", "est_gamma_db", "gamma_err_db",
                          "preset_dphi_deg", "est_dphi_deg", "dphi_err_deg", "branch"]
        assert [r[0] for r in rows] == [str(c) for c in range(2, 9)]
        for row in rows:
            assert abs(float(row[6])) <= 180.0 / 64 + 1e-9
            assert abs(float(row[3])) <= 1e-6
            assert row[7] in ("low", "high")

    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG.replace("snr_db = inf", "snr_db = 20"))
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert main(["calibrate", "--config", cfg, "--out", str(out_a), "--quiet"]) == 0
        assert main(["calibrate", "--config", cfg, "--out", str(out_b), "--quiet"]) == 0
        assert (out_a / "calibrate.csv").read_bytes() == (out_b / "calibrate.csv").read_bytes()

    def test_seed_flag_overrides(self, tmp_path):
        cfg = write_config(tmp_path, BASE_CONFIG.replace("snr_db = inf", "snr_db = 20"))
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        main(["calibrate", "--config", cfg, "--out", str(out_a), "--quiet"])
        main(["calibrate", "--config", cfg, "--out", str(out_b), "--seed", "99", "--quiet"])
        assert (out_a / "calibrate.csv").read_bytes() != (out_b / "calibrate.csv").read_bytes()


class TestSweepDelayCommand:
    def test_cancellation_contrast(self, tmp_path):
        text = BASE_CONFIG.replace("amp_spread_db = 4.0", "amp_spread_db = 0.0")
        text = text.replace("phase_spread_deg = 180.0", "phase_spread_deg = 0.0")
        cfg = write_config(tmp_path, text)
        out = tmp_path / "out"
        assert main(["sweep-delay", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        header, rows = read_csv(out / "sweep_delay.csv")
        assert header == ["k", "eta", "phase_deg", "power_linear", "power_db"]
        assert len(rows) == 64
        powers = np.array([float(r[3]) for r in rows])
        assert powers.max() / max(powers.min(), 1e-300) > 1e6

    def test_delay_columns_consistent(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        main(["sweep-delay", "--config", cfg, "--out", str(out), "--quiet"])
        _, rows = read_csv(out / "sweep_delay.csv")
        for row in rows:
            assert float(row[2]) == pytest.approx(360.0 * float(row[1]))
            assert int(row[0]) == round(float(row[1]) * 64)


class TestMonteCarloCommand:
    def test_single_point_report(self, tmp_path):
        text = BASE_CONFIG + "\n[sweep]\naxis = snr\nvalues = 15\n"
        cfg = write_config(tmp_path, text)
        out = tmp_path / "out"
        assert main(["monte-carlo", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        header, rows = read_csv(out / "monte_carlo.csv")
        assert header == ["axis", "value", "rmse_ar", "rmse_pd_deg", "trials", "excluded"]
        assert len(rows) == 1
        assert rows[0][0] == "snr"
        assert rows[0][4] == "3"
        assert rows[0][5] == "0"


class TestCompareRevCommand:
    def test_columns(self, tmp_path):
        text = BASE_CONFIG + "\n[sweep]\nvalues = 20\n"
        text = text.replace("snr_db = inf", "snr_db = 20")
        cfg = write_config(tmp_path, text)
        out = tmp_path / "out"
        assert main(["compare-rev", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        header, rows = read_csv(out / "compare_rev.csv")
        assert header == ["snr_db", "rhev_rmse_ar", "rhev_rmse_pd_deg",
                          "rev_rmse_ar", "rev_rmse_pd_deg", "trials"]
        assert len(rows) == 1


class TestPatternCommand:
    def test_pattern_csv_and_metrics(self, tmp_path, capsys):
        text = BASE_CONFIG + "\n[pattern]\nangle_points = 181\n"
        cfg = write_config(tmp_path, text)
        out = tmp_path / "out"
        assert main(["pattern", "--config", cfg, "--out", str(out)]) == 0
        header, rows = read_csv(out / "pattern.csv")
        assert header == ["theta_deg", "before_db", "after_db", "ideal_db"]
        assert len(rows) == 181
        after = np.array([float(r[2]) for r in rows])
        assert after.max() == 0.0
        assert "gain delta" in capsys.readouterr().out

    def test_steered_pattern(self, tmp_path):
        text = BASE_CONFIG + "\n[pattern]\nangle_points = 721\nsteer_deg = 30\n"
        cfg = write_config(tmp_path, text)
        out = tmp_path / "out"
        assert main(["pattern", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        _, rows = read_csv(out / "pattern.csv")
        after = np.array([float(r[2]) for r in rows])
        thetas = np.array([float(r[0]) for r in rows])
        assert abs(thetas[after.argmax()] - 30.0) <= 0.25 + 1e-9


class TestSpectrumCommand:
    def test_spectrum_dump(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        assert main(["spectrum", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        header, rows = read_csv(out / "spectrum.csv")
        assert header == ["bin", "freq_offset_hz", "power_linear", "power_db"]
        assert len(rows) == 64 * 2
        # modulated pair: +1st harmonic bin should clearly beat its even neighbours
        freqs = np.array([float(r[1]) for r in rows])
        powers = np.array([float(r[2]) for r in rows])
        f_p = 10e6
        plus_one = powers[np.argmin(np.abs(freqs - f_p))]
        plus_two = powers[np.argmin(np.abs(freqs - 2 * f_p))]
        assert plus_one > 1e6 * max(plus_two, 1e-300)


class TestSvgOutput:
    def test_svg_written(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "out"
        code = main(["sweep-delay", "--config", cfg, "--out", str(out),
                     "--format", "csv,svg", "--quiet"])
        assert code == 0
        svg = (out / "sweep_delay.svg").read_text()
        assert svg.lstrip().startswith("<?xml")


class TestCrossFieldValidation:
    def test_sweep_channel_out_of_range(self, tmp_path):
        text = BASE_CONFIG + "\n[sweep_delay]\nchannel = 9\n"
        cfg = write_config(tmp_path, text)
        assert main(["sweep-delay", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_sweep_channel_cannot_be_reference(self, tmp_path):
        text = BASE_CONFIG + "\n[sweep_delay]\nchannel = 1\n"
        cfg = write_config(tmp_path, text)
        assert main(["sweep-delay", "--config", cfg, "--out", str(tmp_path)]) == 2

    def test_spectrum_eta_range(self, tmp_path):
        text = BASE_CONFIG + "\n[spectrum]\neta = 1.5\n"
        cfg = write_config(tmp_path, text)
        assert main(["spectrum", "--config", cfg, "--out", str(tmp_path)]) == 2
