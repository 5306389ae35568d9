import json

from dstbc.cli import main
from dstbc.construct import build, code_to_dict
from dstbc.design import cod_trivial


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestInfo:
    def test_n8_lam1_n3_parameters(self, capsys):
        code, out, _ = run(
            capsys, "info", "--preset", "example1", "--N", "8", "--lambda", "1",
            "--n", "3",
        )
        assert code == 0
        assert "R   = 1/3" in out
        assert "T2  = 12" in out
        assert "T1  = 6" in out
        assert "K   = 12" in out

    def test_bpcu_with_modulation(self, capsys):
        code, out, _ = run(
            capsys, "info", "--preset", "example1", "--N", "8", "--lambda", "1",
            "--n", "3", "--modulation", "pam8",
        )
        assert code == 0 and "bpcu = 2" in out

    def test_needs_exactly_one_source(self, capsys):
        code, _, err = run(capsys, "info", "--N", "4")
        assert code == 2

    def test_unknown_preset(self, capsys):
        code, _, err = run(capsys, "info", "--preset", "bogus", "--N", "2")
        assert code == 2


class TestCheck:
    def test_certified_pass(self, capsys):
        code, out, _ = run(
            capsys, "check", "--preset", "example1", "--N", "4", "--lambda", "2",
            "--n", "2", "--trials", "50",
        )
        assert code == 0
        doc = json.loads(out)
        assert doc["passed"] is True
        assert doc["analytic_certificate"] is True

    def test_failing_code_exits_one(self, capsys, tmp_path):
        from dstbc.construct import from_design
        from dstbc.design import LinearDesign, cod_alamouti

        w = cod_alamouti().design.weights[:, :, [0, 0]]
        doc = code_to_dict(from_design(LinearDesign.from_weights(w)))
        path = tmp_path / "dup.json"
        path.write_text(json.dumps(doc))
        code, out, _ = run(
            capsys, "check", "--design-file", str(path), "--trials", "20",
        )
        assert code == 1
        doc = json.loads(out)
        assert doc["passed"] is False and doc["witness"] is not None

    def test_all_criteria(self, capsys):
        code, out, _ = run(
            capsys, "check", "--preset", "toeplitz", "--N", "2", "--n", "2",
            "--trials", "20", "--criterion", "all",
        )
        assert code == 0
        docs = json.loads(out)
        assert [d["criterion"] for d in docs] == ["PIC", "PIC-SIC", "ZF"]


class TestSimulate:
    def test_missing_grid_is_usage_error(self, capsys):
        code, _, err = run(
            capsys, "simulate", "--preset", "toeplitz", "--N", "2", "--n", "2",
        )
        assert code == 2

    def test_malformed_grid_is_usage_error(self, capsys):
        code, _, err = run(
            capsys, "simulate", "--preset", "toeplitz", "--N", "2", "--n", "2",
            "--snr-start", "20", "--snr-stop", "10",
        )
        assert code == 2

    def test_small_run_to_file(self, capsys, tmp_path):
        out_path = tmp_path / "curve.csv"
        code, _, _ = run(
            capsys, "simulate", "--preset", "toeplitz", "--N", "2", "--n", "2",
            "--nd", "2", "--decoder", "zf-sic", "--snr-start", "8",
            "--snr-stop", "12", "--snr-step", "4", "--trials", "200",
            "--seed", "3", "--out", str(out_path),
        )
        assert code == 0
        lines = out_path.read_text().strip().split("\n")
        assert lines[0] == "snr_db,trials,bit_errors,ber"
        assert len(lines) == 3

    def test_stdout_output(self, capsys):
        code, out, _ = run(
            capsys, "simulate", "--preset", "toeplitz", "--N", "2", "--n", "2",
            "--snr-start", "10", "--snr-stop", "10", "--trials", "50",
            "--seed", "1",
        )
        assert code == 0
        assert out.startswith("snr_db,trials,bit_errors,ber")

    def test_config_file_with_override(self, capsys, tmp_path):
        cfg = dict(
            decoder="pic-sic", preset="toeplitz", N=2, n=2, modulation="pam2",
            nd=1, snr_grid_db=[10.0], max_trials=50, max_bit_errors=1000,
            master_seed=1,
        )
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg))
        code, out, _ = run(
            capsys, "simulate", "--config", str(path), "--trials", "25",
        )
        assert code == 0
        assert ",25," in out.strip().split("\n")[1]

    def test_unknown_flag_is_usage_error(self, capsys):
        code, _, _ = run(capsys, "simulate", "--frobnicate")
        assert code == 2

    def test_unknown_config_key_is_usage_error(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"preset": "toeplitz", "N": 2, "bogus_key": 1}))
        code, _, err = run(capsys, "simulate", "--config", str(path))
        assert code == 2


def test_design_file_round_trip_via_cli(capsys, tmp_path):
    code_obj = build(2, cod_trivial(), 1, 2)
    path = tmp_path / "code.json"
    path.write_text(json.dumps(code_to_dict(code_obj)))
    code, out, _ = run(capsys, "info", "--design-file", str(path))
    assert code == 0
    assert "T1  = 2" in out


def test_selftest_passes(capsys):
    code, out, _ = run(capsys, "selftest")
    assert code == 0
    assert "[PASS] cod identities" in out
    assert "[FAIL]" not in out
