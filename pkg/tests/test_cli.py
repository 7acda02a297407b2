import csv
import json

import pytest

from qmoney.cli import EXIT_INSECURE, EXIT_IO, EXIT_OK, main, parse_list


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ")
    meta = json.loads(lines[0][2:])
    rows = list(csv.DictReader(lines[1:]))
    return meta, rows


class TestParsing:
    def test_ranges_are_inclusive(self):
        assert parse_list("0.1:0.5:0.1") == [0.1, 0.2, 0.3, 0.4, 0.5]
        assert parse_list("0.025,1") == [0.025, 1.0]

    def test_unknown_mode_is_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["amplify", "--c", "0.9", "--mode", "quantum"])
        assert exc.value.code == 2


class TestSweep:
    def test_columns_and_metadata(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main(["sweep-mu", "--mu", "0.1,1", "--purity", "0.93", "--pairs", "20000", "--out", str(out)])
        assert code == EXIT_OK
        meta, rows = read_csv(out)
        assert meta["command"] == "sweep-mu" and meta["seed"] == 0
        assert list(rows[0])[:9] == [
            "mu", "purity", "c_zz", "c_xx", "c", "sigma_c", "n_postselected", "n_pulses", "c_analytic",
        ]
        assert "thr_usd_eta0.02" in rows[0] and "thr_pr_eta0.402" in rows[0]
        assert [float(r["mu"]) for r in rows] == [0.1, 1.0]
        assert all(r["status"] == "ok" for r in rows)
        assert float(rows[0]["thr_single"]) == 0.875

    def test_starved_point_is_flagged_not_dropped(self, tmp_path):
        out = tmp_path / "sweep.csv"
        main(["sweep-mu", "--mu", "1e-6", "--dark", "0", "--pairs", "8", "--out", str(out)])
        _, rows = read_csv(out)
        assert len(rows) == 1
        assert rows[0]["status"] == "insufficient-statistics"
        assert rows[0]["c"] == ""


class TestAmplify:
    def test_secure_rows(self, tmp_path):
        out = tmp_path / "amp.csv"
        assert main(["amplify", "--c", "0.953", "--n", "1000,100000", "--out", str(out)]) == EXIT_OK
        _, rows = read_csv(out)
        assert float(rows[1]["log10_epsilon_prime"]) == pytest.approx(-29.358, abs=1e-3)

    def test_insecure_exit_code(self, tmp_path):
        out = tmp_path / "amp.csv"
        code = main(["amplify", "--c", "0.8", "--mode", "wcs-usd", "--mu", "1", "--eta", "0.02", "--out", str(out)])
        assert code == EXIT_INSECURE
        _, rows = read_csv(out)
        assert all(r["status"] == "insecure" for r in rows)

    def test_optimized_eta_reported(self, tmp_path):
        out = tmp_path / "amp.csv"
        main(["amplify", "--c", "0.942", "--mode", "wcs-usd", "--mu", "1", "--n", "1000000", "--out", str(out)])
        _, rows = read_csv(out)
        assert float(rows[0]["eta"]) == pytest.approx(0.1014, abs=5e-4)


class TestOtherCommands:
    def test_security_region(self, tmp_path):
        out = tmp_path / "region.csv"
        main(["security-region", "--mu", "2", "--eta-total", "0.14,0.25", "--out", str(out)])
        _, rows = read_csv(out)
        assert [r["secure"] for r in rows] == ["0", "1"]

    def test_optimal_cheat(self, tmp_path):
        out = tmp_path / "cheat.txt"
        main(["optimal-cheat", "--restarts", "3", "--out", str(out)])
        values = dict(line.split(" ", 1) for line in out.read_text().splitlines()[1:])
        assert float(values["naive_bases"]) == pytest.approx(0.625)
        assert float(values["collective_povm"]) == pytest.approx(0.75, abs=1e-6)

    def test_transact_and_dump(self, tmp_path):
        store = tmp_path / "bank.qms"
        out = tmp_path / "t.txt"
        assert main(["transact", "--pairs", "100000", "--store", str(store), "--out", str(out)]) == EXIT_OK
        fields = dict(line.split(" ", 1) for line in out.read_text().splitlines())
        assert fields["accept"] == "True"
        dump = tmp_path / "dump.txt"
        assert main(["store-dump", "--store", str(store), "--out", str(dump)]) == EXIT_OK
        assert fields["serial"] in dump.read_text()

    def test_usd_adversary_rejected(self, tmp_path):
        out = tmp_path / "t.txt"
        main(["transact", "--pairs", "100000", "--mu", "0.4", "--adversary", "usd", "--out", str(out)])
        assert "reason ClickRateAnomaly" in out.read_text()

    def test_missing_store_is_io_error(self, tmp_path):
        assert main(["store-dump", "--store", str(tmp_path / "none.qms")]) == EXIT_IO

    def test_unreachable_bank_is_io_error(self):
        assert main(["transact", "--pairs", "10", "--bank", "127.0.0.1:1"]) == EXIT_IO


class TestDeterminism:
    @pytest.mark.parametrize(
        "argv",
        [
            ["sweep-mu", "--mu", "0.1,0.4", "--pairs", "300000"],
            ["optimal-cheat", "--restarts", "4"],
        ],
    )
    def test_worker_count_invariance(self, tmp_path, argv):
        a, b = tmp_path / "a", tmp_path / "b"
        main(argv + ["--workers", "1", "--out", str(a)])
        main(argv + ["--workers", "4", "--out", str(b)])
        assert a.read_bytes() == b.read_bytes()
