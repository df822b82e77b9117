import contextlib
import csv
import io
import json
import os
import tempfile
import unittest
from unittest import mock

import psmm_cli
from psmm.bilinear import dumps_scheme, shipped_scheme_path, strassen_scheme
from psmm.field import FieldSpec
from psmm.linalg import FieldMatrix


def _run(argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        rc = psmm_cli.main(argv)
    return rc, out.getvalue(), err.getvalue()


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


class ThresholdsCLITest(unittest.TestCase):
    def test_default_grid(self):
        rc, out, _ = _run(["thresholds"])
        self.assertEqual(rc, 0)
        rows = {(int(r["k"]), int(r["t"])): r for r in _rows(out)}
        self.assertEqual(len(rows), 20)
        self.assertEqual(rows[(8, 4)]["n_ours"], "98")
        self.assertEqual(rows[(8, 4)]["n_bgw"], "448")
        self.assertEqual(rows[(8, 8)]["n_ours"], "134")
        gap = {key: int(r["n_bgw"]) - int(r["n_ours"]) for key, r in rows.items()}
        self.assertTrue(all(g > 0 for g in gap.values()))
        ks, ts = [2, 4, 8, 16, 32], [2, 4, 8, 16]
        for t in ts:
            self.assertEqual([gap[(k, t)] for k in ks], sorted(gap[(k, t)] for k in ks))
        for k in ks:
            self.assertEqual([gap[(k, t)] for t in ts], sorted(gap[(k, t)] for t in ts))
        for r in rows.values():
            self.assertLessEqual(int(r["n_exact"]), int(r["n_ours"]))

    def test_regime_column_and_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "thresholds.csv")
            rc, out, _ = _run(["thresholds", "--k-list", "2", "--t-list", "3,8", "--regime", "--out", path])
            with open(path, encoding="utf-8") as fh:
                rows = _rows(fh.read())
        self.assertEqual(rc, 0)
        self.assertEqual(out, "")
        self.assertEqual([r["regime"] for r in rows], ["tie", "2k2+2t-3"])


class SimulateCLITest(unittest.TestCase):
    def test_dense_run(self):
        with tempfile.TemporaryDirectory() as tmp:
            report = os.path.join(tmp, "report.json")
            rc, out, _ = _run(["simulate", "--m", "4", "--k", "2", "--t", "2", "--report", report])
            with open(report, encoding="utf-8") as fh:
                data = json.load(fh)
        self.assertEqual(rc, 0)
        row = _rows(out)[0]
        self.assertEqual(row["correct"], "true")
        self.assertEqual(row["n"], "8")
        self.assertEqual(data["n_agents"], 8)
        self.assertTrue(data["decode"]["consistent"])

    def test_strassen_run(self):
        rc, out, _ = _run(["simulate", "--m", "16", "--operator", "strassen", "--depth", "2"])
        self.assertEqual(rc, 0)
        row = _rows(out)[0]
        self.assertEqual(row["operator"], "strassen-d2")
        self.assertEqual(row["correct"], "true")

    def test_scheme_file_run(self):
        rc, out, _ = _run(["simulate", "--m", "8", "--scheme", str(shipped_scheme_path())])
        self.assertEqual(rc, 0)
        self.assertEqual(_rows(out)[0]["operator"], "strassen-d1")

    def test_reduced_decoding(self):
        with self.assertLogs("psmm.cli", level="WARNING"):
            rc, out, _ = _run(["simulate", "--m", "8", "--dof-s", "1"])
        self.assertEqual(rc, 0)
        row = _rows(out)[0]
        self.assertEqual(row["n"], "5")
        self.assertEqual(row["correct"], "true")

    def test_invalid_parameters(self):
        rc, out, err = _run(["simulate", "--m", "4", "--k", "3"])
        self.assertEqual(rc, 2)
        self.assertEqual(out, "")
        self.assertIn("error[config]", err)

    def test_too_few_agents(self):
        rc, _, err = _run(["simulate", "--m", "4", "--n", "7"])
        self.assertEqual(rc, 2)
        self.assertIn("error[config]", err)

    def test_wrong_product_fails(self):
        F = FieldSpec(2147483647)
        wrong = FieldMatrix.zeros(4, 4, F)
        transcript = mock.Mock(upload_bytes_per_agent=1, download_bytes_per_agent=1, total_mults=1)
        with mock.patch.object(psmm_cli, "run_protocol", return_value=(wrong, transcript)):
            rc, out, _ = _run(["simulate", "--m", "4", "--prime", "2147483647"])
        self.assertEqual(rc, 2)
        self.assertEqual(_rows(out)[0]["correct"], "false")


class ComplexityCLITest(unittest.TestCase):
    def test_model_table(self):
        rc, out, _ = _run(["complexity", "--tl", "1,2"])
        self.assertEqual(rc, 0)
        rows = _rows(out)
        self.assertEqual(len(rows), 10)
        self.assertTrue(all(r["n"] == "98" for r in rows))
        gains = [float(r["gain"]) for r in rows if r["t_l"] == "1"]
        self.assertEqual(gains, [8.0, 16.0, 32.0, 64.0, 128.0])

    def test_crossing(self):
        rc, out, _ = _run(["complexity", "--m-list", "32,40,48", "--tl", "1"])
        self.assertEqual(rc, 0)
        pct = [r["reduction_pct"] for r in _rows(out)]
        self.assertEqual(pct[1], "80.000000")
        self.assertLess(float(pct[0]), 80)
        self.assertGreater(float(pct[2]), 80)

    def test_measure(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "complexity.csv")
            rc, out, _ = _run(["complexity", "--m-list", "16,32,64", "--tl", "1", "--measure", "--out", path])
        self.assertEqual(rc, 0)
        measured = _rows(out)
        self.assertEqual([(r["m"], r["depth"]) for r in measured],
                         [("16", "1"), ("32", "1"), ("32", "2"), ("64", "1"), ("64", "2"), ("64", "3")])
        self.assertTrue(all(r["agrees"] == "true" for r in measured))
        self.assertEqual([r["base_products"] for r in measured if r["m"] == "64"], ["7", "49", "343"])


class CommunicationCLITest(unittest.TestCase):
    def test_explicit_n(self):
        with self.assertLogs("psmm.cli", level="WARNING"):
            rc, out, _ = _run(["communication", "--n-list", "100,134,200"])
        self.assertEqual(rc, 0)
        rows = _rows(out)
        self.assertEqual([r["n"] for r in rows], ["134", "200"])
        self.assertEqual(rows[0]["per_agent_bytes"], "1079296")

    def test_default_range(self):
        rc, out, _ = _run(["communication", "--m", "16", "--k", "2", "--t", "2"])
        self.assertEqual(rc, 0)
        self.assertEqual([r["n"] for r in _rows(out)], [str(n) for n in range(8, 13)])


class PrivacyAuditCLITest(unittest.TestCase):
    def test_single_agent(self):
        rc, out, _ = _run(["privacy-audit"])
        self.assertEqual(rc, 0)
        self.assertIn("view distribution: UNIFORM (625 assignments, 625 distinct views)", out)
        self.assertIn("secret independence: INDEPENDENT", out)

    def test_tightness(self):
        rc, out, _ = _run(["privacy-audit", "--coalition-size", "2"])
        self.assertEqual(rc, 0)
        self.assertIn("secret independence: DEPENDENT", out)
        self.assertIn("tightness witness", out)

    def test_vacuous(self):
        rc, out, _ = _run(["privacy-audit", "--t", "1"])
        self.assertEqual(rc, 0)
        self.assertIn("VACUOUS", out)

    def test_budget_exit_code(self):
        rc, _, err = _run(["privacy-audit", "--budget", "10"])
        self.assertEqual(rc, 4)
        self.assertIn("error[budget]", err)

    def test_points_follow_coalition_size(self):
        rc, out, err = _run(
            ["privacy-audit", "--prime", "3", "--m", "2", "--k", "2", "--t", "3", "--coalition-size", "2"]
        )
        self.assertEqual(rc, 0, err)
        self.assertIn("view distribution: UNIFORM (6561 assignments, 6561 distinct views)", out)
        self.assertIn("secret independence: INDEPENDENT", out)

    def test_coalition_larger_than_field(self):
        rc, _, err = _run(["privacy-audit", "--prime", "3", "--coalition-size", "3"])
        self.assertEqual(rc, 2)
        self.assertIn("error[config]", err)
        self.assertIn("F_3 has 2", err)


class SchemeVerifyCLITest(unittest.TestCase):
    def _write(self, tmp, text):
        path = os.path.join(tmp, "s.scheme")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        return path

    def test_shipped_passes(self):
        for prime in ("101", "2147483647"):
            rc, out, _ = _run(["scheme-verify", str(shipped_scheme_path()), "--prime", prime])
            self.assertEqual(rc, 0)
            self.assertTrue(out.startswith("PASS rank=7 dims=2x2x2"))

    def test_mutation_fails(self):
        text = dumps_scheme(strassen_scheme()).replace("W\n1 0 0 1\n", "W\n1 0 0 0\n")
        with tempfile.TemporaryDirectory() as tmp:
            rc, out, _ = _run(["scheme-verify", self._write(tmp, text), "--prime", "101"])
        self.assertEqual(rc, 2)
        self.assertTrue(out.startswith("FAIL"))
        self.assertIn("counterexample", out)

    def test_characteristic_refused(self):
        text = dumps_scheme(strassen_scheme()).replace("char 0", "char 2")
        with tempfile.TemporaryDirectory() as tmp:
            rc, out, _ = _run(["scheme-verify", self._write(tmp, text), "--prime", "101"])
        self.assertEqual(rc, 2)
        self.assertTrue(out.startswith("REFUSED"))

    def test_parse_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            rc, _, err = _run(["scheme-verify", self._write(tmp, "SCHEME v1\ndims 2 2\n")])
        self.assertEqual(rc, 2)
        self.assertIn("error[scheme-parse]", err)

    def test_missing_file(self):
        rc, _, err = _run(["scheme-verify", "/nonexistent/strassen.scheme"])
        self.assertEqual(rc, 3)
        self.assertIn("error[io]", err)


if __name__ == "__main__":
    unittest.main()
