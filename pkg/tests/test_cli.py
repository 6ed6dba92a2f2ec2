import io
import json
import os
import shutil
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from unittest.mock import patch

import pandas as pd

from app import main
from services.catalog_service import Catalog
from tests.test_file_parser import EXPORT

SMALL = ["--n-samples", "3", "--n-terms", "4", "--n-periods", "24", "--geos", "US", "--popularity", "1.0"]


class TestCommandLine(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def run_cli(self, *argv):
        out, err = io.StringIO(), io.StringIO()
        with redirect_stdout(out), redirect_stderr(err):
            code = main(list(argv))
        return code, err.getvalue()

    def out(self, name):
        return os.path.join(self.temp_dir, name)

    def read_bytes(self, *parts):
        with open(os.path.join(self.temp_dir, *parts), "rb") as f:
            return f.read()

    def synth(self, name, *extra):
        code, err = self.run_cli("synth", *SMALL, "--out-dir", self.out(name), *extra)
        self.assertEqual(code, 0, err)
        return self.out(name)

    def test_synth_builds_catalog(self):
        """Test synth writes the latent panel, a catalog and a manifest"""
        out_dir = self.synth("a", "--seed", "5")
        self.assertEqual(len(Catalog.open(os.path.join(out_dir, "catalog")).entries), 12)
        with open(os.path.join(out_dir, "manifest.json"), encoding="utf-8") as f:
            manifest = json.load(f)
        self.assertEqual(manifest["command"], "synth")
        self.assertEqual(manifest["master_seed"], 5)
        self.assertIn("latent_US.csv", manifest["outputs"])
        self.assertIn(os.path.join("catalog", "index.json"), manifest["outputs"])

    def test_same_seed_same_bytes(self):
        """Test two runs with one seed write identical files"""
        self.synth("a", "--seed", "5")
        self.synth("b", "--seed", "5")
        self.assertEqual(self.read_bytes("a", "latent_US.csv"), self.read_bytes("b", "latent_US.csv"))
        self.assertEqual(self.read_bytes("a", "catalog", "index.json"),
                         self.read_bytes("b", "catalog", "index.json"))

    def test_manifest_repeats_run(self):
        """Test passing a manifest back as config reproduces the outputs"""
        self.synth("a", "--seed", "11")
        code, err = self.run_cli("synth", "--config", self.out("a/manifest.json"), "--out-dir", self.out("b"))
        self.assertEqual(code, 0, err)
        self.assertEqual(self.read_bytes("a", "latent_US.csv"), self.read_bytes("b", "latent_US.csv"))

    def test_seed_from_environment(self):
        """Test the seed falls back to TRENDS_SEED"""
        with patch.dict(os.environ, {"TRENDS_SEED": "21"}):
            out_dir = self.synth("a")
        with open(os.path.join(out_dir, "manifest.json"), encoding="utf-8") as f:
            self.assertEqual(json.load(f)["master_seed"], 21)

    def test_usage_errors_exit_2(self):
        """Test bad usage exits with status 2"""
        code, err = self.run_cli("synth", "--n-samples", "0", "--out-dir", self.out("a"))
        self.assertEqual(code, 2)
        self.assertIn("error: UsageError:", err)
        code, _ = self.run_cli("simulate", *SMALL, "--setup", "3", "--out-dir", self.out("b"))
        self.assertEqual(code, 2)
        code, _ = self.run_cli("ingest", "x.csv", "--out-dir", self.out("c"))
        self.assertEqual(code, 2)

    def test_domain_errors_exit_1(self):
        """Test domain errors exit with status 1 and name the error"""
        code, err = self.run_cli("corr", "--catalog", self.out("nowhere"), "--out-dir", self.out("a"))
        self.assertEqual(code, 1)
        self.assertIn("error: CatalogError:", err)
        config = self.out("bad.json")
        with open(config, "w", encoding="utf-8") as f:
            json.dump({"replications": 3}, f)
        code, err = self.run_cli("synth", "--config", config, "--out-dir", self.out("b"))
        self.assertEqual(code, 1)
        self.assertIn("ConfigError", err)

    def test_corr(self):
        """Test correlation matrices per term and for group averages"""
        catalog = os.path.join(self.synth("a"), "catalog")
        code, err = self.run_cli("corr", "--catalog", catalog, "--out-dir", self.out("corr"))
        self.assertEqual(code, 0, err)
        matrix = pd.read_csv(self.out("corr/corr_US_gdp-growth.csv"), index_col=0)
        self.assertEqual(matrix.shape, (3, 3))
        summary = pd.read_csv(self.out("corr/corr_summary_US.csv"))
        self.assertEqual(len(summary), 4)
        self.assertTrue(os.path.exists(self.out("corr/averages_US.csv")))

        code, err = self.run_cli("corr", "--catalog", catalog, "--terms", "inflation,nope",
                                 "--out-dir", self.out("corr2"))
        self.assertEqual(code, 1)
        self.assertIn("nope", err)

    def test_corr_group_averages(self):
        """Test grouped correlation over disjoint sample averages"""
        code, err = self.run_cli("synth", "--n-samples", "4", "--n-terms", "2", "--n-periods", "24",
                                 "--geos", "US", "--popularity", "1.0", "--out-dir", self.out("a"))
        self.assertEqual(code, 0, err)
        code, err = self.run_cli("corr", "--catalog", self.out("a/catalog"), "--group-size", "2",
                                 "--out-dir", self.out("corr"))
        self.assertEqual(code, 0, err)
        matrix = pd.read_csv(self.out("corr/corr_US_gdp-growth.csv"), index_col=0)
        self.assertEqual(list(matrix.columns), ["g1", "g2"])

    def test_simulate(self):
        """Test a one-replication simulation and its tables"""
        args = ["simulate", "--n-samples", "3", "--n-terms", "6", "--n-periods", "36", "--geos", "US",
                "--popularity", "1.0", "--setup", "both", "--reps", "1"]
        code, err = self.run_cli(*args, "--out-dir", self.out("a"))
        self.assertEqual(code, 0, err)
        table = pd.read_csv(self.out("a/selection_accuracy.csv"), index_col=0)
        self.assertEqual(list(table.index), ["setup1", "setup2"])
        self.assertEqual(list(table.columns), ["US1", "US2", "US3"])
        self.assertEqual(len(pd.read_csv(self.out("a/replications_setup1.csv"))), 1)

        code, err = self.run_cli(*args, "--jobs", "2", "--out-dir", self.out("b"))
        self.assertEqual(code, 0, err)
        for name in ("selection_accuracy.csv", "replications_setup1.csv", "replications_setup2.csv"):
            self.assertEqual(self.read_bytes("a", name), self.read_bytes("b", name))

    def manifest_outputs(self, name):
        with open(self.out(f"{name}/manifest.json"), encoding="utf-8") as f:
            return json.load(f)["outputs"]

    def test_worker_count_does_not_change_outputs(self):
        """Test every command writes the same bytes with 1 and 8 workers"""
        catalog = os.path.join(self.synth("base"), "catalog")
        commands = {
            "synth": ["synth", *SMALL],
            "corr": ["corr", "--catalog", catalog, "--group-size", "1"],
            "nowcast": ["nowcast", "--n-samples", "3", "--n-terms", "6", "--n-periods", "48"],
            "vintages": ["vintages", "--n-periods", "40", "--window-length", "30", "--n-terms", "3",
                         "--n-sets", "2"],
            "simulate": ["simulate", "--n-samples", "3", "--n-terms", "6", "--n-periods", "36", "--geos", "US",
                         "--popularity", "1.0", "--setup", "both", "--reps", "2"],
        }
        for name, args in commands.items():
            for jobs in ("1", "8"):
                code, err = self.run_cli(*args, "--seed", "3", "--jobs", jobs, "--out-dir", self.out(f"{name}{jobs}"))
                self.assertEqual(code, 0, err)
            single, parallel = self.manifest_outputs(f"{name}1"), self.manifest_outputs(f"{name}8")
            self.assertTrue(single, name)
            self.assertEqual(single, parallel, name)

    def test_simulate_from_catalog(self):
        """Test the simulation can read its pool from a catalog"""
        code, err = self.run_cli("synth", "--n-samples", "3", "--n-terms", "5", "--n-periods", "36",
                                 "--geos", "US", "--popularity", "1.0", "--out-dir", self.out("a"))
        self.assertEqual(code, 0, err)
        code, err = self.run_cli("simulate", "--catalog", self.out("a/catalog"), "--setup", "1", "--reps", "1",
                                 "--out-dir", self.out("sim"))
        self.assertEqual(code, 0, err)
        self.assertTrue(os.path.exists(self.out("sim/replications_setup1.csv")))

    def test_nowcast_synthetic(self):
        """Test the nowcast summary on a synthetic target"""
        args = ["nowcast", "--n-samples", "3", "--n-terms", "6", "--n-periods", "48"]
        code, err = self.run_cli(*args, "--out-dir", self.out("a"))
        self.assertEqual(code, 0, err)
        table = pd.read_csv(self.out("a/nowcast_rmse.csv"), index_col=0)
        self.assertEqual(list(table.columns), ["Proposed", "Worst", "Best", "Average"])
        row = table.iloc[0]
        self.assertGreaterEqual(row["Worst"], row["Average"])
        self.assertGreaterEqual(row["Average"], row["Best"])
        self.assertEqual(len(pd.read_csv(self.out("a/predictions.csv"))), 4 * 12)

        code, err = self.run_cli(*args, "--train-start", "2009-01", "--train-end", "2010-06",
                                 "--eval-start", "2010-06", "--eval-end", "2012-12", "--out-dir", self.out("b"))
        self.assertEqual(code, 1)
        self.assertIn("NowcastError", err)

    def test_nowcast_target_file(self):
        """Test nowcasting a target file from catalog samples"""
        catalog = os.path.join(self.synth("a"), "catalog")
        target = self.out("target.csv")
        months = pd.date_range("2009-01-01", periods=24, freq="MS").strftime("%Y-%m")
        pd.DataFrame({"period": months, "value": [float(i % 7) + i for i in range(24)]}).to_csv(target, index=False)
        code, err = self.run_cli("nowcast", "--catalog", catalog, "--target", target, "--rule", "bic",
                                 "--out-dir", self.out("now"))
        self.assertEqual(code, 0, err)
        table = pd.read_csv(self.out("now/nowcast_rmse.csv"), index_col=0)
        self.assertEqual(list(table.index), ["target"])

        code, _ = self.run_cli("nowcast", "--catalog", catalog, "--out-dir", self.out("now2"))
        self.assertEqual(code, 2)

    def test_nowcast_several_targets(self):
        """Test one summary row per target file"""
        catalog = os.path.join(self.synth("a"), "catalog")
        months = pd.date_range("2009-01-01", periods=24, freq="MS").strftime("%Y-%m")
        args = ["nowcast", "--catalog", catalog, "--rule", "bic"]
        for name, offset in (("cases", 0.0), ("deaths", 3.0)):
            path = self.out(f"{name}.csv")
            values = [float(i % 5) * 2 + offset + i for i in range(24)]
            pd.DataFrame({"period": months, "value": values}).to_csv(path, index=False)
            args += ["--target", path]
        code, err = self.run_cli(*args, "--out-dir", self.out("now"))
        self.assertEqual(code, 0, err)
        table = pd.read_csv(self.out("now/nowcast_rmse.csv"), index_col=0)
        self.assertEqual(list(table.index), ["cases", "deaths"])
        self.assertTrue((table["Worst"] >= table["Best"]).all())
        models = pd.read_csv(self.out("now/nowcast_models.csv"))
        self.assertEqual(sorted(models["target"].unique()), ["cases", "deaths"])
        predictions = pd.read_csv(self.out("now/predictions.csv"))
        self.assertEqual(len(predictions[predictions["target"] == "cases"]),
                         len(predictions[predictions["target"] == "deaths"]))

        code, err = self.run_cli("nowcast", "--config", self.out("now/manifest.json"), "--out-dir", self.out("again"))
        self.assertEqual(code, 0, err)
        self.assertEqual(self.read_bytes("now", "nowcast_rmse.csv"), self.read_bytes("again", "nowcast_rmse.csv"))

    def assert_one_line_error(self, code, err, error_type):
        self.assertEqual(code, 1)
        self.assertNotIn("Traceback", err)
        self.assertTrue(err.strip().splitlines()[-1].startswith(f"error: {error_type}:"), err)

    def test_unreadable_inputs(self):
        """Test missing and undecodable input files end in a one-line error"""
        code, err = self.run_cli("ingest", self.out("missing.csv"), "--download-date", "2021-02-01",
                                 "--out-dir", self.out("a"))
        self.assert_one_line_error(code, err, "TrendsCSVParseError")

        latin = self.out("latin.csv")
        with open(latin, "wb") as f:
            f.write(EXPORT.replace("gdp growth", "café").encode("latin-1"))
        code, err = self.run_cli("ingest", latin, "--download-date", "2021-02-01", "--out-dir", self.out("b"))
        self.assert_one_line_error(code, err, "TrendsCSVParseError")
        self.assertIn("UTF-8", err)

        catalog = os.path.join(self.synth("c"), "catalog")
        code, err = self.run_cli("nowcast", "--catalog", catalog, "--target", self.out("missing_target.csv"),
                                 "--out-dir", self.out("d"))
        self.assert_one_line_error(code, err, "TrendsCSVParseError")

        empty = self.out("empty.csv")
        open(empty, "w").close()
        code, err = self.run_cli("nowcast", "--catalog", catalog, "--target", empty, "--out-dir", self.out("e"))
        self.assert_one_line_error(code, err, "TrendsCSVParseError")

    def test_vintages(self):
        """Test vintage outputs and their reproducibility"""
        args = ["vintages", "--n-periods", "40", "--window-length", "30", "--n-terms", "3", "--n-sets", "2"]
        code, err = self.run_cli(*args, "--out-dir", self.out("a"))
        self.assertEqual(code, 0, err)
        matrix = pd.read_csv(self.out("a/vintage_corr.csv"), index_col=0)
        self.assertEqual(matrix.shape, (3, 3))
        self.assertTrue(os.path.exists(self.out("a/vintages_avg.csv")))
        code, _ = self.run_cli(*args, "--out-dir", self.out("b"))
        self.assertEqual(code, 0)
        self.assertEqual(self.read_bytes("a", "vintages.csv"), self.read_bytes("b", "vintages.csv"))

        code, err = self.run_cli(*args, "--step", "0", "--out-dir", self.out("c"))
        self.assertEqual(code, 1)
        self.assertIn("VintageError", err)

    def test_ingest(self):
        """Test ingesting an export twice stores it once"""
        export = self.out("gdp.csv")
        with open(export, "w", encoding="utf-8") as f:
            f.write(EXPORT)
        for expected in ("added", "duplicate"):
            code, err = self.run_cli("ingest", export, "--download-date", "2021-02-01", "--out-dir", self.out("a"))
            self.assertEqual(code, 0, err)
            status = pd.read_csv(self.out("a/ingest.csv"))["status"].tolist()
            self.assertEqual(status, [expected])
        self.assertEqual(len(Catalog.open(self.out("a/catalog")).entries), 1)

    def test_ingest_rejects_other_formats(self):
        """Test ingesting a non-CSV file is a domain error"""
        export = self.out("gdp.txt")
        with open(export, "w", encoding="utf-8") as f:
            f.write(EXPORT)
        code, err = self.run_cli("ingest", export, "--download-date", "2021-02-01", "--out-dir", self.out("a"))
        self.assertEqual(code, 1)
        self.assertIn("TrendsCSVParseError", err)


if __name__ == '__main__':
    unittest.main()
