import json
import os
import shutil
import tempfile
import unittest
from unittest.mock import patch

import pandas as pd

from models.errors import ConfigError
from services.config_service import ConfigService
from services.report_export_service import ReportExportService
from services.report_service import MANIFEST_FILE, ReportService

DEFAULTS = {"seed": 0, "jobs": 1, "out_dir": "out", "reps": 1000, "geos": ["US", "BR"], "raw": False}


class TestConfigService(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.service = ConfigService(os.path.join(self.temp_dir, "missing.env"))

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def _write(self, payload):
        path = os.path.join(self.temp_dir, "config.json")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f)
        return path

    def test_precedence(self):
        """Test flag beats file beats environment beats default"""
        flags = {key: None for key in DEFAULTS}
        flags["seed"] = 7
        file_config = {"seed": 3, "jobs": 2}
        with patch.dict(os.environ, {"TRENDS_SEED": "9", "TRENDS_JOBS": "4", "TRENDS_OUT_DIR": "env_out"}):
            resolved = self.service.resolve(DEFAULTS, flags, file_config)
        self.assertEqual(resolved["seed"], 7)
        self.assertEqual(resolved["jobs"], 2)
        self.assertEqual(resolved["out_dir"], "env_out")
        self.assertEqual(resolved["reps"], 1000)

    def test_coercion(self):
        """Test file and environment values take the default's type"""
        flags = {key: None for key in DEFAULTS}
        with patch.dict(os.environ, {"TRENDS_JOBS": "3"}):
            resolved = self.service.resolve(DEFAULTS, flags, {"geos": "US, MX", "raw": "true", "reps": 20.0})
        self.assertEqual(resolved["jobs"], 3)
        self.assertEqual(resolved["geos"], ["US", "MX"])
        self.assertIs(resolved["raw"], True)
        self.assertEqual(resolved["reps"], 20)
        with self.assertRaises(ConfigError):
            self.service.resolve(DEFAULTS, flags, {"reps": "many"})

    def test_unknown_keys(self):
        """Test a config file with keys the command does not know"""
        flags = {key: None for key in DEFAULTS}
        with self.assertRaises(ConfigError) as ctx:
            self.service.resolve(DEFAULTS, flags, {"replications": 5})
        self.assertIn("replications", str(ctx.exception))

    def test_manifest_as_config(self):
        """Test a manifest is read through its config map for the same command"""
        path = self._write({"command": "simulate", "config": {"reps": 5}, "master_seed": 0})
        self.assertEqual(self.service.load_file(path, "simulate"), {"reps": 5})
        with self.assertRaises(ConfigError):
            self.service.load_file(path, "nowcast")

    def test_bad_files(self):
        """Test missing and malformed config files"""
        with self.assertRaises(ConfigError):
            self.service.load_file(os.path.join(self.temp_dir, "nope.json"), "synth")
        path = os.path.join(self.temp_dir, "broken.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write("{not json")
        with self.assertRaises(ConfigError):
            self.service.load_file(path, "synth")
        with self.assertRaises(ConfigError):
            self.service.load_file(self._write([1, 2]), "synth")


class TestReportService(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.service = ReportService()

    def tearDown(self):
        shutil.rmtree(self.temp_dir, ignore_errors=True)

    def test_manifest_roundtrip(self):
        """Test saving and loading a manifest with output checksums"""
        exporter = ReportExportService(self.temp_dir)
        exporter.write_frame(pd.DataFrame({"a": [1.5, 2.0]}), "table.csv")
        manifest = self.service.build_manifest("corr", {"seed": 4, "geo": "US"}, 4)
        self.service.record_outputs(manifest, self.temp_dir, exporter.written)
        path = self.service.save_manifest(manifest, self.temp_dir)
        self.assertEqual(os.path.basename(path), MANIFEST_FILE)

        loaded = self.service.load_manifest(path)
        self.assertEqual(loaded.command, "corr")
        self.assertEqual(loaded.master_seed, 4)
        self.assertEqual(loaded.outputs, manifest.outputs)
        self.assertEqual(self.service.verify_outputs(loaded, self.temp_dir), {"table.csv": True})

        with open(os.path.join(self.temp_dir, "table.csv"), "a", encoding="utf-8") as f:
            f.write("3\n")
        self.assertEqual(self.service.verify_outputs(loaded, self.temp_dir), {"table.csv": False})

    def test_config_checksum_ignores_key_order(self):
        """Test the config checksum depends on content only"""
        a = self.service.build_manifest("synth", {"seed": 1, "jobs": 2}, 1)
        b = self.service.build_manifest("synth", {"jobs": 2, "seed": 1}, 1)
        c = self.service.build_manifest("synth", {"jobs": 2, "seed": 2}, 2)
        self.assertEqual(a.config_checksum, b.config_checksum)
        self.assertNotEqual(a.config_checksum, c.config_checksum)

    def test_unreadable_manifest(self):
        """Test loading a file that is not a manifest"""
        path = os.path.join(self.temp_dir, "x.json")
        with open(path, "w", encoding="utf-8") as f:
            f.write('{"foo": 1}')
        with self.assertRaises(ConfigError):
            self.service.load_manifest(path)

    def test_csv_uses_lf(self):
        """Test exported tables use LF line endings and a fixed float format"""
        exporter = ReportExportService(self.temp_dir)
        path = exporter.write_frame(pd.DataFrame({"x": [1 / 3]}), "out.csv")
        with open(path, "rb") as f:
            self.assertEqual(f.read(), b"x\n0.33333333\n")


if __name__ == '__main__':
    unittest.main()
