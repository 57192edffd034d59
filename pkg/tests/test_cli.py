"""Tests for the command-line interface."""
import json
import shutil
import tempfile
import unittest
from pathlib import Path

from typer.testing import CliRunner

from fantrack.cli.main import app
from fantrack.core.config import ConfigManager, TrackerConfig
from fantrack.core.mesh import load_obj
from fantrack.services.dataset import Trajectory, save_trajectory
from fantrack.services.synthetic import generate_synthetic_sequence, make_variant, orbit_trajectory
from tests import scene


class TestCli(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.temp_path = Path(self.temp_dir)
        self.runner = CliRunner()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_unknown_command(self):
        result = self.runner.invoke(app, ["teleport"])
        self.assertEqual(result.exit_code, 2)

    def test_version(self):
        result = self.runner.invoke(app, ["version"])
        self.assertEqual(result.exit_code, 0)
        self.assertIn("fantrack version", result.output)

    def test_primitive(self):
        out = self.temp_path / "box.obj"
        result = self.runner.invoke(app, ["primitive", "box", str(out), "--size", "0.2"])
        self.assertEqual(result.exit_code, 0)
        mesh = load_obj(out)
        self.assertAlmostEqual(float(mesh.vertices[:, 0].max()), 0.1)

    def test_unknown_primitive(self):
        result = self.runner.invoke(app, ["primitive", "cone", str(self.temp_path / "cone.obj")])
        self.assertEqual(result.exit_code, 2)

    def test_config_writes_defaults(self):
        out = self.temp_path / "config.json"
        result = self.runner.invoke(app, ["config", str(out)])
        self.assertEqual(result.exit_code, 0)
        self.assertEqual(ConfigManager(out).load(), TrackerConfig())

    def test_config_applies_overrides(self):
        overrides = self.temp_path / "tracker.toml"
        overrides.write_text('roi_margin = 25\nmodality = "contour"\n')
        out = self.temp_path / "config.json"
        result = self.runner.invoke(app, ["config", str(out), "--config", str(overrides)])
        self.assertEqual(result.exit_code, 0)
        with open(out) as f:
            data = json.load(f)
        self.assertEqual(data["roi_margin"], 25)
        self.assertEqual(data["modality"], "contour")

    def test_config_rejects_unknown_keys(self):
        overrides = self.temp_path / "tracker.toml"
        overrides.write_text("roi_margn = 25\n")
        result = self.runner.invoke(app, ["config", str(self.temp_path / "c.json"), "--config", str(overrides)])
        self.assertEqual(result.exit_code, 2)

    def test_eval_perfect_trajectory(self):
        sequence = generate_synthetic_sequence(
            scene.MESH, scene.K, orbit_trajectory(scene.START, 3), make_variant("regular"),
            seed=0, out_path=self.temp_path / "seq",
        )
        trajectory = self.temp_path / "traj.csv"
        save_trajectory(trajectory, Trajectory(list(sequence.gt_poses)))
        report = self.temp_path / "report.json"

        result = self.runner.invoke(app, ["eval", str(sequence.root), str(trajectory), "--json", str(report)])
        self.assertEqual(result.exit_code, 0, result.output)
        self.assertIn("success_rate: 100.0", result.output)
        self.assertIn("auc: 20.00", result.output)
        self.assertIn("resets: 0", result.output)
        with open(report) as f:
            self.assertEqual(json.load(f)["success_rate"], 100.0)

    def test_eval_missing_sequence(self):
        result = self.runner.invoke(
            app, ["eval", str(self.temp_path / "nope"), str(self.temp_path / "traj.csv")]
        )
        self.assertEqual(result.exit_code, 2)


if __name__ == '__main__':
    unittest.main()
