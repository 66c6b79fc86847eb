import numpy as np
import pytest
import yaml

from wirefit import fileio
from wirefit.cli import main
from wirefit.config import PipelineConfig
from wirefit.fields import BoxSDF, SphereSDF, UnionSDF
from wirefit.geometry import LineCloud, WireframeGraph3D
from wirefit.junctions import JunctionSet
from wirefit.synth import cube_wireframe, make_cube_scene


class TestSceneRoundTrip:
    def test_lossless(self, tmp_path):
        scene = make_cube_scene(n_views=3, resolution=64, seed=2)
        path = tmp_path / "scene.yaml"
        fileio.write_scene(scene, path)
        back = fileio.read_scene(path)
        assert np.allclose(back.gt_wireframe.junctions, scene.gt_wireframe.junctions,
                           atol=1e-12)
        assert back.gt_wireframe.edges == scene.gt_wireframe.edges
        for ca, cb in zip(scene.cameras, back.cameras):
            assert np.allclose(ca.intrinsics, cb.intrinsics, atol=1e-12)
            assert np.allclose(ca.rotation, cb.rotation, atol=1e-12)
            assert np.allclose(ca.translation, cb.translation, atol=1e-12)
        for va, vb in zip(scene.views, back.views):
            assert np.allclose(va.vertices, vb.vertices, atol=1e-12)
            assert va.edges == vb.edges
        assert isinstance(back.sdf, BoxSDF)

    def test_missing_camera_field_names_it(self, tmp_path):
        scene = make_cube_scene(n_views=2, resolution=64, seed=2)
        path = tmp_path / "scene.yaml"
        fileio.write_scene(scene, path)
        doc = yaml.safe_load(path.read_text())
        del doc["cameras"][0]["translation"]
        path.write_text(yaml.safe_dump(doc))
        with pytest.raises(fileio.ParseError, match="translation"):
            fileio.read_scene(path)

    def test_truncated_file(self, tmp_path):
        scene = make_cube_scene(n_views=2, resolution=64, seed=2)
        path = tmp_path / "scene.yaml"
        fileio.write_scene(scene, path)
        text = path.read_text()
        path.write_text(text[: len(text) // 2])
        with pytest.raises(fileio.ParseError):
            fileio.read_scene(path)

    def test_wrong_kind(self, tmp_path):
        path = tmp_path / "x.yaml"
        fileio.write_wireframe(cube_wireframe(), path)
        with pytest.raises(fileio.ParseError, match="kind"):
            fileio.read_scene(path)

    def test_missing_format_tag(self, tmp_path):
        path = tmp_path / "x.yaml"
        path.write_text("kind: scene\n")
        with pytest.raises(fileio.ParseError, match="format"):
            fileio.read_scene(path)


class TestOtherRoundTrips:
    def test_line_cloud(self, tmp_path):
        rng = np.random.default_rng(0)
        cloud = LineCloud(endpoints=rng.uniform(-1, 1, (7, 2, 3)),
                          view_ids=rng.integers(0, 3, 7))
        path = tmp_path / "cloud.yaml"
        fileio.write_line_cloud(cloud, path)
        back = fileio.read_line_cloud(path)
        assert np.allclose(back.endpoints, cloud.endpoints, atol=1e-15)
        assert np.array_equal(back.view_ids, cloud.view_ids)

    def test_junctions(self, tmp_path):
        js = JunctionSet(positions=np.random.default_rng(1).uniform(-1, 1, (5, 3)),
                         active=[True, False, True, True, False])
        path = tmp_path / "junctions.yaml"
        fileio.write_junctions(js, path)
        back = fileio.read_junctions(path)
        assert np.allclose(back.positions, js.positions, atol=1e-15)
        assert np.array_equal(back.active, js.active)

    def test_wireframe(self, tmp_path):
        wf = cube_wireframe()
        path = tmp_path / "wf.yaml"
        fileio.write_wireframe(wf, path)
        back = fileio.read_wireframe(path)
        assert np.allclose(back.junctions, wf.junctions, atol=1e-15)
        assert back.edges == wf.edges

    def test_sdf_union(self, tmp_path):
        scene = make_cube_scene(n_views=2, resolution=64, seed=0)
        scene.sdf = UnionSDF((SphereSDF([0, 0, 0], 0.4),
                              BoxSDF([0.2, 0, 0], [0.1, 0.1, 0.1])))
        path = tmp_path / "scene.yaml"
        fileio.write_scene(scene, path)
        back = fileio.read_scene(path)
        assert isinstance(back.sdf, UnionSDF)
        p = np.array([0.7, 0.1, -0.2])
        assert back.sdf.eval(p) == pytest.approx(scene.sdf.eval(p), abs=1e-15)

    def test_metrics_report(self, tmp_path):
        report = {"acc_j": 1.25e-7, "counts": {"lines": 12},
                  "precision_l": [1.0, 1.0]}
        txt = tmp_path / "report.txt"
        structured = tmp_path / "report.yaml"
        fileio.write_metrics_report(report, txt, structured)
        assert "acc_j" in txt.read_text()
        assert fileio.read_metrics_report(structured) == report


class TestObjExport:
    def test_cube(self, tmp_path):
        path = tmp_path / "cube.obj"
        fileio.export_obj(cube_wireframe(), path)
        lines = path.read_text().splitlines()
        assert sum(1 for l in lines if l.startswith("v ")) == 8
        assert sum(1 for l in lines if l.startswith("l ")) == 12

    def test_empty_graph(self, tmp_path):
        path = tmp_path / "empty.obj"
        fileio.export_obj(WireframeGraph3D(junctions=np.empty((0, 3)), edges=[]), path)
        lines = path.read_text().splitlines()
        assert lines == ["# wireframe line-segment export"]

    def test_round_trip(self, tmp_path):
        wf = cube_wireframe()
        path = tmp_path / "cube.obj"
        fileio.export_obj(wf, path)
        back = fileio.import_obj(path)
        assert np.array_equal(back.junctions, wf.junctions)
        assert back.edges == wf.edges


class TestGaussianInitExport:
    def test_active_only(self, tmp_path):
        js = JunctionSet(positions=np.arange(30, dtype=float).reshape(10, 3) / 10,
                         active=[True] * 8 + [False] * 2)
        path = tmp_path / "points3D.txt"
        fileio.export_gaussian_init(js, path)
        data = [l for l in path.read_text().splitlines() if not l.startswith("#")]
        assert len(data) == 8
        pts = fileio.read_gaussian_init(path)
        assert np.array_equal(pts, js.active_positions())

    def test_format_fields(self, tmp_path):
        js = JunctionSet(positions=[[0.1, 0.2, 0.3]], active=[True])
        path = tmp_path / "points3D.txt"
        fileio.export_gaussian_init(js, path)
        data = [l for l in path.read_text().splitlines() if not l.startswith("#")]
        parts = data[0].split()
        assert parts[0] == "1"
        assert parts[4:8] == ["128", "128", "128", "0"]

    def test_no_active_rejected(self, tmp_path):
        js = JunctionSet(positions=[[0, 0, 0]], active=[False])
        with pytest.raises(ValueError):
            fileio.export_gaussian_init(js, tmp_path / "p.txt")


class TestConfig:
    def test_defaults(self):
        c = PipelineConfig()
        assert c.tau_ray == 5.0
        assert c.beta == 1e-3
        assert c.n_samples == 256
        assert c.n_junctions == 1024
        assert c.dbscan_eps == 0.01
        assert c.dbscan_min_samples == 2
        assert c.theta_max == 10.0
        assert c.d_max == 0.01
        assert c.ang_max == 10.0
        assert c.perp_max == 5.0
        assert c.overlap_min == 0.5
        assert c.vis_threshold == 1
        assert c.lambda_2d == 0.01
        assert c.seed == 0

    def test_lambda_alias(self):
        d = PipelineConfig().to_dict()
        assert "lambda" in d and "lambda_2d" not in d
        back = PipelineConfig.from_dict({"lambda": 0.5})
        assert back.lambda_2d == 0.5

    def test_load_and_override(self, tmp_path):
        path = tmp_path / "config.yaml"
        path.write_text("tau_ray: 2.0\nn_samples: 64\n")
        c = PipelineConfig.load(path)
        assert c.tau_ray == 2.0
        assert c.n_samples == 64
        c2 = c.replaced(tau_ray=3.0, n_samples=None)
        assert c2.tau_ray == 3.0
        assert c2.n_samples == 64

    def test_unknown_field_rejected(self):
        with pytest.raises(ValueError):
            PipelineConfig.from_dict({"bogus": 1})

    def test_validation(self):
        with pytest.raises(ValueError):
            PipelineConfig(beta=-1.0)
        with pytest.raises(ValueError):
            PipelineConfig(line_source="magic")


class TestCLI:
    def run_ok(self, *argv):
        assert main(list(argv)) == 0

    def test_full_stage_chain(self, tmp_path):
        scene = tmp_path / "scene.yaml"
        cloud = tmp_path / "cloud.yaml"
        junctions = tmp_path / "junctions.yaml"
        wireframe = tmp_path / "wf.yaml"
        report = tmp_path / "report.txt"
        points = tmp_path / "points3D.txt"
        obj = tmp_path / "wf.obj"

        self.run_ok("gen", str(scene), "--views", "8", "--resolution", "128")
        self.run_ok("render-lines", str(scene), str(cloud),
                    "--duplicates-per-view", "3")
        self.run_ok("fit-junctions", str(cloud), str(junctions),
                    "--n-junctions", "128")
        self.run_ok("distill", str(scene), str(cloud), str(junctions),
                    str(wireframe), "--obj", str(obj))
        self.run_ok("eval", str(scene), str(wireframe), str(report))
        self.run_ok("export-gaussian-init", str(junctions), str(points))

        wf = fileio.read_wireframe(wireframe)
        assert len(wf.junctions) == 8
        assert len(wf.edges) == 12
        metrics = fileio.read_metrics_report(report.with_suffix(".yaml"))
        assert metrics["precision_l"][0] == 1.0
        assert obj.exists() and points.exists()

    def test_run_command(self, tmp_path, capsys):
        scene = tmp_path / "scene.yaml"
        out = tmp_path / "out"
        self.run_ok("gen", str(scene), "--views", "8", "--resolution", "128")
        self.run_ok("run", str(scene), str(out), "--n-junctions", "128")
        for name in ("line_cloud.yaml", "junctions.yaml", "wireframe.yaml",
                     "wireframe.obj", "report.txt", "report.yaml", "points3D.txt"):
            assert (out / name).exists()
        assert "P=1.000 R=1.000" in capsys.readouterr().out

    def test_error_exit_code(self, tmp_path, capsys):
        missing = tmp_path / "nope.yaml"
        assert main(["render-lines", str(missing), str(tmp_path / "c.yaml")]) == 1
        assert "error:" in capsys.readouterr().err

    def test_config_file_and_flag_precedence(self, tmp_path):
        scene = tmp_path / "scene.yaml"
        cloud = tmp_path / "cloud.yaml"
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("duplicates_per_view: 2\n")
        self.run_ok("gen", str(scene), "--views", "4", "--resolution", "64")
        self.run_ok("render-lines", str(scene), str(cloud), "--config", str(cfg))
        assert len(fileio.read_line_cloud(cloud)) == 4 * 12 * 2
        self.run_ok("render-lines", str(scene), str(cloud), "--config", str(cfg),
                    "--duplicates-per-view", "1")
        assert len(fileio.read_line_cloud(cloud)) == 4 * 12 * 1
