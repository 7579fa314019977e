import json

import numpy as np
import pytest

from latentrel.artifact import FORMAT_VERSION, load_pipeline, save_pipeline
from latentrel.errors import ArtifactVersionMismatchError
from latentrel.mathcore import RandomSource
from latentrel.problem import InputSpec, parse_limit_state, sample_inputs
from latentrel.semisup import EaConfig, PipelineConfig, run_pipeline


@pytest.fixture(scope="module")
def small_pipeline():
    cfg = PipelineConfig(
        ae_hidden=(3,),
        latent_dim=2,
        ae_max_epochs=150,
        dfn_hidden=(3,),
        gp_restarts=2,
        gp_max_iterations=60,
        ea=EaConfig(population_size=10, elite_count=2, max_generations=6,
                    stall_window=4, stall_tolerance=1e-9),
    )
    expr = parse_limit_state("x1 - x2 + 0.3*x3", 3)
    spec = InputSpec.iid_normal(3, 1.0, 0.8)
    pipeline, _ = run_pipeline(expr, spec, 15, 10, cfg, master_seed=21)
    return pipeline, spec


class TestRoundTrip:
    def test_parameters_bit_exact(self, small_pipeline, tmp_path):
        pipeline, _ = small_pipeline
        path = tmp_path / "artifact.json"
        save_pipeline(path, pipeline)
        loaded = load_pipeline(path)
        for a, b in zip(
            pipeline.autoencoder.weights + pipeline.autoencoder.biases,
            loaded.autoencoder.weights + loaded.autoencoder.biases,
        ):
            assert np.array_equal(a, b)
        for a, b in zip(
            pipeline.dfn.weights + pipeline.dfn.biases,
            loaded.dfn.weights + loaded.dfn.biases,
        ):
            assert np.array_equal(a, b)
        assert np.array_equal(pipeline.gp.latents, loaded.gp.latents)
        assert np.array_equal(pipeline.gp.alpha, loaded.gp.alpha)
        assert pipeline.gp.hyper == loaded.gp.hyper
        assert loaded.master_seed == pipeline.master_seed

    def test_predictions_bit_exact(self, small_pipeline, tmp_path):
        pipeline, spec = small_pipeline
        path = tmp_path / "artifact.json"
        save_pipeline(path, pipeline)
        loaded = load_pipeline(path)
        x = sample_inputs(spec, 40, RandomSource(2))
        t1 = pipeline.dfn.forward_batch(x)
        t2 = loaded.dfn.forward_batch(x)
        assert np.array_equal(t1, t2)
        assert np.array_equal(
            pipeline.gp.predict_mean_batch(t1), loaded.gp.predict_mean_batch(t2)
        )

    def test_saved_twice_identical_bytes(self, small_pipeline, tmp_path):
        pipeline, _ = small_pipeline
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_pipeline(p1, pipeline)
        save_pipeline(p2, pipeline)
        assert p1.read_bytes() == p2.read_bytes()

    def test_save_load_save_stable(self, small_pipeline, tmp_path):
        pipeline, _ = small_pipeline
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_pipeline(p1, pipeline)
        save_pipeline(p2, load_pipeline(p1))
        assert p1.read_bytes() == p2.read_bytes()


class TestVersioning:
    def test_version_mismatch(self, small_pipeline, tmp_path):
        pipeline, _ = small_pipeline
        path = tmp_path / "artifact.json"
        save_pipeline(path, pipeline)
        doc = json.loads(path.read_text())
        doc["format_version"] = FORMAT_VERSION + 1
        path.write_text(json.dumps(doc))
        with pytest.raises(ArtifactVersionMismatchError):
            load_pipeline(path)

    def test_wrong_kind(self, small_pipeline, tmp_path):
        pipeline, _ = small_pipeline
        path = tmp_path / "artifact.json"
        save_pipeline(path, pipeline)
        doc = json.loads(path.read_text())
        doc["kind"] = "something-else"
        path.write_text(json.dumps(doc))
        with pytest.raises(ArtifactVersionMismatchError):
            load_pipeline(path)
