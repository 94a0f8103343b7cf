"""
Unit tests for the evaluation sweep template.
"""

import unittest
from unittest import mock

import numpy as np

from config import Config
from etl.extraction import Dataset
from models.layers import LayerKind, LayerSpec, NetSpec, NormKind
from models.network import SimulationOptions, init_network
from numerics.rng import Rng
from services import base_service
from services.base_service import BaseEvaluationService, evaluate


class ScaledInputService(BaseEvaluationService):
    analysis_type = "Scaled"
    level_name = "scale"
    batch_size = 3

    @classmethod
    def _perturb(cls, net, images, labels, sample_ids, rng, level):
        return np.clip(images * level, 0.0, 1.0).astype(images.dtype)


class TestBaseEvaluationService(unittest.TestCase):
    """Sweeps built on BaseEvaluationService"""

    def setUp(self):
        spec = NetSpec(
            "unit",
            (1, 2, 2),
            (
                LayerSpec(LayerKind.LINEAR, "fc1", 4, 6, norm=NormKind.NONE),
                LayerSpec(LayerKind.LINEAR, "fc2", 6, 2, norm=NormKind.NONE, is_output=True),
            ),
            2,
        )
        self.net = init_network(spec, SimulationOptions(timesteps=5), Rng(0))
        gen = np.random.default_rng(1)
        self.dataset = Dataset(
            "toy",
            "test",
            gen.uniform(0, 1, size=(10, 1, 2, 2)).astype(np.float32),
            gen.integers(0, 2, size=10),
            2,
        )

    def test_rows_follow_level_order(self):
        levels = [1.0, 0.0, 0.5, 2.0]
        rows = ScaledInputService.run_sweep(self.net, self.dataset, Rng(0), levels)
        self.assertEqual([row["scale"] for row in rows], levels)
        for row in rows:
            self.assertGreaterEqual(row["accuracy"], 0.0)
            self.assertLessEqual(row["accuracy"], 1.0)

    def test_identity_level_matches_plain_evaluation(self):
        rows = ScaledInputService.run_sweep(self.net, self.dataset, Rng(0), [1.0])
        self.assertEqual(rows[0]["accuracy"], evaluate(self.net, self.dataset, Rng(0)).accuracy)

    def test_workers_capped_by_configured_threads(self):
        with mock.patch.object(Config, "NUM_THREADS", 2), mock.patch.object(
            base_service.concurrent.futures,
            "ThreadPoolExecutor",
            wraps=base_service.concurrent.futures.ThreadPoolExecutor,
        ) as executor:
            ScaledInputService.run_sweep(self.net, self.dataset, Rng(0), [0.1, 0.2, 0.3])
        executor.assert_called_once_with(max_workers=2)

    def test_failures_propagate(self):
        with mock.patch.object(
            ScaledInputService, "_perturb", side_effect=RuntimeError("boom")
        ):
            with self.assertRaises(RuntimeError):
                ScaledInputService.run_sweep(self.net, self.dataset, Rng(0), [1.0])

    def test_base_perturb_is_abstract(self):
        with self.assertRaises(NotImplementedError):
            BaseEvaluationService.run_sweep(self.net, self.dataset, Rng(0), [1.0])

    def test_evaluate_is_independent_of_batch_size(self):
        small = evaluate(self.net, self.dataset, Rng(4), batch_size=3)
        large = evaluate(self.net, self.dataset, Rng(4), batch_size=256)
        self.assertEqual(small.correct, large.correct)
        np.testing.assert_array_equal(small.spike_counts, large.spike_counts)
        np.testing.assert_array_equal(small.input_counts, large.input_counts)


if __name__ == "__main__":
    unittest.main()
