"""
Base evaluation service: batched eval-mode inference over a dataset, and the
template every analysis sweep (noise, FGSM, early-exit thresholds) follows.
"""

import concurrent.futures
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from config import Config
from models.network import EVAL, forward_unrolled, predict
from utils.constants import PassId
from utils.logging_config import logger

DEFAULT_EVAL_BATCH = 256


@dataclass
class EvalResult:
    correct: int
    total: int
    timesteps: int
    # spike totals summed over all batches: encoder [T], layer outputs [L, T]
    input_counts: np.ndarray
    spike_counts: np.ndarray

    @property
    def accuracy(self):
        return self.correct / self.total if self.total else 0.0

    @property
    def num_samples(self):
        return self.total


def evaluate(
    net,
    dataset,
    rng,
    timesteps=None,
    batch_size=DEFAULT_EVAL_BATCH,
    perturb: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None,
):
    """
    Eval-mode accuracy over ``dataset`` in load order. ``perturb(images,
    labels, sample_ids)`` transforms each batch before encoding. Poisson frames
    are keyed by sample index and the fixed evaluation pass id, so results do
    not depend on batch size.
    """
    steps = net.timesteps if timesteps is None else int(timesteps)
    num_layers = len(net.layers)
    input_counts = np.zeros(steps, dtype=np.float64)
    spike_counts = np.zeros((num_layers, steps), dtype=np.float64)
    correct = 0
    total = len(dataset)
    for start in range(0, total, batch_size):
        ids = np.arange(start, min(start + batch_size, total))
        images = dataset.images[ids]
        labels = dataset.labels[ids]
        if perturb is not None:
            images = perturb(images, labels, ids)
        potentials, tape = forward_unrolled(
            net,
            images,
            rng,
            mode=EVAL,
            sample_ids=ids,
            pass_id=PassId.EVAL,
            timesteps=steps,
        )
        correct += int(np.sum(predict(potentials) == labels))
        input_counts += tape.input_counts
        spike_counts += tape.spike_counts
    return EvalResult(correct, total, steps, input_counts, spike_counts)


class BaseEvaluationService:
    """Generic sweep: one evaluation per level, levels run in parallel"""

    # These should be overridden by subclasses
    analysis_type = "generic"
    level_name = "level"
    batch_size = DEFAULT_EVAL_BATCH

    @classmethod
    def run_sweep(cls, net, dataset, rng, levels, max_workers=None) -> List[Dict[str, Any]]:
        """
        Evaluate ``dataset`` once per level and return rows in the order the
        levels were given. Worker count is capped by SNN_NUM_THREADS.
        """
        levels = [float(level) for level in levels]
        for level in levels:
            cls._validate_level(level)
        workers = max(1, min(max_workers or Config.NUM_THREADS, len(levels) or 1))
        logger.info(
            f"[{cls.analysis_type}] Sweeping {len(levels)} {cls.level_name} values "
            f"on {len(dataset)} samples with {workers} workers"
        )

        results = {}
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as executor:
            future_to_level = {
                executor.submit(cls._evaluate_level, net, dataset, rng, level): level
                for level in levels
            }
            for future in concurrent.futures.as_completed(future_to_level):
                level = future_to_level[future]
                try:
                    results[level] = future.result()
                except Exception as e:
                    logger.error(
                        f"[{cls.analysis_type}] Evaluation failed at "
                        f"{cls.level_name}={level}: {e}",
                        exc_info=True,
                    )
                    raise

        rows = [cls._format_row(level, results[level]) for level in levels]
        for row in rows:
            logger.info(f"[{cls.analysis_type}] {row}")
        return rows

    @classmethod
    def _evaluate_level(cls, net, dataset, rng, level):
        def perturb(images, labels, ids):
            return cls._perturb(net, images, labels, ids, rng, level)

        return evaluate(
            net,
            dataset,
            rng,
            timesteps=cls._timesteps_for(net, level),
            batch_size=cls.batch_size,
            perturb=perturb,
        )

    @classmethod
    def _format_row(cls, level, result) -> Dict[str, Any]:
        return {cls.level_name: level, "accuracy": result.accuracy}

    @classmethod
    def _validate_level(cls, level) -> None:
        """Reject levels the analysis cannot run. Override in subclasses."""
        pass

    @classmethod
    def _timesteps_for(cls, net, level) -> Optional[int]:
        """Inference length at ``level``; None runs all timesteps."""
        return None

    @classmethod
    def _perturb(cls, net, images, labels, sample_ids, rng, level) -> np.ndarray:
        """Transform a clean batch for ``level``. Override in subclasses."""
        raise NotImplementedError("Subclasses must implement _perturb")
