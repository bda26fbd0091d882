# Copyright (C) 2025 AIDC-AI
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#     http://www.apache.org/licenses/LICENSE-2.0
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Gradient and oracle checks (gradcheck)

    - every primitive op against central finite differences
    - the CTC forward DP against exhaustive path enumeration
    - the CTC node's gradient against finite differences
    - the full training loss of a micro model against finite differences
"""

from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

from csvmasr.config.schema import (
    NUM_RESERVED_TOKENS,
    AdapterConfig,
    DecoderConfig,
    EncoderConfig,
    LossConfig,
    ModelConfig,
    RoutingVariant,
)
from csvmasr.models.outputs import Batch
from csvmasr.models.routing import LidMask
from csvmasr.numerics import ParamStore, compare_gradients, finite_diff_grad, ops, precision, value_and_grad
from csvmasr.numerics.checks import CheckResult, run_primitive_checks
from csvmasr.pipelines.base import BasePipeline, ProgressCallback
from csvmasr.services.losses import (
    ctc_forward_backward,
    ctc_loss,
    ctc_required_frames,
    exhaustive_ctc_loss,
)
from csvmasr.services.model import CsvMasrModel

MICRO_TOKENS_PER_LANGUAGE = 2
MICRO_FRAMES = 6


def _random_log_probs(rng: np.random.Generator, frames: int, vocab: int) -> np.ndarray:
    logits = rng.normal(scale=2.0, size=(frames, vocab))
    return logits - np.logaddexp.reduce(logits, axis=-1, keepdims=True)


def _random_target(rng: np.random.Generator, frames: int, vocab: int, max_len: int = 3) -> List[int]:
    """Feasible target over non-blank ids 1..vocab-1"""
    while True:
        length = int(rng.integers(0, max_len + 1))
        target = [int(t) for t in rng.integers(1, vocab, size=length)]
        if ctc_required_frames(target) <= frames:
            return target


def ctc_oracle_check(cases: int = 1000, seed: int = 0, tolerance: float = 1e-9) -> CheckResult:
    """Forward DP loss vs -log of the exhaustive path sum (frames <= 6, vocab <= 4, |target| <= 3)"""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        frames = int(rng.integers(1, 7))
        vocab = int(rng.integers(2, 5))
        log_probs = _random_log_probs(rng, frames, vocab)
        target = _random_target(rng, frames, vocab)
        loss, _ = ctc_forward_backward(log_probs, target, blank=0)
        worst = max(worst, abs(loss - exhaustive_ctc_loss(log_probs, target, blank=0)))
    return CheckResult(name="ctc_oracle", cases=cases, max_error=worst, tolerance=tolerance)


def ctc_gradient_check(cases: int = 50, seed: int = 0, tolerance: float = 1e-5) -> CheckResult:
    """CTC loss of softmax(logits) differentiated through the fused node"""
    rng = np.random.default_rng(seed)
    worst = 0.0
    with precision(64):
        for _ in range(cases):
            frames = int(rng.integers(2, 7))
            vocab = int(rng.integers(2, 5))
            target = _random_target(rng, frames, vocab)
            params = ParamStore.from_arrays({"logits": rng.normal(size=(frames, vocab))})

            def program(p, target=target):
                return ctc_loss(ops.log_softmax(p["logits"], axis=-1), target, blank=0)

            _, analytic = value_and_grad(program, params)
            numeric = finite_diff_grad(program, params)
            worst = max(worst, max(compare_gradients(analytic, numeric).values()))
    return CheckResult(name="ctc_gradient", cases=cases, max_error=worst, tolerance=tolerance)


def micro_model_config(variant: RoutingVariant = RoutingVariant.SUMMARY_VECTOR) -> ModelConfig:
    """d_model 8, two encoder layers with adapters at layer 2, three languages, one decoder layer"""
    num_languages = 3
    return ModelConfig(
        variant=variant,
        d_feat=4,
        num_languages=num_languages,
        vocab_size=NUM_RESERVED_TOKENS + num_languages * MICRO_TOKENS_PER_LANGUAGE,
        encoder=EncoderConfig(
            num_layers=2, d_model=8, num_heads=2, ffn_dim=16, conv_kernel=3,
            adapter_layers=[2], rel_pos_clip=4,
        ),
        adapters=AdapterConfig(bottleneck_dim=4),
        decoder=DecoderConfig(num_layers=1, max_decode_len=8, beam_width=2),
    )


def micro_batch(config: ModelConfig, seed: int = 0, size: int = 2) -> Batch:
    """Random features with one transcript per language-owned token range"""
    rng = np.random.default_rng(seed)
    features = rng.normal(size=(size, MICRO_FRAMES, config.d_feat))
    language_ids, transcripts, masks = [], [], []
    for b in range(size):
        language = b % config.num_languages
        low = NUM_RESERVED_TOKENS + language * MICRO_TOKENS_PER_LANGUAGE
        tokens = rng.integers(low, low + MICRO_TOKENS_PER_LANGUAGE, size=int(rng.integers(1, 4)))
        language_ids.append(language)
        transcripts.append(tuple(int(t) for t in tokens))
        masks.append(LidMask.from_active({language, (language + 1) % config.num_languages}, config.num_languages))
    return Batch(
        features=features,
        masks=np.stack([m.as_array() for m in masks]),
        language_ids=np.array(language_ids),
        transcripts=transcripts,
        utterance_ids=[f"micro-{b}" for b in range(size)],
    )


def micro_model_check(
    variant: RoutingVariant = RoutingVariant.SUMMARY_VECTOR,
    seed: int = 0,
    epsilon: float = 1e-4,
    tolerance: float = 1e-4,
) -> CheckResult:
    """Analytic vs finite-difference gradient of total_loss for every trainable parameter"""
    config = micro_model_config(variant)
    with precision(64):
        model = CsvMasrModel.initialize(config, seed=seed)
        _perturb_zero_initialized(model.params, seed)
        program = model.loss_program(micro_batch(config, seed), LossConfig())
        _, analytic = value_and_grad(program, model.params)
        numeric = finite_diff_grad(program, model.params, epsilon)
        errors = compare_gradients(analytic, numeric)
    worst_name = max(errors, key=errors.get)
    logger.debug(f"micro model {variant.value}: worst parameter {worst_name} ({errors[worst_name]:.2e})")
    return CheckResult(
        name=f"micro_model[{variant.value}]",
        cases=len(errors),
        max_error=errors[worst_name],
        tolerance=tolerance,
    )


def _perturb_zero_initialized(params: ParamStore, seed: int):
    """Give biases and relative-position tables non-trivial values so their paths are exercised"""
    rng = np.random.default_rng([seed, 1])
    for name in params.trainable_names():
        value = params[name]
        if not np.any(value):
            params.set(name, rng.normal(scale=0.1, size=value.shape))


class GradcheckPipeline(BasePipeline):
    """Run every check; the caller decides what a failure means"""

    def __call__(
        self,
        progress_callback: Optional[ProgressCallback] = None,
        cases: int = 100,
        seed: int = 0,
        variants: Sequence[RoutingVariant] = (RoutingVariant.SUMMARY_VECTOR,),
        **kwargs,
    ) -> List[CheckResult]:
        steps = 3 + len(variants)
        self._report_progress(progress_callback, "primitive_checks", 0.0, current=1, total=steps)
        results = run_primitive_checks(cases=cases, seed=seed)

        self._report_progress(progress_callback, "ctc_oracle", 1 / steps, current=2, total=steps)
        results.append(ctc_oracle_check(seed=seed))
        self._report_progress(progress_callback, "ctc_gradient", 2 / steps, current=3, total=steps)
        results.append(ctc_gradient_check(seed=seed))

        for index, variant in enumerate(variants):
            self._report_progress(
                progress_callback, "micro_model", (3 + index) / steps, current=4 + index, total=steps
            )
            results.append(micro_model_check(variant, seed=seed))

        for result in results:
            status = "ok" if result.passed else "FAILED"
            log = logger.info if result.passed else logger.error
            log(f"{result.name:<24} cases={result.cases:<5} max_error={result.max_error:.3e} "
                f"tol={result.tolerance:.0e} {status}")
        self._report_progress(progress_callback, "completed", 1.0)
        return results
