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
Training loop, multihot LID sampling and checkpoint averaging
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from csvmasr.config.schema import CsvMasrConfig
from csvmasr.errors import CheckpointMismatchError, CorpusMismatchError, DivergenceError, NumericsError
from csvmasr.models.checkpoint import Checkpoint, EpochLog
from csvmasr.models.corpus import CorpusSplits, Utterance
from csvmasr.models.outputs import Batch
from csvmasr.models.routing import LidMask, Prompt
from csvmasr.numerics import ParamStore, precision, value_and_grad
from csvmasr.services.corpus import bucket_by_length
from csvmasr.services.evaluation import decode_nar, edit_distance, layer_predictions
from csvmasr.services.model import CsvMasrModel

EpochCallback = Callable[[EpochLog], None]


def sample_lid_mask(ground_truth: int, num_languages: int, p_insert: float, rng: np.random.Generator) -> LidMask:
    """
    Ground-truth bit always set; every other bit set independently with p_insert

    Always draws num_languages uniforms so the stream position does not
    depend on p_insert or the outcome.
    """
    if not 0.0 <= p_insert <= 1.0:
        raise ValueError(f"p_insert must lie in [0, 1], got {p_insert}")
    bits = rng.random(num_languages) < p_insert
    bits[ground_truth] = True
    return LidMask(tuple(int(b) for b in bits))


class AdamOptimizer:
    """Adam (beta1=0.9, beta2=0.999, eps=1e-8) on float64 master weights"""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m: Dict[str, np.ndarray] = {}
        self._v: Dict[str, np.ndarray] = {}

    def step(self, params: ParamStore, grads: Dict[str, np.ndarray]):
        self.step_count += 1
        t = self.step_count
        for name in params.trainable_names():
            grad = grads[name]
            m = self._m.get(name, np.zeros_like(grad))
            v = self._v.get(name, np.zeros_like(grad))
            m = self.beta1 * m + (1.0 - self.beta1) * grad
            v = self.beta2 * v + (1.0 - self.beta2) * grad * grad
            self._m[name], self._v[name] = m, v
            m_hat = m / (1.0 - self.beta1 ** t)
            v_hat = v / (1.0 - self.beta2 ** t)
            params.set(name, params[name] - self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps))


def epoch_batches(
    utterances: Sequence[Utterance],
    batch_size: int,
    rng: np.random.Generator,
) -> List[List[Utterance]]:
    """
    Equal-length batches in a seeded order

    Each length bucket is shuffled and cut into chunks of batch_size, then
    the chunk order is permuted.
    """
    chunks = []
    for bucket in bucket_by_length(utterances).values():
        order = rng.permutation(len(bucket))
        shuffled = [bucket[i] for i in order]
        chunks.extend(shuffled[i:i + batch_size] for i in range(0, len(shuffled), batch_size))
    return [chunks[i] for i in rng.permutation(len(chunks))]


def token_accuracy(edits: int, reference_tokens: int) -> float:
    return max(0.0, 1.0 - edits / reference_tokens) if reference_tokens else 0.0


@dataclass
class TrainingResult:
    checkpoints: List[Checkpoint] = field(default_factory=list)
    logs: List[EpochLog] = field(default_factory=list)
    averaged: Optional[Checkpoint] = None


def check_corpus_fits(config: CsvMasrConfig, splits: CorpusSplits):
    """
    Reject a corpus whose transcripts cannot be teacher-forced through the
    decoder (sos plus every token needs a positional slot)

    Raises:
        CorpusMismatchError: If the longest transcript is too long
    """
    lengths = [len(u.transcript) for split in (splits.train, splits.val, splits.test) for u in split]
    longest = max(lengths, default=0)
    if longest + 1 > config.decoder.max_decode_len:
        logger.error(f"Corpus transcripts reach {longest} tokens; decoder.max_decode_len is {config.decoder.max_decode_len}")
        raise CorpusMismatchError(
            "decoder.max_decode_len",
            f"{config.decoder.max_decode_len} positions cannot hold sos plus a {longest}-token transcript",
        )


class Trainer:
    """
    Optimizes one routing variant on a corpus

    Usage:
        trainer = Trainer(config, splits)
        result = trainer.train()
        model = trainer.model.with_params(result.averaged.to_store())
    """

    def __init__(self, config: CsvMasrConfig, splits: CorpusSplits, threads: int = 1):
        self.config = config
        self.splits = splits
        self.threads = threads
        check_corpus_fits(config, splits)
        self.model_config = config.model_config_for(splits.config)
        self.model = CsvMasrModel.initialize(self.model_config, seed=config.train.seed)
        self.optimizer = AdamOptimizer(config.train.learning_rate)
        self.config_hash = config.config_hash()

    def _train_utterances(self) -> List[Utterance]:
        languages = self.config.train.languages
        if languages is None:
            return list(self.splits.train)
        return list(self.splits.restricted_to(languages).train)

    def _val_utterances(self) -> List[Utterance]:
        languages = self.config.train.languages
        if languages is None:
            return list(self.splits.val)
        return list(self.splits.restricted_to(languages).val)

    def run_epoch(self, epoch: int) -> EpochLog:
        """One pass over the training split; returns the epoch's mean losses"""
        train_cfg = self.config.train
        num_languages = self.model_config.num_languages
        rng = np.random.default_rng([train_cfg.seed, epoch])
        batches = epoch_batches(self._train_utterances(), train_cfg.batch_size, rng)

        totals = np.zeros(4)
        for step, utterances in enumerate(batches, start=1):
            masks = [sample_lid_mask(u.language_id, num_languages, train_cfg.p_insert, rng) for u in utterances]
            batch = Batch.from_utterances(utterances, masks)
            try:
                with precision(train_cfg.precision):
                    breakdown = None

                    def program(p):
                        nonlocal breakdown
                        breakdown = self.model.forward_losses(batch, self.config.loss, p)
                        return breakdown.total_tensor

                    value, grads = value_and_grad(program, self.model.params)
            except NumericsError as e:
                logger.error(f"Non-finite value in '{e.op_name}' at epoch {epoch}, step {step}")
                raise DivergenceError(epoch, step, e.op_name) from e
            if not np.isfinite(value):
                logger.error(f"Non-finite loss at epoch {epoch}, step {step}")
                raise DivergenceError(epoch, step)

            self.optimizer.step(self.model.params, grads)
            totals += np.array([breakdown.total, breakdown.ctc, breakdown.att, breakdown.lang])
            logger.debug(f"epoch {epoch} step {step}/{len(batches)} loss={value:.4f}")

        means = totals / max(len(batches), 1)
        token_acc, lang_acc = self.validate()
        return EpochLog(
            epoch=epoch,
            train_loss=float(means[0]),
            ctc=float(means[1]),
            att=float(means[2]),
            lang=float(means[3]),
            val_token_acc=token_acc,
            val_lang_acc=lang_acc,
        )

    def validate(self, model: Optional[CsvMasrModel] = None):
        """
        NAR token accuracy and last-adapter-layer language accuracy on the
        validation split under the configured validation prompt

        Returns:
            (token accuracy in [0, 1], language accuracy in [0, 1] or None)
        """
        model = model or self.model
        utterances = self._val_utterances()
        prompt = Prompt.parse(self.config.train.val_prompt)
        hyps = decode_nar(model, utterances, prompt, self.threads)

        edits = sum(edit_distance(u.transcript, h) for u, h in zip(utterances, hyps))
        reference = sum(len(u.transcript) for u in utterances)
        token_acc = token_accuracy(edits, reference)

        lang_acc = None
        if utterances and model.config.variant.uses_classifier and model.config.adapter_layers:
            predictions = layer_predictions(model, utterances, prompt, self.threads)
            last = predictions[max(predictions)]
            truth = np.array([u.language_id for u in utterances])
            lang_acc = float((last == truth).mean())
        return token_acc, lang_acc

    def train(
        self,
        on_epoch: Optional[EpochCallback] = None,
        on_checkpoint: Optional[Callable[[Checkpoint], None]] = None,
    ) -> TrainingResult:
        """
        Run all epochs, snapshot after each, then average the best k

        Raises:
            DivergenceError: On a non-finite loss (epoch and step attached)
        """
        train_cfg = self.config.train
        result = TrainingResult()
        logger.info(
            f"Training variant={train_cfg.variant.value} epochs={train_cfg.epochs} "
            f"params={self.model.params.num_parameters()}"
        )
        for epoch in range(1, train_cfg.epochs + 1):
            log = self.run_epoch(epoch)
            checkpoint = Checkpoint(
                params=self.model.params.state_dict(),
                epoch=epoch,
                val_token_acc=log.val_token_acc,
                val_lang_acc=log.val_lang_acc,
                config_hash=self.config_hash,
            )
            result.logs.append(log)
            result.checkpoints.append(checkpoint)
            lang = "n/a" if log.val_lang_acc is None else f"{log.val_lang_acc:.4f}"
            logger.info(
                f"Epoch {epoch}: loss={log.train_loss:.4f} ctc={log.ctc:.4f} att={log.att:.4f} "
                f"lang={log.lang:.4f} val_token_acc={log.val_token_acc:.4f} val_lang_acc={lang}"
            )
            if on_epoch:
                on_epoch(log)
            if on_checkpoint:
                on_checkpoint(checkpoint)

        result.averaged = average_checkpoints(result.checkpoints, train_cfg.k_average)
        return result


def select_best(checkpoints: Sequence[Checkpoint], k: int) -> List[Checkpoint]:
    """
    Top k by validation token accuracy; ties go to the earlier epoch

    The order depends only on checkpoint contents, never on list order.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(checkpoints) < k:
        raise ValueError(f"need at least {k} checkpoints, got {len(checkpoints)}")
    ranked = sorted(checkpoints, key=lambda c: (-c.val_token_acc, c.epoch, c.config_hash))
    return ranked[:k]


def average_checkpoints(checkpoints: Sequence[Checkpoint], k: int) -> Checkpoint:
    """
    Element-wise mean of the k best checkpoints

    Computed as base + sum(x_i - base) / k with base the best checkpoint, so
    k identical inputs return the base bit-for-bit.

    Raises:
        CheckpointMismatchError: If parameter names or shapes disagree across
            any of the inputs, selected or not
    """
    reference = checkpoints[0] if checkpoints else None
    for other in checkpoints[1:]:
        if set(other.params) != set(reference.params):
            missing = sorted(set(reference.params).symmetric_difference(other.params))[0]
            raise CheckpointMismatchError(missing, f"parameter missing from epoch {other.epoch} or {reference.epoch}")
        for name, value in reference.params.items():
            if np.shape(other.params[name]) != np.shape(value):
                raise CheckpointMismatchError(
                    name, f"shape {np.shape(other.params[name])} != {np.shape(value)}"
                )

    selected = select_best(checkpoints, k)
    base = selected[0]
    averaged = {}
    for name, value in base.params.items():
        delta = np.zeros_like(value, dtype=np.float64)
        for other in selected:
            delta = delta + (np.asarray(other.params[name], dtype=np.float64) - value)
        averaged[name] = value + delta / len(selected)

    lang_values = [c.val_lang_acc for c in selected if c.val_lang_acc is not None]
    logger.info(f"Averaged epochs {[c.epoch for c in selected]}")
    return Checkpoint(
        params=averaged,
        epoch=0,
        val_token_acc=float(np.mean([c.val_token_acc for c in selected])),
        val_lang_acc=float(np.mean(lang_values)) if lang_values else None,
        config_hash=base.config_hash,
        extra={"averaged_epochs": [c.epoch for c in selected]},
    )
