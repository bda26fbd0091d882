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
Evaluation harness

WER, per-adapter-layer language classification accuracy and the prompting
experiments (prompt sweep, 2-hot matrix, configurability gap).
"""

import itertools
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from csvmasr.models.corpus import Utterance
from csvmasr.models.outputs import Batch
from csvmasr.models.reports import (
    AGGREGATE,
    LayerAccuracyReport,
    PromptSweepResult,
    SweepRow,
    TwoHotMatrix,
    WerReport,
)
from csvmasr.models.routing import LidMask, Prompt
from csvmasr.services.corpus import bucket_by_length
from csvmasr.services.model import CsvMasrModel
from csvmasr.utils.parallel import ordered_map

DECODE_MODES = ("ar", "nar")
Tokens = Sequence[int]
MaskFn = Callable[[Utterance], LidMask]


def decode_modes(setting: str) -> Tuple[str, ...]:
    """"ar", "nar" or "both" -> tuple of modes"""
    if setting == "both":
        return DECODE_MODES
    if setting not in DECODE_MODES:
        raise ValueError(f"decode mode must be ar, nar or both, got {setting}")
    return (setting,)


# ============================================================================
# WER
# ============================================================================

def edit_distance(reference: Tokens, hypothesis: Tokens) -> int:
    """Levenshtein distance with unit costs"""
    previous = list(range(len(hypothesis) + 1))
    for i, ref_token in enumerate(reference, start=1):
        current = [i] + [0] * len(hypothesis)
        for j, hyp_token in enumerate(hypothesis, start=1):
            current[j] = min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ref_token != hyp_token),
            )
        previous = current
    return previous[-1]


def wer(references: Sequence[Tokens], hypotheses: Sequence[Tokens]) -> float:
    """
    Corpus WER in percent: summed edits over summed reference tokens

    Examples:
        ref (a, b, c), hyp (a, x, c) -> 33.33
        ref (a, b, c), hyp (a, c)    -> 33.33

    Raises:
        ValueError: On unequal list lengths or zero reference tokens
    """
    if len(references) != len(hypotheses):
        raise ValueError(f"{len(references)} references vs {len(hypotheses)} hypotheses")
    total = sum(len(r) for r in references)
    if total == 0:
        raise ValueError("WER is undefined for an empty reference corpus")
    edits = sum(edit_distance(r, h) for r, h in zip(references, hypotheses))
    return 100.0 * edits / total


# ============================================================================
# Decoding
# ============================================================================

def _mask_fn(prompt: Union[Prompt, MaskFn], num_languages: int) -> MaskFn:
    if isinstance(prompt, Prompt):
        return lambda u: prompt.mask_for(u.language_id, num_languages)
    return prompt


def _bucketed(
    model: CsvMasrModel,
    utterances: Sequence[Utterance],
    prompt: Union[Prompt, MaskFn],
    fn: Callable[[Batch], list],
    threads: int,
) -> list:
    """Apply fn to equal-length batches and return per-utterance results in input order"""
    masks_for = _mask_fn(prompt, model.config.num_languages)
    position = {id(u): i for i, u in enumerate(utterances)}
    buckets = list(bucket_by_length(utterances).values())

    def run(bucket: List[Utterance]):
        batch = Batch.from_utterances(bucket, [masks_for(u) for u in bucket])
        return fn(batch)

    results: list = [None] * len(utterances)
    for bucket, outputs in zip(buckets, ordered_map(run, buckets, threads)):
        for utterance, output in zip(bucket, outputs):
            results[position[id(utterance)]] = output
    return results


def decode_utterances(
    model: CsvMasrModel,
    utterances: Sequence[Utterance],
    prompt: Union[Prompt, MaskFn],
    decode_mode: str,
    threads: int = 1,
    width: int = None,
) -> List[Tuple[int, ...]]:
    """
    Transcribe utterances under a prompt

    Args:
        prompt: A Prompt resolved per utterance, or a function returning the
            mask of each utterance
        decode_mode: "ar" (beam search) or "nar" (CTC greedy)
    """
    if decode_mode == "nar":
        return _bucketed(
            model, utterances, prompt,
            lambda b: model.transcribe_nar(b.features, b.masks), threads,
        )
    if decode_mode == "ar":
        return _bucketed(
            model, utterances, prompt,
            lambda b: [r.transcript for r in model.transcribe_ar(b.features, b.masks, width=width)],
            threads,
        )
    raise ValueError(f"decode mode must be ar or nar, got {decode_mode}")


def decode_nar(model: CsvMasrModel, utterances: Sequence[Utterance], prompt: Prompt, threads: int = 1):
    return decode_utterances(model, utterances, prompt, "nar", threads)


def layer_predictions(
    model: CsvMasrModel,
    utterances: Sequence[Utterance],
    prompt: Prompt,
    threads: int = 1,
) -> Dict[int, np.ndarray]:
    """Predicted language per adapter layer, arrays in input order"""
    per_utterance = _bucketed(
        model, utterances, prompt,
        lambda b: _transpose(model.language_predictions(b.features, b.masks), b.size),
        threads,
    )
    layers = sorted(per_utterance[0]) if per_utterance else []
    return {layer: np.array([p[layer] for p in per_utterance]) for layer in layers}


def _transpose(predictions: Dict[int, np.ndarray], size: int) -> List[Dict[int, int]]:
    return [{layer: int(values[b]) for layer, values in predictions.items()} for b in range(size)]


# ============================================================================
# Reports
# ============================================================================

def evaluate_wer(
    model: CsvMasrModel,
    utterances: Sequence[Utterance],
    prompt: Prompt,
    modes: Sequence[str] = DECODE_MODES,
    threads: int = 1,
) -> WerReport:
    """Per-language and aggregate WER for each decode mode"""
    report = WerReport(variant=model.config.variant.value, prompt=str(prompt))
    for mode in modes:
        hypotheses = decode_utterances(model, utterances, prompt, mode, threads)
        per_language: Dict[str, float] = {}
        for language in sorted({u.language_id for u in utterances}):
            indices = [i for i, u in enumerate(utterances) if u.language_id == language]
            per_language[str(language)] = wer(
                [utterances[i].transcript for i in indices], [hypotheses[i] for i in indices]
            )
        per_language[AGGREGATE] = wer([u.transcript for u in utterances], hypotheses)
        report.wer[mode] = per_language
        logger.info(f"{report.variant} {prompt} {mode}: WER {per_language[AGGREGATE]:.2f}")
    return report


def layer_classification_accuracy(
    model: CsvMasrModel,
    utterances: Sequence[Utterance],
    prompt: Prompt,
    threads: int = 1,
) -> LayerAccuracyReport:
    """
    Percent of utterances whose language is predicted correctly, per
    adapter layer, per language and overall

    Raises:
        ValueError: If the model has no adapter classifiers
    """
    if not model.config.variant.uses_classifier or not model.config.adapter_layers:
        raise ValueError(f"variant '{model.config.variant.value}' has no language classifiers")
    if not utterances:
        raise ValueError("no utterances to classify")

    predictions = layer_predictions(model, utterances, prompt, threads)
    truth = np.array([u.language_id for u in utterances])
    report = LayerAccuracyReport(variant=model.config.variant.value)
    for layer, predicted in predictions.items():
        correct = predicted == truth
        per_language = {
            str(language): 100.0 * float(correct[truth == language].mean())
            for language in sorted(set(truth.tolist()))
        }
        per_language[AGGREGATE] = 100.0 * float(correct.mean())
        report.accuracy[layer] = per_language
    return report


def ci95(values: Sequence[float]) -> float:
    """1.96 times the standard error of the mean; 0 for a single value"""
    if len(values) < 2:
        return 0.0
    return float(1.96 * np.std(values, ddof=1) / np.sqrt(len(values)))


def prompt_sweep(
    model: CsvMasrModel,
    utterances: Sequence[Utterance],
    decode_mode: str,
    threads: int = 1,
) -> PromptSweepResult:
    """
    WER against the number of additional prompted languages

    For every k in 0..L-1 each of the C(L-1, k) masks holding the ground
    truth plus k other languages is evaluated; row k reports the mean and
    1.96 x standard error across those masks.

    Raises:
        ValueError: On an empty or mixed-language utterance list
    """
    languages = {u.language_id for u in utterances}
    if len(languages) != 1:
        raise ValueError(f"prompt_sweep needs utterances of exactly one language, got {sorted(languages)}")
    language = languages.pop()
    num_languages = model.config.num_languages
    others = [i for i in range(num_languages) if i != language]
    references = [u.transcript for u in utterances]

    result = PromptSweepResult(
        variant=model.config.variant.value, language=language, decode_mode=decode_mode
    )
    for k in range(num_languages):
        values = []
        for extra in itertools.combinations(others, k):
            mask = LidMask.from_active((language,) + extra, num_languages)
            hypotheses = decode_utterances(model, utterances, lambda u, m=mask: m, decode_mode, threads)
            value = wer(references, hypotheses)
            result.mask_wer[mask.to_bitstring()] = value
            values.append(value)
        result.rows.append(SweepRow(
            num_additional=k,
            num_masks=len(values),
            mean_wer=float(np.mean(values)),
            ci95=ci95(values),
        ))
        logger.debug(f"sweep language={language} k={k}: {len(values)} masks, mean WER {np.mean(values):.2f}")
    return result


def two_hot_matrix(
    model: CsvMasrModel,
    utterances: Sequence[Utterance],
    decode_mode: str,
    threads: int = 1,
) -> TwoHotMatrix:
    """
    Entry (i, j): WER on language-j utterances prompted with {i, j}

    The diagonal is the 1-hot WER.
    """
    num_languages = model.config.num_languages
    matrix = TwoHotMatrix(variant=model.config.variant.value, decode_mode=decode_mode)
    by_language = {
        j: [u for u in utterances if u.language_id == j] for j in range(num_languages)
    }
    for i in range(num_languages):
        matrix.entries[i] = {}
        for j, subset in by_language.items():
            if not subset:
                continue
            mask = LidMask.from_active({i, j}, num_languages)
            hypotheses = decode_utterances(model, subset, lambda u, m=mask: m, decode_mode, threads)
            matrix.entries[i][j] = wer([u.transcript for u in subset], hypotheses)
    return matrix


def configurability_gap(all_hot: WerReport, one_hot: WerReport, decode_mode: str = "nar") -> float:
    """All-hot minus 1-hot aggregate WER, in percentage points"""
    return all_hot.aggregate(decode_mode) - one_hot.aggregate(decode_mode)
