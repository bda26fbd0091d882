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
Hybrid CTC/attention model

Ties the encoder, routing, decoder and losses to one ParamStore.

Usage:
    model = CsvMasrModel.initialize(model_config, seed=0)
    breakdown = model.forward_losses(batch, LossConfig())
    hyps = model.transcribe_nar(batch.features, batch.masks)
"""

from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from csvmasr.config.schema import EOS_ID, SOS_ID, LossConfig, ModelConfig, RoutingVariant
from csvmasr.models.outputs import Batch, DecodeResult, EncoderOutput, LossBreakdown
from csvmasr.numerics import ParamStore, Program, Tensor, ops
from csvmasr.numerics.params import normal, ones, xavier_uniform, zeros
from csvmasr.services import encoder as encoder_ops
from csvmasr.services import losses, seq2seq

Params = Mapping[str, Tensor]


class CsvMasrModel:
    """
    Model configuration plus parameter values

    Parameter tensors are created per call from the store: with
    requires_grad for training programs, constant for inference (which
    then records no graph).
    """

    def __init__(self, config: ModelConfig, params: ParamStore):
        self.config = config
        self.params = params

    # ========================================================================
    # Construction
    # ========================================================================

    @classmethod
    def initialize(cls, config: ModelConfig, seed: int = 0) -> "CsvMasrModel":
        """Fresh parameters, inserted in a fixed order from a seeded generator"""
        rng = np.random.default_rng(seed)
        store = ParamStore()
        builder = _ParamBuilder(store, rng)
        enc = config.encoder
        dim = enc.d_model
        input_dim = config.d_feat + (config.num_languages if config.variant == RoutingVariant.LIDCONCAT else 0)

        builder.linear("encoder.input", input_dim, dim)
        store.add("encoder.sv", normal(rng, (dim,), 0.1))
        adapter_layers = set(config.adapter_layers)
        for n in range(1, enc.num_layers + 1):
            prefix = f"encoder.layers.{n}"
            builder.feed_forward(f"{prefix}.ff1", dim, enc.ffn_dim)
            builder.attention(f"{prefix}.attn", dim)
            store.add(f"{prefix}.attn.rel_bias", zeros((2 * enc.rel_pos_clip + 2, enc.num_heads)))
            builder.norm(f"{prefix}.conv.norm", dim)
            builder.linear(f"{prefix}.conv.pw1", dim, 2 * dim)
            store.add(f"{prefix}.conv.dw.weight", normal(rng, (enc.conv_kernel, dim), 1.0 / np.sqrt(enc.conv_kernel)))
            store.add(f"{prefix}.conv.dw.bias", zeros(dim))
            builder.norm(f"{prefix}.conv.dw_norm", dim)
            builder.linear(f"{prefix}.conv.pw2", dim, dim)
            builder.feed_forward(f"{prefix}.ff2", dim, enc.ffn_dim)
            builder.norm(f"{prefix}.final_norm", dim)
            if n in adapter_layers:
                for i in range(config.num_languages):
                    builder.linear(f"{prefix}.adapters.{i}.down", dim, config.adapters.bottleneck_dim)
                    builder.linear(f"{prefix}.adapters.{i}.up", config.adapters.bottleneck_dim, dim)
                if config.variant.uses_classifier:
                    builder.linear(f"{prefix}.classifier", dim, config.num_languages)

        builder.linear("ctc", dim, config.vocab_size)

        store.add("decoder.embed", normal(rng, (config.vocab_size, dim), 1.0))
        store.add("decoder.pos", normal(rng, (config.decoder.max_decode_len, dim), 0.1))
        for n in range(1, config.decoder.num_layers + 1):
            prefix = f"decoder.layers.{n}"
            builder.attention(f"{prefix}.self_attn", dim)
            builder.attention(f"{prefix}.cross_attn", dim)
            builder.feed_forward(f"{prefix}.ff", dim, enc.ffn_dim)
        builder.norm("decoder.final_norm", dim)
        builder.linear("decoder.out", dim, config.vocab_size)
        return cls(config, store)

    def with_params(self, params: ParamStore) -> "CsvMasrModel":
        return CsvMasrModel(self.config, params)

    def tensors(self, requires_grad: bool = False) -> Dict[str, Tensor]:
        return self.params.tensors(requires_grad)

    # ========================================================================
    # Forward pieces
    # ========================================================================

    def encode(
        self,
        features: np.ndarray,
        masks: np.ndarray,
        p: Optional[Params] = None,
        trace: bool = False,
    ) -> EncoderOutput:
        p = self.tensors() if p is None else p
        return encoder_ops.encode(p, features, masks, self.config, trace=trace)

    def ctc_log_probs(self, encoded: EncoderOutput, p: Optional[Params] = None) -> Tensor:
        """(B, T+1, V) log-distributions over all rows, SV row included"""
        p = self.tensors() if p is None else p
        return ops.log_softmax(ops.linear(encoded.frames, p["ctc.weight"], p["ctc.bias"]), axis=-1)

    def decoder_logits(self, memory: Tensor, prefix: np.ndarray, p: Optional[Params] = None) -> Tensor:
        p = self.tensors() if p is None else p
        return seq2seq.decoder_forward(p, memory, prefix, self.config)

    def forward_losses(self, batch: Batch, loss_config: LossConfig, p: Optional[Params] = None) -> LossBreakdown:
        """All loss components for a batch; total_tensor carries the graph"""
        p = self.tensors() if p is None else p
        encoded = self.encode(batch.features, batch.masks, p)

        ctc = ops.mean(losses.batch_ctc_loss(self.ctc_log_probs(encoded, p), batch.transcripts))

        att = self._attention_loss(encoded, batch.transcripts, p)

        if self.config.variant.uses_classifier:
            lang = losses.language_loss(encoded.language_logits(), batch.language_ids)
        else:
            lang = Tensor(0.0)
        return losses.total_loss(ctc, att, lang, loss_config)

    def _attention_loss(self, encoded: EncoderOutput, transcripts: Sequence[tuple], p: Params) -> Tensor:
        """Teacher-forced cross-entropy averaged over every target token of the batch"""
        groups: Dict[int, List[int]] = {}
        for b, transcript in enumerate(transcripts):
            groups.setdefault(len(transcript), []).append(b)
        if len(groups) == 1:
            decoder_in = np.array([(SOS_ID,) + tuple(t) for t in transcripts], dtype=np.int64)
            decoder_out = np.array([tuple(t) + (EOS_ID,) for t in transcripts], dtype=np.int64)
            return losses.attention_loss(self.decoder_logits(encoded.frames, decoder_in, p), decoder_out)

        # transcripts of unequal length: sum per length group, then normalize
        total, tokens = None, 0
        for length, rows in sorted(groups.items()):
            memory = ops.index(encoded.frames, np.array(rows))
            decoder_in = np.array([(SOS_ID,) + tuple(transcripts[b]) for b in rows], dtype=np.int64)
            decoder_out = np.array([tuple(transcripts[b]) + (EOS_ID,) for b in rows], dtype=np.int64)
            nll = ops.sum(ops.cross_entropy(self.decoder_logits(memory, decoder_in, p), decoder_out))
            total = nll if total is None else ops.add(total, nll)
            tokens += decoder_out.size
        return ops.mul(total, 1.0 / tokens)

    def loss_program(self, batch: Batch, loss_config: LossConfig) -> Program:
        """Scalar total loss as a program over parameter tensors"""
        def program(p: Params) -> Tensor:
            return self.forward_losses(batch, loss_config, p).total_tensor
        return program

    # ========================================================================
    # Decoding
    # ========================================================================

    def transcribe_nar(self, features: np.ndarray, masks: np.ndarray) -> List[tuple]:
        """CTC greedy transcripts for a batch of equal-length utterances"""
        p = self.tensors()
        log_probs = self.ctc_log_probs(self.encode(features, masks, p), p).data
        return [seq2seq.ctc_greedy(row) for row in log_probs]

    def step_function(self, memory: Tensor, p: Optional[Params] = None) -> seq2seq.StepFn:
        """Next-token log-probabilities for a batch of prefixes over one utterance"""
        p = self.tensors() if p is None else p

        def step(prefixes: np.ndarray) -> np.ndarray:
            logits = self.decoder_logits(memory, prefixes, p)
            return ops.log_softmax(ops.index(logits, (slice(None), -1)), axis=-1).data

        return step

    def transcribe_ar(
        self,
        features: np.ndarray,
        masks: np.ndarray,
        width: Optional[int] = None,
        length_normalize: bool = True,
    ) -> List[DecodeResult]:
        """Beam-search transcripts, one DecodeResult per utterance"""
        width = self.config.decoder.beam_width if width is None else width
        p = self.tensors()
        encoded = self.encode(features, masks, p)
        results = []
        for b in range(encoded.frames.shape[0]):
            memory = ops.index(encoded.frames, slice(b, b + 1))
            results.append(seq2seq.beam_search(
                self.step_function(memory, p),
                width,
                self.config.decoder.max_decode_len,
                length_normalize=length_normalize,
            ))
        return results

    def language_predictions(self, features: np.ndarray, masks: np.ndarray) -> Dict[int, np.ndarray]:
        """
        Per adapter layer, the predicted language of every utterance

        csv: argmax of the SV classifier logits. Framewise: per-frame argmax
        then majority vote (ties go to the smaller language id).
        """
        encoded = self.encode(features, masks)
        predictions = {}
        for record in encoded.routing_records:
            if record.logits is None:
                continue
            logits = record.logits.data
            if logits.ndim == 3:
                frame_votes = logits.argmax(axis=-1)
                predictions[record.layer] = np.array([
                    np.bincount(votes, minlength=self.config.num_languages).argmax()
                    for votes in frame_votes
                ])
            else:
                predictions[record.layer] = logits.argmax(axis=-1)
        return predictions


class _ParamBuilder:
    """Adds standard parameter groups to a store"""

    def __init__(self, store: ParamStore, rng: np.random.Generator):
        self.store = store
        self.rng = rng

    def linear(self, prefix: str, fan_in: int, fan_out: int):
        self.store.add(f"{prefix}.weight", xavier_uniform(self.rng, fan_in, fan_out))
        self.store.add(f"{prefix}.bias", zeros(fan_out))

    def norm(self, prefix: str, dim: int):
        self.store.add(f"{prefix}.gamma", ones(dim))
        self.store.add(f"{prefix}.beta", zeros(dim))

    def feed_forward(self, prefix: str, dim: int, hidden: int):
        self.norm(f"{prefix}.norm", dim)
        self.store.add(f"{prefix}.w1", xavier_uniform(self.rng, dim, hidden))
        self.store.add(f"{prefix}.b1", zeros(hidden))
        self.store.add(f"{prefix}.w2", xavier_uniform(self.rng, hidden, dim))
        self.store.add(f"{prefix}.b2", zeros(dim))

    def attention(self, prefix: str, dim: int):
        self.norm(f"{prefix}.norm", dim)
        for name in ("q", "k", "v", "o"):
            self.store.add(f"{prefix}.w{name}", xavier_uniform(self.rng, dim, dim))
            self.store.add(f"{prefix}.b{name}", zeros(dim))


def adapter_param_names(config: ModelConfig, language_id: int) -> List[str]:
    """Names of every adapter parameter owned by one language"""
    names = []
    for n in config.adapter_layers:
        for part in ("down", "up"):
            for leaf in ("weight", "bias"):
                names.append(f"encoder.layers.{n}.adapters.{language_id}.{part}.{leaf}")
    return names


def classifier_param_names(config: ModelConfig) -> Sequence[str]:
    """Classifier parameter names; weight columns and bias entries index languages"""
    if not config.variant.uses_classifier:
        return []
    return [
        f"encoder.layers.{n}.classifier.{leaf}"
        for n in config.adapter_layers
        for leaf in ("weight", "bias")
    ]
