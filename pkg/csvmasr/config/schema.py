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
Configuration schema with Pydantic models

Single source of truth for all configuration defaults and validation.
"""
import hashlib
import json
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

# Reserved token ids; content tokens start at NUM_RESERVED_TOKENS
BLANK_ID = 0
SOS_ID = 1
EOS_ID = 2
NUM_RESERVED_TOKENS = 3


class RoutingVariant(str, Enum):
    """Routing variant, valued by its CLI name"""
    BASELINE = "baseline"
    LIDCONCAT = "lidconcat"
    UNIFORM = "uniform"
    FRAMEWISE = "framewise"
    SUMMARY_VECTOR = "csv"

    @property
    def uses_adapters(self) -> bool:
        return self in (RoutingVariant.UNIFORM, RoutingVariant.FRAMEWISE, RoutingVariant.SUMMARY_VECTOR)

    @property
    def uses_classifier(self) -> bool:
        return self in (RoutingVariant.FRAMEWISE, RoutingVariant.SUMMARY_VECTOR)


class CorpusConfig(BaseModel):
    """Synthetic multilingual corpus"""
    num_languages: int = Field(default=3, ge=2, description="Number of languages L")
    tokens_per_language: int = Field(default=10, ge=1, description="Content tokens per language V")
    d_feat: int = Field(default=16, ge=1, description="Feature dimension per frame")
    frames_per_token: int = Field(default=3, ge=1, description="Frames emitted per token k")
    noise_sigma: float = Field(default=0.1, ge=0.0, description="Gaussian feature noise std")
    transcript_len_range: Tuple[int, int] = Field(
        default=(3, 10), description="Inclusive transcript length range"
    )
    train_per_language: int = Field(default=200, ge=1, description="Train utterances per language")
    val_per_language: int = Field(default=40, ge=1, description="Validation utterances per language")
    test_per_language: int = Field(default=40, ge=1, description="Test utterances per language")
    prototype_std: float = Field(default=1.0, gt=0.0, description="Token prototype std")
    bias_magnitude: float = Field(default=1.0, gt=0.0, description="Std of the per-channel language bias")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Corpus seed")

    @field_validator("transcript_len_range")
    @classmethod
    def _check_range(cls, value: Tuple[int, int]) -> Tuple[int, int]:
        low, high = value
        if low < 1 or high < low:
            raise ValueError(f"transcript_len_range must satisfy 1 <= min <= max, got {value}")
        return value

    @property
    def vocab_size(self) -> int:
        return NUM_RESERVED_TOKENS + self.num_languages * self.tokens_per_language


class EncoderConfig(BaseModel):
    """Micro-Conformer encoder"""
    num_layers: int = Field(default=6, ge=1, description="Number of Conformer layers N")
    d_model: int = Field(default=32, ge=1, description="Hidden size")
    num_heads: int = Field(default=2, ge=1, description="Attention heads")
    ffn_dim: int = Field(default=64, ge=1, description="Feed-forward inner size")
    conv_kernel: int = Field(default=7, ge=1, description="Depthwise kernel size (odd)")
    adapter_layers: List[int] = Field(default=[2, 4], description="1-based layers holding adapters")
    rel_pos_clip: int = Field(default=32, ge=1, description="Relative distance clip")

    @model_validator(mode="after")
    def _check_shapes(self) -> "EncoderConfig":
        if self.d_model % self.num_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by num_heads {self.num_heads}")
        if self.conv_kernel % 2 == 0:
            raise ValueError(f"conv_kernel must be odd, got {self.conv_kernel}")
        layers = self.adapter_layers
        if any(b <= a for a, b in zip(layers, layers[1:])):
            raise ValueError(f"adapter_layers must be strictly increasing, got {layers}")
        if layers and (layers[0] < 1 or layers[-1] > self.num_layers):
            raise ValueError(f"adapter_layers must lie in 1..{self.num_layers}, got {layers}")
        return self


class AdapterConfig(BaseModel):
    """Language-specific adapter experts"""
    bottleneck_dim: int = Field(default=8, ge=1, description="Adapter inner size r")


class DecoderConfig(BaseModel):
    """Attention decoder and decoding"""
    num_layers: int = Field(default=2, ge=1, description="Transformer decoder layers")
    max_decode_len: int = Field(default=32, ge=2, description="Max generated tokens (eos included)")
    beam_width: int = Field(default=4, ge=1, description="Beam width for AR decoding")


class LossConfig(BaseModel):
    """Loss weights: (1-lambda)(beta*CTC + (1-beta)*Att) + lambda*Lang"""
    lambda_: float = Field(default=0.5, ge=0.0, le=1.0, alias="lambda", description="Language loss weight")
    beta: float = Field(default=0.3, ge=0.0, le=1.0, description="CTC weight inside the ASR loss")

    model_config = {"populate_by_name": True}


class TrainConfig(BaseModel):
    """Optimization and checkpoint selection"""
    variant: RoutingVariant = Field(default=RoutingVariant.SUMMARY_VECTOR, description="Routing variant")
    p_insert: float = Field(default=0.5, ge=0.0, le=1.0, description="Probability of inserting a wrong LID")
    learning_rate: float = Field(default=1e-3, ge=0.0, description="Adam learning rate (0 freezes the parameters)")
    epochs: int = Field(default=50, ge=1, description="Training epochs")
    batch_size: int = Field(default=8, ge=1, description="Utterances per batch")
    k_average: int = Field(default=3, ge=1, description="Checkpoints averaged")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Training seed")
    precision: int = Field(default=64, description="Float width for training (32 or 64)")
    val_prompt: str = Field(default="allhot", description="Prompt used for validation metrics")
    languages: Optional[List[int]] = Field(default=None, description="Restrict training to these language ids")

    @field_validator("precision")
    @classmethod
    def _check_precision(cls, value: int) -> int:
        if value not in (32, 64):
            raise ValueError(f"precision must be 32 or 64, got {value}")
        return value

    @model_validator(mode="after")
    def _check_average(self) -> "TrainConfig":
        if self.k_average > self.epochs:
            raise ValueError(f"k_average {self.k_average} exceeds epochs {self.epochs}")
        return self


class EvalConfig(BaseModel):
    """Evaluation defaults"""
    prompt: str = Field(default="1hot", description="1hot, allhot, nogt or mask=<bits>")
    decode_mode: str = Field(default="both", description="ar, nar or both")
    split: str = Field(default="test", description="Corpus split evaluated")
    write_svg: bool = Field(default=True, description="Emit the sweep chart")

    @field_validator("decode_mode")
    @classmethod
    def _check_mode(cls, value: str) -> str:
        if value not in ("ar", "nar", "both"):
            raise ValueError(f"decode_mode must be ar, nar or both, got {value}")
        return value


class RuntimeConfig(BaseModel):
    """Process-level settings"""
    threads: int = Field(default=1, ge=1, description="Worker threads (1 keeps runs bit-reproducible)")
    log_level: str = Field(default="INFO", description="Console log level")


class ModelConfig(BaseModel):
    """Everything needed to build model parameters"""
    variant: RoutingVariant = RoutingVariant.SUMMARY_VECTOR
    d_feat: int = Field(default=16, ge=1)
    num_languages: int = Field(default=3, ge=2)
    vocab_size: int = Field(default=33, ge=NUM_RESERVED_TOKENS + 1)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    adapters: AdapterConfig = Field(default_factory=AdapterConfig)
    decoder: DecoderConfig = Field(default_factory=DecoderConfig)

    @property
    def adapter_layers(self) -> List[int]:
        """Adapter layers in effect (none for baseline and LIDConcat)"""
        return list(self.encoder.adapter_layers) if self.variant.uses_adapters else []


class CsvMasrConfig(BaseModel):
    """csvmasr main configuration"""
    project_name: str = Field(default="csvmasr", description="Project name")
    corpus: CorpusConfig = Field(default_factory=CorpusConfig)
    encoder: EncoderConfig = Field(default_factory=EncoderConfig)
    adapters: AdapterConfig = Field(default_factory=AdapterConfig)
    decoder: DecoderConfig = Field(default_factory=DecoderConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    runtime: RuntimeConfig = Field(default_factory=RuntimeConfig)

    @model_validator(mode="after")
    def _transcripts_fit_decoder(self):
        # training feeds sos + transcript through the decoder positional table
        longest = self.corpus.transcript_len_range[1]
        if longest + 1 > self.decoder.max_decode_len:
            raise ValueError(
                f"decoder.max_decode_len ({self.decoder.max_decode_len}) must exceed the "
                f"longest transcript ({longest})"
            )
        return self

    def model_config_for(self, corpus: Optional[CorpusConfig] = None) -> ModelConfig:
        """Resolve model dimensions against a corpus (defaults to self.corpus)"""
        corpus = corpus or self.corpus
        return ModelConfig(
            variant=self.train.variant,
            d_feat=corpus.d_feat,
            num_languages=corpus.num_languages,
            vocab_size=corpus.vocab_size,
            encoder=self.encoder,
            adapters=self.adapters,
            decoder=self.decoder,
        )

    def to_dict(self) -> dict:
        """Convert to a JSON-compatible dictionary"""
        return self.model_dump(mode="json", by_alias=True)

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form"""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
