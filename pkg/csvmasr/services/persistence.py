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
Persistence Service

Owns every on-disk format: corpus JSON-lines, checkpoint files, CSV
reports and the run manifest.
"""

import csv
import json
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from loguru import logger

from csvmasr import __version__
from csvmasr.config.schema import CorpusConfig
from csvmasr.errors import CheckpointMismatchError
from csvmasr.models.checkpoint import Checkpoint, EpochLog
from csvmasr.models.corpus import SPLITS, CorpusSplits, Utterance, Vocabulary
from csvmasr.models.reports import RunManifest
from csvmasr.utils.os_util import PathLike, ensure_dir, sha256_file

CHECKPOINT_FORMAT = "csvmasr-checkpoint"
CHECKPOINT_VERSION = 1
PAYLOAD_DTYPE = np.dtype("<f4")

TRAIN_LOG_COLUMNS = ["epoch", "train_loss", "ctc", "att", "lang", "val_token_acc", "val_lang_acc"]
WER_COLUMNS = ["variant", "prompt", "decode_mode", "language", "wer"]
LCA_COLUMNS = ["variant", "layer", "language", "accuracy"]
SWEEP_COLUMNS = ["variant", "language", "k", "mean_wer", "ci95"]
TWO_HOT_COLUMNS = ["variant", "decode_mode", "prompted", "language", "wer"]


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


class PersistenceService:
    """
    Filesystem persistence for one output directory

    File structure:
        {output_dir}/
        ├── manifest.json          # RunManifest (the only timestamped file)
        ├── run.log
        ├── epoch_001.ckpt ...     # train
        ├── avg.ckpt
        ├── train_log.csv
        ├── wer_report.csv         # eval
        ├── lca_report.csv
        ├── two_hot.csv
        ├── sweep.csv              # sweep
        └── sweep.svg

    Usage:
        persistence = PersistenceService("runs/run1")
        persistence.save_checkpoint(checkpoint, persistence.path("avg.ckpt"))
        checkpoint = PersistenceService.load_checkpoint("runs/run1/avg.ckpt")
    """

    def __init__(self, output_dir: Optional[PathLike] = None):
        """
        Initialize persistence service

        Args:
            output_dir: Directory for run artefacts (created on demand);
                None for read-only use
        """
        self.output_dir = Path(output_dir) if output_dir is not None else None
        if self.output_dir is not None:
            ensure_dir(self.output_dir)

    def path(self, name: str) -> Path:
        if self.output_dir is None:
            raise ValueError("PersistenceService has no output directory")
        return self.output_dir / name

    # ========================================================================
    # Corpus
    # ========================================================================

    @staticmethod
    def save_corpus(splits: CorpusSplits, path: PathLike):
        """
        Write the corpus as JSON-lines

        Line 1 is {"type": "header", "config": ..., "vocabulary": ...}; every
        following line is one utterance. Identical corpora serialize to
        identical bytes.
        """
        path = Path(path)
        ensure_dir(path.parent)
        header = {
            "type": "header",
            "config": splits.config.model_dump(mode="json"),
            "vocabulary": splits.vocabulary.to_map(),
        }
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(_dumps(header) + "\n")
            for split in SPLITS:
                for utterance in splits.split(split):
                    f.write(_dumps({
                        "type": "utterance",
                        "split": split,
                        "utterance_id": utterance.utterance_id,
                        "language_id": utterance.language_id,
                        "transcript": list(utterance.transcript),
                        "features": utterance.features.tolist(),
                    }) + "\n")
        logger.debug(f"Saved corpus: {path}")

    @staticmethod
    def load_corpus(path: PathLike) -> CorpusSplits:
        """
        Read a corpus written by save_corpus

        Raises:
            ValueError: If the header line is missing or malformed
            pydantic.ValidationError: If the header config is invalid
        """
        path = Path(path)
        with open(path, "r", encoding="utf-8") as f:
            first = f.readline()
            if not first:
                raise ValueError(f"Corpus file is empty: {path}")
            header = json.loads(first)
            if header.get("type") != "header":
                raise ValueError(f"Corpus file lacks a header line: {path}")
            config = CorpusConfig.model_validate(header["config"])
            splits = CorpusSplits(
                config=config,
                vocabulary=Vocabulary(config.num_languages, config.tokens_per_language),
            )
            for line in f:
                if not line.strip():
                    continue
                record = json.loads(line)
                splits.split(record["split"]).append(Utterance(
                    utterance_id=record["utterance_id"],
                    language_id=int(record["language_id"]),
                    transcript=tuple(int(t) for t in record["transcript"]),
                    features=np.array(record["features"], dtype=np.float64),
                ))
        logger.debug(f"Loaded corpus {path}: {len(splits.train)}/{len(splits.val)}/{len(splits.test)}")
        return splits

    # ========================================================================
    # Checkpoints
    # ========================================================================

    @staticmethod
    def save_checkpoint(checkpoint: Checkpoint, path: PathLike):
        """
        One JSON header line, then little-endian float32 payloads

        The header holds the metadata and a directory of
        {name, shape, offset} entries; offsets are byte positions relative
        to the first payload byte, in directory order.
        """
        path = Path(path)
        ensure_dir(path.parent)
        directory = []
        payloads = []
        offset = 0
        for name, value in checkpoint.params.items():
            data = np.ascontiguousarray(value, dtype=PAYLOAD_DTYPE).tobytes()
            directory.append({"name": name, "shape": list(np.shape(value)), "offset": offset})
            payloads.append(data)
            offset += len(data)
        header = {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "metadata": checkpoint.metadata(),
            "tensors": directory,
        }
        with open(path, "wb") as f:
            f.write(_dumps(header).encode("utf-8") + b"\n")
            for data in payloads:
                f.write(data)
        logger.debug(f"Saved checkpoint: {path} ({len(directory)} tensors)")

    @staticmethod
    def load_checkpoint(path: PathLike) -> Checkpoint:
        """
        Raises:
            CheckpointMismatchError: If a tensor payload is truncated
            ValueError: If the file is not a csvmasr checkpoint
        """
        path = Path(path)
        with open(path, "rb") as f:
            header = json.loads(f.readline().decode("utf-8"))
            payload = f.read()
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"Not a csvmasr checkpoint: {path}")

        params: Dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            start = entry["offset"]
            end = start + count * PAYLOAD_DTYPE.itemsize
            if end > len(payload):
                raise CheckpointMismatchError(entry["name"], "payload truncated")
            values = np.frombuffer(payload[start:end], dtype=PAYLOAD_DTYPE)
            params[entry["name"]] = values.astype(np.float64).reshape(shape)

        metadata = dict(header["metadata"])
        return Checkpoint(
            params=params,
            epoch=int(metadata.pop("epoch")),
            val_token_acc=float(metadata.pop("val_token_acc")),
            val_lang_acc=metadata.pop("val_lang_acc"),
            config_hash=metadata.pop("config_hash"),
            extra=metadata,
        )

    # ========================================================================
    # CSV reports
    # ========================================================================

    @staticmethod
    def _write_rows(path: Path, columns: Sequence[str], rows: Iterable[Dict[str, Any]]):
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=list(columns), lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({c: "" if row.get(c) is None else row.get(c) for c in columns})

    def write_train_log(self, logs: Sequence[EpochLog], name: str = "train_log.csv") -> Path:
        path = self.path(name)
        self._write_rows(path, TRAIN_LOG_COLUMNS, (log.as_row() for log in logs))
        return path

    def merge_report(
        self,
        name: str,
        columns: Sequence[str],
        rows: Sequence[Dict[str, Any]],
        key: Sequence[str],
    ) -> Path:
        """
        Upsert rows into a CSV report

        Existing rows whose key columns match a new row are replaced in
        place; other new rows are appended. This lets eval runs with
        different prompts accumulate into one wer_report.csv.
        """
        path = self.path(name)
        fresh = [{c: "" if r.get(c) is None else str(r[c]) for c in columns} for r in rows]
        by_key = {tuple(r[k] for k in key): r for r in fresh}

        merged: List[Dict[str, Any]] = []
        if path.exists():
            with open(path, "r", encoding="utf-8", newline="") as f:
                for existing in csv.DictReader(f):
                    row_key = tuple(existing.get(k, "") for k in key)
                    merged.append(by_key.pop(row_key, existing))
        merged.extend(r for r in fresh if tuple(r[k] for k in key) in by_key)
        self._write_rows(path, columns, merged)
        logger.info(f"Wrote {len(fresh)} rows to {path}")
        return path

    @staticmethod
    def read_report(path: PathLike) -> List[Dict[str, str]]:
        with open(path, "r", encoding="utf-8", newline="") as f:
            return list(csv.DictReader(f))

    # ========================================================================
    # Manifest
    # ========================================================================

    def save_manifest(
        self,
        command: str,
        config: Dict[str, Any],
        inputs: Sequence[PathLike] = (),
        created_at: Optional[datetime] = None,
    ) -> RunManifest:
        """Write manifest.json, replacing any previous one in this directory"""
        manifest = RunManifest(
            command=command,
            config=config,
            inputs={str(p): sha256_file(p) for p in inputs},
            tool_version=__version__,
            created_at=(created_at or datetime.now()).isoformat(),
            completed_at=datetime.now().isoformat(),
        )
        path = self.path("manifest.json")
        try:
            with open(path, "w", encoding="utf-8") as f:
                f.write(manifest.model_dump_json(indent=2))
        except Exception as e:
            logger.error(f"Failed to save manifest {path}: {e}")
            raise
        logger.debug(f"Saved manifest: {path}")
        return manifest

    def load_manifest(self) -> Optional[RunManifest]:
        path = self.path("manifest.json")
        if not path.exists():
            return None
        with open(path, "r", encoding="utf-8") as f:
            return RunManifest.model_validate_json(f.read())
