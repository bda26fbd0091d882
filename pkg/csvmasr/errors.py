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
csvmasr exceptions

Library code raises these; only the CLI maps them to exit codes.
"""

from typing import Optional


class CsvMasrError(Exception):
    """Base class for all csvmasr errors"""


class NumericsError(CsvMasrError):
    """A non-finite value was produced by a tensor operation"""

    def __init__(self, op_name: str, detail: str = "non-finite value produced"):
        self.op_name = op_name
        super().__init__(f"{detail} in op '{op_name}'")


class ShapeError(CsvMasrError):
    """Operand shapes do not fit the operation"""

    def __init__(self, op_name: str, detail: str):
        self.op_name = op_name
        super().__init__(f"{op_name}: {detail}")


class EmptyUtteranceError(CsvMasrError):
    """An utterance without frames reached the encoder"""


class ForeignTokenError(CsvMasrError):
    """A transcript token does not belong to the utterance's language"""

    def __init__(self, token_id: int, language_id: int):
        self.token_id = token_id
        self.language_id = language_id
        super().__init__(f"token {token_id} does not belong to language {language_id}")


class InvalidMaskError(CsvMasrError):
    """A language mask with no active entry, or of the wrong length"""


class CtcInfeasibleError(CsvMasrError):
    """The target cannot be aligned to the available frames"""

    def __init__(self, target_length: int, required_frames: int, num_frames: int):
        self.target_length = target_length
        self.required_frames = required_frames
        self.num_frames = num_frames
        super().__init__(
            f"target of length {target_length} needs {required_frames} frames, "
            f"only {num_frames} available"
        )


class CheckpointMismatchError(CsvMasrError):
    """Checkpoints disagree on a tensor's name or shape"""

    def __init__(self, tensor_name: str, detail: str):
        self.tensor_name = tensor_name
        super().__init__(f"tensor '{tensor_name}': {detail}")


class DivergenceError(CsvMasrError):
    """Training produced a non-finite loss"""

    def __init__(self, epoch: int, step: int, op_name: Optional[str] = None):
        self.epoch = epoch
        self.step = step
        self.op_name = op_name
        where = f" (op '{op_name}')" if op_name else ""
        super().__init__(f"non-finite loss at epoch {epoch}, step {step}{where}")


class UsageError(CsvMasrError):
    """Bad command-line usage"""


class CorpusMismatchError(CsvMasrError):
    """A loaded corpus does not fit the model configuration"""

    def __init__(self, setting: str, detail: str):
        self.setting = setting
        super().__init__(f"{setting}: {detail}")
