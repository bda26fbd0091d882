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
Sweep chart rendering (SVG)
"""

from pathlib import Path
from typing import Sequence

from loguru import logger

from csvmasr.models.reports import PromptSweepResult
from csvmasr.utils.os_util import PathLike, ensure_dir


def write_sweep_svg(results: Sequence[PromptSweepResult], path: PathLike) -> Path:
    """
    Mean WER with 1.96 x SE error bars against the number of additional LIDs,
    one line per (variant, language)

    The SVG carries no date and a fixed id salt, so identical results give
    identical bytes.
    """
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams.update({
        "font.family": "DejaVu Sans",
        "axes.unicode_minus": False,
        "svg.hashsalt": "csvmasr",
    })
    import matplotlib.pyplot as plt

    path = Path(path)
    ensure_dir(path.parent)
    fig, ax = plt.subplots(figsize=(6, 4), constrained_layout=True)
    for result in results:
        xs = [row.num_additional for row in result.rows]
        ys = [row.mean_wer for row in result.rows]
        errors = [row.ci95 for row in result.rows]
        ax.errorbar(xs, ys, yerr=errors, marker="o", capsize=3,
                    label=f"{result.variant} L{result.language} ({result.decode_mode})")
    ax.set_xlabel("Additional LIDs in prompt")
    ax.set_ylabel("WER (%)")
    ax.grid(True, alpha=0.3)
    if results:
        ax.set_xticks(range(max(len(r.rows) for r in results)))
        ax.legend(loc="best", fontsize=8)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Wrote sweep chart: {path}")
    return path
