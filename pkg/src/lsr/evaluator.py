"""PSNR/SSIM evaluation of LSR against the Lanczos baseline.

Each HR image is modcropped, bicubic down-sampled by 2 and brought back to
HR size by the Lanczos baseline and by LSR. Both estimates are scored with
the same PSNR/SSIM functions on the luma channel.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import pandas as pd

from lsr.decision.pipeline import LsrModel, superresolve
from lsr.imaging import ImagePair, YImage, psnr, read_image, ssim

BASELINE = "lanczos"
METHOD = "lsr"


class Evaluator:
    """Scores a model on one or more HR datasets.

    Attributes:
        model: Trained model (None scores the baseline only).
        shave: Border pixels excluded from the metrics.
        verbose: Print per-image scores.
        warnings: Images that could not be read.
    """

    def __init__(self, model: Optional[LsrModel] = None, shave: int = 2, verbose: bool = False):
        self.model = model
        self.shave = shave
        self.verbose = verbose
        self.warnings: List[str] = []

    def score_image(self, hr: YImage) -> Dict[str, Tuple[float, float]]:
        """(PSNR, SSIM) per method for one HR image."""
        pair = ImagePair.from_hr(hr)
        estimates = {BASELINE: pair.ilr}
        if self.model is not None:
            estimates[METHOD] = superresolve(self.model, pair.lr)
        return {
            name: (psnr(pair.hr, est, self.shave), ssim(pair.hr, est, self.shave))
            for name, est in estimates.items()
        }

    def evaluate(
        self, images: Sequence[Union[Tuple[str, YImage], str, Path]], dataset: str = ""
    ) -> pd.DataFrame:
        """Per-image scores as rows ``dataset, image, method, psnr, ssim``."""
        rows = []
        for item in images:
            if isinstance(item, tuple):
                name, hr = item
            else:
                try:
                    hr, _ = read_image(item)
                except (OSError, ValueError) as e:
                    self.warnings.append(f"skipping unreadable image {item}: {e}")
                    continue
                name = Path(item).name
            for method, (p, s) in self.score_image(hr).items():
                rows.append(
                    {"dataset": dataset, "image": name, "method": method, "psnr": p, "ssim": s}
                )
                if self.verbose:
                    print(f"{dataset}/{name} {method}: PSNR {format_psnr(p)} dB, SSIM {s:.4f}")
        return pd.DataFrame(rows, columns=["dataset", "image", "method", "psnr", "ssim"])


def summarize(scores: pd.DataFrame) -> pd.DataFrame:
    """Mean PSNR/SSIM per dataset and method."""
    if scores.empty:
        return pd.DataFrame(columns=["dataset", "method", "images", "psnr", "ssim"])
    grouped = scores.groupby(["dataset", "method"], sort=False)
    summary = grouped.agg(
        images=("image", "count"), psnr=("psnr", "mean"), ssim=("ssim", "mean")
    ).reset_index()
    return summary


def format_psnr(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.2f}"


def to_text(frame: pd.DataFrame) -> str:
    """Aligned text table with PSNR to 2 and SSIM to 4 decimals."""
    shown = frame.copy()
    if "psnr" in shown:
        shown["psnr"] = shown["psnr"].map(format_psnr)
    if "ssim" in shown:
        shown["ssim"] = shown["ssim"].map(lambda v: f"{v:.4f}")
    return shown.to_string(index=False)


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> None:
    """CSV with minimal RFC-4180 quoting; infinite PSNR is written as ``inf``."""
    frame.to_csv(path, index=False, lineterminator="\n")
