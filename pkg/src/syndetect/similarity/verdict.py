"""Rejector scores, calibrated thresholds and the fused accept/reject verdict.

Boundary comparisons are strict: the deep-metric rejector triggers iff its
dissimilarity exceeds ``dmm_max``; SSIM triggers iff the index falls below
``ssim_min``; the quality rejector triggers iff its score falls below
``dis_min``. Ties accept. Any single trigger rejects.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core.errors import DataError, ShapeError

REJECTORS = ("dmm", "ssim", "dis")


def _as_array(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    return np.atleast_1d(arr)


@dataclass(frozen=True)
class RejectorScores:
    dmm_dissimilarity: np.ndarray  # in [0, 1]
    ssim_value: np.ndarray         # in [-1, 1]
    dis_score: np.ndarray          # unbounded

    def __post_init__(self) -> None:
        for name in ("dmm_dissimilarity", "ssim_value", "dis_score"):
            object.__setattr__(self, name, _as_array(getattr(self, name)))
        n = len(self.dmm_dissimilarity)
        if not (len(self.ssim_value) == len(self.dis_score) == n):
            raise ShapeError("rejector score arrays must share a length")
        for name in ("dmm_dissimilarity", "ssim_value", "dis_score"):
            if not np.isfinite(getattr(self, name)).all():
                raise ShapeError(f"RejectorScores.{name}: non-finite values")

    def __len__(self) -> int:
        return len(self.dmm_dissimilarity)

    def subset(self, idx) -> "RejectorScores":
        return RejectorScores(self.dmm_dissimilarity[idx], self.ssim_value[idx], self.dis_score[idx])

    @staticmethod
    def concatenate(parts: "list[RejectorScores]") -> "RejectorScores":
        return RejectorScores(
            np.concatenate([p.dmm_dissimilarity for p in parts]),
            np.concatenate([p.ssim_value for p in parts]),
            np.concatenate([p.dis_score for p in parts]),
        )


@dataclass(frozen=True)
class ThresholdSet:
    dmm_max: float
    ssim_min: float
    dis_min: float
    target_fpr: float

    def save(self, path: "Path | str", dataset: str = "") -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "dataset": dataset,
            "target_fpr": self.target_fpr,
            "dmm_max": self.dmm_max,
            "ssim_min": self.ssim_min,
            "dis_min": self.dis_min,
        }
        path.write_text(json.dumps(payload, indent=2) + "\n")
        return path

    @staticmethod
    def load(path: "Path | str") -> "tuple[ThresholdSet, str]":
        path = Path(path)
        if not path.is_file():
            raise DataError(f"threshold file not found: {path}")
        payload = json.loads(path.read_text())
        t = ThresholdSet(
            dmm_max=float(payload["dmm_max"]),
            ssim_min=float(payload["ssim_min"]),
            dis_min=float(payload["dis_min"]),
            target_fpr=float(payload["target_fpr"]),
        )
        return t, payload.get("dataset", "")


@dataclass(frozen=True)
class Verdict:
    rejected: bool
    scores: tuple[float, float, float]  # (dmm, ssim, dis)
    triggered: frozenset
    predicted_label: int


def trigger_masks(scores: RejectorScores, t: ThresholdSet) -> dict[str, np.ndarray]:
    return {
        "dmm": scores.dmm_dissimilarity > t.dmm_max,
        "ssim": scores.ssim_value < t.ssim_min,
        "dis": scores.dis_score < t.dis_min,
    }


def rejection_mask(scores: RejectorScores, t: ThresholdSet) -> np.ndarray:
    masks = trigger_masks(scores, t)
    return masks["dmm"] | masks["ssim"] | masks["dis"]


def fuse(
    scores: RejectorScores,
    t: ThresholdSet,
    predicted_labels=None,
) -> list[Verdict]:
    """Per-sample verdicts; rejected iff at least one rejector triggered."""
    masks = trigger_masks(scores, t)
    labels = np.full(len(scores), -1) if predicted_labels is None else np.asarray(predicted_labels)
    verdicts = []
    for i in range(len(scores)):
        triggered = frozenset(name for name in REJECTORS if masks[name][i])
        verdicts.append(
            Verdict(
                rejected=bool(triggered),
                scores=(
                    float(scores.dmm_dissimilarity[i]),
                    float(scores.ssim_value[i]),
                    float(scores.dis_score[i]),
                ),
                triggered=triggered,
                predicted_label=int(labels[i]),
            )
        )
    return verdicts
