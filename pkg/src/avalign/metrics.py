"""Evaluation protocols for the grounding and fact-checking tasks.

Box tasks report cIoU (success rate at an IoU threshold) and AUC (mean
success over a 19-point threshold grid); temporal tasks report segment F1
at a temporal-IoU threshold; binary verification reports precision,
recall, F1 and accuracy with True as the positive class. Predictions that
failed to parse score zero rather than being dropped, so emitting garbage
can never help a model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from avalign.codec import BoundingBox, CodecError, TimeSegment

__all__ = [
    "ParseFailure",
    "EvalSample",
    "MetricReport",
    "box_iou",
    "ciou_at",
    "auc",
    "AUC_THRESHOLDS",
    "temporal_iou",
    "segment_f1",
    "binary_prf",
    "evaluate_boxes",
    "evaluate_segments",
    "evaluate_binary",
]

# 0.05, 0.10, ..., 0.95 as exact dyadic-free fractions k/20
AUC_THRESHOLDS = tuple(k / 20 for k in range(1, 20))


@dataclass(frozen=True)
class ParseFailure:
    """Marker for a prediction that could not be parsed."""

    kind: str = "unparseable"

    @classmethod
    def from_error(cls, err: CodecError) -> "ParseFailure":
        return cls(kind=type(err).__name__)


Prediction = BoundingBox | TimeSegment | bool | ParseFailure


@dataclass(frozen=True)
class EvalSample:
    id: str
    prediction: Prediction
    ground_truth: BoundingBox | TimeSegment | bool

    def __post_init__(self):
        if isinstance(self.prediction, ParseFailure):
            return
        if type(self.prediction) is not type(self.ground_truth):
            raise ValueError(
                f"sample {self.id}: prediction kind "
                f"{type(self.prediction).__name__} does not match ground truth "
                f"{type(self.ground_truth).__name__}"
            )


@dataclass(frozen=True)
class MetricReport:
    task: str
    metrics: dict[str, float]
    sample_count: int
    parse_failures: int
    extras: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name, value in self.metrics.items():
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"metric {name} out of [0,1]: {value}")
        if self.parse_failures > self.sample_count:
            raise ValueError("more failures than samples")

    def as_dict(self) -> dict:
        return {
            "task": self.task,
            "metrics": dict(self.metrics),
            "sample_count": self.sample_count,
            "parse_failures": self.parse_failures,
            **({"extras": dict(self.extras)} if self.extras else {}),
        }


def box_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area for two normalized boxes."""
    ix = max(0.0, min(a.x_right, b.x_right) - max(a.x_left, b.x_left))
    iy = max(0.0, min(a.y_bottom, b.y_bottom) - max(a.y_top, b.y_top))
    inter = ix * iy
    area_a = (a.x_right - a.x_left) * (a.y_bottom - a.y_top)
    area_b = (b.x_right - b.x_left) * (b.y_bottom - b.y_top)
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def _sample_iou(sample: EvalSample) -> float:
    if isinstance(sample.prediction, ParseFailure):
        return 0.0
    return box_iou(sample.prediction, sample.ground_truth)


def ciou_at(samples: list[EvalSample], tau: float = 0.5) -> float:
    """Fraction of samples whose box IoU reaches ``tau``; failures score 0."""
    if not samples:
        raise ValueError("cannot score an empty sample set")
    hits = sum(_sample_iou(s) >= tau for s in samples)
    return hits / len(samples)


def auc(samples: list[EvalSample]) -> float:
    """Mean success rate over the 19-point IoU threshold grid."""
    if not samples:
        raise ValueError("cannot score an empty sample set")
    return sum(ciou_at(samples, tau) for tau in AUC_THRESHOLDS) / len(AUC_THRESHOLDS)


def temporal_iou(a: TimeSegment, b: TimeSegment) -> float:
    """Overlap length over union length for two time segments."""
    inter = max(0.0, min(a.t_end, b.t_end) - max(a.t_start, b.t_start))
    union = max(a.t_end, b.t_end) - min(a.t_start, b.t_start)
    return inter / union if union > 0 else 0.0


def segment_f1(samples: list[EvalSample], tau: float = 0.5) -> float:
    """Segment-level F1 with one predicted and one true segment per sample.

    A prediction is a true positive iff its temporal IoU with the ground
    truth reaches ``tau``; a wrong segment counts as both a false positive
    and a false negative; a parse failure is a false negative only (no
    segment was emitted).
    """
    if not samples:
        raise ValueError("cannot score an empty sample set")
    tp = fp = fn = 0
    for s in samples:
        if isinstance(s.prediction, ParseFailure):
            fn += 1
        elif temporal_iou(s.prediction, s.ground_truth) >= tau:
            tp += 1
        else:
            fp += 1
            fn += 1
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def binary_prf(samples: list[EvalSample]) -> tuple[float, float, float, float]:
    """(precision, recall, f1, accuracy) with True as the positive class.

    A parse failure counts as the wrong label, so garbage hurts both
    precision and recall symmetrically.
    """
    if not samples:
        raise ValueError("cannot score an empty sample set")
    tp = fp = fn = tn = 0
    for s in samples:
        truth = s.ground_truth
        if isinstance(s.prediction, ParseFailure):
            pred = not truth
        else:
            pred = s.prediction
        if pred and truth:
            tp += 1
        elif pred and not truth:
            fp += 1
        elif not pred and truth:
            fn += 1
        else:
            tn += 1
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    accuracy = (tp + tn) / len(samples)
    return precision, recall, f1, accuracy


def _count_failures(samples: list[EvalSample]) -> int:
    return sum(isinstance(s.prediction, ParseFailure) for s in samples)


def evaluate_boxes(samples: list[EvalSample], tau: float = 0.5) -> MetricReport:
    return MetricReport(
        task="box",
        metrics={"ciou": ciou_at(samples, tau), "auc": auc(samples)},
        sample_count=len(samples),
        parse_failures=_count_failures(samples),
        extras={"tau": tau},
    )


def evaluate_segments(samples: list[EvalSample], tau: float = 0.5) -> MetricReport:
    return MetricReport(
        task="segment",
        metrics={"f1": segment_f1(samples, tau)},
        sample_count=len(samples),
        parse_failures=_count_failures(samples),
        extras={"tau": tau},
    )


def evaluate_binary(samples: list[EvalSample]) -> MetricReport:
    precision, recall, f1, accuracy = binary_prf(samples)
    return MetricReport(
        task="bool",
        metrics={
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "accuracy": accuracy,
        },
        sample_count=len(samples),
        parse_failures=_count_failures(samples),
    )
