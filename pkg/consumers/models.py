# consumers/models.py
"""Data formats shared by the stand-in consumer programs"""
import io
import json
from dataclasses import dataclass
from typing import List

import numpy as np

MODEL_FORMAT = "feature-means/v1"


def parse_samples(raw_data: bytes) -> np.ndarray:
    """CSV rows of numeric features -> 2-D float array"""
    text = raw_data.decode("utf-8").strip()
    if not text:
        return np.empty((0, 0))
    return np.loadtxt(io.StringIO(text), delimiter=",", ndmin=2)


def format_samples(samples: np.ndarray) -> bytes:
    buffer = io.StringIO()
    np.savetxt(buffer, np.atleast_2d(samples), delimiter=",", fmt="%.6f")
    return buffer.getvalue().encode("utf-8")


@dataclass
class FeatureMeansModel:
    """Per-feature means; the deterministic stand-in for a trained classifier"""
    feature_means: List[float]
    entries: int

    @classmethod
    def fit(cls, samples: np.ndarray) -> "FeatureMeansModel":
        return cls([float(v) for v in samples.mean(axis=0)], int(samples.shape[0]))

    def refine(self, samples: np.ndarray) -> "FeatureMeansModel":
        """Means over the union of the original entries and the new samples"""
        if samples.size == 0:
            return FeatureMeansModel(list(self.feature_means), self.entries)
        total = self.entries + samples.shape[0]
        means = (np.asarray(self.feature_means) * self.entries + samples.sum(axis=0)) / total
        return FeatureMeansModel([float(v) for v in means], int(total))

    def predict(self, features) -> float:
        """Mean absolute deviation of the features from the learned means"""
        return float(np.mean(np.abs(np.asarray(features, dtype=float) - np.asarray(self.feature_means))))

    def to_bytes(self) -> bytes:
        return json.dumps({"format": MODEL_FORMAT, "feature_means": self.feature_means,
                           "entries": self.entries}).encode("utf-8")

    @classmethod
    def from_bytes(cls, data: bytes) -> "FeatureMeansModel":
        document = json.loads(data.decode("utf-8"))
        if document.get("format") != MODEL_FORMAT:
            raise ValueError(f"not a {MODEL_FORMAT} model")
        return cls(list(document["feature_means"]), int(document["entries"]))
