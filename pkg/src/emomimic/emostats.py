"""Per-condition emotion statistics and the affine distribution transform.

Given recognizer outputs over a multi-condition target corpus, this module
computes the per-condition mean vectors, recenters them on the synthesis
corpus mean, and rescales their spread to the within-speaker level via a
single scalar coefficient, yielding the vectors that condition the
synthesizer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .corpus import Manifest
from .emotion import EMOTION_MAX, EMOTION_MIN, N_DIMENSIONS
from .ser import SerModel, predict_manifest

logger = logging.getLogger(__name__)


class DegenerateTableError(ValueError):
    """The condition table cannot support the transform."""


@dataclass
class ConditionEmotionTable:
    """Per-condition mean emotion vectors plus the per-(speaker, condition)
    vectors they were averaged from.

    ``cell_vectors[(t, c)]`` holds one vector per speaker and condition;
    when a speaker contributes several utterances under one condition they
    are pre-averaged within the speaker, keeping speaker weights equal.
    ``missing_cells`` records (speaker, condition) pairs with no utterance.
    """

    condition_ids: list[str]
    speaker_ids: list[str]
    means: dict[str, np.ndarray]
    cell_vectors: dict[tuple[str, str], np.ndarray]
    missing_cells: list[tuple[str, str]] = field(default_factory=list)

    def mean_matrix(self) -> np.ndarray:
        """Condition means stacked in condition order, shape (|C|, 6)."""
        return np.vstack([self.means[c] for c in self.condition_ids])


@dataclass
class TransformParams:
    """Everything needed to apply the transform: e'_c = alpha * lam * (e_c - e) + a."""

    a: np.ndarray
    e: np.ndarray
    lam: float
    alpha: float
    v_speaker: np.ndarray
    v_condition: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        self.e = np.asarray(self.e, dtype=np.float64)
        for name, v in (("a", self.a), ("e", self.e)):
            if v.shape != (N_DIMENSIONS,):
                raise ValueError(f"{name} must be a {N_DIMENSIONS}-vector")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")


def condition_means(
    model: Optional[SerModel],
    manifest: Manifest,
    vectors: Optional[Sequence[np.ndarray]] = None,
) -> ConditionEmotionTable:
    """Average recognizer outputs per condition, one weight per speaker.

    ``vectors`` may carry precomputed per-record emotion vectors (aligned
    with manifest.records); otherwise the model recognizes each utterance.
    A speaker missing from a condition is excluded from that condition's
    mean with a warning; a condition with no utterances at all is an error.
    """
    if vectors is None:
        vectors = predict_manifest(model, manifest)
    if len(vectors) != len(manifest.records):
        raise ValueError("vectors must align with manifest records")

    cells: dict[tuple[str, str], list[np.ndarray]] = {}
    for rec, vec in zip(manifest.records, vectors):
        cells.setdefault((rec.speaker_id, rec.condition_id), []).append(np.asarray(vec, dtype=np.float64))

    cell_vectors = {key: np.mean(np.vstack(vs), axis=0) for key, vs in cells.items()}

    means: dict[str, np.ndarray] = {}
    missing: list[tuple[str, str]] = []
    for cond in manifest.condition_set:
        present = []
        for spk in manifest.speaker_set:
            if (spk, cond) in cell_vectors:
                present.append(cell_vectors[(spk, cond)])
            else:
                missing.append((spk, cond))
                logger.warning("speaker %s has no utterance under condition %s; excluded", spk, cond)
        if not present:
            raise DegenerateTableError(f"condition {cond!r} has no utterances")
        means[cond] = np.mean(np.vstack(present), axis=0)

    return ConditionEmotionTable(
        condition_ids=list(manifest.condition_set),
        speaker_ids=list(manifest.speaker_set),
        means=means,
        cell_vectors=cell_vectors,
        missing_cells=missing,
    )


def corpus_mean(
    model: Optional[SerModel],
    corpus: Manifest,
    vectors: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """Plain mean of recognizer outputs over every corpus utterance."""
    if not corpus.records:
        raise ValueError("empty synthesis corpus")
    if vectors is None:
        vectors = predict_manifest(model, corpus)
    if len(vectors) != len(corpus.records):
        raise ValueError("vectors must align with corpus records")
    return np.mean(np.vstack([np.asarray(v, dtype=np.float64) for v in vectors]), axis=0)


def compute_transform_params(
    table: ConditionEmotionTable, a: np.ndarray, alpha: float
) -> TransformParams:
    """Derive the transform: target mean, variance components, and lambda.

    Both variance components are population variances across conditions.
    v_speaker averages each speaker's across-condition variance (speakers
    missing a condition are averaged over the conditions they do have);
    v_condition is the variance of the condition means. lambda is the
    single scalar sqrt(sum(v_speaker) / sum(v_condition)).
    """
    n_cond = len(table.condition_ids)
    if n_cond < 2:
        raise DegenerateTableError(f"need at least 2 conditions, got {n_cond}")
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")

    mean_matrix = table.mean_matrix()
    e = mean_matrix.mean(axis=0)

    per_speaker = []
    for spk in table.speaker_ids:
        rows = [table.cell_vectors[(spk, c)] for c in table.condition_ids if (spk, c) in table.cell_vectors]
        if rows:
            per_speaker.append(np.var(np.vstack(rows), axis=0))
    if not per_speaker:
        raise DegenerateTableError("no speaker has any condition cell")
    v_speaker = np.mean(np.vstack(per_speaker), axis=0)
    v_condition = np.var(mean_matrix, axis=0)

    sum_ve = float(np.sum(v_condition))
    if sum_ve == 0.0:
        raise DegenerateTableError("all condition means are identical; transform undefined")
    lam = float(np.sqrt(np.sum(v_speaker) / sum_ve))

    return TransformParams(
        a=np.asarray(a, dtype=np.float64),
        e=e,
        lam=lam,
        alpha=float(alpha),
        v_speaker=v_speaker,
        v_condition=v_condition,
    )


def apply_transform(params: TransformParams, e_c: np.ndarray, clamp: bool = False) -> np.ndarray:
    """e'_c = alpha * lambda * (e_c - e) + a.

    The result is not clamped by default: it conditions the synthesizer,
    whose input space extends linearly beyond the recognizer's [1, 7]
    range, and clamping would silently undo a deliberately exaggerated
    spread. Pass clamp=True to clip into [1, 7].
    """
    e_c = np.asarray(e_c, dtype=np.float64)
    if e_c.shape[-1] != N_DIMENSIONS:
        raise ValueError(f"expected {N_DIMENSIONS}-vector, got shape {e_c.shape}")
    if not np.all(np.isfinite(e_c)):
        raise ValueError("non-finite emotion vector")
    out = params.alpha * params.lam * (e_c - params.e) + params.a
    if clamp:
        out = np.clip(out, EMOTION_MIN, EMOTION_MAX)
    return out


def transformed_means(params: TransformParams, table: ConditionEmotionTable, clamp: bool = False) -> dict[str, np.ndarray]:
    """Apply the transform to every condition mean."""
    return {c: apply_transform(params, table.means[c], clamp=clamp) for c in table.condition_ids}
