"""Cosine scoring, enrollment, trial lists and equal error rate."""

import csv
import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import EmptyEnrollment, MalformedLine, OneClassOnly, ShapeError, ZeroVector

TARGET = "target"
NONTARGET = "nontarget"


def _as_vector(x):
    v = np.asarray(x, dtype=np.float64).ravel()
    n = np.linalg.norm(v)
    if not n > 0:
        raise ZeroVector("embedding has zero norm")
    return v, n


def cosine_score(a, b):
    va, na = _as_vector(a)
    vb, nb = _as_vector(b)
    if va.shape != vb.shape:
        raise ShapeError("cosine_score", va.shape, vb.shape)
    return float(np.clip(va @ vb / (na * nb), -1.0, 1.0))


@dataclass(frozen=True)
class SpeakerProfile:
    embedding: np.ndarray
    utterance_count: int

    def to_dict(self):
        return {"embedding": [float(x) for x in self.embedding],
                "utterance_count": self.utterance_count}

    @classmethod
    def from_dict(cls, d):
        v, n = _as_vector(d["embedding"])
        return cls(v / n, int(d["utterance_count"]))


def enroll(embeddings):
    """Profile = L2-normalized mean of the L2-normalized inputs."""
    embeddings = list(embeddings)
    if not embeddings:
        raise EmptyEnrollment("need at least one embedding")
    units = []
    for e in embeddings:
        v, n = _as_vector(e)
        if units and v.shape != units[0].shape:
            raise ShapeError("enroll", units[0].shape, v.shape)
        units.append(v / n)
    mean, n = _as_vector(np.mean(units, axis=0))
    return SpeakerProfile(mean / n, len(units))


class Trial(NamedTuple):
    label: str
    path_a: str
    path_b: str

    @property
    def is_target(self):
        return self.label == TARGET


def parse_trials(text):
    """Parse ``"label pathA pathB"`` lines; label 1 is target, 0 nontarget.

    Blank lines are skipped. Returns a list of ``Trial``.
    """
    trials = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 3 or fields[0] not in ("0", "1"):
            raise MalformedLine(line_no, line)
        trials.append(Trial(TARGET if fields[0] == "1" else NONTARGET, fields[1], fields[2]))
    if not trials:
        raise MalformedLine(0, "<empty trial list>")
    return trials


@dataclass
class ScoreSet:
    scores: np.ndarray
    labels: np.ndarray  # bool, True for target

    @classmethod
    def from_lists(cls, targets, nontargets):
        scores = np.concatenate([np.asarray(targets, float), np.asarray(nontargets, float)])
        labels = np.concatenate([np.ones(len(targets), bool), np.zeros(len(nontargets), bool)])
        return cls(scores, labels)


def error_rates(scores, labels):
    """FAR and FRR at every unique score plus one threshold above the maximum.

    FAR(t) = fraction of nontargets with score >= t; FRR(t) = fraction of
    targets with score < t.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    order = np.argsort(scores, kind="stable")
    s, lab = scores[order], labels[order]
    n_tar, n_non = lab.sum(), (~lab).sum()
    thresholds = np.unique(s)
    # Counts of each class strictly below each threshold.
    first = np.searchsorted(s, thresholds, side="left")
    tar_below = np.concatenate([[0], np.cumsum(lab)])[first]
    non_below = np.concatenate([[0], np.cumsum(~lab)])[first]
    frr = np.append(tar_below / n_tar, 1.0)
    far = np.append(1.0 - non_below / n_non, 0.0)
    thresholds = np.append(thresholds, np.nextafter(thresholds[-1], np.inf))
    return thresholds, far, frr


def compute_eer(scores, labels=None):
    """Equal error rate and its threshold.

    Accepts a ``ScoreSet`` or parallel ``scores``/``labels`` arrays. Between
    adjacent operating points FAR and FRR are interpolated linearly in the
    threshold; an operating point with FAR == FRR is returned exactly.
    """
    if isinstance(scores, ScoreSet):
        scores, labels = scores.scores, scores.labels
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if len(scores) != len(labels):
        raise ShapeError("compute_eer", len(scores), len(labels))
    if labels.all() or not labels.any():
        raise OneClassOnly("EER needs both target and nontarget scores")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    t, far, frr = error_rates(scores, labels)
    # FAR - FRR is nonincreasing, starts at 1 and ends at -1.
    i = int(np.argmax(frr >= far))
    if frr[i] == far[i]:
        return float(far[i]), float(t[i])
    da, db = far[i - 1] - frr[i - 1], far[i] - frr[i]
    alpha = da / (da - db)
    eer = far[i - 1] + alpha * (far[i] - far[i - 1])
    return float(eer), float(t[i - 1] + alpha * (t[i] - t[i - 1]))


def format_scores_csv(trials, scores):
    """CSV ``label,path_a,path_b,score`` with 6-decimal scores (label 1/0)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "path_a", "path_b", "score"])
    for trial, score in zip(trials, scores):
        w.writerow([1 if trial.is_target else 0, trial.path_a, trial.path_b, f"{score:.6f}"])
    return buf.getvalue()
