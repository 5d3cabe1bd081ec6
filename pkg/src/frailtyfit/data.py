"""Clustered right-censored survival data, CSV ingestion and risk sets."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np


class DataError(ValueError):
    """Raised for malformed or invalid survival data."""


class Subject(NamedTuple):
    time: float
    status: int
    covariates: tuple[float, ...]
    cluster_id: int


@dataclass(frozen=True, eq=False)
class ClusteredSurvivalData:
    """Columnar container for clustered right-censored observations.

    Parameters
    ----------
    time : ndarray, shape (n,)
        Observed times ``min(t, c)``; strictly positive.
    status : ndarray, shape (n,)
        Event indicator, 1 for an observed event and 0 for censoring.
    X : ndarray, shape (n, p)
        Covariate matrix.
    cluster : ndarray, shape (n,)
        Dense cluster index in ``[0, g)``.
    labels : tuple, optional
        Original cluster labels, ``labels[k]`` is the label of cluster ``k``.
    """

    time: np.ndarray
    status: np.ndarray
    X: np.ndarray
    cluster: np.ndarray
    labels: tuple = ()

    def __post_init__(self):
        time = np.ascontiguousarray(self.time, dtype=float)
        status = np.ascontiguousarray(self.status, dtype=np.int64)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        X = np.ascontiguousarray(X)
        cluster = np.ascontiguousarray(self.cluster, dtype=np.int64)

        n = time.shape[0]
        if time.ndim != 1 or status.shape != (n,) or cluster.shape != (n,) or X.shape[0] != n:
            raise DataError("time, status, X and cluster must have matching lengths")
        if n == 0:
            raise DataError("empty dataset")
        if not np.all(np.isfinite(time)) or np.any(time <= 0):
            raise DataError("times must be finite and > 0")
        if not np.all((status == 0) | (status == 1)):
            raise DataError("status must be 0 or 1")
        if not np.all(np.isfinite(X)):
            raise DataError("covariates must be finite")
        if status.sum() == 0:
            raise DataError("no events in data")
        g = int(cluster.max()) + 1 if n else 0
        if cluster.min() < 0 or np.unique(cluster).size != g:
            raise DataError("cluster ids must cover [0, g) densely")
        if g < 2:
            raise DataError("at least 2 clusters are required")

        for name, arr in (("time", time), ("status", status), ("X", X), ("cluster", cluster)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(g)))

    @property
    def n(self) -> int:
        return self.time.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def g(self) -> int:
        return int(self.cluster.max()) + 1

    @property
    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.cluster, minlength=self.g)

    @property
    def events_per_cluster(self) -> np.ndarray:
        """``d_i``, the number of events in each cluster."""
        return np.bincount(self.cluster, weights=self.status, minlength=self.g).astype(np.int64)

    def subjects(self) -> Iterator[Subject]:
        for k in range(self.n):
            yield Subject(float(self.time[k]), int(self.status[k]),
                          tuple(float(v) for v in self.X[k]), int(self.cluster[k]))

    def take(self, index: np.ndarray) -> "ClusteredSurvivalData":
        """Subset/reorder rows; cluster ids are kept as they are."""
        index = np.asarray(index)
        return ClusteredSurvivalData(self.time[index], self.status[index], self.X[index],
                                     self.cluster[index], self.labels)


def from_subjects(subjects: Sequence[Subject]) -> ClusteredSurvivalData:
    time = [s.time for s in subjects]
    status = [s.status for s in subjects]
    X = [s.covariates for s in subjects]
    clusters, labels = _reindex([s.cluster_id for s in subjects])
    return ClusteredSurvivalData(np.array(time), np.array(status), np.array(X, dtype=float),
                                 clusters, labels)


def _reindex(raw: Sequence) -> tuple[np.ndarray, tuple]:
    # Dense ids in order of first appearance.
    mapping: dict = {}
    ids = np.empty(len(raw), dtype=np.int64)
    for k, label in enumerate(raw):
        ids[k] = mapping.setdefault(label, len(mapping))
    return ids, tuple(mapping)


def load_csv(path: str | Path) -> ClusteredSurvivalData:
    """Read a ``cluster,time,status,x1..xp`` CSV file.

    Cluster labels are arbitrary strings and get re-indexed densely in order of
    first appearance. Every validation failure raises :class:`DataError` whose
    message names the offending (1-based, header excluded) row.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError("empty file") from None
        for col in ("cluster", "time", "status"):
            if col not in header:
                raise DataError(f"missing column '{col}'")
        if header[:3] != ["cluster", "time", "status"]:
            raise DataError("header must start with cluster,time,status")
        covs = header[3:]
        for k, name in enumerate(covs, start=1):
            if name != f"x{k}":
                raise DataError(f"unexpected column '{name}', expected 'x{k}'")

        raw_cluster, times, status, rows = [], [], [], []
        for row_no, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"wrong number of fields, row {row_no}")
            label = row[0].strip()
            try:
                t = float(row[1])
                s = float(row[2])
                x = [float(c) for c in row[3:]]
            except ValueError:
                raise DataError(f"non-numeric cell, row {row_no}") from None
            if not math.isfinite(t) or t <= 0:
                raise DataError(f"invalid time (must be > 0), row {row_no}")
            if s not in (0.0, 1.0):
                raise DataError(f"invalid status, row {row_no}")
            if not all(math.isfinite(v) for v in x):
                raise DataError(f"non-finite covariate, row {row_no}")
            raw_cluster.append(label)
            times.append(t)
            status.append(int(s))
            rows.append(x)

    if not times:
        raise DataError("no data rows")
    clusters, labels = _reindex(raw_cluster)
    if len(labels) < 2:
        raise DataError(f"fewer than 2 clusters, row {len(times)}")
    X = np.array(rows, dtype=float).reshape(len(times), len(covs))
    return ClusteredSurvivalData(np.array(times), np.array(status), X, clusters, labels)


def write_csv(data: ClusteredSurvivalData, path: str | Path) -> None:
    header = ["cluster", "time", "status"] + [f"x{k}" for k in range(1, data.p + 1)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(data.n):
            w.writerow([data.labels[data.cluster[k]], repr(float(data.time[k])),
                        int(data.status[k])] + [repr(float(v)) for v in data.X[k]])


@dataclass(frozen=True, eq=False)
class RiskSetIndex:
    """Distinct event times and their risk sets, stored compactly.

    Subjects are kept sorted by ascending time in ``order``; the risk set of
    the ``v``-th distinct event time is ``order[start[v]:]``.

    Attributes
    ----------
    event_times : ndarray, shape (r,)
        Ordered distinct event times.
    deaths : ndarray, shape (r,)
        Number of events ``d_(v)`` at each distinct time.
    order : ndarray, shape (n,)
        Subject indices sorted by ascending time.
    start : ndarray, shape (r,)
        Position in ``order`` of the first subject with ``y >= event_times[v]``.
    n_known : ndarray, shape (n,)
        For each subject, the number of distinct event times ``<= y``; the
        subject belongs to the risk sets ``0 .. n_known - 1``.
    event_slot : ndarray, shape (n,)
        For events, the index ``v`` of their event time; -1 when censored.
    """

    event_times: np.ndarray
    deaths: np.ndarray
    order: np.ndarray
    start: np.ndarray
    n_known: np.ndarray
    event_slot: np.ndarray

    @property
    def r(self) -> int:
        return self.event_times.shape[0]

    def risk_set(self, v: int) -> np.ndarray:
        return np.sort(self.order[self.start[v]:])

    def sizes(self) -> np.ndarray:
        return self.order.shape[0] - self.start


def build_risk_sets(data: ClusteredSurvivalData) -> RiskSetIndex:
    """Index the risk sets ``R(y_(v)) = {subjects with y >= y_(v)}``.

    Tied event times collapse into one distinct time whose ``d_(v)`` counts
    the multiplicity. Subjects censored exactly at an event time remain in
    that time's risk set.
    """
    ev = data.status == 1
    if not ev.any():
        raise DataError("no events in data")
    event_times, deaths = np.unique(data.time[ev], return_counts=True)
    order = np.argsort(data.time, kind="stable")
    start = np.searchsorted(data.time[order], event_times, side="left")
    n_known = np.searchsorted(event_times, data.time, side="right")
    event_slot = np.where(ev, n_known - 1, -1)
    for arr in (event_times, deaths, order, start, n_known, event_slot):
        arr.setflags(write=False)
    return RiskSetIndex(event_times, deaths.astype(np.int64), order, start, n_known, event_slot)
