"""Latent embedding sets and the RBF similarity kernel over them.

The bandwidth is the median of the ``N(N-1)/2`` distinct pairwise
distances; self-distances are excluded. A zero median means the encoder
collapsed every point onto one location and is reported as
:class:`~qlstm_rbf.exceptions.DegenerateGeometryError` rather than
patched with an epsilon.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import recurrent
from ._io import read_rows, write_rows
from ._validation import check_coords
from .exceptions import DataError, DegenerateGeometryError


@dataclass
class EmbeddingSet:
    period_id: str
    entity_ids: List[str]
    coords: np.ndarray

    def __post_init__(self):
        self.entity_ids = [str(e) for e in self.entity_ids]
        self.coords = np.asarray(self.coords, dtype=float)
        if self.coords.shape != (len(self.entity_ids), recurrent.LATENT_DIM):
            raise DataError(
                f"coords shape {self.coords.shape} does not match {len(self.entity_ids)} entities x 2"
            )
        if len(set(self.entity_ids)) != len(self.entity_ids):
            raise DataError("entity ids must be unique")
        if not np.all(np.isfinite(self.coords)):
            raise DataError("embedding coordinates must be finite")


@dataclass
class KernelMatrix:
    entries: np.ndarray
    sigma: float
    entity_ids: Optional[List[str]] = None

    @property
    def size(self):
        return self.entries.shape[0]


def embed_all(model, sequences, period_id) -> EmbeddingSet:
    """Encode every sequence with a frozen model; row order follows input order.

    ``model`` is a fitted :class:`~qlstm_rbf.recurrent.QLSTMAutoencoder`
    (its input scaling is applied) or a bare
    :class:`~qlstm_rbf.recurrent.Seq2SeqModel`.
    """
    if len(sequences) == 0:
        raise DataError("no sequences to embed")
    ids = [getattr(s, "entity_id", str(i)) for i, s in enumerate(sequences)]
    values = [s.values if isinstance(s, recurrent.ReturnSequence) else np.asarray(s, float) for s in sequences]
    if len({len(v) for v in values}) != 1:
        raise DataError("sequences to embed must share one length")
    X = np.stack(values)
    if isinstance(model, recurrent.QLSTMAutoencoder):
        coords = model.transform(X)
    else:
        coords = recurrent.encode_batch(model, X)
    return EmbeddingSet(str(period_id), ids, coords)


def median_pairwise_distance(coords) -> float:
    coords = check_coords(coords)
    sigma = float(np.median(pdist(coords)))
    if sigma <= 0.0:
        raise DegenerateGeometryError(
            f"median pairwise distance is zero over {coords.shape[0]} points; "
            "the latent map has collapsed"
        )
    return sigma


def _gaussian(sq_dist, sigma):
    return np.exp(-sq_dist / (2.0 * sigma * sigma))


def rbf_kernel(embeddings) -> KernelMatrix:
    """``K_mn = exp(-|h_m - h_n|^2 / (2 sigma^2))``, sigma the median distance.

    Built from the condensed distance vector and mirrored, so the result
    is exactly symmetric with an exact unit diagonal.
    """
    if isinstance(embeddings, EmbeddingSet):
        coords, ids = embeddings.coords, embeddings.entity_ids
    else:
        coords, ids = check_coords(embeddings), None
    sigma = median_pairwise_distance(coords)
    entries = squareform(_gaussian(pdist(coords, "sqeuclidean"), sigma))
    np.fill_diagonal(entries, 1.0)
    return KernelMatrix(entries, sigma, ids)


def kernel_density(kernel) -> np.ndarray:
    """Per-point density ``(row sum - 1) / (N - 1)``, in [0, 1]."""
    K = kernel.entries if isinstance(kernel, KernelMatrix) else np.asarray(kernel)
    n = K.shape[0]
    return (K.sum(axis=1) - 1.0) / (n - 1)


class RBFKernel(TransformerMixin, BaseEstimator):
    """Median-bandwidth RBF kernel as a transformer.

    ``fit`` stores the reference points and their median pairwise
    distance; ``transform(Z)`` returns the ``(len(Z), n_ref)`` kernel
    against the reference points with that fixed bandwidth.
    """

    def fit(self, X, y=None):
        X = check_coords(X)
        self.sigma_ = median_pairwise_distance(X)
        self.reference_ = X
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "sigma_")
        X = check_coords(X, min_rows=1)
        return _gaussian(cdist(X, self.reference_, "sqeuclidean"), self.sigma_)

    def fit_transform(self, X, y=None):
        # mirrored construction keeps the self-kernel exactly symmetric
        self.fit(X)
        return rbf_kernel(self.reference_).entries


# --------------------------------------------------------------------------
# CSV interfaces


def write_embeddings_csv(path, embeddings: EmbeddingSet):
    rows = [
        (eid, float(x), float(y), embeddings.period_id)
        for eid, (x, y) in zip(embeddings.entity_ids, embeddings.coords)
    ]
    write_rows(path, ["entity_id", "x", "y", "period_id"], rows)


def read_embeddings_csv(path) -> EmbeddingSet:
    header, rows = read_rows(path)
    if header != ["entity_id", "x", "y", "period_id"]:
        raise DataError(f"{path}: unexpected embedding header {header}")
    periods = {r[3] for r in rows}
    if len(periods) != 1:
        raise DataError(f"{path}: expected one period, found {sorted(periods)}")
    return EmbeddingSet(periods.pop(), [r[0] for r in rows], [[float(r[1]), float(r[2])] for r in rows])


def write_kernel_csv(path, kernel: KernelMatrix):
    ids = kernel.entity_ids or [str(i) for i in range(kernel.size)]
    rows = [[eid] + [float(v) for v in row] for eid, row in zip(ids, kernel.entries)]
    write_rows(path, ["entity_id"] + list(ids), rows)


def read_kernel_csv(path):
    """Returns ``(entity_ids, entries)``."""
    header, rows = read_rows(path)
    ids = header[1:]
    if [r[0] for r in rows] != ids:
        raise DataError(f"{path}: row and column ids differ")
    return ids, np.array([[float(v) for v in r[1:]] for r in rows])


def write_density_csv(path, kernel: KernelMatrix):
    ids = kernel.entity_ids or [str(i) for i in range(kernel.size)]
    write_rows(path, ["entity_id", "density"], zip(ids, map(float, kernel_density(kernel))))
