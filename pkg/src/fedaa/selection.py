"""Distance-based client selection and the policy state it produces.

Selection scores each upload by its summed Euclidean distance to every
other upload and keeps the lowest-sum clients: outliers sit far from
the benign cluster, so large row sums flag suspicion. The normalized
row sums of the retained clients form the observation handed to the
weight policy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import ConfigError, SimulationError
from .data import round_half_up
from .nn import ArchSpec, layer_slices

SCOPES = ("all_layers", "last_hidden_layer")


@dataclass
class SelectionResult:
    selected_ids: list[int]          # ascending client ids
    state: np.ndarray                # normalized row sums, aligned with selected_ids
    raw_row_sums: np.ndarray         # unnormalized, aligned with selected_ids
    distance_matrix: np.ndarray | None = None  # full matrix, debug only


def top_count(m_percent: float, n_participants: int) -> int:
    """Round-half-up count of clients retained at m_percent, at least 1."""
    if not 0.0 < m_percent <= 100.0:
        raise ConfigError("m_percent must lie in (0, 100]")
    if n_participants < 1:
        raise ConfigError("n_participants must be >= 1")
    return max(1, round_half_up(m_percent * n_participants / 100.0))


def normalize_state(row_sums: np.ndarray) -> np.ndarray:
    """Min-max normalization to [0, 1]; a constant vector maps to zeros."""
    x = np.asarray(row_sums, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ConfigError("row sums must be a non-empty 1-D vector")
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def _scoped_vectors(
    uploads: dict[int, np.ndarray], ids: list[int], scope: str, arch: ArchSpec | None
) -> np.ndarray:
    vecs = []
    size = None
    for cid in ids:
        v = np.asarray(uploads[cid], dtype=np.float64).ravel()
        if size is None:
            size = v.size
        elif v.size != size:
            raise ConfigError(f"upload of client {cid} has size {v.size}, expected {size}")
        vecs.append(v)
    if scope == "last_hidden_layer":
        if arch is None:
            raise ConfigError("last_hidden_layer scope requires the model architecture")
        if size != sum(fi * fo + fo for fi, fo in arch.layer_dims()):
            raise ConfigError("uploads do not match the given architecture")
        if arch.hidden_dims:
            # weight and bias of the final hidden layer are adjacent in the flat layout
            wsl, bsl = layer_slices(arch)[len(arch.hidden_dims) - 1]
            vecs = [v[wsl.start : bsl.stop] for v in vecs]
        # no hidden layers: the full vector is the only sensible scope
    elif scope != "all_layers":
        raise ConfigError(f"unknown distance scope: {scope!r}")
    return np.stack(vecs)


def select_clients(
    uploads: dict[int, np.ndarray],
    m_percent: float,
    scope: str = "all_layers",
    arch: ArchSpec | None = None,
    keep_matrix: bool = False,
) -> SelectionResult:
    """Keep the m_percent of uploads with the smallest summed distances.

    Clients with non-finite uploads get +inf row sums and are never
    retained; finite clients' sums are taken over finite peers only.
    Ties break toward the smaller client id. Raises SimulationError if
    fewer finite uploads remain than the selection needs.
    """
    ids = sorted(int(k) for k in uploads)
    n = len(ids)
    if n < 2:
        raise ConfigError("selection needs at least 2 uploads")
    x = _scoped_vectors(uploads, ids, scope, arch)
    finite = np.isfinite(x).all(axis=1)
    count = top_count(m_percent, n)
    if int(finite.sum()) < count:
        raise SimulationError(
            f"only {int(finite.sum())} finite uploads for a selection of {count}"
        )
    matrix = np.zeros((n, n))
    good = np.flatnonzero(finite)
    if good.size >= 2:
        matrix[np.ix_(good, good)] = squareform(pdist(x[good]))
    if not finite.all():
        bad = np.flatnonzero(~finite)
        matrix[bad, :] = np.inf
        matrix[:, bad] = np.inf
        np.fill_diagonal(matrix, 0.0)
    sums = np.full(n, np.inf)
    sums[good] = matrix[np.ix_(good, good)].sum(axis=1)
    ids_arr = np.asarray(ids)
    order = np.lexsort((ids_arr, sums))  # row sum first, id breaks ties
    chosen = np.sort(ids_arr[order[:count]])
    keep_pos = np.searchsorted(ids_arr, chosen)
    raw = sums[keep_pos]
    return SelectionResult(
        selected_ids=[int(c) for c in chosen],
        state=normalize_state(raw),
        raw_row_sums=raw,
        distance_matrix=matrix if keep_matrix else None,
    )
