"""Sparse labeled sample stores: svmlight I/O, deterministic splits, prefix windows,
and synthetic generators for desk-scale experiments."""

from __future__ import annotations

import gzip
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.special import expit


class SvmlightParseError(ValueError):
    """Malformed svmlight input; carries the 1-based line number of the offending line."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class Dataset:
    """Immutable store of sparse feature rows (CSR arrays) and labels in {-1, +1}.

    Feature indices are 0-based in memory (1-based on disk) and strictly
    increasing within each row. ``dim`` is the feature count; every stored
    index is < dim.
    """

    def __init__(self, data, indices, indptr, labels, dim: int):
        self.data = np.asarray(data, dtype=np.float64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.labels = np.asarray(labels, dtype=np.float64)
        self.dim = int(dim)
        self._matrix = None
        self._validate()

    def _validate(self):
        if len(self.indptr) != len(self.labels) + 1:
            raise ValueError("row pointer / label length mismatch")
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= self.dim):
            raise ValueError("feature index out of range for dim=%d" % self.dim)
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise ValueError("labels must be exactly -1 or +1")
        if self.indices.size > 1:
            diffs = np.diff(self.indices) > 0
            # positions just before a row start compare across rows; a
            # within-row comparison can never sit there (empty rows can push
            # these positions outside the diff range)
            pos = self.indptr[1:-1] - 1
            diffs[pos[(pos >= 0) & (pos < diffs.size)]] = True
            if not diffs.all():
                bad = int(np.searchsorted(self.indptr, np.argmin(diffs), side="right")) - 1
                raise ValueError(f"row {bad}: indices not strictly increasing")

    @classmethod
    def from_rows(cls, rows, labels, dim: int | None = None) -> "Dataset":
        """Build from a list of rows, each a list of (index, value) pairs (0-based indices)."""
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        idx_chunks, val_chunks = [], []
        max_idx = -1
        for i, row in enumerate(rows):
            indptr[i + 1] = indptr[i] + len(row)
            if row:
                ii = np.fromiter((p[0] for p in row), dtype=np.int64, count=len(row))
                vv = np.fromiter((p[1] for p in row), dtype=np.float64, count=len(row))
                idx_chunks.append(ii)
                val_chunks.append(vv)
                max_idx = max(max_idx, int(ii.max()))
        indices = np.concatenate(idx_chunks) if idx_chunks else np.zeros(0, dtype=np.int64)
        data = np.concatenate(val_chunks) if val_chunks else np.zeros(0)
        if dim is None:
            dim = max_idx + 1
        return cls(data, indices, indptr, labels, dim)

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    @property
    def matrix(self) -> sp.csr_matrix:
        """CSR wrap of the stored arrays (no copy); cached."""
        if self._matrix is None:
            self._matrix = sp.csr_matrix(
                (self.data, self.indices, self.indptr),
                shape=(self.n_rows, self.dim), copy=False)
        return self._matrix

    def row(self, i: int):
        """(indices, values) views of row i."""
        a, b = self.indptr[i], self.indptr[i + 1]
        return self.indices[a:b], self.data[a:b]

    def prefix(self, n: int) -> "PrefixView":
        return PrefixView(self, n)

    def subset(self, order) -> "Dataset":
        """New Dataset whose rows are self's rows in the given order (copies)."""
        order = np.asarray(order, dtype=np.int64)
        counts = self.indptr[order + 1] - self.indptr[order]
        indptr = np.zeros(len(order) + 1, dtype=np.int64)
        np.cumsum(counts, out=indptr[1:])
        indices = np.empty(indptr[-1], dtype=np.int64)
        data = np.empty(indptr[-1])
        for k, i in enumerate(order):
            a, b = self.indptr[i], self.indptr[i + 1]
            indices[indptr[k]:indptr[k + 1]] = self.indices[a:b]
            data[indptr[k]:indptr[k + 1]] = self.data[a:b]
        return Dataset(data, indices, indptr, self.labels[order], self.dim)

    def content_hash(self) -> str:
        """Stable identity of the stored rows/labels/dim, for on-disk caches."""
        import hashlib
        h = hashlib.sha256()
        for arr in (self.labels, self.indptr, self.indices, self.data):
            h.update(np.ascontiguousarray(arr).tobytes())
        h.update(str(self.dim).encode())
        return h.hexdigest()

    def to_svmlight(self) -> str:
        """Serialize to svmlight text (1-based indices, %.17g values)."""
        lines = []
        for i in range(self.n_rows):
            idx, val = self.row(i)
            label = "+1" if self.labels[i] > 0 else "-1"
            parts = [label] + [f"{j + 1}:{v:.17g}" for j, v in zip(idx, val)]
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"


class PrefixView:
    """Zero-copy window over the first ``n`` rows of a Dataset.

    Nesting holds by construction: the rows of a shorter prefix are exactly
    the leading rows of any longer prefix of the same dataset.
    """

    def __init__(self, dataset: Dataset, n: int):
        if not 1 <= n <= dataset.n_rows:
            raise ValueError(f"prefix length {n} out of range [1, {dataset.n_rows}]")
        self.dataset = dataset
        self.n = int(n)
        self._matrix = None
        self._max_sq_norm = None

    @property
    def dim(self) -> int:
        return self.dataset.dim

    @property
    def labels(self) -> np.ndarray:
        return self.dataset.labels[:self.n]

    @property
    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None:
            ds = self.dataset
            end = ds.indptr[self.n]
            self._matrix = sp.csr_matrix(
                (ds.data[:end], ds.indices[:end], ds.indptr[:self.n + 1]),
                shape=(self.n, ds.dim), copy=False)
        return self._matrix

    def max_row_sq_norm(self) -> float:
        if self._max_sq_norm is None:
            m = self.matrix
            sq = m.multiply(m).sum(axis=1)
            self._max_sq_norm = float(np.max(sq)) if self.n else 0.0
        return self._max_sq_norm


def _parse_label(tok: str, line_no: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise SvmlightParseError(line_no, f"unparseable label {tok!r}") from None
    if v == 1.0:
        return 1.0
    if v == -1.0 or v == 0.0:  # 0/1 labeling maps 0 -> -1
        return -1.0
    raise SvmlightParseError(line_no, f"label {tok!r} not in {{-1, 0, +1}}")


def parse_svmlight(text: str | bytes, dim: int | None = None) -> Dataset:
    """Parse svmlight text: ``<label> <idx>:<val> ...`` per line, ``#`` starts a comment.

    Indices are 1-based and must be strictly increasing within a row. ``dim``
    widens the feature count beyond the maximum observed index.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    labels = []
    rows = []
    max_idx = -1
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        labels.append(_parse_label(parts[0], line_no))
        row = []
        prev = 0
        for tok in parts[1:]:
            if ":" not in tok:
                raise SvmlightParseError(line_no, f"bad feature token {tok!r}")
            idx_s, val_s = tok.split(":", 1)
            try:
                idx = int(idx_s)
                val = float(val_s)
            except ValueError:
                raise SvmlightParseError(line_no, f"bad feature token {tok!r}") from None
            if idx <= 0:
                raise SvmlightParseError(line_no, f"index {idx} must be positive")
            if idx <= prev:
                raise SvmlightParseError(line_no, f"indices not strictly increasing at {idx}")
            if not np.isfinite(val):
                raise SvmlightParseError(line_no, f"non-finite value {val_s!r}")
            prev = idx
            row.append((idx - 1, val))
        rows.append(row)
        if row:
            max_idx = max(max_idx, row[-1][0])
    if not rows:
        raise SvmlightParseError(0, "empty input: no data lines")
    if dim is None:
        dim = max_idx + 1
    return Dataset.from_rows(rows, labels, dim=dim)


def load_svmlight(path: str | Path, dim: int | None = None) -> Dataset:
    """Read an svmlight file; ``.gz`` paths are decompressed transparently."""
    path = Path(path)
    if path.suffix == ".gz":
        with gzip.open(path, "rb") as fh:
            return parse_svmlight(fh.read(), dim=dim)
    return parse_svmlight(path.read_bytes(), dim=dim)


def write_svmlight(ds: Dataset, path: str | Path) -> None:
    path = Path(path)
    text = ds.to_svmlight()
    if path.suffix == ".gz":
        with gzip.open(path, "wb") as fh:
            fh.write(text.encode())
    else:
        path.write_text(text)


def train_test_split(ds: Dataset, test_fraction: float, seed: int):
    """Seeded uniform shuffle, then split into (train, test).

    Train size is round((1 - test_fraction) * N). The shuffle happens once
    here; downstream prefixes never reshuffle, preserving prefix nesting.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    n = ds.n_rows
    n_train = int(round((1.0 - test_fraction) * n))
    if n_train <= 0 or n_train >= n:
        raise ValueError(f"split of {n} rows at fraction {test_fraction} leaves an empty side")
    perm = np.random.default_rng(seed).permutation(n)
    return ds.subset(perm[:n_train]), ds.subset(perm[n_train:])


def synthesize_logistic(n: int, d: int, seed: int, margin: float = 1.0,
                        return_planted: bool = False):
    """Dense standard-normal rows with labels from a planted unit weight vector.

    P(y = +1 | z) = sigmoid(margin * <w, z>); margin = inf gives noiseless
    labels sign(<w, z>). Deterministic per seed.
    """
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((n, d))
    w = rng.standard_normal(d)
    w /= np.linalg.norm(w)
    t = Z @ w
    if np.isinf(margin):
        y = np.where(t >= 0, 1.0, -1.0)
    else:
        p = 1.0 / (1.0 + np.exp(-margin * t))
        y = np.where(rng.random(n) < p, 1.0, -1.0)
    dense = sp.csr_matrix(Z)
    ds = Dataset(dense.data, dense.indices, dense.indptr, y, d)
    return (ds, w) if return_planted else ds


# Desk-scale benchmark surrogates matching the shape, sparsity and difficulty
# of the standard adult/web binary-classification sets (32561 x 123 categorical
# one-hots; 49749 x 300 near-separable bag-of-words with predictive rare
# features). Fixed seeds make them reproducible benchmark instances.
BENCHMARK_SPECS = {
    "a9a_like": {
        "kind": "onehot", "n": 32561, "seed": 31,
        "group_sizes": (8, 8, 8) + (9,) * 11, "zipf": 0.0,
        "weight_scale": 0.8, "label_sharpness": 1.0, "bias": -0.65,
    },
    "w8a_like": {
        "kind": "sparse", "n": 49749, "d": 300, "seed": 7,
        "mean_nnz": 11.15, "popularity_decay": 1.5, "weight_scale": 8.0,
        "label_sharpness": 3.0, "bias": -6.0, "tail_weight": 0.35,
    },
}


def benchmark_dataset(name: str) -> Dataset:
    """Materialize one of the named desk-scale benchmark surrogates."""
    if name not in BENCHMARK_SPECS:
        raise KeyError(f"unknown benchmark {name!r}; have {sorted(BENCHMARK_SPECS)}")
    spec = dict(BENCHMARK_SPECS[name])
    kind = spec.pop("kind")
    if kind == "onehot":
        return synthesize_onehot_classification(**spec)
    return synthesize_sparse_classification(**spec)


def synthesize_onehot_classification(n: int, seed: int, *,
                                     group_sizes: tuple,
                                     zipf: float = 1.0,
                                     weight_scale: float = 2.0,
                                     label_sharpness: float = 1.0,
                                     bias: float = 0.0) -> Dataset:
    """Categorical one-hot classification data: one active feature per
    attribute group, category popularity zipf-decaying within each group.

    Every row has exactly len(group_sizes) active features and dim is
    sum(group_sizes); labels come from a planted per-feature weight vector
    through a sigmoid. Deterministic per seed.
    """
    if n < 2 or not group_sizes:
        raise ValueError("need n >= 2 and at least one group")
    rng = np.random.default_rng(seed)
    d = int(sum(group_sizes))
    w = rng.standard_normal(d) * weight_scale
    k = len(group_sizes)
    cols = np.empty((n, k), dtype=np.int64)
    offset = 0
    for j, size in enumerate(group_sizes):
        probs = (np.arange(size) + 1.0) ** (-zipf)
        probs /= probs.sum()
        cols[:, j] = offset + rng.choice(size, size=n, p=probs)
        offset += size
    t = w[cols].sum(axis=1) + bias
    prob = expit(label_sharpness * t)
    y = np.where(rng.random(n) < prob, 1.0, -1.0)
    indices = np.sort(cols, axis=1).ravel()
    data = np.ones(n * k)
    indptr = np.arange(0, n * k + 1, k, dtype=np.int64)
    return Dataset(data, indices, indptr, y, d)


def synthesize_sparse_classification(n: int, d: int, seed: int, *,
                                     mean_nnz: float = 14.0,
                                     popularity_decay: float = 0.8,
                                     weight_scale: float = 3.0,
                                     label_sharpness: float = 1.0,
                                     bias: float = 0.0,
                                     tail_weight: float = 0.0) -> Dataset:
    """Sparse binary-feature classification data in the style of bag-of-words
    benchmark sets.

    Feature j is present with probability proportional to (j + 3)^-decay,
    scaled so the expected row has ``mean_nnz`` active features; labels come
    from a planted weight vector through a sigmoid of sharpness
    ``label_sharpness`` (larger = closer to separable). ``tail_weight`` > 0
    makes rare features carry proportionally larger planted weights
    ((p_max/p_j)^tail_weight), the way rare keywords are highly predictive.
    Deterministic per seed.
    """
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    rng = np.random.default_rng(seed)
    pop = (np.arange(d) + 3.0) ** (-popularity_decay)
    pop *= mean_nnz / pop.sum()
    pop = np.clip(pop, 0.0, 0.95)
    # weights drawn before the mask so the label law does not depend on n
    w = rng.standard_normal(d) * weight_scale / np.sqrt(mean_nnz)
    if tail_weight > 0.0:
        w *= (pop.max() / pop) ** tail_weight
    mask = rng.random((n, d)) < pop[None, :]
    t = mask @ w + bias
    prob = expit(label_sharpness * t)
    y = np.where(rng.random(n) < prob, 1.0, -1.0)
    m = sp.csr_matrix(mask.astype(np.float64))
    m.sort_indices()
    return Dataset(m.data, m.indices, m.indptr, y, d)
