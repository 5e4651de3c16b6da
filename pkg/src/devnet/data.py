"""Tabular ingestion and the experiment data protocol.

CSV files are read verbatim into a Table; preprocessing imputes missing
numeric cells with the column mean and one-hot encodes categoricals. The
experiment pipeline splits 80/20 per class, draws the labeled-anomaly set,
adjusts the contamination of the remaining training rows, and standardizes
with training-split statistics only.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError

MISSING = ""

NUMERIC = "numeric"
CATEGORICAL = "categorical"


@dataclass
class Table:
    """Raw rectangular data: feature cells as strings plus resolved 0/1 labels."""

    feature_names: list[str]
    feature_kinds: list[str]
    rows: list[list[str]]
    labels: np.ndarray
    label_column: str
    positive_token: str


@dataclass
class Dataset:
    """Fully numeric feature matrix with anomaly (1) / normal (0) labels."""

    features: np.ndarray
    labels: np.ndarray
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {self.features.shape}")
        if len(self.labels) != len(self.features):
            raise DataError("label count does not match row count")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_anomalies(self) -> int:
        return int(self.labels.sum())

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.feature_names)


@dataclass(frozen=True)
class ExperimentSpec:
    """Knobs of the training-data protocol."""

    train_fraction: float = 0.8
    contamination_rate: float = 0.02
    n_labeled_anomalies: int = 30
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if not 0 <= self.contamination_rate <= 0.5:
            raise ValueError(
                f"contamination_rate must be in [0, 0.5], got {self.contamination_rate}"
            )
        if self.n_labeled_anomalies < 1:
            raise ValueError("n_labeled_anomalies must be >= 1")


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, label_column: str, positive_token: str, column_kinds: dict | None = None) -> Table:
    """Read a headed CSV into a Table.

    Empty cells are missing. A column whose observed cells all parse as
    numbers is numeric, otherwise categorical; ``column_kinds`` overrides the
    inference per column name.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: file is empty, expected a header row") from None
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    if label_column not in header:
        raise DataError(f"{path}: label column {label_column!r} not found in header {header}")
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(
                f"{path}: row {i + 2} has {len(row)} cells, header has {len(header)}"
            )

    label_idx = header.index(label_column)
    feature_names = [c for j, c in enumerate(header) if j != label_idx]
    feature_cols = [j for j in range(len(header)) if j != label_idx]
    feature_rows = [[row[j] for j in feature_cols] for row in rows]
    labels = np.array([1 if row[label_idx] == positive_token else 0 for row in rows])

    kinds = []
    for k in range(len(feature_names)):
        observed = [row[k] for row in feature_rows if row[k] != MISSING]
        inferred = NUMERIC if observed and all(_is_number(c) for c in observed) else CATEGORICAL
        kinds.append(inferred)
    if column_kinds:
        for name, kind in column_kinds.items():
            if name not in feature_names:
                raise DataError(f"column kind override names unknown column {name!r}")
            if kind not in (NUMERIC, CATEGORICAL):
                raise DataError(f"column kind for {name!r} must be numeric or categorical")
            kinds[feature_names.index(name)] = kind

    return Table(feature_names, kinds, feature_rows, labels, label_column, positive_token)


@dataclass
class Encoder:
    """Fitted preprocessing: imputation means and one-hot category lists per column.

    Serializable so a trained model can encode new CSVs the same way.
    """

    names: list[str]
    kinds: list[str]
    means: list[float | None]
    categories: list[list[str] | None]

    @property
    def feature_names(self) -> list[str]:
        out = []
        for name, kind, cats in zip(self.names, self.kinds, self.categories):
            if kind == NUMERIC:
                out.append(name)
            else:
                out.extend(f"{name}={c}" for c in cats)
        return out

    def transform(self, table: Table) -> Dataset:
        if table.feature_names != self.names:
            missing = [n for n in self.names if n not in table.feature_names]
            extra = [n for n in table.feature_names if n not in self.names]
            raise DataError(
                f"column mismatch: missing {missing or 'none'}, unexpected {extra or 'none'}"
            )
        blocks = []
        n = len(table.rows)
        for k, (kind, mean, cats) in enumerate(zip(self.kinds, self.means, self.categories)):
            col = [row[k] for row in table.rows]
            if kind == NUMERIC:
                vals = np.empty(n)
                for i, cell in enumerate(col):
                    if cell == MISSING:
                        vals[i] = mean
                    elif _is_number(cell):
                        vals[i] = float(cell)
                    else:
                        raise DataError(
                            f"column {self.names[k]!r} is numeric but row {i + 2} holds {cell!r}"
                        )
                blocks.append(vals[:, np.newaxis])
            else:
                # unseen or missing values get an all-zero indicator block
                index = {c: j for j, c in enumerate(cats)}
                block = np.zeros((n, len(cats)))
                for i, cell in enumerate(col):
                    j = index.get(cell)
                    if j is not None:
                        block[i, j] = 1.0
                blocks.append(block)
        features = np.hstack(blocks) if blocks else np.zeros((n, 0))
        return Dataset(features, table.labels.copy(), self.feature_names)

    def to_dict(self) -> dict:
        return {
            "names": list(self.names),
            "kinds": list(self.kinds),
            "means": list(self.means),
            "categories": [None if c is None else list(c) for c in self.categories],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Encoder":
        return cls(list(d["names"]), list(d["kinds"]), list(d["means"]),
                   [None if c is None else list(c) for c in d["categories"]])


def fit_encoder(table: Table) -> Encoder:
    means: list[float | None] = []
    categories: list[list[str] | None] = []
    for k, (name, kind) in enumerate(zip(table.feature_names, table.feature_kinds)):
        col = [row[k] for row in table.rows]
        observed = [c for c in col if c != MISSING]
        if kind == NUMERIC:
            if not observed:
                raise DataError(f"numeric column {name!r} is entirely missing; mean undefined")
            means.append(float(np.mean([float(c) for c in observed])))
            categories.append(None)
        else:
            means.append(None)
            categories.append(sorted(set(observed)))
    return Encoder(list(table.feature_names), list(table.feature_kinds), means, categories)


def preprocess(table: Table) -> Dataset:
    """Mean-impute numeric columns and one-hot encode categoricals."""
    return fit_encoder(table).transform(table)


@dataclass
class FeatureScaler:
    """Per-feature (x - mean) / std with training statistics; constant features are only centered."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, features: np.ndarray) -> "FeatureScaler":
        features = np.asarray(features, dtype=np.float64)
        if features.shape[0] == 0:
            raise DataError("cannot fit scaler on an empty training split")
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        scale = np.where(std > 0, std, 1.0)
        return cls(mean, scale)

    def transform(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        return cls(np.asarray(d["mean"], dtype=np.float64),
                   np.asarray(d["scale"], dtype=np.float64))


def standardize_fit_apply(train: Dataset, *others: Dataset) -> tuple[list[Dataset], FeatureScaler]:
    """Standardize every dataset with statistics fitted on ``train`` alone."""
    scaler = FeatureScaler.fit(train.features)
    out = [replace(ds, features=scaler.transform(ds.features)) for ds in (train, *others)]
    return out, scaler


def split_train_test(ds: Dataset, fraction: float, seed) -> tuple[Dataset, Dataset]:
    """Stratified split: each class is partitioned independently at ``fraction``."""
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in (0, 1):
        members = np.flatnonzero(ds.labels == cls)
        if len(members) < 2:
            raise DataError(
                f"class {cls} has {len(members)} rows; need >= 2 to split"
            )
        perm = rng.permutation(members)
        n_train = int(round(fraction * len(members)))
        n_train = min(max(n_train, 1), len(members) - 1)
        train_idx.append(perm[:n_train])
        test_idx.append(perm[n_train:])
    return ds.subset(np.concatenate(train_idx)), ds.subset(np.concatenate(test_idx))


def adjust_contamination(ds: Dataset, rate: float, seed) -> Dataset:
    """Subsample or duplicate anomaly rows until they make up ``rate`` of the data.

    Normal rows are always kept exactly; the achieved anomaly count is the
    rounded solution of a / (n_normal + a) = rate.
    """
    if not 0 <= rate <= 0.5:
        raise ValueError(f"rate must be in [0, 0.5], got {rate}")
    rng = np.random.default_rng(seed)
    normal_idx = np.flatnonzero(ds.labels == 0)
    anomaly_idx = np.flatnonzero(ds.labels == 1)
    target = int(round(rate * len(normal_idx) / (1.0 - rate)))
    if target > 0 and len(anomaly_idx) == 0:
        raise DataError(f"contamination rate {rate} requested but no anomaly rows available")
    if target <= len(anomaly_idx):
        keep = rng.choice(len(anomaly_idx), size=target, replace=False)
        chosen = anomaly_idx[keep]
    else:
        extra = rng.choice(len(anomaly_idx), size=target - len(anomaly_idx), replace=True)
        chosen = np.concatenate([anomaly_idx, anomaly_idx[extra]])
    return ds.subset(np.concatenate([normal_idx, chosen]))


def draw_labeled_anomalies(pool: np.ndarray, k: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Pick ``k`` distinct rows from the anomaly pool; return (picked, remainder)."""
    pool = np.asarray(pool, dtype=np.float64)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(pool) < k:
        raise DataError(
            f"anomaly pool has {len(pool)} rows, cannot label {k}; "
            "reduce the labeled-anomaly budget"
        )
    rng = np.random.default_rng(seed)
    sel = rng.choice(len(pool), size=k, replace=False)
    rest = np.setdiff1d(np.arange(len(pool)), sel)
    return pool[sel], pool[rest]


def synth_gaussian(n_normal: int, n_anomaly: int, dim: int, separation: float, seed) -> Dataset:
    """Synthetic blobs: normals ~ N(0, I), anomalies ~ N(separation * 1, I)."""
    if n_normal < 1 or n_anomaly < 0 or dim < 1:
        raise ValueError("sizes must be positive (n_anomaly may be zero)")
    rng = np.random.default_rng(seed)
    normals = rng.standard_normal((n_normal, dim))
    anomalies = rng.standard_normal((n_anomaly, dim)) + separation
    features = np.vstack([normals, anomalies])
    labels = np.concatenate([np.zeros(n_normal, dtype=int), np.ones(n_anomaly, dtype=int)])
    names = [f"x{j}" for j in range(dim)]
    return Dataset(features, labels, names)


@dataclass
class PreparedData:
    """Everything the training loop and evaluation need for one experiment run."""

    unlabeled: Dataset                 # U; true labels retained for diagnostics only
    labeled_anomalies: np.ndarray      # K feature rows
    test: Dataset
    scaler: FeatureScaler | None


def prepare_training_data(ds: Dataset, spec: ExperimentSpec, standardize: bool = True) -> PreparedData:
    """Split, draw the labeled-anomaly set, contaminate, and standardize.

    The labeled rows are removed from the training anomaly pool before the
    unlabeled set is assembled, so U and K stay disjoint. Scaling statistics
    come from the training rows (U plus K) only.
    """
    s_split, s_draw, s_cont = np.random.SeedSequence(spec.seed).spawn(3)
    train, test = split_train_test(ds, spec.train_fraction, s_split)

    pool = train.features[train.labels == 1]
    labeled, remainder = draw_labeled_anomalies(pool, spec.n_labeled_anomalies, s_draw)

    rest = Dataset(
        np.vstack([train.features[train.labels == 0], remainder]),
        np.concatenate([np.zeros(int((train.labels == 0).sum()), dtype=int),
                        np.ones(len(remainder), dtype=int)]),
        ds.feature_names,
    )
    unlabeled = adjust_contamination(rest, spec.contamination_rate, s_cont)

    scaler = None
    if standardize:
        train_rows = np.vstack([unlabeled.features, labeled])
        scaler = FeatureScaler.fit(train_rows)
        unlabeled = replace(unlabeled, features=scaler.transform(unlabeled.features))
        labeled = scaler.transform(labeled)
        test = replace(test, features=scaler.transform(test.features))
    return PreparedData(unlabeled, labeled, test, scaler)
