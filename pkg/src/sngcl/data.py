"""Dataset I/O: citation-network parsing, a canonical on-disk graph format,
a stochastic block model generator, and embedding export."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InputError, IntegrityError, ParseError
from .graph import Graph, build_graph

logger = logging.getLogger(__name__)


@dataclass
class PlanetoidLoadResult:
    """A parsed citation network plus bookkeeping from the raw files."""

    graph: Graph
    paper_ids: list[str]
    label_names: list[str]
    n_citation_lines: int
    n_dangling: int
    n_self_citations: int


def load_planetoid(content_path, cites_path, row_normalize: bool = True) -> PlanetoidLoadResult:
    """Parse the two-file citation format: a ``.content`` file with one
    ``id f_1 ... f_d label`` record per line and a ``.cites`` file with one
    ``cited citing`` pair per line.

    Node and class indices follow first appearance in the content file.
    Citation lines naming unknown ids are skipped (counted and warned
    about), self-citations are dropped, and the rest are symmetrized.
    """
    content_path = Path(content_path)
    cites_path = Path(cites_path)

    ids: dict[str, int] = {}
    label_ids: dict[str, int] = {}
    rows: list[np.ndarray] = []
    labels: list[int] = []
    with open(content_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise ParseError(
                    f"{content_path}:{lineno}: expected id, features and label, "
                    f"got {len(parts)} fields"
                )
            pid, feats, label = parts[0], parts[1:-1], parts[-1]
            if pid in ids:
                raise ParseError(f"{content_path}:{lineno}: duplicate id {pid!r}")
            if rows and len(feats) != rows[0].size:
                raise ParseError(
                    f"{content_path}:{lineno}: {len(feats)} features, "
                    f"previous records had {rows[0].size}"
                )
            try:
                vec = np.array([float(v) for v in feats])
            except ValueError as exc:
                raise ParseError(
                    f"{content_path}:{lineno}: non-numeric feature value"
                ) from exc
            if not np.all(np.isfinite(vec)):
                raise ParseError(f"{content_path}:{lineno}: non-finite feature value")
            ids[pid] = len(rows)
            rows.append(vec)
            labels.append(label_ids.setdefault(label, len(label_ids)))
    if not rows:
        raise ParseError(f"{content_path}: no records")

    edges: list[tuple[int, int]] = []
    n_lines = 0
    n_dangling = 0
    n_self = 0
    with open(cites_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ParseError(
                    f"{cites_path}:{lineno}: expected two ids, got {len(parts)} fields"
                )
            n_lines += 1
            if parts[0] not in ids or parts[1] not in ids:
                n_dangling += 1
                continue
            i, j = ids[parts[0]], ids[parts[1]]
            if i == j:
                n_self += 1
                continue
            edges.append((i, j))
    if n_dangling:
        logger.warning(
            "%s: skipped %d citation line(s) naming ids absent from %s",
            cites_path, n_dangling, content_path.name,
        )

    x = np.vstack(rows)
    if row_normalize:
        sums = x.sum(axis=1, keepdims=True)
        np.divide(x, sums, out=x, where=sums > 0)
    graph = build_graph(edges, x, labels=np.array(labels), n_classes=len(label_ids))
    label_names = [None] * len(label_ids)
    for name, idx in label_ids.items():
        label_names[idx] = name
    return PlanetoidLoadResult(
        graph=graph,
        paper_ids=list(ids),
        label_names=label_names,
        n_citation_lines=n_lines,
        n_dangling=n_dangling,
        n_self_citations=n_self,
    )


# --- canonical directory format --------------------------------------------

MANIFEST_NAME = "manifest.txt"
EDGES_NAME = "edges.tsv"
FEATURES_NAME = "features.tsv"
LABELS_NAME = "labels.tsv"


def save_canonical(graph: Graph, directory) -> None:
    """Write a graph as manifest.txt / edges.tsv / features.tsv / labels.tsv.

    Each undirected edge is stored once with the smaller endpoint first;
    floats use 17 significant digits so loading reproduces them exactly.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    upper = sp.triu(graph.adjacency, k=1).tocoo()

    manifest = (
        f"n_nodes={graph.n_nodes}\n"
        f"n_features={graph.n_features}\n"
        f"n_classes={graph.n_classes or 0}\n"
        f"n_edges={upper.nnz}\n"
    )
    (directory / MANIFEST_NAME).write_text(manifest, encoding="utf-8")

    with open(directory / EDGES_NAME, "w", encoding="utf-8") as f:
        for i, j in zip(upper.row, upper.col):
            f.write(f"{i}\t{j}\n")

    with open(directory / FEATURES_NAME, "w", encoding="utf-8") as f:
        for row in graph.features:
            f.write("\t".join(f"{v:.17g}" for v in row) + "\n")

    labels = graph.labels if graph.labels is not None else np.full(graph.n_nodes, -1)
    with open(directory / LABELS_NAME, "w", encoding="utf-8") as f:
        for v in labels:
            f.write(f"{int(v)}\n")


def _manifest_int(kv: dict, key: str, path: Path) -> int:
    if key not in kv:
        raise ParseError(f"{path}: missing {key}")
    try:
        return int(kv[key])
    except ValueError as exc:
        raise ParseError(f"{path}: {key}={kv[key]!r} is not an integer") from exc


def load_canonical(directory) -> Graph:
    """Read a graph written by :func:`save_canonical`, checking the files
    against the manifest."""
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ParseError(f"{manifest_path}: not found")
    kv = {}
    for lineno, line in enumerate(manifest_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"{manifest_path}:{lineno}: expected key=value")
        kv[key.strip()] = value.strip()
    n_nodes = _manifest_int(kv, "n_nodes", manifest_path)
    n_features = _manifest_int(kv, "n_features", manifest_path)
    n_classes = _manifest_int(kv, "n_classes", manifest_path)
    n_edges = _manifest_int(kv, "n_edges", manifest_path)

    edges_path = directory / EDGES_NAME
    edges = []
    with open(edges_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"{edges_path}:{lineno}: expected two endpoints")
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError as exc:
                raise ParseError(f"{edges_path}:{lineno}: non-integer endpoint") from exc
            if not (0 <= i < n_nodes and 0 <= j < n_nodes):
                raise IntegrityError(
                    f"{edges_path}:{lineno}: endpoint outside [0, {n_nodes})"
                )
            edges.append((i, j))
    if len(edges) != n_edges:
        raise IntegrityError(
            f"{edges_path}: {len(edges)} edges, manifest says {n_edges}"
        )

    features_path = directory / FEATURES_NAME
    feature_rows = []
    with open(features_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != n_features:
                raise IntegrityError(
                    f"{features_path}:{lineno}: {len(parts)} columns, "
                    f"manifest says {n_features}"
                )
            try:
                feature_rows.append([float(v) for v in parts])
            except ValueError as exc:
                raise ParseError(f"{features_path}:{lineno}: non-numeric value") from exc
    if len(feature_rows) != n_nodes:
        raise IntegrityError(
            f"{features_path}: {len(feature_rows)} rows, manifest says {n_nodes}"
        )

    labels_path = directory / LABELS_NAME
    label_values = []
    with open(labels_path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                label_values.append(int(line))
            except ValueError as exc:
                raise ParseError(f"{labels_path}:{lineno}: non-integer label") from exc
    if len(label_values) != n_nodes:
        raise IntegrityError(
            f"{labels_path}: {len(label_values)} labels, manifest says {n_nodes}"
        )

    labels = np.asarray(label_values, dtype=np.int64)
    if np.all(labels < 0):
        labels = None
    features = np.asarray(feature_rows, dtype=np.float64).reshape(n_nodes, n_features)
    try:
        return build_graph(
            edges, features,
            labels=labels,
            n_classes=n_classes if labels is not None else None,
        )
    except InputError as exc:
        raise IntegrityError(f"{directory}: {exc}") from exc


# --- synthetic graphs -------------------------------------------------------

@dataclass
class SbmConfig:
    """Stochastic block model with one mean-shifted Gaussian feature cloud
    per block (block b's mean is ``feature_shift`` along axis b)."""

    nodes_per_block: int
    n_blocks: int
    p_in: float
    p_out: float
    feature_dim: int = 16
    feature_shift: float = 1.0
    noise_std: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.nodes_per_block < 1 or self.n_blocks < 1:
            raise InputError("need at least one node per block and one block")
        if not 0.0 <= self.p_out <= self.p_in <= 1.0:
            raise InputError(
                f"need 0 <= p_out <= p_in <= 1, got p_in={self.p_in} p_out={self.p_out}"
            )
        if self.feature_dim < self.n_blocks:
            raise InputError(
                f"feature_dim={self.feature_dim} cannot hold {self.n_blocks} "
                "orthogonal block means"
            )
        if self.noise_std < 0:
            raise InputError(f"noise_std must be >= 0, got {self.noise_std}")


def generate_sbm(config: SbmConfig) -> Graph:
    """Sample a block-model graph; block membership doubles as the label.

    The adjacency is drawn before the features in a fixed order, so a seed
    pins down the whole dataset.
    """
    n = config.nodes_per_block * config.n_blocks
    blocks = np.repeat(np.arange(config.n_blocks), config.nodes_per_block)
    rng = np.random.default_rng(config.seed)

    probs = np.where(blocks[:, None] == blocks[None, :], config.p_in, config.p_out)
    draw = rng.random((n, n))
    upper = np.triu(draw < probs, k=1)
    edge_i, edge_j = np.nonzero(upper)

    means = np.zeros((config.n_blocks, config.feature_dim))
    means[np.arange(config.n_blocks), np.arange(config.n_blocks)] = config.feature_shift
    features = means[blocks] + config.noise_std * rng.standard_normal(
        (n, config.feature_dim)
    )
    return build_graph(
        list(zip(edge_i.tolist(), edge_j.tolist())),
        features,
        labels=blocks,
        n_classes=config.n_blocks,
    )


def export_embeddings(path, embeddings: np.ndarray, node_ids=None) -> None:
    """Write embeddings as TSV, one node per row, at full float64 precision.

    ``node_ids``, when given, becomes a leading identifier column.
    """
    embeddings = np.asarray(embeddings)
    if embeddings.ndim != 2:
        raise InputError(f"embeddings must be 2-d, got shape {embeddings.shape}")
    if node_ids is not None and len(node_ids) != embeddings.shape[0]:
        raise InputError(
            f"{len(node_ids)} node ids for {embeddings.shape[0]} embedding rows"
        )
    with open(path, "w", encoding="utf-8") as f:
        for r, row in enumerate(embeddings):
            values = "\t".join(f"{v:.17g}" for v in row)
            if node_ids is not None:
                f.write(f"{node_ids[r]}\t{values}\n")
            else:
                f.write(values + "\n")
