"""
GSDM.datasets - Synthetic graph datasets and dataset files

Generators for the generic-graph benchmarks (community-small, grid, ego-small,
Erdos-Renyi) and for weighted graphs with prescribed eigenvalue distributions,
plus a seeded train/test split and a line-oriented JSON file format.

Every graph ``i`` of a dataset is drawn from its own stream
``default_rng([seed, i])``, so datasets are reproducible and can be built in
parallel.

Example usage:
```python
from GSDM.datasets import DatasetSpec, generate_dataset, save_dataset, split

spec = DatasetSpec(name="community_small", count=100, seed=0)
graphs = generate_dataset(spec)
train, test = split(graphs, spec.split, spec.seed)
save_dataset(train, "data/community_small.train.jsonl")
```
"""

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import networkx as nx
import numpy as np

from GSDM.console import get_logger
from GSDM.exceptions import FormatError, PreconditionError
from GSDM.graphs import Graph

logger = get_logger("datasets")

SPECTRUM_DISTS = ("even", "moderate", "skewed")

# (n_min, n_max, generator params) per dataset name
_DEFAULTS: Dict[str, Tuple[int, int, dict]] = {
    "community_small": (12, 20, {"p_intra": 0.7, "inter_rate": 0.05, "d_max": 10}),
    "grid": (100, 400, {"side_min": 10, "side_max": 20, "d_max": 10}),
    "ego_small": (4, 18, {"base_nodes": 1000, "attach": 2, "d_max": 10}),
    "erdos_renyi": (12, 12, {"p": 0.5, "d_max": 10}),
    "synthetic_spectrum": (16, 16, {"dist": "even", "scale": 1.0}),
}


@dataclass
class DatasetSpec:
    """
    Description of a generated dataset.

    Attributes:
        name (str): community_small, grid, ego_small, erdos_renyi or synthetic_spectrum.
        count (int): Number of graphs.
        n_min (int or None): Smallest node count (dataset default when None).
        n_max (int or None): Largest node count (dataset default when None).
        params (dict): Generator parameters overriding the dataset defaults.
        split (float): Training fraction of the train/test split. Default 0.8.
        seed (int): Dataset seed.
    """

    name: str = "community_small"
    count: int = 100
    n_min: int = None
    n_max: int = None
    params: dict = field(default_factory=dict)
    split: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.name not in _DEFAULTS:
            raise PreconditionError(f"Unknown dataset: {self.name}")
        n_min, n_max, defaults = _DEFAULTS[self.name]
        self.n_min = n_min if self.n_min is None else int(self.n_min)
        self.n_max = n_max if self.n_max is None else int(self.n_max)
        self.params = {**defaults, **self.params}
        if self.count < 1:
            raise PreconditionError(f"count must be >= 1, got {self.count}")
        if not 0.0 < self.split < 1.0:
            raise PreconditionError(f"split must lie in (0, 1), got {self.split}")
        if not 1 <= self.n_min <= self.n_max:
            raise PreconditionError(f"Invalid node range [{self.n_min}, {self.n_max}]")

    def rng(self, index: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, index])


def one_hot_degree(A: np.ndarray, d_max: int = 10) -> np.ndarray:
    """One-hot encoding of node degrees capped at ``d_max`` (d_max + 1 columns)."""
    degrees = np.minimum((A != 0).sum(axis=1), d_max).astype(np.int64)
    X = np.zeros((A.shape[0], d_max + 1))
    X[np.arange(A.shape[0]), degrees] = 1.0
    return X


def _binary_graph(A: np.ndarray, d_max: int) -> Graph:
    A = np.asarray(A, dtype=np.float64)
    np.fill_diagonal(A, 0.0)
    return Graph(X=one_hot_degree(A, d_max), A=A)


def _many(spec: DatasetSpec, make_one: Callable[[np.random.Generator], Graph], max_workers: int = 1) -> List[Graph]:
    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
        graphs = list(executor.map(lambda i: make_one(spec.rng(i)), range(spec.count)))
    logger.info(f"[green]✔ Generated {len(graphs)} {spec.name} graphs[/green]")
    return graphs


def gen_community_small(spec: DatasetSpec, max_workers: int = 1) -> List[Graph]:
    """
    Two-community graphs with ``n ~ U{n_min..n_max}`` (default 12..20).

    Communities have sizes ceil(n/2) and floor(n/2); intra-community edges are
    i.i.d. with probability ``p_intra``; ``max(1, Poisson(inter_rate * n))``
    distinct inter-community edges are added.

    Raises:
        PreconditionError: If the node range leaves [12, 20].
    """
    if spec.n_min < 12 or spec.n_max > 20:
        raise PreconditionError(f"community_small needs a node range within [12, 20], got [{spec.n_min}, {spec.n_max}]")
    p_intra = float(spec.params["p_intra"])
    inter_rate = float(spec.params["inter_rate"])
    d_max = int(spec.params["d_max"])

    def make_one(rng: np.random.Generator) -> Graph:
        n = int(rng.integers(spec.n_min, spec.n_max + 1))
        first = math.ceil(n / 2)
        community = np.arange(n) >= first
        upper = np.triu(rng.random((n, n)) < p_intra, k=1)
        A = (upper & (community[:, None] == community[None, :])).astype(np.float64)
        inter_pairs = [(i, j) for i in range(first) for j in range(first, n)]
        k = min(len(inter_pairs), max(1, int(rng.poisson(inter_rate * n))))
        for idx in rng.choice(len(inter_pairs), size=k, replace=False):
            i, j = inter_pairs[idx]
            A[i, j] = 1.0
        return _binary_graph(A + A.T, d_max)

    return _many(spec, make_one, max_workers)


def gen_grid(spec: DatasetSpec, max_workers: int = 1) -> List[Graph]:
    """2D lattices with sides ``w, h ~ U{side_min..side_max}`` (default 10..20)."""
    lo, hi = int(spec.params["side_min"]), int(spec.params["side_max"])
    if not 1 <= lo <= hi:
        raise PreconditionError(f"Invalid grid side range [{lo}, {hi}]")
    d_max = int(spec.params["d_max"])

    def make_one(rng: np.random.Generator) -> Graph:
        w, h = (int(v) for v in rng.integers(lo, hi + 1, size=2))
        G = nx.convert_node_labels_to_integers(nx.grid_2d_graph(w, h), ordering="sorted")
        return _binary_graph(nx.to_numpy_array(G, nodelist=range(w * h), weight=None), d_max)

    return _many(spec, make_one, max_workers)


def gen_ego_small(spec: DatasetSpec, max_workers: int = 1) -> List[Graph]:
    """
    1-hop ego networks of a seeded Barabasi-Albert graph, sizes clamped to [n_min, n_max].

    The center is node 0. Centers whose neighborhood is too small are skipped;
    neighborhoods that are too large keep a random subset of neighbors.
    """
    base = nx.barabasi_albert_graph(int(spec.params["base_nodes"]), int(spec.params["attach"]), seed=spec.seed)
    eligible = [v for v in sorted(base.nodes()) if base.degree(v) + 1 >= spec.n_min]
    if not eligible:
        raise PreconditionError("Base graph has no ego network of the requested size")
    d_max = int(spec.params["d_max"])

    def make_one(rng: np.random.Generator) -> Graph:
        center = eligible[int(rng.integers(len(eligible)))]
        neighbors = sorted(base.neighbors(center))
        if len(neighbors) + 1 > spec.n_max:
            neighbors = sorted(rng.choice(neighbors, size=spec.n_max - 1, replace=False).tolist())
        nodes = [center] + neighbors
        return _binary_graph(nx.to_numpy_array(base.subgraph(nodes), nodelist=nodes, weight=None), d_max)

    return _many(spec, make_one, max_workers)


def gen_erdos_renyi(spec: DatasetSpec, max_workers: int = 1) -> List[Graph]:
    """G(n, p) graphs with ``n ~ U{n_min..n_max}``."""
    p = float(spec.params["p"])
    if not 0.0 <= p <= 1.0:
        raise PreconditionError(f"Edge probability must lie in [0, 1], got {p}")
    d_max = int(spec.params["d_max"])

    def make_one(rng: np.random.Generator) -> Graph:
        n = int(rng.integers(spec.n_min, spec.n_max + 1))
        A = np.triu(rng.random((n, n)) < p, k=1).astype(np.float64)
        return _binary_graph(A + A.T, d_max)

    return _many(spec, make_one, max_workers)


def random_orthonormal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthonormal matrix from the QR factorization of a Gaussian matrix."""
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs


def draw_eigenvalues(n: int, dist: str, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """
    Eigenvalues for a synthetic-spectrum graph.

    - even: i.i.d. Uniform[-1, 1]
    - moderate: ``0.7 ** i`` with random signs
    - skewed: dominant ``n * scale`` plus a Uniform[-0.5, 0.5] tail
    """
    if dist == "even":
        return rng.uniform(-1.0, 1.0, size=n)
    if dist == "moderate":
        return 0.7 ** np.arange(n) * rng.choice([-1.0, 1.0], size=n)
    if dist == "skewed":
        return np.concatenate([[n * scale], rng.uniform(-0.5, 0.5, size=n - 1)])
    raise PreconditionError(f"Unknown eigenvalue distribution: {dist}")


def gen_synthetic_spectrum(spec: DatasetSpec, dist: str = None, max_workers: int = 1) -> List[Graph]:
    """
    Weighted graphs ``A = U diag(Lambda) U^T`` with a random orthonormal ``U``.

    Node features are a constant column. The graphs are flagged ``weighted``.

    Raises:
        PreconditionError: On an unknown distribution or a node range that is not a single size.
    """
    dist = dist or spec.params["dist"]
    if dist not in SPECTRUM_DISTS:
        raise PreconditionError(f"Unknown eigenvalue distribution: {dist}")
    if spec.n_min != spec.n_max:
        raise PreconditionError("Synthetic-spectrum datasets use a single node count")
    n = spec.n_min
    scale = float(spec.params.get("scale", 1.0))

    def make_one(rng: np.random.Generator) -> Graph:
        lam = draw_eigenvalues(n, dist, rng, scale)
        U = random_orthonormal(n, rng)
        A = (U * lam) @ U.T
        return Graph(X=np.ones((n, 1)), A=(A + A.T) / 2.0, weighted=True)

    return _many(spec, make_one, max_workers)


GENERATORS: Dict[str, Callable[..., List[Graph]]] = {
    "community_small": gen_community_small,
    "grid": gen_grid,
    "ego_small": gen_ego_small,
    "erdos_renyi": gen_erdos_renyi,
    "synthetic_spectrum": gen_synthetic_spectrum,
}


def generate_dataset(spec: DatasetSpec, max_workers: int = 1) -> List[Graph]:
    """Run the generator named by ``spec.name``."""
    return GENERATORS[spec.name](spec, max_workers=max_workers)


def split(graphs: Sequence[Graph], fraction: float = 0.8, seed: int = 0) -> Tuple[List[Graph], List[Graph]]:
    """
    Deterministic seeded train/test split.

    With at least two graphs both parts are non-empty.
    """
    if not 0.0 < fraction < 1.0:
        raise PreconditionError(f"split fraction must lie in (0, 1), got {fraction}")
    order = np.random.default_rng(seed).permutation(len(graphs))
    k = int(round(fraction * len(graphs)))
    if len(graphs) >= 2:
        k = min(max(k, 1), len(graphs) - 1)
    return [graphs[i] for i in order[:k]], [graphs[i] for i in order[k:]]


# --- dataset files ---

def _floats(values: np.ndarray) -> str:
    return "[" + ", ".join("%.17g" % v for v in np.asarray(values, dtype=np.float64).ravel()) + "]"


def format_record(g: Graph) -> str:
    """One JSON object with fields in the order n, d, x, a, weighted."""
    return (
        f'{{"n": {g.n}, "d": {g.d}, "x": {_floats(g.X)}, "a": {_floats(g.A)}, '
        f'"weighted": {"true" if g.weighted else "false"}}}'
    )


def save_dataset(graphs: Sequence[Graph], path: str) -> None:
    """Write one record per line (UTF-8), floats with 17 significant digits."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        for g in graphs:
            handle.write(format_record(g) + "\n")
    logger.info(f"Saved {len(graphs)} graphs to [bold]{path}[/bold]")


def parse_record(text: str, line: int) -> Graph:
    """Parse one dataset line; errors carry the 1-based line number."""
    try:
        record = json.loads(text)
        n, d = int(record["n"]), int(record["d"])
        x = np.array(record["x"], dtype=np.float64)
        a = np.array(record["a"], dtype=np.float64)
        weighted = bool(record["weighted"])
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(f"Malformed dataset record: {e}", line=line) from e
    if n < 1 or d < 0 or x.shape != (n * d,) or a.shape != (n * n,):
        raise FormatError(f"Record sizes do not match n={n}, d={d}", line=line)
    try:
        return Graph(X=x.reshape(n, d), A=a.reshape(n, n), weighted=weighted)
    except PreconditionError as e:
        raise FormatError(str(e), line=line) from e


def load_dataset(path: str) -> List[Graph]:
    """
    Read a dataset file written by ``save_dataset``.

    Blank lines are skipped; an empty file yields an empty list with a warning.

    Raises:
        FormatError: On a malformed or truncated record (with its line number).
    """
    graphs = []
    with open(path, encoding="utf-8") as handle:
        for number, text in enumerate(handle, start=1):
            if text.strip():
                graphs.append(parse_record(text, number))
    if not graphs:
        logger.warning(f"[yellow]⚠ Dataset file {path} is empty[/yellow]")
    return graphs
