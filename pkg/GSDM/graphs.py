"""
GSDM.graphs - Graph and spectrum types

This module holds the in-memory graph representation used throughout GSDM
(node features ``X`` plus a symmetric adjacency ``A``) and the spectral tools
the diffusion model is built on: symmetric eigendecomposition, spectral
recomposition, alpha-quantile truncation and binarization of generated
continuous adjacency matrices.

Main classes and functions:
- Graph: node-feature matrix plus symmetric adjacency
- Spectrum: orthonormal eigenvectors and eigenvalues of an adjacency matrix
- eig_decompose / recompose / truncate_spectrum / binarize

Example usage:
```python
import numpy as np
from GSDM.graphs import Graph, eig_decompose, recompose, truncate_spectrum

A = np.array([[0., 1., 1.], [1., 0., 0.], [1., 0., 0.]])
spectrum = eig_decompose(A)
print(spectrum.lam)                      # sorted by |lambda|, descending
print(np.abs(recompose(spectrum) - A).max())
low_rank = truncate_spectrum(spectrum, alpha=0.5)
```
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import networkx as nx
import numpy as np

from GSDM.console import get_logger
from GSDM.exceptions import ConvergenceError, PreconditionError

logger = get_logger("graphs")

ORDERINGS = ("magnitude", "signed")
SOLVERS = ("auto", "jacobi", "lapack")

# Largest n handled by the Jacobi solver when solver="auto".
JACOBI_MAX_N = 64


@dataclass(eq=False)
class Graph:
    """
    A graph with ``n`` nodes: node features ``X`` (n x d) and adjacency ``A`` (n x n).

    ``A`` must be exactly symmetric; use ``Graph.from_adjacency`` to symmetrize
    an arbitrary square matrix first.

    Attributes:
        X (numpy.ndarray): Node-feature matrix, shape (n, d). ``d`` may be 0.
        A (numpy.ndarray): Symmetric adjacency, shape (n, n). Weighted values are
            allowed for synthetic-spectrum datasets.
        weighted (bool): True when ``A`` is not restricted to {0, 1}.
    """

    X: np.ndarray
    A: np.ndarray
    weighted: bool = False

    def __post_init__(self):
        self.A = np.array(self.A, dtype=np.float64)
        if self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1] or self.A.shape[0] < 1:
            raise PreconditionError(f"Adjacency must be a non-empty square matrix, got shape {self.A.shape}")
        if not np.array_equal(self.A, self.A.T):
            raise PreconditionError("Adjacency matrix is not symmetric")
        n = self.A.shape[0]
        if self.X is None:
            self.X = np.zeros((n, 0))
        self.X = np.array(self.X, dtype=np.float64)
        if self.X.ndim != 2 or self.X.shape[0] != n:
            raise PreconditionError(f"Feature matrix must have shape ({n}, d), got {self.X.shape}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @classmethod
    def from_adjacency(cls, A: np.ndarray, X: Optional[np.ndarray] = None, weighted: bool = False) -> "Graph":
        """Build a graph from any square matrix, symmetrizing it by averaging with its transpose."""
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise PreconditionError(f"Adjacency must be square, got shape {A.shape}")
        return cls(X=X, A=(A + A.T) / 2.0, weighted=weighted)

    @classmethod
    def from_networkx(cls, G: nx.Graph, X: Optional[np.ndarray] = None) -> "Graph":
        """Convert an undirected networkx graph (nodes taken in sorted order) to a binary Graph."""
        nodes = sorted(G.nodes())
        A = nx.to_numpy_array(G, nodelist=nodes, dtype=np.float64, weight=None)
        np.fill_diagonal(A, 0.0)
        return cls(X=X, A=A)

    def to_networkx(self) -> nx.Graph:
        """Undirected networkx graph with an edge wherever ``A[i, j] != 0`` (i != j)."""
        G = nx.Graph()
        G.add_nodes_from(range(self.n))
        rows, cols = np.nonzero(np.triu(self.A, k=1))
        G.add_edges_from(zip(rows.tolist(), cols.tolist()))
        return G

    def is_binary(self) -> bool:
        """True when entries are in {0, 1} and the diagonal is zero."""
        return bool(np.all((self.A == 0.0) | (self.A == 1.0)) and np.all(np.diag(self.A) == 0.0))


@dataclass(eq=False)
class Spectrum:
    """
    Spectral decomposition ``A = U diag(lam) U^T``.

    Attributes:
        U (numpy.ndarray): Orthonormal eigenvectors as columns, shape (n, n).
        lam (numpy.ndarray): Eigenvalues, length n, in the order recorded by ``order``.
        order (numpy.ndarray): Permutation applied to the solver output
            (``lam = raw_lam[order]``).
        ordering (str): "magnitude" (descending |lambda|) or "signed" (descending lambda).
        rank (int): Number of retained eigenpairs; entries ``lam[rank:]`` are zero
            after ``truncate_spectrum``.
    """

    U: np.ndarray
    lam: np.ndarray
    order: np.ndarray = None
    ordering: str = "magnitude"
    rank: int = None

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=np.float64)
        self.lam = np.asarray(self.lam, dtype=np.float64)
        if self.order is None:
            self.order = np.arange(self.lam.shape[0])
        if self.rank is None:
            self.rank = self.lam.shape[0]

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    @property
    def mask(self) -> np.ndarray:
        """Boolean vector marking the retained eigenpairs."""
        mask = np.zeros(self.n, dtype=bool)
        mask[:self.rank] = True
        return mask


@dataclass(eq=False)
class SpectralGraph:
    """A graph together with its spectrum, decomposed once at load time."""

    graph: Graph
    spectrum: Spectrum = field(repr=False)

    @property
    def n(self) -> int:
        return self.graph.n


def _check_symmetric(A: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise PreconditionError(f"Matrix must be square, got shape {A.shape}")
    if A.size and np.max(np.abs(A - A.T)) > tol:
        raise PreconditionError(f"Matrix is not symmetric within {tol:g}")
    return A


def _jacobi_eigh(A: np.ndarray, tol: float, max_sweeps: int):
    """Cyclic Jacobi rotations; returns (eigenvalues, eigenvectors) in solver order."""
    a = (A + A.T) / 2.0
    n = a.shape[0]
    V = np.eye(n)
    scale = max(1.0, float(np.linalg.norm(a)))
    for sweep in range(max_sweeps + 1):
        off = math.sqrt(max(0.0, float(np.sum(a * a) - np.sum(np.diag(a) ** 2))))
        if off < tol * scale:
            return np.diag(a).copy(), V
        if sweep == max_sweeps:
            raise ConvergenceError("Jacobi eigensolver did not converge", residual=off, sweeps=sweep)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                v_p = V[:, p].copy()
                v_q = V[:, q].copy()
                V[:, p] = c * v_p - s * v_q
                V[:, q] = s * v_p + c * v_q


def eig_decompose(
    A: np.ndarray,
    ordering: str = "magnitude",
    solver: str = "auto",
    tol: float = 1e-12,
    max_sweeps: int = 100,
) -> Spectrum:
    """
    Eigendecomposition of a symmetric matrix.

    Eigenvalues are sorted descending by absolute value (``ordering="magnitude"``)
    or by signed value (``ordering="signed"``); ties keep solver order. Each
    eigenvector is flipped so that its largest-magnitude component is positive.

    Jacobi stops once the off-diagonal Frobenius norm drops below
    ``tol * max(1, ||A||_F)``. For matrices with ``||A||_F <= 1`` this is the
    absolute bound ``tol``; larger matrices get a bound proportional to their
    norm, since rounding leaves off-diagonal residue of order ``eps * ||A||_F``.

    Args:
        A (numpy.ndarray): Square matrix, symmetric within 1e-12.
        ordering (str, optional): "magnitude" or "signed". Default "magnitude".
        solver (str, optional): "jacobi", "lapack" or "auto" (Jacobi up to
            ``JACOBI_MAX_N`` nodes, LAPACK above). Default "auto".
        tol (float, optional): Jacobi stopping threshold on the off-diagonal
            Frobenius norm, relative to max(1, ||A||_F). Default 1e-12.
        max_sweeps (int, optional): Jacobi sweep cap. Default 100.

    Returns:
        Spectrum: Decomposition with ``U diag(lam) U^T = A``.

    Raises:
        PreconditionError: If ``A`` is not square and symmetric, or an option is unknown.
        ConvergenceError: If Jacobi does not converge within ``max_sweeps``.
    """
    A = _check_symmetric(A)
    if ordering not in ORDERINGS:
        raise PreconditionError(f"Unknown eigenvalue ordering: {ordering}")
    if solver not in SOLVERS:
        raise PreconditionError(f"Unknown eigensolver: {solver}")

    n = A.shape[0]
    if solver == "jacobi" or (solver == "auto" and n <= JACOBI_MAX_N):
        raw_lam, raw_U = _jacobi_eigh(A, tol, max_sweeps)
    else:
        raw_lam, raw_U = np.linalg.eigh((A + A.T) / 2.0)

    key = -np.abs(raw_lam) if ordering == "magnitude" else -raw_lam
    order = np.argsort(key, kind="stable")
    lam = raw_lam[order]
    U = raw_U[:, order]

    # Sign convention: largest-magnitude component of each eigenvector is positive.
    pivots = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivots, np.arange(n)])
    signs[signs == 0] = 1.0
    U = U * signs

    return Spectrum(U=U, lam=lam, order=order, ordering=ordering)


def recompose(spectrum: Spectrum) -> np.ndarray:
    """
    Rebuild the symmetric matrix ``U diag(lam) U^T``.

    Raises:
        PreconditionError: If ``U`` is not (n, n) for an eigenvalue vector of length n.
    """
    U = np.asarray(spectrum.U, dtype=np.float64)
    lam = np.asarray(spectrum.lam, dtype=np.float64)
    if lam.ndim != 1 or U.shape != (lam.shape[0], lam.shape[0]):
        raise PreconditionError(f"Eigenvector matrix {U.shape} does not match {lam.shape[0]} eigenvalues")
    M = (U * lam) @ U.T
    return (M + M.T) / 2.0


def retained_count(n: int, alpha: float) -> int:
    """Number of eigenpairs kept by the alpha-quantile rule: ``max(1, floor(alpha * n))``."""
    if not 0.0 < alpha <= 1.0:
        raise PreconditionError(f"alpha must lie in (0, 1], got {alpha}")
    return max(1, min(n, int(math.floor(alpha * n + 1e-9))))


def truncate_spectrum(spectrum: Spectrum, alpha: float) -> Spectrum:
    """
    Keep the top ``floor(alpha * n)`` eigenpairs (at least one) in the spectrum's ordering.

    Discarded eigenvalues are set to zero; all eigenvectors are kept so that
    ``recompose`` still returns an (n, n) matrix.

    Raises:
        PreconditionError: If ``alpha`` is not in (0, 1].
    """
    k = retained_count(spectrum.n, alpha)
    lam = spectrum.lam.copy()
    lam[k:] = 0.0
    return Spectrum(U=spectrum.U, lam=lam, order=spectrum.order, ordering=spectrum.ordering, rank=k)


def binarize(A_cont: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """
    Turn a continuous generated adjacency into a simple undirected graph.

    The matrix is symmetrized by averaging with its transpose; an edge is
    present iff the averaged value exceeds ``threshold``. The diagonal is zero.
    """
    A = np.asarray(A_cont, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise PreconditionError(f"Adjacency must be square, got shape {A.shape}")
    B = ((A + A.T) / 2.0 > threshold).astype(np.float64)
    np.fill_diagonal(B, 0.0)
    return B


def decompose_all(
    graphs: Sequence[Graph],
    ordering: str = "magnitude",
    solver: str = "auto",
    max_workers: int = 1,
) -> List[SpectralGraph]:
    """
    Decompose every graph once, in parallel, keeping input order.

    Args:
        graphs (list of Graph): Graphs to decompose.
        ordering (str, optional): Eigenvalue ordering. Default "magnitude".
        solver (str, optional): Eigensolver choice. Default "auto".
        max_workers (int, optional): Maximum number of thread workers. Default 1.

    Returns:
        list of SpectralGraph: One record per input graph.
    """
    def _one(graph: Graph) -> SpectralGraph:
        return SpectralGraph(graph=graph, spectrum=eig_decompose(graph.A, ordering=ordering, solver=solver))

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as executor:
        records = list(executor.map(_one, graphs))
    logger.debug(f"Decomposed {len(records)} graphs")
    return records
