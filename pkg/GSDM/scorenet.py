"""
GSDM.scorenet - Size-agnostic score networks and their checkpoint format

Two small torch networks estimate the scores of the diffused graph:

- ``SpectrumScoreNet`` (s_phi): a per-eigenvalue MLP over the eigenvalue, a
  sinusoidal time embedding, a pooled graph context and (optionally) the
  projection of the node features onto the matching eigenvector.
- ``FeatureScoreNet`` (s_theta): two rounds of normalized message passing over
  ``U diag(Lambda_t) U^T`` followed by a per-node read-out.

The full-rank baseline swaps the spectrum network for ``AdjacencyScoreNet``, a
per-edge MLP over the strict upper triangle of a noisy adjacency matrix.

All computations run on the CPU in float64. Gradients come from torch autograd;
``grad_check`` compares them with central finite differences.

Example usage:
```python
import numpy as np
from GSDM.scorenet import ScoreNetArch, ScoreNetParams, spectrum_score

params = ScoreNetParams.initialize(ScoreNetArch(d=2, hidden=8, time_dim=4), seed=0)
n = 5
scores = spectrum_score(params, np.zeros((n, 2)), np.ones(n), np.eye(n), t=0.5)
```
"""

import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from GSDM import __version__
from GSDM.console import get_logger
from GSDM.exceptions import ArchitectureMismatchError, FormatError, NonFiniteError, PreconditionError
from GSDM.graphs import SpectralGraph
from GSDM.schedules import NoiseSchedule

logger = get_logger("scorenet")

VARIANTS = ("spectral", "fullrank")
CHECKPOINT_MAGIC = b"GSDM-CKPT"
CHECKPOINT_VERSION = 1

DTYPE = torch.float64


@dataclass(frozen=True)
class ScoreNetArch:
    """
    Network dimensions.

    Attributes:
        d (int): Node-feature dimension (0 disables the feature network).
        hidden (int): Hidden width H. Default 32.
        time_dim (int): Time-embedding dimension E (even). Default 16.
        use_eigvec (bool): Feed ``U^T X`` to the spectrum network. Default True.
        variant (str): "spectral" or "fullrank". Default "spectral".
        zero_final (bool): Zero-initialize the read-out layers. Default True.
    """

    d: int
    hidden: int = 32
    time_dim: int = 16
    use_eigvec: bool = True
    variant: str = "spectral"
    zero_final: bool = True

    def __post_init__(self):
        if self.d < 0 or self.hidden < 1 or self.time_dim < 2 or self.time_dim % 2:
            raise PreconditionError(f"Invalid network dimensions: {self}")
        if self.variant not in VARIANTS:
            raise PreconditionError(f"Unknown network variant: {self.variant}")

    def same_shape(self, other: "ScoreNetArch") -> bool:
        """True when two architectures have interchangeable parameters."""
        keys = ("d", "hidden", "time_dim", "use_eigvec", "variant")
        return all(getattr(self, k) == getattr(other, k) for k in keys)


class TimeEmbedding(nn.Module):
    """Sinusoidal embedding with geometric frequencies from 1 to 1e4; norm is sqrt(E / 2)."""

    def __init__(self, dim: int):
        super().__init__()
        freqs = torch.logspace(0.0, 4.0, dim // 2, dtype=DTYPE)
        self.register_buffer("freqs", freqs, persistent=False)

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        angles = t * self.freqs
        return torch.cat([torch.sin(angles), torch.cos(angles)])


def _linear(fan_in: int, fan_out: int) -> nn.Linear:
    return nn.Linear(fan_in, fan_out, dtype=DTYPE)


class SpectrumScoreNet(nn.Module):
    """Per-eigenvalue MLP: one score per eigenvalue, shared across graph sizes."""

    def __init__(self, d: int, hidden: int, time_dim: int, use_eigvec: bool):
        super().__init__()
        self.d = d
        self.use_eigvec = use_eigvec and d > 0
        self.context = _linear(2 + d, time_dim)
        in_dim = 1 + 2 * time_dim + (d if self.use_eigvec else 0)
        self.hidden1 = _linear(in_dim, hidden)
        self.hidden2 = _linear(hidden, hidden)
        self.out = _linear(hidden, 1)

    def forward(self, X: torch.Tensor, lam: torch.Tensor, U: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        n = lam.shape[0]
        pooled = X.mean(dim=0) if self.d > 0 else X.new_zeros(0)
        ctx = torch.tanh(self.context(torch.cat([lam.mean().reshape(1), lam.abs().max().reshape(1), pooled])))
        features = [lam.unsqueeze(1), temb.expand(n, -1), ctx.expand(n, -1)]
        if self.use_eigvec:
            features.append(U.T @ X)
        h = torch.tanh(self.hidden1(torch.cat(features, dim=1)))
        h = torch.tanh(self.hidden2(h))
        return self.out(h).squeeze(1)


class FeatureScoreNet(nn.Module):
    """Two rounds of message passing over a row-normalized weighted adjacency, then a per-node read-out."""

    ROUNDS = 2

    def __init__(self, d: int, hidden: int, time_dim: int):
        super().__init__()
        self.embed = _linear(d + time_dim, hidden)
        self.rounds = nn.ModuleList([_linear(2 * hidden, hidden) for _ in range(self.ROUNDS)])
        self.out = _linear(hidden, d)

    def forward(self, X: torch.Tensor, A_tilde: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        n = X.shape[0]
        A_hat = A_tilde / (1.0 + A_tilde.abs().sum(dim=1, keepdim=True))
        h = torch.tanh(self.embed(torch.cat([X, temb.expand(n, -1)], dim=1)))
        for layer in self.rounds:
            h = torch.tanh(layer(torch.cat([h, A_hat @ h], dim=1)))
        return self.out(h)


class AdjacencyScoreNet(nn.Module):
    """Per-edge MLP over the strict upper triangle of a noisy adjacency (full-rank baseline)."""

    def __init__(self, d: int, hidden: int, time_dim: int):
        super().__init__()
        self.d = d
        self.hidden1 = _linear(2 + time_dim + 2 * d, hidden)
        self.hidden2 = _linear(hidden, hidden)
        self.out = _linear(hidden, 1)

    def forward(self, X: torch.Tensor, A: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        n = A.shape[0]
        rows, cols = torch.triu_indices(n, n, offset=1)
        degree = A.sum(dim=1) / n
        m = rows.shape[0]
        features = [
            A[rows, cols].unsqueeze(1),
            (degree[rows] + degree[cols]).unsqueeze(1),
            temb.expand(m, -1),
        ]
        if self.d > 0:
            features += [X[rows] + X[cols], X[rows] * X[cols]]
        h = torch.tanh(self.hidden1(torch.cat(features, dim=1)))
        h = torch.tanh(self.hidden2(h))
        return self.out(h).squeeze(1)


class ScoreNetParams(nn.Module):
    """
    The trainable pair (theta, phi) of score networks.

    Attributes:
        arch (ScoreNetArch): Dimensions the networks were built with.
        theta (FeatureScoreNet or None): Node-feature score network (None when d = 0).
        phi (SpectrumScoreNet or AdjacencyScoreNet): Spectrum (or adjacency) score network.
    """

    def __init__(self, arch: ScoreNetArch):
        super().__init__()
        self.arch = arch
        self.time_embed = TimeEmbedding(arch.time_dim)
        self.theta = FeatureScoreNet(arch.d, arch.hidden, arch.time_dim) if arch.d > 0 else None
        if arch.variant == "spectral":
            self.phi = SpectrumScoreNet(arch.d, arch.hidden, arch.time_dim, arch.use_eigvec)
        else:
            self.phi = AdjacencyScoreNet(arch.d, arch.hidden, arch.time_dim)

    @classmethod
    def initialize(cls, arch: ScoreNetArch, seed: int = 0) -> "ScoreNetParams":
        """
        Build the networks with fan-in-scaled uniform weights drawn from a private seed.

        Read-out layers are zeroed when ``arch.zero_final`` is set, so the
        initial score is 0 for every input.
        """
        with torch.random.fork_rng(devices=[]):
            torch.manual_seed(seed)
            params = cls(arch)
        if arch.zero_final:
            with torch.no_grad():
                for net in (params.theta, params.phi):
                    if net is not None:
                        net.out.weight.zero_()
                        net.out.bias.zero_()
        return params

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def embed_time(self, t: float) -> torch.Tensor:
        return self.time_embed(torch.tensor(float(t), dtype=DTYPE))

    def all_finite(self) -> bool:
        return all(bool(torch.isfinite(p).all()) for p in self.parameters())


def _tensor(x) -> torch.Tensor:
    return torch.as_tensor(np.asarray(x, dtype=np.float64), dtype=DTYPE)


def _check_inputs(X_t: np.ndarray, Lambda_t: np.ndarray, U: np.ndarray, t: float):
    X_t = np.asarray(X_t, dtype=np.float64)
    Lambda_t = np.asarray(Lambda_t, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    n = Lambda_t.shape[0]
    if Lambda_t.ndim != 1 or X_t.ndim != 2 or X_t.shape[0] != n or U.shape != (n, n):
        raise PreconditionError(
            f"Inconsistent shapes: X_t {X_t.shape}, Lambda_t {Lambda_t.shape}, U {U.shape}"
        )
    if not 0.0 <= t <= 1.0:
        raise PreconditionError(f"Diffusion time must lie in [0, 1], got {t}")
    if not (np.all(np.isfinite(X_t)) and np.all(np.isfinite(Lambda_t)) and np.all(np.isfinite(U))):
        raise PreconditionError("Score network inputs must be finite")
    return X_t, Lambda_t, U


def _spectral_forward(params: ScoreNetParams, X, lam, U, t: float) -> Tuple[torch.Tensor, torch.Tensor]:
    """(feature score, spectrum score) as tensors attached to the autograd graph."""
    temb = params.embed_time(t)
    s_lam = params.phi(X, lam, U, temb)
    if params.theta is None:
        return X.new_zeros(X.shape), s_lam
    A_tilde = (U * lam) @ U.T
    return params.theta(X, A_tilde, temb), s_lam


def _fullrank_forward(params: ScoreNetParams, X, A, t: float) -> Tuple[torch.Tensor, torch.Tensor]:
    """(feature score, upper-triangle adjacency score) as tensors."""
    temb = params.embed_time(t)
    s_adj = params.phi(X, A, temb)
    if params.theta is None:
        return X.new_zeros(X.shape), s_adj
    return params.theta(X, A, temb), s_adj


def spectrum_score(params: ScoreNetParams, X_t: np.ndarray, Lambda_t: np.ndarray, U: np.ndarray, t: float) -> np.ndarray:
    """
    Spectrum score s_phi(X_t, Lambda_t, U, t), one value per eigenvalue.

    Args:
        params (ScoreNetParams): Spectral-variant networks.
        X_t (numpy.ndarray): Noisy node features, shape (n, d).
        Lambda_t (numpy.ndarray): Noisy eigenvalues, length n.
        U (numpy.ndarray): Eigenvector matrix, shape (n, n).
        t (float): Diffusion time in [0, 1].

    Returns:
        numpy.ndarray: Length-n score vector.

    Raises:
        PreconditionError: On inconsistent shapes, t outside [0, 1] or non-finite inputs.
    """
    X_t, Lambda_t, U = _check_inputs(X_t, Lambda_t, U, t)
    with torch.no_grad():
        _, s_lam = _spectral_forward(params, _tensor(X_t), _tensor(Lambda_t), _tensor(U), t)
    return s_lam.numpy().copy()


def feature_score(params: ScoreNetParams, X_t: np.ndarray, Lambda_t: np.ndarray, U: np.ndarray, t: float) -> np.ndarray:
    """Node-feature score s_theta(X_t, Lambda_t, U, t), shape (n, d)."""
    X_t, Lambda_t, U = _check_inputs(X_t, Lambda_t, U, t)
    with torch.no_grad():
        s_x, _ = _spectral_forward(params, _tensor(X_t), _tensor(Lambda_t), _tensor(U), t)
    return s_x.numpy().copy()


def joint_scores(params: ScoreNetParams, X_t: np.ndarray, Lambda_t: np.ndarray, U: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """Both spectral scores from one forward pass: (s_theta, s_phi)."""
    X_t, Lambda_t, U = _check_inputs(X_t, Lambda_t, U, t)
    with torch.no_grad():
        s_x, s_lam = _spectral_forward(params, _tensor(X_t), _tensor(Lambda_t), _tensor(U), t)
    return s_x.numpy().copy(), s_lam.numpy().copy()


def adjacency_score(params: ScoreNetParams, X_t: np.ndarray, A_t: np.ndarray, t: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Full-rank scores: (feature score (n, d), symmetric adjacency score (n, n) with zero diagonal).
    """
    X_t = np.asarray(X_t, dtype=np.float64)
    A_t = np.asarray(A_t, dtype=np.float64)
    n = A_t.shape[0]
    if A_t.shape != (n, n) or X_t.shape[0] != n:
        raise PreconditionError(f"Inconsistent shapes: X_t {X_t.shape}, A_t {A_t.shape}")
    if not (np.all(np.isfinite(X_t)) and np.all(np.isfinite(A_t))):
        raise PreconditionError("Score network inputs must be finite")
    with torch.no_grad():
        s_x, s_adj = _fullrank_forward(params, _tensor(X_t), _tensor(A_t), t)
    S = np.zeros((n, n))
    rows, cols = np.triu_indices(n, k=1)
    S[rows, cols] = s_adj.numpy()
    return s_x.numpy().copy(), S + S.T


# --- training objective ---

@dataclass(eq=False)
class NoisyExample:
    """
    One training element: a clean graph, a diffusion time and the noise that corrupts it.

    For the full-rank variant ``eps_Lambda`` holds the noise on the strict
    upper triangle of the adjacency instead of the spectrum.
    """

    record: SpectralGraph
    t: float
    eps_X: np.ndarray
    eps_Lambda: np.ndarray

    @classmethod
    def draw(
        cls,
        record: SpectralGraph,
        rng: np.random.Generator,
        t_eps: float = 1e-5,
        T: float = 1.0,
        variant: str = "spectral",
    ) -> "NoisyExample":
        """Draw ``t ~ U[t_eps, T]`` then standard-normal noise for X and the spectrum (or edges)."""
        n = record.n
        t = float(rng.uniform(t_eps, T))
        eps_X = rng.standard_normal((n, record.graph.d))
        size = n if variant == "spectral" else n * (n - 1) // 2
        return cls(record=record, t=t, eps_X=eps_X, eps_Lambda=rng.standard_normal(size))


@dataclass
class LossParts:
    """Batch loss split by component (tensors, attached to the autograd graph)."""

    total: torch.Tensor
    loss_X: torch.Tensor
    loss_Lambda: torch.Tensor


def _mean_square(x: torch.Tensor) -> torch.Tensor:
    return (x * x).mean() if x.numel() else x.new_zeros(())


def batch_loss(
    params: ScoreNetParams,
    batch: Sequence[NoisyExample],
    schedule: NoiseSchedule,
    schedule_lambda: Optional[NoiseSchedule] = None,
) -> LossParts:
    """
    Noise-prediction weighted denoising score-matching loss.

    Each element contributes ``mean((std_X * s_theta + eps_X)**2)`` and
    ``mean((std_L * s_phi + eps_L)**2)``, i.e. ``std(t)**2 * ||s - target||**2``
    averaged over entries; elements are then averaged over the batch.

    Raises:
        PreconditionError: If the batch is empty.
    """
    if not batch:
        raise PreconditionError("Cannot evaluate the loss of an empty batch")
    schedule_lambda = schedule_lambda or schedule
    loss_X = []
    loss_L = []
    for example in batch:
        graph, spectrum = example.record.graph, example.record.spectrum
        mx = schedule.marginal(example.t)
        ml = schedule_lambda.marginal(example.t)
        eps_X = _tensor(example.eps_X)
        eps_L = _tensor(example.eps_Lambda)
        X_t = mx.mean_coef * _tensor(graph.X) + mx.std * eps_X
        if params.arch.variant == "spectral":
            lam_t = ml.mean_coef * _tensor(spectrum.lam) + ml.std * eps_L
            s_x, s_l = _spectral_forward(params, X_t, lam_t, _tensor(spectrum.U), example.t)
        else:
            n = graph.n
            rows, cols = np.triu_indices(n, k=1)
            upper = ml.mean_coef * graph.A[rows, cols] + ml.std * example.eps_Lambda
            A_t = np.zeros((n, n))
            A_t[rows, cols] = upper
            A_t = A_t + A_t.T
            s_x, s_l = _fullrank_forward(params, X_t, _tensor(A_t), example.t)
        loss_X.append(_mean_square(mx.std * s_x + eps_X))
        loss_L.append(_mean_square(ml.std * s_l + eps_L))
    lx = torch.stack(loss_X).mean()
    ll = torch.stack(loss_L).mean()
    return LossParts(total=lx + ll, loss_X=lx, loss_Lambda=ll)


def loss_and_grads(
    params: ScoreNetParams,
    batch: Sequence[NoisyExample],
    schedule: NoiseSchedule,
    schedule_lambda: Optional[NoiseSchedule] = None,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Loss value and its exact gradient with respect to every parameter.

    Returns:
        tuple: ``(loss, grads)`` where ``grads`` maps parameter names to arrays
        shaped like the parameters.

    Raises:
        PreconditionError: If the batch is empty.
        NonFiniteError: If the loss is NaN or infinite.
    """
    params.zero_grad(set_to_none=True)
    parts = batch_loss(params, batch, schedule, schedule_lambda)
    if not torch.isfinite(parts.total):
        raise NonFiniteError("Non-finite loss")
    parts.total.backward()
    grads = {}
    for name, p in params.named_parameters():
        grads[name] = np.zeros(tuple(p.shape)) if p.grad is None else p.grad.detach().numpy().copy()
    params.zero_grad(set_to_none=True)
    return float(parts.total.detach()), grads


def grad_check(
    params: ScoreNetParams,
    batch: Sequence[NoisyExample],
    schedule: NoiseSchedule,
    h: float = 1e-5,
    schedule_lambda: Optional[NoiseSchedule] = None,
) -> float:
    """
    Compare autograd gradients with central finite differences.

    For every parameter tensor the relative error
    ``||g - cd|| / (||g|| + ||cd|| + 1e-12)`` is computed; the maximum over
    tensors is returned (0 when both gradients vanish).

    Raises:
        PreconditionError: If ``h`` is not positive.
    """
    if h <= 0:
        raise PreconditionError(f"Finite-difference step must be positive, got {h}")
    _, analytic = loss_and_grads(params, batch, schedule, schedule_lambda)

    def _loss() -> float:
        with torch.no_grad():
            return float(batch_loss(params, batch, schedule, schedule_lambda).total)

    worst = 0.0
    for name, p in params.named_parameters():
        flat = p.data.view(-1)
        cd = np.zeros(flat.numel())
        for i in range(flat.numel()):
            original = float(flat[i])
            flat[i] = original + h
            up = _loss()
            flat[i] = original - h
            down = _loss()
            flat[i] = original
            cd[i] = (up - down) / (2.0 * h)
        g = analytic[name].reshape(-1)
        err = float(np.linalg.norm(g - cd) / (np.linalg.norm(g) + np.linalg.norm(cd) + 1e-12))
        worst = max(worst, err)
    return worst


# --- checkpoints ---

@dataclass
class Checkpoint:
    """
    Contents of a checkpoint file.

    Attributes:
        params (ScoreNetParams): Restored networks.
        step (int): Global optimizer step at save time.
        optimizer (dict or None): Optimizer name and hyper-parameters.
        moments (list or None): Per-parameter (exp_avg, exp_avg_sq) pairs for Adam.
        extra (dict): Free-form metadata (e.g. training config).
    """

    params: ScoreNetParams
    step: int = 0
    optimizer: Optional[dict] = None
    moments: Optional[List[Tuple[np.ndarray, np.ndarray]]] = None
    extra: dict = field(default_factory=dict)


def _adam_moments(params: ScoreNetParams, optimizer: Optional[torch.optim.Optimizer]):
    if not isinstance(optimizer, torch.optim.Adam):
        return None
    moments = []
    for p in params.parameters():
        state = optimizer.state.get(p)
        if not state:
            return None
        moments.append((state["exp_avg"].detach().numpy(), state["exp_avg_sq"].detach().numpy()))
    return moments


def save_checkpoint(
    path: str,
    params: ScoreNetParams,
    optimizer: Optional[torch.optim.Optimizer] = None,
    step: int = 0,
    extra: Optional[dict] = None,
) -> None:
    """
    Write a checkpoint: magic line, JSON header line, then raw little-endian float64 data.

    Parameters are written in declaration order, followed by the Adam first and
    second moments of each parameter when an Adam optimizer with state is given.
    """
    named = list(params.named_parameters())
    moments = _adam_moments(params, optimizer)
    opt_info = None
    if optimizer is not None:
        group = optimizer.param_groups[0]
        opt_info = {"name": type(optimizer).__name__.lower(), "lr": group["lr"]}
        if "betas" in group:
            opt_info.update(betas=list(group["betas"]), eps=group["eps"])
    header = {
        "version": CHECKPOINT_VERSION,
        "package": __version__,
        "arch": asdict(params.arch),
        "params": [[name, list(p.shape)] for name, p in named],
        "step": int(step),
        "optimizer": opt_info,
        "moments": moments is not None,
        "extra": extra or {},
    }
    with open(path, "wb") as handle:
        handle.write(CHECKPOINT_MAGIC + b" v%d\n" % CHECKPOINT_VERSION)
        handle.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
        for _, p in named:
            handle.write(p.detach().numpy().astype("<f8").tobytes())
        for exp_avg, exp_avg_sq in moments or []:
            handle.write(exp_avg.astype("<f8").tobytes())
            handle.write(exp_avg_sq.astype("<f8").tobytes())
    logger.debug(f"Saved checkpoint {path} at step {step}")


def load_checkpoint(path: str, arch: Optional[ScoreNetArch] = None) -> Checkpoint:
    """
    Read a checkpoint written by ``save_checkpoint``.

    Args:
        path (str): Checkpoint file.
        arch (ScoreNetArch, optional): Expected architecture; checked against the header.

    Returns:
        Checkpoint: Restored parameters, step and optimizer moments.

    Raises:
        FormatError: On a bad magic line, unreadable header or truncated data.
        ArchitectureMismatchError: If ``arch`` differs from the stored architecture.
    """
    with open(path, "rb") as handle:
        stream = io.BytesIO(handle.read())
    magic = stream.readline().rstrip(b"\n")
    if magic != CHECKPOINT_MAGIC + b" v%d" % CHECKPOINT_VERSION:
        raise FormatError(f"Not a GSDM checkpoint (version {CHECKPOINT_VERSION}): {path}", line=1)
    try:
        header = json.loads(stream.readline().decode("utf-8"))
        stored = ScoreNetArch(**header["arch"])
        shapes = [(name, tuple(shape)) for name, shape in header["params"]]
        step = int(header["step"])
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(f"Corrupt checkpoint header in {path}: {e}", line=2) from e
    if arch is not None and not arch.same_shape(stored):
        raise ArchitectureMismatchError(f"Checkpoint architecture {stored} does not match requested {arch}")

    params = ScoreNetParams(stored)
    expected = [(name, tuple(p.shape)) for name, p in params.named_parameters()]
    if expected != shapes:
        raise FormatError(f"Checkpoint parameter layout does not match architecture {stored}")

    def _read(shape) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        raw = stream.read(8 * count)
        if len(raw) != 8 * count:
            raise FormatError(f"Truncated checkpoint data in {path}")
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)

    with torch.no_grad():
        for (_, shape), p in zip(shapes, params.parameters()):
            p.copy_(torch.from_numpy(_read(shape)))
    moments = None
    if header.get("moments"):
        moments = [(_read(shape), _read(shape)) for _, shape in shapes]
    if stream.read(1):
        raise FormatError(f"Trailing bytes after checkpoint data in {path}")
    if not params.all_finite():
        raise FormatError(f"Checkpoint {path} holds non-finite parameters")
    return Checkpoint(
        params=params,
        step=step,
        optimizer=header.get("optimizer"),
        moments=moments,
        extra=header.get("extra", {}),
    )


def restore_adam_state(optimizer: torch.optim.Adam, params: ScoreNetParams, moments, step: int) -> None:
    """Load saved first/second moments into a freshly built Adam optimizer."""
    state = optimizer.state_dict()
    state["state"] = {
        i: {
            "step": torch.tensor(float(step)),
            "exp_avg": torch.from_numpy(m1.copy()),
            "exp_avg_sq": torch.from_numpy(m2.copy()),
        }
        for i, (m1, m2) in enumerate(moments)
    }
    optimizer.load_state_dict(state)


def relative_l2(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / ||b|| (inf when b = 0 and a != b)."""
    denom = float(np.linalg.norm(b))
    diff = float(np.linalg.norm(np.asarray(a) - np.asarray(b)))
    if denom == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / denom
