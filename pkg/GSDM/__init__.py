"""
GSDM - Spectral diffusion models for graph generation

GSDM generates graphs by running score-based diffusion on the eigenvalues of
the adjacency matrix (plus node features) while the eigenvectors stay fixed,
then rebuilding the adjacency from the denoised spectrum.

Available modules:
- graphs: Graph containers and eigendecomposition
- schedules: VP / VE noise schedules with closed-form marginals
- diffusion: Forward perturbation, Euler-Maruyama simulation, adjacency noise kernel
- scorenet: Score networks, score-matching loss and checkpoints
- training: Training loop with deterministic resume
- sampling: Predictor-corrector and splitting reverse-time solvers
- metrics: Graph statistics and MMD evaluation
- datasets: Synthetic graph families and JSONL dataset files
- oracles: Analytic reference checks
- cli: The ``gsdm`` command

Basic usage:
```python
import GSDM

graphs = GSDM.generate_dataset(GSDM.DatasetSpec(name="community_small", count=20))
records = GSDM.decompose_all(graphs)
params, history = GSDM.train(records, GSDM.ScoreNetArch(d=graphs[0].d), GSDM.TrainConfig(epochs=5))
generated, timing = GSDM.generate_batch(params, records, 8, GSDM.SampleConfig(M=100))
print(GSDM.evaluate(generated, graphs[:8]))
```
"""

# Library version (read by the checkpoint writer and run manifests)
__version__ = '0.1.0'

from GSDM.exceptions import (
    ArchitectureMismatchError,
    ConvergenceError,
    FormatError,
    GSDMError,
    NonFiniteError,
    PreconditionError,
    VerificationError,
)
from GSDM.graphs import Graph, Spectrum, SpectralGraph, decompose_all, eig_decompose, recompose
from GSDM.schedules import NoiseSchedule
from GSDM.diffusion import perturb, conditional_score, covariance_kernel
from GSDM.scorenet import ScoreNetArch, ScoreNetParams, load_checkpoint, save_checkpoint
from GSDM.training import TrainConfig, train, resume
from GSDM.sampling import SampleConfig, generate_batch, sample_pc, sample_splitting, sample_fullrank
from GSDM.metrics import evaluate, mmd
from GSDM.datasets import DatasetSpec, generate_dataset, load_dataset, save_dataset
from GSDM.oracles import run_verification_suite

# Names exposed to users
__all__ = [
    'GSDMError',
    'PreconditionError',
    'ConvergenceError',
    'NonFiniteError',
    'FormatError',
    'ArchitectureMismatchError',
    'VerificationError',
    'Graph',
    'Spectrum',
    'SpectralGraph',
    'decompose_all',
    'eig_decompose',
    'recompose',
    'NoiseSchedule',
    'perturb',
    'conditional_score',
    'covariance_kernel',
    'ScoreNetArch',
    'ScoreNetParams',
    'load_checkpoint',
    'save_checkpoint',
    'TrainConfig',
    'train',
    'resume',
    'SampleConfig',
    'generate_batch',
    'sample_pc',
    'sample_splitting',
    'sample_fullrank',
    'evaluate',
    'mmd',
    'DatasetSpec',
    'generate_dataset',
    'load_dataset',
    'save_dataset',
    'run_verification_suite',
]
