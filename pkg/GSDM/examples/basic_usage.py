"""
Basic usage examples of the GSDM library

This script walks through the main pieces of GSDM: generating a dataset,
looking at graph spectra, training score networks, sampling new graphs and
scoring them with MMD metrics.
"""

import numpy as np
from GSDM import (
    DatasetSpec,
    NoiseSchedule,
    SampleConfig,
    ScoreNetArch,
    TrainConfig,
    decompose_all,
    eig_decompose,
    evaluate,
    generate_batch,
    generate_dataset,
    recompose,
    run_verification_suite,
    train,
)
from GSDM.datasets import split

# Small settings so that every example finishes in seconds
SPEC = DatasetSpec(name="community_small", count=24, seed=0)


# Example of decomposing a graph
def test_spectrum():
    print("\n===== SPECTRUM =====")
    graphs = generate_dataset(SPEC)
    spectrum = eig_decompose(graphs[0].A)
    print(f"First graph has {graphs[0].n} nodes")
    print(f"Largest eigenvalues: {np.round(spectrum.lam[:4], 3)}")
    error = np.max(np.abs(recompose(spectrum) - graphs[0].A))
    print(f"Reconstruction error: {error:.2e}\n")


# Example of inspecting noise schedules
def test_schedules():
    print("\n===== NOISE SCHEDULES =====")
    for family in ("linear", "cosine", "two_level"):
        schedule = NoiseSchedule(family=family)
        print(f"{family:>10}: mean coefficient at t=1 is {schedule.marginal(1.0).mean_coef:.5f}")


# Example of the full train / sample / evaluate loop
def test_pipeline():
    print("\n===== TRAIN, SAMPLE, EVALUATE =====")
    graphs = generate_dataset(SPEC)
    train_graphs, test_graphs = split(graphs, 0.8, seed=0)
    records = decompose_all(train_graphs)

    arch = ScoreNetArch(d=records[0].graph.d, hidden=16, time_dim=8)
    params, history = train(records, arch, TrainConfig(epochs=5, batch_size=4, seed=0))
    print(f"Final training loss: {history['loss'].iloc[-1]:.4f}")

    generated, timing = generate_batch(params, records, len(test_graphs), SampleConfig(M=100, seed=0))
    print(f"Sampled {len(generated)} graphs, {timing['ms'].mean():.1f} ms per graph")

    table = evaluate(generated, test_graphs, dataset=SPEC.name, method="gsdm")
    print(table[["statistic", "mmd"]])


# Example of running the analytic self-checks
def test_verification():
    print("\n===== VERIFICATION =====")
    report = run_verification_suite(seed=0, quick=True)
    print(report[["check", "measured", "threshold", "passed"]])


if __name__ == "__main__":
    print("GSDM Library Usage Examples")

    # Choose one function to run
    # or run all sequentially

    test_spectrum()
    test_schedules()
    test_pipeline()
    # test_verification()
