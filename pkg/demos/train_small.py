"""Train a three-qubit encoder and decoder against amplitude and phase damping.

A scaled-down version of the wait-time experiment: no refresh qubits, only
the logical qubit is scored.  Finishes in under a minute.
"""

import numpy as np

from varqec import OptimizerConfig, SchemeLayout, baselines, build_ansatz_b, channels, train_qvector

layout = SchemeLayout(k=1, n=3, r=0, scope="LOGICAL_MARGINAL")
encoder = build_ansatz_b(3, 2)
decoder = build_ansatz_b(3, 2)
noise = channels.apd_channel(*channels.apd_params(4e-6, 57e-6, 19e-6))
cfg = OptimizerConfig(method="LBFGS", max_iters=300, restarts=3, init_candidates=20, seed=5)

result = train_qvector(encoder, decoder, layout, noise, cfg)
print(f"parameters: {encoder.param_count} + {decoder.param_count}")
print("restart fidelities:", np.round([r["final_fidelity"] for r in result.restarts], 5))
print(f"best: {result.best_fidelity:.5f} (no encoding {baselines.no_encoding_fidelity(noise):.5f})")
