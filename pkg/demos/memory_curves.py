"""Repeated recovery of a bare qubit and of the three-qubit phase code.

Prints the fidelity every 50 steps and the fitted effective T2 of each curve.
Run with ``python demos/memory_curves.py``.
"""

import numpy as np

from varqec import baselines, channels, fidelity

T_STEP = 1.8e-6
STEPS = 300

bare_noise = channels.pd_channel(channels.pd_error_prob(T_STEP, 19e-6))
code_noise = channels.pd_channel(0.091)

bare = fidelity.repeated_recovery_fidelity(np.eye(2), np.eye(2), bare_noise, fidelity.SchemeLayout(1, 1, 0), STEPS)
code = baselines.three_qubit_phase_code()
coded = fidelity.repeated_recovery_fidelity(code.encoder, code.recovery, code_noise, code.layout, STEPS)

print(f"{'M':>4} {'t (us)':>8} {'bare':>8} {'phase code':>10}")
for m in range(0, STEPS, 50):
    print(f"{m + 1:4d} {(m + 1) * T_STEP * 1e6:8.1f} {bare[m]:8.4f} {coded[m]:10.4f}")

steps = np.arange(1, STEPS + 1)
for name, series in (("bare", bare), ("phase code", coded)):
    t2 = fidelity.fit_effective_t2(np.column_stack([steps, series]), T_STEP)
    print(f"effective T2, {name}: {t2 * 1e6:.1f} us")
