"""Exact amplitude and phase damping versus its Pauli-twirled version.

The five-qubit code only sees the Pauli part of the noise, so both columns
agree.  The alternating encoder/decoder optimization can use the coherent part
and does better on the exact channel.  Takes about a minute.
"""

import numpy as np

from varqec import baselines, channels

WAIT = 4e-6
gamma, lam = channels.apd_params(WAIT, 57e-6, 19e-6)
exact = channels.apd_channel(gamma, lam)
twirled = channels.pta_apd_channel(gamma, lam)
five = baselines.five_qubit_code()

print(f"wait {WAIT * 1e6:.1f} us: gamma = {gamma:.5f}, lambda = {lam:.5f}")
print(f"{'scheme':>12} {'exact':>8} {'twirled':>8}")
print(f"{'none':>12} {baselines.no_encoding_fidelity(exact):8.5f} {baselines.no_encoding_fidelity(twirled):8.5f}")
print(f"{'five-qubit':>12} {five.fidelity(exact):8.5f} {five.fidelity(twirled):8.5f}")
alt = [
    baselines.alternating_baseline(c, 5, 1, iters=300, restarts=2, rng=np.random.default_rng(0)).fidelity
    for c in (exact, twirled)
]
print(f"{'alternating':>12} {alt[0]:8.5f} {alt[1]:8.5f}")
