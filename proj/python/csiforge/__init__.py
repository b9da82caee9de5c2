# SPDX-License-Identifier: Apache-2.0
"""MIMO-OFDM channel estimation workbench.

Thin wrapper over the compiled core: non-stationary channel generation,
sparse-pilot sounding, classical and learned reconstruction, QPSK link
BER, and the pilot-overhead rate analysis.
"""

try:
    # wheel layout: the extension lives inside the package
    from ._core import *  # noqa: F401,F403
    from ._core import __version__  # noqa: F401
except ImportError:
    # in-tree layout: the extension sits on sys.path next to the package
    from _core import *  # noqa: F401,F403
    from _core import __version__  # noqa: F401

__all__ = [
    "DataError",
    "Model",
    "NumericError",
    "UsageError",
    "__version__",
    "ber_link",
    "bessel_j0",
    "channel_window",
    "ergodic_rate_term",
    "expint_e1",
    "expint_e1_scaled",
    "generate_samples",
    "init_model",
    "lmmse_refine",
    "load_model",
    "nmse_db",
    "pilot_mask_seed",
    "pilot_overhead",
    "rate_gain",
    "snr_db_to_noise_var",
    "sp_nmse_db",
    "tap_gains",
    "to_db",
]
