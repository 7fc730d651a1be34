"""Deterministic random streams.

All randomness flows from an integer master seed. A stream is a
``numpy.random.Generator`` (PCG64) built from
``SeedSequence(seed, spawn_key=(phase, *indices))``, so each phase and each
column or pair index owns an independent stream whose draws do not depend on
how many other columns or pairs exist.

Phase keys are fixed and part of the reproducibility contract:

=========  ===  ==============================================
phase      key  indices
=========  ===  ==============================================
GSC          1  (i, j) pair
CALIBRATE    2  (i, j) pair
LATENT       3  () one stream, drawn column-block by column-block
EXPAND       4  (j,) column
REPLICATE    5  (r,) replicate -> integer seed for ``generate``
BOOTSTRAP    6  (r,) replicate
=========  ===  ==============================================
"""

import numpy as np

GSC = 1
CALIBRATE = 2
LATENT = 3
EXPAND = 4
REPLICATE = 5
BOOTSTRAP = 6


def derive(seed, phase, *indices):
    """Return the generator for ``(seed, phase, *indices)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(phase),) + tuple(int(i) for i in indices))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, phase, *indices):
    """Integer seed (63-bit) derived from ``(seed, phase, *indices)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(phase),) + tuple(int(i) for i in indices))
    hi, lo = (int(v) for v in ss.generate_state(2, dtype=np.uint32))
    return ((hi << 32) | lo) >> 1
