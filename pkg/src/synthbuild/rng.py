"""Named random sub-streams derived from a per-sample seed.

Every consumer (massing, facades, point cloud, each view) gets its own
generator so that changing one setting, e.g. the point count, never
reshuffles anything else.
"""

from __future__ import annotations

import numpy as np

PURPOSES = {
    "massing": 1,
    "detailing": 2,
    "cloud": 3,
    "view": 4,
}


def stream(seed: int, purpose: str, k: int = 0) -> np.random.Generator:
    code = PURPOSES[purpose]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, code, k])))
