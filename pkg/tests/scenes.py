"""Random multi-organ scenes for property tests."""

import numpy as np

from maskrepair.volume import BinaryMask, LabelVolume

SCENE_ORGANS = ("liver", "lung_right", "lung_left", "colon", "intestine")


def random_labels(seed, max_side=14, n_labels=len(SCENE_ORGANS)):
    """Packed volume made of random boxes plus salt noise, labels 1..n_labels."""
    rng = np.random.default_rng(seed)
    shape = tuple(int(v) for v in rng.integers(6, max_side + 1, size=3))
    data = np.zeros(shape, dtype=np.int32)
    for _ in range(int(rng.integers(2, 9))):
        label = int(rng.integers(1, n_labels + 1))
        lo = [int(rng.integers(0, s)) for s in shape]
        hi = [int(min(s, l + rng.integers(1, max(2, s // 2) + 1))) for l, s in zip(lo, shape)]
        region = data[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
        region[region == 0] = label
    salt = rng.random(shape) < rng.uniform(0.0, 0.05)
    data[salt & (data == 0)] = rng.integers(1, n_labels + 1, size=int((salt & (data == 0)).sum()))
    return data


def random_masks(seed, max_side=14):
    data = random_labels(seed, max_side)
    vol = LabelVolume(data, orientation=("LR", "AP", "SI"))
    return {name: BinaryMask(data == k + 1, vol.spacing, vol.orientation)
            for k, name in enumerate(SCENE_ORGANS)}


def random_mask(seed, shape=(12, 12, 12), density=None):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.02, 0.5) if density is None else density
    return BinaryMask(rng.random(shape) < p, orientation=("LR", "AP", "SI"))
