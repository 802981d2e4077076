import numpy as np
import pytest

from shiftadapt.dataio import SliceStack


def make_stack(subject_id="s", label=0, shape=(4, 32, 32), seed=0, standardize=True):
    """A synthetic SliceStack with optional exact standardization."""
    rng = np.random.default_rng(seed)
    arr = rng.standard_normal(shape)
    if standardize:
        arr = (arr - arr.mean()) / arr.std()
    return SliceStack(
        subject_id=subject_id,
        slices=arr.astype(np.float32),
        label=label,
        normalization_stats=(0.0, 1.0),
    )


@pytest.fixture
def tiny_stacks():
    """Sixteen labeled stacks with a blatant class offset, 4x32x32."""
    stacks = []
    rng = np.random.default_rng(7)
    for i in range(16):
        label = i % 2
        arr = rng.standard_normal((4, 32, 32)) * 0.2
        arr[:, 8:16, 8:16] += 3.0 if label else -3.0
        stacks.append(
            SliceStack(
                subject_id=f"s{i:02d}",
                slices=arr.astype(np.float32),
                label=label,
                normalization_stats=(0.0, 1.0),
            )
        )
    return stacks
