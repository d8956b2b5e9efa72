import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptychoii.metrics import noise_baseline, registered_quality, spectrum_rmse
from ptychoii.objects import make_object
from ptychoii.scan import probe_mask


def test_identity():
    t = make_object("letters", (64, 64)).data
    assert registered_quality(t, t) == pytest.approx(1.0)


def test_shift_and_rotation():
    t = make_object("three-bar", (64, 64)).data
    r = np.roll(t, (5, 3), axis=(0, 1))[::-1, ::-1]
    assert abs(registered_quality(r, t) - 1.0) < 1e-10


@settings(max_examples=25, deadline=None)
@given(st.integers(-40, 40), st.integers(-40, 40), st.floats(1e-3, 1e3), st.booleans())
def test_invariances(dr, dc, scale, flip):
    t = make_object("two-disk", (32, 32)).data
    r = scale * np.roll(t, (dr, dc), axis=(0, 1))
    if flip:
        r = r[::-1, ::-1]
    assert abs(registered_quality(r, t) - 1.0) < 1e-10


def test_noise_vs_disk():
    disk = probe_mask(20, (64, 64)).mask
    scores = [registered_quality(np.random.default_rng(s).random((64, 64)), disk) for s in range(10)]
    assert abs(np.median(scores)) < 0.2
    assert noise_baseline(disk, 10, 0) == pytest.approx(np.median(scores))


def test_range():
    rng = np.random.default_rng(1)
    a, b = rng.random((16, 16)), rng.random((16, 16))
    assert -1 <= registered_quality(a, b) <= 1
    assert registered_quality(-b, b) < 0.5


def test_errors():
    with pytest.raises(ValueError):
        registered_quality(np.ones((8, 8)), np.eye(8))
    with pytest.raises(ValueError):
        registered_quality(np.eye(8), np.eye(4))


def test_spectrum_rmse():
    assert spectrum_rmse(np.zeros((4, 4)), np.full((4, 4), 2.0)) == 2.0
