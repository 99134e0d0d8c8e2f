import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magloc.fieldmodel import ZERO_FIELD, FieldVector
from magloc.geometry import Rotation, random_rotation
from magloc.sensor import MagnetometerSpec, measure

B = FieldVector(4e-5, 0, 0)


@pytest.mark.parametrize("basis", ["component", "magnitude"])
def test_noiseless_identity(basis, rng):
    spec = MagnetometerSpec(0.0, noise_basis=basis)
    assert measure(B, ZERO_FIELD, Rotation.identity(), spec, rng).magnitude == pytest.approx(4e-5, rel=1e-15)
    for _ in range(20):
        m = measure(B, ZERO_FIELD, random_rotation(rng), spec, rng)
        assert m.magnitude == pytest.approx(4e-5, rel=1e-12) and not m.saturated


@pytest.mark.parametrize("basis", ["component", "magnitude"])
def test_noise_bound_axis_aligned(basis):
    rng = np.random.default_rng(5)
    spec = MagnetometerSpec(0.01, noise_basis=basis)
    mags = np.array([measure(B, ZERO_FIELD, Rotation.identity(), spec, rng).magnitude for _ in range(100_000)])
    assert mags.min() >= 0.99 * 4e-5 and mags.max() <= 1.01 * 4e-5
    # uniform noise fills the band
    assert mags.min() < 0.9901 * 4e-5 and mags.max() > 1.0099 * 4e-5


@given(st.floats(1e-7, 0.1), st.floats(0, 0.2),
       st.lists(st.floats(0, 1, exclude_max=True), min_size=6, max_size=6))
def test_noise_bound_any_orientation(scale, rel, u):
    from magloc.geometry import quaternion_from_uniforms

    rng = np.random.default_rng(int(u[5] * 1e9))
    rot = Rotation(tuple(quaternion_from_uniforms(u[:3])))
    field = FieldVector(scale * (u[3] - 0.5), scale * 0.3, scale * (u[4] - 0.2))
    true = field.magnitude
    for basis in ("component", "magnitude"):
        m = measure(field, ZERO_FIELD, rot, MagnetometerSpec(rel, noise_basis=basis), rng).magnitude
        assert m >= 0
        assert (1 - rel) * true * (1 - 1e-12) <= m <= (1 + rel) * true * (1 + 1e-12)


def test_saturation_flag_and_clip(rng):
    big = FieldVector(0.2, 0.05, 0)
    m = measure(big, ZERO_FIELD, Rotation.identity(), MagnetometerSpec(0.0), rng)
    assert m.saturated and m.magnitude == pytest.approx(np.hypot(0.12, 0.05))


def test_spec_invariants():
    for kw in (dict(rel_error=-0.1), dict(rel_error=1.0), dict(range_max=0), dict(noise_basis="x")):
        with pytest.raises(ValueError):
            MagnetometerSpec(**kw)


def test_consumes_three_draws():
    a, b = np.random.default_rng(9), np.random.default_rng(9)
    for basis in ("component", "magnitude"):
        measure(B, ZERO_FIELD, Rotation.identity(), MagnetometerSpec(noise_basis=basis), a)
        b.random(3)
        assert a.random() == b.random()
