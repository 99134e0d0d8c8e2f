import numpy as np
import pytest

from magloc import core
from magloc.config import ScenarioConfig
from magloc.fieldmodel import field_vectors
from magloc.sensor import MagnetometerSpec
from magloc.simharness import simulate_point


@pytest.mark.skipif("cython" not in core.BACKENDS, reason="compiled kernel not built")
def test_compiled_backend_is_default():
    assert core.BACKEND == "cython"


@pytest.mark.parametrize("name", ["W3", "W6", "W9", "W30"])
@pytest.mark.parametrize("basis", ["component", "magnitude"])
def test_backends_agree_with_reference_path(name, basis, phantom_2cm):
    c = ScenarioConfig(arrangement=name, runs_per_point=4, seed=99,
                       magnetometer=MagnetometerSpec(0.01, noise_basis=basis), earth_mapping="yzx")
    ws = c.build_wireset(phantom_2cm.bounding_box)
    idx = np.arange(3, len(phantom_2cm), 911)
    pos = phantom_2cm.voxels[idx]
    plan = core.KernelPlan.build(ws, c.magnetometer, c.residual, c.earth_mapping)
    uni = core.block_uniforms(c.seed, idx, c.runs_per_point, core.draws_per_run(len(ws)))
    fields = field_vectors(ws, pos)
    results = [core.simulate_block(pos, fields, uni, plan, backend=b) for b in core.BACKENDS]
    ref = [simulate_point(phantom_2cm.voxels[i], ws, c, voxel_index=i) for i in idx]
    ref_means = np.array([[p.mean_error, *p.mean_axis_error] for p in ref])
    for means, sat, fail in results:
        assert np.allclose(means, ref_means, rtol=1e-9, atol=1e-13)
        assert np.array_equal(sat, [p.saturated_runs for p in ref])
        assert np.array_equal(fail, [p.failed_runs for p in ref])


def test_saturation_counted_identically():
    c = ScenarioConfig(arrangement="W6", runs_per_point=5, magnetometer=MagnetometerSpec(range_max=2e-5))
    ws = c.build_wireset()
    pos = np.array([[0.75, 0.6, 1.0], [0.6, 0.55, 0.2]])
    plan = core.KernelPlan.build(ws, c.magnetometer, c.residual)
    uni = core.block_uniforms(0, [0, 1], 5, core.draws_per_run(len(ws)))
    outs = [core.simulate_block(pos, field_vectors(ws, pos), uni, plan, backend=b) for b in core.BACKENDS]
    assert outs[0][1].sum() > 0
    for o in outs[1:]:
        assert np.array_equal(o[1], outs[0][1])
        assert np.allclose(o[0], outs[0][0], rtol=1e-12)


def test_voxel_stream_is_counter_based():
    a = core.voxel_stream(5, 17).random(40)
    block = core.block_uniforms(5, [3, 17], 4, 10)
    assert np.array_equal(block[1].ravel(), a)
    assert not np.array_equal(block[0].ravel(), a)


def test_unknown_backend():
    with pytest.raises(ValueError):
        core.get_kernel("fortran")
