"""The compiled kernels must agree bit for bit with the pure-Python fallback."""

import numpy as np
import pytest

from hideseek import _pykernels, kernels
from hideseek.world import build_arena

pytestmark = pytest.mark.skipif("cython" not in kernels.backends(), reason="compiled extension not built")


def _scene(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-5, 5, size=(12, 3))
    h = rng.uniform(0.1, 1.5, size=(12, 3))
    dirs = rng.normal(size=(200, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    dirs[:10, 1] = 0.0  # axis-parallel components exercise the zero-direction branch
    dirs[:10] /= np.linalg.norm(dirs[:10], axis=1, keepdims=True)
    return rng.uniform(-2, 2, 3), dirs, c - h, c + h


@pytest.mark.parametrize("seed", range(5))
def test_ray_boxes_backends_identical(seed):
    o, d, lo, hi = _scene(seed)
    a = _pykernels.ray_boxes(o, d, lo, hi, 0.1, 8.0)
    b = kernels.backends()["cython"].ray_boxes(o, d, lo, hi, 0.1, 8.0)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@pytest.mark.parametrize("seed", range(5))
def test_sphere_sweep_backends_identical(seed):
    o, d, lo, hi = _scene(seed)
    a = _pykernels.sphere_sweep(o, d[:60], 0.3, 12.0, lo, hi)
    b = kernels.backends()["cython"].sphere_sweep(o, d[:60], 0.3, 12.0, lo, hi)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@pytest.mark.parametrize("seed", range(5))
def test_segment_first_hit_backends_identical(seed):
    o, d, lo, hi = _scene(seed)
    cy = kernels.backends()["cython"]
    for p1 in o + 6.0 * d[:50]:
        assert _pykernels.segment_first_hit(o, p1, lo, hi) == cy.segment_first_hit(o, p1, lo, hi)


@pytest.mark.parametrize("seed", range(5))
def test_resolve_overlaps_backends_identical(seed):
    w = build_arena(4, 4, {"hiders": 2, "seekers": 4}, seed)
    rng = np.random.default_rng(seed)
    pos = w.pos + rng.uniform(-0.5, 0.5, w.pos.shape) * w.mask("agent")[:, None]
    prio = np.where(w.mask("agent"), kernels.AGENT, np.where(w.mask("static"), kernels.STATIC, kernels.LIGHT))
    prio = prio.astype(np.int64)
    is_agent = w.mask("agent").astype(np.uint8)
    out = []
    for mod in (_pykernels, kernels.backends()["cython"]):
        p, v = pos.copy(), rng.normal(size=pos.shape) * 0 + 1.0
        n = mod.resolve_overlaps(p, v, w.half, prio, is_agent, w.bounds_lo, w.bounds_hi, 4)
        out.append((p, v, n))
    assert np.array_equal(out[0][0], out[1][0])
    assert np.array_equal(out[0][1], out[1][1])
    assert out[0][2] == out[1][2]


def test_backend_selection_reports_active_module():
    assert kernels.BACKEND in kernels.backends()
