"""The numba kernels must match the numpy fallbacks bit for bit."""

import numpy as np
import pytest

from ivise.kernels import numpy_impl

numba_impl = pytest.importorskip("ivise.kernels.numba_impl")


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(42)


def test_box_blur_matches(rng):
    img = rng.integers(0, 256, (37, 53, 3), dtype=np.uint8).astype(np.uint8)
    assert np.array_equal(numpy_impl.box_blur3(img), numba_impl.box_blur3(img))


def test_box_blur_flat_is_identity(rng):
    img = np.full((16, 16, 3), 77, dtype=np.uint8)
    assert np.array_equal(numpy_impl.box_blur3(img), img)
    assert np.array_equal(numba_impl.box_blur3(img), img)


@pytest.mark.parametrize("shape,out", [((1080, 1920), (160, 160)),
                                       ((160, 160), (160, 160)),
                                       ((7, 5), (31, 13))])
def test_resize_matches(rng, shape, out):
    img = rng.integers(0, 256, (*shape, 3), dtype=np.uint8).astype(np.uint8)
    a = numpy_impl.bilinear_resize(img, *out)
    b = numba_impl.bilinear_resize(img, *out)
    assert np.array_equal(a, b)


def test_resize_identity(rng):
    img = rng.integers(0, 256, (64, 64, 3), dtype=np.uint8).astype(np.uint8)
    assert np.array_equal(numpy_impl.bilinear_resize(img, 64, 64), img)


def test_kmeans_assign_matches(rng):
    pixels = rng.integers(0, 256, (5000, 3)).astype(np.float64)
    centers = rng.integers(0, 256, (5, 3)).astype(np.float64)
    la, sa, ca = numpy_impl.kmeans_assign(pixels, centers)
    lb, sb, cb = numba_impl.kmeans_assign(pixels, centers)
    assert np.array_equal(la, lb)
    assert np.array_equal(sa, sb)
    assert np.array_equal(ca, cb)


def test_kmeans_tie_goes_to_first_center():
    pixels = np.array([[10.0, 10.0, 10.0]])
    centers = np.array([[10.0, 10.0, 10.0], [10.0, 10.0, 10.0]])
    for impl in (numpy_impl, numba_impl):
        labels, _, counts = impl.kmeans_assign(pixels, centers)
        assert labels[0] == 0
        assert counts.tolist() == [1, 0]


def test_rle_matches(rng):
    values = np.repeat(rng.integers(0, 4, (200, 3)), rng.integers(1, 9, 200),
                       axis=0).astype(np.uint8)
    va, la = numpy_impl.rle_encode_runs(values)
    vb, lb = numba_impl.rle_encode_runs(values)
    assert np.array_equal(va, vb)
    assert np.array_equal(la, lb)
    assert int(la.sum()) == values.shape[0]


def test_rle_long_run_split():
    values = np.zeros((70000, 3), dtype=np.uint8)
    for impl in (numpy_impl, numba_impl):
        vals, lens = impl.rle_encode_runs(values)
        assert lens.tolist() == [65535, 70000 - 65535]
        assert np.array_equal(vals, np.zeros((2, 3), dtype=np.uint8))


def test_rle_empty():
    empty = np.zeros((0, 3), dtype=np.uint8)
    for impl in (numpy_impl, numba_impl):
        vals, lens = impl.rle_encode_runs(empty)
        assert vals.shape == (0, 3)
        assert lens.shape == (0,)


def test_triangle_matches(rng):
    for _ in range(50):
        pts = rng.uniform(-5, 60, 6)
        window = (-10, 70, -10, 70)
        xa, ya = numpy_impl.triangle_interior(*pts, *window)
        xb, yb = numba_impl.triangle_interior(*pts, *window)
        assert np.array_equal(xa, xb)
        assert np.array_equal(ya, yb)


def test_triangle_empty_window():
    xa, ya = numpy_impl.triangle_interior(0, 0, 1, 0, 0, 1, 5, 4, 5, 4)
    assert xa.size == 0 and ya.size == 0
