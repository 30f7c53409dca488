import numpy as np
import pytest

from holofilter import fileio
from holofilter.fileio import FileFormatError


# ---------------------------------------------------------------------------
# tensor container


def test_tensor_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    path_a = tmp_path / "a.hstn"
    path_b = tmp_path / "b.hstn"
    arr = rng.normal(size=(3, 4, 2))
    fileio.write_tensor(path_a, arr)
    back = fileio.read_tensor(path_a)
    assert back.dtype == np.float64
    assert back.shape == (3, 4, 2)
    # float64 -> float32 happens once at the first write; rewriting what was
    # read reproduces the file byte for byte
    fileio.write_tensor(path_b, back)
    assert path_a.read_bytes() == path_b.read_bytes()
    assert np.array_equal(fileio.read_tensor(path_b), back)


def test_tensor_header_layout(tmp_path):
    path = tmp_path / "t.hstn"
    fileio.write_tensor(path, np.zeros((2, 3)))
    data = path.read_bytes()
    assert data[:4] == b"HSTN"
    assert data[4] == 1 and data[5] == 1 and data[6] == 2
    assert np.array_equal(np.frombuffer(data[7:15], dtype="<u4"), [2, 3])
    assert len(data) == 15 + 4 * 6


def test_tensor_rejects_empty_extents(tmp_path):
    with pytest.raises(ValueError):
        fileio.write_tensor(tmp_path / "x.hstn", np.zeros((0, 3)))
    with pytest.raises(ValueError):
        fileio.write_tensor(tmp_path / "x.hstn", np.float64(1.0))


@pytest.mark.parametrize("mutate,needle", [
    (lambda d: b"XSTN" + d[4:], "magic"),
    (lambda d: d[:4] + b"\x02" + d[5:], "version"),
    (lambda d: d[:5] + b"\x07" + d[6:], "dtype"),
    (lambda d: d[:6] + b"\x00" + d[7:], "rank"),
    (lambda d: d[:-3], "truncated"),
    (lambda d: d + b"\x00\x00", "truncated"),
    (lambda d: d[:7] + b"\x00\x00\x00\x00" + d[11:], "extent"),
])
def test_tensor_read_errors_are_distinct(tmp_path, mutate, needle):
    path = tmp_path / "t.hstn"
    fileio.write_tensor(path, np.arange(6.0).reshape(2, 3))
    broken = tmp_path / "broken.hstn"
    broken.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(FileFormatError) as excinfo:
        fileio.read_tensor(broken)
    assert needle in str(excinfo.value)
    assert "byte" in str(excinfo.value)


def test_tensor_values_survive_at_float32_precision(tmp_path):
    arr = np.array([1.0, 1e-30, -2.5, 3.141592653589793])
    path = tmp_path / "v.hstn"
    fileio.write_tensor(path, arr)
    assert np.array_equal(fileio.read_tensor(path),
                          arr.astype(np.float32).astype(np.float64))


# ---------------------------------------------------------------------------
# PGM label maps


@pytest.mark.parametrize("maxval,top", [(255, 254), (65535, 300)])
def test_label_map_round_trip(tmp_path, maxval, top):
    rng = np.random.default_rng(1)
    labels = rng.integers(0, top + 1, size=(5, 7))
    labels[0, 0] = top
    path = tmp_path / "m.pgm"
    fileio.write_label_map(path, labels)
    back = fileio.read_label_map(path)
    assert np.array_equal(back, labels)
    # byte-identical rewrite
    path2 = tmp_path / "m2.pgm"
    fileio.write_label_map(path2, back)
    assert path.read_bytes() == path2.read_bytes()


def test_label_map_header_comments_are_skipped(tmp_path):
    path = tmp_path / "c.pgm"
    path.write_bytes(b"P5\n# a comment\n2 2\n255\n\x00\x01\x02\x03")
    assert np.array_equal(fileio.read_label_map(path), [[0, 1], [2, 3]])


def test_label_map_rejects_value_above_maxval(tmp_path):
    path = tmp_path / "bad.pgm"
    path.write_bytes(b"P5\n2 1\n3\n\x02\x07")  # sample 7 > maxval 3
    with pytest.raises(FileFormatError):
        fileio.read_label_map(path)


def test_label_map_rejects_truncation_and_magic(tmp_path):
    good = tmp_path / "g.pgm"
    fileio.write_label_map(good, np.zeros((2, 2), dtype=int))
    bad = tmp_path / "b.pgm"
    bad.write_bytes(good.read_bytes()[:-1])
    with pytest.raises(FileFormatError):
        fileio.read_label_map(bad)
    bad.write_bytes(b"P6" + good.read_bytes()[2:])
    with pytest.raises(FileFormatError):
        fileio.read_label_map(bad)


def test_label_map_write_validation(tmp_path):
    with pytest.raises(ValueError):
        fileio.write_label_map(tmp_path / "x.pgm", np.array([[-1]]))
    with pytest.raises(ValueError):
        fileio.write_label_map(tmp_path / "x.pgm", np.array([[300]]), maxval=255)
    with pytest.raises(ValueError):
        fileio.write_label_map(tmp_path / "x.pgm", np.array([[1]]), maxval=100)


# ---------------------------------------------------------------------------
# PPM renders


def test_ppm_round_trip_with_comments(tmp_path):
    rng = np.random.default_rng(2)
    rgb = rng.integers(0, 256, size=(4, 6, 3), dtype=np.uint8)
    path = tmp_path / "i.ppm"
    fileio.write_ppm(path, rgb, comments=["baseline=0.125", "metric=mean_iu"])
    assert b"# baseline=0.125" in path.read_bytes()
    assert np.array_equal(fileio.read_ppm(path), rgb)


def test_render_labels_deterministic_and_ignore_black(tmp_path):
    labels = np.array([[0, 1], [255, 1]])
    a = fileio.render_labels(labels, palette_seed=3)
    b = fileio.render_labels(labels, palette_seed=3)
    assert np.array_equal(a, b)
    assert np.array_equal(a[1, 0], [0, 0, 0])
    assert a[0, 0].min() >= 16  # palette colors stay off-black
    assert np.array_equal(a[0, 1], a[1, 1])
    # same classes, same colors, regardless of which other classes appear
    c = fileio.render_labels(np.array([[1]]), palette_seed=3)
    assert np.array_equal(c[0, 0], a[0, 1])


def test_render_labels_constant_map_is_constant_color():
    rgb = fileio.render_labels(np.full((3, 3), 4))
    assert (rgb == rgb[0, 0]).all()


def test_render_labels_rejects_negative():
    with pytest.raises(ValueError):
        fileio.render_labels(np.array([[-1]]))


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    tensors = {"alpha_w": rng.normal(size=(2, 2)).astype(np.float32).astype(np.float64),
               "beta_b": rng.normal(size=3).astype(np.float32).astype(np.float64)}
    fileio.save_checkpoint(tmp_path / "ckpt", tensors)
    manifest = (tmp_path / "ckpt" / "manifest.txt").read_text()
    assert manifest == "alpha_w alpha_w.hstn\nbeta_b beta_b.hstn\n"
    back = fileio.load_checkpoint(tmp_path / "ckpt")
    assert sorted(back) == ["alpha_w", "beta_b"]
    for name in tensors:
        assert np.array_equal(back[name], tensors[name])
