import struct

import numpy as np
import pytest
from PIL import Image

from tiuloss.errors import EmptyImageError, NumericalError, UnknownClassError, UnreadableFileError
from tiuloss.files import export_heatmap, probs_to_logits, read_map, read_mask, write_map, write_mask
from tiuloss.grid import ClassSet, normalize
from tiuloss.phantom import PhantomSpec, generate


def test_mask_roundtrip(tmp_path):
    for seed in range(5):
        ph = generate(PhantomSpec.random(seed, caruncle=seed % 2 == 1))
        path = write_mask(ph.mask, tmp_path / f"{seed}.png", ph.classes)
        np.testing.assert_array_equal(read_mask(path, ph.classes), ph.mask)
        with Image.open(path) as img:
            assert img.mode == "P"


def test_working_resolution_preserved(tmp_path):
    m = np.random.default_rng(0).integers(0, 4, (320, 480))
    np.testing.assert_array_equal(read_mask(write_mask(m, tmp_path / "m.png")), m)


def test_unknown_value_reported(tmp_path):
    arr = np.zeros((4, 6), np.uint8)
    arr[2, 5] = 9
    Image.fromarray(arr).save(tmp_path / "bad.png")
    with pytest.raises(UnknownClassError, match=r"9 at pixel \(2, 5\)"):
        read_mask(tmp_path / "bad.png", ClassSet.eye(caruncle=True))


def test_unreadable_and_empty(tmp_path):
    (tmp_path / "junk.png").write_bytes(b"not an image")
    with pytest.raises(UnreadableFileError):
        read_mask(tmp_path / "junk.png")
    with pytest.raises(UnreadableFileError):
        read_mask(tmp_path / "missing.png")
    with pytest.raises(EmptyImageError):
        write_mask(np.zeros((0, 3), int), tmp_path / "e.png")
    assert len({UnknownClassError.code, UnreadableFileError.code, EmptyImageError.code}) == 3


def test_map_roundtrip_bit_exact(tmp_path):
    p = normalize(np.random.default_rng(1).standard_normal((4, 5, 7))).astype(np.float32)
    write_map(p, tmp_path / "p.pmap")
    raw = (tmp_path / "p.pmap").read_bytes()
    assert raw[:4] == b"PMAP" and struct.unpack("<3I", raw[4:16]) == (4, 5, 7)
    back, kind = read_map(tmp_path / "p.pmap")
    assert kind == "prob"
    np.testing.assert_array_equal(back.astype(np.float32), p)

    x = np.random.default_rng(2).standard_normal((4, 3, 3)).astype(np.float32)
    write_map(x, tmp_path / "x.pmap", kind="logit")
    back, kind = read_map(tmp_path / "x.pmap")
    assert kind == "logit" and np.array_equal(back.astype(np.float32), x)


def test_map_corruption_detected(tmp_path):
    write_map(np.full((2, 2, 2), 0.5), tmp_path / "p.pmap")
    raw = (tmp_path / "p.pmap").read_bytes()
    (tmp_path / "t.pmap").write_bytes(raw[:-4])
    with pytest.raises(UnreadableFileError):
        read_map(tmp_path / "t.pmap")
    (tmp_path / "m.pmap").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(UnreadableFileError):
        read_map(tmp_path / "m.pmap")


def test_probs_to_logits_inverse():
    p = normalize(np.random.default_rng(3).standard_normal((4, 6, 6)))
    np.testing.assert_allclose(normalize(probs_to_logits(p)), p, atol=1e-12)


def _pixels(path):
    with Image.open(path) as img:
        return np.array(img)


def test_heatmap_conventions(tmp_path):
    export_heatmap(np.zeros((4, 4)), tmp_path / "z.png")
    assert not _pixels(tmp_path / "z.png").any()
    export_heatmap(np.full((4, 4), 0.3), tmp_path / "c.png")
    assert np.all(_pixels(tmp_path / "c.png") == 128)
    g = np.array([[0.0, 1.0], [1.0, 0.0]])
    export_heatmap(g, tmp_path / "b.png")
    np.testing.assert_array_equal(_pixels(tmp_path / "b.png"), g * 255)
    assert (tmp_path / "b.png.txt").read_text() == "min 0.0\nmax 1.0\n"
    with pytest.raises(NumericalError):
        export_heatmap(np.array([[np.inf]]), tmp_path / "n.png")
