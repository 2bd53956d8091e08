import numpy as np
import pytest

from cfcnn import dataio, training as tr
from cfcnn.training import Sample, TangentTarget
from criteria import toy_network


def write(path, text):
    path.write_text(text)
    return str(path)


def test_minimal_dataset(tmp_path):
    (s,) = dataio.load_dataset(write(tmp_path / "d.txt", "cfcnn-data 1 1 1 1 1\n0.5\n1.0\n"))
    assert s.x.shape == (1, 1, 1) and s.x[0, 0, 0] == 0.5 and s.y.tolist() == [1.0]


def test_slice_major_layout(tmp_path):
    (s,) = dataio.load_dataset(write(tmp_path / "d.txt", "cfcnn-data 1 2 2 1 1\n1 2 3 4\n0\n"))
    np.testing.assert_array_equal(s.x, [[[1, 2]], [[3, 4]]])


@pytest.mark.parametrize("text,line", [
    ("cfcnn-data 1 1 1 1 2\n0.5\n1.0\n0.25\n", 5),
    ("cfcnn-data 2 1 1 1 1\n0.5\n1.0\n", 2),
    ("cfcnn-data 1 1 1 1 1\n0.5\nx\n", 3),
    ("cfcnn-dta 1 1 1 1 1\n0.5\n1\n", 1),
    ("cfcnn-data 1 1 1 1 1\n0.5\n1\n2\n", 4),
])
def test_dataset_errors_are_line_numbered(tmp_path, text, line):
    with pytest.raises(dataio.DataFormatError) as info:
        dataio.load_dataset(write(tmp_path / "d.txt", text))
    assert info.value.lineno == line
    assert f":{line}:" in str(info.value)


def test_toy_roundtrip_exact(tmp_path):
    samples = dataio.toy_blobs(40, 6, 6, seed=5)
    path = str(tmp_path / "toy.txt")
    dataio.write_dataset(path, samples)
    back = dataio.load_dataset(path)
    assert len(back) == 40
    for a, b in zip(samples, back):
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.y, b.y)
    assert {int(np.argmax(s.y)) for s in back} == {0, 1}


def test_tangent_files(tmp_path):
    assert dataio.load_tangents(write(tmp_path / "e.txt", "")) == {}
    text = "cfcnn-tangents 1 1 1 2 3\n0\n0\n0 0\n1\n0.5\n1 2\n1\n-1\n0 0\n"
    tg = dataio.load_tangents(write(tmp_path / "t.txt", text), sample_count=2)
    assert len(tg[0]) == 1 and len(tg[1]) == 2
    np.testing.assert_array_equal(tg[1][0].beta, [1, 2])
    with pytest.raises(dataio.DataFormatError, match="out of range"):
        dataio.load_tangents(str(tmp_path / "t.txt"), sample_count=1)
    with pytest.raises(dataio.DataFormatError) as info:
        dataio.load_tangents(write(tmp_path / "b.txt", "cfcnn-tangents 1 1 1 2 1\n0\n0\n0\n"))
    assert info.value.lineno == 4


def test_zero_tangent_gives_zero_R(tmp_path):
    spec = toy_network()
    x = np.ones(spec.in_shape)
    path = str(tmp_path / "t.txt")
    dataio.write_tangents(path, {0: [TangentTarget(np.zeros(spec.in_shape), np.zeros(2))]})
    samples = dataio.attach_tangents([Sample(x, [1, 0])], dataio.load_tangents(path, 1))
    assert tr.loss_R(spec, tr.init_params(spec, 0, 0.5), samples[0]) == 0.0


def test_tangent_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    tangents = {2: [TangentTarget(rng.standard_normal((2, 3, 1)), rng.standard_normal(2)) for _ in range(2)]}
    path = str(tmp_path / "t.txt")
    dataio.write_tangents(path, tangents)
    back = dataio.load_tangents(path, 3)
    for a, b in zip(tangents[2], back[2]):
        np.testing.assert_array_equal(a.v, b.v)
        np.testing.assert_array_equal(a.beta, b.beta)


def test_translation_tangent():
    x = np.arange(12.0).reshape(1, 3, 4)
    v = dataio.translation_tangent(x)
    np.testing.assert_array_equal(v[0, :, 1:3], 1.0)
    np.testing.assert_array_equal(v[0, :, [0, 3]], 0.0)
