import numpy as np
import pytest

from teacher_bridge.containers import load_container, save_container
from teacher_bridge.errors import InputError


class TestRoundTrip:
    def test_values_and_shapes(self, tmp_path):
        path = tmp_path / "c.srav"
        entries = {
            "a": np.arange(6, dtype=np.float32).reshape(2, 3),
            "b": np.float32(46.875),
            "c": np.zeros(0, dtype=np.float32),
        }
        save_container(entries, path)
        out = load_container(path)
        assert set(out) == {"a", "b", "c"}
        np.testing.assert_array_equal(out["a"], entries["a"])
        assert out["b"].shape == ()
        assert float(out["b"]) == 46.875
        assert out["c"].size == 0

    def test_list_form_preserves_order(self, tmp_path):
        path = tmp_path / "c.srav"
        save_container([("x", np.ones(2)), ("y", np.zeros(3))], path)
        out = load_container(path)
        assert list(out) == ["x", "y"]

    def test_float64_coerced_to_float32(self, tmp_path):
        path = tmp_path / "c.srav"
        save_container({"v": np.array([1.0, 2.0], dtype=np.float64)}, path)
        assert load_container(path)["v"].dtype == np.float32

    def test_duplicate_names_rejected(self, tmp_path):
        with pytest.raises(InputError, match="duplicate"):
            save_container([("x", np.ones(1)), ("x", np.ones(1))], tmp_path / "c.srav")


class TestMalformed:
    def test_bad_magic(self, tmp_path):
        path = tmp_path / "c.srav"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(InputError, match="magic"):
            load_container(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "c.srav"
        save_container({"v": np.ones(8, dtype=np.float32)}, path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 5])
        with pytest.raises(InputError, match="truncated"):
            load_container(path)

    def test_short_file(self, tmp_path):
        path = tmp_path / "c.srav"
        path.write_bytes(b"SRAV")
        with pytest.raises(InputError, match="truncated"):
            load_container(path)
