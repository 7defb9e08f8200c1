import gzip
import os
import struct

import numpy as np
import pytest

from cknet.data import (
    Dataset,
    IdxFormatError,
    best_threshold_accuracy,
    generate_toy_1d,
    load_idx_images,
    load_idx_labels,
    load_mnist_dir,
    load_mnist_idx,
    save_idx_images,
    save_idx_labels,
    split,
    synthetic_digits,
)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


class TestToyDataset:
    def test_minimal_construction(self):
        ds = generate_toy_1d(1, seed=0)
        x = ds.inputs[:, 0]
        assert len(ds) == 4
        assert (ds.labels == 1).sum() == 2
        blue = x[ds.labels == 0]
        assert (blue < -1).sum() == 1 and (blue > 1).sum() == 1

    @pytest.mark.parametrize("seed", [0, 1, 17, 123])
    def test_segments_are_disjoint(self, seed):
        ds = generate_toy_1d(25, seed=seed)
        x = ds.inputs[:, 0]
        red = x[ds.labels == 1]
        blue_left = x[(ds.labels == 0) & (x < 0)]
        blue_right = x[(ds.labels == 0) & (x > 0)]
        assert blue_left.max() < red.min()
        assert red.max() < blue_right.min()

    def test_classes_exactly_balanced(self):
        ds = generate_toy_1d(40, seed=2)
        assert (ds.labels == 0).sum() == (ds.labels == 1).sum() == 80

    def test_not_threshold_separable_beyond_75_percent(self):
        for seed in range(5):
            ds = generate_toy_1d(40, seed=seed)
            assert best_threshold_accuracy(ds.inputs[:, 0], ds.labels) == 0.75

    def test_invalid_size_rejected(self):
        with pytest.raises(ValueError):
            generate_toy_1d(0)


class TestBestThreshold:
    def test_separable_data_scores_one(self):
        values = np.array([-2.0, -1.0, 1.0, 2.0])
        labels = np.array([0, 0, 1, 1])
        assert best_threshold_accuracy(values, labels) == 1.0

    def test_orientation_is_free(self):
        values = np.array([-2.0, -1.0, 1.0, 2.0])
        labels = np.array([1, 1, 0, 0])
        assert best_threshold_accuracy(values, labels) == 1.0

    def test_exhaustive_against_brute_force(self):
        rng = np.random.default_rng(3)
        values = rng.standard_normal(30)
        labels = rng.integers(0, 2, 30)
        # brute force over all cuts and orientations
        candidates = np.concatenate([[-np.inf], np.sort(values), [np.inf]])
        best = 0.0
        for t in candidates:
            above = ((values > t).astype(int) == labels).mean()
            below = ((values <= t).astype(int) == labels).mean()
            best = max(best, above, below)
        assert best_threshold_accuracy(values, labels) == pytest.approx(best)


class TestIdxFormat:
    def test_single_image_fixture_has_exact_pixels(self, tmp_path):
        # hand-crafted IDX3 file: one 2x3 image with known bytes
        payload = bytes([0, 1, 2, 253, 254, 255])
        raw = struct.pack(">IIII", IMAGE_MAGIC, 1, 2, 3) + payload
        img_path = tmp_path / "img-idx3-ubyte"
        img_path.write_bytes(raw)
        lbl_path = tmp_path / "lbl-idx1-ubyte"
        lbl_path.write_bytes(struct.pack(">II", LABEL_MAGIC, 1) + bytes([7]))
        ds = load_mnist_idx(img_path, lbl_path)
        assert ds.inputs.shape == (1, 6)
        assert np.array_equal(ds.inputs[0], np.array([0, 1, 2, 253, 254, 255]) / 255.0)
        assert ds.labels[0] == 7

    def test_gzip_accepted_by_suffix(self, tmp_path):
        raw = struct.pack(">IIII", IMAGE_MAGIC, 2, 2, 2) + bytes(range(8))
        path = tmp_path / "imgs-idx3-ubyte.gz"
        path.write_bytes(gzip.compress(raw))
        images = load_idx_images(path)
        assert images.shape == (2, 2, 2)
        assert images.ravel().tolist() == list(range(8))

    def test_wrong_magic_for_labels(self, tmp_path):
        path = tmp_path / "bad-labels"
        path.write_bytes(struct.pack(">II", IMAGE_MAGIC, 1) + bytes([3]))
        with pytest.raises(IdxFormatError, match="magic"):
            load_idx_labels(path)

    def test_wrong_magic_for_images(self, tmp_path):
        path = tmp_path / "bad-images"
        path.write_bytes(struct.pack(">IIII", LABEL_MAGIC, 1, 1, 1) + bytes([3]))
        with pytest.raises(IdxFormatError, match="magic"):
            load_idx_images(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short-idx3-ubyte"
        path.write_bytes(struct.pack(">IIII", IMAGE_MAGIC, 2, 2, 2) + bytes(5))
        with pytest.raises(IdxFormatError, match="truncated"):
            load_idx_images(path)

    def test_count_mismatch_between_files(self, tmp_path):
        img_path = tmp_path / "imgs-idx3-ubyte"
        img_path.write_bytes(struct.pack(">IIII", IMAGE_MAGIC, 2, 1, 1) + bytes([1, 2]))
        lbl_path = tmp_path / "lbls-idx1-ubyte"
        lbl_path.write_bytes(struct.pack(">II", LABEL_MAGIC, 3) + bytes([0, 1, 2]))
        with pytest.raises(IdxFormatError, match="count mismatch"):
            load_mnist_idx(img_path, lbl_path)

    def test_roundtrip_identical(self, tmp_path):
        rng = np.random.default_rng(5)
        images = rng.integers(0, 256, size=(7, 4, 5), dtype=np.uint8)
        labels = rng.integers(0, 10, size=7, dtype=np.uint8)
        img_path, lbl_path = tmp_path / "a-idx3-ubyte.gz", tmp_path / "b-idx1-ubyte.gz"
        save_idx_images(img_path, images)
        save_idx_labels(lbl_path, labels)
        assert np.array_equal(load_idx_images(img_path), images)
        assert np.array_equal(load_idx_labels(lbl_path), labels)
        ds = load_mnist_idx(img_path, lbl_path)
        assert np.array_equal((ds.inputs * 255.0).round().astype(np.uint8), images.reshape(7, -1))


@pytest.mark.skipif(
    not os.environ.get("CK_DATA_DIR"), reason="CK_DATA_DIR with real MNIST not set"
)
def test_official_train_set_has_expected_dimensions():
    ds = load_mnist_dir(os.environ["CK_DATA_DIR"], train=True)
    assert len(ds) == 60000
    assert ds.input_dim == 28 * 28
    assert set(np.unique(ds.labels)) == set(range(10))


class TestSplit:
    def test_half_split_of_ten(self):
        ds = synthetic_digits(10, seed=0)
        left, right = split(ds, 0.5, seed=1)
        assert len(left) == 5 and len(right) == 5

    def test_union_is_original_multiset(self):
        ds = synthetic_digits(20, seed=1)
        left, right = split(ds, 0.3, seed=2)
        combined = np.concatenate([left.inputs, right.inputs])
        original = ds.inputs
        order_a = np.lexsort(combined.T)
        order_b = np.lexsort(original.T)
        assert np.array_equal(combined[order_a], original[order_b])

    def test_same_seed_same_split(self):
        ds = synthetic_digits(16, seed=2)
        a1, b1 = split(ds, 0.25, seed=3)
        a2, b2 = split(ds, 0.25, seed=3)
        assert np.array_equal(a1.inputs, a2.inputs)
        assert np.array_equal(b1.labels, b2.labels)

    def test_degenerate_fraction_rejected(self):
        ds = synthetic_digits(10, seed=3)
        with pytest.raises(ValueError):
            split(ds, 0.01, seed=0)
        with pytest.raises(ValueError):
            split(ds, 1.5, seed=0)


class TestSyntheticDigits:
    def test_shapes_and_range_match_mnist_conventions(self):
        ds = synthetic_digits(50, seed=4)
        assert ds.inputs.shape == (50, 784)
        assert ds.num_classes == 10
        assert ds.inputs.min() >= 0.0 and ds.inputs.max() <= 1.0

    def test_deterministic_given_seed(self):
        a = synthetic_digits(30, seed=5)
        b = synthetic_digits(30, seed=5)
        assert np.array_equal(a.inputs, b.inputs)
        assert np.array_equal(a.labels, b.labels)

    def test_all_classes_present(self):
        ds = synthetic_digits(100, seed=6)
        assert set(ds.labels.tolist()) == set(range(10))


class TestDatasetInvariants:
    def test_labels_must_be_in_range(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((2, 3)), np.array([0, 5]), num_classes=3)

    def test_take_prefix(self):
        ds = synthetic_digits(12, seed=7)
        sub = ds.take(5)
        assert len(sub) == 5
        assert np.array_equal(sub.inputs, ds.inputs[:5])
