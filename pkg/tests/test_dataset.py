import numpy as np
import pytest
from skimage import io

from stad.core.exceptions import DataError
from stad.repositories import DatasetRepository, read_image, read_mask, resize_image
from stad.repositories.dataset_repository import split_validation
from stad.utils.image_io import save_png
from stad.utils.synthetic import write_synthetic_category


class TestImages:
    def test_grayscale_is_replicated(self, tmp_path):
        pixels = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
        io.imsave(str(tmp_path / "gray.png"), pixels, check_contrast=False)
        image = read_image(tmp_path / "gray.png")
        assert image.shape == (3, 3, 4)
        assert image.dtype == np.float32
        np.testing.assert_array_equal(image[0], image[2])
        assert image.max() == pytest.approx(220 / 255)

    def test_alpha_is_dropped(self, tmp_path):
        pixels = np.full((5, 6, 4), 255, dtype=np.uint8)
        pixels[:, :, 3] = 0
        io.imsave(str(tmp_path / "rgba.png"), pixels, check_contrast=False)
        image = read_image(tmp_path / "rgba.png")
        assert image.shape == (3, 5, 6)
        np.testing.assert_array_equal(image, 1.0)

    def test_undecodable_file(self, tmp_path):
        (tmp_path / "broken.png").write_bytes(b"not an image")
        with pytest.raises(DataError):
            read_image(tmp_path / "broken.png")

    def test_mask_is_any_non_zero_pixel(self, tmp_path):
        pixels = np.zeros((4, 4), dtype=np.uint8)
        pixels[1, 2] = 1
        pixels[3, 3] = 255
        io.imsave(str(tmp_path / "m.png"), pixels, check_contrast=False)
        assert np.count_nonzero(read_mask(tmp_path / "m.png")) == 2

    def test_resize_keeps_constant_images_constant(self):
        image = np.full((3, 30, 50), 0.25, dtype=np.float32)
        out = resize_image(image, 17)
        assert out.shape == (3, 17, 17)
        np.testing.assert_allclose(out, 0.25, atol=1e-6)

    def test_resize_to_native_size_copies(self, rng):
        image = rng.random((3, 8, 8)).astype(np.float32)
        out = resize_image(image, 8)
        np.testing.assert_array_equal(out, image)
        assert out is not image

    def test_nearest_neighbour_keeps_masks_binary(self):
        mask = np.zeros((1, 10, 10), dtype=np.float32)
        mask[0, 2:6, 3:8] = 1.0
        out = resize_image(mask, 23, order=0)
        assert set(np.unique(out)) <= {0.0, 1.0}


class TestValidationSplit:
    def test_seeded_and_disjoint(self):
        paths = [f"{i:03d}.png" for i in range(20)]
        train, validation = split_validation(paths, 0.1, seed=4)
        assert len(validation) == 2
        assert sorted(train + validation) == paths
        assert split_validation(paths, 0.1, seed=4) == (train, validation)

    def test_keeps_at_least_one_of_each(self):
        train, validation = split_validation(["a", "b"], 0.9, seed=0)
        assert len(train) == len(validation) == 1
        train, validation = split_validation(["a", "b", "c"], 0.01, seed=0)
        assert len(validation) == 1

    def test_needs_two_images(self):
        with pytest.raises(DataError):
            split_validation(["a"], 0.1, seed=0)


class TestDatasetRepository:
    def test_indexes_a_category(self, tiny_config, tiny_category):
        index = DatasetRepository(tiny_config).load_dataset()
        assert (len(index.train), len(index.validation), len(index.test)) == (5, 1, 5)
        assert index.test_labels == ["foreign", "good"]
        assert index.category == "category"
        defective = [e for e in index.test if e.is_anomalous]
        assert len(defective) == 3
        assert all(e.mask_path.endswith("_mask.png") for e in defective)

    def test_test_set_masks_follow_the_labels(self, tiny_config):
        repo = DatasetRepository(tiny_config)
        images, masks, entries = repo.load_test_set(repo.load_dataset())
        for image, mask, entry in zip(images, masks, entries):
            assert image.shape == (3, 32, 32)
            assert mask.shape == (32, 32) and mask.dtype == bool
            assert mask.any() == entry.is_anomalous

    def test_missing_mask_is_a_data_error(self, tiny_config, tiny_category):
        (tiny_category / "ground_truth" / "foreign" / "001_mask.png").unlink()
        with pytest.raises(DataError):
            DatasetRepository(tiny_config).load_dataset()

    def test_mask_with_a_different_raw_size(self, tiny_config, tiny_category):
        io.imsave(str(tiny_category / "ground_truth" / "foreign" / "000_mask.png"),
                  np.full((20, 20), 255, dtype=np.uint8), check_contrast=False)
        repo = DatasetRepository(tiny_config)
        with pytest.raises(DataError):
            repo.load_test_set(repo.load_dataset())

    def test_missing_category(self, tiny_config, tmp_path):
        with pytest.raises(DataError):
            DatasetRepository(tiny_config).load_dataset(str(tmp_path / "nowhere"))

    def test_images_are_zoomed_to_image_side(self, tiny_config):
        repo = DatasetRepository(tiny_config)
        images = repo.load_images(repo.load_dataset().train)
        assert all(image.shape == (3, 32, 32) for image in images)

    def test_corpus(self, tiny_config, tmp_path):
        corpus = DatasetRepository(tiny_config).load_corpus()
        assert len(corpus) == 4
        assert corpus[0].shape == (3, 40, 40)
        save_png(np.zeros((3, 8, 8)), tmp_path / "single" / "only.png")
        with pytest.raises(DataError):
            DatasetRepository(tiny_config).load_corpus(str(tmp_path / "single"))

    def test_oneclass_layout(self, tiny_config, tmp_path, rng):
        root = tmp_path / "digits"
        for name in ("0", "1"):
            for split in ("train", "test"):
                save_png(rng.random((3, 8, 8)), root / split / name / "a.png")
        layout = DatasetRepository(tiny_config).load_oneclass(str(root))
        assert sorted(layout) == ["0", "1"]
        assert [p.name for p in layout["1"][1]] == ["a.png"]

    def test_oneclass_needs_two_classes(self, tiny_config, tmp_path, rng):
        root = tmp_path / "digits"
        save_png(rng.random((3, 8, 8)), root / "train" / "0" / "a.png")
        save_png(rng.random((3, 8, 8)), root / "test" / "0" / "a.png")
        with pytest.raises(DataError):
            DatasetRepository(tiny_config).load_oneclass(str(root))


def test_synthetic_category_layout(tmp_path):
    root = write_synthetic_category(tmp_path / "cat", seed=1, num_train=2, num_test_anomalous=1, num_test_good=1, side=24, defect_size=6)
    assert read_image(root / "train" / "good" / "001.png").shape == (3, 24, 24)
    mask = read_mask(root / "ground_truth" / "foreign" / "000_mask.png")
    assert np.count_nonzero(mask) == 36
