"""Figure rendering writes non-trivial files."""

import numpy as np

from cdldenoise import GrayImage, figures

from conftest import random_dictionary


def test_dictionary_mosaic(tmp_path):
    ds = random_dictionary(16, 12, seed=1)
    path = tmp_path / "atoms.png"
    figures.save_dictionary_mosaic(ds, path)
    assert path.stat().st_size > 1000


def test_error_heatmap(tmp_path, rng):
    truth = GrayImage(rng.uniform(size=(20, 20)))
    estimate = GrayImage(rng.uniform(size=(20, 20)))
    path = tmp_path / "heat.png"
    figures.save_error_heatmap(truth, estimate, path)
    assert path.stat().st_size > 1000


def test_metric_chart(tmp_path):
    path = tmp_path / "chart.png"
    figures.save_metric_chart(
        ["sigma4", "sigma8", "sigma16"], [0.01, 0.02, 0.04], [40.0, 34.0, 28.0], path
    )
    assert path.stat().st_size > 1000


def test_mosaic_handles_constant_atoms():
    flat = np.zeros((16, 4))
    flat[0, :] = 1.0  # one bright pixel per atom
    mosaic = figures._atom_mosaic(flat, max_atoms=4)
    assert mosaic.shape[0] > 4
