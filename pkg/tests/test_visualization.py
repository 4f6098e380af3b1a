from __future__ import annotations

import matplotlib.pyplot as plt
import numpy as np

from sparse_fgam.helpers.dataset import Subject
from sparse_fgam.visualization import plot_lower_bound, plot_surface, plot_trajectories


def test_plot_surface(tmp_path):
    x = np.linspace(-1.0, 1.0, 6)
    t = np.linspace(0.0, 1.0, 5)
    mean = np.outer(x, np.sin(np.pi * t))
    fig = plot_surface(x, t, mean)
    assert len(fig.axes) == 2  # panel and colour bar
    plt.close(fig)

    filename = tmp_path / "surface.png"
    mask = np.abs(mean) < 0.5
    fig = plot_surface(x, t, mean, sd=0.1 + np.abs(mean), mask=mask, filename=filename)
    assert len(fig.axes) == 4
    plt.close(fig)
    assert filename.is_file()


def test_plot_trajectories(tmp_path):
    t = np.linspace(0.0, 1.0, 20)
    curves = np.vstack([np.sin(np.pi * t), np.cos(np.pi * t), t])
    subjects = [Subject(f"s{i}", [0.2, 0.8], [0.0, 1.0]) for i in range(3)]
    fig = plot_trajectories(t, curves, subjects, max_curves=2)
    ax = fig.axes[0]
    assert len(ax.lines) == 2
    assert ax.get_title() == "Estimated trajectories (2 of 3)"
    plt.close(fig)

    filename = tmp_path / "trajectories.png"
    fig = plot_trajectories(t, curves, filename=filename)
    plt.close(fig)
    assert filename.is_file()


def test_plot_lower_bound(tmp_path):
    filename = tmp_path / "bound.png"
    fig = plot_lower_bound([-10.0, -5.0, -4.5], filename=filename)
    np.testing.assert_array_equal(fig.axes[0].lines[0].get_xdata(), [1, 2, 3])
    plt.close(fig)
    assert filename.is_file()
