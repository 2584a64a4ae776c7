from __future__ import annotations

import pytest

from _report import LINES
from synthbuild.config import DatasetConfig, EmitFlags


@pytest.fixture
def small_cfg() -> DatasetConfig:
    """Fast LoD-2 config with all outputs enabled at low resolution."""
    return DatasetConfig(samples=5, seed=3, image_size=64, views_per_model=2, points_per_cloud=256)


@pytest.fixture
def lean_cfg() -> DatasetConfig:
    """Metadata and mesh only, for tests that only need manifests."""
    emit = EmitFlags(render_png=False, segmentation_png=False, depth_png=False, depth_float=False,
                     normals_png=False, cloud_ply=False)
    return DatasetConfig(samples=5, seed=1, lod=1, image_size=32, emit=emit)


def pytest_terminal_summary(terminalreporter):
    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
