import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from jrepack.tables import build_tables

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def tables():
    return build_tables()


@pytest.fixture(scope="session")
def corpus():
    """``{name: jpeg_bytes}`` for the standard set followed by the wild set."""
    datasets = pytest.importorskip("jrepack.datasets")
    pytest.importorskip("skimage")
    pytest.importorskip("sklearn")
    return dict(datasets.standard_set() + datasets.wild_set())


@pytest.fixture(scope="session")
def standard_names():
    from jrepack.datasets import STANDARD_IMAGES

    return [name for name, _ in STANDARD_IMAGES]


@pytest.fixture(scope="session")
def small_jpegs():
    """A few small baseline JPEGs that cover the layouts the parser supports."""
    pytest.importorskip("PIL")
    from jrepack.datasets import encode_jpeg

    rng = np.random.default_rng(7)
    y, x = np.mgrid[0:45, 0:61]
    grey = (128 + 60 * np.sin(x / 5.0) * np.cos(y / 7.0) + rng.normal(0, 6, x.shape)).clip(0, 255)
    rgb = np.stack([grey, np.roll(grey, 9, axis=1), 255 - grey], axis=-1)
    return {
        "grey": encode_jpeg(grey, 85),
        "rgb-420": encode_jpeg(rgb, 80),
        "rgb-444-optimized": encode_jpeg(rgb, 92, subsampling=0, optimize=True),
        "rgb-422-restarts": encode_jpeg(rgb, 75, subsampling=1, restart_marker_blocks=3),
        "grey-restarts": encode_jpeg(grey, 60, restart_marker_rows=1),
    }


@pytest.fixture(scope="session")
def medium_jpeg():
    """A 256x256 colour photograph, large enough for repacking to pay off."""
    pytest.importorskip("skimage")
    from skimage import data

    from jrepack.datasets import encode_jpeg

    return encode_jpeg(data.astronaut()[::2, ::2], 85)
