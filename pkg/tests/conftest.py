import pytest

from lambert_sb.config import RunConfig


@pytest.fixture
def quick_config(tmp_path):
    """A coarse version of the default transfer that solves in well under a second."""
    return RunConfig(nx=6, ny=6, nz=6, nt=10, dense_n=12, n_paths=4, output_dir=str(tmp_path / "out"))
