# tests/conftest.py

import json

import numpy as np
import pytest

from cdforge.operator_core import LocalOperator, SiteWindow, embed
from cdforge.schedules_paths import IsingPath, IsingPathSpec, MpsPath, MpsPathSpec, g_of_xi

XI_LONG = 3.8
XI_SHORT = 0.9


@pytest.fixture
def ising_path():
    def make(n, **couplings):
        return IsingPath(IsingPathSpec(n=n, **couplings))

    return make


@pytest.fixture
def mps_path():
    def make(n_p, g=None, xi=XI_LONG, **kwargs):
        return MpsPath(MpsPathSpec(n_p=n_p, g=g_of_xi(xi) if g is None else g, **kwargs))

    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_hermitian(rng):
    def make(lo, hi, local_dim=2):
        dim = local_dim ** (hi - lo)
        m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        return LocalOperator(SiteWindow(lo, hi), m + m.conj().T, local_dim, True)

    return make


def _dense_on(op, window):
    if not isinstance(op, LocalOperator):
        dim = 2 ** window.width
        return np.zeros((dim, dim), dtype=complex)
    return embed(op, window).matrix


@pytest.fixture
def dense_on():
    """Embedded matrix of op on window, or zeros for a vanishing commutator."""
    return _dense_on


@pytest.fixture
def write_config(tmp_path):
    def write(config, name="experiment"):
        config = dict(config)
        config.setdefault("output_dir", str(tmp_path / "out"))
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(config))
        return str(path)

    return write


@pytest.fixture
def tiny_ising_config():
    return {
        "experiment": "ising-bench",
        "name": "tiny",
        "path": {"kind": "ising"},
        "grid": {"N": [2], "T": [0.5, 1.0]},
        "drivers": [
            {"label": "adiabatic", "driver": "adiabatic"},
            {"label": "wnc1-global", "driver": "cd", "mode": "WNC", "order": 1, "optimizer": "global"},
        ],
    }
