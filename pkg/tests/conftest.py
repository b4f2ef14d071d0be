import os
import sys
import json
import pytest
import numpy as np
from scipy.linalg import expm

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from src.config.enums import IntegrationMode
from src.models.domain import D1State, IntegratorConfig, ModelParams, ThermalConfig


@pytest.fixture(autouse=True)
def reset_settings(tmp_path, monkeypatch):
    """Reset singleton + isolate overlay file and RABI_* environment."""
    from src.config.settings import Settings

    monkeypatch.chdir(tmp_path)
    for key in list(os.environ):
        if key.startswith("RABI_"):
            monkeypatch.delenv(key, raising=False)
    Settings._instance = None
    yield
    Settings._instance = None


@pytest.fixture
def config_file(tmp_path):
    """Overlay file helper with write/read/exists."""
    path = tmp_path / ".rabi_config.json"

    class ConfigPath:
        def __init__(self, p): self._path = p
        def write(self, data): self._path.write_text(json.dumps(data)); return self._path
        def exists(self): return self._path.exists()
        def read(self): return json.loads(self._path.read_text())

    return ConfigPath(path)


# ==================== Physical parameters ==================== #

@pytest.fixture
def params():
    """ε=0, V=−0.05, ω=ħ=k_B=1, λ=0.2"""
    return ModelParams()


@pytest.fixture
def params_strong():
    return ModelParams(lam=0.5)


@pytest.fixture
def thermal():
    return ThermalConfig(beta=1.0)


@pytest.fixture
def simplified():
    return IntegratorConfig(mode=IntegrationMode.SIMPLIFIED)


@pytest.fixture
def full():
    return IntegratorConfig(mode=IntegrationMode.FULL)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_state(rng, radius: float = 1.0) -> D1State:
    """Unit-norm (A, B) with f, g inside a disc of the given radius."""
    a = rng.normal(size=2) + 1j * rng.normal(size=2)
    a /= np.linalg.norm(a)
    f, g = (radius * np.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform()) for _ in range(2))
    return D1State(A=complex(a[0]), B=complex(a[1]), f=complex(f), g=complex(g))


# ==================== Brute-force Fock oracles ==================== #

def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim)), 1).astype(complex)


def displacement(z: complex, dim: int) -> np.ndarray:
    a = annihilation(dim)
    return expm(z * a.conj().T - np.conj(z) * a)


def dense_rabi_hamiltonian(params: ModelParams, dim: int) -> np.ndarray:
    """spin ⊗ Fock, spin up first, built from Kronecker products"""
    a = annihilation(dim)
    sz = np.diag([1.0, -1.0])
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    eye = np.eye(dim)
    return (0.5 * params.epsilon * np.kron(sz, eye) + params.V * np.kron(sx, eye)
            + params.hw * np.kron(np.eye(2), a.conj().T @ a)
            + 0.5 * params.lam * np.kron(sz, a + a.conj().T))


def davydov_vector(state: D1State, dim: int, level: int = 0) -> np.ndarray:
    """A|+⟩D(f)|n⟩ + B|−⟩D(g)|n⟩"""
    ket = np.zeros(dim, dtype=complex)
    ket[level] = 1.0
    return np.concatenate([state.A * displacement(state.f, dim) @ ket, state.B * displacement(state.g, dim) @ ket])


@pytest.fixture
def fock_oracle():
    class FockOracle:
        annihilation = staticmethod(annihilation)
        displacement = staticmethod(displacement)
        hamiltonian = staticmethod(dense_rabi_hamiltonian)
        davydov_vector = staticmethod(davydov_vector)

    return FockOracle


@pytest.fixture
def make_state(rng):
    return lambda radius=1.0: random_state(rng, radius)
