import numpy as np
import pytest

from pdeminer.core.rational_net import RationalActivation, RationalNetwork, create_network
from pdeminer.dataset_manager import SampleSet, gen_heat
from pdeminer.utils.config import DatasetSource, ExperimentConfig, NetworkConfig, TrainConfig


def smooth_activation(shift: float = 0.0) -> RationalActivation:
    """Rational activation with a denominator that has no real roots at all"""
    return RationalActivation(num=np.array([0.1 + shift, 1.0, 0.3, 0.05]), den=np.array([1.0, 0.1, 0.2]))


def affine_network(weight, bias, name: str = "U") -> RationalNetwork:
    """Single affine layer, no hidden activations"""
    weight = np.atleast_2d(np.asarray(weight, dtype=float))
    return RationalNetwork(widths=(weight.shape[1], weight.shape[0]), weights=[weight],
                           biases=[np.atleast_1d(np.asarray(bias, dtype=float))], activations=[], name=name)


def smooth_network(widths, seed: int = 0, name: str = "U") -> RationalNetwork:
    net = create_network(widths, kind="rational", name=name, seed=seed)
    net.activations = [smooth_activation(0.01 * i) for i in range(net.n_hidden)]
    return net


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_nets():
    """U: (x, t) -> u and N: (U, D_x U, D_x^2 U) -> D_t u, both tiny"""
    return smooth_network((2, 5, 5, 1), seed=1, name="U"), smooth_network((3, 6, 1), seed=2, name="N")


@pytest.fixture
def toy_samples(rng):
    t = rng.uniform(0.0, 1.0, 10)
    x = rng.uniform(-1.0, 1.0, 10)
    return SampleSet(t, x, np.sin(np.pi * x) * np.exp(-t))


@pytest.fixture(scope="session")
def tiny_heat():
    return gen_heat(alpha=0.05, ic="sine", n_x=21, n_t=11, n_modes=64)


@pytest.fixture
def tiny_config(tmp_path):
    """A discovery run that finishes in seconds"""
    return ExperimentConfig(
        name="tiny",
        dataset=DatasetSource(equation="heat", ic="sine", n_x=21, n_t=11, n_modes=64),
        noise=0.0,
        n_data=100,
        train=TrainConfig(n_coll=50, adam_epochs=3, lbfgs_epochs=2, derivative_order=1, log_every=1),
        networks=NetworkConfig(u_widths=[2, 4, 1], n_hidden=[4], activation="rational"),
        library_degree=2,
        n_extract=200,
        output_dir=str(tmp_path / "run"),
        seed=7,
    )
