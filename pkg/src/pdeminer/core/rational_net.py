"""
Rational Neural Networks

Dense feed-forward networks whose hidden layers each own a trainable
type-(3,2) rational activation. The same forward code runs on plain numpy
arrays and on tape nodes, and on jets when exact x/t derivatives are needed.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from pdeminer.core.diff_engine import (
    AdjointTape, Jet, Node, add, div, exp, jet_div, jet_exp, jet_linear, jet_mul, jet_scale,
    jet_shift, jet_stack, jet_unit, linear, mul, stack, sub, take, value_of,
)
from pdeminer.errors import DatasetFormatError
from pdeminer.tools.rational_fit import init_rational_relu_fit, rational_is_pole_free
from pdeminer.utils.seeding import rng_stream

logger = logging.getLogger(__name__)

ACTIVATION_KINDS = ("rational", "tanh", "sigmoid")
RATIONAL_PARAMETERS = 7
CHECKPOINT_VERSION = 1


@dataclass
class RationalActivation:
    """P(z) / Q(z) with P cubic (a0..a3) and Q quadratic (b0..b2), lowest power first"""

    num: Any
    den: Any

    @classmethod
    def relu_fit(cls) -> "RationalActivation":
        numerator, denominator = init_rational_relu_fit()
        if not rational_is_pole_free(denominator):
            raise ValueError(f"Initial denominator {denominator} has a real root in [-10, 10]")
        return cls(num=np.array(numerator), den=np.array(denominator))

    @classmethod
    def identity(cls) -> "RationalActivation":
        return cls(num=np.array([0.0, 1.0, 0.0, 0.0]), den=np.array([1.0, 0.0, 0.0]))

    def coefficient(self, which: str, power: int) -> Any:
        coeffs = self.num if which == "num" else self.den
        return take(coeffs, power) if isinstance(coeffs, Node) else coeffs[power]


def activation_eval(act: RationalActivation, z: Jet) -> Jet:
    """Horner evaluation of numerator and denominator on the jet, then one series division"""
    a = [act.coefficient("num", p) for p in range(4)]
    b = [act.coefficient("den", p) for p in range(3)]

    num = jet_shift(jet_scale(z, a[3]), a[2])
    num = jet_shift(jet_mul(num, z), a[1])
    num = jet_shift(jet_mul(num, z), a[0])

    den = jet_shift(jet_scale(z, b[2]), b[1])
    den = jet_shift(jet_mul(den, z), b[0])
    return jet_div(num, den)


def _rational_value(act: RationalActivation, z: Any) -> Any:
    a = [act.coefficient("num", p) for p in range(4)]
    b = [act.coefficient("den", p) for p in range(3)]
    num = add(mul(add(mul(add(mul(a[3], z), a[2]), z), a[1]), z), a[0])
    den = add(mul(add(mul(b[2], z), b[1]), z), b[0])
    return div(num, den)


def _fixed_jet(kind: str, z: Jet) -> Jet:
    if kind == "sigmoid":
        return jet_div(jet_unit(z), jet_shift(jet_exp(jet_scale(z, -1.0)), 1.0))
    # tanh(z) = 1 - 2 / (exp(2z) + 1)
    quotient = jet_div(jet_unit(z), jet_shift(jet_exp(jet_scale(z, 2.0)), 1.0))
    return jet_shift(jet_scale(quotient, -2.0), 1.0)


def _fixed_value(kind: str, z: Any) -> Any:
    if kind == "sigmoid":
        return div(1.0, add(exp(mul(z, -1.0)), 1.0))
    return sub(1.0, mul(2.0, div(1.0, add(exp(mul(z, 2.0)), 1.0))))


@dataclass
class RationalNetwork:
    """
    Dense network with one activation per hidden layer

    Layers never share activations; for fixed kinds (tanh, sigmoid) the
    activation slots are None and carry no parameters.
    """

    widths: Tuple[int, ...]
    weights: List[Any]
    biases: List[Any]
    activations: List[Optional[RationalActivation]]
    kind: str = "rational"
    name: str = "U"
    seed: Optional[int] = None

    @property
    def n_inputs(self) -> int:
        return self.widths[0]

    @property
    def n_hidden(self) -> int:
        return len(self.widths) - 2

    def parameter_items(self) -> List[Tuple[str, Any]]:
        """(name, value) pairs in layer order: weight, bias, numerator, denominator"""
        items: List[Tuple[str, Any]] = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            items += [(f"{self.name}.layers.{i}.weight", w), (f"{self.name}.layers.{i}.bias", b)]
            if i < self.n_hidden and (act := self.activations[i]) is not None:
                items += [(f"{self.name}.act.{i}.num", act.num), (f"{self.name}.act.{i}.den", act.den)]
        return items

    def with_parameters(self, lookup: Dict[str, Any]) -> "RationalNetwork":
        """Copy of this network with every parameter taken from `lookup` by name"""
        n_layers = len(self.weights)
        activations = [
            RationalActivation(lookup[f"{self.name}.act.{i}.num"], lookup[f"{self.name}.act.{i}.den"])
            if self.activations[i] is not None else None
            for i in range(self.n_hidden)
        ]
        return RationalNetwork(
            widths=self.widths,
            weights=[lookup[f"{self.name}.layers.{i}.weight"] for i in range(n_layers)],
            biases=[lookup[f"{self.name}.layers.{i}.bias"] for i in range(n_layers)],
            activations=activations, kind=self.kind, name=self.name, seed=self.seed,
        )

    def on_tape(self, tape: AdjointTape) -> "RationalNetwork":
        return self.with_parameters({name: tape.parameter(name, value) for name, value in self.parameter_items()})

    def load_parameters(self, lookup: Dict[str, Any]) -> None:
        rebuilt = self.with_parameters(lookup)
        self.weights, self.biases, self.activations = rebuilt.weights, rebuilt.biases, rebuilt.activations

    def copy(self) -> "RationalNetwork":
        return self.with_parameters({name: np.array(value, dtype=float) for name, value in self.parameter_items()})


def parameter_count(widths: Sequence[int], kind: str = "rational") -> int:
    """Sum over layers of fan_in * fan_out + fan_out, plus 7 per hidden layer when rational"""
    if len(widths) < 2:
        raise ValueError("A network needs at least an input and an output width")
    dense = sum(fan_in * fan_out + fan_out for fan_in, fan_out in zip(widths[:-1], widths[1:]))
    return dense + (RATIONAL_PARAMETERS * (len(widths) - 2) if kind == "rational" else 0)


def init_weights(net: RationalNetwork, seed: int) -> RationalNetwork:
    """Glorot-uniform weights, zero biases, ReLU-fit activations; deterministic under seed"""
    rng = rng_stream(seed, f"init.{net.name}")
    net.weights, net.biases = [], []
    for fan_in, fan_out in zip(net.widths[:-1], net.widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        net.weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        net.biases.append(np.zeros(fan_out))
    net.activations = [RationalActivation.relu_fit() if net.kind == "rational" else None for _ in range(net.n_hidden)]
    net.seed = seed
    return net


def create_network(widths: Sequence[int], kind: str = "rational", name: str = "U", seed: int = 0) -> RationalNetwork:
    """Factory: validated widths, initialized parameters"""
    if kind not in ACTIVATION_KINDS:
        raise ValueError(f"Unknown activation kind {kind!r}; choose from {ACTIVATION_KINDS}")
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise ValueError(f"Invalid layer widths {tuple(widths)}")
    net = RationalNetwork(widths=tuple(int(w) for w in widths), weights=[], biases=[], activations=[],
                          kind=kind, name=name)
    return init_weights(net, seed)


def _activate_jet(net: RationalNetwork, layer: int, z: Jet) -> Jet:
    act = net.activations[layer]
    return activation_eval(act, z) if act is not None else _fixed_jet(net.kind, z)


def _activate_value(net: RationalNetwork, layer: int, z: Any) -> Any:
    act = net.activations[layer]
    return _rational_value(act, z) if act is not None else _fixed_value(net.kind, z)


def network_forward(net: RationalNetwork, inputs: Sequence[Jet]) -> Jet:
    """Jet path: exact derivatives of the (squeezed) network output w.r.t. the seeded coordinates"""
    if len(inputs) != net.n_inputs:
        raise ValueError(f"{net.name} expects {net.n_inputs} inputs, got {len(inputs)}")
    h = jet_stack(inputs)
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = jet_linear(h, w, b)
        if i < last:
            h = _activate_jet(net, i, h)
    return Jet(take(h.coeffs, (Ellipsis, 0)))


def network_eval(net: RationalNetwork, inputs: Union[Sequence[Any], np.ndarray, Node]) -> Any:
    """Value-only fast path; accepts an (..., n_in) array or a sequence of per-input columns"""
    x = stack(list(inputs), axis=-1) if isinstance(inputs, (list, tuple)) else inputs
    if np.shape(value_of(x))[-1] != net.n_inputs:
        raise ValueError(f"{net.name} expects {net.n_inputs} inputs, got shape {np.shape(value_of(x))}")
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        x = add(linear(x, w), b)
        if i < last:
            x = _activate_value(net, i, x)
    return take(x, (Ellipsis, 0))


# ========================================
# JOINT PARAMETER VECTOR
# ========================================

def parameter_names(nets: Sequence[RationalNetwork]) -> List[str]:
    return [name for net in nets for name, _ in net.parameter_items()]


def flatten_parameters(nets: Sequence[RationalNetwork]) -> np.ndarray:
    return np.concatenate([np.ravel(value_of(value)) for net in nets for _, value in net.parameter_items()])


def flatten_gradients(nets: Sequence[RationalNetwork], grads: Dict[str, np.ndarray]) -> np.ndarray:
    return np.concatenate([np.ravel(grads[name]) for net in nets for name, _ in net.parameter_items()])


def assign_parameters(nets: Sequence[RationalNetwork], vector: np.ndarray) -> None:
    """Write a flat vector (layer order, nets in sequence) back into the networks"""
    offset = 0
    for net in nets:
        lookup = {}
        for name, value in net.parameter_items():
            size = np.size(value)
            lookup[name] = np.array(vector[offset: offset + size], dtype=float).reshape(np.shape(value))
            offset += size
        net.load_parameters(lookup)
    if offset != len(vector):
        raise ValueError(f"Parameter vector has {len(vector)} entries, networks need {offset}")


# ========================================
# CHECKPOINTS
# ========================================

class NetworkCheckpoint(BaseModel):
    """On-disk network: widths, activation kind, flat parameters in layer order"""

    format_version: int = Field(default=CHECKPOINT_VERSION, description="Checkpoint layout version")
    name: str = Field(description="Network role, U or N")
    widths: List[int] = Field(description="Layer widths including input and output")
    activation: str = Field(description="rational, tanh or sigmoid")
    seed: Optional[int] = Field(default=None, description="Initialization seed")
    parameters: List[float] = Field(description="Flat parameter array in layer order")


def save_checkpoint(net: RationalNetwork, path: Union[str, Path]) -> Path:
    checkpoint = NetworkCheckpoint(name=net.name, widths=list(net.widths), activation=net.kind, seed=net.seed,
                                   parameters=flatten_parameters([net]).tolist())
    path = Path(path)
    path.write_text(checkpoint.model_dump_json(indent=1), encoding="utf-8")
    return path


def load_checkpoint(path: Union[str, Path]) -> RationalNetwork:
    try:
        checkpoint = NetworkCheckpoint.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except ValidationError as e:
        raise DatasetFormatError(f"Invalid checkpoint {path}: {e}") from e
    if checkpoint.format_version != CHECKPOINT_VERSION:
        raise DatasetFormatError(f"Unsupported checkpoint version {checkpoint.format_version}")
    net = create_network(checkpoint.widths, kind=checkpoint.activation, name=checkpoint.name,
                         seed=checkpoint.seed if checkpoint.seed is not None else 0)
    assign_parameters([net], np.asarray(checkpoint.parameters, dtype=float))
    net.seed = checkpoint.seed
    return net
