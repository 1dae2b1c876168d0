"""Declarative model architecture description shared by config, engine, and search."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DimensionMismatch, InvalidArchitecture

ACTIVATIONS = ("relu", "none")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "relu"


@dataclass(frozen=True)
class ModelSpec:
    """Ordered dense-layer list; dimensions must chain end to end."""

    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, ...]
    output_dim: int

    def validate(self) -> None:
        if not self.layers:
            raise InvalidArchitecture("model has no layers")
        for layer in self.layers:
            if layer.in_dim < 1 or layer.out_dim < 1:
                raise InvalidArchitecture(f"non-positive layer dimension: {layer}")
            if layer.activation not in ACTIVATIONS:
                raise InvalidArchitecture(f"unknown activation: {layer.activation}")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise InvalidArchitecture(
                    f"dimension chain broken: layer out {a.out_dim} feeds layer in {b.in_dim}"
                )
        if math.prod(self.input_shape) != self.layers[0].in_dim:
            raise InvalidArchitecture(
                f"input shape {self.input_shape} does not match first layer "
                f"in_dim {self.layers[0].in_dim}"
            )
        if self.layers[-1].out_dim != self.output_dim:
            raise InvalidArchitecture(
                f"last layer out_dim {self.layers[-1].out_dim} != output_dim {self.output_dim}"
            )

    @property
    def num_params(self) -> int:
        return sum(l.in_dim * l.out_dim + l.out_dim for l in self.layers)

    def to_dict(self) -> dict:
        return {
            "layers": [
                {"in": l.in_dim, "out": l.out_dim, "activation": l.activation}
                for l in self.layers
            ],
            "inputShape": list(self.input_shape),
            "outputDim": self.output_dim,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        try:
            layers = tuple(
                LayerSpec(int(l["in"]), int(l["out"]), str(l.get("activation", "relu")))
                for l in d["layers"]
            )
            spec = cls(
                layers=layers,
                input_shape=tuple(int(v) for v in d["inputShape"]),
                output_dim=int(d["outputDim"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidArchitecture(f"malformed model spec: {e}") from e
        spec.validate()
        return spec


def mlp_spec(input_shape: tuple[int, ...], hidden: list[int], output_dim: int) -> ModelSpec:
    """Dense network with ReLU hidden layers and a linear output layer."""
    dims = [math.prod(input_shape), *hidden, output_dim]
    layers = []
    for i, (a, b) in enumerate(zip(dims, dims[1:])):
        last = i == len(dims) - 2
        layers.append(LayerSpec(a, b, "none" if last else "relu"))
    spec = ModelSpec(tuple(layers), tuple(input_shape), output_dim)
    spec.validate()
    return spec
