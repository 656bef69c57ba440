"""
Randomized single-hidden-layer feature spaces.

Element features:  phi_i(x) = tanh(W_i . x + b_i)           x a physical 2D point
Edge features:     phi_i(t) = tanh(w_i t + b_i) + tanh(w_{N+1-i} (1 - t) + b_{N+1-i})

Hidden weights and biases are drawn from U(-r, r) once and frozen; only the
output-layer coefficients are unknowns of the least-squares system, so they
are not stored here.

Every draw comes from its own numpy SeedSequence keyed by
(master seed, stream name, entity index), which makes a space a pure
function of those three values regardless of assembly order.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

import numpy as np

from hdpg.errors import ProblemDefinitionError
from hdpg.mesh import Domain

# name -> (activation, derivative)
ACTIVATIONS: Dict[str, Tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]] = {
    'tanh': (np.tanh, lambda z: 1.0 - np.tanh(z) ** 2),
}


@dataclass(frozen=True)
class FeatureSpaceConfig:
    N: int
    r: float
    seed: int
    activation: str = 'tanh'
    shared_weights: bool = False

    def __post_init__(self):
        if self.N < 1:
            raise ProblemDefinitionError(f"neuron count must be >= 1, got {self.N}")
        if not self.r > 0:
            raise ProblemDefinitionError(f"half-width r must be > 0, got {self.r}")
        if self.activation not in ACTIVATIONS:
            raise ProblemDefinitionError(f"unknown activation {self.activation!r}")


def _stream_rng(config: FeatureSpaceConfig, stream: str, entity_index: int) -> np.random.Generator:
    index = 0 if config.shared_weights else int(entity_index)
    key = (zlib.crc32(stream.encode('utf-8')), index)
    return np.random.default_rng(np.random.SeedSequence(int(config.seed), spawn_key=key))


@dataclass(frozen=True, eq=False)
class ElementFeatureSpace:
    W: np.ndarray  # (N, 2)
    b: np.ndarray  # (N,)
    domain: Domain
    activation: str = 'tanh'

    @property
    def dim(self) -> int:
        return len(self.b)

    def _pre(self, x: np.ndarray) -> np.ndarray:
        return np.atleast_2d(x) @ self.W.T + self.b[None, :]

    def values(self, x: np.ndarray) -> np.ndarray:
        """(P, 2) points -> (P, N)"""
        fn, _ = ACTIVATIONS[self.activation]
        return fn(self._pre(x))

    def gradients(self, x: np.ndarray) -> np.ndarray:
        """(P, 2) points -> (P, N, 2)"""
        _, dfn = ACTIVATIONS[self.activation]
        return dfn(self._pre(x))[:, :, None] * self.W[None, :, :]


@dataclass(frozen=True, eq=False)
class EdgeFeatureSpace:
    w: np.ndarray  # (N,)
    b: np.ndarray  # (N,)
    activation: str = 'tanh'

    @property
    def dim(self) -> int:
        return len(self.b)

    @property
    def w_flip(self) -> np.ndarray:
        return self.w[::-1]

    @property
    def b_flip(self) -> np.ndarray:
        return self.b[::-1]

    def values(self, t: np.ndarray) -> np.ndarray:
        """(P,) edge parameters -> (P, N)"""
        fn, _ = ACTIVATIONS[self.activation]
        t = np.atleast_1d(np.asarray(t, dtype=float))[:, None]
        return fn(self.w[None, :] * t + self.b[None, :]) + fn(self.w_flip[None, :] * (1.0 - t) + self.b_flip[None, :])


def init_element_space(config: FeatureSpaceConfig, entity_index: int, domain: Domain,
                       stream: str = 'element') -> ElementFeatureSpace:
    rng = _stream_rng(config, stream, entity_index)
    W = rng.uniform(-config.r, config.r, size=(config.N, 2))
    b = rng.uniform(-config.r, config.r, size=config.N)
    W.setflags(write=False)
    b.setflags(write=False)
    return ElementFeatureSpace(W=W, b=b, domain=domain, activation=config.activation)


def init_edge_space(config: FeatureSpaceConfig, entity_index: int, stream: str = 'edge') -> EdgeFeatureSpace:
    rng = _stream_rng(config, stream, entity_index)
    w = rng.uniform(-config.r, config.r, size=config.N)
    b = rng.uniform(-config.r, config.r, size=config.N)
    w.setflags(write=False)
    b.setflags(write=False)
    return EdgeFeatureSpace(w=w, b=b, activation=config.activation)


def init_global_trace_space(config: FeatureSpaceConfig, domain: Domain,
                            stream: str = 'global_trace') -> ElementFeatureSpace:
    """One feature space over the whole domain; only ever evaluated on edges."""
    return init_element_space(config, 0, domain, stream=stream)


def eval_features(space: ElementFeatureSpace, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    vals = space.values(x)
    return vals[0] if x.ndim == 1 else vals


def eval_feature_gradients(space: ElementFeatureSpace, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    grads = space.gradients(x)
    return grads[0] if x.ndim == 1 else grads


def eval_edge_features(space: EdgeFeatureSpace, t) -> np.ndarray:
    t_arr = np.asarray(t, dtype=float)
    vals = space.values(t_arr)
    return vals[0] if t_arr.ndim == 0 else vals
