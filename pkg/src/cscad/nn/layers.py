"""Layers composed from autograd primitives.

Everything here is a thin parameter container; gradients come straight from
the recorded primitive graph, so a single finite-difference oracle covers
all of them.
"""

import numpy as np

from ..exceptions import DimensionMismatch, EmptySequence, ShapeMismatch
from .autograd import Tensor, concat


def glorot_uniform(rng, fan_in, fan_out, shape=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    return rng.uniform(-limit, limit, size=shape)


def _identity(x):
    return x


ACTIVATIONS = {
    "none": _identity,
    "relu": Tensor.relu,
    "elu": Tensor.elu,
    "tanh": Tensor.tanh,
    "sigmoid": Tensor.sigmoid,
    "softmax": Tensor.softmax,
}


class Module:
    def parameters(self):
        """(name, tensor) pairs in a stable order."""
        raise NotImplementedError

    def param_tensors(self):
        return [t for _, t in self.parameters()]

    def set_mode(self, training):
        pass


class Linear(Module):
    """Fully connected layer y = act(x W + b)."""

    def __init__(self, in_features, out_features, activation="none", rng=None, name="fc"):
        rng = rng or np.random.default_rng(0)
        if activation not in ACTIVATIONS:
            raise DimensionMismatch(f"unknown activation {activation!r}")
        self.name = name
        self.activation = activation
        self.weight = Tensor(glorot_uniform(rng, in_features, out_features), requires_grad=True)
        self.bias = Tensor(np.zeros(out_features), requires_grad=True)

    def __call__(self, x):
        out = x @ self.weight + self.bias
        return ACTIVATIONS[self.activation](out)

    def parameters(self):
        return [(f"{self.name}.weight", self.weight), (f"{self.name}.bias", self.bias)]


class BatchNorm1d(Module):
    """Batch normalization over the batch axis with affine scale/shift.

    Training mode normalizes by the batch mean and population variance and
    folds them into the running statistics (momentum 0.9); eval mode uses
    the frozen running statistics only.
    """

    def __init__(self, num_features, momentum=0.9, eps=1e-5, name="bn"):
        self.name = name
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(num_features), requires_grad=True)
        self.beta = Tensor(np.zeros(num_features), requires_grad=True)
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)
        self.training = True

    def set_mode(self, training):
        self.training = training

    def __call__(self, x):
        if self.training:
            mean = x.mean(axis=0, keepdims=True)
            centered = x - mean
            var = (centered * centered).mean(axis=0, keepdims=True)
            self.running_mean = (
                self.momentum * self.running_mean + (1.0 - self.momentum) * mean.data[0]
            )
            self.running_var = (
                self.momentum * self.running_var + (1.0 - self.momentum) * var.data[0]
            )
            normed = centered * (var + self.eps) ** -0.5
        else:
            normed = (x - self.running_mean) * (self.running_var + self.eps) ** -0.5
        return normed * self.gamma + self.beta

    def parameters(self):
        return [(f"{self.name}.gamma", self.gamma), (f"{self.name}.beta", self.beta)]

    def state_arrays(self):
        # running statistics are state, not parameters
        return [
            (f"{self.name}.running_mean", self.running_mean),
            (f"{self.name}.running_var", self.running_var),
        ]


class GcnLayer(Module):
    """Polynomial spectral graph filter: f(sum_k L^k H theta_k), L^0 = I.

    Powers are applied by repeated multiplication with the Laplacian, never
    by materializing L^k. With channel width 1 the coefficients are scalars
    and a whole batch filters at once as sum_k theta_k (X L^k) using the
    Laplacian's symmetry.
    """

    def __init__(self, order, in_channels=1, out_channels=1, activation="none", rng=None, name="gcn"):
        if order < 1:
            raise DimensionMismatch(f"polynomial order {order} must be >= 1")
        if activation not in ACTIVATIONS:
            raise DimensionMismatch(f"unknown activation {activation!r}")
        rng = rng or np.random.default_rng(0)
        self.name = name
        self.order = order
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.activation = activation
        self.thetas = [
            Tensor(
                glorot_uniform(rng, in_channels, out_channels),
                requires_grad=True,
            )
            for _ in range(order)
        ]

    def __call__(self, h, laplacian):
        """h: (m, in_channels) node features; laplacian: constant (m, m)."""
        lap = laplacian if isinstance(laplacian, Tensor) else Tensor(laplacian)
        if h.shape[0] != lap.shape[0]:
            raise ShapeMismatch(
                f"{h.shape[0]} feature rows against a {lap.shape} Laplacian"
            )
        power = h
        out = power @ self.thetas[0]
        for k in range(1, self.order):
            power = lap @ power
            out = out + power @ self.thetas[k]
        return ACTIVATIONS[self.activation](out)

    def forward_batch(self, x, laplacian):
        """x: (n, m) batch of samples, one scalar coefficient per order."""
        if self.in_channels != 1 or self.out_channels != 1:
            raise ShapeMismatch("batched filtering needs scalar coefficients")
        lap = laplacian if isinstance(laplacian, Tensor) else Tensor(laplacian)
        if x.shape[1] != lap.shape[0]:
            raise ShapeMismatch(f"{x.shape[1]} columns against a {lap.shape} Laplacian")
        power = x
        out = power * self.thetas[0]
        for k in range(1, self.order):
            power = power @ lap
            out = out + power * self.thetas[k]
        return ACTIVATIONS[self.activation](out)

    def parameters(self):
        return [(f"{self.name}.theta{k}", t) for k, t in enumerate(self.thetas)]


class LstmCell(Module):
    """One LSTM layer: sigmoid input/forget/output gates, tanh candidate
    and output squash, forget bias initialized to 1."""

    GATES = ("input", "forget", "output", "candidate")

    def __init__(self, input_size, hidden_size, rng=None, name="lstm"):
        rng = rng or np.random.default_rng(0)
        self.name = name
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.weights = {}
        for gate in self.GATES:
            self.weights[f"w_{gate}"] = Tensor(
                glorot_uniform(rng, input_size, hidden_size), requires_grad=True
            )
            self.weights[f"u_{gate}"] = Tensor(
                glorot_uniform(rng, hidden_size, hidden_size), requires_grad=True
            )
            bias = np.ones(hidden_size) if gate == "forget" else np.zeros(hidden_size)
            self.weights[f"b_{gate}"] = Tensor(bias, requires_grad=True)

    def _gate(self, gate, x, h):
        w = self.weights
        return x @ w[f"w_{gate}"] + h @ w[f"u_{gate}"] + w[f"b_{gate}"]

    def step(self, x, h, c):
        i = self._gate("input", x, h).sigmoid()
        f = self._gate("forget", x, h).sigmoid()
        o = self._gate("output", x, h).sigmoid()
        g = self._gate("candidate", x, h).tanh()
        c_new = f * c + i * g
        h_new = o * c_new.tanh()
        return h_new, c_new

    def parameters(self):
        out = []
        for gate in self.GATES:
            for prefix in ("w", "u", "b"):
                key = f"{prefix}_{gate}"
                out.append((f"{self.name}.{key}", self.weights[key]))
        return out


class Lstm(Module):
    """Stacked LSTM; forward returns the final hidden state of the top layer."""

    def __init__(self, input_size, hidden_size, num_layers=1, rng=None, name="lstm"):
        rng = rng or np.random.default_rng(0)
        self.name = name
        self.hidden_size = hidden_size
        self.cells = [
            LstmCell(
                input_size if i == 0 else hidden_size,
                hidden_size,
                rng=rng,
                name=f"{name}{i}",
            )
            for i in range(num_layers)
        ]

    def __call__(self, steps):
        """steps: sequence of (batch, input_size) tensors in time order."""
        steps = list(steps)
        if not steps:
            raise EmptySequence("LSTM needs at least one time step")
        n = steps[0].shape[0]
        for cell in self.cells:
            h = Tensor(np.zeros((n, cell.hidden_size)))
            c = Tensor(np.zeros((n, cell.hidden_size)))
            outputs = []
            for x in steps:
                h, c = cell.step(x, h, c)
                outputs.append(h)
            steps = outputs
        return steps[-1]

    def parameters(self):
        out = []
        for cell in self.cells:
            out.extend(cell.parameters())
        return out
