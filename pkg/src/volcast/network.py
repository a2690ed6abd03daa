"""Single-hidden-layer feedforward networks: MLFF and its cascade variant.

MLFF maps input -> tanh hidden layer -> linear output.  CFFN adds a direct
linear input-to-output block alongside the hidden path; with that block zero
the two architectures coincide.  Parameters flatten to one vector in a fixed
order (W_ih row-major, b_h, W_io row-major when present, W_ho row-major,
b_o) shared by the gradient, the Jacobian, and the serialized form.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from volcast import backends
from volcast.errors import DimensionMismatch

ARCHITECTURES = ("MLFF", "CFFN")


@dataclass(frozen=True)
class Topology:
    architecture: str
    n_inputs: int
    n_hidden: int
    n_outputs: int

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}")
        if min(self.n_inputs, self.n_hidden, self.n_outputs) < 1:
            raise ValueError("all layer sizes must be >= 1")

    @property
    def has_skip(self) -> bool:
        return self.architecture == "CFFN"

    @property
    def n_params(self) -> int:
        n = (self.n_hidden * self.n_inputs + self.n_hidden
             + self.n_outputs * self.n_hidden + self.n_outputs)
        if self.has_skip:
            n += self.n_outputs * self.n_inputs
        return n


@dataclass
class Network:
    """Weights and biases for one topology; W_io exists only for CFFN."""

    topology: Topology
    W_ih: np.ndarray
    b_h: np.ndarray
    W_ho: np.ndarray
    b_o: np.ndarray
    W_io: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        t = self.topology
        expected = {
            "W_ih": (t.n_hidden, t.n_inputs),
            "b_h": (t.n_hidden,),
            "W_ho": (t.n_outputs, t.n_hidden),
            "b_o": (t.n_outputs,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise DimensionMismatch(f"{name} must have shape {shape}")
        if t.has_skip:
            if self.W_io is None or self.W_io.shape != (t.n_outputs, t.n_inputs):
                raise DimensionMismatch("CFFN requires W_io of shape "
                                        f"({t.n_outputs}, {t.n_inputs})")
        elif self.W_io is not None:
            raise DimensionMismatch("MLFF networks carry no W_io block")


@dataclass(frozen=True)
class ForwardTrace:
    """Intermediate values of one forward pass on a single input."""

    x: np.ndarray
    hidden_input: np.ndarray
    hidden_activation: np.ndarray
    output: np.ndarray


def init_weights(topology: Topology, seed: int) -> Network:
    """Seeded uniform init, bounded by 1/sqrt(fan-in) of the receiving unit.

    Hidden units receive n_inputs connections; output units receive n_hidden,
    plus n_inputs more under the cascade block.  Biases start at zero.  The
    same (topology, seed) pair reproduces the network bit for bit.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    t = topology
    hid_bound = 1.0 / np.sqrt(t.n_inputs)
    out_fan = t.n_hidden + (t.n_inputs if t.has_skip else 0)
    out_bound = 1.0 / np.sqrt(out_fan)
    W_ih = rng.uniform(-hid_bound, hid_bound, size=(t.n_hidden, t.n_inputs))
    W_ho = rng.uniform(-out_bound, out_bound, size=(t.n_outputs, t.n_hidden))
    W_io = rng.uniform(-out_bound, out_bound, size=(t.n_outputs, t.n_inputs)) if t.has_skip else None
    return Network(topology=t, W_ih=W_ih, b_h=np.zeros(t.n_hidden),
                   W_ho=W_ho, b_o=np.zeros(t.n_outputs), W_io=W_io, seed=seed)


def flatten(net: Network) -> np.ndarray:
    parts = [net.W_ih.ravel(), net.b_h]
    if net.topology.has_skip:
        parts.append(net.W_io.ravel())
    parts += [net.W_ho.ravel(), net.b_o]
    return np.concatenate(parts)


def unflatten(topology: Topology, params) -> Network:
    p = np.asarray(params, dtype=np.float64)
    if p.shape != (topology.n_params,):
        raise DimensionMismatch(f"expected {topology.n_params} parameters, got {p.shape}")
    t = topology
    off = 0

    def take(shape):
        nonlocal off
        size = int(np.prod(shape))
        block = p[off:off + size].reshape(shape).copy()
        off += size
        return block

    W_ih = take((t.n_hidden, t.n_inputs))
    b_h = take((t.n_hidden,))
    W_io = take((t.n_outputs, t.n_inputs)) if t.has_skip else None
    W_ho = take((t.n_outputs, t.n_hidden))
    b_o = take((t.n_outputs,))
    return Network(topology=t, W_ih=W_ih, b_h=b_h, W_ho=W_ho, b_o=b_o, W_io=W_io)


def _blocks(net: Network):
    return (np.ascontiguousarray(net.W_ih), np.ascontiguousarray(net.b_h),
            np.ascontiguousarray(net.W_ho), np.ascontiguousarray(net.b_o),
            np.ascontiguousarray(net.W_io) if net.W_io is not None else None)


def _check_batch(net: Network, X, Y=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.topology.n_inputs:
        raise DimensionMismatch(f"X must be (n, {net.topology.n_inputs}), got {X.shape}")
    if Y is None:
        return X
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if Y.shape != (X.shape[0], net.topology.n_outputs):
        raise DimensionMismatch(f"Y must be ({X.shape[0]}, {net.topology.n_outputs}), got {Y.shape}")
    if X.shape[0] < 1:
        raise DimensionMismatch("need at least one sample")
    return X, Y


def forward(net: Network, x) -> ForwardTrace:
    """Evaluate one input and keep the intermediates."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.topology.n_inputs,):
        raise DimensionMismatch(f"x must have shape ({net.topology.n_inputs},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DimensionMismatch("input entries must be finite")
    hidden_input = net.W_ih @ x + net.b_h
    z = np.tanh(hidden_input)
    y = net.W_ho @ z + net.b_o
    if net.W_io is not None:
        y = y + net.W_io @ x
    return ForwardTrace(x=x, hidden_input=hidden_input, hidden_activation=z, output=y)


def forward_batch(net: Network, X) -> np.ndarray:
    X = _check_batch(net, X)
    W_ih, b_h, W_ho, b_o, W_io = _blocks(net)
    return backends.forward_batch(X, W_ih, b_h, W_ho, b_o, W_io)


def batch_loss(net: Network, X, Y) -> float:
    """Mean squared error over all samples and output columns."""
    X, Y = _check_batch(net, X, Y)
    R = forward_batch(net, X) - Y
    return float(np.mean(R * R))


def loss_and_gradient(net: Network, X, Y) -> tuple[float, np.ndarray]:
    """batch_loss and its exact gradient as one flat vector."""
    X, Y = _check_batch(net, X, Y)
    W_ih, b_h, W_ho, b_o, W_io = _blocks(net)
    loss, gW_ih, gb_h, gW_ho, gb_o, gW_io = backends.loss_and_gradient(
        X, Y, W_ih, b_h, W_ho, b_o, W_io)
    parts = [gW_ih.ravel(), gb_h]
    if gW_io is not None:
        parts.append(gW_io.ravel())
    parts += [gW_ho.ravel(), gb_o]
    return loss, np.concatenate(parts)


def gradient(net: Network, X, Y) -> np.ndarray:
    return loss_and_gradient(net, X, Y)[1]


def jacobian(net: Network, X) -> np.ndarray:
    """d(outputs)/d(parameters); row s * n_outputs + o is sample s, output o.

    Recombines with residuals as gradient = (2 / (n * n_outputs)) J^T r.
    """
    X = _check_batch(net, X)
    if X.shape[0] < 1:
        raise DimensionMismatch("need at least one sample")
    W_ih, b_h, W_ho, b_o, W_io = _blocks(net)
    return backends.jacobian(X, W_ih, b_h, W_ho, b_o, W_io)


def residuals(net: Network, X, Y) -> np.ndarray:
    """Flat (predicted - actual), ordered to match jacobian rows."""
    X, Y = _check_batch(net, X, Y)
    return (forward_batch(net, X) - Y).ravel()


_FORMAT_VERSION = 1


def save_network(net: Network, path) -> None:
    """Versioned flat text form; values at 17 significant digits round-trip exactly."""
    t = net.topology
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{_FORMAT_VERSION} {t.architecture} {t.n_inputs} {t.n_hidden} "
                 f"{t.n_outputs} {net.seed}\n")
        for v in flatten(net):
            fh.write(format(v, ".17g") + "\n")


def load_network(path) -> Network:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 6 or header[0] != str(_FORMAT_VERSION):
            raise ValueError(f"unsupported network file header: {' '.join(header)!r}")
        arch = header[1]
        n_in, n_hidden, n_out, seed = (int(v) for v in header[2:])
        topo = Topology(arch, n_in, n_hidden, n_out)
        values = [float(line) for line in fh if line.strip()]
    net = unflatten(topo, np.array(values))
    net.seed = seed
    return net
