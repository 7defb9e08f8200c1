"""Dense float64 tensors with reverse-mode automatic differentiation.

A small eager autograd engine sufficient for fully-connected networks.
Every operation allocates a fresh ``Tensor`` holding the numpy result plus
closures that pull the output gradient back to each operand, so the
computation graph is rebuilt on every forward pass and torn down by
``backward``. Operations never mutate their operands.

Everything is float64; the equivalence checks elsewhere in the package rely
on tight tolerances, so there is deliberately no dtype flexibility.

Graph construction and the backward pass are single-threaded. Tensors are
immutable values with no internal locking, so frozen values (and frozen
models built from them) are safe to share across threads for read-only
evaluation.
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "Tensor",
    "Parameter",
    "ShapeError",
    "GraphError",
    "tanh",
    "sigmoid",
    "leaky_relu",
    "matmul",
    "affine",
]


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class GraphError(RuntimeError):
    """The autodiff graph cannot support the requested traversal."""


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


class Tensor:
    """A float64 numpy array plus reverse-mode autodiff bookkeeping.

    ``data`` is the value, ``grad`` the lazily accumulated gradient (``None``
    until ``backward`` reaches this node), and ``_parents`` the edges of the
    computation graph: ``(parent, pull)`` pairs where ``pull`` maps the
    gradient at this node to the contribution for that parent.
    """

    __slots__ = ("data", "grad", "_parents", "_spent")

    def __init__(self, data, _parents=()):
        self.data = _as_array(data)
        self.grad = None
        self._parents = tuple(_parents)
        self._spent = False

    # -- basic introspection ------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, data={self.data!r})"

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() requires a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    # -- graph construction helpers ----------------------------------------

    @staticmethod
    def _coerce(other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        return Tensor(other)

    def _binary_operand(self, other, op: str) -> "Tensor":
        other = self._coerce(other)
        if self.shape != other.shape and self.size != 1 and other.size != 1:
            raise ShapeError(
                f"{op}: shapes {self.shape} and {other.shape} are neither equal "
                "nor scalar-vs-tensor"
            )
        return other

    # -- arithmetic ----------------------------------------------------------

    def __add__(self, other):
        other = self._binary_operand(other, "add")
        out = Tensor(
            self.data + other.data,
            _parents=(
                (self, lambda g: _unbroadcast(g, self.shape)),
                (other, lambda g: _unbroadcast(g, other.shape)),
            ),
        )
        return out

    __radd__ = __add__

    def __sub__(self, other):
        other = self._binary_operand(other, "sub")
        return Tensor(
            self.data - other.data,
            _parents=(
                (self, lambda g: _unbroadcast(g, self.shape)),
                (other, lambda g: _unbroadcast(-g, other.shape)),
            ),
        )

    def __rsub__(self, other):
        return self._coerce(other).__sub__(self)

    def __mul__(self, other):
        other = self._binary_operand(other, "mul")
        return Tensor(
            self.data * other.data,
            _parents=(
                (self, lambda g: _unbroadcast(g * other.data, self.shape)),
                (other, lambda g: _unbroadcast(g * self.data, other.shape)),
            ),
        )

    __rmul__ = __mul__

    def __neg__(self):
        return Tensor(-self.data, _parents=((self, lambda g: -g),))

    def sum(self) -> "Tensor":
        return Tensor(
            self.data.sum(),
            _parents=((self, lambda g: np.broadcast_to(g, self.shape).copy()),),
        )

    def mean(self) -> "Tensor":
        n = self.data.size
        return Tensor(
            self.data.mean(),
            _parents=((self, lambda g: np.broadcast_to(g / n, self.shape).copy()),),
        )

    # -- backward pass -------------------------------------------------------

    def backward(self) -> None:
        """Accumulate d(self)/d(node) into ``grad`` for every reachable node.

        The root must be scalar-valued. Each node is visited exactly once in
        reverse topological order; the graph edges are released afterwards,
        so calling ``backward`` twice on the same root is an error.
        """
        if self._spent:
            raise GraphError(
                "backward already ran from this root; build a fresh graph first"
            )
        if self.data.size != 1:
            raise ValueError(f"backward requires a scalar root, got shape {self.shape}")
        order = _reverse_topological(self)
        self.grad = np.ones_like(self.data)
        for node in order:
            grad = node.grad
            for parent, pull in node._parents:
                contribution = pull(grad)
                if parent.grad is None:
                    parent.grad = contribution
                else:
                    parent.grad = parent.grad + contribution
            node._parents = ()
        self._spent = True


class Parameter(Tensor):
    """A named, trainable leaf tensor."""

    __slots__ = ("name", "trainable")

    def __init__(self, data, name: str, trainable: bool = True):
        super().__init__(data)
        self.name = name
        self.trainable = trainable

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape})"


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a gradient back to an operand's shape after scalar broadcast."""
    if grad.shape == shape:
        return grad
    # only scalar-vs-tensor broadcasting exists, so target is a single element
    return np.asarray(grad.sum()).reshape(shape)


def _reverse_topological(root: Tensor) -> list[Tensor]:
    """Nodes reachable from root, root first, parents after children.

    Iterative DFS with visiting/done marks; a back edge means the graph has
    a cycle, which eager construction never produces but manual graph
    surgery could.
    """
    VISITING, DONE = 0, 1
    state: dict[int, int] = {id(root): VISITING}
    order: list[Tensor] = []
    stack = [(root, iter(root._parents))]
    while stack:
        node, parents = stack[-1]
        advanced = False
        for parent, _ in parents:
            mark = state.get(id(parent))
            if mark == VISITING:
                raise GraphError("cycle detected in autodiff graph")
            if mark is None:
                state[id(parent)] = VISITING
                stack.append((parent, iter(parent._parents)))
                advanced = True
                break
        if not advanced:
            state[id(node)] = DONE
            order.append(node)
            stack.pop()
    order.reverse()
    return order


# -- nonlinearities ----------------------------------------------------------


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    return Tensor(y, _parents=((x, lambda g: g * (1.0 - y * y)),))


def sigmoid(x: Tensor) -> Tensor:
    # tanh form stays finite for any input magnitude
    y = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return Tensor(y, _parents=((x, lambda g: g * y * (1.0 - y)),))


def leaky_relu(x: Tensor, slope: float = 0.1) -> Tensor:
    scale = np.where(x.data >= 0.0, 1.0, slope)
    return Tensor(x.data * scale, _parents=((x, lambda g: g * scale),))


# -- linear maps --------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product of a 2-D [m, n] by a 2-D [n, p] tensor."""
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError(f"matmul requires 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree for {a.shape} and {b.shape}")
    return Tensor(
        a.data @ b.data,
        _parents=(
            (a, lambda g: g @ b.data.T),
            (b, lambda g: a.data.T @ g),
        ),
    )


def affine(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """``x @ weight.T + bias`` for x of shape [n] or [batch, n].

    weight is [m, n] and bias [m]; the bias is broadcast across the batch
    (its gradient sums over the batch rows).
    """
    if weight.data.ndim != 2:
        raise ShapeError(f"affine weight must be 2-D, got {weight.shape}")
    if bias.data.ndim != 1 or bias.shape[0] != weight.shape[0]:
        raise ShapeError(
            f"affine bias shape {bias.shape} does not match weight {weight.shape}"
        )
    if x.data.ndim not in (1, 2) or x.data.shape[-1] != weight.shape[1]:
        raise ShapeError(f"affine input shape {x.shape} does not match weight {weight.shape}")
    y = x.data @ weight.data.T + bias.data
    if x.data.ndim == 1:
        pulls = (
            (x, lambda g: g @ weight.data),
            (weight, lambda g: np.outer(g, x.data)),
            (bias, lambda g: g),
        )
    else:
        pulls = (
            (x, lambda g: g @ weight.data),
            (weight, lambda g: g.T @ x.data),
            (bias, lambda g: g.sum(axis=0)),
        )
    return Tensor(y, _parents=pulls)
