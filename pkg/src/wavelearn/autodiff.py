"""Minimal reverse-mode differentiation on float64 numpy arrays.

Every operation on a :class:`Tensor` records its parents and a backward rule.
Calling :meth:`Tensor.backward` on a scalar walks the recorded graph in
reverse topological order and accumulates gradients into the leaves that
were created with ``requires_grad=True``.

Complex quantities are stored as real arrays whose trailing axis holds the
``(re, im)`` pair.  The gradient of a real loss with respect to such a pair
is stored the same way, ``(dL/dre, dL/dim)``; read as a complex number this
is ``dL/dre + j dL/dim``, which makes the complex backward rules compact
(e.g. for ``z = x * y`` the gradient reaching ``x`` is ``G_z * conj(y)``).
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "Tensor",
    "Tape",
    "as_tensor",
    "to_complex",
    "from_complex",
    "concatenate",
    "stack",
    "exp",
    "log",
    "sqrt",
    "relu",
    "sigmoid",
    "log_sigmoid",
    "conv1d",
    "cmul",
    "cmatmul",
    "conj",
    "cabs2",
    "cquad_form",
    "cholesky",
    "numerical_grad",
]

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


def to_complex(a: np.ndarray) -> np.ndarray:
    """View a paired ``(..., 2)`` real array as a complex array."""
    return a[..., 0] + 1j * a[..., 1]


def from_complex(z: np.ndarray) -> np.ndarray:
    """Pack a complex array into a ``(..., 2)`` real array."""
    z = np.asarray(z)
    return np.stack([z.real, z.imag], axis=-1).astype(np.float64)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff > 0:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """A float64 array plus the bookkeeping needed for reverse-mode gradients.

    Parameters
    ----------
    data : array_like
        Values; converted to a float64 array.
    requires_grad : bool
        Mark as a trainable leaf. Gradients are accumulated into ``grad``.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")
    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None, op="leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = tuple(_parents)
        self._backward: BackwardFn | None = _backward
        self.op = op

    # -- basic properties -------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return not self._parents

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return len(self.data)

    # -- graph construction ------------------------------------------------
    @staticmethod
    def _make(data, parents: Sequence["Tensor"], backward: BackwardFn, op: str) -> "Tensor":
        if any(p.requires_grad for p in parents):
            return Tensor(data, True, parents, backward, op)
        return Tensor(data, op=op)

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every ``requires_grad`` leaf.

        Repeated calls add to the existing ``grad`` arrays; call
        :meth:`zero_grad` on the leaves to reset.
        """
        Tape(self).backward()

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bw(g):
            return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

        return Tensor._make(a.data + b.data, (a, b), bw, "add")

    __radd__ = __add__

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bw(g):
            return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

        return Tensor._make(a.data - b.data, (a, b), bw, "sub")

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other

        def bw(g):
            return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

        return Tensor._make(a.data * b.data, (a, b), bw, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self, other
        out = a.data / b.data

        def bw(g):
            return _unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape)

        return Tensor._make(out, (a, b), bw, "div")

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, p: float):
        if isinstance(p, Tensor):
            raise TypeError("only constant exponents are supported")
        a = self

        def bw(g):
            return (g * p * a.data ** (p - 1),)

        return Tensor._make(a.data**p, (a,), bw, f"pow{p}")

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self, other
        if a.ndim < 2 or b.ndim < 2:
            raise ValueError("matmul expects operands with at least 2 dimensions")

        def bw(g):
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape)
            gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
            return ga, gb

        return Tensor._make(a.data @ b.data, (a, b), bw, "matmul")

    def __rmatmul__(self, other):
        return as_tensor(other) @ self

    # -- reductions and reshaping ---------------------------------------------
    def sum(self, axis=None, keepdims: bool = False):
        a = self

        def bw(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, a.shape).copy(),)

        return Tensor._make(a.data.sum(axis=axis, keepdims=keepdims), (a,), bw, "sum")

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size / np.asarray(self.data.sum(axis=axis, keepdims=keepdims)).size
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        return Tensor._make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        axes = axes or tuple(reversed(range(self.ndim)))
        inv = np.argsort(axes)
        return Tensor._make(self.data.transpose(axes), (self,), lambda g: (g.transpose(inv),), "transpose")

    def swapaxes(self, a1: int, a2: int):
        return Tensor._make(
            np.swapaxes(self.data, a1, a2), (self,), lambda g: (np.swapaxes(g, a1, a2),), "swapaxes"
        )

    def __getitem__(self, idx):
        a = self
        if isinstance(idx, Tensor):
            raise TypeError("indices must be constant arrays")

        parts = idx if isinstance(idx, tuple) else (idx,)
        advanced = any(isinstance(p, (np.ndarray, list)) for p in parts)

        def bw(g):
            out = np.zeros_like(a.data)
            if advanced:
                np.add.at(out, idx, g)
            else:
                out[idx] = g
            return (out,)

        return Tensor._make(a.data[idx], (a,), bw, "getitem")


def as_tensor(x) -> Tensor:
    """Wrap constants; return tensors unchanged."""
    return x if isinstance(x, Tensor) else Tensor(x)


class Tape:
    """Topologically ordered record of every operation reachable from ``root``.

    ``nodes`` lists operations from the leaves to ``root``; :meth:`backward`
    visits each node once, in reverse.
    """

    def __init__(self, root: Tensor):
        self.root = root
        self.nodes: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                self.nodes.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))

    def backward(self) -> None:
        root = self.root
        if root.data.size != 1:
            raise ValueError(f"backward needs a scalar output, got shape {root.shape}")
        if not root.requires_grad:
            raise ValueError("output does not depend on any requires_grad leaf")
        grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node.is_leaf:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


# -- elementwise functions ---------------------------------------------------
def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return Tensor._make(out, (x,), lambda g: (g * out,), "exp")


def log(x: Tensor) -> Tensor:
    return Tensor._make(np.log(x.data), (x,), lambda g: (g / x.data,), "log")


def sqrt(x: Tensor) -> Tensor:
    out = np.sqrt(x.data)
    return Tensor._make(out, (x,), lambda g: (0.5 * g / out,), "sqrt")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor._make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,), "relu")


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)
    return Tensor._make(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def log_sigmoid(x: Tensor) -> Tensor:
    """``log(sigmoid(x))`` evaluated without overflow."""
    z = x.data
    out = np.minimum(z, 0.0) - np.log1p(np.exp(-np.abs(z)))
    return Tensor._make(out, (x,), lambda g: (g * _sigmoid(-z),), "log_sigmoid")


def concatenate(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._make(np.concatenate([t.data for t in tensors], axis=axis), tensors, bw, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]

    def bw(g):
        return tuple(np.moveaxis(g, axis, 0))

    return Tensor._make(np.stack([t.data for t in tensors], axis=axis), tensors, bw, "stack")


# -- convolution ---------------------------------------------------------------
def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None, dilation: int = 1, groups: int = 1) -> Tensor:
    """Length-preserving 1-D convolution with zero padding.

    Parameters
    ----------
    x : Tensor
        Input of shape ``(batch, in_channels, length)``.
    w : Tensor
        Kernel of shape ``(out_channels, in_channels // groups, k)`` with odd ``k``.
    b : Tensor, optional
        Bias of shape ``(out_channels,)``.
    dilation : int
        Spacing between kernel taps.
    groups : int
        ``1`` (dense) or ``in_channels`` (depthwise, ``out_channels == in_channels``).
    """
    bsz, cin, n = x.shape
    cout, cper, k = w.shape
    if k % 2 == 0:
        raise ValueError("kernel size must be odd")
    depthwise = groups != 1
    if depthwise and not (groups == cin == cout and cper == 1):
        raise ValueError("only dense or depthwise convolutions are supported")
    if not depthwise and cper != cin:
        raise ValueError(f"kernel expects {cper} input channels, got {cin}")
    pad = dilation * (k - 1) // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (pad, pad))) if pad else x.data
    wd = w.data
    out = np.zeros((bsz, cout, n))
    views = [xp[:, :, j * dilation : j * dilation + n] for j in range(k)]
    for j, xs in enumerate(views):
        if depthwise:
            out += wd[None, :, 0, j, None] * xs
        else:
            out += wd[:, :, j] @ xs
    parents = [x, w]
    if b is not None:
        out += b.data[None, :, None]
        parents.append(b)

    def bw(g):
        gxp = np.zeros_like(xp)
        gw = np.zeros_like(wd)
        for j, xs in enumerate(views):
            sl = slice(j * dilation, j * dilation + n)
            if depthwise:
                gxp[:, :, sl] += wd[None, :, 0, j, None] * g
                gw[:, 0, j] = np.sum(g * xs, axis=(0, 2))
            else:
                gxp[:, :, sl] += np.swapaxes(wd[:, :, j], 0, 1) @ g
                gw[:, :, j] = np.tensordot(g, xs, axes=([0, 2], [0, 2]))
        gx = gxp[:, :, pad : pad + n] if pad else gxp
        grads = [gx, gw]
        if b is not None:
            grads.append(g.sum(axis=(0, 2)))
        return grads

    return Tensor._make(out, parents, bw, "conv1d")


# -- complex primitives on paired (re, im) arrays ----------------------------------
def cmul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise complex product of paired arrays (broadcasting)."""
    a, b = as_tensor(a), as_tensor(b)
    za, zb = to_complex(a.data), to_complex(b.data)

    def bw(g):
        gz = to_complex(g)
        ga = from_complex(gz * np.conj(zb))
        gb = from_complex(gz * np.conj(za))
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return Tensor._make(from_complex(za * zb), (a, b), bw, "cmul")


def cmatmul(a: Tensor, b: Tensor) -> Tensor:
    """Complex matrix product; operands are ``(..., m, n, 2)`` and ``(..., n, p, 2)``."""
    a, b = as_tensor(a), as_tensor(b)
    za, zb = to_complex(a.data), to_complex(b.data)

    def bw(g):
        gz = to_complex(g)
        ga = gz @ np.conj(np.swapaxes(zb, -1, -2))
        gb = np.conj(np.swapaxes(za, -1, -2)) @ gz
        return _unbroadcast(from_complex(ga), a.shape), _unbroadcast(from_complex(gb), b.shape)

    return Tensor._make(from_complex(za @ zb), (a, b), bw, "cmatmul")


def conj(a: Tensor) -> Tensor:
    sign = np.array([1.0, -1.0])
    return Tensor._make(a.data * sign, (a,), lambda g: (g * sign,), "conj")


def cabs2(a: Tensor) -> Tensor:
    """Squared magnitude ``re**2 + im**2``; drops the trailing pair axis."""
    out = a.data[..., 0] ** 2 + a.data[..., 1] ** 2
    return Tensor._make(out, (a,), lambda g: (2.0 * g[..., None] * a.data,), "cabs2")


def cquad_form(x: Tensor, m: np.ndarray) -> Tensor:
    """Real part of ``x^H M x`` for a paired vector ``x`` and constant matrix ``M``."""
    z = to_complex(x.data)
    m = np.asarray(m, dtype=np.complex128)
    mz = m @ z
    out = np.real(np.vdot(z, mz))

    def bw(g):
        return (from_complex(g * (mz + m.conj().T @ z)),)

    return Tensor._make(out, (x,), bw, "cquad_form")


def cholesky(a: Tensor, jitter: float = 0.0) -> Tensor:
    """Lower Cholesky factor of a paired Hermitian matrix ``a + jitter * I``.

    Only the lower triangle of ``a`` is read. The backward rule returns the
    Hermitian gradient, which is exact for Hermitian perturbations.
    Raises ``numpy.linalg.LinAlgError`` when the matrix is not positive definite.
    """
    za = to_complex(a.data)
    if jitter:
        za = za + jitter * np.eye(za.shape[-1])
    lo = np.linalg.cholesky(za)

    def bw(g):
        gl = np.tril(to_complex(g))
        phi = np.tril(lo.conj().T @ gl)
        phi[np.diag_indices_from(phi)] *= 0.5
        # S = L^{-H} Phi L^{-1}
        s = solve_triangular(lo, phi, trans="C", lower=True)
        s = solve_triangular(lo, s.conj().T, trans="C", lower=True).conj().T
        sym = 0.5 * (s + s.conj().T)
        return (from_complex(sym),)

    return Tensor._make(from_complex(lo), (a,), bw, "cholesky")


# -- checking utilities ----------------------------------------------------------------
def numerical_grad(fn: Callable[[], float], param: Tensor, eps: float = 1e-6, index=None) -> np.ndarray:
    """Central finite-difference gradient of ``fn()`` with respect to ``param.data``.

    ``index`` optionally restricts the entries perturbed (a sequence of flat
    indices); the returned array then holds only those entries.
    """
    flat = param.data.reshape(-1)
    idx = range(flat.size) if index is None else index
    out = []
    for i in idx:
        orig = flat[i]
        flat[i] = orig + eps
        fp = fn()
        flat[i] = orig - eps
        fm = fn()
        flat[i] = orig
        out.append((fp - fm) / (2 * eps))
    out = np.asarray(out)
    return out.reshape(param.shape) if index is None else out
