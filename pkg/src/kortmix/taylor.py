"""Truncated multivariate Taylor germs with numpy batching.

A :class:`Taylor` holds the Taylor coefficients of one or more scalar fields
around a point, in ``NVARS`` spatial variables up to total degree ``DEGREE``.
Coefficients live on the last array axis; every leading axis is a *value*
axis and broadcasts like an ordinary numpy array, so a stress tensor field
has value shape ``(..., 3, 3)``.

Arithmetic is exact up to truncation: products drop terms above ``DEGREE``
and smooth functions are composed through their derivative towers at the
expansion point. Differentiation lowers the exactness order by one, which is
the bookkeeping the balance-law evaluations rely on.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

NVARS = 3
DEGREE = 3


@lru_cache(maxsize=None)
def monomials(nvars: int = NVARS, degree: int = DEGREE) -> tuple[tuple[int, ...], ...]:
    """Exponent tuples ordered by total degree, then lexicographically descending."""
    out = []
    for d in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), d):
            alpha = [0] * nvars
            for k in combo:
                alpha[k] += 1
            out.append(tuple(alpha))
    return tuple(out)


@lru_cache(maxsize=None)
def _index(nvars: int = NVARS, degree: int = DEGREE) -> dict[tuple[int, ...], int]:
    return {alpha: i for i, alpha in enumerate(monomials(nvars, degree))}


@lru_cache(maxsize=None)
def _product_table(nvars: int = NVARS, degree: int = DEGREE):
    mons = monomials(nvars, degree)
    idx = _index(nvars, degree)
    left, right, target = [], [], []
    for i, a in enumerate(mons):
        for j, b in enumerate(mons):
            ab = tuple(x + y for x, y in zip(a, b))
            if sum(ab) <= degree:
                left.append(i)
                right.append(j)
                target.append(idx[ab])
    scatter = np.zeros((len(target), len(mons)))
    scatter[np.arange(len(target)), target] = 1.0
    return np.array(left), np.array(right), scatter


@lru_cache(maxsize=None)
def _diff_table(k: int, nvars: int = NVARS, degree: int = DEGREE):
    # d/dx_k maps coefficient of alpha + e_k (times its exponent) onto alpha.
    mons = monomials(nvars, degree)
    idx = _index(nvars, degree)
    src = np.zeros(len(mons), dtype=int)
    factor = np.zeros(len(mons))
    for i, alpha in enumerate(mons):
        up = list(alpha)
        up[k] += 1
        up = tuple(up)
        if up in idx:
            src[i] = idx[up]
            factor[i] = up[k]
    return src, factor


def _shift_axis(axis, ndim_value):
    if isinstance(axis, tuple):
        return tuple(_shift_axis(a, ndim_value) for a in axis)
    return axis - 1 if axis < 0 else axis


_NCOEF_TO_NVARS = {len(monomials(n, DEGREE)): n for n in range(1, NVARS + 1)}


class Taylor:
    """Batched truncated Taylor polynomial around the origin.

    A germ may use fewer than ``NVARS`` variables (``nvars``); derivatives
    along the missing directions are identically zero. This is an exact
    shortcut for fields that are known not to vary along those directions.
    """

    __slots__ = ("c",)

    def __init__(self, coeffs):
        self.c = np.asarray(coeffs, dtype=float)

    @property
    def nvars(self) -> int:
        return _NCOEF_TO_NVARS[self.c.shape[-1]]

    # -- construction -------------------------------------------------------

    @classmethod
    def constant(cls, value, nvars: int = NVARS) -> "Taylor":
        value = np.asarray(value, dtype=float)
        c = np.zeros(value.shape + (len(monomials(nvars)),))
        c[..., 0] = value
        return cls(c)

    @classmethod
    def from_derivatives(cls, value, grad=None, hess=None, third=None,
                         nvars: int = NVARS) -> "Taylor":
        """Build a germ from derivative tensors at the origin.

        ``grad`` has a trailing axis of length 3, ``hess`` two, ``third``
        three; missing orders are zero. The tensors are read at sorted index
        positions, so only their symmetric parts matter. With ``nvars < 3``
        only the entries along the first ``nvars`` axes are read.
        """
        value = np.asarray(value, dtype=float)
        mons = monomials(nvars)
        c = np.zeros(value.shape + (len(mons),))
        c[..., 0] = value
        tensors = {1: grad, 2: hess, 3: third}
        for i, alpha in enumerate(mons):
            order = sum(alpha)
            if order == 0 or tensors.get(order) is None:
                continue
            tensor = np.asarray(tensors[order], dtype=float)
            pos = tuple(k for k in range(nvars) for _ in range(alpha[k]))
            denom = math.prod(math.factorial(a) for a in alpha)
            c[..., i] = tensor[(Ellipsis,) + pos] / denom
        return cls(c)

    # -- array-like plumbing -----------------------------------------------

    @property
    def shape(self):
        return self.c.shape[:-1]

    @property
    def ndim(self):
        return self.c.ndim - 1

    @property
    def value(self) -> np.ndarray:
        return self.c[..., 0]

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Taylor(self.c[idx + (slice(None),)])

    def sum(self, axis=None):
        if axis is None:
            axis = tuple(range(self.ndim))
        return Taylor(self.c.sum(axis=_shift_axis(axis, self.ndim)))

    def swapaxes(self, a, b):
        return Taylor(self.c.swapaxes(_shift_axis(a, self.ndim), _shift_axis(b, self.ndim)))

    def __repr__(self):
        return f"Taylor(shape={self.shape}, degree={DEGREE})"

    # -- calculus ------------------------------------------------------------

    def diff(self, k: int) -> "Taylor":
        n = self.nvars
        if k >= n:
            return Taylor(np.zeros_like(self.c))
        src, factor = _diff_table(k, n)
        return Taylor(self.c[..., src] * factor)

    def grad(self) -> "Taylor":
        """Gradient with a new trailing value axis of length 3."""
        return Taylor(np.stack([self.diff(k).c for k in range(NVARS)], axis=-2))

    def derivative_tensor(self, order: int) -> np.ndarray:
        """Symmetric derivative tensor of the given order at the origin."""
        n = self.nvars
        idx = _index(n)
        out = np.zeros(self.shape + (NVARS,) * order)
        for pos in itertools.product(range(n), repeat=order):
            alpha = tuple(pos.count(k) for k in range(n))
            scale = math.prod(math.factorial(a) for a in alpha)
            out[(Ellipsis,) + pos] = self.c[..., idx[alpha]] * scale
        return out

    # -- arithmetic ----------------------------------------------------------

    def _mul_taylor(self, other: "Taylor") -> "Taylor":
        if self.c.shape[-1] != other.c.shape[-1]:
            raise ValueError("germs in different numbers of variables")
        left, right, scatter = _product_table(self.nvars)
        return Taylor((self.c[..., left] * other.c[..., right]) @ scatter)

    def __add__(self, other):
        if isinstance(other, Taylor):
            return Taylor(self.c + other.c)
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.shape, other.shape)
        c = np.array(np.broadcast_to(self.c, shape + self.c.shape[-1:]))
        c[..., 0] += other
        return Taylor(c)

    __radd__ = __add__

    def __neg__(self):
        return Taylor(-self.c)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Taylor):
            return self._mul_taylor(other)
        other = np.asarray(other, dtype=float)
        return Taylor(self.c * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Taylor):
            return self._mul_taylor(other.reciprocal())
        other = np.asarray(other, dtype=float)
        return Taylor(self.c / other[..., None])

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if isinstance(n, (int, np.integer)) and n >= 0:
            out = Taylor.constant(np.ones(self.shape), self.nvars)
            for _ in range(int(n)):
                out = out * self
            return out
        a = self.value
        return self.compose([a ** (n - k) * math.prod(n - j for j in range(k))
                             for k in range(DEGREE + 1)])

    # -- composition -----------------------------------------------------------

    def compose(self, derivs) -> "Taylor":
        """Apply f given [f(a), f'(a), ..., f^(DEGREE)(a)] at a = self.value."""
        h = Taylor(self.c.copy())
        h.c[..., 0] = 0.0
        out = Taylor.constant(derivs[0], self.nvars)
        power = Taylor.constant(np.ones(self.shape), self.nvars)
        for n in range(1, DEGREE + 1):
            power = power * h
            out = out + power * (np.asarray(derivs[n]) / math.factorial(n))
        return out

    def reciprocal(self) -> "Taylor":
        a = self.value
        return self.compose([(-1) ** n * math.factorial(n) / a ** (n + 1)
                             for n in range(DEGREE + 1)])

    def log(self) -> "Taylor":
        a = self.value
        derivs = [np.log(a)] + [(-1) ** (n - 1) * math.factorial(n - 1) / a ** n
                                for n in range(1, DEGREE + 1)]
        return self.compose(derivs)

    def exp(self) -> "Taylor":
        e = np.exp(self.value)
        return self.compose([e] * (DEGREE + 1))

    def sqrt(self) -> "Taylor":
        return self ** 0.5

    _UFUNCS = {
        np.add: lambda a, b: a + b,
        np.subtract: lambda a, b: a - b,
        np.multiply: lambda a, b: a * b,
        np.true_divide: lambda a, b: a / b,
        np.negative: lambda a: -a,
        np.log: lambda a: a.log(),
        np.exp: lambda a: a.exp(),
        np.sqrt: lambda a: a.sqrt(),
        np.reciprocal: lambda a: a.reciprocal(),
    }

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs or ufunc not in self._UFUNCS:
            return NotImplemented
        if len(inputs) == 2 and not isinstance(inputs[0], Taylor):
            # ndarray op Taylor: route through the reflected method
            a, b = inputs
            if ufunc is np.subtract:
                return b.__rsub__(a)
            if ufunc is np.true_divide:
                return b.__rtruediv__(a)
            return self._UFUNCS[ufunc](b, a)
        return self._UFUNCS[ufunc](*inputs)


def value_of(x) -> np.ndarray:
    """Point value of a germ, or the array itself."""
    return x.value if isinstance(x, Taylor) else np.asarray(x, dtype=float)
