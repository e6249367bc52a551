"""Truncated power series in a small parameter with array coefficients.

An ``EpsJet`` of order m stores coefficients c_0..c_m, each a numpy array,
representing c_0 + eps*c_1 + ... + eps^m*c_m.  All arithmetic truncates at the
jet order.  Coefficients broadcast against each other, so slow-variable fields
(shape (nx, 1)) combine with fast-variable fields (shape (n, nx, ntheta))
without copies.
"""
from __future__ import annotations

import numpy as np


class EpsJet:
    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        self.coeffs = [np.asarray(c) for c in coeffs]
        if not self.coeffs:
            raise ValueError("jet needs at least the order-0 coefficient")

    @classmethod
    def constant(cls, value, order: int) -> "EpsJet":
        value = np.asarray(value)
        return cls([value] + [np.zeros_like(value) for _ in range(order)])

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def copy(self) -> "EpsJet":
        return EpsJet([c.copy() for c in self.coeffs])

    def truncate(self, order: int) -> "EpsJet":
        if order >= self.order:
            return self.pad(order)
        return EpsJet(self.coeffs[: order + 1])

    def pad(self, order: int) -> "EpsJet":
        if order <= self.order:
            return self
        zero = np.zeros_like(self.coeffs[0] * 0.0)
        return EpsJet(self.coeffs + [zero] * (order - self.order))

    def _binary(self, other, op):
        if isinstance(other, EpsJet):
            m = max(self.order, other.order)
            a, b = self.pad(m), other.pad(m)
            return EpsJet([op(x, y) for x, y in zip(a.coeffs, b.coeffs)])
        out = [op(self.coeffs[0], other)] + list(self.coeffs[1:])
        return EpsJet(out)

    def __add__(self, other):
        return self._binary(other, lambda x, y: x + y)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, lambda x, y: x - y)

    def __rsub__(self, other):
        return (-self) + other

    def __neg__(self):
        return EpsJet([-c for c in self.coeffs])

    def __mul__(self, other):
        if isinstance(other, EpsJet):
            m = max(self.order, other.order)
            a, b = self.pad(m), other.pad(m)
            out = []
            for n in range(m + 1):
                acc = a.coeffs[0] * b.coeffs[n]
                for i in range(1, n + 1):
                    acc = acc + a.coeffs[i] * b.coeffs[n - i]
                out.append(acc)
            return EpsJet(out)
        return EpsJet([c * other for c in self.coeffs])

    __rmul__ = __mul__

    def shift(self, powers: int = 1) -> "EpsJet":
        """Multiply by eps**powers, keeping the truncation order."""
        zero = np.zeros_like(self.coeffs[0] * 0.0)
        coeffs = [zero] * powers + self.coeffs[: len(self.coeffs) - powers]
        return EpsJet(coeffs)

    def apply_linear(self, op) -> "EpsJet":
        """Apply a linear map coefficient-wise."""
        return EpsJet([op(c) for c in self.coeffs])

    def eval(self, eps: float) -> np.ndarray:
        acc = np.zeros_like(self.coeffs[-1] + 0.0 * self.coeffs[0])
        for c in reversed(self.coeffs):
            acc = acc * eps + c
        return acc


def jet_compose(system, jet: EpsJet, order: int | None = None) -> EpsJet:
    """Taylor composition f(jet) truncated at the jet order.

    ``system`` provides pointwise evaluators f, df, d2f, d3f with the state
    index in the leading axis of each jet coefficient (shape (n, ...)).  The
    expansion about the order-0 coefficient is exact when the reaction is a
    polynomial of degree at most 3; otherwise the jet order may not exceed the
    highest available derivative order.
    """
    if order is None:
        order = jet.order
    jet = jet.pad(order).truncate(order)
    degree = getattr(system, "degree", None)
    if (degree is None or degree > 3) and order > 3:
        raise ValueError(
            "jet order %d needs reaction derivatives beyond order 3" % order)

    u0 = np.asarray(jet.coeffs[0], dtype=float)
    if u0.shape[0] != system.n:
        raise ValueError("leading jet axis must be the state dimension")
    pts_shape = u0.shape[1:]
    flat0 = u0.reshape(system.n, -1)

    delta = EpsJet([np.zeros_like(jet.coeffs[0])] + list(jet.coeffs[1:]))

    out = EpsJet.constant(system.f(flat0.T).T.reshape(u0.shape), order)
    out = out + _contract(system.df(flat0.T), [delta], pts_shape)
    if order >= 2:
        out = out + 0.5 * _contract(system.d2f(flat0.T), [delta, delta], pts_shape)
    if order >= 3:
        out = out + (1.0 / 6.0) * _contract(
            system.d3f(flat0.T), [delta] * 3, pts_shape)
    return out.truncate(order)


def _contract(tensor: np.ndarray, deltas, pts_shape) -> EpsJet:
    """Contract a pointwise derivative tensor against jet-valued arguments."""
    m = deltas[0].order
    npts, n = tensor.shape[0], tensor.shape[1]

    def flatten(c):
        return np.asarray(np.broadcast_to(c, (n,) + pts_shape)).reshape(n, npts)

    flats = [[flatten(c) for c in d.coeffs] for d in deltas]
    out = []
    for total in range(m + 1):
        acc = 0.0
        if len(deltas) == 1:
            acc = np.einsum("pij,jp->ip", tensor, flats[0][total])
        elif len(deltas) == 2:
            for i in range(total + 1):
                acc = acc + np.einsum("pijk,jp,kp->ip", tensor,
                                      flats[0][i], flats[1][total - i])
        else:
            for i in range(total + 1):
                for j in range(total - i + 1):
                    acc = acc + np.einsum("pijkl,jp,kp,lp->ip", tensor,
                                          flats[0][i], flats[1][j],
                                          flats[2][total - i - j])
        acc = acc if isinstance(acc, np.ndarray) else np.zeros((n, npts))
        out.append(acc.reshape((n,) + pts_shape))
    return EpsJet(out)
