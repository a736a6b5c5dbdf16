"""Ground fields: prime fields GF(p) and the rationals.

Elements live in numpy arrays.  GF(p) uses ``int64`` entries in ``[0, p)``;
QQ uses ``object`` arrays holding :class:`fractions.Fraction`.  Nothing here
ever touches floating point values as field elements, but products over small
prime fields are routed through float64 BLAS when every partial sum is
provably below 2**52, which keeps them exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
import math
import numbers

import numpy as np

_FLOAT_EXACT = 2**52
_INT64_SAFE = 2**62


class FieldMismatch(ValueError):
    """An entry cannot be represented in the declared field."""


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    return all(p % d for d in range(3, math.isqrt(p) + 1, 2))


@dataclass(frozen=True)
class Field:
    """A prime field GF(p) (``characteristic == p``) or QQ (``characteristic == 0``)."""

    characteristic: int

    def __post_init__(self):
        c = self.characteristic
        if c != 0 and not is_prime(c):
            raise ValueError(f"GF({c}) is not a prime field")

    @classmethod
    def gf(cls, p: int) -> "Field":
        return cls(p)

    @classmethod
    def qq(cls) -> "Field":
        return cls(0)

    @property
    def kind(self) -> str:
        return "rationals" if self.characteristic == 0 else "prime-field"

    @property
    def is_rational(self) -> bool:
        return self.characteristic == 0

    @property
    def p(self) -> int:
        return self.characteristic

    @property
    def dtype(self):
        return object if self.characteristic == 0 else np.int64

    def __str__(self) -> str:
        return "QQ" if self.characteristic == 0 else f"GF({self.characteristic})"

    # -- scalars ---------------------------------------------------------

    def __call__(self, x) -> int | Fraction:
        """Coerce a Python scalar into the field."""
        if isinstance(x, (bool, np.bool_)):
            x = int(x)
        if isinstance(x, (float, np.floating, complex)):
            raise FieldMismatch(f"floating point value {x!r} is not an exact field element")
        if isinstance(x, np.integer):
            x = int(x)
        if isinstance(x, str):
            x = Fraction(x)
        if isinstance(x, int):
            return Fraction(x) if self.characteristic == 0 else x % self.characteristic
        if isinstance(x, numbers.Rational):
            x = Fraction(x)
            if self.characteristic == 0:
                return x
            p = self.characteristic
            if x.denominator % p == 0:
                raise FieldMismatch(f"{x} has no image in GF({p})")
            return x.numerator * pow(x.denominator, -1, p) % p
        raise FieldMismatch(f"{x!r} is not an element of {self}")

    @cached_property
    def zero(self):
        return self(0)

    @cached_property
    def one(self):
        return self(1)

    def inv(self, x):
        if x == 0:
            raise ZeroDivisionError("inverse of zero")
        if self.characteristic == 0:
            return 1 / Fraction(x)
        return pow(int(x), -1, self.characteristic)

    def to_json(self, x):
        """Integers for GF(p); ``"num/den"`` strings (or plain integers) for QQ."""
        if self.characteristic:
            return int(self(x))
        x = Fraction(x)
        return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"

    # -- arrays ----------------------------------------------------------

    def array(self, data) -> np.ndarray:
        """Coerce nested data (or an array from another field) into this field."""
        if isinstance(data, np.ndarray):
            if data.dtype.kind == "f":
                raise FieldMismatch("floating point arrays are not accepted")
            if self.characteristic and data.dtype.kind in "iub":
                return np.mod(data.astype(np.int64), self.characteristic)
            if self.characteristic == 0 and data.dtype.kind in "iub":
                out = np.empty(data.shape, dtype=object)
                flat = out.reshape(-1)
                for k, v in enumerate(data.reshape(-1).tolist()):
                    flat[k] = Fraction(v)
                return out
        arr = np.array(data, dtype=object)
        out = np.empty(arr.shape, dtype=self.dtype)
        flat = out.reshape(-1)
        for k, v in enumerate(arr.reshape(-1)):
            flat[k] = self(v)
        return out

    def zeros(self, shape) -> np.ndarray:
        if self.characteristic:
            return np.zeros(shape, dtype=np.int64)
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out

    def eye(self, n: int) -> np.ndarray:
        out = self.zeros((n, n))
        for i in range(n):
            out[i, i] = self.one
        return out

    def unit_vector(self, n: int, i: int) -> np.ndarray:
        v = self.zeros(n)
        v[i] = self.one
        return v

    def reduce(self, arr):
        """Bring an integer-valued result back into canonical range."""
        if self.characteristic:
            arr = np.asarray(arr)
            if arr.dtype.kind == "f":
                arr = np.rint(arr).astype(np.int64)
            return np.mod(arr, self.characteristic)
        return arr

    def is_zero(self, arr) -> bool:
        arr = np.asarray(arr)
        if self.characteristic:
            return not arr.any()
        return all(v == 0 for v in arr.reshape(-1))

    def nonzero_mask(self, arr) -> np.ndarray:
        arr = np.asarray(arr)
        if self.characteristic:
            return arr != 0
        return np.vectorize(lambda v: v != 0, otypes=[bool])(arr) if arr.size else np.zeros(arr.shape, bool)

    def scale(self, c, arr):
        return self.reduce(self(c) * np.asarray(arr))

    def random(self, rng: np.random.Generator, shape, bound: int = 3) -> np.ndarray:
        """Random array; QQ entries are small integers in ``[-bound, bound]``."""
        if self.characteristic:
            return rng.integers(0, self.characteristic, size=shape, dtype=np.int64)
        return self.array(rng.integers(-bound, bound + 1, size=shape))

    # -- products --------------------------------------------------------

    def _path(self, terms: int, inner: int) -> str:
        if self.characteristic == 0:
            return "object"
        bound = (self.characteristic - 1) ** terms * max(inner, 1)
        if bound < _FLOAT_EXACT:
            return "float"
        if bound < _INT64_SAFE:
            return "int"
        return "object"

    def matmul(self, a, b) -> np.ndarray:
        a = np.asarray(a)
        b = np.asarray(b)
        inner = a.shape[-1] if a.ndim else 1
        path = self._path(2, inner)
        if path == "float":
            return self.reduce(a.astype(np.float64) @ b.astype(np.float64))
        if path == "int":
            return self.reduce(a @ b)
        if self.characteristic:
            return np.mod(a.astype(object) @ b.astype(object), self.characteristic).astype(np.int64)
        return a @ b

    def einsum(self, subscripts: str, *operands) -> np.ndarray:
        """Exact einsum; contractions run pairwise so every partial sum is reduced."""
        operands = [np.asarray(op) for op in operands]
        if len(operands) <= 2:
            return self._einsum2(subscripts, operands)
        lhs, out = subscripts.split("->")
        specs = lhs.split(",")
        path, _ = np.einsum_path(subscripts, *[np.zeros(o.shape, dtype=np.int8) for o in operands],
                                 optimize="greedy")
        specs = list(specs)
        ops = list(operands)
        for step in path[1:]:
            i, j = sorted(step, reverse=True)
            a_spec, b_spec = specs.pop(i), specs.pop(j)
            a, b = ops.pop(i), ops.pop(j)
            rest = "".join(specs) + out
            keep = "".join(sorted(set(c for c in a_spec + b_spec if c in rest),
                                  key=lambda c: (a_spec + b_spec).index(c)))
            ops.append(self._einsum2(f"{a_spec},{b_spec}->{keep}", [a, b]))
            specs.append(keep)
        return self._einsum2(f"{specs[0]}->{out}", ops)

    def _einsum2(self, subscripts: str, operands) -> np.ndarray:
        lhs, out = subscripts.split("->")
        sizes = {}
        for spec, op in zip(lhs.split(","), operands):
            for c, s in zip(spec, op.shape):
                sizes[c] = s
        inner = math.prod(sizes[c] for c in sizes if c not in out)
        path = self._path(len(operands), inner)
        if path == "float":
            res = np.einsum(subscripts, *[o.astype(np.float64) for o in operands], optimize=True)
            return self.reduce(res)
        if path == "int":
            return self.reduce(np.einsum(subscripts, *operands, optimize=True))
        if self.characteristic:
            res = np.einsum(subscripts, *[o.astype(object) for o in operands])
            return np.mod(res, self.characteristic).astype(np.int64)
        res = np.einsum(subscripts, *operands)
        return np.asarray(res, dtype=object)
