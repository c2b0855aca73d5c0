"""Linear time-invariant state-space kernels.

Continuous system  h'(t) = A h(t) + B x(t),  y(t) = C h(t) + D x(t)  with a
timescale ``delta``, discretized under a zero-order hold and evaluated either
as a step-by-step recurrence or as a causal 1-D convolution. Both evaluation
routes must agree; the test suite checks them against each other.

Everything here is plain float64 NumPy. The learnable, input-dependent blocks
built on the same recurrence live in :mod:`pulsefusion.ssm_blocks`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import InvalidParameterError, InvalidInputError

# Below this smallest singular value of delta*A the ZOH input matrix is
# evaluated through its power series instead of the explicit inverse.
_SINGULAR_CUTOFF = 1e-6


def _as_square(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidParameterError(f"state matrix must be square, got shape {a.shape}")
    return a


def _as_vector(v, n: int, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] != n:
        raise InvalidParameterError(f"{name} must have length {n}, got {v.shape[0]}")
    return v


@dataclass(frozen=True)
class SSMParams:
    """Continuous-time parameters (A, B, C, D) plus the timescale delta."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float = 0.0
    delta: float = 1.0

    def __post_init__(self):
        a = _as_square(self.a)
        n = a.shape[0]
        b = _as_vector(self.b, n, "input matrix B")
        c = _as_vector(self.c, n, "output matrix C")
        if not np.all(np.isfinite(a)) or not np.all(np.isfinite(b)) or not np.all(np.isfinite(c)):
            raise InvalidParameterError("state-space parameters must be finite")
        if not np.isfinite(self.d):
            raise InvalidParameterError("skip term D must be finite")
        if not np.isfinite(self.delta) or self.delta <= 0:
            raise InvalidParameterError(f"delta must be strictly positive, got {self.delta!r}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", float(self.d))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def state_size(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class DiscreteSSM:
    """Discrete transition (a_bar, b_bar) with the shared readout (c, d)."""

    a_bar: np.ndarray
    b_bar: np.ndarray
    c: np.ndarray
    d: float = 0.0

    def __post_init__(self):
        a = _as_square(self.a_bar)
        n = a.shape[0]
        object.__setattr__(self, "a_bar", a)
        object.__setattr__(self, "b_bar", _as_vector(self.b_bar, n, "b_bar"))
        object.__setattr__(self, "c", _as_vector(self.c, n, "c"))
        object.__setattr__(self, "d", float(self.d))

    @property
    def state_size(self) -> int:
        return self.a_bar.shape[0]


@dataclass(frozen=True)
class ConvKernel:
    """Causal kernel taps (c b_bar, c a_bar b_bar, ...) plus the skip scalar."""

    taps: np.ndarray
    skip: float = 0.0

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "taps", taps)
        object.__setattr__(self, "skip", float(self.skip))

    def __len__(self) -> int:
        return self.taps.shape[0]


def _phi1_series(m: np.ndarray) -> np.ndarray:
    """Sum of m^{k-1} / k! for k >= 1, the well-defined limit of (e^m - I) m^{-1}."""
    n = m.shape[0]
    term = np.eye(n)
    out = term.copy()
    for k in range(2, 64):
        term = term @ m / k
        out += term
        if np.max(np.abs(term)) < 1e-18 * max(1.0, np.max(np.abs(out))):
            break
    return out


def zoh_discretize(params: SSMParams) -> DiscreteSSM:
    """Zero-order-hold discretization of a continuous system.

    a_bar = exp(delta A) and b_bar = (delta A)^{-1} (exp(delta A) - I) delta B.
    When delta*A is singular or nearly so, the inverse form is replaced by the
    convergent series sum_{k>=1} (delta A)^{k-1} / k! applied to delta B, whose
    A -> 0 limit gives b_bar = delta B.
    """
    m = params.delta * params.a
    a_bar = expm(m)
    db = params.delta * params.b
    smallest_sv = np.linalg.svd(m, compute_uv=False)[-1] if m.size else 0.0
    if smallest_sv < _SINGULAR_CUTOFF:
        b_bar = _phi1_series(m) @ db
    else:
        b_bar = np.linalg.solve(m, (a_bar - np.eye(m.shape[0])) @ db)
    return DiscreteSSM(a_bar=a_bar, b_bar=b_bar, c=params.c, d=params.d)


def scan_recurrent(d: DiscreteSSM, x, h0=None):
    """Evaluate the recurrence h_k = a_bar h_{k-1} + b_bar x_k, y_k = c h_k + d x_k.

    Returns (y, final_state). A length-0 input yields an empty output and the
    initial state unchanged.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("scan input must be finite")
    n = d.state_size
    if h0 is None:
        h = np.zeros(n)
    else:
        h = _as_vector(np.asarray(h0, dtype=np.float64), n, "initial state h0").copy()
    y = np.empty_like(x)
    for k in range(x.shape[0]):
        h = d.a_bar @ h + d.b_bar * x[k]
        y[k] = d.c @ h + d.d * x[k]
    return y, h


def build_conv_kernel(d: DiscreteSSM, length: int) -> ConvKernel:
    """Kernel taps[k] = c a_bar^k b_bar for k = 0 .. length-1 (a Krylov sequence)."""
    if length < 1:
        raise InvalidParameterError(f"kernel length must be >= 1, got {length}")
    taps = np.empty(length)
    v = d.b_bar.copy()
    for k in range(length):
        taps[k] = d.c @ v
        if k + 1 < length:
            v = d.a_bar @ v
    return ConvKernel(taps=taps, skip=d.d)


def apply_conv(x, kernel: ConvKernel) -> np.ndarray:
    """Causal convolution of x with the kernel taps plus skip * x.

    Output length equals input length; taps beyond the input length never
    extend the output.
    """
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] < 1:
        raise InvalidInputError("apply_conv needs at least one sample")
    full = np.convolve(x, kernel.taps)
    return full[: x.shape[0]] + kernel.skip * x
