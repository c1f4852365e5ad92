"""Minimal deterministic NN primitives on plain numpy arrays.

Provides exactly the layers the reference-picture generator needs: standard
and dilated 2-D convolution with explicit analytic backward passes, ReLU,
channel concatenation, and the Adadelta update rule. Arrays are laid out
(batch, channel, height, width). All functions are pure (state is passed
explicitly) and single-threaded with a fixed summation order, so repeated
calls are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import NonFiniteError, ShapeMismatchError


def same_padding(kernel_size: int, dilation: int) -> int:
    """Zero-padding per side that preserves spatial dims for odd kernels."""
    return dilation * (kernel_size - 1) // 2


@dataclass
class ConvParams:
    """Square-kernel 2-D convolution parameters; stride is fixed at 1.

    ``padding=None`` selects "same" mode, i.e. dilation*(k-1)/2 per side.
    """

    weights: np.ndarray  # (out_ch, in_ch, k, k)
    bias: np.ndarray  # (out_ch,)
    dilation: int = 1
    padding: int | None = None

    def __post_init__(self):
        self.weights = np.asarray(self.weights)
        self.bias = np.asarray(self.bias)
        if self.weights.ndim != 4:
            raise ShapeMismatchError(
                f"conv weights must be 4-D (out,in,kH,kW), got {self.weights.shape}"
            )
        if self.weights.shape[2] != self.weights.shape[3]:
            raise ShapeMismatchError(
                f"kernel must be square, got {self.weights.shape[2]}x{self.weights.shape[3]}"
            )
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeMismatchError(
                f"bias shape {self.bias.shape} does not match out_ch axis "
                f"({self.weights.shape[0]})"
            )
        if self.dilation < 1:
            raise ValueError(f"dilation must be >= 1, got {self.dilation}")
        if self.padding is None:
            self.padding = same_padding(self.kernel_size, self.dilation)
        elif self.padding < 0:
            raise ValueError(f"padding must be >= 0, got {self.padding}")

    @property
    def out_ch(self) -> int:
        return self.weights.shape[0]

    @property
    def in_ch(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_size(self) -> int:
        return self.weights.shape[2]


def _check_4d(x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 4:
        raise ShapeMismatchError(f"{what} must be 4-D (batch,channel,H,W), got {x.shape}")
    return x


def _windows(x_pad: np.ndarray, kernel: int, dilation: int) -> np.ndarray:
    """Strided view (b, c, oh, ow, k, k) of all dilated kernel footprints."""
    span = dilation * (kernel - 1) + 1
    win = np.lib.stride_tricks.sliding_window_view(x_pad, (span, span), axis=(2, 3))
    return win[..., ::dilation, ::dilation]


def conv_output_hw(h: int, w: int, params: ConvParams) -> tuple[int, int]:
    reach = params.dilation * (params.kernel_size - 1)
    oh = h + 2 * params.padding - reach
    ow = w + 2 * params.padding - reach
    if oh < 1 or ow < 1:
        raise ShapeMismatchError(
            f"input {h}x{w} too small for kernel {params.kernel_size} "
            f"dilation {params.dilation} padding {params.padding}"
        )
    return oh, ow


def conv2d_forward(x: np.ndarray, params: ConvParams) -> np.ndarray:
    """out[b,o,y,x] = bias[o] + sum_{c,i,j} w[o,c,i,j] * in[b,c,y+d(i-(k-1)/2),x+d(j-(k-1)/2)]

    with zero padding outside bounds. "Same" padding preserves H and W.
    """
    x = _check_4d(x, "conv input")
    if x.shape[1] != params.in_ch:
        raise ShapeMismatchError(
            f"channel axis mismatch: input has {x.shape[1]} channels, "
            f"weights expect {params.in_ch}"
        )
    if not np.all(np.isfinite(x)):
        raise NonFiniteError("conv input contains NaN or Inf")
    p = params.padding
    oh, ow = conv_output_hw(x.shape[2], x.shape[3], params)
    x_pad = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    win = _windows(x_pad, params.kernel_size, params.dilation)
    out = np.einsum("bchwij,ocij->bohw", win, params.weights, optimize=True)
    out += params.bias[None, :, None, None]
    assert out.shape[2:] == (oh, ow)
    return out


def conv2d_backward(
    x: np.ndarray, params: ConvParams, grad_out: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of :func:`conv2d_forward`.

    Returns (grad_input, grad_weights, grad_bias) with the shapes of their
    primal counterparts.
    """
    x = _check_4d(x, "conv input")
    grad_out = _check_4d(grad_out, "grad_out")
    oh, ow = conv_output_hw(x.shape[2], x.shape[3], params)
    expect = (x.shape[0], params.out_ch, oh, ow)
    if grad_out.shape != expect:
        raise ShapeMismatchError(f"grad_out shape {grad_out.shape} != forward output {expect}")
    b, c, h, w = x.shape
    k, d, p = params.kernel_size, params.dilation, params.padding

    x_pad = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
    win = _windows(x_pad, k, d)
    grad_bias = grad_out.sum(axis=(0, 2, 3))
    grad_weights = np.einsum("bchwij,bohw->ocij", win, grad_out, optimize=True)

    grad_pad = np.zeros_like(x_pad)
    for i in range(k):
        for j in range(k):
            tap = np.einsum("bohw,oc->bchw", grad_out, params.weights[:, :, i, j], optimize=True)
            grad_pad[:, :, i * d : i * d + oh, j * d : j * d + ow] += tap
    grad_input = grad_pad[:, :, p : p + h, p : p + w] if p else grad_pad
    return np.ascontiguousarray(grad_input), grad_weights, grad_bias


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Pass gradient where x > 0; subgradient at exactly 0 is 0."""
    if np.shape(x) != np.shape(grad_out):
        raise ShapeMismatchError(
            f"relu grad_out shape {np.shape(grad_out)} != input shape {np.shape(x)}"
        )
    return np.where(np.asarray(x) > 0, grad_out, 0)


def concat_channels(parts: list[np.ndarray]) -> np.ndarray:
    """Concatenate along the channel axis; batch and spatial dims must agree."""
    if not parts:
        raise ShapeMismatchError("concat_channels needs at least one part")
    parts = [_check_4d(part, "concat part") for part in parts]
    ref = parts[0]
    for i, part in enumerate(parts[1:], start=1):
        if part.shape[0] != ref.shape[0]:
            raise ShapeMismatchError(f"concat part {i} batch {part.shape[0]} != {ref.shape[0]}")
        if part.shape[2:] != ref.shape[2:]:
            raise ShapeMismatchError(
                f"concat part {i} spatial dims {part.shape[2:]} != {ref.shape[2:]}"
            )
    return np.concatenate(parts, axis=1)


def split_channels(grad_out: np.ndarray, channel_counts: list[int]) -> list[np.ndarray]:
    """Backward of concat: split grad_out by the original channel ranges."""
    grad_out = _check_4d(grad_out, "grad_out")
    if sum(channel_counts) != grad_out.shape[1]:
        raise ShapeMismatchError(
            f"channel counts {channel_counts} do not sum to {grad_out.shape[1]}"
        )
    out, start = [], 0
    for count in channel_counts:
        out.append(grad_out[:, start : start + count])
        start += count
    return out


@dataclass
class AdadeltaState:
    """Running accumulators for one parameter tensor.

    ``lr`` is a plain scale applied to the Adadelta step (the update rule
    itself is parameter-free apart from rho and eps).
    """

    acc_grad_sq: np.ndarray  # E[g^2]
    acc_delta_sq: np.ndarray  # E[delta^2]
    rho: float = 0.95
    eps: float = 1e-6
    lr: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (0,1), got {self.rho}")
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.lr < 0.0:
            raise ValueError(f"lr must be non-negative, got {self.lr}")
        if self.acc_grad_sq.shape != self.acc_delta_sq.shape:
            raise ShapeMismatchError("accumulator shapes differ")

    @classmethod
    def zeros_like(cls, param: np.ndarray, rho: float = 0.95, eps: float = 1e-6,
                   lr: float = 1e-4) -> "AdadeltaState":
        return cls(
            acc_grad_sq=np.zeros_like(param),
            acc_delta_sq=np.zeros_like(param),
            rho=rho,
            eps=eps,
            lr=lr,
        )


def adadelta_step(
    param: np.ndarray, grad: np.ndarray, state: AdadeltaState
) -> tuple[np.ndarray, AdadeltaState]:
    """One Adadelta update; returns the new parameter and new state.

        E[g^2]  <- rho*E[g^2] + (1-rho)*g^2
        delta    = -sqrt((E[d^2]+eps) / (E[g^2]+eps)) * g
        E[d^2]  <- rho*E[d^2] + (1-rho)*delta^2
        param   <- param + lr*delta
    """
    if param.shape != grad.shape:
        raise ShapeMismatchError(f"grad shape {grad.shape} != param shape {param.shape}")
    if state.acc_grad_sq.shape != param.shape:
        raise ShapeMismatchError(
            f"state shape {state.acc_grad_sq.shape} != param shape {param.shape}"
        )
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError("gradient contains NaN or Inf; update aborted")
    eg = state.rho * state.acc_grad_sq + (1.0 - state.rho) * grad * grad
    delta = -np.sqrt((state.acc_delta_sq + state.eps) / (eg + state.eps)) * grad
    ed = state.rho * state.acc_delta_sq + (1.0 - state.rho) * delta * delta
    new_param = param + state.lr * delta
    return new_param, replace(state, acc_grad_sq=eg, acc_delta_sq=ed)
