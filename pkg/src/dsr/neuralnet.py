"""The small sign-retrieval CNN, its hand-written reverse mode, and the recursive composites.

One *stage* is the three-layer network

    conv 5x5, 1 -> 64, ReLU
    conv 1x1, 64 -> 32, ReLU
    conv 3x3, 32 -> 1

with "same" zero padding, so it maps an image to an image of the same size.
The composite map alternates stages with the magnitude projection:

    pdsr:  project(phi(x0))
    rdsr:  (project o phi)^K (x0), one shared stage
    fdsr:  project o phi_{K-1} o ... o project o phi_0 (x0), K distinct stages

Internally activations are channels-last ``(N, H, W, C)`` so every convolution
is a single matrix product.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, FormatError, ShapeError, TruncatedError
from .imageio import PaddedImage
from .pocs import project, project_backward

__all__ = [
    "ARCHITECTURE",
    "VARIANTS",
    "ConvLayer",
    "ModelParams",
    "StageTape",
    "Tape",
    "conv2d",
    "conv2d_backward",
    "phi_forward",
    "phi_backward",
    "psi_forward",
    "psi_backward",
    "init_params",
    "save_checkpoint",
    "load_checkpoint",
    "stage_param_count",
]

#: (kernel size, in channels, out channels, activation) per layer of one stage.
ARCHITECTURE = ((5, 1, 64, "relu"), (1, 64, 32, "relu"), (3, 32, 1, "none"))

VARIANTS = ("pdsr", "rdsr", "fdsr")


@dataclass
class ConvLayer:
    kernel: np.ndarray  # (out_ch, in_ch, kh, kw)
    bias: np.ndarray  # (out_ch,)
    activation: str = "none"

    def __post_init__(self):
        if self.kernel.ndim != 4 or self.bias.shape != (self.kernel.shape[0],):
            raise ShapeError(f"kernel {self.kernel.shape} and bias {self.bias.shape} disagree")
        if self.activation not in ("relu", "none"):
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def in_ch(self) -> int:
        return self.kernel.shape[1]

    @property
    def out_ch(self) -> int:
        return self.kernel.shape[0]

    @property
    def size(self) -> int:
        return self.kernel.size + self.bias.size


def stage_param_count() -> int:
    return sum(k * k * i * o + o for k, i, o, _ in ARCHITECTURE)


@dataclass
class ModelParams:
    """Network weights plus the variant tag and recursion depth.

    Weights are stored as float32 (the checkpoint precision); forward and
    backward passes run in float64 unless float32 is requested. ``pocs=False`` is the ablation in which
    every projection is replaced by the identity.
    """

    variant: str
    K: int
    stages: list = field(default_factory=list)
    pocs: bool = True

    def __post_init__(self):
        self.variant = self.variant.lower()
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}")
        if self.K < 1:
            raise ConfigurationError("recursion depth K must be >= 1")
        if self.variant == "pdsr" and self.K != 1:
            raise ConfigurationError("pdsr is defined with K == 1")
        expect = self.K if self.variant == "fdsr" else 1
        if len(self.stages) != expect:
            raise ConfigurationError(f"{self.variant} with K={self.K} needs {expect} stage(s), got {len(self.stages)}")
        for stage in self.stages:
            if len(stage) != len(ARCHITECTURE):
                raise ConfigurationError("every stage must have three layers")
            for layer, (k, i, o, act) in zip(stage, ARCHITECTURE):
                if layer.kernel.shape != (o, i, k, k) or layer.activation != act:
                    raise ConfigurationError(f"layer {layer.kernel.shape}/{layer.activation} does not match the architecture")

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in checkpoint order (stage, layer, kernel then bias)."""
        out = []
        for stage in self.stages:
            for layer in stage:
                out.append(layer.kernel)
                out.append(layer.bias)
        return out

    def count(self) -> int:
        return sum(a.size for a in self.arrays())

    def stage_for(self, k: int):
        """The stage applied at recursion step ``k``."""
        return self.stages[k if self.variant == "fdsr" else 0]

    def copy(self) -> "ModelParams":
        stages = [[ConvLayer(l.kernel.copy(), l.bias.copy(), l.activation) for l in s] for s in self.stages]
        return ModelParams(self.variant, self.K, stages, self.pocs)

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return (
            (self.variant, self.K, self.pocs) == (other.variant, other.K, other.pocs)
            and all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))
        )


# ---------------------------------------------------------------------------
# convolution
# ---------------------------------------------------------------------------


def _gather(layer: ConvLayer) -> bool:
    # im2col when the input is thinner than the output, per-offset scatter otherwise
    return layer.in_ch <= layer.out_ch


def _weights(layer: ConvLayer, dtype) -> np.ndarray:
    return np.asarray(layer.kernel, dtype=dtype)


def _conv_forward(x: np.ndarray, layer: ConvLayer):
    """Convolution on channels-last ``x``; returns (output, cols) where cols is the im2col cache or None."""
    n, h, w, c = x.shape
    if c != layer.in_ch:
        raise ShapeError(f"input has {c} channels, layer expects {layer.in_ch}")
    o, _, kh, kw = layer.kernel.shape
    ph, pw = kh // 2, kw // 2
    wk = _weights(layer, x.dtype)
    bias = layer.bias.astype(x.dtype)
    cols = None
    if kh == kw == 1:
        out = x.reshape(-1, c) @ wk.reshape(o, c).T
    elif _gather(layer):
        xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
        cols = sliding_window_view(xp, (kh, kw), axis=(1, 2)).reshape(n * h * w, c * kh * kw)
        out = cols @ wk.reshape(o, c * kh * kw).T
    else:
        z = x.reshape(-1, c) @ wk.transpose(1, 0, 2, 3).reshape(c, o * kh * kw)
        z = np.pad(z.reshape(n, h, w, o, kh, kw), ((0, 0), (ph, ph), (pw, pw), (0, 0), (0, 0), (0, 0)))
        out = np.zeros((n, h, w, o), dtype=x.dtype)
        for a in range(kh):
            for b in range(kw):
                out += z[:, a : a + h, b : b + w, :, a, b]
    out = out.reshape(n, h, w, o)
    out += bias
    if layer.activation == "relu":
        np.maximum(out, 0, out=out)
    return out, cols


def _conv_backward(grad: np.ndarray, x: np.ndarray, out: np.ndarray, cols, layer: ConvLayer, need_input: bool = True):
    """Adjoint of :func:`_conv_forward` given its input, output and cache (channels-last)."""
    n, h, w, c = x.shape
    o, _, kh, kw = layer.kernel.shape
    ph, pw = kh // 2, kw // 2
    if grad.shape != out.shape:
        raise ShapeError(f"gradient {grad.shape} does not match layer output {out.shape}")
    if layer.activation == "relu":
        grad = grad * (out > 0)
    g2 = grad.reshape(-1, o)
    gb = g2.sum(axis=0)
    wk = _weights(layer, x.dtype)
    gx = None
    if kh == kw == 1:
        x2 = x.reshape(-1, c)
        gk = (g2.T @ x2).reshape(o, c, 1, 1)
        if need_input:
            gx = (g2 @ wk.reshape(o, c)).reshape(n, h, w, c)
    elif _gather(layer):
        if cols is None:
            xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
            cols = sliding_window_view(xp, (kh, kw), axis=(1, 2)).reshape(n * h * w, c * kh * kw)
        gk = (g2.T @ cols).reshape(o, c, kh, kw)
        if need_input:
            gcols = (g2 @ wk.reshape(o, c * kh * kw)).reshape(n, h, w, c, kh, kw)
            gxp = np.zeros((n, h + 2 * ph, w + 2 * pw, c), dtype=x.dtype)
            for a in range(kh):
                for b in range(kw):
                    gxp[:, a : a + h, b : b + w, :] += gcols[..., a, b]
            gx = gxp[:, ph : ph + h, pw : pw + w, :]
    else:
        gp = np.pad(grad, ((0, 0), (ph, ph), (pw, pw), (0, 0)))
        gz = np.empty((n, h, w, o, kh, kw), dtype=x.dtype)
        for a in range(kh):
            for b in range(kw):
                gz[..., a, b] = gp[:, 2 * ph - a : 2 * ph - a + h, 2 * pw - b : 2 * pw - b + w, :]
        gz = gz.reshape(-1, o * kh * kw)
        gk = (x.reshape(-1, c).T @ gz).reshape(c, o, kh, kw).transpose(1, 0, 2, 3)
        if need_input:
            gx = (gz @ wk.transpose(1, 0, 2, 3).reshape(c, o * kh * kw).T).reshape(n, h, w, c)
    return gx, gk, gb


def _as_nchw(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 3:
        return x[None], True
    if x.ndim == 4:
        return x, False
    raise ShapeError(f"expected (C, H, W) or (N, C, H, W), got {x.shape}")


def conv2d(x: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Same-padded cross-correlation plus bias and activation on a ``(C, H, W)`` array.

    A leading batch axis ``(N, C, H, W)`` is also accepted.
    """
    x4, single = _as_nchw(x)
    out, _ = _conv_forward(np.ascontiguousarray(x4.transpose(0, 2, 3, 1)), layer)
    out = out.transpose(0, 3, 1, 2)
    return out[0] if single else out


def conv2d_backward(grad_out: np.ndarray, x: np.ndarray, layer: ConvLayer):
    """Return ``(grad_input, grad_kernel, grad_bias)`` for :func:`conv2d` at input ``x``."""
    x4, single = _as_nchw(x)
    g4, _ = _as_nchw(grad_out)
    xl = np.ascontiguousarray(x4.transpose(0, 2, 3, 1))
    out, cols = _conv_forward(xl, layer)
    gl = np.ascontiguousarray(g4.transpose(0, 2, 3, 1))
    gx, gk, gb = _conv_backward(gl, xl, out, cols, layer)
    gx = gx.transpose(0, 3, 1, 2)
    return (gx[0] if single else gx), gk, gb


# ---------------------------------------------------------------------------
# one stage and the composite
# ---------------------------------------------------------------------------


@dataclass
class StageTape:
    inputs: list  # per layer, channels-last input
    outputs: list  # per layer, post-activation output
    cols: list  # per layer im2col cache or None
    mask: np.ndarray | None = None  # projection tape following this stage


@dataclass
class Tape:
    stages: list = field(default_factory=list)


def _images(x) -> tuple[np.ndarray, bool]:
    if isinstance(x, PaddedImage):
        return x.samples[None], True
    x = np.asarray(x)
    if x.dtype != np.float32:
        x = x.astype(np.float64, copy=False)
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise ShapeError(f"expected an image or a stack of images, got shape {x.shape}")


def _phi(x: np.ndarray, stage, tape: StageTape | None) -> np.ndarray:
    """Stage forward on a stack ``(N, H, W)``."""
    a = x[..., None]
    for layer in stage:
        out, cols = _conv_forward(a, layer)
        if tape is not None:
            tape.inputs.append(a)
            tape.outputs.append(out)
            tape.cols.append(cols)
        a = out
    return a[..., 0]


def _phi_backward(grad: np.ndarray, stage, tape: StageTape, need_input: bool = True):
    g = grad[..., None]
    grads = [None] * len(stage)
    for i in reversed(range(len(stage))):
        layer = stage[i]
        g, gk, gb = _conv_backward(g, tape.inputs[i], tape.outputs[i], tape.cols[i], layer, need_input or i > 0)
        grads[i] = (gk, gb)
    return (g[..., 0] if g is not None else None), grads


def phi_forward(x, stage, tape: StageTape | None = None):
    """Apply one three-layer stage; returns the same kind of object it was given."""
    xs, single = _images(x)
    y = _phi(xs, stage, tape)
    if isinstance(x, PaddedImage):
        return PaddedImage(y[0], original_width=x.original_width, original_height=x.original_height)
    return y[0] if single else y


def phi_backward(grad_out, stage, tape: StageTape):
    """Returns ``(grad_input, [(grad_kernel, grad_bias) per layer])``."""
    g, single = _images(grad_out)
    gx, grads = _phi_backward(g, stage, tape)
    return (gx[0] if single else gx), grads


def psi_forward(x0, params: ModelParams, lam: np.ndarray, tape: Tape | None = None, dtype=np.float64):
    """Run the K-step composite; output satisfies the magnitude bound when ``params.pocs``.

    ``x0`` is a :class:`PaddedImage`, an ``(H, W)`` array, or a stack ``(N, H, W)``
    with ``lam`` shaped ``(N, H/8, W/8, 8, 8)``. ``dtype=np.float32`` selects the
    faster single-precision path used for training.
    """
    xs, single = _images(x0)
    xs = xs.astype(dtype, copy=False)
    lam = np.asarray(lam, dtype=dtype)
    if single and lam.ndim == 4:
        lam = lam[None]
    if lam.shape[0] != xs.shape[0] or lam.shape[1:] != (xs.shape[1] // 8, xs.shape[2] // 8, 8, 8):
        raise ShapeError(f"magnitude field {lam.shape} does not match input {xs.shape}")
    if params.variant == "fdsr" and len(params.stages) != params.K:
        raise ConfigurationError("fdsr needs one stage per recursion step")
    x = xs
    for k in range(params.K):
        st = StageTape([], [], []) if tape is not None else None
        x = _phi(x, params.stage_for(k), st)
        if params.pocs:
            x, mask = project(x, lam)
            if st is not None:
                st.mask = mask
        if tape is not None:
            tape.stages.append(st)
    if isinstance(x0, PaddedImage):
        return PaddedImage(x[0], original_width=x0.original_width, original_height=x0.original_height)
    return x[0] if single else x


def psi_backward(grad_out, tape: Tape, params: ModelParams) -> list[np.ndarray]:
    """Parameter gradients of ``<grad_out, psi(x0)>``, in :meth:`ModelParams.arrays` order.

    Gradients of a shared stage are summed over all K uses.
    """
    if len(tape.stages) != params.K:
        raise ConfigurationError(f"tape holds {len(tape.stages)} stages, params expect K={params.K}")
    g, _ = _images(grad_out)
    g = g.astype(tape.stages[0].inputs[0].dtype, copy=False)
    acc = [[None, None, None] for _ in params.stages]
    for k in reversed(range(params.K)):
        st = tape.stages[k]
        if params.pocs:
            g = project_backward(g, st.mask)
        g, grads = _phi_backward(g, params.stage_for(k), st, need_input=k > 0)
        slot = acc[k if params.variant == "fdsr" else 0]
        for i, (gk, gb) in enumerate(grads):
            if slot[i] is None:
                slot[i] = [gk, gb]
            else:
                slot[i][0] = slot[i][0] + gk
                slot[i][1] = slot[i][1] + gb
    out = []
    for slot in acc:
        for gk, gb in slot:
            out.append(gk.astype(np.float64))
            out.append(gb.astype(np.float64))
    return out


# ---------------------------------------------------------------------------
# initialisation and checkpoints
# ---------------------------------------------------------------------------


def _init_stage(rng: np.random.Generator):
    stage = []
    for k, i, o, act in ARCHITECTURE:
        std = np.sqrt(2.0 / (i * k * k))
        kernel = (rng.standard_normal((o, i, k, k)) * std).astype(np.float32)
        stage.append(ConvLayer(kernel, np.zeros(o, dtype=np.float32), act))
    return stage


def init_params(variant: str, K: int, seed: int, pocs: bool = True) -> ModelParams:
    """He-normal kernels (std sqrt(2 / fan_in)) and zero biases, deterministic in ``seed``."""
    variant = variant.lower()
    if K < 1:
        raise ConfigurationError("recursion depth K must be >= 1")
    rng = np.random.default_rng(seed)
    n = K if variant == "fdsr" else 1
    return ModelParams(variant, K, [_init_stage(rng) for _ in range(n)], pocs)


MAGIC = b"DSRW"
VERSION = 1
_NO_POCS = 0x80


def save_checkpoint(params: ModelParams, path) -> None:
    """Write ``DSRW | version | variant | K | float32 LE parameters``.

    Parameters follow :meth:`ModelParams.arrays` order, each array in C order.
    The variant byte is 0/1/2 for pdsr/rdsr/fdsr, with bit 7 set for a model
    trained without projections.
    """
    if params.K > 255:
        raise ConfigurationError("K does not fit the one-byte header field")
    code = VARIANTS.index(params.variant) | (0 if params.pocs else _NO_POCS)
    body = b"".join(np.ascontiguousarray(a, dtype="<f4").tobytes() for a in params.arrays())
    Path(path).write_bytes(MAGIC + struct.pack("<BBB", VERSION, code, params.K) + body)


def load_checkpoint(path) -> ModelParams:
    data = Path(path).read_bytes()
    if len(data) < 7:
        raise TruncatedError(f"{path}: checkpoint header is truncated")
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: bad checkpoint magic {data[:4]!r}")
    version, code, K = struct.unpack_from("<BBB", data, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported checkpoint version {version}")
    pocs = not code & _NO_POCS
    code &= ~_NO_POCS
    if code >= len(VARIANTS) or K < 1:
        raise FormatError(f"{path}: bad variant {code} or K {K}")
    variant = VARIANTS[code]
    n_stages = K if variant == "fdsr" else 1
    expect = 7 + 4 * n_stages * stage_param_count()
    if len(data) < expect:
        raise TruncatedError(f"{path}: expected {expect} bytes, found {len(data)}")
    if len(data) > expect:
        raise FormatError(f"{path}: {len(data) - expect} trailing bytes")
    flat = np.frombuffer(data, dtype="<f4", offset=7).astype(np.float32)
    pos = 0
    stages = []
    for _ in range(n_stages):
        stage = []
        for k, i, o, act in ARCHITECTURE:
            kernel = flat[pos : pos + o * i * k * k].reshape(o, i, k, k).copy()
            pos += kernel.size
            bias = flat[pos : pos + o].copy()
            pos += o
            stage.append(ConvLayer(kernel, bias, act))
        stages.append(stage)
    return ModelParams(variant, K, stages, pocs)
