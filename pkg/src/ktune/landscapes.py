"""The two case studies: 2D convolution and GEMM.

Both search spaces use the published parameter value lists. Their constraint
sets are reconstructions: the original constraints were never published, so
the constrained sizes here are reported next to the published sizes (3424 and
241,600) rather than matched to them.

Parameter names follow the published tables, except that the local-memory
switches are spelled ``LOCAL`` (conv) and ``LOCAL_A``/``LOCAL_B`` (GEMM) since
``$`` is not legal in an identifier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveTime, ShapeMismatch, UnknownDevice
from .kernel import (
    ArgumentSpec,
    DeviceModel,
    DivGlobalSize,
    KernelSpec,
    MulGlobalSize,
    MulLocalSize,
)
from .space import Configuration, SearchSpace
from .tuner import device_constraints

YES_NO = ("no", "yes")

CONV_VALUES = {
    "Xwg": (8, 16, 32, 64),
    "Ywg": (8, 16, 32, 64),
    "Xwpt": (1, 2, 4, 8),
    "Ywpt": (1, 2, 4, 8),
    "LOCAL": (0, 1, 2),
    "VW": (1, 2, 4, 8),
    "PAD": (0, 1),
    "UNR": (0, 1),
}

GEMM_VALUES = {
    "Mwg": (16, 32, 64, 128),
    "Nwg": (16, 32, 64, 128),
    "Kwg": (16, 32, 64, 128),
    "MdimC": (8, 16, 32),
    "NdimC": (8, 16, 32),
    "LOCAL_A": (0, 1),
    "LOCAL_B": (0, 1),
    "MdimA": (8, 16, 32),
    "NdimB": (8, 16, 32),
    "Mstride": (0, 1),
    "Nstride": (0, 1),
    "Mvec": (1, 2, 4, 8),
    "Nvec": (1, 2, 4, 8),
    "Kwi": (2, 8),
}

_LABELLED = {"UNR", "LOCAL_A", "LOCAL_B", "Mstride", "Nstride"}

PUBLISHED_CONV_SIZE = 3424
PUBLISHED_GEMM_SIZE = 241_600


# --- problems -----------------------------------------------------------------


@dataclass
class ConvProblem:
    """B = w * sum_ij F[j, i] * A[y + j, x + i] over a zero-bordered image.

    ``image`` is row-major with shape (Y + 2*Yhf, X + 2*Xhf); ``filter`` has
    shape (Yf, Xf).
    """

    X: int
    Y: int
    Xf: int = 3
    Yf: int = 3
    w: float = 1.0
    image: np.ndarray | None = None
    filter: np.ndarray | None = None

    def __post_init__(self):
        if self.Xf % 2 == 0 or self.Yf % 2 == 0:
            raise ValueError("filter sizes must be odd")

    @property
    def Xhf(self) -> int:
        return (self.Xf - 1) // 2

    @property
    def Yhf(self) -> int:
        return (self.Yf - 1) // 2

    @property
    def padded_shape(self) -> tuple[int, int]:
        return (self.Y + 2 * self.Yhf, self.X + 2 * self.Xhf)

    def image_fill(self, seed: int) -> str:
        h, w = self.padded_shape
        return f"uniform:{seed}|border:{w}x{h}:{self.Xhf}x{self.Yhf}"

    @classmethod
    def random(cls, X, Y, Xf, Yf, w=1.0, seed=0) -> "ConvProblem":
        p = cls(X, Y, Xf, Yf, w)
        h, wd = p.padded_shape
        from .kernel import fill_buffer

        p.image = fill_buffer(p.image_fill(seed), h * wd).reshape(h, wd)
        p.filter = fill_buffer(f"uniform:{seed + 1}", Xf * Yf).reshape(Yf, Xf)
        return p


@dataclass
class GemmProblem:
    """C = alpha * A^T B + beta * C with A stored K x M, B K x N, C M x N."""

    M: int
    N: int
    K: int
    alpha: float = 1.0
    beta: float = 0.0
    A: np.ndarray | None = None
    B: np.ndarray | None = None
    C: np.ndarray | None = None

    @classmethod
    def random(cls, M, N, K, alpha=1.0, beta=0.0, seed=0) -> "GemmProblem":
        rng = np.random.default_rng(seed)
        return cls(
            M, N, K, alpha, beta,
            rng.random((K, M), dtype=np.float32),
            rng.random((K, N), dtype=np.float32),
            rng.random((M, N), dtype=np.float32),
        )


# --- reference oracles -----------------------------------------------------------


def conv_reference(problem: ConvProblem) -> np.ndarray:
    """Output image of shape (Y, X), accumulated in float64, returned as float32."""
    h, w = problem.padded_shape
    A = np.asarray(problem.image)
    F = np.asarray(problem.filter)
    if A.shape != (h, w):
        raise ShapeMismatch(f"image shape {A.shape}, expected {(h, w)}")
    if F.shape != (problem.Yf, problem.Xf):
        raise ShapeMismatch(f"filter shape {F.shape}, expected {(problem.Yf, problem.Xf)}")
    A = A.astype(np.float64)
    out = np.zeros((problem.Y, problem.X))
    for j in range(problem.Yf):
        for i in range(problem.Xf):
            out += F[j, i] * A[j : j + problem.Y, i : i + problem.X]
    return (problem.w * out).astype(np.float32)


def gemm_reference(problem: GemmProblem) -> np.ndarray:
    M, N, K = problem.M, problem.N, problem.K
    A, B = np.asarray(problem.A), np.asarray(problem.B)
    C = np.zeros((M, N), np.float32) if problem.C is None else np.asarray(problem.C)
    if A.shape != (K, M) or B.shape != (K, N) or C.shape != (M, N):
        raise ShapeMismatch(f"A {A.shape}, B {B.shape}, C {C.shape} do not match M={M} N={N} K={K}")
    out = problem.alpha * (A.T.astype(np.float64) @ B.astype(np.float64))
    out += problem.beta * C.astype(np.float64)
    return out.astype(np.float32)


def conv_oracle(problem: ConvProblem):
    """Oracle over the conv kernel's argument list: (image, filter, output)."""

    def oracle(args):
        p = ConvProblem(problem.X, problem.Y, problem.Xf, problem.Yf, problem.w)
        p.image = np.asarray(args[0]).reshape(p.padded_shape)
        p.filter = np.asarray(args[1]).reshape(p.Yf, p.Xf)
        return [conv_reference(p).ravel()]

    return oracle


def gemm_oracle(problem: GemmProblem):
    """Oracle over the GEMM kernel's argument list: (A, B, C)."""

    def oracle(args):
        M, N, K = problem.M, problem.N, problem.K
        p = GemmProblem(
            M, N, K, problem.alpha, problem.beta,
            np.asarray(args[0]).reshape(K, M),
            np.asarray(args[1]).reshape(K, N),
            np.asarray(args[2]).reshape(M, N),
        )
        return [gemm_reference(p).ravel()]

    return oracle


def copy_oracle(args):
    """Reference for the copy kernel: the output equals the first input."""
    return [np.asarray(args[0]).copy()]


ORACLES = {"copy": copy_oracle}


# --- metrics --------------------------------------------------------------------


def conv_metrics(problem: ConvProblem, time_ms: float) -> tuple[float, float]:
    """(GFLOPS, GB/s) counting 1 + 2*Xf*Yf flops and 2 four-byte accesses per pixel."""
    if not time_ms > 0:
        raise NonPositiveTime(f"time must be positive, got {time_ms}")
    t = time_ms / 1e3
    pixels = problem.X * problem.Y
    gflops = (1 + 2 * problem.Xf * problem.Yf) * pixels / t / 1e9
    gbs = 2 * pixels * 4 / t / 1e9
    return gflops, gbs


def gemm_gflops(M: int, N: int, K: int, time_ms: float) -> float:
    if not time_ms > 0:
        raise NonPositiveTime(f"time must be positive, got {time_ms}")
    return 2 * M * N * K / (time_ms / 1e3) / 1e9


# --- kernels and spaces ---------------------------------------------------------


def _space(values: dict[str, tuple[int, ...]]) -> SearchSpace:
    space = SearchSpace()
    for name, vals in values.items():
        space.add_parameter(name, vals, YES_NO if name in _LABELLED else None)
    return space


def conv_kernel(problem: ConvProblem, seed: int = 0) -> KernelSpec:
    h, w = problem.padded_shape
    return KernelSpec(
        name="conv",
        source_ref="conv.cl",
        global_size=(problem.X, problem.Y),
        local_size=(1, 1),
        modifiers=(MulLocalSize("Xwg", "Ywg"), DivGlobalSize("Xwpt", "Ywpt")),
        arguments=(
            ArgumentSpec("input", "f32", length=h * w, fill=problem.image_fill(seed), name="image"),
            ArgumentSpec("input", "f32", length=problem.Xf * problem.Yf, fill=f"uniform:{seed + 1}", name="filter"),
            ArgumentSpec("output", "f32", length=problem.X * problem.Y, name="output"),
        ),
        local_mem=(
            f"(LOCAL >= 1) * 4 * (Xwg * Xwpt + {2 * problem.Xhf} + PAD)"
            f" * (Ywg * Ywpt + {2 * problem.Yhf})"
        ),
    )


def conv_user_constraints(problem: ConvProblem, device: DeviceModel) -> list[str]:
    hx, hy = 2 * problem.Xhf, 2 * problem.Yhf
    return [
        # Stores along x are vectorised over the per-thread work.
        "VW <= Xwpt && Xwpt % VW == 0",
        # Padding only applies to the local-memory tile.
        "PAD == 0 || LOCAL >= 1",
        # LOCAL=2 launches halo helper threads around each workgroup.
        f"LOCAL != 2 || (Xwg + {hx}) * (Ywg + {hy}) <= {device.max_local_total}",
    ]


def conv_user_space(problem: ConvProblem, device: DeviceModel) -> SearchSpace:
    """Conv parameters with the reconstructed user constraints only."""
    space = _space(CONV_VALUES)
    for text in conv_user_constraints(problem, device):
        space.add_constraint(text)
    return space


def conv_space(device: DeviceModel, problem: ConvProblem | None = None) -> SearchSpace:
    problem = problem or ConvProblem(8192, 4096, 7, 7)
    space = conv_user_space(problem, device)
    return space.with_constraints(device_constraints(conv_kernel(problem), device, space))


def gemm_kernel(problem: GemmProblem, seed: int = 0) -> KernelSpec:
    M, N, K = problem.M, problem.N, problem.K
    return KernelSpec(
        name="gemm",
        source_ref="gemm.cl",
        global_size=(M, N),
        local_size=(1, 1),
        modifiers=(
            MulLocalSize("MdimC", "NdimC"),
            DivGlobalSize("Mwg", "Nwg"),
            MulGlobalSize("MdimC", "NdimC"),
        ),
        arguments=(
            ArgumentSpec("input", "f32", length=K * M, fill=f"uniform:{seed}", name="A"),
            ArgumentSpec("input", "f32", length=K * N, fill=f"uniform:{seed + 1}", name="B"),
            ArgumentSpec("output", "f32", length=M * N, fill=f"uniform:{seed + 2}", name="C"),
        ),
        local_mem="4 * Kwg * (LOCAL_A * Mwg + LOCAL_B * Nwg)",
    )


GEMM_USER_CONSTRAINTS = [
    # Register tiling: Mwi = Mwg / MdimC and Nwi = Nwg / NdimC.
    "MdimC <= Mwg && Mwg % MdimC == 0",
    "NdimC <= Nwg && Nwg % NdimC == 0",
    # Local-memory reshape: MdimC * NdimC = MdimA * KdimA = KdimB * NdimB.
    "(MdimC * NdimC) % MdimA == 0",
    "(MdimC * NdimC) % NdimB == 0",
    "(MdimC * NdimC) / MdimA <= Kwg && Kwg % ((MdimC * NdimC) / MdimA) == 0",
    "(MdimC * NdimC) / NdimB <= Kwg && Kwg % ((MdimC * NdimC) / NdimB) == 0",
    "Kwg % Kwi == 0",
    # Vector widths divide the per-thread tile.
    "Mvec <= Mwg / MdimC && (Mwg / MdimC) % Mvec == 0",
    "Nvec <= Nwg / NdimC && (Nwg / NdimC) % Nvec == 0",
    # Off-chip loads of a workgroup tile, vectorised.
    "Mwg % (MdimA * Mvec) == 0",
    "Nwg % (NdimB * Nvec) == 0",
    # Without local caching the reshape parameters are inert: pin them.
    "LOCAL_A == 1 || MdimA == MdimC",
    "LOCAL_B == 1 || NdimB == NdimC",
]


def gemm_user_space() -> SearchSpace:
    """GEMM parameters with the reconstructed user constraints only."""
    space = _space(GEMM_VALUES)
    for text in GEMM_USER_CONSTRAINTS:
        space.add_constraint(text)
    return space


def gemm_space(device: DeviceModel, problem: GemmProblem | None = None) -> SearchSpace:
    problem = problem or GemmProblem(2048, 2048, 2048)
    space = gemm_user_space()
    return space.with_constraints(device_constraints(gemm_kernel(problem), device, space))


def gemm_derived(config) -> dict[str, int]:
    """Mwi, Nwi, KdimA, KdimB; exact under the constraint set."""
    c = config
    return {
        "Mwi": c["Mwg"] // c["MdimC"],
        "Nwi": c["Nwg"] // c["NdimC"],
        "KdimA": c["MdimC"] * c["NdimC"] // c["MdimA"],
        "KdimB": c["MdimC"] * c["NdimC"] // c["NdimB"],
    }


# --- best-found tables ------------------------------------------------------------

# (device, filter size) -> Xwg, Ywg, Xwpt, Ywpt, LOCAL, VW, PAD, UNR
_CONV_BEST = {
    ("K40m", 3): (32, 8, 1, 8, 0, 1, 0, 1),
    ("K40m", 7): (32, 16, 2, 4, 2, 2, 1, 1),
    ("K40m", 11): (32, 8, 2, 8, 2, 2, 1, 1),
    ("GTX480", 3): (64, 8, 1, 4, 0, 1, 0, 1),
    ("GTX480", 7): (32, 8, 2, 8, 2, 2, 0, 1),
    ("GTX480", 11): (32, 8, 2, 4, 1, 2, 0, 1),
}

# device -> Mwg, Nwg, Kwg, MdimC, NdimC, LOCAL_A, LOCAL_B, MdimA, NdimB,
#           Mstride, Nstride, Mvec, Nvec, Kwi
_GEMM_BEST = {
    "K40m": (128, 128, 16, 16, 16, 1, 1, 32, 16, 1, 0, 2, 1, 8),
    "GTX480": (64, 64, 32, 8, 16, 1, 1, 32, 32, 1, 0, 2, 2, 8),
    "HD7970": (128, 128, 32, 16, 16, 1, 1, 32, 32, 0, 1, 4, 4, 2),
    "Iris": (64, 64, 16, 8, 8, 1, 1, 8, 16, 1, 1, 4, 4, 8),
}


def best_known(kind: str, device: str, filter_size: int | None = None) -> Configuration:
    """Best-found configuration from the published tables."""
    if kind == "conv":
        key = (device, filter_size)
        if key not in _CONV_BEST:
            raise UnknownDevice(f"no conv entry for {device} with filter {filter_size}")
        return Configuration(tuple(CONV_VALUES), _CONV_BEST[key])
    if kind == "gemm":
        if device not in _GEMM_BEST:
            raise UnknownDevice(f"no GEMM entry for {device}")
        return Configuration(tuple(GEMM_VALUES), _GEMM_BEST[device])
    raise ValueError(f"unknown case study {kind!r}")


def best_known_entries():
    """All (kind, device, filter_size) keys of the published tables."""
    return [("conv", d, f) for d, f in _CONV_BEST] + [("gemm", d, None) for d in _GEMM_BEST]
