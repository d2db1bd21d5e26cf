"""Kernel, argument and device descriptions consumed by the tuner and backends."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import KtuneError, UnknownDevice

ROLES = ("input", "output", "scalar")
DTYPES = {"f32": np.float32, "i32": np.int32}


@dataclass(frozen=True)
class ThreadSizeModifier:
    """Multiply or divide the global or local size by parameter values.

    ``by`` holds one entry per dimension: a parameter name or the literal 1.
    """

    target: str  # "global" | "local"
    op: str  # "multiply" | "divide"
    by: tuple[str | int, ...]

    def __post_init__(self):
        if self.target not in ("global", "local"):
            raise KtuneError(f"modifier target must be global or local, not {self.target!r}")
        if self.op not in ("multiply", "divide"):
            raise KtuneError(f"modifier op must be multiply or divide, not {self.op!r}")
        for entry in self.by:
            if isinstance(entry, int) and entry != 1:
                raise KtuneError("literal modifier entries must be 1")

    @property
    def names(self) -> set[str]:
        return {b for b in self.by if isinstance(b, str)}


def MulGlobalSize(*by) -> ThreadSizeModifier:
    return ThreadSizeModifier("global", "multiply", tuple(by))


def DivGlobalSize(*by) -> ThreadSizeModifier:
    return ThreadSizeModifier("global", "divide", tuple(by))


def MulLocalSize(*by) -> ThreadSizeModifier:
    return ThreadSizeModifier("local", "multiply", tuple(by))


def DivLocalSize(*by) -> ThreadSizeModifier:
    return ThreadSizeModifier("local", "divide", tuple(by))


@dataclass(frozen=True)
class ArgumentSpec:
    """A kernel argument with a deterministic fill.

    Fills: ``constant:<c>``, ``ramp`` (0, 1, 2, ...), ``uniform:<seed>``
    (seeded uniform [0, 1) for f32, integers in [0, 1000) for i32). Any
    buffer fill may carry a ``|border:<W>x<H>:<hx>x<hy>`` suffix which zeroes
    a border of width hx/hy around a row-major W by H buffer.
    """

    role: str
    dtype: str = "f32"
    length: int | None = None
    value: float | int | None = None
    fill: str = "constant:0"
    name: str = ""

    def __post_init__(self):
        if self.role not in ROLES:
            raise KtuneError(f"argument role must be one of {ROLES}, not {self.role!r}")
        if self.dtype not in DTYPES:
            raise KtuneError(f"argument type must be one of {tuple(DTYPES)}, not {self.dtype!r}")
        if self.role == "scalar":
            if self.value is None:
                raise KtuneError("scalar arguments need a value")
        elif self.length is None or self.length < 1:
            raise KtuneError(f"{self.role} buffers need a positive length")

    @property
    def is_buffer(self) -> bool:
        return self.role != "scalar"

    def materialize(self):
        if self.role == "scalar":
            return DTYPES[self.dtype](self.value)
        return fill_buffer(self.fill, self.length, self.dtype)


def fill_buffer(fill: str, length: int, dtype: str = "f32") -> np.ndarray:
    kind, _, border = fill.partition("|")
    head, _, arg = kind.partition(":")
    np_type = DTYPES[dtype]
    if head == "constant":
        buf = np.full(length, float(arg or 0), dtype=np.float64)
    elif head == "ramp":
        buf = np.arange(length, dtype=np.float64)
    elif head == "uniform":
        rng = np.random.default_rng(int(arg or 0))
        if dtype == "i32":
            buf = rng.integers(0, 1000, size=length).astype(np.float64)
        else:
            buf = rng.random(length)
    else:
        raise KtuneError(f"unknown fill {fill!r}")
    if border:
        tag, _, spec = border.partition(":")
        if tag != "border":
            raise KtuneError(f"unknown fill modifier {border!r}")
        dims, _, halo = spec.partition(":")
        w, h = (int(v) for v in dims.split("x"))
        hx, hy = (int(v) for v in halo.split("x"))
        if w * h != length:
            raise KtuneError(f"border {w}x{h} does not match buffer length {length}")
        img = buf.reshape(h, w)
        mask = np.zeros_like(img, dtype=bool)
        mask[hy : h - hy, hx : w - hx] = True
        img[~mask] = 0
    return buf.astype(np_type)


@dataclass(frozen=True)
class KernelSpec:
    name: str
    source_ref: str
    global_size: tuple[int, ...]
    local_size: tuple[int, ...]
    modifiers: tuple[ThreadSizeModifier, ...] = ()
    arguments: tuple[ArgumentSpec, ...] = ()
    local_mem: str | None = None  # integer expression giving local-memory bytes

    def __post_init__(self):
        if not 1 <= len(self.global_size) <= 3:
            raise KtuneError("kernels have 1 to 3 dimensions")
        if len(self.global_size) != len(self.local_size):
            raise KtuneError("global and local sizes must have the same rank")
        if min(self.global_size) < 1 or min(self.local_size) < 1:
            raise KtuneError("base thread sizes must be positive")
        for m in self.modifiers:
            if len(m.by) != self.rank:
                raise KtuneError(f"modifier {m} does not match kernel rank {self.rank}")

    @property
    def rank(self) -> int:
        return len(self.global_size)

    @property
    def modifier_names(self) -> set[str]:
        out: set[str] = set()
        for m in self.modifiers:
            out |= m.names
        return out


@dataclass(frozen=True)
class DeviceModel:
    name: str
    max_local_total: int = 1024
    max_local_per_dim: tuple[int, int, int] = (1024, 1024, 64)
    local_mem_bytes: int = 48 * 1024
    peak_gflops: float | None = None
    peak_gbs: float | None = None

    def __post_init__(self):
        if len(self.max_local_per_dim) != 3 or min(self.max_local_per_dim) < 1:
            raise KtuneError("max_local_per_dim needs three positive limits")
        if self.max_local_total < 1 or self.local_mem_bytes < 0:
            raise KtuneError("device limits must be positive")


# Peak numbers are from the device table; the limits are preset defaults.
DEVICE_PRESETS: dict[str, DeviceModel] = {
    "K40m": DeviceModel("K40m", 1024, (1024, 1024, 64), 48 * 1024, 4291, 288),
    "GTX480": DeviceModel("GTX480", 1024, (1024, 1024, 64), 48 * 1024, 1345, 177),
    "HD7970": DeviceModel("HD7970", 256, (256, 256, 256), 32 * 1024, 4368, 288),
    "Iris": DeviceModel("Iris", 512, (512, 512, 512), 64 * 1024, 832, 26),
}


def device_preset(name: str) -> DeviceModel:
    try:
        return DEVICE_PRESETS[name]
    except KeyError:
        raise UnknownDevice(f"unknown device {name!r}; presets: {sorted(DEVICE_PRESETS)}") from None
