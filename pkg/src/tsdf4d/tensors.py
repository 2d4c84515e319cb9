"""Dense volumes and the compressed tensor containers.

The compressed containers store raw numpy cores/factors; evaluation is always
performed in float64 regardless of the storage dtype so that queries against a
float32 scene stay well conditioned.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BudgetError, RangeError, ValidationError

DEFAULT_MEM_BUDGET = 2 << 30  # 2 GiB
MEM_BUDGET_ENV = "T4DT_MEM_BUDGET"


def densify_budget(override: Optional[int] = None) -> int:
    """Byte budget for materializing dense tensors (env var overrides default)."""
    if override is not None:
        return int(override)
    env = os.environ.get(MEM_BUDGET_ENV)
    if env is not None:
        return int(env)
    return DEFAULT_MEM_BUDGET


def check_budget(shape: Sequence[int], itemsize: int, budget: Optional[int] = None) -> None:
    allowed = densify_budget(budget)
    required = int(np.prod([int(s) for s in shape], dtype=np.int64)) * itemsize
    if required > allowed:
        raise BudgetError(
            f"densifying shape {tuple(shape)} needs {required} bytes, budget is {allowed}"
        )


@dataclass(frozen=True)
class DenseVolume:
    """A dense D-dimensional scalar grid in row-major order."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        if arr.ndim < 1 or any(s < 1 for s in arr.shape):
            raise ValidationError(f"invalid volume shape {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def astype(self, dtype) -> "DenseVolume":
        return DenseVolume(self.data.astype(dtype))


@dataclass(frozen=True)
class TTTensor:
    """Tensor train: a chain of order-3 cores, boundary ranks fixed at 1.

    Core d has shape (r_{d-1}, I_d, r_d); the element at a multi-index is the
    product of the selected slices, left to right.
    """

    cores: tuple

    def __post_init__(self):
        cores = tuple(np.asarray(c) for c in self.cores)
        if not cores:
            raise ValidationError("a tensor train needs at least one core")
        for d, c in enumerate(cores):
            if c.ndim != 3:
                raise ValidationError(f"core {d} has order {c.ndim}, expected 3")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValidationError("boundary ranks must be 1")
        for d in range(len(cores) - 1):
            if cores[d].shape[2] != cores[d + 1].shape[0]:
                raise ValidationError(
                    f"rank mismatch between cores {d} and {d + 1}: "
                    f"{cores[d].shape[2]} != {cores[d + 1].shape[0]}"
                )
        object.__setattr__(self, "cores", cores)

    @property
    def ndim(self) -> int:
        return len(self.cores)

    @property
    def shape(self) -> tuple:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def ranks(self) -> tuple:
        return (1,) + tuple(c.shape[2] for c in self.cores)

    @property
    def parameter_count(self) -> int:
        return sum(c.size for c in self.cores)

    def arrays(self) -> list:
        return list(self.cores)

    def astype(self, dtype) -> "TTTensor":
        return TTTensor(tuple(c.astype(dtype) for c in self.cores))


@dataclass(frozen=True)
class TuckerTensor:
    """Core tensor contracted with one factor matrix per mode.

    Factor d has shape (I_d, r_d); column counts must match the core.
    """

    core: np.ndarray
    factors: tuple

    def __post_init__(self):
        core = np.asarray(self.core)
        factors = tuple(np.asarray(f) for f in self.factors)
        if core.ndim != len(factors):
            raise ValidationError(
                f"core order {core.ndim} does not match {len(factors)} factors"
            )
        for d, f in enumerate(factors):
            if f.ndim != 2:
                raise ValidationError(f"factor {d} is not a matrix")
            if f.shape[1] != core.shape[d]:
                raise ValidationError(
                    f"factor {d} has {f.shape[1]} columns, core mode is {core.shape[d]}"
                )
        object.__setattr__(self, "core", core)
        object.__setattr__(self, "factors", factors)

    @property
    def ndim(self) -> int:
        return self.core.ndim

    @property
    def shape(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ranks(self) -> tuple:
        return self.core.shape

    @property
    def parameter_count(self) -> int:
        return self.core.size + sum(f.size for f in self.factors)

    def arrays(self) -> list:
        return [self.core] + list(self.factors)

    def astype(self, dtype) -> "TuckerTensor":
        return TuckerTensor(self.core.astype(dtype), tuple(f.astype(dtype) for f in self.factors))


@dataclass(frozen=True)
class TTTuckerTensor:
    """Tensor train whose selected modes carry an extra factor matrix.

    ``factors[d]`` is either None (the raw TT core is used, e.g. for the time
    mode) or a matrix (I_d, rho_d) applied to mode d of the train.
    """

    tt: TTTensor
    factors: tuple

    def __post_init__(self):
        factors = tuple(None if f is None else np.asarray(f) for f in self.factors)
        if len(factors) != self.tt.ndim:
            raise ValidationError("one factor slot per TT mode required")
        for d, f in enumerate(factors):
            if f is None:
                continue
            if f.ndim != 2 or f.shape[1] != self.tt.shape[d]:
                raise ValidationError(
                    f"factor {d} has shape {f.shape}, TT mode size is {self.tt.shape[d]}"
                )
        object.__setattr__(self, "factors", factors)

    @property
    def ndim(self) -> int:
        return self.tt.ndim

    @property
    def shape(self) -> tuple:
        return tuple(
            f.shape[0] if f is not None else n for f, n in zip(self.factors, self.tt.shape)
        )

    @property
    def parameter_count(self) -> int:
        return self.tt.parameter_count + sum(f.size for f in self.factors if f is not None)

    def arrays(self) -> list:
        return self.tt.arrays() + [f for f in self.factors if f is not None]

    def astype(self, dtype) -> "TTTuckerTensor":
        return TTTuckerTensor(
            self.tt.astype(dtype),
            tuple(None if f is None else f.astype(dtype) for f in self.factors),
        )


@dataclass
class StorageReport:
    parameter_count: int
    uncompressed_count: int
    compression_ratio: float
    bytes_on_disk: Optional[int] = None


def storage_report(tensor, original_shape: Sequence[int]) -> StorageReport:
    """Count stored scalars against the dense element count of `original_shape`."""
    count = int(tensor.parameter_count)
    if count < 1:
        raise ValidationError("empty tensor has no storage")
    uncompressed = int(np.prod([int(s) for s in original_shape], dtype=np.int64))
    return StorageReport(
        parameter_count=count,
        uncompressed_count=uncompressed,
        compression_ratio=uncompressed / count,
    )


def next_pow2(n: int) -> int:
    return 1 << max(0, (int(n) - 1).bit_length())


def pad_to_pow2(v: DenseVolume, fill: float) -> DenseVolume:
    """Grow every mode to the next power of two, new cells set to `fill`.

    The original data stays in the low-index corner; `crop` with the original
    shape is the exact inverse.
    """
    target = tuple(next_pow2(s) for s in v.shape)
    if target == v.shape:
        return v
    out = np.full(target, fill, dtype=v.dtype)
    out[tuple(slice(0, s) for s in v.shape)] = v.data
    return DenseVolume(out)


def crop(v: DenseVolume, shape: Sequence[int]) -> DenseVolume:
    shape = tuple(int(s) for s in shape)
    if len(shape) != v.ndim or any(s > t for s, t in zip(shape, v.shape)):
        raise ValidationError(f"cannot crop {v.shape} to {shape}")
    return DenseVolume(v.data[tuple(slice(0, s) for s in shape)])


def _check_index(shape: Sequence[int], index: Sequence[int]) -> tuple:
    if len(index) != len(shape):
        raise RangeError(f"index has {len(index)} entries for a {len(shape)}-mode tensor")
    idx = []
    for d, (i, n) in enumerate(zip(index, shape)):
        i = int(i)
        if not 0 <= i < n:
            raise RangeError(f"index {i} out of range for mode {d} of size {n}")
        idx.append(i)
    return tuple(idx)


def tt_element(t: TTTensor, index: Sequence[int]) -> float:
    """Evaluate a single element as the chain product of core slices."""
    idx = _check_index(t.shape, index)
    v = t.cores[0][0, idx[0], :].astype(np.float64)
    for d in range(1, t.ndim):
        v = v @ t.cores[d][:, idx[d], :].astype(np.float64)
    return float(v[0])


def tt_elements(t: TTTensor, indices: np.ndarray) -> np.ndarray:
    """Vectorized element evaluation for an (n, D) index array."""
    indices = np.asarray(indices, dtype=np.int64)
    for d in range(t.ndim):
        col = indices[:, d]
        if col.min() < 0 or col.max() >= t.shape[d]:
            bad = col[(col < 0) | (col >= t.shape[d])][0]
            raise RangeError(f"index {bad} out of range for mode {d} of size {t.shape[d]}")
    v = t.cores[0][0, indices[:, 0], :].astype(np.float64)  # (n, r1)
    for d in range(1, t.ndim):
        slices = t.cores[d][:, indices[:, d], :].astype(np.float64)  # (r_prev, n, r_next)
        v = np.einsum("nr,rns->ns", v, slices, optimize=True)
    return v[:, 0]


def tt_to_dense(t: TTTensor, budget: Optional[int] = None) -> DenseVolume:
    """Contract the full train into a dense volume, refusing above the byte budget."""
    check_budget(t.shape, 8, budget)
    out = t.cores[0].reshape(t.shape[0], -1).astype(np.float64)
    for c in t.cores[1:]:
        out = out.reshape(-1, c.shape[0]) @ c.reshape(c.shape[0], -1).astype(np.float64)
    return DenseVolume(out.reshape(t.shape))


def tucker_element(t: TuckerTensor, index: Sequence[int]) -> float:
    idx = _check_index(t.shape, index)
    v = t.core.astype(np.float64)
    for d in range(t.ndim):
        v = np.tensordot(t.factors[d][idx[d], :].astype(np.float64), v, axes=(0, 0))
    return float(v)


def tucker_to_dense(t: TuckerTensor, budget: Optional[int] = None) -> DenseVolume:
    check_budget(t.shape, 8, budget)
    v = t.core.astype(np.float64)
    for d in range(t.ndim):
        v = np.moveaxis(
            np.tensordot(t.factors[d].astype(np.float64), v, axes=(1, d)), 0, d
        )
    return DenseVolume(v)


def tttucker_element(t: TTTuckerTensor, index: Sequence[int]) -> float:
    idx = _check_index(t.shape, index)
    v = None
    for d in range(t.ndim):
        core = t.tt.cores[d].astype(np.float64)
        f = t.factors[d]
        if f is None:
            m = core[:, idx[d], :]
        else:
            m = np.tensordot(f[idx[d], :].astype(np.float64), core, axes=(0, 1))
        v = m[0] if v is None else v @ m
    return float(v[0])


def tttucker_to_tt(t: TTTuckerTensor) -> TTTensor:
    """Absorb every factor into its core, yielding a plain train."""
    cores = []
    for d in range(t.ndim):
        core = t.tt.cores[d].astype(np.float64)
        f = t.factors[d]
        if f is None:
            cores.append(core)
        else:
            cores.append(np.einsum("ik,rks->ris", f.astype(np.float64), core, optimize=True))
    return TTTensor(tuple(cores))


def tttucker_to_dense(t: TTTuckerTensor, budget: Optional[int] = None) -> DenseVolume:
    check_budget(t.shape, 8, budget)
    return tt_to_dense(tttucker_to_tt(t), budget)


def rank1_tt(vectors: Sequence[np.ndarray]) -> TTTensor:
    """Train of all-rank-1 cores realizing an outer product (test helper)."""
    return TTTensor(tuple(np.asarray(v, dtype=np.float64).reshape(1, -1, 1) for v in vectors))
