"""SVD-based construction and truncation of the compressed formats.

All decompositions run in float64 and share one deterministic sign fix: each
singular vector is scaled so that its largest-magnitude entry (lowest index on
ties) is positive. Singular values below NOISE_REL * sigma_max are always
discarded, so exact duplicates and zero slices never survive as ranks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import RangeError, ValidationError
from .tensors import DenseVolume, TTTensor, TTTuckerTensor, TuckerTensor

NOISE_REL = 1e-14


@dataclass(frozen=True)
class TruncationSpec:
    """Truncation target: a hard rank cap, a relative error budget, or both.

    With both set, the rank is the smallest one meeting `eps`, then clamped to
    `max_rank` (the cap dominates).
    """

    max_rank: Optional[int] = None
    eps: Optional[float] = None

    def __post_init__(self):
        if self.max_rank is None and self.eps is None:
            raise ValidationError("truncation needs max_rank, eps, or both")
        if self.max_rank is not None and self.max_rank < 1:
            raise ValidationError(f"max_rank must be positive, got {self.max_rank}")
        if self.eps is not None and self.eps < 0:
            raise ValidationError(f"eps must be nonnegative, got {self.eps}")


def _svd(m: np.ndarray):
    # gesdd occasionally fails to converge on rank-deficient inputs
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def _fix_signs(u: np.ndarray, vt: np.ndarray):
    """Make each left singular vector's largest-magnitude entry positive."""
    pivot = np.argmax(np.abs(u), axis=0)
    flip = u[pivot, np.arange(u.shape[1])] < 0
    u[:, flip] *= -1.0
    vt[flip, :] *= -1.0
    return u, vt


def _select_rank(s: np.ndarray, delta: Optional[float], max_rank: Optional[int]) -> int:
    """Smallest rank whose discarded tail is <= delta, after the noise filter."""
    if s.size == 0:
        return 1
    smax = s[0]
    rank = int(np.count_nonzero(s > NOISE_REL * smax)) if smax > 0 else 1
    if delta is not None and delta > 0:
        tails = np.sqrt(np.cumsum((s**2)[::-1]))[::-1]  # tails[k] = ||s[k:]||
        ok = np.nonzero(tails <= delta)[0]
        budget_rank = int(ok[0]) if ok.size else len(s)
        rank = min(rank, budget_rank)
    rank = max(1, rank)
    if max_rank is not None:
        rank = min(rank, max_rank)
    return rank


def tt_svd(v: DenseVolume, spec: TruncationSpec, mode_caps: Optional[Sequence[int]] = None) -> TTTensor:
    """Train construction by successive SVDs of the unfolding matrices.

    Cores 1..D-1 come out left-orthonormal. An eps budget is split uniformly
    over the D-1 truncation steps, so the total relative error stays below eps.
    `mode_caps` optionally caps each internal rank individually (applied on
    top of spec.max_rank).
    """
    data = np.asarray(v.data, dtype=np.float64)
    if not np.isfinite(data).all():
        raise ValidationError("input contains NaN or Inf")
    shape = data.shape
    d = len(shape)
    if d == 1:
        return TTTensor((data.reshape(1, -1, 1),))
    norm = float(np.linalg.norm(data))
    delta = None if spec.eps is None else spec.eps * norm / math.sqrt(d - 1)
    cores = []
    c = data.reshape(1, -1)
    r = 1
    for k in range(d - 1):
        m = c.reshape(r * shape[k], -1)
        u, s, vt = _svd(m)
        cap = spec.max_rank
        if mode_caps is not None and mode_caps[k] is not None:
            cap = mode_caps[k] if cap is None else min(cap, mode_caps[k])
        rk = _select_rank(s, delta, cap)
        u, vt = _fix_signs(u[:, :rk], vt[:rk])
        cores.append(u.reshape(r, shape[k], rk))
        c = s[:rk, None] * vt
        r = rk
    cores.append(c.reshape(r, shape[-1], 1))
    return TTTensor(tuple(cores))


def tucker_hosvd(
    v: DenseVolume, spec: TruncationSpec, mode_caps: Optional[Sequence[int]] = None
) -> TuckerTensor:
    """Sequentially truncated higher-order SVD.

    Each mode's factor holds the leading left singular vectors of that mode's
    unfolding, taken from the partially projected core; an eps budget is split
    as eps/sqrt(D) per mode.
    """
    data = np.asarray(v.data, dtype=np.float64)
    if not np.isfinite(data).all():
        raise ValidationError("input contains NaN or Inf")
    d = data.ndim
    norm = float(np.linalg.norm(data))
    delta = None if spec.eps is None else spec.eps * norm / math.sqrt(d)
    core = data
    factors = []
    for mode in range(d):
        unfolded = np.moveaxis(core, mode, 0).reshape(core.shape[mode], -1)
        u, s, vt = _svd(unfolded)
        cap = spec.max_rank
        if mode_caps is not None and mode_caps[mode] is not None:
            cap = mode_caps[mode] if cap is None else min(cap, mode_caps[mode])
        rk = _select_rank(s, delta, cap)
        u, _ = _fix_signs(u[:, :rk], vt[:rk])
        factors.append(u)
        projected = u.T @ unfolded  # (rk, rest)
        new_shape = (rk,) + tuple(np.delete(core.shape, mode))
        core = np.moveaxis(projected.reshape(new_shape), 0, mode)
    return TuckerTensor(core, tuple(factors))


def tt_norm(t: TTTensor) -> float:
    """Frobenius norm evaluated in compressed form via a right-to-left sweep."""
    carry = None
    for d in range(t.ndim - 1, -1, -1):
        c = t.cores[d].astype(np.float64)
        if carry is not None:
            c = np.tensordot(c, carry, axes=(2, 0))
        m = c.reshape(c.shape[0], -1)
        q, r = np.linalg.qr(m.T)
        carry = r.T
    return float(np.linalg.norm(carry))


def tt_round(
    t: TTTensor,
    spec: TruncationSpec,
    edge_caps: Optional[Sequence[Optional[int]]] = None,
) -> TTTensor:
    """Rank reduction: right-to-left orthogonalization, then a left-to-right
    SVD truncation sweep.

    Never increases any rank. An eps budget is split uniformly over the D-1
    truncation steps; the train norm needed for it falls out of the
    orthogonalization sweep. `edge_caps` holds one optional cap per internal
    edge (between cores d and d+1).
    """
    cores = [c.astype(np.float64) for c in t.cores]
    d = len(cores)
    if d == 1:
        return TTTensor(tuple(cores))
    for k in range(d - 1, 0, -1):
        r0, n, r1 = cores[k].shape
        m = cores[k].reshape(r0, n * r1)
        q, rmat = np.linalg.qr(m.T)  # m == (q @ rmat).T
        rk = q.shape[1]
        cores[k] = q.T.reshape(rk, n, r1)
        cores[k - 1] = np.tensordot(cores[k - 1], rmat.T, axes=(2, 0))
    norm = float(np.linalg.norm(cores[0]))
    delta = None if spec.eps is None else spec.eps * norm / math.sqrt(d - 1)
    for k in range(d - 1):
        r0, n, r1 = cores[k].shape
        u, s, vt = _svd(cores[k].reshape(r0 * n, r1))
        cap = spec.max_rank
        if edge_caps is not None and edge_caps[k] is not None:
            cap = edge_caps[k] if cap is None else min(cap, edge_caps[k])
        rk = _select_rank(s, delta, cap)
        u, vt = _fix_signs(u[:, :rk], vt[:rk])
        cores[k] = u.reshape(r0, n, rk)
        cores[k + 1] = np.tensordot(s[:rk, None] * vt, cores[k + 1], axes=(1, 0))
    return TTTensor(tuple(cores))


def to_tt_tucker(
    t: TTTensor, spatial_modes: Sequence[int], spec: TruncationSpec
) -> TTTuckerTensor:
    """Attach an orthonormal factor to each listed mode of the train.

    Factors come from the SVD of the core unfolded along its mode dimension,
    taken with the rest of the train orthogonalized, so the computed singular
    values are those of the full tensor's mode unfolding. Modes not listed
    (the time mode) keep their raw core.
    """
    d = t.ndim
    spatial = sorted(set(int(m) for m in spatial_modes))
    for m in spatial:
        if not 0 <= m < d:
            raise RangeError(f"mode {m} out of range for a {d}-mode train")
    cores = [c.astype(np.float64) for c in t.cores]
    # right-orthogonalize so the sweep can move the center left to right
    for k in range(d - 1, 0, -1):
        r0, n, r1 = cores[k].shape
        q, rmat = np.linalg.qr(cores[k].reshape(r0, n * r1).T)
        cores[k] = q.T.reshape(q.shape[1], n, r1)
        cores[k - 1] = np.tensordot(cores[k - 1], rmat.T, axes=(2, 0))
    norm = float(np.linalg.norm(cores[0]))
    delta = None if spec.eps is None else spec.eps * norm / math.sqrt(max(1, len(spatial)))
    factors: list = [None] * d
    for k in range(d):
        r0, n, r1 = cores[k].shape
        if k in spatial:
            m = np.transpose(cores[k], (1, 0, 2)).reshape(n, r0 * r1)
            u, s, vt = _svd(m)
            rk = _select_rank(s, delta, spec.max_rank)
            u, vt = _fix_signs(u[:, :rk], vt[:rk])
            factors[k] = u
            reduced = (s[:rk, None] * vt).reshape(rk, r0, r1)
            cores[k] = np.transpose(reduced, (1, 0, 2))
        if k < d - 1:
            r0, n, r1 = cores[k].shape
            q, rmat = np.linalg.qr(cores[k].reshape(r0 * n, r1))
            cores[k] = q.reshape(r0, n, q.shape[1])
            cores[k + 1] = np.tensordot(rmat, cores[k + 1], axes=(1, 0))
    return TTTuckerTensor(TTTensor(tuple(cores)), tuple(factors))


def tt_concat(a: TTTensor, b: TTTensor, mode: int) -> TTTensor:
    """Stack two trains along `mode`; internal ranks add, boundaries stay 1.

    Element contract: index i on the stacked mode selects a's element for
    i < I_mode(a) and b's element at i - I_mode(a) otherwise.
    """
    d = a.ndim
    if b.ndim != d:
        raise ValidationError(f"operands have {d} and {b.ndim} modes")
    if not 0 <= mode < d:
        raise RangeError(f"mode {mode} out of range for a {d}-mode train")
    for k in range(d):
        if k != mode and a.shape[k] != b.shape[k]:
            raise ValidationError(
                f"mode {k} disagrees: {a.shape[k]} != {b.shape[k]}"
            )
    out = []
    for k in range(d):
        ca, cb = a.cores[k].astype(np.float64), b.cores[k].astype(np.float64)
        ra0, na, ra1 = ca.shape
        rb0, nb, rb1 = cb.shape
        left = 1 if k == 0 else ra0 + rb0
        right = 1 if k == d - 1 else ra1 + rb1
        n = na + nb if k == mode else na
        core = np.zeros((left, n, right))
        sa0 = slice(0, 1) if k == 0 else slice(0, ra0)
        sb0 = slice(0, 1) if k == 0 else slice(ra0, None)
        sa1 = slice(0, 1) if k == d - 1 else slice(0, ra1)
        sb1 = slice(0, 1) if k == d - 1 else slice(ra1, None)
        if k == mode:
            core[sa0, :na, sa1] = ca
            core[sb0, na:, sb1] = cb
        else:
            core[sa0, :, sa1] = ca
            core[sb0, :, sb1] = cb
        out.append(core)
    return TTTensor(tuple(out))


def insert_time_mode(t: TTTensor, position: int) -> TTTensor:
    """Splice a size-1 mode at `position` without changing any element.

    The new core is the r x r identity reshaped to (r, 1, r), where r is the
    rank crossing the insertion boundary.
    """
    if not 0 <= position <= t.ndim:
        raise RangeError(f"position {position} out of range for a {t.ndim}-mode train")
    r = t.ranks[position]
    eye = np.eye(r).reshape(r, 1, r)
    cores = list(t.cores)
    return TTTensor(tuple(cores[:position] + [eye] + cores[position:]))


def tt_slice(t: TTTensor, mode: int, index: int) -> TTTensor:
    """Fix one mode to `index`, absorbing the selected slice into a neighbor."""
    if not 0 <= mode < t.ndim:
        raise RangeError(f"mode {mode} out of range for a {t.ndim}-mode train")
    if not 0 <= index < t.shape[mode]:
        raise RangeError(f"index {index} out of range for mode {mode} of size {t.shape[mode]}")
    if t.ndim == 1:
        raise ValidationError("cannot slice the only mode of a train")
    cores = [c.astype(np.float64) for c in t.cores]
    m = cores[mode][:, index, :]
    if mode < t.ndim - 1:
        cores[mode + 1] = np.tensordot(m, cores[mode + 1], axes=(1, 0))
    else:
        cores[mode - 1] = np.tensordot(cores[mode - 1], m, axes=(2, 0))
    del cores[mode]
    return TTTensor(tuple(cores))
