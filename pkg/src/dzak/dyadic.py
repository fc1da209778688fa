"""Smooth dyadic bumps and frequency/modulation projections.

The base bump is the exponential splice

    eta(t) = psi(2 - |t|) / (psi(2 - |t|) + psi(|t| - 1)),   psi(x) = e^{-1/x} (x > 0),

which is C-infinity, even, equal to 1 on [-1, 1] and supported in (-2, 2).
Annulus cutoffs are differences ``eta_N = eta(|.|/N) - eta(2|.|/N)`` for
N > 1 and ``eta_1 = eta(|.|)``; they telescope to an exact partition of
unity.  The directional cutoff ``phi`` vanishes for ``|r| <= 1/(4 sqrt(d-1))``
and ``|r| >= 4``, equals 1 on ``[1/(2 sqrt(d-1)), 2]``, and is spliced
smoothly in between; the pigeonhole bound ``max_j |xi_j| >= |xi|/sqrt(d-1)``
then makes ``prod_j (1 - phi_N(xi_j))`` vanish identically on the dyadic
annulus, which is what the directional decomposition rests on.

Dyadic parameters run over powers of two including 1 unless a caller
restricts them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import FieldError, GridError
from .spectral import Field, GridSpec, TimeSlab, to_frequency, transform

__all__ = [
    "psi_exp", "smoothstep", "eta_base", "eta_annulus", "phi_directional",
    "phi_scaled", "BumpProfile", "eval_bump", "ProjectionSpec", "multiplier",
    "apply_projection", "verify_partition", "verify_decomposition_identity",
    "directional_decompose", "dyadic_range",
]


def psi_exp(x):
    """e^{-1/x} for x > 0, 0 otherwise (vectorized, overflow-safe)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    with np.errstate(divide="ignore", over="ignore"):
        out[pos] = np.exp(-1.0 / x[pos])
    return out


def smoothstep(u):
    """Monotone C-infinity ramp: 0 for u <= 0, 1 for u >= 1."""
    u = np.asarray(u, dtype=float)
    a = psi_exp(u)
    b = psi_exp(1.0 - u)
    return a / (a + b)


def eta_base(t):
    """Even bump: 1 on [-1, 1], supported in (-2, 2), values in [0, 1]."""
    t = np.abs(np.asarray(t, dtype=float))
    return smoothstep(2.0 - t)


def eta_annulus(N: int, r):
    """Dyadic annulus cutoff eta_N(|xi|); N = 1 is the low-frequency ball."""
    if N == 1:
        return eta_base(r)
    return eta_base(np.asarray(r, dtype=float) / N) - eta_base(2.0 * np.asarray(r, dtype=float) / N)


def phi_directional(r, d: int):
    """Directional cutoff at unit scale for transverse dimension d-1."""
    if d < 2:
        raise GridError("directional cutoff needs d >= 2")
    lo = 1.0 / (4.0 * math.sqrt(d - 1))
    hi = 1.0 / (2.0 * math.sqrt(d - 1))
    r = np.abs(np.asarray(r, dtype=float))
    rise = smoothstep((r - lo) / (hi - lo))
    fall = smoothstep((4.0 - r) / 2.0)
    return np.where(r <= 2.0, rise, fall)


def phi_scaled(N: int, r, d: int):
    """phi_N(r) = phi(r/N)."""
    return phi_directional(np.asarray(r, dtype=float) / N, d)


@dataclass(frozen=True)
class BumpProfile:
    """Evaluatable bump descriptor: EtaBase, EtaAnnulus(N) or PhiDirectional(N, d)."""

    kind: str
    N: int = 1
    d: int = 3

    def __post_init__(self):
        if self.kind not in ("eta-base", "eta-annulus", "phi-directional"):
            raise FieldError(f"unknown bump kind {self.kind!r}")
        if self.kind != "eta-base" and not _is_dyadic(self.N):
            raise FieldError(f"dyadic parameter must be a power of two >= 1, got {self.N}")

    def __call__(self, r):
        if self.kind == "eta-base":
            return eta_base(r)
        if self.kind == "eta-annulus":
            return eta_annulus(self.N, r)
        return phi_scaled(self.N, r, self.d)


def eval_bump(profile: BumpProfile, r):
    return profile(r)


def _is_dyadic(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (n & (n - 1)) == 0


def dyadic_range(start: int, stop: int) -> list[int]:
    """Powers of two in [start, stop]."""
    if not _is_dyadic(start) or not _is_dyadic(stop):
        raise FieldError("dyadic_range endpoints must be powers of two")
    out, n = [], start
    while n <= stop:
        out.append(n)
        n *= 2
    return out


# ---------------------------------------------------------------------------
# Projections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectionSpec:
    """Frequency/modulation multiplier descriptor.

    kinds: ``P_N`` (transverse annulus), ``P_Ne`` (directional, axis j),
    ``P_NM`` (annulus x distinguished-axis annulus), ``E_L`` (Schrodinger
    modulation) and ``W_L`` (wave modulation, needs ``sign``).
    """

    kind: str
    N: int = 1
    M: int = 1
    L: int = 1
    j: int = 0
    sign: int = +1

    def __post_init__(self):
        if self.kind not in ("P_N", "P_Ne", "P_NM", "E_L", "W_L"):
            raise FieldError(f"unknown projection kind {self.kind!r}")
        for name in ("N", "M", "L"):
            v = getattr(self, name)
            if not _is_dyadic(v):
                raise FieldError(f"{name}={v} is not a power of two >= 1")
        if self.sign not in (+1, -1):
            raise FieldError("sign must be +1 or -1")


def multiplier(spec: ProjectionSpec, obj: Union[Field, TimeSlab]) -> np.ndarray:
    """Real multiplier of ``spec`` on the frequency lattice of ``obj``."""
    grid = obj.grid
    trans = [a for a in grid.transverse_axes if a in obj.space_axes]
    offset = 1 if isinstance(obj, TimeSlab) else 0
    ndim = obj.data.ndim

    def bcast(vec: np.ndarray, dim: int) -> np.ndarray:
        shape = [1] * ndim
        shape[dim] = len(vec)
        return vec.reshape(shape)

    def transverse_radius() -> np.ndarray:
        if not trans:
            raise FieldError("projection needs transverse axes")
        acc = 0.0
        for a in trans:
            acc = acc + bcast(grid.freqs(a), offset + obj.space_axes.index(a)) ** 2
        return np.sqrt(acc)

    if spec.kind == "P_N":
        return eta_annulus(spec.N, transverse_radius())
    if spec.kind == "P_Ne":
        if spec.j not in grid.transverse_axes:
            raise FieldError(f"direction {spec.j} is not a transverse axis")
        if spec.j not in obj.space_axes:
            raise FieldError(f"direction {spec.j} not spanned by the data")
        dim = offset + obj.space_axes.index(spec.j)
        return bcast(phi_scaled(spec.N, grid.freqs(spec.j), grid.d), dim)
    if spec.kind == "P_NM":
        if grid.xd_axis not in obj.space_axes:
            raise FieldError("P_NM needs the distinguished axis")
        dim = offset + obj.space_axes.index(grid.xd_axis)
        md = bcast(eta_annulus(spec.M, np.abs(grid.freqs(grid.xd_axis))), dim)
        return eta_annulus(spec.N, transverse_radius()) * md
    # modulation projections need the full space-time frequency lattice
    if not isinstance(obj, TimeSlab):
        raise FieldError("modulation projections act on time slabs")
    tau = bcast(obj.tau(), 0)
    if spec.kind == "E_L":
        if grid.xd_axis not in obj.space_axes:
            raise FieldError("E_L needs the distinguished axis")
        dim = offset + obj.space_axes.index(grid.xd_axis)
        xid = bcast(grid.freqs(grid.xd_axis), dim)
        m = tau + transverse_radius() ** 2 + xid
        return eta_annulus(spec.L, np.abs(m))
    # W_L
    m = tau + spec.sign * transverse_radius()
    return eta_annulus(spec.L, np.abs(m))


def _required_axes(spec: ProjectionSpec, obj: Union[Field, TimeSlab]):
    grid = obj.grid
    trans = [a for a in grid.transverse_axes if a in obj.space_axes]
    if spec.kind == "P_N":
        return trans, False
    if spec.kind == "P_Ne":
        return [spec.j], False
    if spec.kind == "P_NM":
        return trans + [grid.xd_axis], False
    if spec.kind == "E_L":
        return trans + [grid.xd_axis], True
    return trans, True  # W_L


def apply_projection(spec: ProjectionSpec, obj: Union[Field, TimeSlab]):
    """Apply the multiplier in frequency space; result keeps the input representation."""
    need_sp, need_t = _required_axes(spec, obj)
    fwd_sp = [a for a in need_sp if a not in obj.freq_axes]
    fwd_t = need_t and not (isinstance(obj, TimeSlab) and obj.freq_time)
    axes = (["t"] if fwd_t else []) + fwd_sp
    work = transform(obj, axes, "forward") if axes else obj.copy()
    work.data = work.data * multiplier(spec, work)
    if axes:
        work = transform(work, axes, "inverse")
    return work


# ---------------------------------------------------------------------------
# Identities
# ---------------------------------------------------------------------------


def verify_partition(grid: GridSpec, axes=None) -> float:
    """Max deviation of the telescoping dyadic sum from 1 below half-Nyquist."""
    axes = tuple(axes) if axes is not None else grid.transverse_axes
    mesh = grid.mesh(axes, "freqs")
    rad = np.sqrt(sum(m ** 2 for m in mesh))
    half_nyq = min(grid.nyquist(a) for a in axes) / 2.0
    n_max = 1
    while n_max < half_nyq:
        n_max *= 2
    total = np.zeros_like(rad)
    n = 1
    while n <= n_max:
        total = total + eta_annulus(n, rad)
        n *= 2
    dev = np.abs(total - 1.0)
    return float(dev[rad <= half_nyq].max())


def verify_decomposition_identity(N: int, d: int, grid: GridSpec, axes=None) -> float:
    """Max of |prod_j (1 - phi_N(xi_j))| over annulus lattice points.

    The identity is specific to N >= 2; N = 1 is rejected.
    """
    if not _is_dyadic(N) or N < 2:
        raise FieldError(f"identity requires dyadic N >= 2, got {N}")
    axes = tuple(axes) if axes is not None else grid.transverse_axes
    if len(axes) != d - 1:
        raise GridError(f"need d-1={d-1} transverse axes, got {len(axes)}")
    mesh = grid.mesh(axes, "freqs")
    rad = np.sqrt(sum(m ** 2 for m in mesh))
    prod = np.ones_like(rad)
    for m in mesh:
        prod = prod * (1.0 - phi_scaled(N, m, d))
    on_annulus = eta_annulus(N, rad) > 0
    if not on_annulus.any():
        return 0.0
    return float(np.abs(prod[on_annulus]).max())


def directional_decompose(f: Field, N: int) -> list[Field]:
    """Summands P_{N,e_j} prod_{l<j} (1 - P_{N,e_l}) P_N f; they re-sum to P_N f."""
    if not _is_dyadic(N) or N < 2:
        raise FieldError(f"directional decomposition requires dyadic N >= 2, got {N}")
    grid = f.grid
    trans = [a for a in grid.transverse_axes if a in f.space_axes]
    if len(trans) != grid.d - 1:
        raise FieldError("field must span all transverse axes")
    fwd = [a for a in trans if a not in f.freq_axes]
    work = transform(f, fwd, "forward") if fwd else f.copy()
    base = work.data * multiplier(ProjectionSpec("P_N", N=N), work)
    carry = np.ones_like(base, dtype=float)
    out = []
    for j in trans:
        phi_j = multiplier(ProjectionSpec("P_Ne", N=N, j=j), work)
        piece = Field(grid, phi_j * carry * base, f.space_axes, work.freq_axes)
        if fwd:
            piece = transform(piece, fwd, "inverse")
        out.append(piece)
        carry = carry * (1.0 - phi_j)
    return out
