"""Grids, complex fields, Fourier transforms and mixed-norm quadrature.

Everything lives on a large periodic box that stands in for free space;
this is a numerical device only (the genuinely periodic problem behaves
differently), so all production data is chosen to decay well inside the
box.  Conventions:

* grid points are centered, ``x_j = -L/2 + j*L/n``;
* the frequency lattice of an axis is ``{2*pi*m/L : m in [-n/2, n/2)}``;
* ``transform`` returns samples of the continuum Fourier transform in the
  symmetric normalization ``(2*pi)^(-1/2) * integral(f(x) e^{-i xi x} dx)``
  per axis, evaluated by the periodic trapezoid rule.  With the matching
  quadrature weights (``dx`` in physical space, ``dxi = 2*pi/L`` in
  frequency space) the discrete Plancherel identity is exact up to
  round-off, so no bookkeeping constants appear in any norm.

Axes are addressed by integer spatial index ``0..d-1`` (the last one is
the distinguished non-dispersive direction) or by the label ``"t"`` for
the time axis of a slab.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, Union

import numpy as np
import scipy.fft as _fft

from .errors import FieldError, GridError

Axis = Union[int, str]

TWO_PI = 2.0 * math.pi


def fft_workers() -> int:
    """Worker count for scipy.fft, capped by the DZAK_THREADS env var."""
    cap = os.environ.get("DZAK_THREADS")
    if cap is None:
        return 1
    try:
        return max(1, int(cap))
    except ValueError:
        return 1


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Discretization of the space-time box.

    ``n`` and ``box`` have one entry per spatial axis; axes ``0..d-2`` are
    transverse and axis ``d-1`` is the distinguished direction.
    """

    d: int
    n: tuple[int, ...]
    box: tuple[float, ...]
    dt: float
    t_horizon: float

    def __post_init__(self):
        if self.d < 2:
            raise GridError(f"spatial dimension must be >= 2, got {self.d}")
        if len(self.n) != self.d or len(self.box) != self.d:
            raise GridError(
                f"need {self.d} axis sizes and lengths, got {len(self.n)}/{len(self.box)}"
            )
        for k, nk in enumerate(self.n):
            if not _is_power_of_two(nk) or nk < 8:
                raise GridError(f"axis {k}: size {nk} is not a power of two >= 8")
        for k, lk in enumerate(self.box):
            if not (lk > 0):
                raise GridError(f"axis {k}: box length {lk} must be positive")
        if not (self.dt > 0):
            raise GridError(f"dt must be positive, got {self.dt}")
        if not (self.t_horizon > 0):
            raise GridError(f"t_horizon must be positive, got {self.t_horizon}")

    # -- lattices ---------------------------------------------------------

    @property
    def transverse_axes(self) -> tuple[int, ...]:
        return tuple(range(self.d - 1))

    @property
    def xd_axis(self) -> int:
        return self.d - 1

    def dx(self, axis: int) -> float:
        return self.box[axis] / self.n[axis]

    def dxi(self, axis: int) -> float:
        return TWO_PI / self.box[axis]

    def coords(self, axis: int) -> np.ndarray:
        n, L = self.n[axis], self.box[axis]
        return -L / 2.0 + (L / n) * np.arange(n)

    def freqs(self, axis: int) -> np.ndarray:
        """Frequency lattice in FFT order."""
        return TWO_PI * _fft.fftfreq(self.n[axis], d=self.dx(axis))

    def nyquist(self, axis: int) -> float:
        return math.pi / self.dx(axis)

    def max_dyadic(self, axes: Sequence[int] | None = None) -> int:
        """Largest dyadic N with the annulus ``|xi| < 2N`` representable."""
        axes = tuple(axes) if axes is not None else self.transverse_axes
        nyq = min(self.nyquist(a) for a in axes)
        n = 1
        while 4 * n <= nyq:
            n *= 2
        return n

    def mesh(self, axes: Sequence[int], kind: str = "coords") -> list[np.ndarray]:
        """Open (broadcastable) mesh of coordinates or frequencies."""
        fn = self.coords if kind == "coords" else self.freqs
        arrs = [fn(a) for a in axes]
        return list(np.ix_(*arrs)) if arrs else []


def make_grid(d: int, n: Sequence[int], box: Sequence[float], dt: float, t_horizon: float) -> GridSpec:
    """Validated grid constructor."""
    return GridSpec(d=d, n=tuple(int(v) for v in n), box=tuple(float(v) for v in box),
                    dt=float(dt), t_horizon=float(t_horizon))


# ---------------------------------------------------------------------------
# Fields and slabs
# ---------------------------------------------------------------------------


@dataclass
class Field:
    """Complex samples over a subset of the spatial axes of a grid.

    ``space_axes`` names the grid axes the tensor dimensions correspond to
    (in order); ``freq_axes`` is the subset currently in frequency
    representation.
    """

    grid: GridSpec
    data: np.ndarray
    space_axes: tuple[int, ...]
    freq_axes: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        expect = tuple(self.grid.n[a] for a in self.space_axes)
        if self.data.shape != expect:
            raise FieldError(f"data shape {self.data.shape} != grid shape {expect}")
        if not set(self.freq_axes) <= set(self.space_axes):
            raise FieldError("freq_axes must be a subset of space_axes")
        if self.data.dtype != np.complex128:
            self.data = self.data.astype(np.complex128)

    @property
    def representation(self) -> str:
        if not self.freq_axes:
            return "physical"
        if set(self.freq_axes) == set(self.space_axes):
            return "frequency-spatial"
        return "mixed"

    def axis_index(self, axis: int) -> int:
        return self.space_axes.index(axis)

    def copy(self) -> "Field":
        return Field(self.grid, self.data.copy(), self.space_axes, self.freq_axes)


@dataclass
class TimeSlab:
    """Uniformly spaced time samples of a spatial Field (leading axis)."""

    grid: GridSpec
    data: np.ndarray
    times: np.ndarray
    space_axes: tuple[int, ...]
    freq_axes: frozenset = field(default_factory=frozenset)
    freq_time: bool = False

    def __post_init__(self):
        expect = (len(self.times),) + tuple(self.grid.n[a] for a in self.space_axes)
        if self.data.shape != expect:
            raise FieldError(f"slab shape {self.data.shape} != expected {expect}")
        dts = np.diff(self.times)
        if len(self.times) >= 2 and not np.all(dts > 0):
            raise FieldError("time samples must be strictly increasing")
        if len(self.times) >= 3 and not np.allclose(dts, dts[0], rtol=1e-9, atol=0.0):
            raise FieldError("time samples must be uniformly spaced")
        if self.data.dtype != np.complex128:
            self.data = self.data.astype(np.complex128)

    @property
    def n_t(self) -> int:
        return len(self.times)

    @property
    def dt(self) -> float:
        if self.n_t < 2:
            raise FieldError("slab with a single time has no step")
        return float(self.times[1] - self.times[0])

    @property
    def representation(self) -> str:
        sp = set(self.freq_axes) == set(self.space_axes)
        if self.freq_time and sp:
            return "frequency-full"
        if not self.freq_time and not self.freq_axes:
            return "physical"
        if sp:
            return "frequency-spatial"
        return "mixed"

    def tau(self) -> np.ndarray:
        """Time-frequency lattice in FFT order."""
        return TWO_PI * _fft.fftfreq(self.n_t, d=self.dt)

    def field_at(self, i: int) -> Field:
        if self.freq_time:
            raise FieldError("cannot slice a time-frequency slab at a time index")
        return Field(self.grid, self.data[i], self.space_axes, self.freq_axes)

    def copy(self) -> "TimeSlab":
        return TimeSlab(self.grid, self.data.copy(), self.times.copy(),
                        self.space_axes, self.freq_axes, self.freq_time)


FieldLike = Union[Field, TimeSlab]


# ---------------------------------------------------------------------------
# Transforms
# ---------------------------------------------------------------------------


def _axis_weights(obj: FieldLike, axis: Axis) -> tuple[int, float, float]:
    """(tensor dim, sample step, left end coordinate) for one axis."""
    if axis == "t":
        if not isinstance(obj, TimeSlab):
            raise FieldError("object has no time axis")
        return 0, obj.dt, float(obj.times[0])
    if not isinstance(axis, (int, np.integer)):
        raise FieldError(f"unknown axis {axis!r}")
    offset = 1 if isinstance(obj, TimeSlab) else 0
    if axis not in obj.space_axes:
        raise FieldError(f"axis {axis} not spanned by this object")
    g = obj.grid
    return offset + obj.space_axes.index(axis), g.dx(axis), -g.box[axis] / 2.0


def _in_frequency(obj: FieldLike, axis: Axis) -> bool:
    if axis == "t":
        return isinstance(obj, TimeSlab) and obj.freq_time
    return axis in obj.freq_axes


def transform(obj: FieldLike, axes: Iterable[Axis] | None = None, direction: str = "forward") -> FieldLike:
    """Continuum-normalized DFT along the requested axes (out of place).

    Forward maps physical samples to frequency samples; ``inverse`` undoes
    it exactly.  Requesting an axis already in the target representation is
    an error.
    """
    if direction not in ("forward", "inverse"):
        raise FieldError(f"direction must be forward|inverse, got {direction!r}")
    fwd = direction == "forward"
    if axes is None:
        axes = (["t"] if isinstance(obj, TimeSlab) else []) + list(obj.space_axes)
    axes = list(axes)
    for ax in axes:
        if _in_frequency(obj, ax) == fwd:
            have = "frequency" if not fwd else "physical"
            raise FieldError(f"axis {ax!r} is not in {have} representation")

    data = obj.data
    workers = fft_workers()
    for ax in axes:
        dim, step, origin = _axis_weights(obj, ax)
        n = data.shape[dim]
        if ax == "t":
            freqs = TWO_PI * _fft.fftfreq(n, d=step)
        else:
            freqs = obj.grid.freqs(ax)
        scale = (step / math.sqrt(TWO_PI)) * np.exp(-1j * freqs * origin)
        shape = [1] * data.ndim
        shape[dim] = n
        scale = scale.reshape(shape)
        if fwd:
            data = _fft.fft(data, axis=dim, workers=workers) * scale
        else:
            data = _fft.ifft(data / scale, axis=dim, workers=workers)

    new_freq = set(obj.freq_axes)
    new_time = isinstance(obj, TimeSlab) and obj.freq_time
    for ax in axes:
        if ax == "t":
            new_time = fwd
        else:
            (new_freq.add if fwd else new_freq.discard)(ax)
    if isinstance(obj, TimeSlab):
        return TimeSlab(obj.grid, data, obj.times, obj.space_axes, frozenset(new_freq), new_time)
    return Field(obj.grid, data, obj.space_axes, frozenset(new_freq))


def to_physical(obj: FieldLike) -> FieldLike:
    axes: list[Axis] = [a for a in obj.space_axes if a in obj.freq_axes]
    if isinstance(obj, TimeSlab) and obj.freq_time:
        axes = ["t"] + axes
    return transform(obj, axes, "inverse") if axes else obj


def to_frequency(obj: FieldLike, with_time: bool = False) -> FieldLike:
    axes: list[Axis] = [a for a in obj.space_axes if a not in obj.freq_axes]
    if with_time and isinstance(obj, TimeSlab) and not obj.freq_time:
        axes = ["t"] + axes
    return transform(obj, axes, "forward") if axes else obj


# ---------------------------------------------------------------------------
# Mixed-norm quadrature
# ---------------------------------------------------------------------------


def _quad_step(obj: FieldLike, axis: Axis) -> float:
    """Riemann weight of one axis in its current representation."""
    if axis == "t":
        return obj.dt
    if _in_frequency(obj, axis):
        return obj.grid.dxi(axis)
    return obj.grid.dx(axis)


def lp_norm(obj: FieldLike, exponents, axis_order=None) -> float:
    """Iterated mixed Lebesgue norm by Riemann sums / lattice maxima.

    ``exponents`` is either a single exponent (flat norm over all axes) or
    a sequence of ``(p, axes)`` stages applied innermost first.  ``p`` may
    be ``inf``; integrals use the step of each axis in its current
    representation, so Plancherel holds against ``transform`` exactly.
    ``axis_order`` is an alternative calling form: a permutation of the
    spanned axes paired one-to-one with a list of exponents, innermost
    first.
    """
    all_axes: list[Axis] = (["t"] if isinstance(obj, TimeSlab) else []) + list(obj.space_axes)
    if axis_order is not None:
        exps = list(exponents)
        order = list(axis_order)
        if len(exps) != len(order):
            raise NormShapeError("axis order and exponent list differ in length")
        stages = [(p, [ax]) for p, ax in zip(exps, order)]
    elif np.isscalar(exponents):
        stages = [(exponents, all_axes)]
    else:
        stages = [(p, list(axs)) for p, axs in exponents]

    seen: list[Axis] = []
    for p, axs in stages:
        if p != math.inf and p < 1:
            raise NormShapeError(f"exponent {p} < 1")
        seen.extend(axs)
    if sorted(map(str, seen)) != sorted(map(str, all_axes)):
        raise NormShapeError(
            f"stage axes {seen} are not a permutation of spanned axes {all_axes}")

    vals = np.abs(obj.data)
    # map axis label -> current tensor dim, updating as dims are reduced
    dims = {ax: _axis_weights(obj, ax)[0] for ax in all_axes}
    steps = {ax: _quad_step(obj, ax) for ax in all_axes}
    for p, axs in stages:
        red = tuple(sorted(dims[a] for a in axs))
        if p == math.inf:
            vals = vals.max(axis=red)
        else:
            w = 1.0
            for a in axs:
                w *= steps[a]
            vals = (vals ** p).sum(axis=red) * w
            vals = vals ** (1.0 / p)
        remaining = [a for a in dims if a not in axs]
        for a in axs:
            del dims[a]
        for a in remaining:
            dims[a] -= sum(1 for r in red if r < dims[a])
    return float(vals)


class NormShapeError(FieldError):
    """Exponent/axis bookkeeping errors in lp_norm."""


def l2_norm(obj: FieldLike) -> float:
    return lp_norm(obj, 2)


# ---------------------------------------------------------------------------
# Closed-form sample presets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianPreset:
    """exp(-|x - center|^2 / (2 sigma^2)) * exp(i k0 . x)."""

    sigma: float = 1.0
    k0: tuple[float, ...] | None = None
    center: tuple[float, ...] | None = None
    amplitude: float = 1.0


@dataclass(frozen=True)
class AnnulusRandomPreset:
    """Complex Gaussian coefficients on the dyadic annulus ``|xi| ~ N``.

    ``cap`` optionally restricts per-axis frequency magnitude (used on
    anisotropic grids where only part of the annulus is representable).
    ``direction`` multiplies in the directional cutoff along that axis.
    """

    N: int
    seed: int
    cap: tuple[float, ...] | None = None
    direction: int | None = None
    unit_norm: bool = True


@dataclass(frozen=True)
class ConstantPreset:
    value: complex = 1.0


Preset = Union[GaussianPreset, AnnulusRandomPreset, ConstantPreset]


def sample_function(grid: GridSpec, preset: Preset, axes: Sequence[int] | None = None) -> Field:
    """Materialize a closed-form preset as a physical Field."""
    axes = tuple(axes) if axes is not None else tuple(range(grid.d))
    if isinstance(preset, ConstantPreset):
        shape = tuple(grid.n[a] for a in axes)
        return Field(grid, np.full(shape, preset.value, dtype=np.complex128), axes)

    if isinstance(preset, GaussianPreset):
        k0 = preset.k0 or (0.0,) * len(axes)
        center = preset.center or (0.0,) * len(axes)
        if len(k0) != len(axes) or len(center) != len(axes):
            raise FieldError("k0/center length must match spanned axes")
        for i, a in enumerate(axes):
            bw = abs(k0[i]) + 4.0 / preset.sigma
            if bw > grid.nyquist(a):
                raise FieldError(
                    f"preset bandwidth {bw:.3g} exceeds Nyquist {grid.nyquist(a):.3g} on axis {a}")
        mesh = grid.mesh(axes, "coords")
        r2 = sum((m - c) ** 2 for m, c in zip(mesh, center))
        phase = sum(k * (m - c) for k, m, c in zip(k0, mesh, center))
        data = preset.amplitude * np.exp(-r2 / (2.0 * preset.sigma ** 2) + 1j * phase)
        return Field(grid, data.astype(np.complex128), axes)

    if isinstance(preset, AnnulusRandomPreset):
        from .dyadic import eta_annulus, phi_scaled  # local import, no cycle at module load

        if 2 * preset.N > min(grid.nyquist(a) for a in axes):
            raise FieldError(
                f"annulus N={preset.N} exceeds Nyquist on the requested axes")
        rng = np.random.default_rng(preset.seed)
        shape = tuple(grid.n[a] for a in axes)
        coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        mesh = grid.mesh(axes, "freqs")
        rad = np.sqrt(sum(m ** 2 for m in mesh))
        mask = eta_annulus(preset.N, rad)
        if preset.cap is not None:
            for m, c in zip(mesh, preset.cap):
                mask = mask * (np.abs(m) <= c)
        if preset.direction is not None:
            j = axes.index(preset.direction)
            mask = mask * phi_scaled(preset.N, mesh[j], grid.d)
        f = Field(grid, coeffs * mask, axes, frozenset(axes))
        f = transform(f, axes, "inverse")
        if preset.unit_norm:
            nrm = l2_norm(f)
            if nrm > 0:
                f.data /= nrm
        return f

    raise FieldError(f"unknown preset {preset!r}")
