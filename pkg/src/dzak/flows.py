"""Exact Fourier-multiplier linear flows and Duhamel integrals.

All flows are unimodular multipliers on the frequency lattice, hence
unitary on the quadrature L^2 inner product and exact in time (no
stepping error): the transverse Schrodinger group, its transported
variant with drift along the distinguished axis, and the two half-wave
groups.  The inhomogeneous integral uses the composed trapezoid rule,
which is exact with respect to the semigroup property.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import FieldError
from .spectral import Field, GridSpec, TimeSlab, to_physical, transform

FLOW_KINDS = ("schrodinger", "transported", "half-wave", "half-wave-conj")


def _phase_rate(kind: str, f: Field | TimeSlab) -> np.ndarray:
    """omega(xi) such that the flow multiplies by exp(-i t omega)."""
    grid = f.grid
    offset = 1 if isinstance(f, TimeSlab) else 0
    trans = [a for a in grid.transverse_axes if a in f.space_axes]
    if not trans:
        raise FieldError("flow needs transverse axes")
    acc = 0.0
    for a in trans:
        fr = grid.freqs(a)
        shape = [1] * f.data.ndim
        shape[offset + f.space_axes.index(a)] = len(fr)
        acc = acc + fr.reshape(shape) ** 2
    if kind == "schrodinger":
        return acc
    if kind == "transported":
        if grid.xd_axis not in f.space_axes:
            raise FieldError("transported flow needs the distinguished axis")
        fr = grid.freqs(grid.xd_axis)
        shape = [1] * f.data.ndim
        shape[offset + f.space_axes.index(grid.xd_axis)] = len(fr)
        return acc + fr.reshape(shape)
    rad = np.sqrt(acc)
    if kind == "half-wave":
        return -rad
    if kind == "half-wave-conj":
        return rad
    raise FieldError(f"unknown flow kind {kind!r}")


def apply_flow(kind: str, t: float, f: Field) -> Field:
    """Evolve a spatial field for time t under the chosen linear flow."""
    if kind not in FLOW_KINDS:
        raise FieldError(f"unknown flow kind {kind!r}")
    fwd = [a for a in f.space_axes if a not in f.freq_axes]
    work = transform(f, fwd, "forward") if fwd else f.copy()
    work.data = work.data * np.exp(-1j * t * _phase_rate(kind, work))
    return transform(work, fwd, "inverse") if fwd else work


def evolve_slab(kind: str, f0: Field, times: Sequence[float]) -> TimeSlab:
    """Materialize the free evolution at the given times (physical output)."""
    times = np.asarray(times, dtype=float)
    fwd = [a for a in f0.space_axes if a not in f0.freq_axes]
    fh = transform(f0, fwd, "forward") if fwd else f0
    rate = _phase_rate(kind, fh)
    out = np.empty((len(times),) + fh.data.shape, dtype=np.complex128)
    for i, t in enumerate(times):
        out[i] = fh.data * np.exp(-1j * t * rate)
    slab = TimeSlab(f0.grid, out, times, f0.space_axes, frozenset(f0.space_axes))
    return to_physical(slab)


def duhamel(source: TimeSlab, kind: str) -> TimeSlab:
    """I(t_k) = integral_0^{t_k} flow(t_k - s) source(s) ds, trapezoid rule.

    The source must start at time 0 with at least three samples; the
    recursion ``I_k = flow(dt)(I_{k-1} + dt/2 s_{k-1}) + dt/2 s_k`` is the
    exact trapezoid sum because the flow is a group.
    """
    if source.n_t < 3:
        raise FieldError("duhamel needs at least 3 time samples")
    if abs(float(source.times[0])) > 1e-12:
        raise FieldError("duhamel sources start at time 0")
    sfreq = transform(source, [a for a in source.space_axes if a not in source.freq_axes],
                      "forward") if set(source.freq_axes) != set(source.space_axes) else source
    rate = _phase_rate(kind, sfreq)[0]  # drop the broadcast time dim
    dt = sfreq.dt
    step = np.exp(-1j * dt * rate)
    out = np.zeros_like(sfreq.data)
    acc = np.zeros_like(sfreq.data[0])
    for k in range(1, sfreq.n_t):
        acc = step * (acc + 0.5 * dt * sfreq.data[k - 1]) + 0.5 * dt * sfreq.data[k]
        out[k] = acc
    slab = TimeSlab(source.grid, out, source.times, source.space_axes,
                    frozenset(source.space_axes))
    return to_physical(slab)
