"""Forcing fields seen by the two-scale unknown in the rotating frame.

The focusing lattice enters through a periodic tension a(tau).  After
filtering out the stiff rotation, the applied field on the torus reads

    E_app(tau, xi) = a(tau) * (xi1 cos tau + xi2 sin tau) * (-sin tau, cos tau),

and the self-consistent (Poisson) field is the radial field of the charge
density computed in the lab frame, rotated back:

    E_self(tau, xi) = E_f(r(tau, xi)) * (-sin tau, cos tau),
    E_f(r) = (1/r) * integral_0^r s rho(s) ds,  r(tau, xi) = xi1 cos tau + xi2 sin tau.

Density and radial integrals live on the same box as the xi grid, reusing it
as an (r, v) mesh.  Out-of-grid lookups contribute zero; the distribution is
assumed compactly supported inside the box.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.ndimage import map_coordinates

from .domain import PhaseGrid, TorusGrid, rotate_to_rv, rotate_to_xi


@dataclass(frozen=True)
class Tension:
    """Periodic focusing tension with an exact primitive for the splitting kick."""

    name: str
    func: Callable[[np.ndarray], np.ndarray]
    primitive: Callable[[np.ndarray], np.ndarray]

    def __call__(self, tau):
        return self.func(tau)

    def integral(self, tau0, tau1):
        """integral of a(tau) from tau0 to tau1, evaluated from the closed-form primitive."""
        return self.primitive(tau1) - self.primitive(tau0)


TENSIONS = {
    # mean 1/2; drives the default focusing regime
    "cos2sq": Tension(
        "cos2sq",
        lambda t: np.cos(2.0 * t) ** 2,
        lambda t: 0.5 * t + np.sin(4.0 * t) / 8.0,
    ),
    # mean-free; required by the diffusion-scaling stepper
    "cos4": Tension(
        "cos4",
        lambda t: np.cos(4.0 * t),
        lambda t: np.sin(4.0 * t) / 4.0,
    ),
}


def get_tension(name: str) -> Tension:
    try:
        return TENSIONS[name]
    except KeyError:
        raise KeyError(f"unknown tension {name!r}; available: {sorted(TENSIONS)}") from None


def applied_field(tension: Tension, tau, xi1, xi2):
    """Applied (lattice) field at angle tau and position xi; broadcasts over inputs."""
    r = xi1 * np.cos(tau) + xi2 * np.sin(tau)
    a = tension(tau)
    return -a * r * np.sin(tau), a * r * np.cos(tau)


def sample_applied_field(tension: Tension, torus: TorusGrid, phase: PhaseGrid):
    """Applied field on the full (tau, xi) grid, shape (n_tau, n, n) per component."""
    x1, x2 = phase.mesh()
    tau = torus.nodes.reshape(-1, 1, 1)
    return applied_field(tension, tau, x1[None], x2[None])


def density(f_rv: np.ndarray, delta_xi: float) -> np.ndarray:
    """Charge density rho(r) = integral f dv, Riemann sum over the v axis (last axis)."""
    return delta_xi * np.asarray(f_rv).sum(axis=-1)


def radial_field(rho: np.ndarray, grid: PhaseGrid) -> np.ndarray:
    """Radial Poisson field E_f(r) = (1/r) integral_0^r s rho(s) ds on the grid nodes.

    rho may carry leading batch axes; the last axis must match the grid.  The
    cumulative integral uses the trapezoid rule outward from r = 0 (where the
    field vanishes exactly) and the result is extended to r < 0 as an odd
    function.  A warning is emitted when rho is visibly not even in r.
    """
    rho = np.asarray(rho, dtype=float)
    n = grid.n_points
    if rho.shape[-1] != n:
        raise ValueError("density length does not match the grid")
    m = n // 2

    mirrored = rho[..., :0:-1]  # rho at -r for nodes 1..n-1, reversed
    denom = np.abs(rho).max()
    # ringing from repeated spectral shifts of edge profiles sits near 1e-8
    # on coarse grids; genuine asymmetry lands orders of magnitude above
    if denom > 0 and np.abs(rho[..., 1:] - mirrored).max() > 1e-6 * denom:
        warnings.warn("density is not even in r; the radial field assumes symmetry")

    s = grid.nodes[m:]  # 0, dxi, ..., xi_max - dxi
    q = s * rho[..., m:]
    integral = cumulative_trapezoid(q, dx=grid.delta_xi, initial=0.0, axis=-1)
    e_pos = np.zeros_like(integral)
    e_pos[..., 1:] = integral[..., 1:] / s[1:]

    out = np.zeros_like(rho)
    out[..., m:] = e_pos
    out[..., 1:m] = -e_pos[..., :0:-1]
    # leftmost node r = -xi_max: close the integral with a zero ghost density
    tail = integral[..., -1] + 0.5 * grid.delta_xi * q[..., -1]
    out[..., 0] = -tail / grid.xi_max
    return out


def sample_plane(values: np.ndarray, grid: PhaseGrid, x, y, order: int = 1):
    """Sample a single 2D grid function at arbitrary points, zero outside the box.

    order=1 is bilinear (the scheme-internal choice); order=3 is a spline used
    when mapping reference solutions between frames.
    """
    gx = (np.asarray(x) + grid.xi_max) / grid.delta_xi
    gy = (np.asarray(y) + grid.xi_max) / grid.delta_xi
    # grid-constant extends the data (not the spline coefficients) by zero
    mode = "grid-constant" if order > 1 else "constant"
    return map_coordinates(
        np.asarray(values, dtype=float), [gx, gy], order=order, mode=mode, cval=0.0
    )


class FrameRotator:
    """Precomputed geometry tying the (r, v) mesh to the xi mesh at every tau node.

    The rotation angles and both grids never change during a run, so the
    bilinear gather indices and weights (with zero extension baked into the
    weights) are built once.  state_to_rv pushes a two-scale state to the lab
    frame slice by slice; sample_radial spreads per-slice radial profiles onto
    the xi mesh at the rotated radius.
    """

    def __init__(self, phase: PhaseGrid, torus: TorusGrid):
        self.phase = phase
        self.torus = torus
        n, nt = phase.n_points, torus.n_tau
        tau = torus.nodes.reshape(-1, 1, 1)
        self.cos_tau = np.cos(torus.nodes)
        self.sin_tau = np.sin(torus.nodes)

        r_mesh, v_mesh = phase.mesh()
        x1, x2 = rotate_to_xi(tau, r_mesh[None], v_mesh[None])
        self._bil_idx, self._bil_w = _bilinear_gather(phase, x1, x2, slice_offset=n * n)

        xi1_mesh, xi2_mesh = phase.mesh()
        r_of_xi, _ = rotate_to_rv(tau, xi1_mesh[None], xi2_mesh[None])
        self._rad_idx, self._rad_w = _linear_gather(phase, r_of_xi, slice_offset=n)

    def state_to_rv(self, state: np.ndarray) -> np.ndarray:
        """f(tau_l, r, v) = F(tau_l, xi(r, v)) for all slices, shape (n_tau, n, n)."""
        flat = np.ascontiguousarray(state).reshape(-1)
        out = np.zeros(self._bil_idx.shape[1:])
        for q in range(4):
            out += self._bil_w[q] * flat.take(self._bil_idx[q])
        return out

    def sample_radial(self, profiles: np.ndarray) -> np.ndarray:
        """E(tau_l, r(tau_l, xi_ij)) from per-slice radial profiles of shape (n_tau, n)."""
        flat = np.ascontiguousarray(profiles).reshape(-1)
        return self._rad_w[0] * flat.take(self._rad_idx[0]) + self._rad_w[1] * flat.take(
            self._rad_idx[1]
        )


def _bilinear_gather(grid, x, y, slice_offset):
    """Corner indices and weights for per-slice bilinear sampling on (n_tau, n, n) points."""
    n = grid.n_points
    gx = (x + grid.xi_max) / grid.delta_xi
    gy = (y + grid.xi_max) / grid.delta_xi
    i0 = np.floor(gx).astype(np.int64)
    j0 = np.floor(gy).astype(np.int64)
    fx = gx - i0
    fy = gy - j0
    base = slice_offset * np.arange(x.shape[0]).reshape(-1, 1, 1)
    idx = np.empty((4,) + x.shape, dtype=np.int64)
    w = np.empty((4,) + x.shape)
    for q, (di, dj, wq) in enumerate(
        (
            (0, 0, (1 - fx) * (1 - fy)),
            (1, 0, fx * (1 - fy)),
            (0, 1, (1 - fx) * fy),
            (1, 1, fx * fy),
        )
    ):
        ii = i0 + di
        jj = j0 + dj
        inside = (ii >= 0) & (ii < n) & (jj >= 0) & (jj < n)
        idx[q] = np.where(inside, base + ii * n + jj, 0)
        w[q] = np.where(inside, wq, 0.0)
    return idx, w


def _linear_gather(grid, x, slice_offset):
    """Node indices and weights for per-slice 1D linear sampling, zero off the grid."""
    n = grid.n_points
    gx = (x + grid.xi_max) / grid.delta_xi
    k0 = np.floor(gx).astype(np.int64)
    fx = gx - k0
    base = slice_offset * np.arange(x.shape[0]).reshape(-1, 1, 1)
    idx = np.empty((2,) + x.shape, dtype=np.int64)
    w = np.empty((2,) + x.shape)
    for q, (dk, wq) in enumerate(((0, 1 - fx), (1, fx))):
        kk = k0 + dk
        inside = (kk >= 0) & (kk < n)
        idx[q] = np.where(inside, base + kk, 0)
        w[q] = np.where(inside, wq, 0.0)
    return idx, w


def self_field(state: np.ndarray, rotator: FrameRotator):
    """Self-consistent field on the (tau, xi) grid from a two-scale state.

    Returns the pair (e1, e2), each of shape (n_tau, n, n).  Per slice: rotate
    the state to the lab frame, integrate the density, solve the radial
    Poisson problem, then spread the radial field back along (-sin, cos).
    """
    phase = rotator.phase
    f_rv = rotator.state_to_rv(state)
    rho = density(f_rv, phase.delta_xi)
    e_rad = radial_field(rho, phase)
    e_at = rotator.sample_radial(e_rad)
    e1 = -rotator.sin_tau[:, None, None] * e_at
    e2 = rotator.cos_tau[:, None, None] * e_at
    return e1, e2
