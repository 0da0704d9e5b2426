"""Reference solutions: closed-form linear models and a Strang splitting solver.

For the default tension cos^2(2 tau) the linear (no self-field) dynamics has
closed-form asymptotics.  The averaged field rotates xi at rate 1/4; the
next order adds a constant drift matrix D0, a periodic drift matrix D1(tau)
and a corrected rotation rate 1/4 + 5 eps / 192:

    limit:        f~(t, xi) ~ f0( e^{t J / 4} xi )
    second order: f~(t, xi) ~ f0( (I - eps D0) e^{t omega J} (I - eps D1(tau)) xi ),

with tau = t/eps and e^{theta J} xi = (xi1 cos + xi2 sin, -xi1 sin + xi2 cos).

The splitting solver integrates the unfiltered equation

    df/dt + (v/eps) df/dr + (E_f - r/eps + a(t/eps) r) df/dv = 0

on the same box with spectral shifts in r and v (Strang order: half drift,
kick, half drift).  The oscillatory part of the kick uses the closed-form
primitive of the tension, so the only time-scale restriction is accuracy.
"""
from __future__ import annotations

import numpy as np

from . import averaging
from .domain import PhaseGrid, initial_distribution, rotate_to_rv, rotate_to_xi
from .fields import Tension, applied_field, density, radial_field, sample_plane

LIMIT_ROTATION_RATE = 0.25
ROTATION_RATE_SLOPE = 5.0 / 192.0


def rotation_rate(eps: float) -> float:
    """Effective rotation rate of the filtered solution through order eps."""
    return LIMIT_ROTATION_RATE + ROTATION_RATE_SLOPE * eps


def constant_drift() -> np.ndarray:
    """Constant part D0 of the first-order drift, diag(-1, 1)/12."""
    return np.diag([-1.0, 1.0]) / 12.0


def periodic_drift(tau: float) -> np.ndarray:
    """Mean-free periodic drift matrix D1(tau); D1(0) = -D0 and D1(pi/2) = D0."""
    c2, c6 = np.cos(2 * tau), np.cos(6 * tau)
    s2, s4, s6 = np.sin(2 * tau), np.sin(4 * tau), np.sin(6 * tau)
    return (
        np.array(
            [
                [3 * c2 + c6, 9 * s2 - 3 * s4 + s6],
                [9 * s2 + 3 * s4 + s6, -3 * c2 - c6],
            ]
        )
        / 48.0
    )


def _apply_matrix(m: np.ndarray, xi1, xi2):
    return m[0, 0] * xi1 + m[0, 1] * xi2, m[1, 0] * xi1 + m[1, 1] * xi2


def limit_solution(t: float, xi1, xi2, f0_params: dict | None = None):
    """Leading-order filtered solution: f0 composed with the rotation at rate 1/4.

    The averaged field is -J xi / 4, so characteristics through (t, xi) start
    at e^{t J / 4} xi.
    """
    y1, y2 = rotate_to_rv(LIMIT_ROTATION_RATE * t, xi1, xi2)
    return initial_distribution(y1, y2, **(f0_params or {}))


def second_order_solution(t: float, tau: float, xi1, xi2, eps: float, f0_params: dict | None = None):
    """First-order-in-eps model of the two-scale solution F(t, tau, xi).

    The filtered field f~(t, xi) is this function at tau = t/eps.
    """
    z1, z2 = _apply_matrix(np.eye(2) - eps * periodic_drift(tau), xi1, xi2)
    y1, y2 = rotate_to_rv(rotation_rate(eps) * t, z1, z2)
    w1, w2 = _apply_matrix(np.eye(2) - eps * constant_drift(), y1, y2)
    return initial_distribution(w1, w2, **(f0_params or {}))


def model_lab_frame(model: str, t: float, eps: float, r, v, f0_params: dict | None = None):
    """Evaluate a closed-form model in the lab frame f(t, r, v); no interpolation."""
    theta = t / eps
    x1, x2 = rotate_to_xi(theta, r, v)
    if model == "limit":
        return limit_solution(t, x1, x2, f0_params)
    if model == "second_order":
        return second_order_solution(t, theta % (2 * np.pi), x1, x2, eps, f0_params)
    raise ValueError(f"unknown model {model!r}")


def effective_hamiltonian(xi1, xi2, tension: Tension, n_tau: int = 64):
    """Quadratic invariant D(xi) driving the order-eps rotation correction.

    Computed from the Fourier coefficients A_k of the applied field on the
    torus as 2 Im sum_{k>=1} A_{k,1} conj(A_{k,2}) / k; spectrally exact for
    band-limited tensions.  For cos2sq this equals 5/384 * |xi|^2.
    """
    tau = (2.0 * np.pi / n_tau) * np.arange(n_tau)
    shape = (-1,) + (1,) * np.ndim(xi1)
    e1, e2 = applied_field(tension, tau.reshape(shape), np.asarray(xi1)[None], np.asarray(xi2)[None])
    a1 = np.fft.rfft(e1, axis=0) / n_tau
    a2 = np.fft.rfft(e2, axis=0) / n_tau
    k = np.arange(1, a1.shape[0] - 1).reshape(shape)
    return 2.0 * (a1[1:-1] * np.conj(a2[1:-1]) / k).imag.sum(axis=0)


def drift_coupling_matrix(tension: Tension, xi1: float, xi2: float, n_tau: int = 64) -> np.ndarray:
    """Skew-symmetric matrix -(1/2 pi) integral E_i L^{-1}[(I - Pi) E_j] dtau at one xi.

    Cross-checks effective_hamiltonian through an independent quadrature route:
    the (1, 2) entry equals D(xi).
    """
    tau = (2.0 * np.pi / n_tau) * np.arange(n_tau)
    e = np.stack(applied_field(tension, tau, xi1, xi2))  # (2, n_tau)
    prim = np.stack([averaging.invert_derivative(averaging.fluctuation(ei)) for ei in e])
    return -np.einsum("it,jt->ij", e, prim) / n_tau


class SplittingSolver:
    """Strang splitting for the unfiltered beam equation on the (r, v) box.

    Drifts in r and kicks in v are exact spectral shifts (periodic box; the
    support must stay away from the edges).  In poisson mode the radial field
    is frozen at the half-drifted state of each step.
    """

    def __init__(
        self,
        phase: PhaseGrid,
        epsilon: float,
        tension: Tension,
        mode: str = "linear",
        f0_params: dict | None = None,
    ):
        if mode not in ("linear", "poisson"):
            raise ValueError(f"unknown mode {mode!r}")
        self.phase = phase
        self.epsilon = epsilon
        self.tension = tension
        self.mode = mode
        self.f0_params = dict(f0_params or {})
        n = phase.n_points
        length = 2.0 * phase.xi_max
        self.k = 2.0 * np.pi * np.fft.rfftfreq(n, d=length / n)  # shift wavenumbers
        self.r = phase.nodes
        self.v = phase.nodes
        self._drift_phase: dict[tuple[int, float], np.ndarray] = {}

    def initial_state(self) -> np.ndarray:
        r, v = self.phase.mesh()
        return initial_distribution(r, v, **self.f0_params)

    def _drift(self, f: np.ndarray, half_steps: int, dt: float) -> np.ndarray:
        """Shift f(r, v) -> f(r - v * (half_steps * dt/2) / eps, v); FFT along r."""
        phase = self._drift_phase.get((half_steps, dt))
        if phase is None:
            shift = self.v * (0.5 * half_steps * dt / self.epsilon)
            phase = np.exp(-1j * np.outer(self.k, shift))  # (n_k, n_v)
            self._drift_phase[(half_steps, dt)] = phase
        fh = np.fft.rfft(f, axis=0)
        return np.fft.irfft(fh * phase, n=f.shape[0], axis=0)

    def _kick(self, f: np.ndarray, t0: float, dt: float) -> np.ndarray:
        """Shift in v by the exact field impulse over [t0, t0 + dt]; FFT along v."""
        eps = self.epsilon
        osc = eps * self.tension.integral(t0 / eps, (t0 + dt) / eps)
        dv = self.r * (osc - dt / eps)
        if self.mode == "poisson":
            rho = density(f, self.phase.delta_xi)
            dv = dv + dt * radial_field(rho, self.phase)
        phase = np.exp(-1j * np.outer(dv, self.k))  # (n_r, n_k)
        fh = np.fft.rfft(f, axis=1)
        return np.fft.irfft(fh * phase, n=f.shape[1], axis=1)

    def step(self, f: np.ndarray, t0: float, dt: float) -> np.ndarray:
        """One full Strang step from t0 to t0 + dt."""
        f = self._drift(f, 1, dt)
        f = self._kick(f, t0, dt)
        return self._drift(f, 1, dt)

    def run(self, t_final: float, dt: float, sample_every: int = 0):
        """Generate (t, f) snapshots; consecutive half drifts are fused between samples.

        dt is adjusted to an integer number of steps.  Yields the initial
        state, every sample_every-th step when requested, and the final state.
        """
        n_steps = round(t_final / dt) if dt > 0 else 0
        if n_steps == 0 and t_final > 0:
            n_steps = 1
        f = self.initial_state()
        if sample_every or n_steps == 0:
            yield 0.0, f
        if n_steps == 0:
            return
        dt = t_final / n_steps
        inside = False  # true when a trailing half drift is pending
        for n in range(1, n_steps + 1):
            f = self._drift(f, 2 if inside else 1, dt)
            f = self._kick(f, (n - 1) * dt, dt)
            if n == n_steps or (sample_every and n % sample_every == 0):
                f = self._drift(f, 1, dt)
                inside = False
                yield n * dt, f
            else:
                inside = True

    def solve(self, t_final: float, dt: float) -> np.ndarray:
        """Final state only."""
        for _, f in self.run(t_final, dt):
            pass
        return f


def filtered_from_rv(f_rv: np.ndarray, grid: PhaseGrid, t: float, eps: float, order: int = 3):
    """Map a lab-frame solution onto the xi grid: f~(t, xi) = f(t, e^{J t/eps} xi).

    order=3 keeps the mapping error far below the scheme errors being measured.
    """
    theta = (t / eps) % (2.0 * np.pi)
    x1, x2 = grid.mesh()
    r, v = rotate_to_rv(theta, x1, x2)
    return sample_plane(f_rv, grid, r, v, order=order)
