"""Uniformly accurate two-step stepper for the two-scale transport equation.

The augmented unknown F(t, tau, xi) obeys

    dF/dt + E(t, tau, xi) . grad_xi F = -(1/eps) dF/dtau,

and the physical solution is read out on the diagonal tau = t/eps.  Time
stepping follows a two-step Lax-Wendroff pattern in (t, xi): a predictor to
t + dt/2 built on the four-point average, then a centered corrector.  The
stiff tau-transport is treated by a Crank-Nicolson resolvent in Fourier
space, which keeps every step well posed uniformly in eps:

    predictor: (I + lam L) F* = avg(F) - (dt/2) Phi(F),        lam = dt/(2 eps)
    corrector: (I + lam L) F+ = F - dt Phi(F*) - lam L F

with L = d/dtau and Phi the centered flux difference of E F with zero ghost
values outside the box.  Both occurrences of L use the same spectral
derivative; mixing discretizations here breaks the mode-wise unitarity of the
update and with it the uniform accuracy.

A micro-macro variant of the same pattern handles the longer diffusion time
scale, where the tension is mean-free and the solution is split as
F = G + h with G = Pi F.
"""
from __future__ import annotations

import numpy as np

from . import averaging, fields
from .domain import PhaseGrid, StateField, TorusGrid, initial_distribution, rotate_to_xi
from .errors import NonMeanFreeTension, StabilityFailure, ZeroField


def _shift(a: np.ndarray, axis: int, step: int) -> np.ndarray:
    """a evaluated at index + step along axis, with zero ghost values."""
    out = np.zeros_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if step == 1:
        src[axis] = slice(1, None)
        dst[axis] = slice(None, -1)
    else:
        src[axis] = slice(None, -1)
        dst[axis] = slice(1, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def flux(e1: np.ndarray, e2: np.ndarray, f: np.ndarray, delta_xi: float) -> np.ndarray:
    """Centered conservative transport term Phi(F) ~ div_xi(E F).

    Acts on the last two axes; f may be (n, n) or (n_tau, n, n) and is
    broadcast against the field sample.  Ghost values outside the grid are
    zero, which encodes the compact-support boundary condition.
    """
    a = e1 * f
    b = e2 * f
    da = _shift(a, -2, 1) - _shift(a, -2, -1)
    db = _shift(b, -1, 1) - _shift(b, -1, -1)
    return (da + db) / (2.0 * delta_xi)


def four_point_average(f: np.ndarray) -> np.ndarray:
    """Mean of the four lateral neighbours, zero ghosts outside the grid."""
    return 0.25 * (
        _shift(f, -2, 1) + _shift(f, -2, -1) + _shift(f, -1, 1) + _shift(f, -1, -1)
    )


def step_half(f, e1, e2, eps: float, dt: float, delta_xi: float) -> np.ndarray:
    """Predictor to t + dt/2; implicit in tau through the spectral resolvent."""
    lam = dt / (2.0 * eps)
    rhs = four_point_average(f) - 0.5 * dt * flux(e1, e2, f, delta_xi)
    return averaging.solve_implicit_tau(rhs, lam)


def step_full(f, f_half, e1_half, e2_half, eps: float, dt: float, delta_xi: float) -> np.ndarray:
    """Corrector using the predicted state; Crank-Nicolson in tau."""
    lam = dt / (2.0 * eps)
    rhs = (
        f
        - dt * flux(e1_half, e2_half, f_half, delta_xi)
        - lam * averaging.spectral_derivative(f)
    )
    return averaging.solve_implicit_tau(rhs, lam)


def split_step_half(g, h, e1, e2, eps: float, dt: float, delta_xi: float):
    """Predictor for the mean/fluctuation pair (g, h).

    Algebraically identical to step_half on g + h followed by a re-split:
    the resolvent is the identity on tau-means, so the mean block needs no
    implicit solve.  g carries no tau axis.
    """
    lam = dt / (2.0 * eps)
    phi = flux(e1, e2, g[None] + h, delta_xi)
    g_half = four_point_average(g) - 0.5 * dt * averaging.project_mean(phi)
    rhs = four_point_average(h) - 0.5 * dt * averaging.fluctuation(phi)
    return g_half, averaging.solve_implicit_tau(rhs, lam)


def split_step_full(g, h, g_half, h_half, e1_half, e2_half, eps: float, dt: float, delta_xi: float):
    """Corrector for the mean/fluctuation pair; mirrors step_full block by block."""
    lam = dt / (2.0 * eps)
    phi = flux(e1_half, e2_half, g_half[None] + h_half, delta_xi)
    g_new = g - dt * averaging.project_mean(phi)
    rhs = h - dt * averaging.fluctuation(phi) - lam * averaging.spectral_derivative(h)
    return g_new, averaging.solve_implicit_tau(rhs, lam)


def cfl_dt(e1: np.ndarray, e2: np.ndarray, delta_xi: float, safety: float = 1.0) -> float:
    """Advective time step dt = safety * delta_xi / max |E|, frozen at start-up."""
    emax = max(np.abs(e1).max(), np.abs(e2).max())
    if emax == 0.0:
        raise ZeroField("advecting field vanishes; provide delta_t explicitly")
    return safety * delta_xi / emax


class APSolver:
    """Driver for the two-scale scheme on fixed grids.

    mode "linear" uses the applied lattice field only; mode "poisson" adds the
    self-consistent field recomputed at every stage.  The applied field does
    not depend on t, so it is sampled once.
    """

    def __init__(
        self,
        phase: PhaseGrid,
        torus: TorusGrid,
        tension: fields.Tension,
        epsilon: float,
        mode: str = "linear",
        f0_params: dict | None = None,
    ):
        if mode not in ("linear", "poisson"):
            raise ValueError(f"unknown mode {mode!r}")
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.phase = phase
        self.torus = torus
        self.tension = tension
        self.epsilon = epsilon
        self.mode = mode
        self.f0_params = dict(f0_params or {})
        self.applied = fields.sample_applied_field(tension, torus, phase)
        self.rotator = fields.FrameRotator(phase, torus) if mode == "poisson" else None

    def total_field(self, state: np.ndarray):
        """Applied plus (in poisson mode) self-consistent field for a given state."""
        e1, e2 = self.applied
        if self.mode == "poisson":
            s1, s2 = fields.self_field(state, self.rotator)
            return e1 + s1, e2 + s2
        return e1, e2

    def initial_state(self, init: str = "corrected") -> np.ndarray:
        """Well-prepared data: either f0 copied across tau or the pushed-back profile.

        The corrected variant evaluates f0 at xi - eps * S(tau, xi) with
        S the tau-antiderivative (from zero) of the mean-free part of the
        initial field.  Being a composition with f0 it stays nonnegative.
        """
        x1, x2 = self.phase.mesh()
        nt = self.torus.n_tau
        plain = np.broadcast_to(
            initial_distribution(x1, x2, **self.f0_params), (nt,) + x1.shape
        ).copy()
        if init == "plain":
            return plain
        if init != "corrected":
            raise ValueError(f"unknown init {init!r}")
        e1, e2 = self.total_field(plain)
        s1 = averaging.antiderivative_from_zero(averaging.fluctuation(e1))
        s2 = averaging.antiderivative_from_zero(averaging.fluctuation(e2))
        eps = self.epsilon
        return initial_distribution(x1[None] - eps * s1, x2[None] - eps * s2, **self.f0_params)

    def advance(self, state: np.ndarray, dt: float) -> np.ndarray:
        """One step; the field is refreshed at t_n and at the predictor stage."""
        dxi = self.phase.delta_xi
        e1, e2 = self.total_field(state)
        f_half = step_half(state, e1, e2, self.epsilon, dt, dxi)
        if self.mode == "poisson":
            e1, e2 = self.total_field(f_half)
        out = step_full(state, f_half, e1, e2, self.epsilon, dt, dxi)
        if not np.all(np.isfinite(out)):
            raise StabilityFailure("non-finite values in the state; reduce dt")
        return out

    def suggest_dt(self, state: np.ndarray, safety: float = 1.0) -> float:
        e1, e2 = self.total_field(state)
        return cfl_dt(e1, e2, self.phase.delta_xi, safety)

    def readout(self, state: np.ndarray, t: float):
        """Physical fields at time t: filtered f~(t, xi) and lab-frame f(t, r, v).

        f~ is the trigonometric evaluation of the state at tau = t/eps; the
        lab-frame field samples f~ bilinearly at the rotated coordinates.
        """
        return self.readout_at(state, (t / self.epsilon) % (2.0 * np.pi))

    def readout_at(self, state: np.ndarray, theta: float):
        """Same as readout but with the filter phase given directly."""
        f_tilde = averaging.eval_at_tau(state, theta)
        r, v = self.phase.mesh()
        x1, x2 = rotate_to_xi(theta, r, v)
        f_rv = fields.sample_plane(f_tilde, self.phase, x1, x2, order=1)
        return f_tilde, f_rv

    def state_field(self, values: np.ndarray) -> StateField:
        return StateField(values, self.phase, self.torus)


class DiffusionSolver:
    """Micro-macro stepper for the diffusion time scale (tau = t/eps^2 driver).

    Requires a tension whose applied field is mean-free on the torus; the
    macro part G = Pi F then moves only through the averaged product of
    fluctuations.  States are carried as the pair (G, h).
    """

    def __init__(self, phase: PhaseGrid, torus: TorusGrid, tension: fields.Tension, epsilon: float):
        self.phase = phase
        self.torus = torus
        self.tension = tension
        self.epsilon = epsilon
        e1, e2 = fields.sample_applied_field(tension, torus, phase)
        sup = max(np.abs(e1).max(), np.abs(e2).max())
        mean_sup = max(np.abs(e1.mean(axis=0)).max(), np.abs(e2.mean(axis=0)).max())
        if sup > 0 and mean_sup > 1e-10 * sup:
            raise NonMeanFreeTension(
                f"tension {tension.name!r} leaves a mean field of size {mean_sup:.3e}"
            )
        self.applied = (e1, e2)

    def initial_split(self, init: str = "corrected"):
        """(G0, h0) from the same well-prepared data as the transport solver."""
        helper = APSolver(
            self.phase, self.torus, self.tension, self.epsilon, mode="linear"
        )
        g, h = averaging.micro_macro_split(helper.initial_state(init))
        return g, h

    def step(self, g: np.ndarray, h: np.ndarray, dt: float):
        """One micro-macro step; G is advanced explicitly, h through the resolvent."""
        eps = self.epsilon
        dxi = self.phase.delta_xi
        e1, e2 = self.applied
        lam = dt / (2.0 * eps ** 2)

        g_half = four_point_average(g) - (dt / (2.0 * eps)) * averaging.project_mean(
            flux(e1, e2, h, dxi)
        )
        rhs = four_point_average(h) - (dt / (2.0 * eps)) * averaging.fluctuation(
            flux(e1, e2, g_half[None] + h, dxi)
        )
        h_half = averaging.solve_implicit_tau(rhs, lam)

        g_new = g - (dt / eps) * averaging.project_mean(flux(e1, e2, h_half, dxi))
        rhs = (
            h
            - (dt / eps)
            * averaging.fluctuation(flux(e1, e2, 0.5 * (g_new + g)[None] + h_half, dxi))
            - lam * averaging.spectral_derivative(h)
        )
        h_new = averaging.solve_implicit_tau(rhs, lam)
        if not (np.all(np.isfinite(g_new)) and np.all(np.isfinite(h_new))):
            raise StabilityFailure("non-finite values in the micro-macro state; reduce dt")
        return g_new, h_new
