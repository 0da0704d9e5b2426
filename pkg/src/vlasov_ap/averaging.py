"""Spectral operators on the fast-angle torus.

Everything here acts along axis 0, which indexes a uniform even-length grid
on [0, 2*pi).  With L = d/dtau, the averaging machinery consists of the mean
projector Pi, its complement I - Pi, the pseudo-inverse L^{-1} (defined on
mean-free data, returning the unique mean-free primitive), and the resolvent
(I + lam*L)^{-1} used by the implicit part of the time steppers.

All operators are diagonal in Fourier:

    Pi        : keeps the k = 0 coefficient,
    L         : multiplies by i*k,
    L^{-1}    : divides by i*k (k != 0),
    resolvent : divides by 1 + i*lam*k.

The Nyquist bin of a real even-length signal is treated as the coefficient of
cos(k_max * tau).  Its derivative and its mean-free primitive vanish at every
node, and the resolvent acts on it by the real part of 1/(1 + i*lam*k_max),
which is what the exact nodal solution gives for a cos(k_max * tau) source.
"""
from __future__ import annotations

import numpy as np

from .errors import NonZeroMeanInput

# relative tolerance for "this input is mean-free"
MEAN_FREE_RTOL = 1e-12


def project_mean(g: np.ndarray):
    """Torus average Pi g = (1/2*pi) * integral of g over tau (exact for trig data)."""
    return np.asarray(g).mean(axis=0)


def fluctuation(g: np.ndarray) -> np.ndarray:
    """Mean-free part (I - Pi) g."""
    g = np.asarray(g)
    return g - g.mean(axis=0, keepdims=True)


def micro_macro_split(g: np.ndarray):
    """Return (Pi g, (I - Pi) g); the two parts sum back to g exactly."""
    g = np.asarray(g)
    mean = g.mean(axis=0)
    return mean, g - mean[None]


def _check_mean_free(g: np.ndarray):
    sup = np.abs(g).max() if g.size else 0.0
    mean_sup = np.abs(g.mean(axis=0)).max() if g.size else 0.0
    if mean_sup > MEAN_FREE_RTOL * sup:
        raise NonZeroMeanInput(
            f"input has tau-mean {mean_sup:.3e} (sup {sup:.3e}); apply fluctuation() first"
        )


def spectral_derivative(g: np.ndarray) -> np.ndarray:
    """d/dtau via FFT; the Nyquist mode has zero nodal derivative and is dropped."""
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    gh = np.fft.rfft(g, axis=0)
    k = np.arange(gh.shape[0]).reshape((-1,) + (1,) * (g.ndim - 1))
    gh = gh * (1j * k)
    gh[-1] = 0.0
    return np.fft.irfft(gh, n=n, axis=0)


def invert_derivative(g: np.ndarray) -> np.ndarray:
    """L^{-1} g: the unique mean-free primitive of a mean-free g.

    Raises NonZeroMeanInput when |Pi g| exceeds MEAN_FREE_RTOL * sup|g|.
    """
    g = np.asarray(g, dtype=float)
    _check_mean_free(g)
    n = g.shape[0]
    assert n % 2 == 0, "torus grid length must be even"
    gh = np.fft.rfft(g, axis=0)
    out = np.zeros_like(gh)
    k = np.arange(1, gh.shape[0] - 1).reshape((-1,) + (1,) * (g.ndim - 1))
    out[1:-1] = gh[1:-1] / (1j * k)
    # Nyquist: the mean-free primitive of cos(k_max tau) vanishes at the nodes
    out[-1] = 0.0
    return np.fft.irfft(out, n=n, axis=0)


def antiderivative_from_zero(g: np.ndarray) -> np.ndarray:
    """integral_0^tau g(s) ds for mean-free g; exactly zero at the tau = 0 node."""
    prim = invert_derivative(g)
    return prim - prim[0][None]


def solve_implicit_tau(rhs: np.ndarray, lam: float) -> np.ndarray:
    """Solve (I + lam * d/dtau) u = rhs for real rhs sampled on the torus grid.

    Fourier-diagonal: u_k = rhs_k / (1 + i*lam*k).  The k = 0 coefficient is
    left untouched for every lam, so the tau-mean of rhs is preserved exactly,
    and u -> Pi rhs as lam -> infinity.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    assert n % 2 == 0, "torus grid length must be even"
    if lam == 0.0:
        return rhs.copy()
    rh = np.fft.rfft(rhs, axis=0)
    k = np.arange(rh.shape[0]).reshape((-1,) + (1,) * (rhs.ndim - 1))
    out = rh / (1.0 + 1j * lam * k)
    # Nyquist carries cos(k_max tau): the nodal-exact symbol is Re 1/(1+i lam k)
    kmax = n // 2
    out[-1] = rh[-1].real / (1.0 + (lam * kmax) ** 2)
    return np.fft.irfft(out, n=n, axis=0)


def eval_at_tau(g: np.ndarray, tau_star: float) -> np.ndarray:
    """Trigonometric interpolation of nodal data at an arbitrary angle.

    Reproduces the stored samples exactly when tau_star is a grid node.  For
    3D input (n_tau, n, n) the interpolation runs per (i, j) pencil and the
    result has shape (n, n).
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    assert n % 2 == 0, "torus grid length must be even"
    gh = np.fft.rfft(g, axis=0)
    k = np.arange(1, gh.shape[0] - 1)
    phase = np.exp(1j * k * tau_star).reshape((-1,) + (1,) * (g.ndim - 1))
    val = gh[0].real + 2.0 * (gh[1:-1] * phase).real.sum(axis=0)
    val = val + gh[-1].real * np.cos((n // 2) * tau_star)
    return val / n
