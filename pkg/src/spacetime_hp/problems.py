"""Manufactured problems for the heat equation on (0,T) x D with homogeneous
Dirichlet and initial conditions: a Fourier-series solution on the unit
interval driven by constant forcing, and two corner-singular solutions on the
L-shaped domain (one smooth in time, one with a t^(3/5) startup singularity).

Forcings are closed-form: the corner factor r^(2/3) sin((2/3)(theta - pi/2))
is harmonic, so the Laplacian of the cutoff solution reduces to cutoff
derivatives, and the smooth part differentiates termwise.
"""

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ManufacturedProblem:
    name: str
    dimension: int
    T: float
    g: Callable
    u_exact: Callable
    du_dt_exact: Callable
    series_truncation: int | None = None
    temporal_singularity: bool = False

    def domain_interval(self):
        if self.dimension != 1:
            raise ValueError("not an interval problem")
        return (0.0, 1.0)


def problem_u1(truncation=1000) -> ManufacturedProblem:
    """Constant forcing on (0,2) x (0,1); the solution is an odd-mode sine
    series truncated for evaluation (default 1000 terms)."""
    if truncation < 1:
        raise ValueError("truncation must be >= 1")
    eta = np.arange(1, truncation + 1)
    m = 2 * eta - 1  # odd mode numbers
    lam = np.pi**2 * m.astype(float) ** 2
    amp_u = 4.0 / (np.pi**3 * m.astype(float) ** 3)
    amp_du = 4.0 / (np.pi * m.astype(float))
    cache = {}

    def _sines(x):
        key = (x.shape, x.tobytes()[:64], float(x[0]), float(x[-1]), float(x.sum()))
        hit = cache.get("key") == key
        if not hit:
            cache["key"] = key
            cache["S"] = np.sin(np.pi * np.outer(np.asarray(x, float), m))
        return cache["S"]

    def u_exact(t, x):
        x = np.asarray(x, dtype=float)
        decay = np.exp(-lam * t)
        return _sines(x) @ (amp_u * (1.0 - decay))

    def du_dt(t, x):
        x = np.asarray(x, dtype=float)
        decay = np.exp(-lam * t)
        return _sines(x) @ (amp_du * decay)

    def g(t, x):
        return np.ones_like(np.asarray(x, dtype=float))

    return ManufacturedProblem(
        name="u1",
        dimension=1,
        T=2.0,
        g=g,
        u_exact=u_exact,
        du_dt_exact=du_dt,
        series_truncation=truncation,
    )


# --- L-shape ingredients ------------------------------------------------------


def cutoff(r):
    """C^2 radial cutoff: 1 inside r=1/4, quintic blend, 0 outside r=3/4."""
    r = np.asarray(r, dtype=float)
    mid = (
        27.0 / 8.0
        - 135.0 / 4.0 * r
        + 180.0 * r**2
        - 440.0 * r**3
        + 480.0 * r**4
        - 192.0 * r**5
    )
    return np.where(r <= 0.25, 1.0, np.where(r <= 0.75, mid, 0.0))


def cutoff_d1(r):
    r = np.asarray(r, dtype=float)
    mid = -135.0 / 4.0 + 360.0 * r - 1320.0 * r**2 + 1920.0 * r**3 - 960.0 * r**4
    return np.where((r > 0.25) & (r <= 0.75), mid, 0.0)


def cutoff_d2(r):
    r = np.asarray(r, dtype=float)
    mid = 360.0 - 2640.0 * r + 5760.0 * r**2 - 3840.0 * r**3
    return np.where((r > 0.25) & (r <= 0.75), mid, 0.0)


def _polar(xy):
    xy = np.asarray(xy, dtype=float)
    r = np.hypot(xy[..., 0], xy[..., 1])
    theta = np.arctan2(xy[..., 1], xy[..., 0])
    theta = np.where(theta <= 0.0, theta + 2.0 * np.pi, theta)  # branch (0, 2pi]
    return r, theta


def corner_singular(xy):
    """Harmonic corner factor r^(2/3) sin((2/3)(theta - pi/2)); zero at the
    origin and on both Dirichlet legs of the reentrant corner."""
    r, theta = _polar(xy)
    ang = np.sin(2.0 / 3.0 * (theta - np.pi / 2.0))
    with np.errstate(invalid="ignore"):
        out = np.where(r > 0.0, r ** (2.0 / 3.0) * ang, 0.0)
    return out


def _laplacian_cutoff_times_singular(xy):
    """Laplacian of eta(r) * S(xy); S harmonic, so only cutoff terms remain,
    all supported in the blending annulus."""
    r, theta = _polar(xy)
    ang = np.sin(2.0 / 3.0 * (theta - np.pi / 2.0))
    d1 = cutoff_d1(r)
    d2 = cutoff_d2(r)
    active = d1 != 0.0
    rr = np.where(active, r, 1.0)
    S = np.where(active, rr ** (2.0 / 3.0) * ang, 0.0)
    dS_dr = np.where(active, 2.0 / 3.0 * rr ** (-1.0 / 3.0) * ang, 0.0)
    lap_eta = np.where(active, d2 + d1 / rr, 0.0)
    return S * lap_eta + 2.0 * d1 * dS_dr


_REG_SCALE = 1.0 / 100.0


def _reg_factors(t, xy):
    x1 = xy[..., 0]
    x2 = xy[..., 1]
    q1 = x1 - 0.25
    q2 = x2 + 0.25
    s1, c1 = np.sin(np.pi * x1), np.cos(np.pi * x1)
    s2, c2 = np.sin(np.pi * x2), np.cos(np.pi * x2)
    E = np.exp(-t * (q1**2 + q2**2))
    return x1, x2, q1, q2, s1, c1, s2, c2, E


def u_reg(t, xy):
    xy = np.asarray(xy, dtype=float)
    _, _, _, _, s1, _, s2, _, E = _reg_factors(t, xy)
    return _REG_SCALE * t * s1 * s2 * E


def du_reg_dt(t, xy):
    xy = np.asarray(xy, dtype=float)
    _, _, q1, q2, s1, _, s2, _, E = _reg_factors(t, xy)
    return _REG_SCALE * s1 * s2 * E * (1.0 - t * (q1**2 + q2**2))


def laplace_u_reg(t, xy):
    xy = np.asarray(xy, dtype=float)
    _, _, q1, q2, s1, c1, s2, c2, E = _reg_factors(t, xy)
    # (sin(pi x) e^{-t q^2})'' = (-pi^2 s - 2 t s - 4 pi t q c + 4 t^2 q^2 s) e^{-t q^2}
    f1 = s1
    f2 = s2
    f1xx = -np.pi**2 * s1 - 2.0 * t * s1 - 4.0 * np.pi * t * q1 * c1 + 4.0 * t**2 * q1**2 * s1
    f2yy = -np.pi**2 * s2 - 2.0 * t * s2 - 4.0 * np.pi * t * q2 * c2 + 4.0 * t**2 * q2**2 * s2
    return _REG_SCALE * t * E * (f1xx * f2 + f1 * f2yy)


def _lshape_problem(name, tau, dtau, temporal_singularity):
    def u_exact(t, xy):
        xy = np.asarray(xy, dtype=float)
        r, _ = _polar(xy)
        return u_reg(t, xy) + tau(t) * cutoff(r) * corner_singular(xy)

    def du_dt(t, xy):
        xy = np.asarray(xy, dtype=float)
        r, _ = _polar(xy)
        return du_reg_dt(t, xy) + dtau(t) * cutoff(r) * corner_singular(xy)

    def g(t, xy):
        xy = np.asarray(xy, dtype=float)
        r, _ = _polar(xy)
        sing = dtau(t) * cutoff(r) * corner_singular(xy) - tau(t) * _laplacian_cutoff_times_singular(xy)
        return du_reg_dt(t, xy) - laplace_u_reg(t, xy) + sing

    return ManufacturedProblem(
        name=name,
        dimension=2,
        T=2.0,
        g=g,
        u_exact=u_exact,
        du_dt_exact=du_dt,
        temporal_singularity=temporal_singularity,
    )


def problem_u2() -> ManufacturedProblem:
    """Smooth in time, corner-singular in space."""
    tau = lambda t: t * np.exp(-t)
    dtau = lambda t: (1.0 - t) * np.exp(-t)
    return _lshape_problem("u2", tau, dtau, temporal_singularity=False)


def problem_u3() -> ManufacturedProblem:
    """Corner-singular in space with a t^(3/5) startup singularity; the time
    derivative blows up like t^(-2/5) and rejects evaluation at t=0."""

    def tau(t):
        return t**0.6 * np.exp(-t)

    def dtau(t):
        if np.any(np.asarray(t) == 0.0):
            raise ValueError("time derivative is singular at t = 0")
        return np.exp(-t) * (0.6 * t ** (-0.4) - t**0.6)

    return _lshape_problem("u3", tau, dtau, temporal_singularity=True)


PROBLEMS = {"u1": problem_u1, "u2": problem_u2, "u3": problem_u3}


def get_problem(name, **kwargs) -> ManufacturedProblem:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; available: {sorted(PROBLEMS)}") from None
    return factory(**kwargs)
