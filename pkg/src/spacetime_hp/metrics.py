"""Error measurement and rate extraction.

The computable error surrogate is [v] = sqrt(||v||_L2(Q) * ||d_t v||_L2(Q)),
which dominates the fractional-in-time, L2-in-space error norm. Both L2(Q)
norms are evaluated element-wise in space and time; the first temporal
element gets special treatment when the exact solution carries a startup
singularity (power substitution) or is a stiff series (geometric composite
subdivision).
"""

from dataclasses import dataclass

import numpy as np

from .spatial_fem import SpatialQuadrature
from .temporal_hp import element_gauss_power
from .quadrature import gauss_legendre


def _first_element_geometric_edges(k1, pieces=8, ratio=4.0):
    edges = k1 * ratio ** np.arange(-(pieces - 1), 1, dtype=float)
    return np.concatenate([[0.0], edges])


def _temporal_nodes(mesh, j, n, prob):
    """Quadrature nodes/weights on temporal element j adapted to the exact
    solution's behavior near t = 0."""
    if j == 0 and prob is not None and prob.temporal_singularity:
        return element_gauss_power(mesh, j, max(32, n))
    if j == 0 and prob is not None and prob.series_truncation is not None:
        edges = _first_element_geometric_edges(mesh.element_lengths[0])
        rule = gauss_legendre(n)
        mid = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * np.diff(edges)
        t = (mid[:, None] + half[:, None] * rule.nodes[None, :]).ravel()
        w = (half[:, None] * rule.weights[None, :]).ravel()
        return t, w
    a, b = mesh.breakpoints[j], mesh.breakpoints[j + 1]
    rule = gauss_legendre(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes, 0.5 * (b - a) * rule.weights


def l2q_error_parts(sol, prob, quad_mult=1.0, temporal_extra=12, spatial_degree=6):
    """Squared L2(Q) norms of u - u_MN and of its time derivative."""
    basis = sol.basis
    mesh = basis.mesh
    quad = SpatialQuadrature(sol.spatial.mesh, degree=spatial_degree)
    val_sq = 0.0
    der_sq = 0.0
    for j in range(mesh.m):
        n = max(2, int((int(mesh.degrees[j]) + temporal_extra) * quad_mult))
        t_nodes, t_w = _temporal_nodes(mesh, j, n, prob)
        for t, wt in zip(t_nodes, t_w):
            fe = quad.fe_values(sol.nodal_at_time(t))
            dfe = quad.fe_values(sol.nodal_time_derivative(t))
            ev = fe - prob.u_exact(t, quad.points)
            ed = dfe - prob.du_dt_exact(t, quad.points)
            val_sq += wt * quad.l2_norm_sq(ev)
            der_sq += wt * quad.l2_norm_sq(ed)
    return val_sq, der_sq


def error_functional(sol, prob, quad_mult=1.0, temporal_extra=12, spatial_degree=6):
    """[u - u_MN] = sqrt(||e||_L2(Q) ||d_t e||_L2(Q))."""
    val_sq, der_sq = l2q_error_parts(sol, prob, quad_mult, temporal_extra, spatial_degree)
    return float((val_sq * der_sq) ** 0.25)


def functional_from_parts(val_sq, der_sq):
    return float((val_sq * der_sq) ** 0.25)


def temporal_error_functional(basis, coeffs, u, du, quad_mult=1.0, temporal_extra=12, singular_first=False):
    """The same surrogate for purely temporal functions (scalar IVP)."""
    from .temporal_hp import eval_coefficients

    mesh = basis.mesh
    val_sq = 0.0
    der_sq = 0.0
    for j in range(mesh.m):
        n = max(2, int((int(mesh.degrees[j]) + temporal_extra) * quad_mult))
        if j == 0 and singular_first:
            t, w = element_gauss_power(mesh, j, max(32, n))
        else:
            a, b = mesh.breakpoints[j], mesh.breakpoints[j + 1]
            rule = gauss_legendre(n)
            t = 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes
            w = 0.5 * (b - a) * rule.weights
        ev = eval_coefficients(basis, coeffs, t) - u(t)
        ed = eval_coefficients(basis, coeffs, t, derivative=1) - du(t)
        val_sq += np.dot(w, ev * ev)
        der_sq += np.dot(w, ed * ed)
    return float((val_sq * der_sq) ** 0.25)


@dataclass(frozen=True)
class StudyRecord:
    MN: int
    M: int
    N: int
    h_x: float
    k_max: float
    error: float
    wall_time: float = 0.0

    def __post_init__(self):
        if self.error < 0:
            raise ValueError("error must be nonnegative")
        if self.MN != self.M * self.N:
            raise ValueError(f"MN = {self.MN} inconsistent with M*N = {self.M * self.N}")

    @property
    def width(self):
        """Effective space-time mesh width (MN)^(-1/2) used for eoc."""
        return self.MN ** (-0.5)


def rates(errors, widths):
    """log(e_prev/e_cur) / log(h_prev/h_cur) for consecutive entries."""
    errors = np.asarray(errors, dtype=float)
    widths = np.asarray(widths, dtype=float)
    if np.any(errors == 0):
        raise ValueError("zero error: estimated order undefined")
    return list(np.log(errors[:-1] / errors[1:]) / np.log(widths[:-1] / widths[1:]))


def eoc(records):
    """Estimated orders of convergence against the effective space-time
    width; first entry has no predecessor and reports None."""
    if len(records) < 2:
        return [None] * len(records)
    vals = rates([r.error for r in records], [r.width for r in records])
    return [None] + vals


@dataclass(frozen=True)
class ExpFit:
    b: float
    residual: float
    ok: bool


EXP_FIT_RESIDUAL_THRESHOLD = 0.05


def exp_sqrt_fit(ms, errors):
    """Least squares of log(e) against sqrt(M): returns the decay rate b in
    e ~ exp(-b sqrt(M)) and the RMS residual of the fit."""
    x = np.sqrt(np.asarray(ms, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    A = np.column_stack([np.ones_like(x), -x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[1]), resid


def power_fit(xs, errors):
    """Least squares of log(e) against log(x): returns the algebraic rate r
    in e ~ x^(-r) and the RMS residual."""
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    A = np.column_stack([np.ones_like(x), -x])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[1]), resid


def exp_fit(records) -> ExpFit:
    """Exponential-decay diagnostic over records keyed by M."""
    if len(records) < 4:
        raise ValueError("need at least 4 records in the exponential regime")
    b, resid = exp_sqrt_fit([r.M for r in records], [r.error for r in records])
    return ExpFit(b=b, residual=resid, ok=resid <= EXP_FIT_RESIDUAL_THRESHOLD)


RECORD_HEADER = "MN\tM\tN\th_x\tk_max\terror\teoc\twall_time"


def emit_records(records):
    """Delimiter-separated study log with a fixed header."""
    lines = [RECORD_HEADER]
    for r, rate in zip(records, eoc(records)):
        rate_s = "-" if rate is None else f"{rate:.2f}"
        lines.append(
            f"{r.MN}\t{r.M}\t{r.N}\t{r.h_x:.5f}\t{r.k_max:.5f}\t{r.error:.3e}\t{rate_s}\t{r.wall_time:.3f}"
        )
    return "\n".join(lines) + "\n"
