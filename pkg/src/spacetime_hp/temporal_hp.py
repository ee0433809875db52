"""Temporal hp discretization: geometrically graded meshes with linearly
increasing polynomial degrees, Lobatto (integrated Legendre) shape functions,
and the quasi-interpolation operator used as a testing oracle.

The trial space consists of continuous piecewise polynomials on (0,T) that
vanish at t=0. Global DOF ordering: vertex DOFs at t_1..t_m first (by
breakpoint index), then per-element interior bubbles in increasing order.
"""

from dataclasses import dataclass, field
from math import floor

import numpy as np

from .quadrature import gauss_legendre, legendre_values


@dataclass(frozen=True)
class TemporalMeshSpec:
    """Parameters of the geometric temporal mesh.

    sigma is the geometric grading factor, mu_hp the degree slope, m1 the
    number of geometric elements on (0, T1) and m2 the number of uniform
    elements on (T1, T) with T1 = min(1, T). m2 is forced to 0 when T <= 1.
    """

    T: float
    sigma: float
    mu_hp: float
    m1: int
    m2: int = 0

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError(f"final time must be positive, got T={self.T}")
        if not 0.0 < self.sigma < 1.0:
            raise ValueError(f"grading parameter sigma must lie in (0,1), got {self.sigma}")
        if self.m1 <= 2:
            raise ValueError(f"m1 must be an integer > 2, got {self.m1}")
        if self.mu_hp < 1.0:
            raise ValueError(f"slope parameter mu_hp must be >= 1, got {self.mu_hp}")
        if self.m2 < 0:
            raise ValueError(f"m2 must be >= 0, got {self.m2}")
        if self.T <= 1.0 and self.m2 != 0:
            object.__setattr__(self, "m2", 0)
        if self.T > 1.0 and self.m2 == 0:
            raise ValueError(
                f"mesh would end at T1=1 != T={self.T}; m2 >= 1 is required for T > 1"
            )


@dataclass(frozen=True)
class TemporalMesh:
    """Partition 0 = t_0 < ... < t_m = T with per-element degrees p_1..p_m."""

    breakpoints: np.ndarray
    degrees: np.ndarray
    spec: TemporalMeshSpec | None = None

    @property
    def T(self):
        return float(self.breakpoints[-1])

    @property
    def T1(self):
        return min(1.0, self.T)

    @property
    def m(self):
        return len(self.degrees)

    @property
    def element_lengths(self):
        return np.diff(self.breakpoints)

    @property
    def k_max(self):
        return float(self.element_lengths.max())

    @property
    def num_dofs(self):
        """Dimension of the constrained space: M = sum_j p_j."""
        return int(self.degrees.sum())

    @classmethod
    def from_arrays(cls, breakpoints, degrees, spec=None):
        breakpoints = np.asarray(breakpoints, dtype=float)
        degrees = np.asarray(degrees, dtype=int)
        if breakpoints[0] != 0.0 or np.any(np.diff(breakpoints) <= 0):
            raise ValueError("breakpoints must satisfy 0 = t_0 < t_1 < ... < t_m")
        if len(degrees) != len(breakpoints) - 1 or np.any(degrees < 1):
            raise ValueError("need one degree >= 1 per element")
        breakpoints.setflags(write=False)
        degrees.setflags(write=False)
        return cls(breakpoints, degrees, spec)

    def format_table(self):
        lines = [f"{'j':>4} {'t_j':>22} {'k_j':>22} {'p_j':>4}"]
        k = self.element_lengths
        for j in range(1, self.m + 1):
            lines.append(
                f"{j:>4} {self.breakpoints[j]:>22.15e} {k[j-1]:>22.15e} {self.degrees[j-1]:>4}"
            )
        return "\n".join(lines)

    def signature(self):
        """Stable 64-bit hash of the mesh geometry, used in binary dump headers."""
        import hashlib

        h = hashlib.sha256()
        h.update(self.breakpoints.tobytes())
        h.update(self.degrees.astype(np.int64).tobytes())
        return int.from_bytes(h.digest()[:8], "little")


def build_mesh(spec: TemporalMeshSpec) -> TemporalMesh:
    """Geometric mesh with breakpoints T1*sigma^(m1-j), uniform beyond T1,
    and degrees p_1 = 1, p_j = floor(mu_hp*j)."""
    T1 = min(1.0, spec.T)
    t = np.zeros(spec.m1 + spec.m2 + 1)
    for j in range(1, spec.m1 + 1):
        t[j] = T1 * spec.sigma ** (spec.m1 - j)
    for j in range(spec.m1 + 1, spec.m1 + spec.m2 + 1):
        t[j] = T1 + (spec.T - T1) * (j - spec.m1) / spec.m2
    p = np.empty(spec.m1 + spec.m2, dtype=int)
    p[0] = 1
    for j in range(2, spec.m1 + 1):
        p[j - 1] = floor(spec.mu_hp * j)
    p[spec.m1 :] = floor(spec.mu_hp * spec.m1)
    return TemporalMesh.from_arrays(t, p, spec)


def uniform_mesh(T: float, m: int, p: int) -> TemporalMesh:
    """Equispaced mesh on (0,T) with constant degree p."""
    if m < 1 or p < 1:
        raise ValueError(f"need m >= 1 and p >= 1, got m={m}, p={p}")
    return TemporalMesh.from_arrays(np.linspace(0.0, T, m + 1), np.full(m, p, dtype=int))


def hp_condition_report(spec: TemporalMeshSpec, delta=1.0, eps=0.5):
    """Advisory check of the slope/tail-element parameter conditions for
    exponential convergence; returns a list of warning strings (may be empty).

    Deliberately not enforced: studies are allowed to run outside these
    conditions.
    """
    warnings = []
    bound = (1.0 - spec.sigma) * delta / (2.0 * spec.sigma ** ((3.0 + eps) / 2.0))
    if not spec.mu_hp > bound:
        warnings.append(
            f"slope parameter mu_hp={spec.mu_hp} does not exceed "
            f"(1-sigma)*delta/(2*sigma^((3+eps)/2)) = {bound:.6g} "
            f"(delta={delta}, eps={eps})"
        )
    if spec.T > 1.0:
        T1 = 1.0
        bound2 = (spec.T - T1) / 4.0 * delta * spec.sigma ** (
            -(1.0 + eps) / (2.0 * floor(spec.mu_hp))
        )
        if not spec.m2 > bound2:
            warnings.append(
                f"tail element count m2={spec.m2} does not exceed "
                f"(T-T1)/4*delta*sigma^(-(1+eps)/(2*floor(mu_hp))) = {bound2:.6g}"
            )
    return warnings


def lobatto_shapes(p, xi):
    """Values and xi-derivatives of the p+1 Lobatto shape functions on [-1,1].

    N_1 = (1-xi)/2, N_2 = (1+xi)/2, and bubbles N_l = int_{-1}^xi L_{l-2} for
    l >= 3, realized through (L_{l-1} - L_{l-3})/(2l-3); hence N_l' = L_{l-2}.
    Returns arrays of shape (p+1, len(xi)).
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    L = legendre_values(max(p, 1), xi)
    vals = np.empty((p + 1, xi.size))
    ders = np.empty((p + 1, xi.size))
    vals[0] = 0.5 * (1.0 - xi)
    vals[1] = 0.5 * (1.0 + xi)
    ders[0] = -0.5
    ders[1] = 0.5
    for ell in range(3, p + 2):
        vals[ell - 1] = (L[ell - 1] - L[ell - 3]) / (2 * ell - 3)
        ders[ell - 1] = L[ell - 2]
    return vals, ders


@dataclass(frozen=True)
class TemporalBasis:
    """Lobatto hierarchical basis on a temporal mesh.

    conn[j] holds the global DOF indices of the local shapes (N_1, N_2,
    bubbles) of element j; the vertex at t=0 carries index -1 and is excluded
    from the constrained space. conn_full numbers the same shapes in the
    unconstrained space (t=0 vertex first).
    """

    mesh: TemporalMesh
    conn: tuple = field(default=())
    conn_full: tuple = field(default=())

    def __post_init__(self):
        m = self.mesh.m
        p = self.mesh.degrees
        conn = []
        conn_full = []
        bubble = m  # constrained numbering: vertices t_1..t_m occupy 0..m-1
        for j in range(m):
            loc = [j - 1, j] + list(range(bubble, bubble + p[j] - 1))
            loc_full = [j, j + 1] + [g + m + 1 for g in range(bubble - m, bubble - m + p[j] - 1)]
            bubble += p[j] - 1
            conn.append(tuple(loc))
            conn_full.append(tuple(loc_full))
        object.__setattr__(self, "conn", tuple(conn))
        object.__setattr__(self, "conn_full", tuple(conn_full))

    @property
    def num_dofs(self):
        return self.mesh.num_dofs

    @property
    def num_dofs_full(self):
        return self.mesh.num_dofs + 1

    def element_of(self, t):
        """Index of the element containing t (right-continuous at breakpoints)."""
        bp = self.mesh.breakpoints
        j = int(np.searchsorted(bp, t, side="right")) - 1
        return min(max(j, 0), self.mesh.m - 1)

    def eval_element(self, j, t, derivative=0):
        """All local shape values (or t-derivatives) of element j at times t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        a, b = self.mesh.breakpoints[j], self.mesh.breakpoints[j + 1]
        xi = 2.0 * (t - a) / (b - a) - 1.0
        vals, ders = lobatto_shapes(self.mesh.degrees[j], xi)
        if derivative:
            return ders * (2.0 / (b - a))
        return vals

    def eval_all(self, t, derivative=0, constrained=True):
        """Vector of all basis function values at scalar time t."""
        n = self.num_dofs if constrained else self.num_dofs_full
        out = np.zeros(n)
        j = self.element_of(t)
        loc = self.eval_element(j, t, derivative)[:, 0]
        conn = self.conn[j] if constrained else self.conn_full[j]
        for k, g in enumerate(conn):
            if g >= 0:
                out[g] = loc[k]
        return out


def make_basis(mesh: TemporalMesh) -> TemporalBasis:
    return TemporalBasis(mesh)


def eval_basis(basis: TemporalBasis, global_dof: int, t, derivative=0):
    """Value (derivative=1: time derivative) of one global basis function;
    zero outside its support."""
    if not 0 <= global_dof < basis.num_dofs:
        raise IndexError(f"global dof {global_dof} out of range [0, {basis.num_dofs})")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t_arr)
    for j in range(basis.mesh.m):
        if global_dof in basis.conn[j]:
            k = basis.conn[j].index(global_dof)
            a, b = basis.mesh.breakpoints[j], basis.mesh.breakpoints[j + 1]
            inside = (t_arr >= a) & (t_arr <= b) if j == basis.mesh.m - 1 else (
                (t_arr >= a) & (t_arr < b)
            )
            if np.any(inside):
                out[inside] = basis.eval_element(j, t_arr[inside], derivative)[k]
    return out if np.ndim(t) else float(out[0])


def element_gauss(mesh: TemporalMesh, j, n):
    """Gauss points/weights on element j."""
    a, b = mesh.breakpoints[j], mesh.breakpoints[j + 1]
    rule = gauss_legendre(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * rule.nodes, 0.5 * (b - a) * rule.weights


def element_gauss_power(mesh: TemporalMesh, j, n, power=5):
    """Gauss rule on element j under the substitution t = a + k*tau^power,
    absorbing algebraic endpoint singularities at the left endpoint."""
    a, b = mesh.breakpoints[j], mesh.breakpoints[j + 1]
    k = b - a
    rule = gauss_legendre(n)
    tau = 0.5 * (rule.nodes + 1.0)
    t = a + k * tau**power
    w = 0.5 * rule.weights * k * power * tau ** (power - 1)
    return t, w


def quasi_interpolant(basis: TemporalBasis, v, dv, quad_order=None):
    """Coefficients of the temporal quasi-interpolant of v (with v(0) = 0).

    Vertex DOFs take the nodal values v(t_j); on each element the bubble
    coefficients are the Legendre coefficients of the L2 projection of v' onto
    degree p_j - 1, so the interpolant is nodally exact and its derivative is
    the element-wise L2 projection of v'. For p_1 = 1 the first element
    reduces to the linear interpolant v(t_1)*t/t_1.
    """
    mesh = basis.mesh

    def v_at(t):
        return float(np.atleast_1d(np.asarray(v(np.array([t]))))[0])

    if abs(v_at(0.0)) > 1e-12:
        raise ValueError("quasi-interpolant requires v(0) = 0")
    coeffs = np.zeros(basis.num_dofs)
    for j in range(mesh.m):
        coeffs[j] = v_at(mesh.breakpoints[j + 1])
    for j in range(mesh.m):
        p = int(mesh.degrees[j])
        if p < 2:
            continue
        n = quad_order or (2 * p + 8)
        a, b = mesh.breakpoints[j], mesh.breakpoints[j + 1]
        rule = gauss_legendre(n)
        xi = rule.nodes
        t = 0.5 * (a + b) + 0.5 * (b - a) * xi
        dv_ref = np.asarray(dv(t), dtype=float) * (0.5 * (b - a))  # derivative in xi units
        L = legendre_values(p - 1, xi)
        for ell in range(3, p + 2):
            k = ell - 2
            c = (2 * k + 1) / 2.0 * np.dot(rule.weights, dv_ref * L[k])
            coeffs[basis.conn[j][ell - 1]] = c
    return coeffs


def eval_coefficients(basis: TemporalBasis, coeffs, t, derivative=0, constrained=True):
    """Evaluate the function with the given coefficient vector at times t."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros_like(t_arr)
    conns = basis.conn if constrained else basis.conn_full
    for j in range(basis.mesh.m):
        a, b = basis.mesh.breakpoints[j], basis.mesh.breakpoints[j + 1]
        inside = (t_arr >= a) & (t_arr <= b) if j == basis.mesh.m - 1 else (
            (t_arr >= a) & (t_arr < b)
        )
        if not np.any(inside):
            continue
        loc = basis.eval_element(j, t_arr[inside], derivative)
        acc = np.zeros(inside.sum())
        for k, g in enumerate(conns[j]):
            if g >= 0:
                acc += coeffs[g] * loc[k]
        out[inside] = acc
    return out if np.ndim(t) else float(out[0])


def temporal_mass(basis: TemporalBasis, constrained=True):
    """Plain temporal mass matrix (no Hilbert transform) of the chosen space."""
    n = basis.num_dofs if constrained else basis.num_dofs_full
    out = np.zeros((n, n))
    conns = basis.conn if constrained else basis.conn_full
    for j in range(basis.mesh.m):
        p = int(basis.mesh.degrees[j])
        k = basis.mesh.element_lengths[j]
        rule = gauss_legendre(p + 2)
        vals, _ = lobatto_shapes(p, rule.nodes)
        local = (vals * rule.weights) @ vals.T * (k / 2.0)
        gids = conns[j]
        for a, ga in enumerate(gids):
            if ga < 0:
                continue
            for b, gb in enumerate(gids):
                if gb >= 0:
                    out[ga, gb] += local[a, b]
    return out


def temporal_moments(basis: TemporalBasis, f, constrained=False, extra_order=8, singular_first_element=False):
    """Moments int f(t) phi_l(t) dt of all basis functions.

    With singular_first_element the first element uses the t = k*tau^5
    substitution (integrable algebraic singularities of f at t=0).
    """
    n = basis.num_dofs if constrained else basis.num_dofs_full
    out = np.zeros(n)
    conns = basis.conn if constrained else basis.conn_full
    for j in range(basis.mesh.m):
        p = int(basis.mesh.degrees[j])
        if j == 0 and singular_first_element:
            t, w = element_gauss_power(basis.mesh, j, max(32, p + extra_order))
        else:
            t, w = element_gauss(basis.mesh, j, p + extra_order)
        vals = basis.eval_element(j, t)
        fw = np.asarray(f(t), dtype=float) * w
        local = vals @ fw
        for a, ga in enumerate(conns[j]):
            if ga >= 0:
                out[ga] += local[a]
    return out
