"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line
with the measured quantities (run with -s or check captured output).

Criterion 7's rate thresholds are asserted unchanged even though the reduced
desk-scale windows cannot reach them (see the analysis comment in that test);
an honest failure there is the expected outcome.
"""

import time

import numpy as np
import pytest

from spacetime_hp.cli import StudyConfig, parse_config, run_study, write_outputs
from spacetime_hp.fractional_norms import (
    FourierExpansion,
    check_interpolation_inequality,
    check_poincare,
    ellipticity_pairing_fourier,
    eval_expansion,
    h12_norm_fourier,
    ht_matrix_oracle,
)
from spacetime_hp.hilbert import assemble
from spacetime_hp.metrics import (
    eoc,
    error_functional,
    exp_fit,
    power_fit,
    temporal_error_functional,
)
from spacetime_hp.quadrature import gauss_legendre, log_weighted_rule, triangle_rule
from spacetime_hp.solver import solve, solve_parametric_ivp
from spacetime_hp.spatial_fem import (
    SpatialMesh2D,
    assemble_spatial,
    lshape_mesh,
    refine_edges,
    refine_uniform,
    uniform_interval_mesh,
)
from spacetime_hp.temporal_hp import (
    TemporalMesh,
    make_basis,
    quasi_interpolant,
    uniform_mesh,
)

REFERENCE_ERRORS = [7.330e-02, 3.423e-02, 1.355e-02, 5.396e-03, 2.267e-03, 9.531e-04]
REFERENCE_EOC = [None, 0.99, 1.27, 1.30, 1.24, 1.24]


def _report(criterion, passed, detail):
    print(f"\nACCEPTANCE {criterion}: {'PASS' if passed else 'FAIL'} - {detail}")


@pytest.fixture(scope="module")
def u1_uniform_records():
    cfg = StudyConfig(problem="u1", levels=7, strategy="auto", temporal_scheme="uniform",
                      temporal_p=1, temporal_m0=4, spatial_scheme="uniform",
                      initial_elements=4)
    records, failures = run_study(cfg, log=lambda *a, **k: None)
    assert failures == []
    return records


@pytest.fixture(scope="module")
def u1_hp_records():
    cfg = StudyConfig(problem="u1", levels=6, strategy="auto", temporal_scheme="hp",
                      sigma=0.31, mu_hp=2.0, m1_factor=1.4, m2=1,
                      spatial_scheme="uniform", initial_elements=16)
    records, failures = run_study(cfg, log=lambda *a, **k: None)
    assert failures == []
    return records


def test_criterion_1_table_reproduction(u1_uniform_records):
    t0 = time.perf_counter()
    records = u1_uniform_records[:6]
    errs = [r.error for r in records]
    rel = [abs(e - p) / p for e, p in zip(errs, REFERENCE_ERRORS)]
    rates = eoc(records)
    eoc_dev = [abs(r - p) for r, p in zip(rates[1:], REFERENCE_EOC[1:])]
    passed = max(rel) <= 0.01 and max(eoc_dev) <= 0.03 and abs(rates[-1] - 1.25) <= 0.03
    _report(
        1,
        passed,
        f"six uniform levels: max error deviation {max(rel):.2%} (tol 1%), "
        f"max eoc deviation {max(eoc_dev):.3f} (tol 0.03), last eoc {rates[-1]:.2f} "
        f"[{time.perf_counter() - t0:.0f}s]",
    )
    assert max(rel) <= 0.01
    assert max(eoc_dev) <= 0.03
    assert abs(rates[-1] - 1.25) <= 0.03


def test_criterion_2_hp_exponential_convergence(u1_hp_records, u1_uniform_records):
    t0 = time.perf_counter()
    errs = np.array([r.error for r in u1_hp_records])
    monotone = bool(np.all(np.diff(errs) < 0))
    fit = exp_fit(u1_hp_records)
    _, alg_resid = power_fit([r.M for r in u1_hp_records], errs)
    below = []
    log_mn_u = np.log([r.MN for r in u1_uniform_records])
    log_e_u = np.log([r.error for r in u1_uniform_records])
    for r in u1_hp_records[2:]:  # from the third level onward
        ref = np.exp(np.interp(np.log(r.MN), log_mn_u, log_e_u))
        below.append(r.error < ref)
    passed = monotone and fit.b > 0 and fit.residual < alg_resid and all(below)
    _report(
        2,
        passed,
        f"hp errors monotone={monotone}, exp fit b={fit.b:.2f} "
        f"(residual {fit.residual:.3f} vs algebraic {alg_resid:.3f}), "
        f"below uniform curve at equal MN from level 3 on: {below} "
        f"[{time.perf_counter() - t0:.0f}s]",
    )
    assert monotone
    assert fit.b > 0
    assert fit.residual < alg_resid
    assert all(below)


ORACLE_MESHES = [
    uniform_mesh(2.0, 2, 3),
    TemporalMesh.from_arrays([0.0, 0.4, 1.1, 2.0], [1, 2, 3]),
    TemporalMesh.from_arrays([0.0, 0.3, 0.8, 1.4, 2.0], [2, 4, 3, 6]),
]


def test_criterion_3_transform_matrix_oracle():
    t0 = time.perf_counter()
    worst_entry = 0.0
    worst_sym = 0.0
    for mesh in ORACLE_MESHES:
        basis = make_basis(mesh)
        tm = assemble(basis)
        Mo, Ao = ht_matrix_oracle(basis, K=4096)
        worst_entry = max(worst_entry, np.abs(tm.M_ht - Mo).max(), np.abs(tm.A_ht - Ao).max())
        worst_sym = max(worst_sym, np.abs(tm.A_ht - tm.A_ht.T).max() / np.abs(tm.A_ht).max())
        np.linalg.cholesky(0.5 * (tm.A_ht + tm.A_ht.T))
    passed = worst_entry < 1e-6 and worst_sym < 1e-9
    _report(
        3,
        passed,
        f"meshes m in (2,3,4), degrees to 6: max entry deviation {worst_entry:.2e} "
        f"(tol 1e-6), stiffness asymmetry {worst_sym:.1e} (tol 1e-9), SPD ok "
        f"[{time.perf_counter() - t0:.0f}s]",
    )
    assert worst_entry < 1e-6
    assert worst_sym < 1e-9


def test_criterion_4_fractional_norm_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    T = 2.0
    # Fourier-side ellipticity on 50 random truncated expansions
    worst_fourier = 0.0
    for _ in range(50):
        exp = FourierExpansion((0.0, T), rng.standard_normal(8))
        lhs = ellipticity_pairing_fourier(exp)
        rhs = h12_norm_fourier(exp) ** 2
        worst_fourier = max(worst_fourier, abs(lhs - rhs) / max(rhs, 1e-30))
    # matrix side: smooth expansions interpolated into a discrete space
    basis = make_basis(uniform_mesh(T, 3, 16))
    tm = assemble(basis)
    worst_matrix = 0.0
    for _ in range(50):
        exp = FourierExpansion((0.0, T), rng.standard_normal(5))
        x = quasi_interpolant(
            basis, lambda t: eval_expansion(exp, t), lambda t: eval_expansion(exp, t, derivative=1)
        )
        worst_matrix = max(worst_matrix, abs(x @ tm.A_ht @ x - h12_norm_fourier(exp) ** 2))
    # Poincare sharpness for the lowest mode
    sharp = check_poincare([FourierExpansion((0.0, T), np.array([1.0]))])
    poincare_dev = np.abs(sharp - 1.0).max()
    # interpolation inequality on 100 random expansions
    interp_ok = all(
        check_interpolation_inequality(FourierExpansion((0.0, T), rng.standard_normal(10)))
        for _ in range(100)
    )
    passed = (
        worst_fourier < 1e-11 and worst_matrix < 1e-6 and poincare_dev < 1e-10 and interp_ok
    )
    _report(
        4,
        passed,
        f"ellipticity identity: fourier dev {worst_fourier:.1e} (tol 1e-11), "
        f"matrix dev {worst_matrix:.1e} (tol 1e-6); lowest-mode sharpness dev "
        f"{poincare_dev:.1e} (tol 1e-10); interpolation inequality 100/100={interp_ok} "
        f"[{time.perf_counter() - t0:.0f}s]",
    )
    assert worst_fourier < 1e-11
    assert worst_matrix < 1e-6
    assert poincare_dev < 1e-10
    assert interp_ok


def test_criterion_5_parametric_ivp_p_convergence():
    t0 = time.perf_counter()
    u = lambda t: 1.0 - np.exp(-t)
    du = lambda t: np.exp(-t)
    errors = {}
    for p in range(2, 17, 2):
        basis = make_basis(uniform_mesh(2.0, 1, p))
        tm = assemble(basis)
        coeffs = solve_parametric_ivp(1.0, lambda t: np.ones_like(t), basis, tm)
        errors[p] = temporal_error_functional(basis, coeffs, u, du)
    target_p = next((p for p in sorted(errors) if errors[p] < 1e-8), None)
    ratios = [errors[p + 2] / errors[p] for p in range(2, (target_p or 16) - 1, 2)]
    passed = target_p is not None and target_p <= 16 and all(r < 0.75 for r in ratios)
    _report(
        5,
        passed,
        f"single-element p refinement: error {errors[16]:.1e} at p=16 "
        f"(below 1e-8 from p={target_p}), even-p ratios {['%.1e' % r for r in ratios]} "
        f"[{time.perf_counter() - t0:.0f}s]",
    )
    assert target_p is not None and target_p <= 16
    assert all(r < 0.75 for r in ratios)


def _study_rate(problem, temporal_scheme, spatial_scheme, **kw):
    cfg = StudyConfig(
        problem=problem,
        levels=4,
        strategy="auto",
        temporal_scheme=temporal_scheme,
        spatial_scheme=spatial_scheme,
        initial_level=2,
        beta=0.6,
        radius=0.25,
        **kw,
    )
    records, failures = run_study(cfg, log=lambda *a, **k: None)
    assert failures == []
    rate, _ = power_fit([r.MN for r in records], [r.error for r in records])
    return rate, records


def test_criterion_6_u2_graded_mesh_rates():
    t0 = time.perf_counter()
    rate_graded, _ = _study_rate("u2", "p", "graded", temporal_m=4)
    rate_uniform, _ = _study_rate("u2", "uniform", "uniform", temporal_p=1, temporal_m0=4)
    passed = rate_graded >= 0.60 and rate_uniform <= 0.55
    _report(
        6,
        passed,
        f"u2 fitted rates in MN over 4 levels: graded+p {rate_graded:.3f} (need >= 0.60), "
        f"uniform space-time {rate_uniform:.3f} (need <= 0.55) "
        f"[{time.perf_counter() - t0:.0f}s]",
    )
    assert rate_graded >= 0.60
    assert rate_uniform <= 0.55


def test_criterion_7_u3_hp_rates():
    # NOTE: expected to fail at desk scale. The first temporal element is
    # always linear, so the time-derivative energy of the t^(3/5) startup
    # decays only like sigma^(m1/10); that caps the reachable fitted slope
    # near 0.48-0.56 for every level window fitting this test's runtime.
    # The thresholds below hold only in the asymptotic regime (MN >~ 1e7)
    # and are asserted unchanged rather than recalibrated.
    t0 = time.perf_counter()
    rate_hp, _ = _study_rate(
        "u3", "hp", "graded", sigma=0.17, mu_hp=1.0, m1_factor=2.2, m2=1
    )
    rate_uniform_t, _ = _study_rate("u3", "uniform", "graded", temporal_p=1, temporal_m0=4)
    passed = rate_hp >= 0.60 and rate_uniform_t <= 0.25
    _report(
        7,
        passed,
        f"u3 fitted rates in MN over 4 levels: hp+graded {rate_hp:.3f} (need >= 0.60), "
        f"uniform-in-time P1 {rate_uniform_t:.3f} (need <= 0.25) "
        f"[{time.perf_counter() - t0:.0f}s]",
    )
    assert rate_hp >= 0.60
    assert rate_uniform_t <= 0.25


def test_criterion_8_solver_cross_validation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    cases = [
        (uniform_mesh(2.0, 8, 5), 120),   # M = 40
        (uniform_mesh(2.0, 4, 2), 500),   # N = 500
        (uniform_mesh(2.0, 4, 4), 63),
        (uniform_mesh(2.0, 3, 3), 200),
        (TemporalMesh.from_arrays([0.0, 0.2, 0.7, 2.0], [2, 4, 6]), 150),
        (uniform_mesh(2.0, 6, 2), 333),
        (uniform_mesh(2.0, 10, 4), 50),
        (uniform_mesh(2.0, 1, 5), 400),
        (TemporalMesh.from_arrays([0.0, 0.1, 0.5, 1.2, 2.0], [3, 7, 9, 9]), 77),
        (uniform_mesh(2.0, 4, 4), 250),
    ]
    worst = 0.0
    for mesh_t, nx in cases:
        basis = make_basis(mesh_t)
        tm = assemble(basis)
        sx = assemble_spatial(uniform_interval_mesh((0, 1), nx + 1))
        assert sx.N == nx
        G = rng.standard_normal((basis.num_dofs, sx.N))
        dense = solve(tm, sx, G, strategy="dense", basis=basis)
        bs = solve(tm, sx, G, strategy="bartels-stewart", basis=basis)
        dev = np.abs(dense.coefficients - bs.coefficients).max() / np.abs(
            dense.coefficients
        ).max()
        worst = max(worst, dev)
    passed = worst < 1e-8
    _report(
        8,
        passed,
        f"10 random problems up to (M,N)=(40,500): max relative deviation {worst:.1e} "
        f"(tol 1e-8) [{time.perf_counter() - t0:.0f}s]",
    )
    assert worst < 1e-8


def test_criterion_9_property_suites(tmp_path):
    t0 = time.perf_counter()
    checks = {}
    # quadrature exactness
    g = gauss_legendre(6)
    checks["gauss exactness"] = all(
        abs(np.dot(g.weights, g.nodes**d) - (2.0 / (d + 1) if d % 2 == 0 else 0.0)) < 1e-12
        for d in range(12)
    )
    lr = log_weighted_rule(10)
    checks["log-rule exactness"] = all(
        abs(np.dot(lr.weights, lr.nodes**d) + 1.0 / (d + 1) ** 2) < 1e-12 for d in range(20)
    )
    checks["triangle measure"] = abs(triangle_rule(7).weights.sum() - 0.5) < 1e-13
    # element goldens
    tri = SpatialMesh2D(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]))
    sys_tri = assemble_spatial(tri, dirichlet=np.zeros(3, dtype=bool))
    checks["element goldens"] = np.allclose(
        sys_tri.A_x.toarray(), [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]]
    ) and np.allclose(sys_tri.M_x.toarray(), (np.ones((3, 3)) + np.eye(3)) / 24.0)
    # patch test
    mesh = refine_uniform(lshape_mesh())
    sys2 = assemble_spatial(mesh)
    lin = 0.3 * mesh.vertices[:, 0] - 0.7 * mesh.vertices[:, 1]
    checks["patch test"] = np.abs((sys2.A_full @ lin)[sys2.interior]).max() < 1e-12
    # NVB conformity and shape regularity
    ref = refine_edges(mesh, np.arange(0, mesh.num_triangles, 3))
    t = ref.triangles
    edges = np.sort(np.vstack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]]), axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    checks["nvb conformity"] = set(counts.tolist()) <= {1, 2}
    checks["nvb shape regularity"] = ref.min_angle() >= 0.5 * lshape_mesh().min_angle()
    # homogeneity of the error surrogate (power-of-two scaling is exact)
    basis = make_basis(uniform_mesh(2.0, 2, 1))
    sx = assemble_spatial(uniform_interval_mesh((0, 1), 8))
    sol = solve(tm=assemble(basis), sx=sx, G=np.zeros((basis.num_dofs, sx.N)),
                strategy="dense", basis=basis)
    from spacetime_hp.problems import ManufacturedProblem

    mk = lambda c: ManufacturedProblem(
        name="h", dimension=1, T=2.0,
        g=lambda t, x: np.zeros_like(x),
        u_exact=lambda t, x: c * t * np.sin(np.pi * x),
        du_dt_exact=lambda t, x: c * np.sin(np.pi * x),
    )
    checks["functional homogeneity"] = error_functional(sol, mk(2.0)) == 2.0 * error_functional(
        sol, mk(1.0)
    )
    # CLI determinism: identical config -> bit-identical table and plot data
    cfg = parse_config(
        "[study]\nproblem = u1\nlevels = 2\n\n[temporal]\nscheme = uniform\np = 1\nm0 = 4\n"
        "\n[spatial]\nscheme = uniform\ninitial_elements = 4\n"
    )
    from dataclasses import replace

    ra, _ = run_study(cfg, log=lambda *a, **k: None)
    rb, _ = run_study(cfg, log=lambda *a, **k: None)
    write_outputs(replace(cfg, out=str(tmp_path / "a")), ra)
    write_outputs(replace(cfg, out=str(tmp_path / "b")), rb)
    checks["cli determinism"] = all(
        (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()
        for n in ("table.txt", "series.dat")
    )
    passed = all(checks.values())
    failing = [k for k, v in checks.items() if not v]
    _report(
        9,
        passed,
        f"{len(checks)} property groups, failing: {failing or 'none'} "
        f"[{time.perf_counter() - t0:.0f}s]",
    )
    assert passed, failing
