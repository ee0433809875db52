"""Convergence-study runner.

Reads an INI-style config describing a manufactured problem, a temporal
scheme (uniform low order, p-refinement on a fixed mesh, or geometric hp) and
a spatial scheme (uniform or corner-graded refinement), runs a sweep of
levels, and writes a study table plus two-column (MN, error) plot data.

Exit codes: 0 full success, 2 partial failure (some level skipped or failed),
1 config error.
"""

import argparse
import configparser
import sys
import time
from dataclasses import dataclass, replace
from math import floor, log
from pathlib import Path

import numpy as np

from .hilbert import assemble
from .metrics import StudyRecord, emit_records, eoc, error_functional
from .problems import PROBLEMS, get_problem
from .solver import DENSE_LIMIT, solve_heat
from .spatial_fem import (
    assemble_spatial,
    export_mesh,
    lshape_mesh,
    refine_graded,
    refine_uniform,
    uniform_interval_mesh,
)
from .temporal_hp import TemporalMeshSpec, build_mesh, make_basis, uniform_mesh

MEMORY_GUARD = 20_000_000


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class StudyConfig:
    problem: str
    levels: int = 4
    strategy: str = "auto"
    out: str | None = None
    temporal_scheme: str = "uniform"
    temporal_p: int = 1
    temporal_m0: int = 4
    temporal_m: int = 4
    sigma: float = 0.31
    mu_hp: float = 2.0
    m1_factor: float = 1.4
    m2: int = 1
    spatial_scheme: str = "uniform"
    initial_elements: int = 4
    initial_level: int = 1
    beta: float = 0.6
    radius: float = 0.25
    export_meshes: bool = False

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(
                f"[study] problem: unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}"
            )
        if self.levels < 1:
            raise ConfigError("[study] levels: need at least 1 level")
        if self.strategy not in ("auto", "dense", "bartels-stewart"):
            raise ConfigError(f"[study] strategy: unknown strategy {self.strategy!r}")
        if self.temporal_scheme not in ("uniform", "p", "hp"):
            raise ConfigError(
                f"[temporal] scheme: unknown scheme {self.temporal_scheme!r} (uniform|p|hp)"
            )
        if self.temporal_scheme == "hp" and not 0.0 < self.sigma < 1.0:
            raise ConfigError(
                f"[temporal] sigma: grading parameter must satisfy sigma in (0,1), got {self.sigma}"
            )
        if self.temporal_scheme == "hp" and self.mu_hp < 1.0:
            raise ConfigError(f"[temporal] mu_hp: slope parameter must be >= 1, got {self.mu_hp}")
        if self.spatial_scheme not in ("uniform", "graded"):
            raise ConfigError(
                f"[spatial] scheme: unknown scheme {self.spatial_scheme!r} (uniform|graded)"
            )
        if self.spatial_scheme == "graded" and not 0.0 < self.beta <= 1.0:
            raise ConfigError(
                f"[spatial] beta: grading parameter must satisfy beta in (0,1], got {self.beta}"
            )

    def to_text(self):
        lines = [
            "[study]",
            f"problem = {self.problem}",
            f"levels = {self.levels}",
            f"strategy = {self.strategy}",
        ]
        if self.out:
            lines.append(f"out = {self.out}")
        lines += ["", "[temporal]", f"scheme = {self.temporal_scheme}"]
        if self.temporal_scheme == "uniform":
            lines += [f"p = {self.temporal_p}", f"m0 = {self.temporal_m0}"]
        elif self.temporal_scheme == "p":
            lines += [f"m = {self.temporal_m}"]
        else:
            lines += [
                f"sigma = {self.sigma}",
                f"mu_hp = {self.mu_hp}",
                f"m1_factor = {self.m1_factor}",
                f"m2 = {self.m2}",
            ]
        lines += ["", "[spatial]", f"scheme = {self.spatial_scheme}"]
        lines += [f"initial_elements = {self.initial_elements}", f"initial_level = {self.initial_level}"]
        if self.spatial_scheme == "graded":
            lines += [f"beta = {self.beta}", f"radius = {self.radius}"]
        if self.export_meshes:
            lines += ["export_meshes = true"]
        return "\n".join(lines) + "\n"


def _get(parser, section, key, cast, default):
    if not parser.has_option(section, key):
        return default
    raw = parser.get(section, key)
    try:
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {cast.__name__}") from None


def parse_config(text) -> StudyConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    if not parser.has_section("study") or not parser.has_option("study", "problem"):
        raise ConfigError("[study] problem: required field missing")
    return StudyConfig(
        problem=parser.get("study", "problem").strip(),
        levels=_get(parser, "study", "levels", int, 4),
        strategy=_get(parser, "study", "strategy", str, "auto").strip(),
        out=_get(parser, "study", "out", str, None),
        temporal_scheme=_get(parser, "temporal", "scheme", str, "uniform").strip(),
        temporal_p=_get(parser, "temporal", "p", int, 1),
        temporal_m0=_get(parser, "temporal", "m0", int, 4),
        temporal_m=_get(parser, "temporal", "m", int, 4),
        sigma=_get(parser, "temporal", "sigma", float, 0.31),
        mu_hp=_get(parser, "temporal", "mu_hp", float, 2.0),
        m1_factor=_get(parser, "temporal", "m1_factor", float, 1.4),
        m2=_get(parser, "temporal", "m2", int, 1),
        spatial_scheme=_get(parser, "spatial", "scheme", str, "uniform").strip(),
        initial_elements=_get(parser, "spatial", "initial_elements", int, 4),
        initial_level=_get(parser, "spatial", "initial_level", int, 1),
        beta=_get(parser, "spatial", "beta", float, 0.6),
        radius=_get(parser, "spatial", "radius", float, 0.25),
        export_meshes=_get(parser, "spatial", "export_meshes", bool, False),
    )


def _spatial_for_level(cfg: StudyConfig, prob, level):
    if prob.dimension == 1:
        n = cfg.initial_elements * 2**level
        return uniform_interval_mesh(prob.domain_interval(), n)
    steps = cfg.initial_level + level
    if cfg.spatial_scheme == "uniform":
        mesh = lshape_mesh()
        for _ in range(steps):
            mesh = refine_uniform(mesh)
        return mesh
    target = np.sqrt(2.0) * 0.5**steps
    return refine_graded(lshape_mesh(), target, cfg.beta, cfg.radius)


def _temporal_for_level(cfg: StudyConfig, prob, level, N):
    T = prob.T
    if cfg.temporal_scheme == "uniform":
        return uniform_mesh(T, cfg.temporal_m0 * 2**level, cfg.temporal_p)
    if cfg.temporal_scheme == "p":
        p = max(1, floor(log(N) / 2.0))
        return uniform_mesh(T, cfg.temporal_m, p)
    m1 = floor(cfg.m1_factor * log(N))
    if m1 < 3:
        raise ValueError(
            f"temporal hp rule gives m1 = {m1} < 3 at N = {N}; start from a finer spatial level"
        )
    spec = TemporalMeshSpec(T=T, sigma=cfg.sigma, mu_hp=cfg.mu_hp, m1=m1, m2=cfg.m2)
    return build_mesh(spec)


def emit_table(records):
    """Fixed-width study table with the usual column set."""
    header = f"{'MN':>10}  {'h_x':>9}  {'k_max':>9}  {'error':>11}  {'eoc':>6}"
    lines = [header]
    for rec, rate in zip(records, eoc(records)):
        rate_s = "-" if rate is None else f"{rate:.2f}"
        lines.append(
            f"{rec.MN:>10}  {rec.h_x:>9.5f}  {rec.k_max:>9.5f}  {rec.error:>11.3e}  {rate_s:>6}"
        )
    return "\n".join(lines) + "\n"


def run_study(cfg: StudyConfig, log=print):
    """Execute the configured refinement sweep; returns (records, failures).

    A failing level is recorded with its reason and the sweep continues;
    completed levels are kept.
    """
    prob = get_problem(cfg.problem)
    records = []
    failures = []
    for level in range(cfg.levels):
        t0 = time.perf_counter()
        try:
            mesh_x = _spatial_for_level(cfg, prob, level)
            sx = assemble_spatial(mesh_x)
            if sx.N < 1:
                raise ValueError("no interior degrees of freedom at this level")
            mesh_t = _temporal_for_level(cfg, prob, level, sx.N)
            M = mesh_t.num_dofs
            MN = M * sx.N
            if MN > MEMORY_GUARD:
                raise MemoryError(f"level exceeds the memory guard: MN = {MN} > {MEMORY_GUARD}")
            strategy = cfg.strategy
            if strategy == "dense" and MN > DENSE_LIMIT:
                raise MemoryError(
                    f"dense strategy refused at MN = {MN} > {DENSE_LIMIT}; use bartels-stewart"
                )
            basis = make_basis(mesh_t)
            tm = assemble(basis)
            sol = solve_heat(prob, basis, tm, sx, strategy=strategy)
            err = error_functional(sol, prob)
            rec = StudyRecord(
                MN=MN,
                M=M,
                N=sx.N,
                h_x=mesh_x.h_x,
                k_max=mesh_t.k_max,
                error=err,
                wall_time=time.perf_counter() - t0,
            )
            records.append(rec)
            if cfg.export_meshes and prob.dimension == 2 and cfg.out:
                out = Path(cfg.out)
                out.mkdir(parents=True, exist_ok=True)
                export_mesh(mesh_x, out / f"mesh_level{level}.txt")
            log(
                f"level {level}: MN={MN} (M={M}, N={sx.N}) error={err:.3e} "
                f"[{rec.wall_time:.1f}s]"
            )
        except Exception as exc:  # keep completed levels, record the reason
            failures.append((level, f"{type(exc).__name__}: {exc}"))
            log(f"level {level}: SKIPPED ({type(exc).__name__}: {exc})")
    return records, failures


def write_outputs(cfg: StudyConfig, records):
    if not cfg.out:
        return
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "table.txt").write_text(emit_table(records))
    series = "".join(f"{r.MN} {r.error:.12e}\n" for r in records)
    (out / "series.dat").write_text(series)
    (out / "records.tsv").write_text(emit_records(records))


def run_verification(seed=0, log=print):
    """Quick oracle cross-checks run before a study with --verify."""
    from .fractional_norms import ht_matrix_oracle
    from .quadrature import gauss_legendre, log_weighted_rule
    from .temporal_hp import quasi_interpolant

    rng = np.random.default_rng(seed)
    ok = True

    def check(name, passed, detail=""):
        nonlocal ok
        status = "ok" if passed else "FAIL"
        log(f"verify: {name}: {status} {detail}")
        ok = ok and passed

    g = gauss_legendre(8)
    check("gauss-legendre weight sum", abs(g.weights.sum() - 2.0) < 1e-13)
    lr = log_weighted_rule(6)
    moment_err = max(
        abs(float(np.dot(lr.weights, lr.nodes**d)) + 1.0 / (d + 1) ** 2) for d in range(8)
    )
    check("log-weighted moments", moment_err < 1e-12, f"(err {moment_err:.1e})")
    mesh = uniform_mesh(2.0, 2, 2)
    basis = make_basis(mesh)
    tm = assemble(basis)
    Mo, Ao = ht_matrix_oracle(basis, K=2048)
    dev = max(np.abs(tm.M_ht - Mo).max(), np.abs(tm.A_ht - Ao).max())
    check("transform matrices vs series oracle", dev < 1e-5, f"(dev {dev:.1e})")
    sym = np.abs(tm.A_ht - tm.A_ht.T).max() / np.abs(tm.A_ht).max()
    check("transform stiffness symmetry", sym < 1e-9, f"(asym {sym:.1e})")
    T = 2.0
    b1 = make_basis(uniform_mesh(T, 1, 16))
    c = quasi_interpolant(
        b1,
        lambda t: np.sqrt(2 / T) * np.sin(np.pi * t / (2 * T)),
        lambda t: np.sqrt(2 / T) * np.pi / (2 * T) * np.cos(np.pi * t / (2 * T)),
    )
    tm1 = assemble(b1)
    dev = abs(c @ tm1.A_ht @ c - np.pi / 4)
    check("single-mode elliptic pairing", dev < 1e-6, f"(dev {dev:.1e})")
    mesh2 = refine_uniform(lshape_mesh())
    sys2 = assemble_spatial(mesh2)
    lin = rng.standard_normal(2) @ mesh2.vertices.T
    resid = np.abs((sys2.A_full @ lin)[sys2.interior]).max()
    check("spatial patch test", resid < 1e-12, f"(resid {resid:.1e})")
    return ok


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="spacetime-hp",
        description="Run a space-time convergence study from a config file.",
    )
    ap.add_argument("config", help="path to the study config")
    ap.add_argument("--levels", type=int, default=None, help="override the level count")
    ap.add_argument("--strategy", default=None, help="override the solver strategy")
    ap.add_argument("--out", default=None, help="override the output directory")
    ap.add_argument("--seed", type=int, default=0, help="seed for the --verify checks")
    ap.add_argument(
        "--verify", action="store_true", help="run oracle cross-checks before solving"
    )
    args = ap.parse_args(argv)
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        cfg = parse_config(text)
        if args.levels is not None:
            cfg = replace(cfg, levels=args.levels)
        if args.strategy is not None:
            cfg = replace(cfg, strategy=args.strategy)
        if args.out is not None:
            cfg = replace(cfg, out=args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    if args.verify and not run_verification(seed=args.seed):
        print("verification failed; aborting study", file=sys.stderr)
        return 2
    records, failures = run_study(cfg)
    print(emit_table(records), end="")
    write_outputs(cfg, records)
    if failures:
        for level, reason in failures:
            print(f"level {level} failed: {reason}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
