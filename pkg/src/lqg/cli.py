"""Command-line front end: scenario configs, pipelines, CSV emission.

Scenarios are TOML files; tabulated payoff/information matrices live in
CSV files referenced by path (resolved against the config's directory).
Every command writes CSV tables plus a ``run_meta.json`` recording the
tool version, seed, tolerances, and the pseudo-random algorithm, and is
byte-for-byte deterministic given the same config and seed.

Exit codes: 0 success, 1 config error, 2 well-posedness failure,
3 identification/variance failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .core import (
    PD_TOL,
    PSD_TOL,
    SOLVER_TOL,
    SPEC_TOL,
    AgentGrid,
    InformationStructure,
    PayoffStructure,
    canonical_to_info,
    make_canonical_info,
    standardize,
)
from .equilibrium import build_operator, solve_equilibrium, spectral_check
from .errors import (
    ConfigError,
    DegenerateActions,
    IdentificationError,
    LqgError,
    SingularSystem,
    SingularTeamCovariance,
    ZeroVector,
)
from .identification import (
    higher_order_uncertainty,
    identify,
    nested_projection_oracle,
    resolve_signs_positive,
)
from .market import (
    MarketScenario,
    market_payoff,
    optimal_tax,
    pipeline_revenue,
    policy_roundtrip,
    revenue_lower_bound,
    tax_revenue,
)
from .outcome import (
    RNG_ALGORITHM,
    condition_on_state,
    outcome_moments,
    sample_conditional,
)
from .variance import ActionMap, cosine_ratio, gap_report

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_WELL_POSEDNESS = 2
EXIT_IDENTIFICATION = 3


@dataclass
class ScenarioConfig:
    """Parsed and validated scenario."""

    grid: AgentGrid
    mu_theta: float
    var_theta: float
    payoff: PayoffStructure
    info: InformationStructure
    seed: int
    tolerances: dict
    payoff_family: str
    info_family: str
    tau: float = None
    h: float = None
    sweep_h_values: list = field(default_factory=list)


def _cfg_get(table, key, kind, where, default=None, required=False):
    if key not in table:
        if required:
            raise ConfigError(f"{where}.{key}: missing required field")
        return default
    val = table[key]
    if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
        return float(val)
    if kind is int and isinstance(val, int) and not isinstance(val, bool):
        return int(val)
    if kind is str and isinstance(val, str):
        return val
    raise ConfigError(f"{where}.{key}: expected {kind.__name__}, got {val!r}")


def _load_vector(path: Path, n: int, where: str) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=1)
    except OSError as exc:
        raise ConfigError(f"{where}: cannot read {path} ({exc})") from exc
    data = np.asarray(data, dtype=float).reshape(-1)
    if data.shape[0] != n:
        raise ConfigError(f"{where}: expected {n} values in {path}, got {data.shape[0]}")
    return data


def _load_matrix(path: Path, n: int, where: str) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ConfigError(f"{where}: cannot read {path} ({exc})") from exc
    if data.shape != (n, n):
        raise ConfigError(f"{where}: expected {n}x{n} matrix in {path}, got {data.shape}")
    return np.asarray(data, dtype=float)


def load_config(path, n_override=None, seed_override=None) -> ScenarioConfig:
    """Parse a TOML scenario and build the core types, or fail with field
    and file addressed diagnostics."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML parse error: {exc}") from exc
    base = path.parent

    grid_tbl = raw.get("grid", {})
    n = n_override or _cfg_get(grid_tbl, "n", int, "grid", default=100)
    if n <= 0:
        raise ConfigError("grid.n: must be positive")
    grid = AgentGrid.uniform(n)

    prior_tbl = raw.get("prior", {})
    mu = _cfg_get(prior_tbl, "mu_theta", float, "prior", default=0.0)
    s2 = _cfg_get(prior_tbl, "var_theta", float, "prior", default=1.0)
    if s2 <= 0.0:
        raise ConfigError("prior.var_theta: must be positive")

    pay_tbl = raw.get("payoff", {})
    family = _cfg_get(pay_tbl, "family", str, "payoff", default="market")
    tau = None
    if family == "market":
        tau = _cfg_get(pay_tbl, "tau", float, "payoff", required=True)
        if not 0.0 <= tau <= 1.0:
            raise ConfigError("payoff.tau: must lie in [0, 1]")
        payoff = market_payoff(tau, n)
    elif family == "tabulated":
        b = _load_vector(base / _cfg_get(pay_tbl, "b", str, "payoff", required=True), n, "payoff.b")
        c = _load_vector(base / _cfg_get(pay_tbl, "c", str, "payoff", required=True), n, "payoff.c")
        w = _load_matrix(base / _cfg_get(pay_tbl, "w", str, "payoff", required=True), n, "payoff.w")
        payoff = PayoffStructure(b=b, c=c, w=w)
    else:
        raise ConfigError(f"payoff.family: unknown family {family!r}")

    info_tbl = raw.get("info", {})
    info_family = _cfg_get(info_tbl, "family", str, "info", default="canonical")
    h_scalar = None
    if info_family == "canonical":
        h_spec = info_tbl.get("h", 0.5)
        if isinstance(h_spec, str):
            h = _load_vector(base / h_spec, n, "info.h")
        elif isinstance(h_spec, (int, float)) and not isinstance(h_spec, bool):
            h_scalar = float(h_spec)
            h = np.full(n, h_scalar)
        else:
            raise ConfigError(f"info.h: expected number or CSV path, got {h_spec!r}")
        g_spec = info_tbl.get("g", 0.0)
        if isinstance(g_spec, str):
            g_off = _load_matrix(base / g_spec, n, "info.g")
            np.fill_diagonal(g_off, 0.0)
        elif isinstance(g_spec, (int, float)) and not isinstance(g_spec, bool):
            g_off = float(g_spec) * (np.ones((n, n)) - np.eye(n))
        else:
            raise ConfigError(f"info.g: expected number or CSV path, got {g_spec!r}")
        try:
            canon = make_canonical_info(h, g_off, s2)
        except LqgError as exc:
            raise ConfigError(f"info: {exc}") from exc
        info = canonical_to_info(canon, grid, mu_theta=mu)
    elif info_family == "tabulated":
        kern = _load_matrix(
            base / _cfg_get(info_tbl, "k_kernel", str, "info", required=True), n, "info.k_kernel"
        )
        kp = _load_vector(
            base / _cfg_get(info_tbl, "k_point", str, "info", required=True), n, "info.k_point"
        )
        kt = _load_vector(
            base / _cfg_get(info_tbl, "k_theta", str, "info", required=True), n, "info.k_theta"
        )
        m_path = info_tbl.get("means")
        m = (
            _load_vector(base / m_path, n, "info.means")
            if isinstance(m_path, str)
            else np.zeros(n)
        )
        try:
            info = InformationStructure(
                d=1,
                mu_theta=mu,
                var_theta=s2,
                m=m[:, None],
                K_point=kp[:, None, None],
                K_kernel=kern[:, :, None, None],
                K_theta=kt[:, None],
            )
        except LqgError as exc:
            raise ConfigError(f"info: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"info: {exc}") from exc
    else:
        raise ConfigError(f"info.family: unknown family {info_family!r}")

    run_tbl = raw.get("run", {})
    seed = seed_override if seed_override is not None else _cfg_get(
        run_tbl, "seed", int, "run", default=0
    )

    tol_tbl = raw.get("tolerances", {})
    tolerances = {
        "psd_tol": _cfg_get(tol_tbl, "psd_tol", float, "tolerances", default=PSD_TOL),
        "pd_tol": _cfg_get(tol_tbl, "pd_tol", float, "tolerances", default=PD_TOL),
        "solver_tol": _cfg_get(tol_tbl, "solver_tol", float, "tolerances", default=SOLVER_TOL),
        "spec_tol": _cfg_get(tol_tbl, "spec_tol", float, "tolerances", default=SPEC_TOL),
    }

    sweep_tbl = raw.get("sweep", {})
    h_values = sweep_tbl.get("h_values", [])
    if not isinstance(h_values, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in h_values
    ):
        raise ConfigError("sweep.h_values: expected a list of numbers")

    return ScenarioConfig(
        grid=grid,
        mu_theta=mu,
        var_theta=s2,
        payoff=payoff,
        info=info,
        seed=seed,
        tolerances=tolerances,
        payoff_family=family,
        info_family=info_family,
        tau=tau,
        h=h_scalar,
        sweep_h_values=[float(v) for v in h_values],
    )


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    return "%.17g" % float(value)


def write_csv(path: Path, header, rows):
    """Write rows atomically (temp file + rename), ASCII, 17 digits."""
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp-{os.getpid()}")
    with open(tmp, "w", newline="\n", encoding="ascii") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    os.replace(tmp, path)


def write_run_meta(outdir: Path, command: str, cfg: ScenarioConfig, extra=None):
    meta = {
        "tool": "lqg",
        "version": __version__,
        "command": command,
        "seed": cfg.seed,
        "rng_algorithm": RNG_ALGORITHM,
        "tolerances": cfg.tolerances,
    }
    if extra:
        meta.update(extra)
    tmp = outdir / f"run_meta.json.tmp-{os.getpid()}"
    with open(tmp, "w", encoding="ascii") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, outdir / "run_meta.json")


def cmd_solve(cfg: ScenarioConfig, outdir: Path) -> int:
    std = standardize(cfg.info)
    op = build_operator(cfg.payoff, std, cfg.grid)
    check = spectral_check(op)
    rows = []
    for block, spectrum in ((0, check.spectrum0), (1, check.spectrum1)):
        for lam in spectrum:
            rows.append((block, lam.real, lam.imag, abs(lam - 1.0)))
    write_csv(outdir / "spectrum.csv", ("block", "re", "im", "dist_to_one"), rows)
    write_run_meta(outdir, "solve", cfg, {"well_posed": check.well_posed})
    if not check.well_posed:
        print(
            f"not well-posed: spectrum within {check.dist_to_one:.3e} of 1",
            file=sys.stderr,
        )
        return EXIT_WELL_POSEDNESS
    prof = solve_equilibrium(op)
    header = ["agent", "point", "phi0"] + [f"phi_{k+1}" for k in range(prof.d)]
    rows = [
        (i, cfg.grid.points[i], prof.phi0[i], *prof.phi[i]) for i in range(prof.n)
    ]
    write_csv(outdir / "equilibrium.csv", header, rows)
    return EXIT_OK


def _conditionals(cfg: ScenarioConfig, theta1, theta2, draws):
    std = standardize(cfg.info)
    op = build_operator(cfg.payoff, std, cfg.grid)
    prof = solve_equilibrium(op)
    mom = outcome_moments(std, prof)
    if draws:
        cond1 = sample_conditional(mom, theta1, draws, seed=cfg.seed)
        cond2 = sample_conditional(mom, theta2, draws, seed=cfg.seed + 1)
    else:
        cond1 = condition_on_state(mom, theta1)
        cond2 = condition_on_state(mom, theta2)
    return std, prof, mom, cond1, cond2


def cmd_identify(cfg: ScenarioConfig, outdir: Path, theta1, theta2, draws, positive) -> int:
    _, _, _, cond1, cond2 = _conditionals(cfg, theta1, theta2, draws)
    idc = identify(cond1, cond2, (cfg.mu_theta, cfg.var_theta))
    signed = resolve_signs_positive(idc) if positive else None

    header = ["agent", "phi0", "abs_phi1", "abs_h", "cross_phih"]
    if signed:
        header += ["h", "phi1"]
    rows = []
    for i in range(idc.n):
        row = [i, idc.phi0[i], idc.abs_phi1[i], idc.abs_h[i], idc.cross_phih[i]]
        if signed:
            row += [signed[0][i], signed[2][i]]
        rows.append(tuple(row))
    write_csv(outdir / "identified.csv", header, rows)

    gheader = ["i", "j", "abs_g", "cross_phig"] + (["g"] if signed else [])
    grows = []
    for i in range(idc.n):
        for j in range(idc.n):
            row = [i, j, idc.abs_g[i, j], idc.cross_phig[i, j]]
            if signed:
                row.append(signed[1][i, j])
            grows.append(tuple(row))
    write_csv(outdir / "identified_g.csv", gheader, grows)
    write_run_meta(
        outdir,
        "identify",
        cfg,
        {"theta_bar_1": theta1, "theta_bar_2": theta2, "draws": draws or 0},
    )
    return EXIT_OK


def parse_teams_file(path: Path):
    """Each line one path: teams split by ';', agent indices by ','."""
    paths = []
    try:
        text = Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise ConfigError(f"cannot read teams file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            teams = [
                [int(tok) for tok in part.split(",") if tok.strip() != ""]
                for part in line.split(";")
            ]
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad team spec {line!r}") from exc
        if any(len(t) == 0 for t in teams):
            raise ConfigError(f"{path}:{lineno}: empty team in {line!r}")
        paths.append(teams)
    if not paths:
        raise ConfigError(f"{path}: no team paths found")
    return paths


def cmd_variance(cfg: ScenarioConfig, outdir: Path, teams_path) -> int:
    paths = parse_teams_file(teams_path)
    for teams in paths:
        for team in teams:
            for i in team:
                if not 0 <= i < cfg.grid.n:
                    raise ConfigError(f"teams: agent index {i} outside grid")

    std, prof, mom, cond1, cond2 = _conditionals(
        cfg, cfg.mu_theta, cfg.mu_theta + 1.0, draws=None
    )
    idc = identify(cond1, cond2, (cfg.mu_theta, cfg.var_theta))
    prior = (cfg.mu_theta, cfg.var_theta)

    rows = []
    for teams in paths:
        label = ";".join(",".join(str(i) for i in t) for t in teams)
        r_id = higher_order_uncertainty(idc, prior, teams)
        r_or = nested_projection_oracle(cfg.info, teams, prior)
        rows.append((label, len(teams), r_id, r_or, abs(r_id - r_or)))
    write_csv(
        outdir / "uncertainty.csv",
        ("path", "p", "r_identified", "r_oracle", "abs_diff"),
        rows,
    )

    amap = ActionMap.from_profile(prof)
    seen = []
    grows = []
    for teams in paths:
        for team in teams:
            key = tuple(sorted(set(team)))
            if key in seen:
                continue
            seen.append(key)
            rep = gap_report(cfg.info, amap, list(key))
            cos2 = None
            if len(key) == 1:
                try:
                    _, cos2 = cosine_ratio(std, prof, key[0])
                except ZeroVector:
                    cos2 = None
            grows.append(
                (
                    ",".join(str(i) for i in key),
                    rep.r_signal,
                    rep.r_action,
                    rep.gap,
                    rep.proportional,
                    cos2,
                )
            )
    write_csv(
        outdir / "gap.csv",
        ("team", "r_signal", "r_action", "gap", "proportional", "cos2"),
        grows,
    )
    write_run_meta(outdir, "variance", cfg, {"teams_file": str(teams_path)})
    return EXIT_OK


def _parse_tau_grid(spec: str):
    try:
        start, step, stop = (float(tok) for tok in spec.split(":"))
    except ValueError as exc:
        raise ConfigError(f"--tau-grid: expected start:step:stop, got {spec!r}") from exc
    if step <= 0.0 or stop < start:
        raise ConfigError("--tau-grid: need step > 0 and stop >= start")
    count = int(round((stop - start) / step))
    taus = start + step * np.arange(count + 1)
    return np.clip(taus, 0.0, 1.0)


def cmd_tax_sweep(cfg: ScenarioConfig, outdir: Path, tau_grid_spec: str) -> int:
    taus = _parse_tau_grid(tau_grid_spec)
    h_values = cfg.sweep_h_values or ([cfg.h] if cfg.h is not None else [])
    if not h_values:
        raise ConfigError("tax-sweep needs sweep.h_values or a scalar info.h")
    rows = []
    for h in h_values:
        n = cfg.grid.n
        canon = make_canonical_info(
            np.full(n, h), np.zeros((n, n)), cfg.var_theta
        )
        scenario_info = canonical_to_info(canon, cfg.grid, mu_theta=cfg.mu_theta)
        opt = optimal_tax(h)
        star_idx = int(np.argmin(np.abs(taus - opt.tau_star)))
        for k, tau in enumerate(taus):
            closed = tax_revenue(tau, h)
            pipe = pipeline_revenue(tau, scenario_info, cfg.grid)
            bound, _ = revenue_lower_bound(tau, scenario_info, cfg.grid)
            valid_bound, _ = revenue_lower_bound(
                tau, scenario_info, cfg.grid, corrected=True
            )
            rows.append((h, tau, closed, pipe, bound, valid_bound, k == star_idx))
    write_csv(
        outdir / "tax_sweep.csv",
        (
            "h",
            "tau",
            "revenue_closed_form",
            "revenue_pipeline",
            "lower_bound",
            "lower_bound_corrected",
            "is_tau_star",
        ),
        rows,
    )
    write_run_meta(outdir, "tax-sweep", cfg, {"tau_grid": tau_grid_spec})
    return EXIT_OK


def cmd_roundtrip(cfg: ScenarioConfig, outdir: Path, theta1, theta2) -> int:
    if cfg.payoff_family != "market" or cfg.h is None:
        raise ConfigError("roundtrip requires the market payoff with scalar info.h")
    scenario = MarketScenario(tau=cfg.tau, h=cfg.h, grid=cfg.grid)
    report = policy_roundtrip(scenario, theta_bars=(theta1, theta2))
    write_csv(
        outdir / "roundtrip.csv",
        (
            "h",
            "h_hat",
            "h_err",
            "tau_star_true",
            "tau_star_hat",
            "tau_err",
            "revenue_star_hat",
        ),
        [
            (
                cfg.h,
                report.h_hat,
                report.h_err,
                report.tau_star_true,
                report.tau_star_hat,
                report.tau_err,
                report.revenue_star_hat,
            )
        ],
    )
    write_run_meta(outdir, "roundtrip", cfg, {"theta_bar_1": theta1, "theta_bar_2": theta2})
    print(
        f"h_hat = {report.h_hat:.12g} (err {report.h_err:.3e}), "
        f"tau_star = {report.tau_star_hat:.6f}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lqg",
        description="Solve, identify, and analyze discretized LQG games.",
    )
    parser.add_argument("--version", action="version", version=f"lqg {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="TOML scenario file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override run.seed")
        p.add_argument("--n", type=int, default=None, help="override grid.n")

    p_solve = sub.add_parser("solve", help="solve the equilibrium and emit spectrum")
    common(p_solve)

    p_id = sub.add_parser("identify", help="identify the canonical structure")
    common(p_id)
    p_id.add_argument("--theta1", type=float, default=None, help="first state value")
    p_id.add_argument("--theta2", type=float, default=None, help="second state value")
    p_id.add_argument(
        "--draws", type=int, default=None, help="use empirical conditionals from N draws"
    )
    p_id.add_argument(
        "--positive", action="store_true", help="resolve signs under positivity"
    )

    p_var = sub.add_parser("variance", help="higher-order uncertainty and gaps")
    common(p_var)
    p_var.add_argument("--teams", required=True, help="teams file (paths of index sets)")

    p_tax = sub.add_parser("tax-sweep", help="tax revenue curves and bounds")
    common(p_tax)
    p_tax.add_argument("--tau-grid", default="0:0.01:1", help="start:step:stop")

    p_rt = sub.add_parser("roundtrip", help="observe, identify, re-optimize the tax")
    common(p_rt)
    p_rt.add_argument("--theta1", type=float, default=None)
    p_rt.add_argument("--theta2", type=float, default=None)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, n_override=args.n, seed_override=args.seed)
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            return cmd_solve(cfg, outdir)
        if args.command == "identify":
            t1 = cfg.mu_theta if args.theta1 is None else args.theta1
            t2 = cfg.mu_theta + 1.0 if args.theta2 is None else args.theta2
            return cmd_identify(cfg, outdir, t1, t2, args.draws, args.positive)
        if args.command == "variance":
            return cmd_variance(cfg, outdir, args.teams)
        if args.command == "tax-sweep":
            return cmd_tax_sweep(cfg, outdir, args.tau_grid)
        if args.command == "roundtrip":
            t1 = cfg.mu_theta if args.theta1 is None else args.theta1
            t2 = cfg.mu_theta + 1.0 if args.theta2 is None else args.theta2
            return cmd_roundtrip(cfg, outdir, t1, t2)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularSystem as exc:
        print(f"well-posedness failure: {exc}", file=sys.stderr)
        return EXIT_WELL_POSEDNESS
    except IdentificationError as exc:
        print(f"identification failure at step {exc.step}: {exc}", file=sys.stderr)
        return EXIT_IDENTIFICATION
    except (SingularTeamCovariance, DegenerateActions, ZeroVector) as exc:
        print(f"variance failure: {exc}", file=sys.stderr)
        return EXIT_IDENTIFICATION


if __name__ == "__main__":
    sys.exit(main())
