"""Command-line front end: dispersion, scatter, ensemble, asymptotics, sweep.

Configuration precedence is flags > environment (GMLATTICE_<KEY>) > config
file > defaults.  The config file is flat ``key = value`` text (INI-style;
an optional [run] section header is accepted).  Every output CSV carries a
``<name>.meta.txt`` sidecar with the full resolved configuration, seeds and
the package version, sufficient to reproduce the file byte-for-byte.

Exit codes: 0 success, 2 validation/configuration, 3 numerical
non-convergence, 4 linear-solver failure.
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import hashlib
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (
    effective_params,
    lambda0_transmittance,
    regime_formulas,
    solve_moments,
    strong_mean_loss,
)
from .ensemble import EnsembleSpec, draw_patch, run_ensemble
from .errors import (
    NumericalError,
    SingularSystem,
    ValidationError,
)
from .scattering import PerturbationPatch, SolverSettings, solve_patch
from .spectrum import SurfaceParams, omega_max, solve_dispersion

ENV_PREFIX = "GMLATTICE_"

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_SOLVER = 4


@dataclass
class RunConfig:
    """Flat run configuration; every field can come from file/env/flags."""

    m_s: float = 2.0
    alpha_s: float = 1.3
    sigma: float = 0.05
    L: int = 40
    n_realizations: int = 2000
    distribution: str = "uniform"
    seed: int = 0
    omega_frac_min: float = 0.1
    omega_frac_max: float = 0.9
    n_omega: int = 15
    omega_frac: float = 0.5  # single-frequency commands
    n_k: int = 100
    epsilon: float = 0.0
    nodes: int = 0  # 0 = automatic band-node count
    p_max: int = 60
    guard_delta: float = 1e-3
    threads: int = 1
    out: str = "out"
    mu: str = ""  # inline comma-separated patch for `scatter`
    audit: bool = True
    dump_realizations: bool = False
    ms_grid: str = "1.4,1.7,2.0,2.3,2.6,3.0"
    alpha_grid: str = "0.5,0.8,1.1,1.4,1.7,2.0"
    omega_fracs: str = "0.5,0.9"
    sweep_L: str = "40,5000,inf"
    l_tilde_cap: float = 25.0

    def validate(self):
        problems = []
        if self.m_s <= 0:
            problems.append(f"m_s: must be positive, got {self.m_s}")
        if self.alpha_s <= 0:
            problems.append(f"alpha_s: must be positive, got {self.alpha_s}")
        if self.sigma <= 0:
            problems.append(f"sigma: must be positive, got {self.sigma}")
        if self.L < 1:
            problems.append(f"L: must be >= 1, got {self.L}")
        if self.n_realizations < 1:
            problems.append(f"n_realizations: must be >= 1, got {self.n_realizations}")
        if not (0.0 < self.omega_frac_min <= self.omega_frac_max < 1.0):
            problems.append(
                "omega_frac_min/omega_frac_max: need 0 < min <= max < 1, got "
                f"{self.omega_frac_min}/{self.omega_frac_max}"
            )
        if not (0.0 < self.omega_frac < 1.0):
            problems.append(f"omega_frac: must lie in (0, 1), got {self.omega_frac}")
        if self.n_omega < 1:
            problems.append(f"n_omega: must be >= 1, got {self.n_omega}")
        if self.n_k < 1:
            problems.append(f"n_k: must be >= 1, got {self.n_k}")
        if self.epsilon < 0:
            problems.append(f"epsilon: must be >= 0, got {self.epsilon}")
        if self.p_max < 20:
            problems.append(f"p_max: must be >= 20, got {self.p_max}")
        if self.threads < 1:
            problems.append(f"threads: must be >= 1, got {self.threads}")
        if problems:
            raise ValidationError("invalid configuration:\n  " + "\n  ".join(problems))

    def solver_settings(self) -> SolverSettings:
        return SolverSettings(
            band_nodes=self.nodes or None, guard_delta=self.guard_delta
        )


def _coerce(field_type, raw: str):
    if field_type is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    return field_type(raw)


def load_config(path: str | None, env: dict, overrides: dict) -> RunConfig:
    """Merge defaults <- file <- environment <- explicit flags."""
    cfg = RunConfig()
    ftypes = {f.name: f.type for f in fields(RunConfig)}
    ftypes = {
        name: (eval(t) if isinstance(t, str) else t) for name, t in ftypes.items()
    }
    if path:
        parser = configparser.ConfigParser()
        text = Path(path).read_text()
        if not text.lstrip().startswith("["):
            text = "[run]\n" + text
        parser.read_string(text)
        for section in parser.sections():
            for key, raw in parser.items(section):
                if key not in ftypes:
                    raise ValidationError(f"{path}: unknown config key {key!r}")
                setattr(cfg, key, _coerce(ftypes[key], raw))
    for key in ftypes:
        env_key = ENV_PREFIX + key.upper()
        if env_key in env:
            setattr(cfg, key, _coerce(ftypes[key], env[env_key]))
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_meta(path: Path, cfg: RunConfig, extra: dict):
    items = {**dataclasses.asdict(cfg), **extra, "version": __version__}
    with open(path, "w") as fh:
        for key in sorted(items):
            fh.write(f"{key} = {_fmt(items[key])}\n")


def _parse_floats(csv_text: str):
    return [float(tok) for tok in csv_text.split(",") if tok.strip()]


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_dispersion(cfg: RunConfig) -> int:
    params = SurfaceParams(cfg.m_s, cfg.alpha_s)
    wm = omega_max(params)
    ks = [(i + 1) * math.pi / (cfg.n_k + 1) for i in range(cfg.n_k)]
    rows = []
    for k in ks:
        dp = solve_dispersion(params, k)
        rows.append((k, dp.omega, dp.eta, dp.v_group))
    out = Path(cfg.out) / "dispersion.csv"
    write_csv(out, ("k", "omega", "eta", "v_group"), rows)
    write_meta(out.with_suffix(".meta.txt"), cfg, {"omega_max": wm, "command": "dispersion"})
    print(f"wrote {out} ({len(rows)} rows, omega_max={wm:.6f})")
    return EXIT_OK


def _patch_for(cfg: RunConfig):
    """Inline mu wins over a seeded draw; returns (patch, patch_id)."""
    if cfg.mu.strip():
        mu = _parse_floats(cfg.mu)
        digest = hashlib.sha256(np.asarray(mu).tobytes()).hexdigest()[:16]
        return PerturbationPatch(mu), f"mu-sha256:{digest}"
    spec = EnsembleSpec(
        n_realizations=1,
        sigma=cfg.sigma,
        L=cfg.L,
        distribution=cfg.distribution,
        master_seed=cfg.seed,
        omega_grid=(),
    )
    return draw_patch(spec, 0), f"seed:{cfg.seed}:0"


def cmd_scatter(cfg: RunConfig) -> int:
    params = SurfaceParams(cfg.m_s, cfg.alpha_s)
    omega = cfg.omega_frac * omega_max(params)
    patch, patch_id = _patch_for(cfg)
    res = solve_patch(params, omega, patch, cfg.solver_settings(), audit=cfg.audit)
    out = Path(cfg.out) / "scatter.csv"
    write_csv(
        out,
        (
            "omega", "L", "patch_id", "re_R", "im_R", "re_T", "im_T",
            "D", "energy_residual", "cond_estimate",
        ),
        [
            (
                omega, len(patch), patch_id, res.R.real, res.R.imag,
                res.T.real, res.T.imag, res.D, res.energy_residual,
                res.cond_estimate,
            )
        ],
    )
    write_meta(out.with_suffix(".meta.txt"), cfg, {"command": "scatter", "omega": omega})
    print(f"wrote {out} (|R|^2={abs(res.R)**2:.6g}, |T|^2={abs(res.T)**2:.6g}, D={res.D:.6g})")
    return EXIT_OK


def _omega_grid(cfg: RunConfig, wm: float):
    if cfg.n_omega == 1:
        return [cfg.omega_frac_min * wm]
    fr = np.linspace(cfg.omega_frac_min, cfg.omega_frac_max, cfg.n_omega)
    return [float(f) * wm for f in fr]


def cmd_ensemble(cfg: RunConfig) -> int:
    params = SurfaceParams(cfg.m_s, cfg.alpha_s)
    wm = omega_max(params)
    spec = EnsembleSpec(
        n_realizations=cfg.n_realizations,
        sigma=cfg.sigma,
        L=cfg.L,
        distribution=cfg.distribution,
        master_seed=cfg.seed,
        omega_grid=tuple(_omega_grid(cfg, wm)),
    )
    stats = run_ensemble(
        params,
        spec,
        cfg.solver_settings(),
        threads=cfg.threads,
        keep_realizations=cfg.dump_realizations,
    )
    out = Path(cfg.out) / "ensemble_stats.csv"
    header = (
        "omega", "n", "mean_T2", "se_T2", "std_T2", "mean_R2", "se_R2",
        "std_R2", "mean_D", "se_D", "std_D", "identity_residual",
    )
    rows = [
        (
            r.omega, r.n, r.mean_T2, r.se_T2, r.std_T2, r.mean_R2, r.se_R2,
            r.std_R2, r.mean_D, r.se_D, r.std_D, r.identity_residual,
        )
        for r in stats.records
    ]
    write_csv(out, header, rows)
    write_meta(out.with_suffix(".meta.txt"), cfg, {"command": "ensemble", "omega_max": wm})
    if cfg.dump_realizations:
        dump = Path(cfg.out) / "ensemble_realizations.csv"
        drows = []
        for iw, r in enumerate(stats.records):
            for i in range(r.n):
                r2, t2, dd = stats.realizations[iw, i]
                drows.append((r.omega, i, r2, t2, dd))
        write_csv(dump, ("omega", "realization", "R2", "T2", "D"), drows)
    print(f"wrote {out} ({len(rows)} frequencies x {cfg.n_realizations} realizations)")
    return EXIT_OK


def _asymptotic_row(params, omega, cfg: RunConfig):
    ap = effective_params(params, omega, cfg.sigma, guard_delta=cfg.guard_delta)
    lt = min(ap.l_tilde(cfg.L), cfg.l_tilde_cap)
    capped = lt < ap.l_tilde(cfg.L)
    ms = solve_moments(
        ap.Lambda_tilde, max(lt, 1e-12), p_max=cfg.p_max, n_grid=2, check_truncation=False
    )
    rf = regime_formulas(ap.Lambda_tilde, ap.l_tilde(cfg.L))
    r1, t0, u0 = ms.R_p[-1, 1], ms.T_p[-1, 0], ms.U_p[-1, 0]
    mean_d = 1.0 - r1 - t0 if not capped else strong_mean_loss(ap.Lambda_tilde)
    var_d = ms.var_D[-1] if not capped else rf.strong_var_D
    return ap, (
        omega, ap.Lambda_tilde, ap.l_tilde(cfg.L), ap.L_loc, ap.kappa,
        r1, t0, u0, mean_d, var_d,
        rf.weak_mean_D, rf.strong_mean_D, lambda0_transmittance(min(ap.l_tilde(cfg.L), 700.0)),
    )


_ASY_HEADER = (
    "omega", "Lambda_tilde", "L_tilde", "L_loc", "kappa", "R1", "T0", "U0",
    "mean_D", "var_D", "weak_mean_D", "strong_mean_D", "lambda0_T2",
)


def cmd_asymptotics(cfg: RunConfig) -> int:
    params = SurfaceParams(cfg.m_s, cfg.alpha_s)
    wm = omega_max(params)
    rows = []
    for omega in _omega_grid(cfg, wm):
        rows.append(_asymptotic_row(params, omega, cfg)[1])
    out = Path(cfg.out) / "asymptotics.csv"
    write_csv(out, _ASY_HEADER, rows)
    write_meta(out.with_suffix(".meta.txt"), cfg, {"command": "asymptotics", "omega_max": wm})
    print(f"wrote {out} ({len(rows)} frequencies)")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    ms_vals = _parse_floats(cfg.ms_grid)
    al_vals = _parse_floats(cfg.alpha_grid)
    fracs = _parse_floats(cfg.omega_fracs)
    l_vals = [tok.strip() for tok in cfg.sweep_L.split(",") if tok.strip()]
    rows = []
    for m_s in ms_vals:
        for al in al_vals:
            for frac in fracs:
                for l_lab in l_vals:
                    row = [m_s, al, frac, l_lab]
                    try:
                        params = SurfaceParams(m_s, al)
                        omega = frac * omega_max(params)
                        ap = effective_params(
                            params, omega, cfg.sigma, guard_delta=cfg.guard_delta
                        )
                        if l_lab == "inf":
                            mean_d = strong_mean_loss(ap.Lambda_tilde)
                            lt = math.inf
                        else:
                            lt = ap.l_tilde(float(l_lab))
                            if lt >= cfg.l_tilde_cap:
                                mean_d = strong_mean_loss(ap.Lambda_tilde)
                            else:
                                ms = solve_moments(
                                    ap.Lambda_tilde,
                                    max(lt, 1e-12),
                                    p_max=cfg.p_max,
                                    n_grid=2,
                                    check_truncation=False,
                                )
                                mean_d = 1.0 - ms.R_p[-1, 1] - ms.T_p[-1, 0]
                        row += [ap.Lambda_tilde, lt, mean_d, "ok"]
                    except ValidationError:
                        row += [math.nan, math.nan, math.nan, "no-band"]
                    rows.append(tuple(row))
    out = Path(cfg.out) / "sweep.csv"
    write_csv(
        out,
        ("m_s", "alpha_s", "omega_frac", "L", "Lambda_tilde", "L_tilde", "mean_D", "status"),
        rows,
    )
    write_meta(out.with_suffix(".meta.txt"), cfg, {"command": "sweep"})
    print(f"wrote {out} ({len(rows)} cells)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "dispersion": cmd_dispersion,
    "scatter": cmd_scatter,
    "ensemble": cmd_ensemble,
    "asymptotics": cmd_asymptotics,
    "sweep": cmd_sweep,
}


def _add_common(sub):
    sub.add_argument("--config", default=None, help="flat key=value config file")
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="master seed")
    sub.add_argument("--threads", type=int, default=None, help="worker threads")
    sub.add_argument("--epsilon", type=float, default=None, help="contour absorption")
    sub.add_argument("--nodes", type=int, default=None, help="band quadrature nodes (0=auto)")
    sub.add_argument("--m-s", dest="m_s", type=float, default=None)
    sub.add_argument("--alpha-s", dest="alpha_s", type=float, default=None)
    sub.add_argument("--sigma", type=float, default=None)
    sub.add_argument("--L", dest="L", type=int, default=None)
    sub.add_argument("--n-realizations", dest="n_realizations", type=int, default=None)
    sub.add_argument("--distribution", default=None, choices=("uniform", "truncated-gaussian"))
    sub.add_argument("--omega-frac", dest="omega_frac", type=float, default=None)
    sub.add_argument("--omega-frac-min", dest="omega_frac_min", type=float, default=None)
    sub.add_argument("--omega-frac-max", dest="omega_frac_max", type=float, default=None)
    sub.add_argument("--n-omega", dest="n_omega", type=int, default=None)
    sub.add_argument("--n-k", dest="n_k", type=int, default=None)
    sub.add_argument("--p-max", dest="p_max", type=int, default=None)
    sub.add_argument("--mu", default=None, help="inline comma-separated patch (scatter)")
    sub.add_argument("--audit", dest="audit", action="store_true", default=None)
    sub.add_argument("--no-audit", dest="audit", action="store_false", default=None)
    sub.add_argument(
        "--dump-realizations", dest="dump_realizations", action="store_true", default=None
    )
    sub.add_argument("--ms-grid", dest="ms_grid", default=None)
    sub.add_argument("--alpha-grid", dest="alpha_grid", default=None)
    sub.add_argument("--omega-fracs", dest="omega_fracs", default=None)
    sub.add_argument("--sweep-L", dest="sweep_L", default=None)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="gmlattice",
        description="Surface-wave scattering statistics on a structured half-plane lattice",
    )
    subs = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        _add_common(subs.add_parser(name))
    args = parser.parse_args(argv)
    overrides = {
        k: v for k, v in vars(args).items() if k not in ("command", "config")
    }
    try:
        cfg = load_config(args.config, os.environ, overrides)
        return _COMMANDS[args.command](cfg)
    except ValidationError as exc:
        print(f"error (validation): {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SingularSystem as exc:
        print(f"error (solver): {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except NumericalError as exc:
        print(f"error (numerical): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
