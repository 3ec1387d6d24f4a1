"""Run configuration: flat INI sections, cross-validated, echoed in outputs."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .continuation import ContinuationOpts
from .errors import ConfigError
from .locked import CouplingSpec
from .radial import (
    DomainSpec,
    PotentialSpec,
    RadialGrid,
    SchrodingerOperator,
    assemble_operator,
    build_grid,
    default_truncation_radius,
)
from .scalar import SolverOptions


@dataclass
class RunConfig:
    """Everything one command needs, with defaults matching the reference
    interval problem: (0, pi), a = 1, 800 points, mu = (1, 2)."""

    domain_kind: str = "interval"
    dimension: int = 1
    r_inner: float = 0.0
    r_outer: float = float(np.pi)
    potential_kind: str = "constant"
    potential_value: float = 1.0
    potential_scale: float = 1.0
    grid_points: int = 800
    mu: tuple[float, ...] = (1.0, 2.0)
    newton_tol: float = 1e-11
    newton_max_iter: int = 50
    kmax: int = 8
    cluster_tol: float | None = None
    ds0: float = 2e-2
    ds_min: float = 1e-5
    ds_max: float = 1e-1
    cont_newton_tol: float = 1e-10
    cont_max_newton_iter: int = 10
    max_steps: int = 60
    kick: float = 1e-2
    beta_min: float | None = None
    beta_max: float | None = None
    morse_every: int = 0
    output_dir: str = "out"
    formats: tuple[str, ...] = ("csv", "json")

    def validate(self) -> None:
        try:
            self.domain()
            self.coupling()
        except (ConfigError, Exception) as exc:
            raise ConfigError(str(exc)) from exc
        if self.grid_points < 16:
            raise ConfigError("grid points must be at least 16")
        if self.newton_tol <= 0 or self.cont_newton_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.kmax < 2:
            raise ConfigError("kmax must be at least 2")
        for fmt in self.formats:
            if fmt not in ("csv", "json", "dat"):
                raise ConfigError(f"unknown output format {fmt!r}")
        if self.domain_kind == "truncated-space" and self.potential_kind != "harmonic":
            raise ConfigError("truncated-space requires the harmonic potential")

    # constructors for the domain objects -----------------------------------

    def domain(self) -> DomainSpec:
        r_outer = self.r_outer
        if self.domain_kind == "truncated-space" and r_outer <= self.r_inner:
            r_outer = default_truncation_radius(self.potential_scale)
        return DomainSpec(
            kind=self.domain_kind,
            dimension=self.dimension,
            r_inner=self.r_inner,
            r_outer=r_outer,
        )

    def potential(self) -> PotentialSpec:
        return PotentialSpec(
            kind=self.potential_kind,
            value=self.potential_value,
            scale=self.potential_scale,
        )

    def coupling(self) -> CouplingSpec:
        return CouplingSpec(mu=np.array(self.mu))

    def grid(self) -> RadialGrid:
        return build_grid(self.domain(), self.grid_points)

    def operator(self) -> SchrodingerOperator:
        return assemble_operator(self.grid(), self.potential())

    def solver_options(self) -> SolverOptions:
        return SolverOptions(tol=self.newton_tol, max_iter=self.newton_max_iter)

    def continuation_opts(self, kick: float | None = None) -> ContinuationOpts:
        return ContinuationOpts(
            ds0=self.ds0,
            ds_min=self.ds_min,
            ds_max=self.ds_max,
            newton_tol=self.cont_newton_tol,
            max_newton_iter=self.cont_max_newton_iter,
            max_steps=self.max_steps,
            beta_min=self.beta_min,
            beta_max=self.beta_max,
            kick=self.kick if kick is None else kick,
            morse_every=self.morse_every,
        )

    def resolved(self) -> dict[str, dict[str, str]]:
        """Section -> key -> value map echoed into every output artifact."""
        fmt = lambda x: f"{x:.17g}" if isinstance(x, float) else str(x)
        return {
            "domain": {
                "kind": self.domain_kind,
                "dimension": str(self.dimension),
                "r_inner": fmt(self.r_inner),
                "r_outer": fmt(self.domain().r_outer),
            },
            "potential": {
                "kind": self.potential_kind,
                "value": fmt(self.potential_value),
                "scale": fmt(self.potential_scale),
            },
            "grid": {"points": str(self.grid_points)},
            "coupling": {
                "n": str(len(self.mu)),
                "mu": ", ".join(f"{m:.17g}" for m in self.mu),
            },
            "solver": {
                "newton_tol": fmt(self.newton_tol),
                "newton_max_iter": str(self.newton_max_iter),
                "kmax": str(self.kmax),
                "cluster_tol": "" if self.cluster_tol is None else fmt(self.cluster_tol),
            },
            "continuation": {
                "ds0": fmt(self.ds0),
                "ds_min": fmt(self.ds_min),
                "ds_max": fmt(self.ds_max),
                "newton_tol": fmt(self.cont_newton_tol),
                "max_newton_iter": str(self.cont_max_newton_iter),
                "max_steps": str(self.max_steps),
                "kick": fmt(self.kick),
                "beta_min": "" if self.beta_min is None else fmt(self.beta_min),
                "beta_max": "" if self.beta_max is None else fmt(self.beta_max),
                "morse_every": str(self.morse_every),
            },
            "output": {
                "directory": self.output_dir,
                "formats": ", ".join(self.formats),
            },
        }


_FLOAT_KEYS = {
    ("domain", "r0"): "r_inner",
    ("domain", "r1"): "r_outer",
    ("potential", "value"): "potential_value",
    ("potential", "scale"): "potential_scale",
    ("solver", "newton_tol"): "newton_tol",
    ("solver", "cluster_tol"): "cluster_tol",
    ("continuation", "ds0"): "ds0",
    ("continuation", "ds_min"): "ds_min",
    ("continuation", "ds_max"): "ds_max",
    ("continuation", "newton_tol"): "cont_newton_tol",
    ("continuation", "kick"): "kick",
    ("continuation", "eps"): "kick",
    ("continuation", "beta_min"): "beta_min",
    ("continuation", "beta_max"): "beta_max",
}
_INT_KEYS = {
    ("domain", "dimension"): "dimension",
    ("grid", "points"): "grid_points",
    ("solver", "newton_max_iter"): "newton_max_iter",
    ("solver", "kmax"): "kmax",
    ("continuation", "max_newton_iter"): "cont_max_newton_iter",
    ("continuation", "max_steps"): "max_steps",
    ("continuation", "morse_every"): "morse_every",
}
_STR_KEYS = {
    ("domain", "kind"): "domain_kind",
    ("potential", "kind"): "potential_kind",
    ("output", "directory"): "output_dir",
}


def load_config(path: str | Path) -> RunConfig:
    """Parse a flat INI file into a validated RunConfig."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = RunConfig()
    try:
        for (section, key), attr in _STR_KEYS.items():
            if parser.has_option(section, key):
                setattr(cfg, attr, parser.get(section, key).strip())
        for (section, key), attr in _INT_KEYS.items():
            if parser.has_option(section, key):
                setattr(cfg, attr, parser.getint(section, key))
        for (section, key), attr in _FLOAT_KEYS.items():
            if parser.has_option(section, key):
                setattr(cfg, attr, parser.getfloat(section, key))
        if parser.has_option("coupling", "mu"):
            cfg.mu = tuple(
                float(tok) for tok in parser.get("coupling", "mu").split(",") if tok.strip()
            )
        if parser.has_option("coupling", "n"):
            n = parser.getint("coupling", "n")
            if n != len(cfg.mu):
                raise ConfigError(f"coupling n={n} but {len(cfg.mu)} mu values given")
        if parser.has_option("output", "formats"):
            cfg.formats = tuple(
                tok.strip()
                for tok in parser.get("output", "formats").split(",")
                if tok.strip()
            )
    except (ValueError, configparser.Error) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    cfg.validate()
    return cfg
