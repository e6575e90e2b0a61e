"""Experiment configuration: a flat, validated, round-trippable record.

One config describes one suite run.  Suites cover the synthetic studies:
target-only regression with a known-smoothness schedule, its adaptive
counterpart, transfer with a fixed target sample and a growing source,
transfer with a growing target (source tied to it polynomially), and the
saturation effect of polynomially regularized misspecified Matern KRR.

Configs load from TOML files, serialize losslessly to plain dicts, and
reject unknown keys so that typos fail loudly instead of silently running
the default.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Mapping

try:  # py >= 3.11
    import tomllib as _toml
except ModuleNotFoundError:  # pragma: no cover - py 3.10 path
    import tomli as _toml

SUITES = (
    "target_only_nonadaptive",
    "target_only_adaptive",
    "tl_fixed_target",
    "tl_growing_target",
    "saturation_demo",
)

C_MODES = ("fixed", "cv", "best")

# Desk-scale sweeps: small enough for a laptop / CI run at 20 trials.
DEFAULT_N_GRID = (500, 750, 1000, 1250, 1500, 1750, 2000)
DEFAULT_N_TARGET_GRID = (50, 100, 150, 200, 300, 400)
DEFAULT_N_SOURCE_GRID = (100, 250, 500, 1000, 1500, 2000)
DEFAULT_H_VALUES = (0.5, 1.0, 2.0)
DEFAULT_C_GRID = (0.05, 0.1, 0.2, 0.4, 0.7, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0)

# Methods the runner knows how to execute, per suite.
SUITE_METHODS = {
    "target_only_nonadaptive": ("krr",),
    "target_only_adaptive": ("krr_adaptive",),
    "tl_fixed_target": ("satl", "krr_adaptive", "fbe_transfer"),
    "tl_growing_target": ("satl", "krr_adaptive", "fbe_transfer"),
    "saturation_demo": (),  # derived from imposed_nus
}

DEFAULT_METHODS = {
    "target_only_nonadaptive": ("krr",),
    "target_only_adaptive": ("krr_adaptive",),
    "tl_fixed_target": ("satl",),
    "tl_growing_target": ("satl", "krr_adaptive"),
    "saturation_demo": (),
}


class ConfigError(ValueError):
    """Invalid or unparseable experiment configuration (CLI exit code 2)."""


def _float_tuple(value: Any) -> tuple[float, ...]:
    return tuple(float(v) for v in value)


def _int_tuple(value: Any) -> tuple[int, ...]:
    out = []
    for v in value:
        iv = int(v)
        if iv != v:
            raise ConfigError(f"expected integer, got {v!r}")
        out.append(iv)
    return tuple(out)


@dataclass(frozen=True)
class ExperimentConfig:
    """Flat description of one experiment suite run.

    Fields not used by the chosen suite are ignored by the runner but kept
    in the record so a config round-trips byte-for-byte through to_dict /
    from_dict regardless of suite.
    """

    suite: str = "target_only_nonadaptive"
    output_dir: str = "results"

    # Sample-size sweeps.  n_grid drives the target-only and saturation
    # suites; n_target_grid drives tl_growing_target (n_source follows as
    # round(n_target ** 1.5)); n_source_grid drives tl_fixed_target with
    # the target sample pinned at n_target_fixed.
    n_grid: tuple[int, ...] = DEFAULT_N_GRID
    n_target_grid: tuple[int, ...] = DEFAULT_N_TARGET_GRID
    n_source_grid: tuple[int, ...] = DEFAULT_N_SOURCE_GRID
    n_target_fixed: int = 50

    # Scenario parameters.  nu_values are the generator smoothness values
    # swept by the single-task suites (truth smoothness is nu - 0.01);
    # the transfer suites use nu_target for the target path and sweep
    # nu_offset_values x h_values.
    nu_values: tuple[float, ...] = (2.01, 3.01)
    nu_target: float = 1.01
    nu_offset_values: tuple[float, ...] = (3.01,)
    h_values: tuple[float, ...] = DEFAULT_H_VALUES
    sigma: float = 0.5

    trials: int = 20
    master_seed: int = 1729

    # Regularization constant handling: "fixed" uses C as given, "cv"
    # selects it by K-fold CV at the largest sample size (single-task
    # suites only), "best" reruns the sweep per grid value and keeps the
    # best curve per setting (single-task suites only).
    C: float = 1.5
    c_grid: tuple[float, ...] = DEFAULT_C_GRID
    c_mode: str = "fixed"

    # Adaptation settings: explicit candidate grid for the single-task
    # adaptive suite, Q-spaced grids (phase 1 / phase 2) for transfer.
    candidates: tuple[float, ...] = (1.0, 2.0, 3.0, 4.0, 5.0)
    q1: float = 6.0
    n1: int = 6
    q2: float = 6.0
    n2: int = 6
    adapt_method: str = "train_validate"
    split_fraction: float = 0.5
    lepski_c0: float = 1.0

    # Kernel / generator geometry.
    bandwidth: float = 0.2
    rho: float = 0.2
    grid_size: int = 2048
    quad_points: int = 1025

    # Saturation suite: imposed Matern smoothness per arm.
    imposed_nus: tuple[float, ...] = (0.5, 2.5)

    # Empty tuple means "suite default" (see DEFAULT_METHODS).
    methods: tuple[str, ...] = ()

    # 0 means "consult SATL_WORKERS, default serial".
    workers: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_grid", _int_tuple(self.n_grid))
        object.__setattr__(self, "n_target_grid", _int_tuple(self.n_target_grid))
        object.__setattr__(self, "n_source_grid", _int_tuple(self.n_source_grid))
        object.__setattr__(self, "nu_values", _float_tuple(self.nu_values))
        object.__setattr__(
            self, "nu_offset_values", _float_tuple(self.nu_offset_values)
        )
        object.__setattr__(self, "h_values", _float_tuple(self.h_values))
        object.__setattr__(self, "c_grid", _float_tuple(self.c_grid))
        object.__setattr__(self, "candidates", _float_tuple(self.candidates))
        object.__setattr__(self, "imposed_nus", _float_tuple(self.imposed_nus))
        object.__setattr__(self, "methods", tuple(str(m) for m in self.methods))
        self._validate()

    def _validate(self) -> None:
        if self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}; expected one of {SUITES}")
        if self.c_mode not in C_MODES:
            raise ConfigError(f"unknown c_mode {self.c_mode!r}; expected one of {C_MODES}")
        if self.adapt_method not in ("train_validate", "lepski"):
            raise ConfigError(f"unknown adapt_method {self.adapt_method!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        if self.C <= 0:
            raise ConfigError("C must be positive")
        if not self.c_grid or any(c <= 0 for c in self.c_grid):
            raise ConfigError("c_grid must be nonempty with positive entries")
        for name in ("n_grid", "n_target_grid", "n_source_grid"):
            grid = getattr(self, name)
            if not grid or any(n < 1 for n in grid):
                raise ConfigError(f"{name} must be nonempty with positive entries")
        if self.n_target_fixed < 1:
            raise ConfigError("n_target_fixed must be >= 1")
        if not self.nu_values or any(nu <= 0 for nu in self.nu_values):
            raise ConfigError("nu_values must be nonempty with positive entries")
        if self.nu_target <= 0:
            raise ConfigError("nu_target must be positive")
        if not self.nu_offset_values or any(nu <= 0 for nu in self.nu_offset_values):
            raise ConfigError("nu_offset_values must be nonempty with positive entries")
        if not self.h_values or any(h < 0 for h in self.h_values):
            raise ConfigError("h_values must be nonempty with nonnegative entries")
        if not self.candidates:
            raise ConfigError("candidates must be nonempty")
        if self.q1 <= 0 or self.q2 <= 0 or self.n1 < 1 or self.n2 < 1:
            raise ConfigError("Q-spaced grid parameters require Q > 0 and N >= 1")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError("split_fraction must lie in (0, 1)")
        if self.lepski_c0 <= 0:
            raise ConfigError("lepski_c0 must be positive")
        if self.bandwidth <= 0 or self.rho <= 0:
            raise ConfigError("bandwidth and rho must be positive")
        if self.grid_size < 2:
            raise ConfigError("grid_size must be >= 2")
        if self.quad_points < 3 or self.quad_points % 2 == 0:
            raise ConfigError("quad_points must be an odd integer >= 3")
        if not self.imposed_nus or any(nu <= 0 for nu in self.imposed_nus):
            raise ConfigError("imposed_nus must be nonempty with positive entries")
        if self.workers < 0:
            raise ConfigError("workers must be >= 0")
        if self.c_mode in ("cv", "best") and self.suite not in (
            "target_only_nonadaptive",
            "target_only_adaptive",
        ):
            raise ConfigError(
                f"c_mode {self.c_mode!r} is only supported for the single-task "
                "suites; transfer and saturation runs take a fixed C"
            )
        allowed = SUITE_METHODS[self.suite]
        for m in self.methods:
            if self.suite == "saturation_demo":
                raise ConfigError(
                    "saturation_demo derives its methods from imposed_nus; "
                    "leave methods empty"
                )
            if m not in allowed:
                raise ConfigError(
                    f"method {m!r} not available for suite {self.suite!r}; "
                    f"choose from {allowed}"
                )

    def resolved_methods(self) -> tuple[str, ...]:
        """Methods the runner will execute for this config."""
        if self.suite == "saturation_demo":
            return tuple(f"matern_{nu:g}" for nu in self.imposed_nus)
        if self.methods:
            return self.methods
        return DEFAULT_METHODS[self.suite]


_FIELD_NAMES = tuple(f.name for f in dataclasses.fields(ExperimentConfig))


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    """Plain-type dict (tuples as lists) suitable for JSON or TOML."""
    out: dict[str, Any] = {}
    for name in _FIELD_NAMES:
        value = getattr(cfg, name)
        out[name] = list(value) if isinstance(value, tuple) else value
    return out


def config_from_dict(payload: Mapping[str, Any]) -> ExperimentConfig:
    """Inverse of config_to_dict.  Unknown keys raise ConfigError."""
    unknown = sorted(set(payload) - set(_FIELD_NAMES))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return ExperimentConfig(**dict(payload))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str) -> ExperimentConfig:
    """Parse a TOML config file."""
    try:
        with open(path, "rb") as fh:
            payload = _toml.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path!r}: {exc}") from exc
    return config_from_dict(payload)


def paper_scale(cfg: ExperimentConfig) -> ExperimentConfig:
    """Scale a desk config up to the full study sizes (100 trials).

    Single-task sweeps extend to n in {1000, ..., 3000}; the fixed-target
    transfer sweep extends the source grid to 3000.  Everything else is
    kept as configured.
    """
    return dataclasses.replace(
        cfg,
        trials=100,
        n_grid=tuple(range(1000, 3001, 100)),
        n_source_grid=(100, 250, 500, 1000, 1500, 2000, 2500, 3000),
    )
