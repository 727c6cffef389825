"""
Typed parameter objects for one sheath problem and one experiment.
"""

from dataclasses import asdict, dataclass, field, fields
from typing import Optional

from utils.plasma.electrons import ELECTRON_MODELS
from utils.plasma.errors import InvalidConfig

PLASMA_KEYS = ("u_infty", "theta_infty", "r", "sigma", "phi_b", "electron_model", "electron_exponent", "cutoff")


@dataclass(frozen=True)
class PlasmaConfig:
    """
    Physical parameters of one problem instance.

    Attributes:
        u_infty: Drift velocity of the end-state Maxwellian, negative (towards the wall).
        theta_infty: Ion temperature.
        r: Edge of the velocity cutoff; the end state vanishes for xi1 >= -r.
        sigma: Width of the cutoff transition.
        phi_b: Wall potential.
        electron_model: "boltzmann", "linear" or "power_law".
        electron_exponent: Exponent p of the power-law closure.
        cutoff: Test hook; False replaces the cutoff by one.
    """

    u_infty: float
    theta_infty: float
    r: float
    sigma: float
    phi_b: float = 0.0
    electron_model: str = "boltzmann"
    electron_exponent: float = 0.25
    cutoff: bool = True

    def __post_init__(self):
        if not self.u_infty < 0:
            raise InvalidConfig(f"u_infty must be negative, got {self.u_infty}")
        if not self.theta_infty > 0:
            raise InvalidConfig(f"theta_infty must be positive, got {self.theta_infty}")
        if not (self.r > 0 and self.sigma > 0):
            raise InvalidConfig(f"r and sigma must be positive, got r={self.r}, sigma={self.sigma}")
        if not self.phi_b >= 0:
            raise InvalidConfig(f"phi_b must be nonnegative, got {self.phi_b}")
        if self.cutoff and not abs(self.u_infty) > self.r + 2 * self.sigma:
            raise InvalidConfig(
                f"|u_infty| = {abs(self.u_infty)} must exceed r + 2 sigma = {self.r + 2 * self.sigma}"
            )
        if self.electron_model not in ELECTRON_MODELS:
            raise InvalidConfig(f"unknown electron_model {self.electron_model!r}")
        if self.electron_model == "power_law" and not self.electron_exponent > 0:
            raise InvalidConfig("electron_exponent must be positive")

    def replace(self, **changes):
        values = asdict(self)
        values.update(changes)
        return PlasmaConfig(**values)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PerturbationSpec:
    """
    Initial perturbation g0 = b(x) b(xi1), scaled to unit weighted H1 norm, times delta.

    kind is "stability" (support at xi1 <= -r + epsilon) or "instability"
    (support in [R1, R2] with R2 > 2 R1).
    """

    kind: str = "stability"
    delta: float = 1e-3
    x_lo: float = 14.0
    x_hi: float = 18.0
    xi_lo: float = -3.0
    xi_hi: float = -1.5

    def __post_init__(self):
        if self.kind not in ("stability", "instability"):
            raise InvalidConfig(f"perturbation kind must be stability or instability, got {self.kind!r}")
        if not self.delta >= 0:
            raise InvalidConfig("perturbation delta must be nonnegative")
        if not (self.x_lo >= 0 and self.x_hi > self.x_lo and self.xi_hi > self.xi_lo):
            raise InvalidConfig("perturbation box must be a nonempty box in x >= 0")


@dataclass(frozen=True)
class EvolveSpec:
    """
    Time stepping and phase-space grid of one run.

    Grid fields left as None are resolved from the physics by the Vlasov module.
    """

    t_end: float = 4.0
    dt: Optional[float] = None
    cfl: float = 0.9
    interpolation: str = "pchip"
    snapshot_every: int = 10
    nx: int = 256
    nv: int = 256
    x_max: Optional[float] = None
    v_min: Optional[float] = None
    v_max: Optional[float] = None
    boundary: str = "absorbing"
    perturbation: PerturbationSpec = field(default_factory=PerturbationSpec)

    def __post_init__(self):
        if not self.t_end > 0:
            raise InvalidConfig("t_end must be positive")
        if self.dt is not None and not self.dt > 0:
            raise InvalidConfig("dt must be positive")
        if not 0 < self.cfl <= 1:
            raise InvalidConfig("cfl must lie in (0, 1]")
        if self.interpolation != "pchip":
            raise InvalidConfig("only monotone cubic ('pchip') interpolation is available")
        if self.snapshot_every < 1:
            raise InvalidConfig("snapshot_every must be at least 1")
        if self.nx < 8 or self.nv < 8:
            raise InvalidConfig("nx and nv must be at least 8")
        if self.boundary not in ("absorbing", "periodic"):
            raise InvalidConfig(f"boundary must be absorbing or periodic, got {self.boundary!r}")


@dataclass(frozen=True)
class ExperimentSpec:
    """
    Everything one reproduction needs.

    Attributes:
        experiment: "stability", "instability", "bohm_scan" or "stationary_only".
        beta: Weight exponent of the norms.
        epsilon: Support margin of stability perturbations.
        r1, r2: Velocity band of instability perturbations.
        escape_amplification: Instability threshold as a multiple of the initial norm.
        escape_check_ratio: Amplitude ratio of the companion instability run, None to skip it.
        fit_window: Fraction of the run used for rate fitting.
        energy_coefficient: Weight of the velocity-gradient term of the energy.
        support_threshold: Relative level above which a cell counts as occupied.
        u_values: Drift velocities of a Bohm scan.
        output_dir: Where run directories are written.
    """

    experiment: str = "stability"
    plasma: Optional[PlasmaConfig] = None
    evolve: EvolveSpec = field(default_factory=EvolveSpec)
    beta: float = 0.5
    epsilon: float = 0.25
    r1: float = 0.5
    r2: float = 1.5
    escape_amplification: float = 100.0
    escape_check_ratio: Optional[float] = 0.5
    fit_window: tuple = (0.2, 0.8)
    energy_coefficient: float = 1.0
    support_threshold: float = 1e-6
    corner_radius: float = 0.5
    u_values: tuple = ()
    seed: int = 0
    output_dir: str = "runs"

    def __post_init__(self):
        if self.experiment not in ("stability", "instability", "bohm_scan", "stationary_only"):
            raise InvalidConfig(f"unknown experiment {self.experiment!r}")
        if not 0 < self.beta < 1:
            raise InvalidConfig(f"beta must lie in (0, 1), got {self.beta}")
        lo, hi = self.fit_window
        if not 0 <= lo < hi <= 1:
            raise InvalidConfig(f"fit_window must satisfy 0 <= lo < hi <= 1, got {self.fit_window}")
        if self.plasma is None:
            return
        pert = self.evolve.perturbation
        if self.experiment == "stability":
            if not 0 < self.epsilon < self.plasma.r / 2:
                raise InvalidConfig("epsilon must lie in (0, r/2)")
            if pert.kind != "stability" or pert.xi_hi > -self.plasma.r + self.epsilon:
                raise InvalidConfig("stability perturbations must sit in xi1 <= -r + epsilon")
        if self.experiment == "instability":
            if not (0 < self.r1 and self.r2 > 2 * self.r1):
                raise InvalidConfig("instability band needs 0 < R1 and R2 > 2 R1")
            if pert.kind != "instability" or pert.xi_lo < self.r1 or pert.xi_hi > self.r2:
                raise InvalidConfig("instability perturbations must sit in R1 <= xi1 <= R2")

    def to_dict(self):
        return asdict(self)


def _known(cls, table, where):
    names = {f.name for f in fields(cls)}
    unknown = sorted(set(table) - names)
    if unknown:
        raise InvalidConfig(f"unknown keys in {where}: {unknown}")
    return table


def plasma_config_from_dict(data):
    """Build a PlasmaConfig from the flat top-level keys of a config mapping."""
    flat = {k: v for k, v in data.items() if not isinstance(v, dict)}
    _known(PlasmaConfig, flat, "config")
    missing = [k for k in ("u_infty", "theta_infty", "r", "sigma") if k not in flat]
    if missing:
        raise InvalidConfig(f"missing config keys: {missing}")
    try:
        return PlasmaConfig(**flat)
    except TypeError as e:
        raise InvalidConfig(str(e)) from e


def experiment_spec_from_dict(data):
    """
    Build an ExperimentSpec from a config mapping with optional
    [evolve], [perturbation] and [experiment] tables.
    """
    tables = {k: v for k, v in data.items() if isinstance(v, dict)}
    unknown_tables = sorted(set(tables) - {"evolve", "perturbation", "experiment"})
    if unknown_tables:
        raise InvalidConfig(f"unknown tables in config: {unknown_tables}")
    plasma = plasma_config_from_dict(data)
    perturbation = PerturbationSpec(**_known(PerturbationSpec, tables.get("perturbation", {}), "[perturbation]"))
    evolve_table = dict(_known(EvolveSpec, tables.get("evolve", {}), "[evolve]"))
    evolve_table.pop("perturbation", None)
    evolve = EvolveSpec(perturbation=perturbation, **evolve_table)
    experiment_table = dict(_known(ExperimentSpec, tables.get("experiment", {}), "[experiment]"))
    for key in ("fit_window", "u_values"):
        if key in experiment_table:
            experiment_table[key] = tuple(experiment_table[key])
    for key in ("plasma", "evolve"):
        experiment_table.pop(key, None)
    return ExperimentSpec(plasma=plasma, evolve=evolve, **experiment_table)
