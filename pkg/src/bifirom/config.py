"""INI run configuration shared by the CLI subcommands.

Example::

    [problem]
    id = high-contrast
    [grids]
    hf = 128x128
    lf = 4x4
    [sampling]
    n_p = 512
    test_n = 512
    seed_train = 0
    seed_test = 1
    [rom]
    N_rb = 8
    n_L = 5
    n_f = 1
    nrb_list = 2,4,6,8      ; optional, used by ``bench``
    basis = gram-schmidt    ; optional
    [iteration]
    method = default        ; default | picard | newton
    tol_rel = 1e-10
    max_iter = 50
    [output]
    dir = out/high-contrast
"""
import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ContractError
from .fem import StructuredGrid
from .nonlinear import IterationConfig
from .offline import OfflineConfig
from .problems import get_problem

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_int_list"]


class ConfigError(ContractError):
    """Malformed or inconsistent configuration file."""


def parse_int_list(text):
    try:
        out = [int(t) for t in str(text).replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated integer list, got {text!r}") from exc
    if not out:
        raise ConfigError("empty integer list")
    return out


@dataclass(frozen=True)
class RunConfig:
    problem: str
    hf_grid: StructuredGrid
    lf_grid: StructuredGrid
    n_p: int
    test_n: int
    seed_train: int
    seed_test: int
    N_rb: int
    n_L: int
    n_f: int
    iteration: IterationConfig = IterationConfig()
    output_dir: Path = Path("out")
    nrb_list: tuple = field(default=())
    basis: str = "gram-schmidt"

    def __post_init__(self):
        if self.test_n < 1:
            raise ConfigError("test_n must be >= 1")
        if self.seed_train == self.seed_test:
            raise ConfigError("seed_train and seed_test must differ so the test set is independent")
        try:
            self.offline(self.N_rb)
            for n in self.nrb_list:
                self.offline(n)
        except ConfigError:
            raise
        except ContractError as exc:
            raise ConfigError(str(exc)) from exc

    def offline(self, N_rb=None):
        return OfflineConfig(
            problem=self.problem,
            hf_grid=self.hf_grid,
            lf_grid=self.lf_grid,
            n_p=self.n_p,
            N_rb=self.N_rb if N_rb is None else N_rb,
            n_L=self.n_L,
            n_f=self.n_f,
            seed=self.seed_train,
            hf_iteration=self.iteration,
            lf_iteration=self.iteration,
            basis=self.basis,
        )


def _get(cp, section, key, conv=str, default=None):
    if not cp.has_option(section, key):
        if default is None:
            raise ConfigError(f"missing [{section}] {key}")
        return default
    raw = cp.get(section, key)
    try:
        return conv(raw)
    except (ValueError, ContractError) as exc:
        raise ConfigError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from exc


def load_config(path):
    """Parse and validate a run configuration file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keys are case-sensitive (N_rb vs n_L)
    try:
        read = cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if not read:
        raise ConfigError(f"cannot read config file {path}")

    pid = _get(cp, "problem", "id")
    try:
        problem = get_problem(pid)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    bounds = problem.spatial_domain

    def grid(text):
        return StructuredGrid.parse(text, bounds)

    method = _get(cp, "iteration", "method", str, "default")
    if method not in ("default", "picard", "newton"):
        raise ConfigError(f"[iteration] method must be default, picard or newton, got {method!r}")
    if method != "default" and problem.nonlinearity != "linear" and method not in problem.linearizations:
        raise ConfigError(f"problem {pid} does not support the {method} linearization")
    try:
        iteration = IterationConfig(
            method=None if method == "default" or problem.nonlinearity == "linear" else method,
            tol_rel=_get(cp, "iteration", "tol_rel", float, 1e-10),
            max_iter=_get(cp, "iteration", "max_iter", int, 50),
        )
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(
        problem=pid,
        hf_grid=_get(cp, "grids", "hf", grid),
        lf_grid=_get(cp, "grids", "lf", grid),
        n_p=_get(cp, "sampling", "n_p", int),
        test_n=_get(cp, "sampling", "test_n", int),
        seed_train=_get(cp, "sampling", "seed_train", int),
        seed_test=_get(cp, "sampling", "seed_test", int),
        N_rb=_get(cp, "rom", "N_rb", int),
        n_L=_get(cp, "rom", "n_L", int),
        n_f=_get(cp, "rom", "n_f", int),
        iteration=iteration,
        output_dir=Path(_get(cp, "output", "dir", str, "out")),
        nrb_list=tuple(_get(cp, "rom", "nrb_list", parse_int_list, [])),
        basis=_get(cp, "rom", "basis", str, "gram-schmidt"),
    )
