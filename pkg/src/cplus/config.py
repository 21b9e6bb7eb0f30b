"""Run configuration: validated up front and hashed into every output.

Config files are INI with a single ``[run]`` section, e.g.::

    [run]
    A = 36/11
    degree = 40
    epsilon = 1e-7
    precision_bits = 256
    solver = sdpa-python
    workspace = runs/a3611

Any key may be omitted; command-line flags override file values.  The
workspace defaults to $CPLUS_WORKSPACE, then the current directory.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction

from .rigor import MAX_PRECISION, MIN_PRECISION

WORKSPACE_ENV = "CPLUS_WORKSPACE"

SOLVER_TEMPLATES = {
    "sdpa-python": "{python} -m cplus.drivers.sdpa_python {input} {output}",
    "sdpa-gmp": "sdpa_gmp -ds {input} -o {output}",
    "sdpa-qd": "sdpa_qd -ds {input} -o {output}",
    "sdpa-dd": "sdpa_dd -ds {input} -o {output}",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    A: Fraction = Fraction(36, 11)
    degree: int = 40
    epsilon: str = "1e-20"
    precision_bits: int = 256
    max_precision_bits: int = MAX_PRECISION
    digits: int = 60
    solver: str = "sdpa-python"
    workspace: str = ""
    quadrature_tolerance: str = "1e-15"
    tail_tolerance: str = "1e-25"
    quadrature_budget: int = 1_000_000

    def __post_init__(self):
        object.__setattr__(self, "A", _fraction(self.A, "A"))
        if not self.workspace:
            object.__setattr__(self, "workspace", os.environ.get(WORKSPACE_ENV, os.getcwd()))
        self.validate()

    def validate(self) -> None:
        if self.A < 1:
            raise ConfigError(f"A must be >= 1, got {self.A}")
        if not isinstance(self.degree, int) or self.degree < 2:
            raise ConfigError(f"degree must be an integer >= 2, got {self.degree!r}")
        if self.epsilon_fraction < 0:
            raise ConfigError("epsilon must be nonnegative")
        if not MIN_PRECISION <= self.precision_bits <= self.max_precision_bits:
            raise ConfigError(
                f"precision_bits must lie in [{MIN_PRECISION}, {self.max_precision_bits}], got {self.precision_bits}"
            )
        if self.digits < 17:
            raise ConfigError("digits must be at least 17")
        for name in ("quadrature_tolerance", "tail_tolerance"):
            if _fraction(getattr(self, name), name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.quadrature_budget < 64:
            raise ConfigError("quadrature_budget must be at least 64")
        self.solver_template  # raises on a malformed template

    @property
    def epsilon_fraction(self) -> Fraction:
        return _fraction(self.epsilon, "epsilon")

    @property
    def solver_template(self) -> str:
        template = SOLVER_TEMPLATES.get(self.solver, self.solver)
        if "{input}" not in template or "{output}" not in template:
            raise ConfigError("solver command template needs {input} and {output} placeholders")
        return template

    def solver_command(self, input_path: str, output_path: str) -> str:
        import shlex

        return self.solver_template.format(
            python=shlex.quote(sys.executable),
            input=shlex.quote(input_path),
            output=shlex.quote(output_path),
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["A"] = str(self.A)
        d.pop("workspace")
        return d

    def digest(self) -> str:
        """Hash of everything that affects results (the workspace path does not)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def path(self, name: str) -> str:
        return os.path.join(self.workspace, name)


def _fraction(x, name: str) -> Fraction:
    try:
        return Fraction(str(x).strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{name}: cannot parse {x!r} as a rational number") from exc


_INT_FIELDS = {"degree", "precision_bits", "max_precision_bits", "digits", "quadrature_budget"}


def load(path: str | None = None, **overrides) -> RunConfig:
    """Build a RunConfig from an optional INI file plus keyword overrides."""
    values: dict = {}
    if path:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not parser.has_section("run"):
            raise ConfigError(f"{path}: missing [run] section")
        fields = {f.name for f in dataclasses.fields(RunConfig)}
        for key, raw in parser.items("run"):
            # configparser lowercases keys
            name = "A" if key == "a" else key
            if name not in fields:
                raise ConfigError(f"{path}: unknown key {key!r}")
            values[name] = raw
    values.update({k: v for k, v in overrides.items() if v is not None})
    for key in _INT_FIELDS & values.keys():
        try:
            values[key] = int(values[key])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key} must be an integer, got {values[key]!r}") from exc
    for key in ("epsilon", "quadrature_tolerance", "tail_tolerance", "solver", "workspace"):
        if key in values:
            values[key] = str(values[key])
    return RunConfig(**values)
