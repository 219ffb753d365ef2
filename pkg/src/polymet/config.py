"""Plain-text suite configuration.

A config is an INI file read with :mod:`configparser`::

    [run]
    suite = all
    seed = 42
    output = report.json

    [tolerances]
    curvature.sphere = 1e-4

    [cone]
    pairs = 20

Section ``[run]`` carries the suite name, the seed and the output path.
``[tolerances]`` overrides individual check tolerances by ``suite.check``
name.  One section per suite overrides that suite's parameters.  Unknown
sections, keys and tolerance names are rejected, and so are nonpositive
tolerances.
"""

import configparser
import re
from dataclasses import dataclass, field

from .errors import ConfigInvalid, UnknownSuite

SUITES = ("cone", "curvature", "gauge", "geodesic", "chern", "index", "scales")

# Suite parameters and their defaults.  The defaults size every suite for a
# quick desk run; the acceptance tests drive the library at full size.
PARAMETERS = {
    "cone": {"pairs": 20, "resolution": 32, "t_steps": 21, "perturbations": 100},
    "curvature": {"sphere_resolution": 256, "half_plane_resolution": 257, "torus_resolution": 32},
    "gauge": {"trials": 4, "resolution": 32, "slice_resolution": 16},
    "geodesic": {"t_end": 2.0, "dt": 1e-3, "resolution": 32, "samples": 4},
    "chern": {"sphere_resolution": 128, "torus_resolution": 32, "family_size": 5},
    "index": {"torus_resolution": 17, "circle_resolution": 65, "callias_n": 2000, "sphere_band": 8, "family_size": 3},
    "scales": {"resolution": 33, "fields": 20, "warped_per_unit": 6},
}

TOLERANCES = {
    "cone.john_square": 1e-6,
    "curvature.sphere": 1e-4,
    "curvature.half_plane": 1e-5,
    "curvature.flat_torus": 1e-10,
    "curvature.symmetry": 1e-6,
    "curvature.bianchi": 1e-6,
    "gauge.adjoint": 1e-6,
    "gauge.conformal": 1e-4,
    "gauge.scaling_law": 1e-6,
    "gauge.slice_reconstruction": 1e-6,
    "gauge.slice_divergence": 1e-5,
    "gauge.slice_cosine": 1e-6,
    "geodesic.flat_line": 1e-12,
    "geodesic.equator": 1e-6,
    "geodesic.drift": 1e-5,
    "geodesic.refinement": 1e-4,
    "chern.gauss_bonnet_sphere": 1e-3,
    "chern.gauss_bonnet_torus": 1e-4,
    "chern.family": 1e-4,
    "scales.identical": 1e-9,
    "scales.scaling": 1e-4,
    "scales.euclidean_diagonal": 0.08,
    "scales.sine_norm": 1e-8,
    "scales.duplication": 1e-12,
    "scales.envelope": 1e-12,
}

RUN_KEYS = {"suite", "seed", "output"}


@dataclass
class SuiteConfig:
    suite: str
    seed: int = 42
    output: str = ""
    parameters: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def suites(self):
        return SUITES if self.suite == "all" else (self.suite,)

    def params(self, suite):
        merged = dict(PARAMETERS[suite])
        merged.update(self.parameters.get(suite, {}))
        return merged

    def tolerance(self, name):
        return self.tolerances.get(name, TOLERANCES[name])

    def echo(self):
        """Complete, re-runnable configuration as a nested dict."""
        return {
            "run": {"suite": self.suite, "seed": self.seed},
            "parameters": {s: self.params(s) for s in self.suites()},
            "tolerances": {k: self.tolerance(k) for k in sorted(TOLERANCES) if k.split(".")[0] in self.suites()},
        }


def _line_of(text, section, key=None):
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section:
            k = re.split(r"[=:]", line, maxsplit=1)[0].strip().lower()
            if k == key:
                return no
    return 0


def _coerce(value, default, where):
    try:
        if isinstance(default, bool):
            return value.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(value)
        return float(value)
    except ValueError as exc:
        raise ConfigInvalid(f"{where}: cannot parse {value!r} as {type(default).__name__}") from exc


def validate_suite(name):
    if name != "all" and name not in SUITES:
        raise UnknownSuite(f"unknown suite {name!r}; expected one of {', '.join(SUITES + ('all',))}")
    return name


def parse_config(text, source="<config>"):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigInvalid(f"{source}: {exc}") from exc

    def where(section, key=None):
        line = _line_of(text, section, key)
        loc = f"{source}:{line}" if line else source
        return f"{loc} [{section}]" + (f" {key}" if key else "")

    if not parser.has_section("run"):
        raise ConfigInvalid(f"{source}: missing [run] section")
    for section in parser.sections():
        if section not in ("run", "tolerances") and section not in SUITES:
            raise ConfigInvalid(f"{where(section)}: unknown section")
    run = parser["run"]
    for key in run:
        if key not in RUN_KEYS:
            raise ConfigInvalid(f"{where('run', key)}: unknown key")
    if "suite" not in run:
        raise ConfigInvalid(f"{where('run')}: 'suite' is required")
    suite = validate_suite(run["suite"].strip())
    if "seed" not in run:
        raise ConfigInvalid(f"{where('run')}: 'seed' is required")
    seed = _coerce(run["seed"], 0, where("run", "seed"))
    if not 0 <= seed < 2**64:
        raise ConfigInvalid(f"{where('run', 'seed')}: seed must be a 64-bit unsigned integer")
    cfg = SuiteConfig(suite, seed, run.get("output", "").strip())

    if parser.has_section("tolerances"):
        for key, value in parser["tolerances"].items():
            if key not in TOLERANCES:
                raise ConfigInvalid(f"{where('tolerances', key)}: unknown tolerance")
            tol = _coerce(value, 0.0, where("tolerances", key))
            if not tol > 0:
                raise ConfigInvalid(f"{where('tolerances', key)}: tolerance must be > 0, got {value.strip()}")
            cfg.tolerances[key] = tol
    for s in SUITES:
        if not parser.has_section(s):
            continue
        for key, value in parser[s].items():
            if key not in PARAMETERS[s]:
                raise ConfigInvalid(f"{where(s, key)}: unknown parameter")
            val = _coerce(value, PARAMETERS[s][key], where(s, key))
            if not val > 0:
                raise ConfigInvalid(f"{where(s, key)}: parameter must be > 0, got {value.strip()}")
            cfg.parameters.setdefault(s, {})[key] = val
    return cfg


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigInvalid(f"{path}: {exc}") from exc
    return parse_config(text, str(path))
