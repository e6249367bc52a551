"""Flat key/value run configuration with dotted sections.

Config files hold one ``section.key = value`` pair per line; ``#`` starts a
comment.  Values are parsed as int, float, bool, comma lists, or strings.
Polynomial systems use the monomial table syntax
``system.monomials = comp,coeff,p1,p2; comp,coeff,p1,p2; ...`` with
1-based component indices.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from .grid import TAU


class ConfigError(ValueError):
    pass


_DEFAULTS = {
    "system.name": "lambda_omega",
    "system.omega0": 1.0,
    "system.omega1": 0.5,
    "system.a": 1.0,
    "system.b": 2.2,
    "system.n": 2,
    "system.monomials": "",
    "family.kmin": 0.3,
    "family.kmax": 0.7,
    "family.steps": 20,
    "grid.n_theta": 64,
    "modulation.kbar": 0.45,
    "modulation.phase_winding": 0.56,
    "modulation.amplitude": 0.05,
    "modulation.width": 0.8,
    "modulation.nx": 64,
    "modulation.dt": 1.0 / 128.0,
    "modulation.T": 0.0,          # 0 = use half the blow-up estimate
    "expansion.m": 2,
    "expansion.n_theta": 32,
    "epsilon": "0.04,0.028,0.02,0.014,0.01",
    "stability.k": 0.45,
    "stability.xi_max": 0.5,
    "stability.n_xi": 41,
    "stability.eta": "0",
    "stability.curve_xi_max": 0.08,
    "symmetrizer.R": 10.0,
    "symmetrizer.k": 0.5,
    "symmetrizer.steps": 2048,
    "symmetrizer.tamper_sign": False,   # test hook: flips S, must fail
    "simulation.s": 2,
    "simulation.dt": 1e-3,
    "simulation.snapshots": 4,
    "simulation.min_ppw": 16,
    "seed": 0,
    "output.dir": "out",
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = dict(_DEFAULTS)
        merged.update(self.values)
        self.values = merged
        self.validate()

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def eps_list(self):
        raw = self.values["epsilon"]
        if isinstance(raw, str):
            return [float(v) for v in raw.split(",") if v.strip()]
        return [float(v) for v in np.atleast_1d(raw)]

    @property
    def domain_length(self) -> float:
        return TAU * float(self.values["modulation.phase_winding"]) \
            / float(self.values["modulation.kbar"])

    def validate(self):
        v = self.values
        for key, val in v.items():
            if isinstance(val, float) and not np.isfinite(val):
                raise ConfigError("non-finite value for %s" % key)
        if v["system.name"] not in ("lambda_omega", "brusselator", "polynomial"):
            raise ConfigError("unknown system.name %r" % v["system.name"])
        if not (0 < float(v["family.kmin"]) < float(v["family.kmax"])):
            raise ConfigError("need 0 < family.kmin < family.kmax")
        if int(v["expansion.m"]) not in (0, 1, 2):
            raise ConfigError("expansion.m must be 0, 1 or 2")
        if int(v["grid.n_theta"]) < 8 or int(v["grid.n_theta"]) % 2:
            raise ConfigError("grid.n_theta must be even and >= 8")
        kb = float(v["modulation.kbar"])
        if not (float(v["family.kmin"]) <= kb <= float(v["family.kmax"])):
            raise ConfigError("modulation.kbar outside the family range")
        for e in self.eps_list:
            if e <= 0:
                raise ConfigError("epsilon values must be positive")
        if float(v["stability.k"]) <= 0 or float(v["symmetrizer.k"]) <= 0:
            raise ConfigError("wavenumbers must be positive")

    def build_system(self):
        from . import systems
        name = self.values["system.name"]
        if name == "lambda_omega":
            return systems.make_lambda_omega(float(self.values["system.omega0"]),
                                             float(self.values["system.omega1"]))
        if name == "brusselator":
            return systems.make_brusselator(float(self.values["system.a"]),
                                            float(self.values["system.b"]))
        monos = parse_monomials(self.values["system.monomials"])
        return systems.make_polynomial("polynomial",
                                       int(self.values["system.n"]), monos)

    def as_dict(self):
        return dict(self.values)


def parse_monomials(text: str):
    """Triples ``component,coeff,p1,...,pn`` separated by semicolons."""
    out = []
    for chunk in str(text).split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) < 3:
            raise ConfigError("monomial needs component,coeff,powers: %r" % chunk)
        comp = int(parts[0]) - 1
        coeff = float(parts[1])
        powers = tuple(int(p) for p in parts[2:])
        out.append((comp, coeff, powers))
    return out


def _parse_value(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        iv = int(text)
        return iv
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def load_config(path) -> RunConfig:
    values = {}
    try:
        with open(path) as fh:
            for ln, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError("line %d: expected key = value" % ln)
                key, val = line.split("=", 1)
                key = key.strip()
                if key not in _DEFAULTS:
                    raise ConfigError("line %d: unknown key %r" % (ln, key))
                values[key] = _parse_value(val)
    except OSError as exc:
        raise ConfigError("cannot read config %s: %s" % (path, exc))
    return RunConfig(values)
