"""
Loads flat `key = value` run configuration files.

Format:
    # comment line
    example = 1
    scheme  = hdpg      # inline comments are fine
    seeds   = 1,2,3
    r       = '0.6'     # surrounding quotes are stripped

Keys are matched case-sensitively against KNOWN_KEYS; anything else is a
ConfigError so that a typo never silently falls back to a default.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

from hdpg.errors import ConfigError

KNOWN_KEYS = {
    'example', 'scheme', 'm', 'alpha', 'nu', 'law',
    'nx', 'ny', 'k0', 'k',
    'N_u', 'N_uhat', 'N_p', 'N_sigma', 'N_sigmahat',
    'r', 'r_stokes', 'r_darcy', 'eta', 'tau', 'M',
    'quad_order', 'error_quad_order', 'seeds', 'shared_weights', 'out',
}


def parse_config_lines(lines: List[str]) -> Dict[str, str]:
    """Parse `key = value` lines into a dict of raw strings."""
    result: Dict[str, str] = {}
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        if '=' not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        k, v = line.split('=', 1)
        k = k.strip()
        v = v.strip()
        # Remove inline comments first, then strip surrounding quotes
        if '#' in v:
            v = v.split('#', 1)[0].strip()
        if (len(v) >= 2) and ((v[0] == v[-1]) and v[0] in ('"', "'")):
            v = v[1:-1]
        else:
            v = v.strip('"').strip("'")
        if k not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {k!r}")
        result[k] = v
    return result


def load_config(path: str) -> Dict[str, str]:
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, 'r', encoding='utf-8') as f:
        return parse_config_lines(f.readlines())


def parse_seed_list(text: str) -> List[int]:
    """'1,2,5-7' -> [1, 2, 5, 6, 7]"""
    seeds: List[int] = []
    for part in text.replace(';', ',').split(','):
        part = part.strip()
        if not part:
            continue
        try:
            if '-' in part[1:]:
                lo, hi = part.split('-', 1)
                seeds.extend(range(int(lo), int(hi) + 1))
            else:
                seeds.append(int(part))
        except ValueError:
            raise ConfigError(f"invalid seed entry {part!r}") from None
    if not seeds:
        raise ConfigError('seed list is empty')
    return seeds


def parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ('1', 'true', 'yes', 'on'):
        return True
    if t in ('0', 'false', 'no', 'off'):
        return False
    raise ConfigError(f"invalid boolean {text!r}")


def parse_float(text: Optional[str], key: str) -> Optional[float]:
    if text is None or text == '':
        return None
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def parse_int(text: Optional[str], key: str) -> Optional[int]:
    if text is None or text == '':
        return None
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


DEFAULT_SEEDS = tuple(range(1, 11))


@dataclass(frozen=True)
class RunConfig:
    """One parameter row of an experiment; every seed in `seeds` is run on it."""
    example: int
    scheme: str = ''
    m: int = 1
    alpha: Optional[float] = None
    nu: Optional[float] = None
    law: str = 'BJ'
    nx: Optional[int] = None
    ny: Optional[int] = None
    k0: int = 5
    k: Optional[int] = None
    N_u: Optional[int] = None
    N_uhat: Optional[int] = None
    N_p: Optional[int] = None
    N_sigma: Optional[int] = None
    N_sigmahat: Optional[int] = None
    r: float = 1.0
    r_stokes: Optional[float] = None
    r_darcy: Optional[float] = None
    eta: float = 0.0
    tau: float = 0.0
    M: int = 30
    quad_order: Optional[int] = None
    error_quad_order: Optional[int] = None
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    shared_weights: bool = False
    out: Optional[str] = None
    # set by reproduction presets
    table: str = ''

    def __post_init__(self):
        if self.example not in (1, 2, 3, 4, 5):
            raise ConfigError(f"unknown example {self.example}")
        if not self.seeds:
            raise ConfigError('seed list is empty')
        object.__setattr__(self, 'seeds', tuple(int(s) for s in self.seeds))
        for key in ('nx', 'ny'):
            v = getattr(self, key)
            if v is not None and v < 1:
                raise ConfigError(f"{key} must be >= 1, got {v}")
        if self.k0 < 0:
            raise ConfigError(f"k0 must be >= 0, got {self.k0}")
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if self.M < 1:
            raise ConfigError(f"M must be >= 1, got {self.M}")

    def with_overrides(self, **kwargs) -> 'RunConfig':
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


def parse_example_id(text: str) -> int:
    t = text.strip().lower()
    if t.startswith('ex'):
        t = t[2:]
    value = parse_int(t, 'example')
    if value is None:
        raise ConfigError('example is required')
    return value


def run_config_from_mapping(raw: Dict[str, str]) -> RunConfig:
    """Coerce raw `key = value` strings into a RunConfig."""
    if 'example' not in raw:
        raise ConfigError("config needs an 'example' key")
    kwargs: Dict[str, object] = {'example': parse_example_id(raw['example'])}
    for key in ('scheme', 'law', 'out'):
        if raw.get(key):
            kwargs[key] = raw[key]
    for key in ('m', 'nx', 'ny', 'k0', 'k', 'N_u', 'N_uhat', 'N_p', 'N_sigma', 'N_sigmahat',
                'M', 'quad_order', 'error_quad_order'):
        value = parse_int(raw.get(key), key)
        if value is not None:
            kwargs[key] = value
    for key in ('alpha', 'nu', 'r', 'r_stokes', 'r_darcy', 'eta', 'tau'):
        value = parse_float(raw.get(key), key)
        if value is not None:
            kwargs[key] = value
    if raw.get('seeds'):
        kwargs['seeds'] = tuple(parse_seed_list(raw['seeds']))
    if raw.get('shared_weights'):
        kwargs['shared_weights'] = parse_bool(raw['shared_weights'])
    return RunConfig(**kwargs)


def load_run_config(path: str) -> RunConfig:
    return run_config_from_mapping(load_config(path))
