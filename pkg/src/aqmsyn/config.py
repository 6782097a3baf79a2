"""Run configuration: one INI file, strictly validated.

The file is the single input to every command.  Parsing is fail-closed:
a section or key this module does not know is an error, not a warning,
because a typo like `bufer_pkts` silently falling back to a default
would invalidate whatever certificate the run produces.

Sections and keys:

    [network]      N, C, Tp, q0, buffer
    [uncertainty]  R0_min, R0_max
    [synthesis]    method (iod | iod-robust | dd), r, h_tol, max_iters
    [simulation]   scenario (nominal | fig1 | fig2 | fig3), horizon, dt
    [gain]         k1, k2          (optional: an externally chosen gain)
    [output]       dir

Only [network] is mandatory; commands check for the blocks they need.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass

from .model import ModelError, NetworkParams

__all__ = ["ConfigError", "RunConfig", "load_config"]

_SCHEMA = {
    "network": {"N", "C", "Tp", "q0", "buffer"},
    "uncertainty": {"R0_min", "R0_max"},
    "synthesis": {"method", "r", "h_tol", "max_iters"},
    "simulation": {"scenario", "horizon", "dt"},
    "gain": {"k1", "k2"},
    "output": {"dir"},
}
_METHODS = ("iod", "iod-robust", "dd")
_SCENARIOS = ("nominal", "fig1", "fig2", "fig3")


class ConfigError(ValueError):
    """The configuration file is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class RunConfig:
    params: NetworkParams
    R0_min: float | None = None
    R0_max: float | None = None
    method: str = "dd"
    r: int = 1
    h_tol: float = 1e-3
    max_iters: int = 20
    scenario: str = "nominal"
    horizon: float | None = None
    dt: float = 1e-3
    gain: tuple[float, float] | None = None
    out_dir: str = "out"

    def require_uncertainty(self) -> tuple[float, float]:
        if self.R0_min is None or self.R0_max is None:
            raise ConfigError("invalid configuration: [uncertainty] block required")
        return self.R0_min, self.R0_max


def _getfloat(sec, key: str, section: str) -> float:
    try:
        return float(sec[key])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: [{section}] {key}: {exc}") from exc


def load_config(path: str) -> RunConfig:
    """Parse and validate; every failure raises ConfigError."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str  # keys are case-sensitive symbols (N, C, Tp, R0_min)
    read = cp.read(path)
    if not read:
        raise ConfigError(f"invalid configuration: cannot read {path}")

    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"invalid configuration: unknown section [{section}]")
        for key in cp[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(
                    f"invalid configuration: unknown key {key} in [{section}]"
                )

    if "network" not in cp:
        raise ConfigError("invalid configuration: [network] block required")
    net = cp["network"]
    for key in _SCHEMA["network"] - {"buffer"}:
        if key not in net:
            raise ConfigError(f"invalid configuration: [network] missing {key}")
    try:
        params = NetworkParams(
            N=_getfloat(net, "N", "network"),
            C=_getfloat(net, "C", "network"),
            Tp=_getfloat(net, "Tp", "network"),
            q0=_getfloat(net, "q0", "network"),
            buffer=_getfloat(net, "buffer", "network") if "buffer" in net else 800.0,
        )
    except ModelError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc

    kw: dict = {"params": params}

    if "uncertainty" in cp:
        lo = _getfloat(cp["uncertainty"], "R0_min", "uncertainty")
        hi = _getfloat(cp["uncertainty"], "R0_max", "uncertainty")
        if not (0.0 < lo <= hi):
            raise ConfigError(f"invalid configuration: bad interval [{lo}, {hi}]")
        kw["R0_min"], kw["R0_max"] = lo, hi

    if "synthesis" in cp:
        syn = cp["synthesis"]
        method = syn.get("method", "dd")
        if method not in _METHODS:
            raise ConfigError(f"invalid configuration: unknown method {method}")
        kw["method"] = method
        if "r" in syn:
            try:
                kw["r"] = int(syn["r"])
            except ValueError as exc:
                raise ConfigError(f"invalid configuration: r: {exc}") from exc
            if kw["r"] < 1:
                raise ConfigError("invalid configuration: r must be >= 1")
        if "h_tol" in syn:
            kw["h_tol"] = _getfloat(syn, "h_tol", "synthesis")
            if kw["h_tol"] <= 0.0:
                raise ConfigError("invalid configuration: h_tol must be > 0")
        if "max_iters" in syn:
            try:
                kw["max_iters"] = int(syn["max_iters"])
            except ValueError as exc:
                raise ConfigError(f"invalid configuration: max_iters: {exc}") from exc
            if kw["max_iters"] < 1:
                raise ConfigError("invalid configuration: max_iters must be >= 1")

    if "simulation" in cp:
        simsec = cp["simulation"]
        scn = simsec.get("scenario", "nominal")
        if scn not in _SCENARIOS:
            raise ConfigError(f"invalid configuration: unknown scenario {scn}")
        kw["scenario"] = scn
        if "horizon" in simsec:
            kw["horizon"] = _getfloat(simsec, "horizon", "simulation")
            if kw["horizon"] <= 0.0:
                raise ConfigError("invalid configuration: horizon must be > 0")
        if "dt" in simsec:
            kw["dt"] = _getfloat(simsec, "dt", "simulation")
            if kw["dt"] <= 0.0:
                raise ConfigError("invalid configuration: dt must be > 0")

    if "gain" in cp:
        g = cp["gain"]
        for key in ("k1", "k2"):
            if key not in g:
                raise ConfigError(f"invalid configuration: [gain] missing {key}")
        kw["gain"] = (_getfloat(g, "k1", "gain"), _getfloat(g, "k2", "gain"))

    if "output" in cp and "dir" in cp["output"]:
        kw["out_dir"] = cp["output"]["dir"]

    return RunConfig(**kw)
