"""Physical parameters, derived quantities and collapse-operator sets.

All values are stored in SI units with angular frequencies (rad/s) and rates
in 1/s.  Configuration files quote frequencies "per 2 pi" in MHz/GHz and
lifetimes in microseconds; conversion happens only at the file boundary.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Mapping

from .hilbert import (
    HilbertSpace,
    Operator,
    mode_annihilation,
    qutrit_projector,
    qutrit_transition,
)

__all__ = [
    "TWO_PI",
    "QutritRates",
    "DeviceParams",
    "Channel",
    "NoiseSet",
    "SIDES",
    "lambda_eff",
    "build_noise",
    "cavity_lifetimes",
    "quality_factors",
    "load_params",
    "params_from_config",
    "params_to_config",
    "ConfigError",
]

TWO_PI = 2.0 * math.pi
MHZ = TWO_PI * 1e6
GHZ = TWO_PI * 1e9
US = 1e-6
NS = 1e-9

SIDES = {
    "left": ("qutrit-L", "cav1", "cav2"),
    "right": ("qutrit-R", "cav3", "cav4"),
}


class ConfigError(ValueError):
    """Configuration file could not be parsed or failed validation."""


@dataclass(frozen=True)
class QutritRates:
    """Relaxation and dephasing rates (1/s) of one qutrit."""

    gamma_ef: float = 0.0
    gamma_gf: float = 0.0
    gamma_ge: float = 0.0
    gamma_fphi: float = 0.0
    gamma_ephi: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not v >= 0.0 or math.isinf(v):
                raise ValueError(f"{f.name} must be finite and >= 0, got {v}")

    @classmethod
    def baseline(cls) -> "QutritRates":
        return cls(
            gamma_ef=1 / (5 * US),
            gamma_gf=1 / (20 * US),
            gamma_ge=1 / (10 * US),
            gamma_fphi=1 / (5 * US),
            gamma_ephi=1 / (5 * US),
        )


@dataclass(frozen=True)
class DeviceParams:
    """Every physical constant of the two-qutrit, five-cavity device.

    Frequencies and couplings are angular (rad/s); ``delta1 = w_ge - w_c1`` and
    ``delta2 = w_c2 - w_ef`` must be positive.  ``Delta`` (cavity-cavity
    detuning) is derived from the qutrit and detuning values when left unset.
    ``mu`` has no default: it only matters when the Bell preparation is
    simulated and must then be supplied by the user.
    """

    g1: float = 19 * MHZ
    g2: float = 19 * MHZ
    delta1: float = 1 * GHZ
    delta2: float = 1 * GHZ
    mu: float | None = None
    omega_gf: float = 150 * MHZ
    omega_ge_rabi: float = 150 * MHZ
    g12: float = 0.0
    g34: float = 0.0
    Delta: float | None = None
    omega_ge: float = 5.0 * GHZ
    omega_ef: float = 7.5 * GHZ
    kappa: tuple[float, float, float, float] = (1 / (20 * US),) * 4
    rates_L: QutritRates = field(default_factory=QutritRates.baseline)
    rates_R: QutritRates = field(default_factory=QutritRates.baseline)
    t_d: float = 2 * NS
    gap_noise: bool = True

    def __post_init__(self):
        if not self.delta1 > 0 or not self.delta2 > 0:
            raise ValueError("detunings delta1, delta2 must be > 0")
        nonneg = ["g1", "g2", "omega_gf", "omega_ge_rabi", "g12", "g34",
                  "omega_ge", "omega_ef", "t_d"]
        for name in nonneg:
            v = getattr(self, name)
            if not (v >= 0.0) or math.isinf(v):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        for name in ("mu", "Delta"):
            v = getattr(self, name)
            if v is not None and (not v >= 0.0 or math.isinf(v)):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if len(self.kappa) != 4:
            raise ValueError("kappa needs one decay rate per side cavity (4 values)")
        object.__setattr__(self, "kappa", tuple(float(k) for k in self.kappa))
        if any(not k >= 0.0 or math.isinf(k) for k in self.kappa):
            raise ValueError("cavity decay rates must be finite and >= 0")

    @classmethod
    def baseline(cls, **overrides) -> "DeviceParams":
        return replace(cls(), **overrides)

    @classmethod
    def noiseless(cls, **overrides) -> "DeviceParams":
        base = cls(kappa=(0.0,) * 4, rates_L=QutritRates(), rates_R=QutritRates())
        return replace(base, **overrides)

    # derived quantities

    @property
    def omega_c1(self) -> float:
        return self.omega_ge - self.delta1

    @property
    def omega_c2(self) -> float:
        return self.omega_ef + self.delta2

    @property
    def cavity_detuning(self) -> float:
        """``Delta = w_c2 - w_c1``, explicit value if set."""
        if self.Delta is not None:
            return self.Delta
        return self.omega_c2 - self.omega_c1

    @property
    def cavity_frequencies(self) -> tuple[float, float, float, float]:
        return (self.omega_c1, self.omega_c2, self.omega_c1, self.omega_c2)

    @property
    def large_detuning(self) -> bool:
        """True when ``delta_i / g_i >= 10`` on both transitions."""
        ok1 = self.g1 == 0 or self.delta1 / self.g1 >= 10
        ok2 = self.g2 == 0 or self.delta2 / self.g2 >= 10
        return ok1 and ok2

    def rates(self, qutrit: str) -> QutritRates:
        return self.rates_L if qutrit == "qutrit-L" else self.rates_R

    def with_rates(self, rates: QutritRates) -> "DeviceParams":
        return replace(self, rates_L=rates, rates_R=rates)

    def to_dict(self) -> dict:
        """Exact SI snapshot (JSON-safe); inverse of :meth:`from_dict`."""
        d = asdict(self)
        d["kappa"] = list(self.kappa)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "DeviceParams":
        d = dict(d)
        d["kappa"] = tuple(d["kappa"])
        d["rates_L"] = QutritRates(**d["rates_L"])
        d["rates_R"] = QutritRates(**d["rates_R"])
        return cls(**d)


def lambda_eff(params: DeviceParams) -> float:
    """Effective two-photon coupling ``(g1 g2 / 2)(1/delta1 + 1/delta2)``."""
    if params.delta1 <= 0 or params.delta2 <= 0:
        raise ValueError("lambda_eff needs positive detunings")
    return 0.5 * params.g1 * params.g2 * (1 / params.delta1 + 1 / params.delta2)


def quality_factors(params: DeviceParams, omega_c: Iterable[float] | None = None) -> list[float]:
    """Loaded quality factors ``Q_k = w_k / kappa_k`` (inf for lossless cavities)."""
    omega_c = list(params.cavity_frequencies if omega_c is None else omega_c)
    return [w / k if k > 0 else math.inf for w, k in zip(omega_c, params.kappa)]


def cavity_lifetimes(
    params: DeviceParams,
    nbar: float | Iterable[float],
    omega_c: Iterable[float] | None = None,
    Q: Iterable[float] | None = None,
) -> tuple[list[float], float]:
    """Per-cavity mode lifetimes ``(Q_k / w_k) / nbar_k`` and the joint value.

    The joint lifetime of the four-mode entanglement is a quarter of the
    shortest single-cavity lifetime.  When ``Q`` is omitted it is inferred from
    the decay rates as ``Q_k = w_k / kappa_k``.
    """
    nbar = [float(nbar)] * 4 if not isinstance(nbar, Iterable) else [float(n) for n in nbar]
    omega_c = list(params.cavity_frequencies if omega_c is None else omega_c)
    if len(nbar) != 4 or len(omega_c) != 4:
        raise ValueError("need four mean photon numbers and four cavity frequencies")
    if any(n <= 0 for n in nbar) or any(w <= 0 for w in omega_c):
        raise ValueError("mean photon numbers and cavity frequencies must be > 0")
    Q = quality_factors(params, omega_c) if Q is None else [float(q) for q in Q]
    if any(q <= 0 for q in Q):
        raise ValueError("quality factors must be > 0")
    per = [(q / w) / n for q, w, n in zip(Q, omega_c, nbar)]
    return per, min(per) / 4.0


@dataclass(frozen=True)
class Channel:
    """One Lindblad channel: ``rate * D[operator]``.

    ``subsystem`` and ``kind`` identify the local jump operator so that the
    channel can be rebuilt on a different (e.g. per-side) space.
    """

    name: str
    subsystem: str
    kind: str
    rate: float
    operator: Operator


@dataclass(frozen=True)
class NoiseSet:
    channels: tuple[Channel, ...] = ()

    def __len__(self) -> int:
        return len(self.channels)

    def __iter__(self):
        return iter(self.channels)

    @property
    def space(self) -> HilbertSpace | None:
        return self.channels[0].operator.space if self.channels else None

    def rebuild(self, space: HilbertSpace) -> "NoiseSet":
        """Same channels restricted to subsystems present in ``space``."""
        out = [
            replace(ch, operator=_local_jump(space, ch.subsystem, ch.kind))
            for ch in self.channels if ch.subsystem in space
        ]
        return NoiseSet(tuple(out))


_QUTRIT_JUMPS = (
    # (kind, rate attribute)
    ("sigma_ef-", "gamma_ef"),
    ("sigma_gf-", "gamma_gf"),
    ("sigma_ge-", "gamma_ge"),
    ("sigma_ff", "gamma_fphi"),
    ("sigma_ee", "gamma_ephi"),
)


def _local_jump(space: HilbertSpace, label: str, kind: str) -> Operator:
    if kind == "a":
        return mode_annihilation(space, label)
    if kind == "sigma_ef-":
        return qutrit_transition(space, label, "f", "e")
    if kind == "sigma_gf-":
        return qutrit_transition(space, label, "f", "g")
    if kind == "sigma_ge-":
        return qutrit_transition(space, label, "e", "g")
    if kind == "sigma_ff":
        return qutrit_projector(space, label, "f")
    if kind == "sigma_ee":
        return qutrit_projector(space, label, "e")
    raise ValueError(f"unknown jump kind {kind!r}")


def build_noise(
    params: DeviceParams,
    space: HilbertSpace,
    sides: Iterable[str] | None = None,
) -> NoiseSet:
    """Collapse operators of the master equation for the subsystems in ``space``.

    Cavity decay ``a_l`` (rate ``kappa_l``), qutrit relaxation
    ``|e><f|, |g><f|, |g><e|`` and level dephasing ``|f><f|, |e><e|``.
    Channels with zero rate are omitted.  With ``sides`` given, every
    subsystem of those sides must be present.  The central cavity carries no
    channel.
    """
    if sides is not None:
        for side in sides:
            if side not in SIDES:
                raise ValueError(f"unknown side {side!r}")
            missing = [lab for lab in SIDES[side] if lab not in space]
            if missing:
                raise KeyError(f"space lacks subsystems {missing} for side {side!r}")
    channels: list[Channel] = []
    for l, cav in enumerate(("cav1", "cav2", "cav3", "cav4")):
        if cav in space and params.kappa[l] > 0:
            channels.append(
                Channel(f"kappa_{l + 1}", cav, "a", params.kappa[l], _local_jump(space, cav, "a"))
            )
    for q in ("qutrit-L", "qutrit-R"):
        if q not in space:
            continue
        rates = params.rates(q)
        for kind, attr in _QUTRIT_JUMPS:
            rate = getattr(rates, attr)
            if rate > 0:
                channels.append(Channel(f"{attr}_{q[-1]}", q, kind, rate, _local_jump(space, q, kind)))
    return NoiseSet(tuple(channels))


# --- configuration file -----------------------------------------------------

# key -> (attribute, unit factor); frequencies per 2 pi, lifetimes in us
_FREQ_KEYS = {
    "g1_MHz": ("g1", MHZ),
    "g2_MHz": ("g2", MHZ),
    "delta1_GHz": ("delta1", GHZ),
    "delta2_GHz": ("delta2", GHZ),
    "mu_MHz": ("mu", MHZ),
    "omega_gf_MHz": ("omega_gf", MHZ),
    "omega_ge_rabi_MHz": ("omega_ge_rabi", MHZ),
    "g12_MHz": ("g12", MHZ),
    "g34_MHz": ("g34", MHZ),
    "Delta_GHz": ("Delta", GHZ),
    "omega_ge_GHz": ("omega_ge", GHZ),
    "omega_ef_GHz": ("omega_ef", GHZ),
}
_RATE_NAMES = ("gamma_ef", "gamma_gf", "gamma_ge", "gamma_fphi", "gamma_ephi")


def _lifetime_to_rate(value: str, key: str) -> float:
    t = float(value)
    if t <= 0:
        raise ConfigError(f"{key}: lifetime must be > 0 (use inf for no decay)")
    return 0.0 if math.isinf(t) else 1.0 / (t * US)


def _rates_from(section: Mapping[str, str], base: QutritRates) -> QutritRates:
    vals = asdict(base)
    for name in _RATE_NAMES:
        key = f"{name}_inv_us"
        if key in section:
            vals[name] = _lifetime_to_rate(section[key], key)
    return QutritRates(**vals)


def params_from_config(text: str) -> DeviceParams:
    """Parse the INI-style device configuration.

    ``[device]`` holds frequencies per 2 pi (``g1_MHz``, ``delta1_GHz`` ...),
    lifetimes ``kappa1_inv_us`` .. ``kappa4_inv_us`` (or ``kappa_inv_us`` for
    all four), qutrit lifetimes ``gamma_ef_inv_us`` etc., ``t_d_ns`` and
    ``gap_noise``.  Optional ``[qutrit-L]`` / ``[qutrit-R]`` sections override
    the qutrit lifetimes per qutrit.  Unset keys fall back to the
    baseline; ``mu_MHz`` may be left empty.
    """
    cp = configparser.ConfigParser()
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    if "device" not in cp:
        raise ConfigError("missing [device] section")
    sec = cp["device"]
    known = set(_FREQ_KEYS) | {f"{n}_inv_us" for n in _RATE_NAMES}
    known |= {"kappa_inv_us", "t_d_ns", "gap_noise"} | {f"kappa{l}_inv_us" for l in range(1, 5)}
    unknown = [k for k in sec if k not in known]
    if unknown:
        raise ConfigError(f"unknown keys in [device]: {unknown}")
    base = DeviceParams.baseline()
    kw: dict = {}
    try:
        for key, (attr, unit) in _FREQ_KEYS.items():
            if key in sec:
                raw = sec[key].strip()
                kw[attr] = None if raw in ("", "none", "None") else float(raw) * unit
        kappa = list(base.kappa)
        if "kappa_inv_us" in sec:
            kappa = [_lifetime_to_rate(sec["kappa_inv_us"], "kappa_inv_us")] * 4
        for l in range(4):
            key = f"kappa{l + 1}_inv_us"
            if key in sec:
                kappa[l] = _lifetime_to_rate(sec[key], key)
        kw["kappa"] = tuple(kappa)
        shared = _rates_from(sec, base.rates_L)
        kw["rates_L"] = _rates_from(cp["qutrit-L"], shared) if "qutrit-L" in cp else shared
        kw["rates_R"] = _rates_from(cp["qutrit-R"], shared) if "qutrit-R" in cp else shared
        if "t_d_ns" in sec:
            kw["t_d"] = float(sec["t_d_ns"]) * NS
        if "gap_noise" in sec:
            kw["gap_noise"] = sec.getboolean("gap_noise")
        return replace(base, **kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def load_params(path: str | Path) -> DeviceParams:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return params_from_config(text)


def _fmt_lifetime(rate: float) -> str:
    return "inf" if rate == 0 else repr(1.0 / rate / US)


def params_to_config(params: DeviceParams) -> str:
    """Render ``params`` in the configuration-file schema (per-qutrit sections)."""
    lines = ["[device]"]
    for key, (attr, unit) in _FREQ_KEYS.items():
        v = getattr(params, attr)
        if key == "mu_MHz":
            lines.append("# Bell-preparation coupling: user-supplied, no default")
        lines.append(f"{key} = {'' if v is None else repr(v / unit)}")
    for l, k in enumerate(params.kappa):
        lines.append(f"kappa{l + 1}_inv_us = {_fmt_lifetime(k)}")
    lines.append(f"t_d_ns = {params.t_d / NS!r}")
    lines.append(f"gap_noise = {'true' if params.gap_noise else 'false'}")
    for q, rates in (("qutrit-L", params.rates_L), ("qutrit-R", params.rates_R)):
        lines.append("")
        lines.append(f"[{q}]")
        for name in _RATE_NAMES:
            lines.append(f"{name}_inv_us = {_fmt_lifetime(getattr(rates, name))}")
    return "\n".join(lines) + "\n"
