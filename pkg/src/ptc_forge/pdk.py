"""Process design kit (PDK) parameters and file loading.

Lengths and widths are in um, areas of electrical parts in mm^2, powers in
mW, times in ps, frequencies in GHz. Files are TOML with an equivalent JSON
form; two presets ship with the package (``gf`` and ``custom``).
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .errors import InvalidPdk, MissingPdkEntry

try:  # pragma: no cover - depends on interpreter version
    import tomllib
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib

PRESETS = ("gf", "custom")


@dataclass(frozen=True)
class PhaseShifter:
    length: float
    width: float
    insertion_loss: float = 0.0
    static_power: float = 0.0


@dataclass(frozen=True)
class Coupler:
    length: float
    insertion_loss: float = 0.0


@dataclass(frozen=True)
class Crossing:
    length: float = 10.0
    width: float = 10.0
    insertion_loss: float = 0.0


@dataclass(frozen=True)
class YBranch:
    length: float
    insertion_loss: float = 0.0


@dataclass(frozen=True)
class Spacing:
    dl: float = 20.0
    dw: float = 100.0
    dl_cr: float = 1.0
    dw_cr: float = 1.0


@dataclass(frozen=True)
class Electrical:
    a_tia: float
    a_pd: float
    a_mzm: float
    a_dac: float
    a_adc: float
    p_mzm: float
    p_tia: float
    p_pd: float
    p_dac0: float
    p_adc0: float
    b0: int
    f_s: float
    tau_dac: float = 10.0
    tau_pd: float = 10.0

    @property
    def area_per_channel(self) -> float:
        return self.a_tia + self.a_pd + self.a_mzm + self.a_dac + self.a_adc


@dataclass(frozen=True)
class Optics:
    eta: float
    s_pd: float
    n_g: float
    c0: float = 299.792458  # um/ps


@dataclass(frozen=True)
class System:
    f: float = 10.0
    b: int = 4


@dataclass(frozen=True)
class Pdk:
    ps: PhaseShifter
    dc: Mapping[int, Coupler]
    cr: Crossing
    ybranch: YBranch
    spacing: Spacing
    electrical: Electrical
    optics: Optics
    system: System = field(default_factory=System)
    name: str = "unnamed"

    def __post_init__(self):
        object.__setattr__(self, "dc", {int(n): c for n, c in sorted(self.dc.items())})
        self.validate()

    def validate(self) -> None:
        positive = {
            "ps.length": self.ps.length,
            "ps.width": self.ps.width,
            "cr.length": self.cr.length,
            "cr.width": self.cr.width,
            "ybranch.length": self.ybranch.length,
            "spacing.dl": self.spacing.dl,
            "spacing.dw": self.spacing.dw,
            "electrical.f_s": self.electrical.f_s,
            "system.f": self.system.f,
            "optics.c0": self.optics.c0,
        }
        for n, c in self.dc.items():
            positive[f"dc.{n}.length"] = c.length
            if n < 2:
                raise InvalidPdk(f"dc map keys must be port counts >= 2, got {n}")
        for name, value in positive.items():
            if not (math.isfinite(value) and value > 0):
                raise InvalidPdk(f"{name} must be positive, got {value}")
        nonneg = {
            "spacing.dl_cr": self.spacing.dl_cr,
            "spacing.dw_cr": self.spacing.dw_cr,
            "optics.n_g": self.optics.n_g,
            "ps.static_power": self.ps.static_power,
        }
        for f in dataclasses.fields(Electrical):
            if f.name not in ("b0", "f_s"):
                nonneg[f"electrical.{f.name}"] = getattr(self.electrical, f.name)
        for name, value in nonneg.items():
            if not (math.isfinite(value) and value >= 0):
                raise InvalidPdk(f"{name} must be non-negative, got {value}")
        if not 0 < self.optics.eta <= 1:
            raise InvalidPdk(f"optics.eta must lie in (0, 1], got {self.optics.eta}")
        if self.system.b < 1 or self.electrical.b0 < 1:
            raise InvalidPdk("bit resolutions b and b0 must be >= 1")

    def coupler(self, n_ports: int) -> Coupler:
        """Coupler entry for ``n_ports``; a 1-port slot is a bare waveguide."""
        if n_ports == 1:
            return Coupler(length=0.0, insertion_loss=0.0)
        try:
            return self.dc[n_ports]
        except KeyError:
            raise MissingPdkEntry(f"pdk '{self.name}' has no {n_ports}-port coupler") from None

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["dc"] = {str(n): dataclasses.asdict(c) for n, c in self.dc.items()}
        return d

    def replace(self, **sections: Any) -> "Pdk":
        return dataclasses.replace(self, **sections)


_SECTIONS = {
    "ps": PhaseShifter,
    "cr": Crossing,
    "ybranch": YBranch,
    "spacing": Spacing,
    "electrical": Electrical,
    "optics": Optics,
    "system": System,
}


def pdk_from_dict(data: Mapping[str, Any]) -> Pdk:
    """Build a :class:`Pdk` from nested plain data, reporting bad fields."""
    kwargs: dict[str, Any] = {"name": str(data.get("name", "unnamed"))}
    for section, cls in _SECTIONS.items():
        raw = data.get(section)
        if raw is None:
            if section == "system":
                kwargs[section] = System()
                continue
            raise InvalidPdk(f"missing section [{section}]")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise InvalidPdk(f"unknown field(s) in [{section}]: {sorted(unknown)}")
        try:
            kwargs[section] = cls(**raw)
        except TypeError as exc:
            raise InvalidPdk(f"[{section}]: {exc}") from None
    dc_raw = data.get("dc")
    if not dc_raw:
        raise InvalidPdk("missing section [dc]")
    dc = {}
    for key, entry in dc_raw.items():
        try:
            dc[int(key)] = Coupler(**entry)
        except (TypeError, ValueError) as exc:
            raise InvalidPdk(f"[dc.{key}]: {exc}") from None
    kwargs["dc"] = dc
    return Pdk(**kwargs)


def load_pdk(source: str | Path) -> Pdk:
    """Load a PDK from a preset name or a ``.toml`` / ``.json`` file."""
    if str(source) in PRESETS:
        text = resources.files("ptc_forge.presets").joinpath(f"{source}.toml").read_text()
        return pdk_from_dict(tomllib.loads(text))
    path = Path(source)
    if not path.is_file():
        raise InvalidPdk(f"pdk file not found: {path}")
    text = path.read_text()
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise InvalidPdk(f"cannot parse {path}: {exc}") from None
    return pdk_from_dict(data)
