"""Convert kinetics traces into measurable signals.

Absorbance follows Beer-Lambert on a chromophore column; luminescence and
amperometric current are proportional to the instantaneous rate of the
reporter step (flash-type emission, faradaic turnover). All transductions
are homogeneous degree 1 in their gain parameter and never add noise of
their own: sampling noise enters once, in cohort sampling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .kinetics import KineticsTrace

BUILTIN_WAVELENGTHS = {"NADH": 340, "ABTSox": 405, "Formazan": 580}
LUMINOL_WAVELENGTH = 425

UM_TO_M = 1e-6


@dataclass(frozen=True)
class OpticalConfig:
    wavelength: float        # nm
    epsilon: float           # molar absorptivity, M^-1 cm^-1
    path_length: float       # cm
    species: str

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigurationError("epsilon must be > 0")
        if not self.path_length > 0:
            raise ConfigurationError("path length must be > 0")


def builtin_optics(species: str, params) -> OpticalConfig:
    """OpticalConfig for one of the built-in chromophore channels."""
    if species not in params.optics:
        raise ConfigurationError(f"no optics entry for species {species!r}")
    entry = params.optics[species]
    wl = float(entry["wavelength"])
    if species in BUILTIN_WAVELENGTHS and wl != BUILTIN_WAVELENGTHS[species]:
        raise ConfigurationError(
            f"built-in channel {species} reads at {BUILTIN_WAVELENGTHS[species]} nm, got {wl}")
    return OpticalConfig(wavelength=wl, epsilon=float(entry["epsilon"]),
                         path_length=params.path_length_cm, species=species)


@dataclass
class SignalTrace:
    times: np.ndarray
    values: np.ndarray
    channel: str

    def to_csv(self, path, config_hash: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if config_hash:
                fh.write(f"# config_hash={config_hash}\n")
            w = csv.writer(fh)
            w.writerow(["t_s", "value", "channel"])
            for t, v in zip(self.times, self.values):
                w.writerow([repr(float(t)), repr(float(v)), self.channel])


def absorbance(trace: KineticsTrace, cfg: OpticalConfig) -> SignalTrace:
    """Beer-Lambert absorbance A(t) = epsilon * c(t) * path, c in mol/L."""
    c = trace.column(cfg.species)  # raises KeyError when absent
    return SignalTrace(
        times=trace.times,
        values=cfg.epsilon * cfg.path_length * UM_TO_M * c,
        channel=f"A{cfg.wavelength:.0f}/{cfg.species}",
    )


def _find_step(network, enzyme=None, substrate=None):
    for j, st in enumerate(network.steps):
        if enzyme is not None and st.enzyme != enzyme:
            continue
        if substrate is not None and substrate not in (sp for sp, _ in st.substrates):
            continue
        return j
    return None


def luminescence(trace: KineticsTrace, gain: float) -> SignalTrace:
    """Emission proportional to the instantaneous HRP/luminol reaction rate."""
    net = trace.network
    j = _find_step(net, enzyme="HRP", substrate="Luminol") if net else None
    if j is None:
        raise ConfigurationError("network has no HRP/luminol reporter branch")
    rates = net.step_rates(trace.concentrations)[:, j]
    return SignalTrace(times=trace.times, values=gain * rates,
                       channel=f"lum{LUMINOL_WAVELENGTH}")


def amperometric_current(trace: KineticsTrace, faradaic_gain: float) -> SignalTrace:
    """Current proportional to the peroxide turnover rate at the reporter step."""
    net = trace.network
    if net is None or "H2O2" not in net.species_names:
        raise ConfigurationError("network does not produce H2O2")
    j = _find_step(net, substrate="H2O2")
    if j is None:
        raise ConfigurationError("network has no H2O2-consuming reporter step")
    rates = net.step_rates(trace.concentrations)[:, j]
    return SignalTrace(times=trace.times, values=faradaic_gain * rates,
                       channel="amperometric")
