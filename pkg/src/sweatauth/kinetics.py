"""Biocatalytic cascade networks and their mass-action integration.

A cascade is a list of irreversible enzymatic steps with Michaelis-Menten
saturation per substrate (factors multiply for multi-substrate steps) and
no product inhibition. The catalogued cascade kinds wire the single- and
multi-analyte assays: transaminase and dehydrogenase front ends feeding
chromogenic, luminescent, or peroxide-producing reporter branches.

Integration is classical fixed-step RK4 with a non-negativity guard
(step halving down to dt * 2**-20, then an error). Species flagged as
buffered (aerated oxygen by default) are held constant by zeroing their
stoichiometry rows; the conserved-moiety analysis operates on that same
effective matrix, so reported invariants are exactly what the integrator
preserves.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import ConfigurationError, IntegrationError

SPECIES_CODES = (
    "Ala", "Glu", "Asp", "Phe", "Pyr", "KTG", "OAC", "PhPyr", "Lac",
    "NADH", "NADplus", "NH3", "H2O2", "O2", "ABTS", "ABTSox", "NBT",
    "Formazan", "PMS", "Luminol", "LuminolOx",
)

ROLES = ("substrate", "intermediate", "product", "cofactor", "chromophore")


class CascadeKind(str, Enum):
    ALT_LDH = "AltLdh"
    ALT_POX_HRP = "AltPoxHrp"
    GLDH_A = "GldhA"
    GLDH_B = "GldhB"
    GLDH_C = "GldhC"
    ALA_GLU = "AlaGlu"
    ASP_GLU = "AspGlu"
    ALA_ASP_GLU = "AlaAspGlu"


@dataclass(frozen=True)
class Species:
    name: str
    role: str = "intermediate"

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigurationError(f"unknown species role {self.role!r}")


@dataclass
class EnzymaticStep:
    """One irreversible enzymatic conversion.

    Rate = kcat * e_total * prod_i s_i / (km_i + s_i) over the substrates;
    stoichiometric coefficients scale consumption/production, not saturation.
    """

    enzyme: str
    substrates: list  # [(species, coefficient), ...]
    products: list
    kcat: float
    km: dict  # species -> µM
    e_total: float

    def __post_init__(self):
        if not self.kcat > 0:
            raise ConfigurationError(f"{self.enzyme}: kcat must be > 0")
        if self.e_total < 0:
            raise ConfigurationError(f"{self.enzyme}: e_total must be >= 0")
        for sp, coef in self.substrates + self.products:
            if not (isinstance(coef, int) and coef > 0):
                raise ConfigurationError(f"{self.enzyme}: coefficient for {sp} must be a positive integer")
        for sp, _ in self.substrates:
            if sp not in self.km:
                raise ConfigurationError(f"{self.enzyme}: missing Km for substrate {sp}")
            if not self.km[sp] > 0:
                raise ConfigurationError(f"{self.enzyme}: Km for {sp} must be > 0")

    @property
    def vmax(self) -> float:
        return self.kcat * self.e_total

    def rate(self, conc: dict) -> float:
        """Instantaneous rate (µM/s) at the given concentration map."""
        v = self.vmax
        for sp, _ in self.substrates:
            s = max(conc.get(sp, 0.0), 0.0)
            v *= s / (self.km[sp] + s)
        return v


def mm_rate(s: float, kcat: float, e_total: float, km: float) -> float:
    """Single-substrate Michaelis-Menten rate kcat * e_total * s / (km + s)."""
    if not km > 0:
        raise ConfigurationError("km must be > 0")
    s = max(s, 0.0)
    return kcat * e_total * s / (km + s)


@dataclass
class EnzymeParams:
    kcat: float
    e_total: float
    km: dict


@dataclass
class KineticParams:
    """Per-enzyme constants plus assay reagent loadings and optics."""

    enzymes: dict               # code -> EnzymeParams
    reagents: dict = field(default_factory=dict)   # species -> µM in the assay mix
    buffered: tuple = ("O2",)   # species held constant during integration
    optics: dict = field(default_factory=dict)
    gains: dict = field(default_factory=dict)
    path_length_cm: float = 1.0
    version: int = 1
    source_hash: str = ""

    @classmethod
    def from_dict(cls, raw: dict, source_hash: str = "") -> "KineticParams":
        enzymes = {}
        for code, entry in raw.get("enzymes", {}).items():
            enzymes[code] = EnzymeParams(
                kcat=float(entry["kcat"]),
                e_total=float(entry["e_total"]),
                km={k: float(v) for k, v in entry["km"].items()},
            )
        return cls(
            enzymes=enzymes,
            reagents={k: float(v) for k, v in raw.get("reagents", {}).items()},
            buffered=tuple(raw.get("buffered", ("O2",))),
            optics=raw.get("optics", {}),
            gains=raw.get("gains", {}),
            path_length_cm=float(raw.get("path_length_cm", 1.0)),
            version=int(raw.get("version", 1)),
            source_hash=source_hash,
        )


# Wiring catalogue: (enzyme, substrates, products) per step, plus which
# species are sample inputs, measured reporters, and assay-mix reagents.
_ALT = ("ALT", [("Ala", 1), ("KTG", 1)], [("Pyr", 1), ("Glu", 1)])
_AST = ("AST", [("Asp", 1), ("KTG", 1)], [("OAC", 1), ("Glu", 1)])
_GLDH = ("GlDH", [("Glu", 1), ("NADplus", 1)], [("KTG", 1), ("NH3", 1), ("NADH", 1)])
_GLOX = ("GLOx", [("Glu", 1), ("O2", 1)], [("H2O2", 1)])
_HRP_ABTS = ("HRP", [("H2O2", 1), ("ABTS", 1)], [("ABTSox", 1)])

_WIRING = {
    CascadeKind.ALT_LDH: dict(
        steps=[_ALT, ("LDH", [("Pyr", 1), ("NADH", 1)], [("Lac", 1), ("NADplus", 1)])],
        inputs=["Ala"], reporters=["NADH"], reagents=["KTG", "NADH"],
    ),
    CascadeKind.ALT_POX_HRP: dict(
        steps=[_ALT, ("POx", [("Pyr", 1), ("O2", 1)], [("H2O2", 1)]), _HRP_ABTS],
        inputs=["Ala"], reporters=["ABTSox"], reagents=["KTG", "O2", "ABTS"],
    ),
    CascadeKind.GLDH_A: dict(
        steps=[_GLDH],
        inputs=["Glu"], reporters=["NADH"], reagents=["NADplus"],
    ),
    CascadeKind.GLDH_B: dict(
        steps=[_GLDH, ("PMS", [("NADH", 1), ("NBT", 1)], [("NADplus", 1), ("Formazan", 1)])],
        inputs=["Glu"], reporters=["Formazan"], reagents=["NADplus", "NBT"],
    ),
    CascadeKind.GLDH_C: dict(
        steps=[_GLDH,
               ("NADHox", [("NADH", 1), ("O2", 1)], [("NADplus", 1), ("H2O2", 1)]),
               ("HRP", [("H2O2", 1), ("Luminol", 1)], [("LuminolOx", 1)])],
        inputs=["Glu"], reporters=["LuminolOx", "H2O2"],
        reagents=["NADplus", "O2", "Luminol"],
    ),
    CascadeKind.ALA_GLU: dict(
        steps=[_ALT, _GLOX, _HRP_ABTS],
        inputs=["Ala", "Glu"], reporters=["ABTSox"], reagents=["KTG", "O2", "ABTS"],
    ),
    CascadeKind.ASP_GLU: dict(
        steps=[_AST, _GLOX, _HRP_ABTS],
        inputs=["Asp", "Glu"], reporters=["ABTSox"], reagents=["KTG", "O2", "ABTS"],
    ),
    CascadeKind.ALA_ASP_GLU: dict(
        steps=[_ALT, _AST, _GLOX, _HRP_ABTS],
        inputs=["Ala", "Asp", "Glu"], reporters=["ABTSox"],
        reagents=["KTG", "O2", "ABTS"],
    ),
}


@dataclass
class CascadeNetwork:
    kind: CascadeKind
    species: list            # list[Species], fixed order
    steps: list              # list[EnzymaticStep]
    stoichiometry: np.ndarray  # [n_species, n_steps], raw (+products, -substrates)
    input_species: list
    reporter_species: list
    buffered: frozenset = frozenset()
    assay_mix: dict = field(default_factory=dict)  # species -> µM initial reagents
    _compiled: tuple = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise ConfigurationError("duplicate species in network")
        for sp in self.input_species + self.reporter_species:
            if sp not in names:
                raise ConfigurationError(f"{sp} not among network species")
        expected = _stoich_from_steps(names, self.steps)
        if not np.array_equal(expected, self.stoichiometry):
            raise ConfigurationError("stoichiometry does not match step definitions")

    @property
    def species_names(self) -> list:
        return [s.name for s in self.species]

    def index(self, name: str) -> int:
        try:
            return self.species_names.index(name)
        except ValueError:
            raise KeyError(f"species {name!r} not in {self.kind.value} network") from None

    @property
    def effective_stoichiometry(self) -> np.ndarray:
        """Stoichiometry with buffered species rows zeroed (what is integrated)."""
        eff = self.stoichiometry.astype(float).copy()
        for sp in self.buffered:
            if sp in self.species_names:
                eff[self.index(sp), :] = 0.0
        return eff

    def compiled(self):
        """Flat-array encoding consumed by the integration kernels."""
        if self._compiled is None:
            names = self.species_names
            st_dense = self.effective_stoichiometry.T.copy()  # [n_rxn, n_species]
            vmax = np.array([st.vmax for st in self.steps])
            sub_idx, sub_km, sub_off = [], [], [0]
            for st in self.steps:
                for sp, _ in st.substrates:
                    sub_idx.append(names.index(sp))
                    sub_km.append(st.km[sp])
                sub_off.append(len(sub_idx))
            arrays = (
                st_dense,
                vmax,
                np.asarray(sub_idx, dtype=np.int64),
                np.asarray(sub_km, dtype=np.float64),
                np.asarray(sub_off, dtype=np.int64),
                _kernels.sparse_stoich(st_dense),
            )
            self._compiled = arrays
        return self._compiled

    def init_vector(self, init: dict) -> np.ndarray:
        """Assay mix plus caller overrides, as a dense state vector."""
        names = self.species_names
        c0 = np.zeros(len(names))
        for sp, v in self.assay_mix.items():
            c0[names.index(sp)] = v
        for sp, v in init.items():
            if sp not in names:
                raise ConfigurationError(f"init species {sp!r} not in {self.kind.value} network")
            c0[names.index(sp)] = float(v)
        if np.any(c0 < 0):
            raise ConfigurationError("initial concentrations must be >= 0")
        return c0

    def step_rates(self, concentrations: np.ndarray) -> np.ndarray:
        """Per-step rates for a [T, n_species] concentration block."""
        C = np.atleast_2d(concentrations)
        names = self.species_names
        rates = np.empty((C.shape[0], len(self.steps)))
        for j, st in enumerate(self.steps):
            v = np.full(C.shape[0], st.vmax)
            for sp, _ in st.substrates:
                s = np.maximum(C[:, names.index(sp)], 0.0)
                v *= s / (st.km[sp] + s)
            rates[:, j] = v
        return rates


def _stoich_from_steps(names, steps):
    S = np.zeros((len(names), len(steps)))
    for j, st in enumerate(steps):
        for sp, coef in st.substrates:
            S[names.index(sp), j] -= coef
        for sp, coef in st.products:
            S[names.index(sp), j] += coef
    return S


def _assign_roles(order, wiring, terminal_products):
    roles = {}
    for name in order:
        if name in wiring["reporters"]:
            roles[name] = "chromophore"
        elif name in wiring["inputs"]:
            roles[name] = "substrate"
        elif name in wiring["reagents"]:
            roles[name] = "cofactor"
        elif name in terminal_products:
            roles[name] = "product"
        else:
            roles[name] = "intermediate"
    return roles


def build_cascade(kind, params: KineticParams) -> CascadeNetwork:
    """Instantiate one of the catalogued cascade kinds with given parameters.

    Raises ConfigurationError when an enzyme used by the kind has no entry
    in params (or lacks a Km for one of its substrates in this wiring).
    """
    try:
        kind = CascadeKind(kind)
    except ValueError:
        raise ConfigurationError(
            f"unknown cascade kind {kind!r}; available: {[k.value for k in CascadeKind]}") from None
    wiring = _WIRING[kind]
    steps = []
    for enzyme, subs, prods in wiring["steps"]:
        if enzyme not in params.enzymes:
            raise ConfigurationError(f"no kinetic parameters for enzyme {enzyme!r}")
        ep = params.enzymes[enzyme]
        km = {}
        for sp, _ in subs:
            if sp not in ep.km:
                raise ConfigurationError(f"enzyme {enzyme!r} lacks Km for substrate {sp!r}")
            km[sp] = ep.km[sp]
        steps.append(EnzymaticStep(enzyme=enzyme, substrates=list(subs),
                                   products=list(prods), kcat=ep.kcat, km=km,
                                   e_total=ep.e_total))

    order = list(wiring["inputs"])
    for st in steps:
        for sp, _ in st.substrates + st.products:
            if sp not in order:
                order.append(sp)
    consumed = {sp for st in steps for sp, _ in st.substrates}
    produced = {sp for st in steps for sp, _ in st.products}
    roles = _assign_roles(order, wiring, produced - consumed)
    species = [Species(name, roles[name]) for name in order]
    stoich = _stoich_from_steps(order, steps)
    buffered = frozenset(sp for sp in params.buffered if sp in order)
    assay_mix = {sp: params.reagents[sp] for sp in wiring["reagents"]
                 if sp in params.reagents}
    return CascadeNetwork(
        kind=kind, species=species, steps=steps, stoichiometry=stoich,
        input_species=list(wiring["inputs"]), reporter_species=list(wiring["reporters"]),
        buffered=buffered, assay_mix=assay_mix,
    )


@dataclass
class KineticsTrace:
    times: np.ndarray
    concentrations: np.ndarray  # [n_times, n_species]
    network_kind: CascadeKind
    dt: float
    species_names: list
    network: CascadeNetwork = field(default=None, repr=False, compare=False)

    def column(self, species: str) -> np.ndarray:
        if species not in self.species_names:
            raise KeyError(f"species {species!r} not in trace")
        return self.concentrations[:, self.species_names.index(species)]

    def to_csv(self, path, config_hash: str = "") -> None:
        with open(path, "w", newline="") as fh:
            if config_hash:
                fh.write(f"# config_hash={config_hash}\n")
            w = csv.writer(fh)
            w.writerow(["t_s"] + self.species_names)
            for t, row in zip(self.times, self.concentrations):
                w.writerow([repr(float(t))] + [repr(float(x)) for x in row])


def _n_steps(horizon, dt):
    if not dt > 0:
        raise ConfigurationError("dt must be > 0")
    if horizon < dt:
        raise ConfigurationError("horizon must be >= dt")
    return int(round(horizon / dt))


def simulate(network: CascadeNetwork, init: dict, horizon: float, dt: float) -> KineticsTrace:
    """Integrate the cascade over [0, horizon] and record every grid point.

    init maps species to initial µM on top of the network's assay mix
    (unlisted species start at zero).
    """
    n_steps = _n_steps(horizon, dt)
    c0 = network.init_vector(init)
    st_dense, vmax, sub_idx, sub_km, sub_off, sparse = network.compiled()
    trace, status, bad = _kernels.rk4_trace(
        c0, st_dense, vmax, sub_idx, sub_km, sub_off, n_steps, dt, sparse=sparse)
    _raise_on_status(status, bad)
    return KineticsTrace(
        times=dt * np.arange(n_steps + 1),
        concentrations=trace,
        network_kind=network.kind,
        dt=dt,
        species_names=network.species_names,
        network=network,
    )


@dataclass
class BatchResult:
    """Endpoint summaries for a batch of simulations of one network.

    sum_c and sum_tc accumulate concentration and time*concentration over
    all grid points, enough to recover least-squares slopes per species.
    """

    c0: np.ndarray
    c_final: np.ndarray
    sum_c: np.ndarray
    sum_tc: np.ndarray
    n_steps: int
    dt: float
    species_names: list

    def _col(self, species):
        return self.species_names.index(species)

    def endpoint_delta(self, species: str) -> np.ndarray:
        j = self._col(species)
        return np.abs(self.c_final[:, j] - self.c0[:, j])

    def slope(self, species: str) -> np.ndarray:
        """Least-squares slope of c(t) over the full grid, per simulation."""
        j = self._col(species)
        n = self.n_steps + 1
        t_mean = 0.5 * self.dt * self.n_steps
        # sum of t_k^2 over k = 0..n_steps, closed form
        sum_t2 = self.dt ** 2 * self.n_steps * (self.n_steps + 1) * (2 * self.n_steps + 1) / 6.0
        ss_tt = sum_t2 - n * t_mean ** 2
        return (self.sum_tc[:, j] - t_mean * self.sum_c[:, j]) / ss_tt


def simulate_batch(network: CascadeNetwork, init_matrix: np.ndarray,
                   horizon: float, dt: float) -> BatchResult:
    """Integrate many initial states of one network, summaries only.

    init_matrix is [B, n_species] in the network's species order (use
    network.init_vector to build rows).
    """
    n_steps = _n_steps(horizon, dt)
    C0 = np.ascontiguousarray(init_matrix, dtype=np.float64)
    st_dense, vmax, sub_idx, sub_km, sub_off, sparse = network.compiled()
    c_final, sum_c, sum_tc, status, bad = _kernels.rk4_batch(
        C0, st_dense, vmax, sub_idx, sub_km, sub_off, n_steps, dt, sparse=sparse)
    for i in np.nonzero(status)[0]:
        _raise_on_status(int(status[i]), int(bad[i]), sim=int(i))
    return BatchResult(c0=C0, c_final=c_final, sum_c=sum_c, sum_tc=sum_tc,
                       n_steps=n_steps, dt=dt, species_names=network.species_names)


def _raise_on_status(status, bad_step, sim=None):
    if status == _kernels.STATUS_NONFINITE:
        raise IntegrationError("integration diverged: non-finite state", step=bad_step, sim=sim)
    if status == _kernels.STATUS_UNDERFLOW:
        raise IntegrationError(
            f"integration diverged: step halving exhausted after {_kernels.MAX_HALVINGS} levels",
            step=bad_step, sim=sim)


def conserved_moieties(network: CascadeNetwork) -> list:
    """Basis of the left null space of the effective stoichiometry.

    Each returned vector w satisfies w @ stoichiometry = 0, so w @ c(t)
    is constant along any exact trajectory. Computed by exact reduced
    row echelon form over rationals, scaled to integer entries.
    """
    M = network.effective_stoichiometry.T  # [n_rxn, n_species]
    n_rxn, n_sp = M.shape
    rows = [[Fraction(x).limit_denominator(10 ** 9) for x in M[i]] for i in range(n_rxn)]
    pivots = []
    r = 0
    for c in range(n_sp):
        piv = next((i for i in range(r, n_rxn) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pv = rows[r][c]
        rows[r] = [x / pv for x in rows[r]]
        for i in range(n_rxn):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == n_rxn:
            break
    free = [c for c in range(n_sp) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * n_sp
        v[fc] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -rows[i][fc]
        scale = 1
        for x in v:
            scale = scale * x.denominator // math.gcd(scale, x.denominator)
        basis.append(np.array([float(x * scale) for x in v]))
    return basis
