"""Scenario files: parsing, validation and the per-point pipeline.

A scenario is a JSON object::

    {
      "name": "fig1_edge_scan",
      "coupling": {"source": "published", "config": "config1"},
      "drive": {"eta_bar": 1.0, "phi_over_pi": 0.75, "b0_over_j": 18, "omega_over_j": 6},
      "model": "xy_effective",
      "initial_state": {"kind": "single_excitation", "site": 1},
      "tau_max": 2.0,
      "n_tau": 401,
      "scan": {"axis": "eta_bar", "values": [0, 0.6, 1]},
      "analysis": ["spreading_rate"],
      "seed": 0,
      "tol": 1e-9
    }

Coupling sources: ``published`` (``config``, optional ``correct_stagger``),
``exponential`` (``j_khz``, ``xi``, ``sites``), ``matrix`` (``values_khz``)
and ``trap`` (``trap`` block plus ``raman`` block).  Frequencies are cyclic
kHz / MHz and are converted to rad/s here and nowhere else.  Drive
parameters are in units of the bare mean nearest-neighbour coupling ``J``.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analysis import (
    domainwall_couplings,
    edge_state_spectrum,
    late_time_profile,
    pearson,
    sample_shots,
    spreading_rate,
    thermal_mean,
)
from .configs import PUBLISHED_CONFIGS, published_coupling
from .constants import khz
from .coupling import (
    CouplingMatrix,
    RamanConfig,
    calibrate_rabi,
    exponential_profile,
    ising_matrix,
    scale_rabi_to_mean_nn,
    stagger_correct,
)
from .dynamics import (
    FULL_DRIVE_MAX_SITES,
    NNZ_CAP,
    Sector,
    bitstring_state,
    build_full_hamiltonian,
    build_xy_hamiltonian,
    domain_wall_state,
    evolve,
    neel_state,
    single_excitation,
)
from .errors import ConfigError, LocalizedError
from .fermion import CorrelationMatrix, evolve_correlations
from .floquet import FloquetDrive, dressed_matrix
from .trap import TrapConfig, solve_trap

__all__ = [
    "Scenario",
    "ScenarioError",
    "ValidationReport",
    "validate_dict",
    "load_scenario",
    "config_hash",
    "build_coupling",
    "build_drive",
    "initial_state",
    "run_point",
    "MODELS",
    "SCAN_AXES",
    "ANALYSES",
]

MODELS = ("xy_effective", "full_drive", "free_fermion")
SCAN_AXES = ("eta_bar", "phi_over_pi", "site", "model")
ANALYSES = ("spreading_rate", "late_time", "edge_spectrum", "domain_wall", "shots")
STATE_KINDS = ("single_excitation", "neel", "domain_wall", "bitstring")
SOURCES = ("published", "exponential", "matrix", "trap")

RWA_MIN_B0 = 10.0
RWA_MIN_OMEGA = 4.0

DEFAULT_DRIVE = {"eta_bar": 0.0, "phi_over_pi": 0.75, "b0_over_j": 18.0, "omega_over_j": 6.0}


class ScenarioError(ConfigError):
    """Scenario failed validation; ``report`` lists every problem."""

    def __init__(self, report):
        super().__init__("; ".join(report.errors))
        self.report = report


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {"ok": self.ok, "errors": self.errors, "warnings": self.warnings}


def config_hash(d: dict) -> str:
    """SHA-256 of the canonical JSON form of a scenario."""
    canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def _n_sites(coupling: dict):
    src = coupling.get("source")
    if src == "published":
        cfg = PUBLISHED_CONFIGS.get(coupling.get("config"))
        return None if cfg is None else len(cfg.active_sites)
    if src == "exponential":
        return coupling.get("sites")
    if src == "matrix":
        vals = coupling.get("values_khz")
        return len(vals) if isinstance(vals, list) else None
    if src == "trap":
        raman = coupling.get("raman", {})
        act = raman.get("active_sites")
        return len(act) if isinstance(act, list) else None
    return None


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate_dict(d) -> ValidationReport:
    """Schema and physics checks; never raises."""
    rep = ValidationReport()
    err, warn = rep.errors.append, rep.warnings.append
    if not isinstance(d, dict):
        err("scenario: expected a JSON object")
        return rep
    known = {"name", "coupling", "drive", "model", "initial_state", "tau_max", "n_tau",
             "scan", "analysis", "shots", "seed", "tol", "heatmap", "tomography", "zak_sweep"}
    for k in sorted(set(d) - known):
        err(f"{k}: unknown field")
    if not isinstance(d.get("name"), str) or not d.get("name"):
        err("name: required non-empty string")

    coupling = d.get("coupling")
    n_sites = None
    if not isinstance(coupling, dict):
        err("coupling: required object")
    else:
        src = coupling.get("source")
        if src not in SOURCES:
            err(f"coupling.source: must be one of {list(SOURCES)}")
        elif src == "published" and coupling.get("config") not in PUBLISHED_CONFIGS:
            err(f"coupling.config: must be one of {sorted(PUBLISHED_CONFIGS)}")
        elif src == "exponential":
            for key in ("j_khz", "xi"):
                if not _is_number(coupling.get(key)) or coupling.get(key) <= 0:
                    err(f"coupling.{key}: must be a positive number")
            if not isinstance(coupling.get("sites"), int) or coupling.get("sites") < 2:
                err("coupling.sites: must be an integer >= 2")
        elif src == "matrix":
            vals = coupling.get("values_khz")
            if not (isinstance(vals, list) and vals and all(isinstance(r, list) and len(r) == len(vals) for r in vals)):
                err("coupling.values_khz: must be a square list of lists")
        elif src == "trap":
            for key in ("trap", "raman"):
                if not isinstance(coupling.get(key), dict):
                    err(f"coupling.{key}: required object for source 'trap'")
        n_sites = _n_sites(coupling)

    drive = d.get("drive", {})
    if not isinstance(drive, dict):
        err("drive: must be an object")
        drive = {}
    for k in sorted(set(drive) - set(DEFAULT_DRIVE)):
        err(f"drive.{k}: unknown field")
    dv = {**DEFAULT_DRIVE, **drive}
    for k, v in dv.items():
        if not _is_number(v):
            err(f"drive.{k}: must be a number")
    if _is_number(dv["eta_bar"]) and dv["eta_bar"] < 0:
        err("drive.eta_bar: must be >= 0")
    if _is_number(dv["omega_over_j"]) and dv["omega_over_j"] <= 0:
        err("drive.omega_over_j: must be positive")
    if _is_number(dv["b0_over_j"]) and dv["b0_over_j"] < RWA_MIN_B0:
        warn(f"drive.b0_over_j: {dv['b0_over_j']} < {RWA_MIN_B0}, rotating-wave approximation questionable")
    if _is_number(dv["omega_over_j"]) and dv["omega_over_j"] < RWA_MIN_OMEGA:
        warn(f"drive.omega_over_j: {dv['omega_over_j']} < {RWA_MIN_OMEGA}, high-frequency dressing questionable")

    model = d.get("model", "xy_effective")
    if model not in MODELS:
        err(f"model: must be one of {list(MODELS)}")

    st = d.get("initial_state", {"kind": "single_excitation", "site": 1})
    if not isinstance(st, dict) or st.get("kind") not in STATE_KINDS:
        err(f"initial_state.kind: must be one of {list(STATE_KINDS)}")
    else:
        if st["kind"] == "single_excitation":
            site = st.get("site", 1)
            if not isinstance(site, int) or (n_sites and not 1 <= site <= n_sites):
                err(f"initial_state.site: must be an integer in 1..{n_sites}")
        if st["kind"] == "bitstring":
            bits = st.get("bits")
            if not isinstance(bits, str) or set(bits) - {"0", "1"} or (n_sites and len(bits) != n_sites):
                err(f"initial_state.bits: must be a 0/1 string of length {n_sites}")
        if st["kind"] == "domain_wall" and n_sites and n_sites % 2:
            err("initial_state.kind: domain_wall needs an even number of sites")

    tau_max = d.get("tau_max", 2.0)
    n_tau = d.get("n_tau", 201)
    if not _is_number(tau_max) or tau_max <= 0:
        err("tau_max: must be a positive number")
    if not isinstance(n_tau, int) or n_tau < 2:
        err("n_tau: must be an integer >= 2 (strictly increasing grid)")

    scan = d.get("scan")
    axis, values = None, []
    if scan is not None:
        if not isinstance(scan, dict) or scan.get("axis") not in SCAN_AXES:
            err(f"scan.axis: must be one of {list(SCAN_AXES)}")
        else:
            axis, values = scan["axis"], scan.get("values")
            if not isinstance(values, list) or not values:
                err("scan.values: must be a non-empty list")
                values = []
            elif axis == "model" and any(v not in MODELS for v in values):
                err(f"scan.values: models must be in {list(MODELS)}")
            elif axis == "site" and any(not isinstance(v, int) or (n_sites and not 1 <= v <= n_sites) for v in values):
                err(f"scan.values: sites must be integers in 1..{n_sites}")
            elif axis in ("eta_bar", "phi_over_pi") and any(not _is_number(v) for v in values):
                err("scan.values: must be numbers")

    analysis = d.get("analysis", [])
    if not isinstance(analysis, list) or any(a not in ANALYSES for a in analysis):
        err(f"analysis: must be a list drawn from {list(ANALYSES)}")
    if "shots" in (analysis or []) and not (isinstance(d.get("shots"), int) and d.get("shots") >= 1):
        err("shots: positive integer required when 'shots' analysis is requested")
    seed = d.get("seed", 0)
    if not isinstance(seed, int) or seed < 0 or seed >= 2**64:
        err("seed: must be an unsigned 64-bit integer")
    tol = d.get("tol", 1e-9)
    if not _is_number(tol) or not 0 < tol < 1e-3:
        err("tol: must be in (0, 1e-3)")

    # sector policy and memory estimate
    models = values if axis == "model" else [model]
    if n_sites:
        if "full_drive" in models and n_sites > FULL_DRIVE_MAX_SITES:
            err(f"model: full_drive needs L <= {FULL_DRIVE_MAX_SITES} (L = {n_sites}); "
                "larger chains run the effective model in a fixed-magnetization sector")
        if isinstance(st, dict) and st.get("kind") in STATE_KINDS and n_sites <= 30:
            n_up = {"single_excitation": 1, "neel": (n_sites + 1) // 2,
                    "domain_wall": n_sites // 2}.get(st["kind"])
            if st["kind"] == "bitstring" and isinstance(st.get("bits"), str):
                n_up = st["bits"].count("1")
            if n_up is not None:
                dim = math.comb(n_sites, n_up)
                nnz = dim * n_up * (n_sites - n_up)
                if nnz > NNZ_CAP:
                    err(f"initial_state: sector dimension {dim} needs ~{nnz} stored entries "
                        f"(cap {NNZ_CAP})")
    return rep


@dataclass(frozen=True)
class Scenario:
    raw: dict

    @property
    def name(self) -> str:
        return self.raw["name"]

    @property
    def scan_axis(self):
        scan = self.raw.get("scan")
        return None if scan is None else scan["axis"]

    def points(self):
        """``[(axis, value), ...]``; a single ``(None, None)`` without a scan."""
        scan = self.raw.get("scan")
        if scan is None:
            return [(None, None)]
        return [(scan["axis"], v) for v in scan["values"]]

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def load_scenario(d: dict) -> Scenario:
    rep = validate_dict(d)
    if not rep.ok:
        raise ScenarioError(rep)
    return Scenario(d)


# ----------------------------------------------------------------- pipeline


def build_coupling(c: dict) -> CouplingMatrix:
    """Bare coupling matrix (rad/s) of a ``coupling`` block."""
    src = c["source"]
    if src == "published":
        return published_coupling(c["config"], c.get("correct_stagger", True))
    if src == "exponential":
        return exponential_profile(khz(c["j_khz"]), c["xi"], c["sites"])
    if src == "matrix":
        return CouplingMatrix(np.asarray(c["values_khz"], dtype=float) * khz(1.0), label="matrix")
    t, r = c["trap"], c["raman"]
    trap = TrapConfig.from_cyclic(t["n_ions"], t["com_radial_mhz"], t["axial_c2"], t["axial_c4"])
    spec = solve_trap(trap)
    det = khz(r["detuning_khz"])
    if r.get("detuning_from_com"):
        det += spec.frequencies[0] - spec.frequencies[-1]
    act = r["active_sites"]
    if "rabi_profile" in r:
        rc = RamanConfig.from_profile(trap.n_ions, act, r["rabi_profile"], det)
    else:
        rc = calibrate_rabi(spec, det, np.ones(len(act) - 1), act)
    if "mean_nn_khz" in r:
        rc = scale_rabi_to_mean_nn(spec, rc, khz(r["mean_nn_khz"]))
    cm = ising_matrix(spec, rc, label="trap")
    if c.get("correct_stagger", False):
        cm = stagger_correct(cm)
    return cm


def build_drive(drive: dict, cm: CouplingMatrix) -> FloquetDrive:
    dv = {**DEFAULT_DRIVE, **(drive or {})}
    return FloquetDrive.in_units_of(
        cm.j_ref, b0=dv["b0_over_j"], omega=dv["omega_over_j"], eta_bar=dv["eta_bar"],
        phi=dv["phi_over_pi"] * math.pi, n_sites=cm.size,
    )


def initial_state(st: dict, n_sites, full=False):
    kind = st["kind"]
    if kind == "single_excitation":
        return single_excitation(n_sites, st.get("site", 1), full)
    if kind == "neel":
        return neel_state(n_sites, st.get("first_up", True), full)
    if kind == "domain_wall":
        return domain_wall_state(n_sites, full)
    return bitstring_state(st["bits"], full)


def _bits_of(state):
    s = int(state.sector.states[int(np.argmax(np.abs(state.amplitudes)))])
    return [(s >> k) & 1 for k in range(state.n_sites)]


def point_config(raw: dict, axis, value) -> dict:
    """Scenario dict with the scan axis fixed to ``value``."""
    d = json.loads(json.dumps(raw))
    d.pop("scan", None)
    if axis in ("eta_bar", "phi_over_pi"):
        d.setdefault("drive", {})[axis] = value
    elif axis == "site":
        d["initial_state"] = {"kind": "single_excitation", "site": value}
    elif axis == "model":
        d["model"] = value
    return d


def run_point(d: dict):
    """Run one (scan-free) scenario dict.

    Returns
    -------
    traj : Trajectory
    analysis : dict
        JSON-ready analysis results.
    """
    cm = build_coupling(d["coupling"])
    drive = build_drive(d.get("drive"), cm)
    dm = dressed_matrix(cm, drive)
    model = d.get("model", "xy_effective")
    tol = d.get("tol", 1e-9)
    tau = np.linspace(0.0, d.get("tau_max", 2.0), d.get("n_tau", 201))
    st_cfg = d.get("initial_state", {"kind": "single_excitation", "site": 1})
    state = initial_state(st_cfg, cm.size)
    if model == "full_drive":
        traj = evolve(state, build_full_hamiltonian(cm, drive), tau, tol=tol)
    elif model == "free_fermion":
        traj = evolve_correlations(CorrelationMatrix.product_state(_bits_of(state)), dm, tau)
    else:
        traj = evolve(state, build_xy_hamiltonian(dm, state.sector), tau, tol=tol)
    traj.metadata["label"] = dm.label
    traj.metadata["drive"] = {
        "eta_bar": drive.eta_bar, "phi": drive.phi, "b0_rad_s": drive.b0, "omega_rad_s": drive.omega,
    }

    out = {}
    for name in d.get("analysis", []):
        if name == "spreading_rate":
            try:
                out[name] = {"status": "ok", **spreading_rate(traj).to_dict()}
            except LocalizedError as exc:
                out[name] = {"status": "localized", "message": str(exc)}
        elif name == "late_time":
            prof = late_time_profile(traj)
            rec = {"s_bar": prof.tolist()}
            if st_cfg["kind"] == "single_excitation":
                j = st_cfg.get("site", 1)
                rec.update(site=j, s_bar_site=float(prof[j - 1]), thermal_mean=thermal_mean(prof, j))
            out[name] = rec
        elif name == "edge_spectrum":
            out[name] = edge_state_spectrum(dm).to_dict()
        elif name == "domain_wall":
            tab = domainwall_couplings(dm)
            h = cm.size // 2
            m = traj.magnetizations
            imbalance = 0.5 * (m[:, :h].mean(axis=1) - m[:, h:].mean(axis=1))
            late = traj.times >= 1.5
            out[name] = {
                **tab.to_dict(),
                "strongest": list(tab.strongest()),
                "boundary_modes": list(tab.boundary_modes()),
                "boundary_anticorrelation": pearson(traj.site(h), traj.site(h + 1)),
                "late_imbalance": float(imbalance[late].mean()) if late.any() else None,
            }
        elif name == "shots":
            out[name] = sample_shots(traj, d["shots"], d.get("seed", 0)).to_dict()
    return traj, out
