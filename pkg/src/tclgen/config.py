"""YAML run configuration: parsing and parse-time validation.

Every problem is reported as a ``ConfigError`` carrying the dotted path of the
offending field, e.g. ``system.hamiltonian`` or ``bath.table.re``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from tclgen.bath import BathModel, single_mode_thermal, tabulated_stationary
from tclgen.cumulants import VanishingRule
from tclgen.generator import MAX_ORDER
from tclgen.model import SystemModel

OUTPUTS = ("generator", "canonical", "hamiltonian", "trajectory", "rates", "convergence")
BATH_KINDS = ("single_mode_thermal", "custom")
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10

_TOP_KEYS = {"system", "interaction", "coupling", "bath", "expansion", "quadrature", "time",
             "initial_state", "outputs", "convergence", "oracle"}
_REQUIRED = ("system", "interaction", "coupling", "bath", "expansion", "quadrature", "time",
             "initial_state", "outputs")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class BathConfig:
    kind: str
    omega: float = 0.0
    g: float = 0.0
    nbar: float = 0.0
    table: Optional[tuple[np.ndarray, np.ndarray]] = None   # (tau, C(tau))


@dataclass(frozen=True)
class ConvergenceConfig:
    lambdas: tuple[float, ...]
    t_star: float
    fock_cutoff: int


@dataclass(frozen=True)
class RunConfig:
    dim: int
    hamiltonian: np.ndarray
    operator: np.ndarray
    lam: float
    bath: BathConfig
    max_order: int
    suppression: str
    nodes: int
    t_max: float
    steps: int
    initial_state: np.ndarray
    outputs: tuple[str, ...]
    convergence: Optional[ConvergenceConfig] = None
    oracle_cutoff: Optional[int] = None
    raw: dict = field(default_factory=dict, repr=False, compare=False)

    def model(self, lam: Optional[float] = None) -> SystemModel:
        return SystemModel(H=self.hamiltonian, A=self.operator, lam=self.lam if lam is None else lam)

    def bath_model(self) -> BathModel:
        if self.bath.kind == "single_mode_thermal":
            return single_mode_thermal(self.bath.g, self.bath.omega, self.bath.nbar)
        taus, values = self.bath.table
        return tabulated_stationary(taus, values)

    def time_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.steps + 1)


# ----------------------------------------------------------------- primitives

def _section(data: dict, key: str, allowed: set[str], required: tuple[str, ...] = ()) -> dict:
    sec = data.get(key)
    if not isinstance(sec, dict):
        raise ConfigError(key, "must be a mapping")
    for k in sec:
        if k not in allowed:
            raise ConfigError(f"{key}.{k}", "unknown field")
    for k in required:
        if k not in sec:
            raise ConfigError(f"{key}.{k}", "missing required field")
    return sec


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    x = float(value)
    if not np.isfinite(x):
        raise ConfigError(path, "must be finite")
    return x


def _integer(value: Any, path: str, lo: Optional[int] = None, hi: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(path, f"must be <= {hi}, got {value}")
    return value


def _numbers(value: Any, path: str, length: Optional[int] = None) -> np.ndarray:
    if not isinstance(value, (list, tuple)):
        raise ConfigError(path, "expected a list of numbers")
    out = np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(value)])
    if length is not None and out.size != length:
        raise ConfigError(path, f"expected {length} numbers, got {out.size}")
    return out


def _matrix(value: Any, path: str, d: int, hermitian: bool = True) -> np.ndarray:
    """Interleaved ``re, im`` pairs, row-major, into a ``d x d`` complex matrix."""
    flat = _numbers(value, path, 2 * d * d)
    mat = (flat[0::2] + 1j * flat[1::2]).reshape(d, d)
    if hermitian:
        dev = float(np.max(np.abs(mat - mat.conj().T)))
        if dev > HERMITIAN_TOL * max(1.0, float(np.max(np.abs(mat)))):
            raise ConfigError(path, f"matrix is not Hermitian (deviation {dev:.3e})")
    return mat


# -------------------------------------------------------------------- parsing

def _parse_bath(data: dict) -> BathConfig:
    sec = _section(data, "bath", {"kind", "omega", "g", "nbar", "table"}, ("kind",))
    kind = sec["kind"]
    if kind not in BATH_KINDS:
        raise ConfigError("bath.kind", f"must be one of {', '.join(BATH_KINDS)}, got {kind!r}")
    if kind == "single_mode_thermal":
        for k in ("omega", "g", "nbar"):
            if k not in sec:
                raise ConfigError(f"bath.{k}", "missing required field")
        if "table" in sec:
            raise ConfigError("bath.table", "only allowed for kind custom")
        omega = _number(sec["omega"], "bath.omega")
        if omega <= 0:
            raise ConfigError("bath.omega", "must be positive")
        nbar = _number(sec["nbar"], "bath.nbar")
        if nbar < 0:
            raise ConfigError("bath.nbar", "must be non-negative")
        return BathConfig(kind, omega=omega, g=_number(sec["g"], "bath.g"), nbar=nbar)
    for k in ("omega", "g", "nbar"):
        if k in sec:
            raise ConfigError(f"bath.{k}", "only allowed for kind single_mode_thermal")
    if not isinstance(sec.get("table"), dict):
        raise ConfigError("bath.table", "custom bath needs a table with tau, re, im")
    table = sec["table"]
    for k in table:
        if k not in ("tau", "re", "im"):
            raise ConfigError(f"bath.table.{k}", "unknown field")
    for k in ("tau", "re", "im"):
        if k not in table:
            raise ConfigError(f"bath.table.{k}", "missing required field")
    tau = _numbers(table["tau"], "bath.table.tau")
    if tau.size < 4:
        raise ConfigError("bath.table.tau", "need at least 4 samples")
    if tau[0] != 0 or np.any(np.diff(tau) <= 0):
        raise ConfigError("bath.table.tau", "must start at 0 and increase strictly")
    re = _numbers(table["re"], "bath.table.re", tau.size)
    im = _numbers(table["im"], "bath.table.im", tau.size)
    if im[0] != 0:
        raise ConfigError("bath.table.im", "C(0) must be real")
    return BathConfig(kind, table=(tau, re + 1j * im))


def _parse_convergence(data: dict, bath: BathConfig) -> ConvergenceConfig:
    sec = _section(data, "convergence", {"lambdas", "t_star", "fock_cutoff"},
                   ("lambdas", "t_star", "fock_cutoff"))
    if bath.kind != "single_mode_thermal":
        raise ConfigError("convergence", "exact reference needs bath.kind single_mode_thermal")
    lams = _numbers(sec["lambdas"], "convergence.lambdas")
    if lams.size < 2 or np.any(lams <= 0):
        raise ConfigError("convergence.lambdas", "need at least two positive couplings")
    t_star = _number(sec["t_star"], "convergence.t_star")
    if t_star <= 0:
        raise ConfigError("convergence.t_star", "must be positive")
    return ConvergenceConfig(tuple(float(x) for x in lams), t_star,
                             _integer(sec["fock_cutoff"], "convergence.fock_cutoff", lo=1))


def parse_config(data: Any) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    for k in data:
        if k not in _TOP_KEYS:
            raise ConfigError(str(k), "unknown field")
    for k in _REQUIRED:
        if k not in data:
            raise ConfigError(k, "missing required section")

    system = _section(data, "system", {"dim", "hamiltonian"}, ("dim", "hamiltonian"))
    d = _integer(system["dim"], "system.dim", lo=2, hi=16)
    H = _matrix(system["hamiltonian"], "system.hamiltonian", d)

    inter = _section(data, "interaction", {"operator"}, ("operator",))
    A = _matrix(inter["operator"], "interaction.operator", d)

    coupling = _section(data, "coupling", {"lambda"}, ("lambda",))
    lam = _number(coupling["lambda"], "coupling.lambda")
    if lam < 0:
        raise ConfigError("coupling.lambda", "must be non-negative")

    bath = _parse_bath(data)

    exp = _section(data, "expansion", {"max_order", "suppression"}, ("max_order",))
    max_order = _integer(exp["max_order"], "expansion.max_order", lo=1, hi=MAX_ORDER)
    suppression = exp.get("suppression", "none")
    if suppression not in [r.value for r in VanishingRule]:
        raise ConfigError("expansion.suppression",
                          f"must be one of {', '.join(r.value for r in VanishingRule)}")
    quad = _section(data, "quadrature", {"nodes"}, ("nodes",))
    nodes = _integer(quad["nodes"], "quadrature.nodes", lo=4, hi=64)

    time = _section(data, "time", {"t_max", "steps"}, ("t_max", "steps"))
    t_max = _number(time["t_max"], "time.t_max")
    if t_max <= 0:
        raise ConfigError("time.t_max", "must be positive")
    steps = _integer(time["steps"], "time.steps", lo=1)
    if bath.kind == "custom" and bath.table[0][-1] < t_max:
        raise ConfigError("bath.table.tau", f"table ends at {bath.table[0][-1]:g} < time.t_max {t_max:g}")

    rho = _matrix(data["initial_state"], "initial_state", d)
    tr = np.trace(rho)
    if abs(tr - 1) > TRACE_TOL:
        raise ConfigError("initial_state", f"trace is {tr.real:.6g}, expected 1")
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0] < -HERMITIAN_TOL:
        raise ConfigError("initial_state", "not positive semidefinite")

    outputs = data["outputs"]
    if not isinstance(outputs, list) or not outputs:
        raise ConfigError("outputs", "expected a non-empty list")
    for i, o in enumerate(outputs):
        if o not in OUTPUTS:
            raise ConfigError(f"outputs[{i}]", f"unknown output {o!r}; choose from {', '.join(OUTPUTS)}")
    if len(set(outputs)) != len(outputs):
        raise ConfigError("outputs", "duplicate entries")

    convergence = None
    if "convergence" in outputs:
        if "convergence" not in data:
            raise ConfigError("convergence", "section required when outputs contains convergence")
        convergence = _parse_convergence(data, bath)
    elif "convergence" in data:
        raise ConfigError("convergence", "section given but convergence is not in outputs")

    oracle_cutoff = None
    if "oracle" in data:
        sec = _section(data, "oracle", {"fock_cutoff"}, ("fock_cutoff",))
        if bath.kind != "single_mode_thermal":
            raise ConfigError("oracle", "exact reference needs bath.kind single_mode_thermal")
        oracle_cutoff = _integer(sec["fock_cutoff"], "oracle.fock_cutoff", lo=1)

    return RunConfig(dim=d, hamiltonian=H, operator=A, lam=lam, bath=bath, max_order=max_order,
                     suppression=suppression, nodes=nodes, t_max=t_max, steps=steps,
                     initial_state=rho, outputs=tuple(outputs), convergence=convergence,
                     oracle_cutoff=oracle_cutoff, raw=data)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"invalid YAML: {exc}") from None
    return parse_config(data)
