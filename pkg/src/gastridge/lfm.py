"""Low-fidelity electrochemical equivalent-circuit model (E-ECM).

Terminal voltage is assembled from open-circuit potentials evaluated at the
particle surface concentrations, linearised kinetic overpotentials, an ohmic
drop, a contact resistance and an electrolyte potential loss::

    V = U_p(c_sp) - U_n(c_sn) - (eta_p - eta_n) + phi_ohm - I R_c + phi_e

Surface concentrations come from a second-order Pade approximation of
spherical diffusion (a bulk block with an integrator plus a diffusion lag)
and the electrolyte loss from two first-order lags. All linear blocks are
discretised with the bilinear (Tustin) transform.

Sign conventions: positive cell current discharges. The positive electrode
sees electrode current ``-I`` (it lithiates on discharge) and the negative
electrode ``+I``; each solid-diffusion block maps its electrode current to a
surface-concentration deviation with gain ``-R/(3 F eps L A)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import signal
from scipy.linalg import block_diag

from ._io import read_csv_columns, write_csv
from .cycles import DriveCycle
from .errors import DomainError, ParameterError, SaturationError
from .params import CellParameters, ElectrodeParameters

__all__ = [
    "DiscreteStateSpace",
    "solid_diffusion_continuous",
    "realize_solid_diffusion",
    "electrolyte_c1",
    "electrolyte_continuous",
    "realize_electrolyte",
    "exchange_current_density",
    "kinetic_overpotential",
    "LfmState",
    "VoltageTrace",
    "LowFidelityModel",
    "step_lfm",
    "simulate_cycle",
    "save_trace_csv",
    "load_trace_csv",
]


@dataclass(frozen=True, eq=False)
class DiscreteStateSpace:
    """x[k+1] = A x[k] + B u[k],  y[k] = C x[k] + D u[k] (single input, single output)."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: float
    dt: float

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        B = np.asarray(self.B, dtype=float).reshape(n, 1)
        C = np.asarray(self.C, dtype=float).reshape(1, n)
        if A.shape != (n, n):
            raise ParameterError("A must be square")
        if not self.dt > 0:
            raise ParameterError("dt must be > 0")
        if n and np.max(np.abs(np.linalg.eigvals(A))) > 1 + 1e-9:
            raise ParameterError("discrete system is unstable (spectral radius > 1)")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", float(np.asarray(self.D).reshape(())))

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def simulate(self, u, x0=None) -> tuple[np.ndarray, np.ndarray]:
        """Return outputs y[0..n-1] and the state after the last input."""
        u = np.asarray(u, dtype=float)
        x = np.zeros(self.order) if x0 is None else np.array(x0, dtype=float)
        A, b, c = self.A, self.B[:, 0], self.C[0]
        y = np.empty(u.size)
        for k, uk in enumerate(u):
            y[k] = c @ x + self.D * uk
            x = A @ x + b * uk
        return y, x

    def dc_gain(self) -> float:
        """Steady-state gain H(z=1); infinite for blocks with a pole at z=1."""
        M = np.eye(self.order) - self.A
        if np.linalg.cond(M) > 1e12:
            return float("inf")
        return float((self.C @ np.linalg.solve(M, self.B))[0, 0] + self.D)


def _bilinear(A, B, C, D, dt) -> DiscreteStateSpace:
    Ad, Bd, Cd, Dd, _ = signal.cont2discrete((A, B, C, D), dt, method="bilinear")
    return DiscreteStateSpace(Ad, Bd, Cd, Dd, dt)


# -- solid-phase diffusion ---------------------------------------------------


def solid_diffusion_continuous(e: ElectrodeParameters, area: float, faraday: float, parts=("bulk", "diffusion")):
    """Continuous modal realisation (A, B, C, D) of the scaled Pade blocks.

    With tau = R^2/(35 D) the bulk block splits into partial fractions

        G_b(s) = (3/R)/s + (2R/(7D) - 3 tau/R)/(tau s + 1)

    and the diffusion block is G_d(s) = (R/(5D))/(tau s + 1). States are the
    integrator, the bulk lag and the diffusion lag, in concentration units.
    """
    R, D = e.particle_radius, e.diffusion_coefficient
    if not (R > 0 and D > 0 and area > 0 and faraday > 0):
        raise ParameterError("radius, diffusivity, area and Faraday constant must be > 0")
    gain = -R / (3.0 * faraday * e.active_material_fraction * e.thickness * area)
    tau = R**2 / (35.0 * D)
    poles, inputs = [], []
    if "bulk" in parts:
        poles += [0.0, -1.0 / tau]
        inputs += [3.0 / R, (2.0 * R / (7.0 * D) - 3.0 * tau / R) / tau]
    if "diffusion" in parts:
        poles.append(-1.0 / tau)
        inputs.append(R / (5.0 * D) / tau)
    if not poles:
        raise ParameterError("parts must include 'bulk' and/or 'diffusion'")
    A = np.diag(poles)
    B = gain * np.asarray(inputs).reshape(-1, 1)
    C = np.ones((1, len(poles)))
    return A, B, C, np.zeros((1, 1))


def realize_solid_diffusion(
    e: ElectrodeParameters,
    dt: float,
    area: float,
    faraday: float = 96485.0,
    parts=("bulk", "diffusion"),
) -> DiscreteStateSpace:
    """Tustin realisation mapping electrode current (A) to c_s - c_s0 (mol/m^3)."""
    if not dt > 0:
        raise ParameterError("dt must be > 0")
    return _bilinear(*solid_diffusion_continuous(e, area, faraday, parts), dt)


# -- electrolyte -------------------------------------------------------------


def electrolyte_c1(p: CellParameters) -> float:
    """Electrolyte potential coefficient C_1.

    Grouping read from the printed expression: the 0.982 term multiplies
    (1 - 0.0052 (T0 - Tref) (c_e0/1000)^1.5) as a whole, and the 2RT prefactor
    uses the cell temperature.
    """
    ce = p.electrolyte_concentration
    if not ce > 0:
        raise ParameterError("electrolyte concentration must be > 0")
    R, T, F = p.gas_constant, p.temperature, p.faraday_constant
    x = ce / 1000.0
    activity = 0.601 - 0.24 * np.sqrt(x) + 0.982 * (1.0 - 0.0052 * (T - p.reference_temperature) * x**1.5)
    return float(
        2.0 * R * T * (-p.cell_thickness / p.surface_area * 1.0 / (F**2 * ce))
        * (1.0 - p.transference_number) * (1.0 + p.beta) * activity
    )


def electrolyte_continuous(p: CellParameters):
    L2 = p.cell_thickness**2
    De = p.electrolyte_diffusivity
    tau_pos = 0.1052 * L2 / De
    tau_neg = 0.0997 * L2 / De
    scale = electrolyte_c1(p) / De
    A = np.diag([-1.0 / tau_pos, -1.0 / tau_neg])
    B = scale * np.array([[0.124 * p.gamma_pos / tau_pos], [0.117 * p.gamma_neg / tau_neg]])
    return A, B, np.ones((1, 2)), np.zeros((1, 1))


def realize_electrolyte(p: CellParameters, dt: float) -> DiscreteStateSpace:
    """Tustin realisation mapping cell current (A) to phi_e (V)."""
    if not dt > 0:
        raise ParameterError("dt must be > 0")
    return _bilinear(*electrolyte_continuous(p), dt)


# -- kinetics ----------------------------------------------------------------


def exchange_current_density(c_s, e: ElectrodeParameters, T: float, T_ref: float, gas_constant: float, faraday: float):
    c_s = np.asarray(c_s, dtype=float)
    if np.any(c_s <= 0) or np.any(c_s >= e.max_concentration):
        raise DomainError(f"surface concentration outside (0, {e.max_concentration:g})")
    if not T > 0:
        raise DomainError("temperature must be > 0")
    arrhenius = np.exp((1.0 / T_ref - 1.0 / T) * e.activation_energy / gas_constant)
    root = np.sqrt(c_s * (e.max_concentration - c_s) * e.electrolyte_concentration)
    return arrhenius * faraday * e.reaction_rate * root


def kinetic_overpotential(
    c_s,
    e: ElectrodeParameters,
    current,
    T: float,
    T_ref: float = 298.15,
    gas_constant: float = 8.314,
    faraday: float = 96485.0,
):
    """eta = R T (-J I) / (F i0), vectorised over ``c_s`` and ``current``."""
    i0 = exchange_current_density(c_s, e, T, T_ref, gas_constant, faraday)
    return gas_constant * T * (-e.current_density_scaling * np.asarray(current, dtype=float)) / (faraday * i0)


# -- full model --------------------------------------------------------------


@dataclass
class LfmState:
    solid_pos: np.ndarray = field(default_factory=lambda: np.zeros(3))
    solid_neg: np.ndarray = field(default_factory=lambda: np.zeros(3))
    electrolyte: np.ndarray = field(default_factory=lambda: np.zeros(2))
    clock: float = 0.0

    def copy(self) -> "LfmState":
        return LfmState(self.solid_pos.copy(), self.solid_neg.copy(), self.electrolyte.copy(), self.clock)


@dataclass(eq=False)
class VoltageTrace:
    t: np.ndarray
    current: np.ndarray
    v_lfm: np.ndarray
    c_sp: np.ndarray
    c_sn: np.ndarray
    name: str = "cycle"
    final_state: LfmState | None = None

    def __len__(self) -> int:
        return self.t.size

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])


class LowFidelityModel:
    """Discretised E-ECM for one parameter set and sample time."""

    def __init__(self, params: CellParameters, dt: float = 1.0):
        self.params = params
        self.dt = float(dt)
        self.pos = realize_solid_diffusion(params.positive, dt, params.area, params.faraday_constant)
        self.neg = realize_solid_diffusion(params.negative, dt, params.area, params.faraday_constant)
        self.elec = realize_electrolyte(params, dt)
        self.r_memoryless = params.contact_resistance + params.cell_thickness / (params.kappa * params.area)
        # one block-diagonal system with inputs (-I, I, I) and outputs (dc_sp, dc_sn, phi_e)
        blocks = (self.pos, self.neg, self.elec)
        self._A = block_diag(*[b.A for b in blocks])
        self._B = block_diag(*[b.B for b in blocks]) @ np.array([-1.0, 1.0, 1.0])
        self._C = block_diag(*[b.C for b in blocks])
        self._D = np.array([-self.pos.D, self.neg.D, self.elec.D])
        self._split = np.cumsum([b.order for b in blocks])[:-1]

    def initial_state(self) -> LfmState:
        return LfmState(np.zeros(self.pos.order), np.zeros(self.neg.order), np.zeros(self.elec.order), 0.0)

    def _memoryless(self, current, c_sp, c_sn, t, offset=0):
        p = self.params
        for name, c, e in (("positive", c_sp, p.positive), ("negative", c_sn, p.negative)):
            bad = np.flatnonzero(~((c > 0) & (c < e.max_concentration)))
            if bad.size:
                k = int(bad[0])
                raise SaturationError(name, float(t[k]), float(c[k]), e.max_concentration, index=offset + k)
        T, Tr, Rg, F = p.temperature, p.reference_temperature, p.gas_constant, p.faraday_constant
        eta_p = kinetic_overpotential(c_sp, p.positive, current, T, Tr, Rg, F)
        eta_n = kinetic_overpotential(c_sn, p.negative, current, T, Tr, Rg, F)
        u_p = p.ocv_positive(c_sp / p.positive.max_concentration)
        u_n = p.ocv_negative(c_sn / p.negative.max_concentration)
        phi_ohm = -current * p.cell_thickness / (p.kappa * p.area)
        return u_p - u_n - (eta_p - eta_n) + phi_ohm - current * p.contact_resistance

    def step(self, state: LfmState, current: float) -> tuple[LfmState, float, float, float]:
        """Advance one sample; returns (new state, V_lfm, c_sp, c_sn) at the current sample."""
        trace = self._run(np.array([float(current)]), np.array([state.clock]), state, "step")
        return trace.final_state, float(trace.v_lfm[0]), float(trace.c_sp[0]), float(trace.c_sn[0])

    def simulate(self, cycle: DriveCycle, state: LfmState | None = None) -> VoltageTrace:
        if abs(cycle.dt - self.dt) > 1e-9:
            raise ParameterError(f"cycle dt {cycle.dt} differs from model dt {self.dt}")
        state = self.initial_state() if state is None else state
        return self._run(cycle.current, cycle.timestamps, state, cycle.name)

    def _run(self, u, t, state, name) -> VoltageTrace:
        x = np.concatenate([state.solid_pos, state.solid_neg, state.electrolyte])
        A, b, C, d = self._A, self._B, self._C, self._D
        y = np.empty((u.size, 3))
        for k, uk in enumerate(u):
            y[k] = C @ x + d * uk
            x = A @ x + b * uk
        p = self.params
        c_sp = p.positive.initial_concentration + y[:, 0]
        c_sn = p.negative.initial_concentration + y[:, 1]
        v = self._memoryless(u, c_sp, c_sn, t) + y[:, 2]
        xp, xn, xe = np.split(x, self._split)
        final = LfmState(xp, xn, xe, state.clock + self.dt * u.size)
        return VoltageTrace(np.array(t), np.array(u), v, c_sp, c_sn, name, final)


@lru_cache(maxsize=16)
def _model(params: CellParameters, dt: float) -> LowFidelityModel:
    return LowFidelityModel(params, dt)


def step_lfm(state: LfmState, current: float, params: CellParameters, dt: float = 1.0):
    """Functional single-step interface; see :meth:`LowFidelityModel.step`."""
    return _model(params, float(dt)).step(state, current)


def simulate_cycle(params: CellParameters, cycle: DriveCycle, state: LfmState | None = None) -> VoltageTrace:
    return _model(params, cycle.dt).simulate(cycle, state)


_TRACE_HEADER = ("t_s", "current_a", "v_lfm_v", "c_sp_molm3", "c_sn_molm3")


def save_trace_csv(trace: VoltageTrace, path) -> None:
    cols = (trace.t, trace.current, trace.v_lfm, trace.c_sp, trace.c_sn)
    write_csv(path, _TRACE_HEADER, zip(*(c.tolist() for c in cols)))


def load_trace_csv(path, name: str | None = None) -> VoltageTrace:
    c = read_csv_columns(path, _TRACE_HEADER)
    return VoltageTrace(
        c["t_s"], c["current_a"], c["v_lfm_v"], c["c_sp_molm3"], c["c_sn_molm3"], name or Path(path).stem
    )
