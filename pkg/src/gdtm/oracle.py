"""Ground-truth dynamics of spring-mass-damper chains.

Assembles ``M``, ``C``, ``K`` for a chain, synthesizes single-vertex
excitations, and integrates ``M a + C v + K u = F`` with the implicit
Newmark-beta scheme. The kinematic update shared with the surrogate rollout
lives here too.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg

IMPULSE, HARMONIC, RANDOM = "impulse", "harmonic", "random"
EXCITATION_KINDS = (IMPULSE, HARMONIC, RANDOM)

EPISODE_HEADER = ["step", "time_s", "vertex", "excitation_N", "acc_mps2", "vel_mps", "disp_m"]


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class MdofSystem:
    """Chain of masses with springs and dampers ordered ground->0, 0->1, ..."""

    masses: np.ndarray
    spring_stiffnesses: np.ndarray
    damper_coefficients: np.ndarray
    grounded: bool = True

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        k = np.asarray(self.spring_stiffnesses, dtype=float)
        c = np.asarray(self.damper_coefficients, dtype=float)
        n_springs = len(m) if self.grounded else len(m) - 1
        if m.ndim != 1 or len(m) < 1 or np.any(m <= 0):
            raise ValueError("masses must be a non-empty vector of positive values")
        if k.shape != (n_springs,) or c.shape != (n_springs,):
            raise ValueError(
                f"{len(m)} vertices need {n_springs} springs and dampers, "
                f"got {k.shape} and {c.shape}"
            )
        if np.any(k < 0) or (n_springs and not np.any(k > 0)):
            raise ValueError("stiffnesses must be >= 0 with at least one positive")
        if np.any(c < 0):
            raise ValueError("damping must be >= 0")
        object.__setattr__(self, "masses", m)
        object.__setattr__(self, "spring_stiffnesses", k)
        object.__setattr__(self, "damper_coefficients", c)

    @property
    def vertex_count(self) -> int:
        return len(self.masses)


def uniform_chain(n, mass=2000.0, stiffness=2.4e5, damping=2500.0, grounded=True):
    n_springs = n if grounded else n - 1
    return MdofSystem(np.full(n, float(mass)), np.full(n_springs, float(stiffness)),
                      np.full(n_springs, float(damping)), grounded)


def scaled_system(system: MdofSystem, stiffness=1.0, mass=1.0, damping=1.0) -> MdofSystem:
    """Scale K, M, C by scalars or per-spring / per-mass arrays."""
    return MdofSystem(system.masses * mass, system.spring_stiffnesses * stiffness,
                      system.damper_coefficients * damping, system.grounded)


def _tridiagonal(n, values, grounded):
    out = np.zeros((n, n))
    offset = 1 if grounded else 0
    if grounded:
        out[0, 0] += values[0]
    for i in range(1, n):
        w = values[i - 1 + offset]
        out[i - 1, i - 1] += w
        out[i, i] += w
        out[i - 1, i] -= w
        out[i, i - 1] -= w
    return out


def assemble_matrices(system: MdofSystem):
    n = system.vertex_count
    mass = np.diag(system.masses)
    damping = _tridiagonal(n, system.damper_coefficients, system.grounded)
    stiffness = _tridiagonal(n, system.spring_stiffnesses, system.grounded)
    return mass, damping, stiffness


@dataclass(frozen=True)
class ExcitationSpec:
    kind: str
    target_vertex: int
    amplitude: float
    frequency: float = 1.0
    duration_steps: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in EXCITATION_KINDS:
            raise ValueError(f"unknown excitation kind {self.kind!r}")
        if not np.isfinite(self.amplitude):
            raise ValueError("amplitude must be finite")
        if self.kind == HARMONIC and not self.frequency > 0:
            raise ValueError("harmonic frequency must be > 0")
        if self.kind == IMPULSE and self.duration_steps < 1:
            raise ValueError("impulse duration must be >= 1 step")


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 0.01
    steps: int = 5000
    beta: float = 0.25
    gamma: float = 0.5

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        # average-acceleration stability bounds
        if self.gamma < 0.5 or self.beta < 0.25:
            raise ValueError(f"need gamma >= 0.5 and beta >= 0.25, got {self.gamma}, {self.beta}")


def generate_excitation(spec: ExcitationSpec, config: SolverConfig, n_vertices: int) -> np.ndarray:
    if not 0 <= spec.target_vertex < n_vertices:
        raise IndexError(f"target vertex {spec.target_vertex} outside 0..{n_vertices - 1}")
    out = np.zeros((config.steps, n_vertices))
    col = out[:, spec.target_vertex]
    if spec.kind == IMPULSE:
        col[: spec.duration_steps] = spec.amplitude
    elif spec.kind == HARMONIC:
        t = np.arange(config.steps) * config.dt
        col[:] = spec.amplitude * np.sin(2 * np.pi * spec.frequency * t)
    else:
        col[:] = spec.amplitude * np.random.default_rng(spec.seed).standard_normal(config.steps)
    return out


@dataclass(frozen=True)
class EpisodeRecord:
    """Time-aligned ``T x V`` channels of one run."""

    dt: float
    excitation: np.ndarray
    acceleration: np.ndarray
    velocity: np.ndarray
    displacement: np.ndarray

    def __post_init__(self):
        shape = np.shape(self.excitation)
        for name in ("excitation", "acceleration", "velocity", "displacement"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 2 or arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arr)

    @property
    def steps(self) -> int:
        return self.acceleration.shape[0]

    @property
    def vertex_count(self) -> int:
        return self.acceleration.shape[1]


def kinematic_update(u, v, a, a_next, dt, beta=0.25, gamma=0.5):
    u_next = u + dt * v + 0.5 * dt * dt * ((1 - 2 * beta) * a + 2 * beta * a_next)
    v_next = v + dt * ((1 - gamma) * a + gamma * a_next)
    return u_next, v_next


def integrate_accelerations(acc, config: SolverConfig, u0=None, v0=None):
    acc = np.asarray(acc, dtype=float)
    vel = np.zeros_like(acc)
    disp = np.zeros_like(acc)
    if u0 is not None:
        disp[0] = u0
    if v0 is not None:
        vel[0] = v0
    for n in range(len(acc) - 1):
        disp[n + 1], vel[n + 1] = kinematic_update(
            disp[n], vel[n], acc[n], acc[n + 1], config.dt, config.beta, config.gamma)
    return vel, disp


def newmark_solve(system: MdofSystem, excitation, config: SolverConfig, u0=None, v0=None) -> EpisodeRecord:
    """Implicit Newmark-beta integration of ``M a + C v + K u = F``.

    The effective matrix ``M + gamma dt C + beta dt^2 K`` is factored once;
    every step solves it against the predictor residual and then applies the
    kinematic update.
    """
    force = np.asarray(excitation, dtype=float)
    n = system.vertex_count
    if force.ndim != 2 or force.shape[1] != n:
        raise ValueError(f"excitation must be T x {n}, got {force.shape}")
    mass, damping, stiffness = assemble_matrices(system)
    dt, beta, gamma = config.dt, config.beta, config.gamma

    steps = force.shape[0]
    acc = np.zeros((steps, n))
    vel = np.zeros((steps, n))
    disp = np.zeros((steps, n))
    if u0 is not None:
        disp[0] = u0
    if v0 is not None:
        vel[0] = v0
    acc[0] = (force[0] - damping @ vel[0] - stiffness @ disp[0]) / system.masses

    effective = mass + gamma * dt * damping + beta * dt * dt * stiffness
    try:
        lu = linalg.lu_factor(effective, check_finite=True)
    except (linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"effective matrix factorization failed: {exc}") from exc
    if np.any(np.abs(np.diag(lu[0])) < 1e-300):
        raise SolverError("effective matrix is singular")

    for i in range(steps - 1):
        u_pred = disp[i] + dt * vel[i] + dt * dt * (0.5 - beta) * acc[i]
        v_pred = vel[i] + dt * (1 - gamma) * acc[i]
        acc[i + 1] = linalg.lu_solve(lu, force[i + 1] - damping @ v_pred - stiffness @ u_pred,
                                     check_finite=False)
        disp[i + 1] = u_pred + beta * dt * dt * acc[i + 1]
        vel[i + 1] = v_pred + gamma * dt * acc[i + 1]
    return EpisodeRecord(dt, force, acc, vel, disp)


def total_energy(system: MdofSystem, record: EpisodeRecord) -> np.ndarray:
    """Kinetic plus strain energy at every step."""
    _, _, stiffness = assemble_matrices(system)
    v, u = record.velocity, record.displacement
    kinetic = 0.5 * np.einsum("ti,i,ti->t", v, system.masses, v)
    strain = 0.5 * np.einsum("ti,ij,tj->t", u, stiffness, u)
    return kinetic + strain


def write_episode_csv(record: EpisodeRecord, path) -> None:
    steps, n = record.acceleration.shape
    step = np.repeat(np.arange(steps), n)
    vertex = np.tile(np.arange(n), steps)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EPISODE_HEADER)
        cols = (record.excitation.ravel(), record.acceleration.ravel(),
                record.velocity.ravel(), record.displacement.ravel())
        for r in range(steps * n):
            s = int(step[r])
            w.writerow([s, repr(s * record.dt), int(vertex[r])] + [repr(float(c[r])) for c in cols])


def read_long_csv(path, header):
    """Read a long-format CSV whose header must equal ``header`` exactly."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        found = next(reader, None)
        if found != list(header):
            raise ValueError(f"{path}: header {found} does not match {list(header)}")
        rows = [row for row in reader if row]
    if not rows:
        return np.zeros((0, len(header)))
    return np.array(rows, dtype=float)


def _unflatten(data, path):
    step = data[:, 0].astype(int)
    vertex = data[:, 2].astype(int)
    steps, n = step.max() + 1, vertex.max() + 1
    if len(data) != steps * n or np.any(step != np.repeat(np.arange(steps), n)) \
            or np.any(vertex != np.tile(np.arange(n), steps)):
        raise ValueError(f"{path}: rows must be ordered by step then vertex with no gaps")
    dt = float(data[n, 1]) if steps > 1 else 0.0
    return steps, n, dt


def read_episode_csv(path, dt=None) -> EpisodeRecord:
    data = read_long_csv(path, EPISODE_HEADER)
    if len(data) == 0:
        raise ValueError(f"{path}: no rows")
    steps, n, file_dt = _unflatten(data, path)
    dt = file_dt if dt is None else dt
    cols = [data[:, c].reshape(steps, n) for c in range(3, 7)]
    return EpisodeRecord(dt, *cols)
