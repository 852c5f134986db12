"""Three independent trajectory engines for the reduced system.

* ``flow_via_double``   evolves the slice point with the closed-form free
  flow upstairs and projects every sample back to (q, p);
* ``flow_via_projection`` reads q(t) off the ordered eigenvalues of the
  explicitly evolving unitary T(0) e^{i t sum_j mu_j L(0)^j} (positions only);
* ``flow_via_ode``      integrates Hamilton's equations for the reduced
  Hamiltonian with fixed-step RK4 and central-difference gradients.

The first two transcribe closed-form dynamics, the third knows nothing about
them, so their agreement is a genuine three-way check.  Conserved-quantity
monitors (energy, Lax spectrum, constraint residual) ride along in the
returned Trajectory.  Note regular initial data cannot actually collide: the
conserved trace Hamiltonians diverge on the collision set, so the
DegenerateAlcove paths here are defensive guards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import matcore, reduction
from .double import check_weights, free_flow, moment_map
from .errors import DegenerateAlcove, StepUnstable
from .matcore import DEFAULT_TOLS, Tolerances, frob
from .reduction import (
    AlcovePoint,
    PhasePoint,
    _hamiltonian_raw,
    _rs_lax_raw,
    check_coupling,
    decompose_to_slice,
    nu,
    slice_point,
)

# hard cap on ODE energy drift before declaring the step size unusable
ENERGY_BLOWUP = 1e-3


@dataclass(frozen=True)
class OdeSettings:
    """Fixed-step integrator knobs: RK4 step and central-difference width."""

    step: float = 1e-3
    gradient_step: float = 1e-6
    method: str = "rk4"

    def __post_init__(self):
        if not (np.isfinite(self.step) and self.step > 0.0):
            raise ValueError("step must be a positive number")
        if not (np.isfinite(self.gradient_step) and self.gradient_step > 0.0):
            raise ValueError("gradient_step must be a positive number")
        if self.method != "rk4":
            raise ValueError(f"unsupported method {self.method!r}")


@dataclass(eq=False)
class Trajectory:
    """Time-sampled reduced trajectory plus invariant diagnostics.

    q has one row per sample; p is None for the projection engine (it only
    produces positions).  lax_spectrum rows are ascending eigenvalues of the
    RS Lax matrix; constraint_residual is only recorded by the double engine.
    """

    times: np.ndarray
    q: np.ndarray
    p: np.ndarray | None
    energy: np.ndarray
    lax_spectrum: np.ndarray
    constraint_residual: np.ndarray | None
    engine: str

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.energy = np.asarray(self.energy, dtype=float)
        self.lax_spectrum = np.asarray(self.lax_spectrum, dtype=float)
        if self.p is not None:
            self.p = np.asarray(self.p, dtype=float)
        if self.constraint_residual is not None:
            self.constraint_residual = np.asarray(self.constraint_residual, dtype=float)
        m = self.times.size
        for name in ("q", "energy", "lax_spectrum"):
            if getattr(self, name).shape[0] != m:
                raise ValueError(f"{name} must have one row per sample")
        if self.p is not None and self.p.shape != self.q.shape:
            raise ValueError("p must match the shape of q")
        if self.constraint_residual is not None and self.constraint_residual.size != m:
            raise ValueError("constraint_residual must have one entry per sample")
        if m > 1 and not np.all(np.diff(self.times) > 0.0):
            raise ValueError("times must be strictly increasing")

    @property
    def n(self) -> int:
        return self.q.shape[1]

    def __len__(self) -> int:
        return self.times.size

    def point(self, i: int, alcove_gap: float = DEFAULT_TOLS.alcove_gap) -> PhasePoint:
        """PhasePoint at sample i (engines that produce momenta only)."""
        if self.p is None:
            raise ValueError(f"the {self.engine} engine does not produce momenta")
        return reduction.phase_point(self.q[i], self.p[i], alcove_gap)


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float).reshape(-1)
    if t.size < 1 or not np.all(np.isfinite(t)):
        raise ValueError("times must be a nonempty finite vector")
    if t[0] != 0.0:
        raise ValueError("times must start at 0")
    if t.size > 1 and not np.all(np.diff(t) > 0.0):
        raise ValueError("times must be strictly increasing")
    return t


def _partial(times, qs, ps, en, spec, res, engine, upto) -> Trajectory:
    return Trajectory(
        times[:upto],
        qs[:upto],
        None if ps is None else ps[:upto],
        en[:upto],
        spec[:upto],
        None if res is None else res[:upto],
        engine,
    )


def flow_via_double(
    start: PhasePoint, x, mu, times, tols: Tolerances = DEFAULT_TOLS
) -> Trajectory:
    """Evolve by the closed-form free flow upstairs, projecting each sample.

    The slice point of ``start`` is flowed exactly; every sample is pulled
    back to (q, p) with decompose_to_slice, and the distance of the conserved
    triangular map from nu(x) is recorded as the constraint residual.
    """
    x = check_coupling(x)
    mu = check_weights(mu)
    times = _check_times(times)
    n = start.n
    k0 = slice_point(start, x)
    target = nu(x, n)
    m = times.size
    qs = np.empty((m, n))
    ps = np.empty((m, n))
    en = np.empty(m)
    spec = np.empty((m, n))
    res = np.empty(m)
    for i, t in enumerate(times):
        kt = free_flow(k0, mu, float(t), tols)
        res[i] = frob(moment_map(kt, tols) - target)
        try:
            _, pt = decompose_to_slice(kt, x, tols)
        except DegenerateAlcove as exc:
            raise DegenerateAlcove(
                f"collision at t={t:g}: {exc}",
                at_time=float(t),
                partial=_partial(times, qs, ps, en, spec, res, "double", i),
            ) from exc
        qs[i] = pt.q.q
        ps[i] = pt.p
        en[i] = _hamiltonian_raw(pt.q.q, pt.p, x, mu)
        spec[i] = np.linalg.eigvalsh(_rs_lax_raw(pt.q.q, pt.p, x))
    return Trajectory(times, qs, ps, en, spec, res, "double")


def flow_via_projection(
    start: PhasePoint, x, mu, times, tols: Tolerances = DEFAULT_TOLS
) -> Trajectory:
    """Positions from the ordered eigenvalues of the evolving unitary.

    q(t) is half the sorted eigenangles of T(0) e^{i t sum_j mu_j L(0)^j}
    with L(0) the RS Lax matrix at the start; eigenvector-overlap matching
    against the previous sample keeps branch bookkeeping stable near close
    encounters before the final re-sort into the alcove.  No momenta are
    produced.  The evolving matrix is isospectral by construction, so the
    energy column is the (exactly conserved) initial value.
    """
    x = check_coupling(x)
    mu = check_weights(mu)
    times = _check_times(times)
    q0, p0 = start.q.q, start.p
    n = start.n
    lam, vec = np.linalg.eigh(_rs_lax_raw(q0, p0, x))
    speed = np.zeros_like(lam)
    for j, c in mu.items():
        speed += c * lam ** float(j)
    t0 = np.exp(2j * q0)
    h0 = _hamiltonian_raw(q0, p0, x, mu)
    m = times.size
    qs = np.empty((m, n))
    en = np.full(m, h0)
    spec = np.tile(lam, (m, 1))
    prev = None
    for i, t in enumerate(times):
        u_t = (t0[:, None] * vec) @ (np.exp(1j * t * speed)[:, None] * vec.conj().T)
        eig = matcore.unitary_eig(u_t, tols)
        if eig.degenerate:
            raise DegenerateAlcove(
                f"eigenvalue collision at t={t:g}",
                at_time=float(t),
                partial=_partial(times, qs, None, en, spec, None, "projection", i),
            )
        angles, vectors = eig.angles, eig.vectors
        if prev is not None:
            overlap = np.abs(prev.conj().T @ vectors)
            rows, cols = linear_sum_assignment(-overlap)
            perm = cols[np.argsort(rows)]
            angles, vectors = angles[perm], vectors[:, perm]
        prev = vectors
        half = np.sort(angles / 2.0)[::-1]
        try:
            AlcovePoint(half, tols.alcove_gap)
        except DegenerateAlcove as exc:
            raise DegenerateAlcove(
                f"collision at t={t:g}: {exc}",
                at_time=float(t),
                partial=_partial(times, qs, None, en, spec, None, "projection", i),
            ) from exc
        qs[i] = half
    return Trajectory(times, qs, None, en, spec, None, "projection")


def _canonical_qp(q: np.ndarray, p: np.ndarray, alcove_gap: float):
    """Wrap angles into [0, pi) and sort into the alcove, carrying p along."""
    qw = np.mod(q, np.pi)
    order = np.argsort(-qw, kind="stable")
    return AlcovePoint(qw[order], alcove_gap), p[order]


def flow_via_ode(
    start: PhasePoint,
    x,
    mu,
    times,
    settings: OdeSettings = OdeSettings(),
    tols: Tolerances = DEFAULT_TOLS,
) -> Trajectory:
    """Fixed-step RK4 on Hamilton's equations for the reduced Hamiltonian.

    Gradients are central differences of the Hamiltonian, so this engine is
    independent of the closed-form flows it is checked against.  Each
    inter-sample interval is covered by uniform substeps no longer than
    ``settings.step``.  Emitted samples are wrapped into the alcove (angles
    are defined mod pi; momenta follow their particle through the re-sort).
    Raises StepUnstable when energy drifts beyond the safety cap.
    """
    x = check_coupling(x)
    mu = check_weights(mu)
    times = _check_times(times)
    n = start.n
    fd = settings.gradient_step

    def hamiltonian(q, p):
        return _hamiltonian_raw(q, p, x, mu)

    def velocity(y):
        q, p = y[:n], y[n:]
        dq = np.empty(n)
        dp = np.empty(n)
        for k in range(n):
            eq = np.zeros(n)
            eq[k] = fd
            dp[k] = (hamiltonian(q, p + eq) - hamiltonian(q, p - eq)) / (2.0 * fd)
            dq[k] = (hamiltonian(q + eq, p) - hamiltonian(q - eq, p)) / (2.0 * fd)
        return np.concatenate([dp, -dq])  # (qdot, pdot)

    y = np.concatenate([start.q.q, start.p])
    e0 = hamiltonian(start.q.q, start.p)
    m = times.size
    qs = np.empty((m, n))
    ps = np.empty((m, n))
    en = np.empty(m)
    spec = np.empty((m, n))
    for i, t in enumerate(times):
        if i:
            span = float(times[i] - times[i - 1])
            steps = max(1, int(np.ceil(span / settings.step - 1e-12)))
            h = span / steps
            for _ in range(steps):
                k1 = velocity(y)
                k2 = velocity(y + 0.5 * h * k1)
                k3 = velocity(y + 0.5 * h * k2)
                k4 = velocity(y + h * k3)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        q, p = y[:n], y[n:]
        try:
            alcove, pc = _canonical_qp(q, p, tols.alcove_gap)
        except DegenerateAlcove as exc:
            raise DegenerateAlcove(
                f"collision at t={t:g}: {exc}",
                at_time=float(t),
                partial=_partial(times, qs, ps, en, spec, None, "ode", i),
            ) from exc
        energy = hamiltonian(alcove.q, pc)
        if abs(energy - e0) > ENERGY_BLOWUP:
            raise StepUnstable(
                f"energy drift {abs(energy - e0):.3e} at t={t:g}; reduce the step"
            )
        qs[i] = alcove.q
        ps[i] = pc
        en[i] = energy
        spec[i] = np.linalg.eigvalsh(_rs_lax_raw(alcove.q, pc, x))
    return Trajectory(times, qs, ps, en, spec, None, "ode")


def poisson_bracket(f, g, at: PhasePoint, gradient_step: float = 1e-6) -> float:
    """Canonical bracket sum_k (dF/dq_k dG/dp_k - dF/dp_k dG/dq_k).

    f and g are scalar functions of a PhasePoint; derivatives are central
    differences of width ``gradient_step``.  The point must sit far enough
    from the alcove walls that the q-perturbations stay regular.
    """
    if not (np.isfinite(gradient_step) and gradient_step > 0.0):
        raise ValueError("gradient_step must be positive")
    n = at.n
    q, p = at.q.q, at.p
    h = gradient_step

    def make(qv, pv):
        try:
            return PhasePoint(AlcovePoint(qv, at.q.alcove_gap), pv)
        except (ValueError, DegenerateAlcove) as exc:
            raise DegenerateAlcove(
                f"perturbed point left the alcove (margin < {h:g}): {exc}"
            ) from exc

    fq = np.empty(n)
    fp = np.empty(n)
    gq = np.empty(n)
    gp = np.empty(n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        fq[k] = (f(make(q + e, p)) - f(make(q - e, p))) / (2.0 * h)
        gq[k] = (g(make(q + e, p)) - g(make(q - e, p))) / (2.0 * h)
        fp[k] = (f(make(q, p + e)) - f(make(q, p - e))) / (2.0 * h)
        gp[k] = (g(make(q, p + e)) - g(make(q, p - e))) / (2.0 * h)
    return float(fq @ gp - fp @ gq)


def spectrum_drift(traj: Trajectory) -> float:
    """Max over time of the sup-norm deviation of the Lax spectrum from t=0."""
    if len(traj) < 2:
        return 0.0
    return float(np.max(np.abs(traj.lax_spectrum - traj.lax_spectrum[0])))
