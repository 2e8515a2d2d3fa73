"""Coupled two-species dynamics with an A -> B reaction transfer.

Each species follows the full density-momentum system with its own noise
stream; the densities exchange mass through the explicit pointwise rate
scale * rhoA+ * rhoB+ * 1_{rhoB > rho_th}, subtracted from species A and
added to species B, so the discrete mass sum is conserved up to the
per-species flux conservation error.
"""

import numpy as np

from .fespace import (PairSpace, Quadrature, StatePair, interpolate,
                      mass_correct, total_mass)
from .noise import (CounterStream, VonMisesSpectrum, sample_increment,
                    truncation_set)
from .solver import RidkState, RunOutput, Stepper, _pointwise_mass


class CouplingParams:
    """Constants of the A + B -> 2B coupling between the species.

    The pointwise transfer rate is scale * rhoA+ * rhoB+ * 1_{rhoB > rho_th}
    with scale = kappa * pi * radius^2 * n_particles.

    Parameters
    ----------
    kappa : float
        Reaction rate, nonnegative.
    radius : float
        Interaction radius of the underlying particle reaction, nonnegative.
    n_particles : float
        Total particle count behind the density normalization.
    rho_th : float
        Threshold the B density must exceed for the transfer to act.
    """

    def __init__(self, kappa, radius, n_particles, rho_th):
        vals = dict(kappa=kappa, radius=radius, n_particles=n_particles,
                    rho_th=rho_th)
        for name, v in vals.items():
            if v < 0:
                raise ValueError(f"{name} must be nonnegative")
        self.kappa = float(kappa)
        self.radius = float(radius)
        self.n_particles = float(n_particles)
        self.rho_th = float(rho_th)
        self.scale = self.kappa * np.pi * self.radius ** 2 * self.n_particles


class TwoSpeciesState:
    """States of both species on one shared discretization and clock."""

    def __init__(self, pair_a, pair_b, t, step_index):
        sa, sb = pair_a.rho.space, pair_b.rho.space
        if sa.mesh is not sb.mesh or sa.q != sb.q:
            raise ValueError("species must share one discretization")
        self.pair_a = pair_a
        self.pair_b = pair_b
        self.t = float(t)
        self.step_index = int(step_index)


def _clip_rate(va, vb, coupling):
    # indicator evaluated on the raw B values, clipping inside the product
    return coupling.scale * np.maximum(va, 0.0) * np.maximum(vb, 0.0) \
        * (vb > coupling.rho_th)


def reaction_rate_field(rho_a, rho_b, coupling):
    """Transfer rate sampled at the stepping volume quadrature points.

    Parameters
    ----------
    rho_a, rho_b : Field
        Densities on one shared scalar space.
    coupling : CouplingParams

    Returns
    -------
    ndarray, shape (nelem, nq)
        scale * rhoA+ * rhoB+ * 1_{rhoB > rho_th} at the points of the
        degree 2q+2 volume rule, matching the layout step_two_species
        feeds back into the per-species density equations.
    """
    sa, sb = rho_a.space, rho_b.space
    if sa.mesh is not sb.mesh or sa.q != sb.q:
        raise ValueError("rate field needs both densities on one space")
    quad = Quadrature(sa.mesh, 2 * sa.q + 2)
    tab = sa.tabulate(quad.ref)
    va = np.einsum('ei,iq->eq', rho_a.coeffs[sa.element_dofs], tab)
    vb = np.einsum('ei,iq->eq', rho_b.coeffs[sa.element_dofs], tab)
    return _clip_rate(va, vb, coupling)


class TwoSpeciesStepper:
    """Advances both species through one shared single-species stepper.

    The transfer rate is frozen at step n and applied antisymmetrically:
    the source array handed to species B is the exact negation of the one
    handed to species A, so the assembled transfer vectors cancel in float
    arithmetic.
    """

    def __init__(self, pair_space, params, variant, coupling, dt):
        self.inner = Stepper(pair_space, params, variant, dt)
        self.coupling = coupling
        self.dt = float(dt)

    def step(self, state, increment_a=None, increment_b=None):
        va = self.inner.rho_at_quad(state.pair_a.rho.coeffs)
        vb = self.inner.rho_at_quad(state.pair_b.rho.coeffs)
        rate = _clip_rate(va, vb, self.coupling)
        a = self.inner.step(RidkState(state.pair_a, state.t, state.step_index),
                            increment=increment_a, rho_source=-rate)
        b = self.inner.step(RidkState(state.pair_b, state.t, state.step_index),
                            increment=increment_b, rho_source=rate)
        return TwoSpeciesState(a.pair, b.pair, a.t, a.step_index)


def step_two_species(state, params, variant, coupling, dt,
                     increment_a=None, increment_b=None):
    """Single coupled step without operator reuse; loops should use
    run_two_species or TwoSpeciesStepper."""
    space = state.pair_a.rho.space
    ps = PairSpace(space.mesh, space.q)
    return TwoSpeciesStepper(ps, params, variant, coupling, dt).step(
        state, increment_a, increment_b)


class TwoSpeciesRunOutput:
    """Per-species run diagnostics, one RunOutput per species."""

    def __init__(self, a, b):
        self.a = a
        self.b = b


def run_two_species(pair_space, params, variant, coupling, init_a, init_b,
                    grid, seed, snapshot_times=()):
    """Integrate the coupled system from interpolated initial data.

    Mirrors the single-species run loop: each init is a pointwise
    (rho0, j0) pair whose density is interpolated and corrected to its
    quadrature mass.  Species A draws noise from stream tag 0 of the seed,
    so with the coupling off it reproduces a single-species run with the
    same seed bit for bit; species B draws from tag 1.

    Returns
    -------
    TwoSpeciesRunOutput
    """
    dt, T = grid
    if T <= 0:
        raise ValueError("final time must be positive")
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(T, 1.0):
        raise ValueError("dt must divide the final time")
    snap_steps = {}
    for s in snapshot_times:
        k = int(round(s / dt))
        if abs(k * dt - s) > 1e-9:
            raise ValueError(f"snapshot time {s} is not a multiple of dt")
        snap_steps[k] = s

    mesh = pair_space.mesh

    def prep(init):
        rho = mass_correct(interpolate(pair_space.rho, init[0]),
                           _pointwise_mass(pair_space.rho, init[0]))
        return StatePair(rho, interpolate(pair_space.j, init[1]))

    state = TwoSpeciesState(prep(init_a), prep(init_b), 0.0, 0)
    stepper = TwoSpeciesStepper(pair_space, params, variant, coupling, dt)
    inner = stepper.inner

    noisy = params.sigma > 0
    if noisy:
        q_tilde = 0.5 if pair_space.q == 0 else float(pair_space.q)
        spectrum = VonMisesSpectrum(params.eps, mesh.d)
        tset = truncation_set(params.eps, mesh.h, q_tilde)
        streams = (CounterStream(seed, tag=0), CounterStream(seed, tag=1))

    diags = [dict(times=[], mass=[], min_rho=[], l2_rho=[], l2_j=[],
                  energy=[]) for _ in range(2)]
    snapshots = ([], [])

    def record(st):
        nr = pair_space.rho.ndof
        for pair, d in ((st.pair_a, diags[0]), (st.pair_b, diags[1])):
            u = pair.vector()
            d["times"].append(st.t)
            d["mass"].append(total_mass(pair.rho))
            d["min_rho"].append(inner.min_rho(u[:nr]))
            d["l2_rho"].append(np.sqrt(u[:nr] @ (inner.m_rho @ u[:nr])))
            d["l2_j"].append(np.sqrt(u[nr:] @ (inner.m_j @ u[nr:])))
            d["energy"].append(inner.energy(u))

    record(state)
    if 0 in snap_steps:
        snapshots[0].append((0.0, state.pair_a.copy()))
        snapshots[1].append((0.0, state.pair_b.copy()))

    for k in range(nsteps):
        if noisy:
            inc_a = sample_increment(spectrum, tset, dt, streams[0])
            inc_b = sample_increment(spectrum, tset, dt, streams[1])
        else:
            inc_a = inc_b = None
        state = stepper.step(state, inc_a, inc_b)
        record(state)
        if state.step_index in snap_steps:
            snapshots[0].append((state.t, state.pair_a.copy()))
            snapshots[1].append((state.t, state.pair_b.copy()))

    outs = []
    for pair, d, snaps in ((state.pair_a, diags[0], snapshots[0]),
                           (state.pair_b, diags[1], snapshots[1])):
        outs.append(RunOutput(d["times"], d["mass"], d["min_rho"],
                              d["l2_rho"], d["l2_j"], d["energy"], snaps,
                              RidkState(pair, state.t, state.step_index)))
    return TwoSpeciesRunOutput(outs[0], outs[1])
