"""Semi-implicit Euler-Maruyama time stepping of the regularized system.

Each step solves the block system

    (M_w - dt A) u^{n+1} = M_w u^n + dt F^n + G^n,

where A is the assembled first-order operator (all stiff linear terms
implicit), F^n carries the potential coupling -(grad V rho^n_+, psi) and G^n
the noise contribution, both frozen at step n.  M_w is the energy-weighted
mass matrix diag(kbt M_rho, M_j); the extra-diffusion variant adds an
interior-penalty Laplacian to the density block, and the time-scale variant
reweights the momentum mass block by phi_tau(rho^n).
"""

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .fespace import (Quadrature, PairSpace, StatePair, _eval_scalar,
                      interpolate, mass_correct, total_mass)
from .forms import assemble_ah
from .noise import (CounterStream, VonMisesSpectrum, mode_basis,
                    sample_increment, truncation_set)

_SOLVE_TOL = 1e-9


class Base:
    """Unmodified equations."""


class ExtraDiffusion:
    """Additional density diffusion D0 * Laplacian(rho)."""

    def __init__(self, d0):
        if d0 <= 0:
            raise ValueError("diffusion coefficient must be positive")
        self.d0 = float(d0)


class TimeScaleSwitch:
    """Momentum time derivative scaled by phi_tau(rho)."""

    def __init__(self, tau):
        if tau <= 0:
            raise ValueError("switch threshold must be positive")
        self.tau = float(tau)


class RidkParams:
    """Physical parameters; kbt is derived as sigma^2 / (2 gamma).

    Noise-free runs (sigma = 0, including the wave-equation limit gamma = 0)
    need an explicit kbt since the derived form degenerates; with noise on,
    kbt must stay derived.
    """

    def __init__(self, gamma, sigma, eps, n_particles, delta=1e-4,
                 potential=None, kbt=None):
        if gamma < 0 or sigma < 0:
            raise ValueError("gamma and sigma must be nonnegative")
        if eps <= 0:
            raise ValueError("eps must be positive")
        if n_particles <= 0:
            raise ValueError("particle count must be positive")
        if delta < 0:
            raise ValueError("delta must be nonnegative")
        if sigma == 0:
            if kbt is None:
                raise ValueError("noise-free runs need an explicit kbt")
            self._kbt = float(kbt)
        else:
            if gamma == 0:
                raise ValueError("noise requires positive dissipation")
            if kbt is not None:
                raise ValueError("kbt is derived from sigma and gamma")
            self._kbt = sigma * sigma / (2.0 * gamma)
        if self._kbt <= 0:
            raise ValueError("kbt must be positive")
        self.gamma = float(gamma)
        self.sigma = float(sigma)
        self.eps = float(eps)
        self.n_particles = float(n_particles)
        self.delta = float(delta)
        self.potential = potential

    @property
    def kbt(self):
        return self._kbt


class RidkState:
    def __init__(self, pair, t, step_index):
        self.pair = pair
        self.t = float(t)
        self.step_index = int(step_index)


class RunOutput:
    """Per-step diagnostics and requested snapshots of a run."""

    def __init__(self, times, mass, min_rho, l2_rho, l2_j, energy,
                 snapshots, final_state, degenerate_premise=None):
        times = np.asarray(times)
        if np.any(np.diff(times) <= 0):
            raise ValueError("diagnostic timestamps must increase strictly")
        self.times = times
        self.mass = np.asarray(mass)
        self.min_rho = np.asarray(min_rho)
        self.l2_rho = np.asarray(l2_rho)
        self.l2_j = np.asarray(l2_j)
        self.energy = np.asarray(energy)
        self.snapshots = snapshots
        self.final_state = final_state
        self.degenerate_premise = degenerate_premise


def phi_tau(rho, tau):
    """C1 switch: 0 below tau/2, 1 above tau, cubic smoothstep between."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    rho = np.asarray(rho, dtype=float)
    s = np.clip((rho - 0.5 * tau) / (0.5 * tau), 0.0, 1.0)
    out = s * s * (3.0 - 2.0 * s)
    return float(out) if out.ndim == 0 else out


def sqrt_reg(rho, delta):
    """Regularized square root: sqrt(rho) above delta, linear ramp below."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    rho = np.asarray(rho, dtype=float)
    pos = np.maximum(rho, 0.0)
    if delta == 0.0:
        out = np.sqrt(pos)
    else:
        out = np.where(pos >= delta, np.sqrt(np.maximum(pos, delta)),
                       pos / np.sqrt(delta))
    return float(out) if out.ndim == 0 else out


def sip_matrix(space):
    """Symmetric interior-penalty stiffness for -Laplacian on a DG space.

    Penalty 4(q+1)^2 / h.  The piecewise-constant case keeps only the
    penalty term (element gradients vanish).
    """
    mesh = space.mesh
    q = space.q
    eta = 4.0 * (q + 1) ** 2 / mesh.h
    rows, cols, vals = [], [], []

    if q > 0:
        quad = Quadrature(mesh, 2 * q)
        grad = space.tabulate_grad(quad.ref)
        cell = np.einsum('eiqd,ekqd,eq->eik', grad, grad, quad.weights)
        ed = space.element_dofs
        nde = ed.shape[1]
        rows.append(np.repeat(ed, nde, axis=1).ravel())
        cols.append(np.tile(ed, (1, nde)).ravel())
        vals.append(cell.ravel())

    if mesh.d == 1:
        ends = np.array([0.0, 1.0])
        tr = space.tabulate(ends)                 # (nde, 2) by ref endpoint
        grads = space.tabulate_grad(ends)         # (nelem, nde, 2, 1)
        for f in range(mesh.nfacet):
            n = mesh.facet_normals[f, 0]
            sides = []
            for s in range(2):
                e = mesh.facet_elems[f, s]
                loc = mesh.facet_local[f, s]
                om = mesh.elem_facet_sign[e, loc]
                sides.append((e, tr[:, loc], grads[e, :, loc, 0] * n, om))
            for (es, ts, gs, oms) in sides:
                for (et, tt, gt, omt) in sides:
                    block = (eta * oms * omt * np.outer(ts, tt)
                             - 0.5 * (omt * np.outer(gs, tt)
                                      + oms * np.outer(ts, gt)))
                    rows.append(np.repeat(space.element_dofs[es], len(tt)))
                    cols.append(np.tile(space.element_dofs[et], len(ts)))
                    vals.append(block.ravel())
    else:
        if q != 0:
            raise NotImplementedError("2D interior penalty is order 0 only")
        # constants: the penalty term is all that survives
        om = np.empty_like(mesh.facet_elems, dtype=float)
        for s in range(2):
            om[:, s] = mesh.elem_facet_sign[mesh.facet_elems[:, s],
                                            mesh.facet_local[:, s]]
        ed = space.element_dofs[:, 0]
        for s in range(2):
            for t in range(2):
                rows.append(ed[mesh.facet_elems[:, s]])
                cols.append(ed[mesh.facet_elems[:, t]])
                vals.append(eta * om[:, s] * om[:, t] * mesh.facet_measures)

    n = space.ndof
    return sp.coo_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n)).tocsr()


class Stepper:
    """Caches the assembled operator and factorization across steps.

    forcing, if given, is a callable (points, t) -> (npts, d) added to the
    momentum equation explicitly at step n (manufactured solutions).
    """

    def __init__(self, pair_space, params, variant, dt, forcing=None):
        if dt <= 0:
            raise ValueError("dt must be positive")
        self.ps = pair_space
        self.params = params
        self.variant = variant
        self.dt = float(dt)
        self.forcing = forcing
        kbt = params.kbt

        self.op = assemble_ah(pair_space, kbt, params.gamma)
        self.m_rho = pair_space.rho.mass_matrix()
        self.m_j = pair_space.j.mass_matrix()
        nr, nj = pair_space.rho.ndof, pair_space.j.ndof

        rho_block = kbt * self.m_rho
        if isinstance(variant, ExtraDiffusion):
            rho_block = rho_block + self.dt * kbt * variant.d0 * \
                sip_matrix(pair_space.rho)
        zero_j = sp.csr_matrix((nj, nj))
        # system matrix without the momentum mass block, which is constant
        # for Base/ExtraDiffusion but rho-dependent for TimeScaleSwitch
        self._partial = (-self.dt * self.op.matrix
                         + sp.block_diag((rho_block, zero_j))).tocsr()
        self._lu = None
        if not isinstance(variant, TimeScaleSwitch):
            self._full = (self._partial + sp.block_diag(
                (sp.csr_matrix((nr, nr)), self.m_j))).tocsc()
            self._lu = splu(self._full)

        # frozen-term quadrature: same rule as the volume terms of A
        mesh = pair_space.mesh
        self.quad = Quadrature(mesh, 2 * pair_space.q + 2)
        self.tab_rho = pair_space.rho.tabulate(self.quad.ref)
        self.vals_j = pair_space.j.values(self.quad)
        self.x_flat = self.quad.points.reshape(-1, mesh.d)
        if params.potential is not None:
            self.grad_v = params.potential.grad(self.x_flat).reshape(
                self.quad.points.shape)
        else:
            self.grad_v = None

        # min-rho sampling grid: quadrature points plus element vertices
        if mesh.d == 1:
            extra = np.array([[0.0], [1.0]])
        else:
            extra = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        self.tab_min = pair_space.rho.tabulate(np.vstack([self.quad.ref,
                                                          extra]))
        # noise basis cache, keyed on the identity of the modes array
        self._noise_modes = None
        self._noise_basis = None

    def rho_at_quad(self, rho_coeffs):
        per_elem = rho_coeffs[self.ps.rho.element_dofs]
        return np.einsum('ei,iq->eq', per_elem, self.tab_rho)

    def _momentum_mass(self, rho_quad):
        """Momentum mass matrix weighted by phi_tau(rho^n)."""
        w = self.quad.weights * phi_tau(rho_quad, self.variant.tau)
        cell = np.einsum('eiqd,ekqd,eq->eik', self.vals_j, self.vals_j, w)
        ed = self.ps.j.element_dofs
        nde = ed.shape[1]
        rows = np.repeat(ed, nde, axis=1).ravel()
        cols = np.tile(ed, (1, nde)).ravel()
        n = self.ps.j.ndof
        return sp.coo_matrix((cell.ravel(), (rows, cols)),
                             shape=(n, n)).tocsr()

    def step(self, state, increment=None, rho_source=None):
        """Advance one step; the increment must be drawn for this step.

        rho_source, if given, holds source values at the volume quadrature
        points (nelem, nq) added to the density equation explicitly at
        step n (the two-species reaction transfer).
        """
        p = self.params
        ps = self.ps
        nr = ps.rho.ndof
        u = state.pair.vector()
        rho_quad = self.rho_at_quad(u[:nr])

        if isinstance(self.variant, TimeScaleSwitch):
            mj_phi = self._momentum_mass(rho_quad)
            nrz = sp.csr_matrix((nr, nr))
            mat = (self._partial + sp.block_diag((nrz, mj_phi))).tocsc()
            lu = splu(mat)
            m_w_u = np.concatenate([p.kbt * (self.m_rho @ u[:nr]),
                                    mj_phi @ u[nr:]])
        else:
            mat, lu = self._full, self._lu
            m_w_u = np.concatenate([p.kbt * (self.m_rho @ u[:nr]),
                                    self.m_j @ u[nr:]])

        rhs = m_w_u
        if self.grad_v is not None:
            # -(grad V rho^n_+, psi), frozen at step n
            rho_pos = np.maximum(rho_quad, 0.0)
            cell = -np.einsum('eq,eqd,eiqd,eq->ei', rho_pos, self.grad_v,
                              self.vals_j, self.quad.weights)
            f_j = np.zeros(ps.j.ndof)
            np.add.at(f_j, ps.j.element_dofs, cell)
            rhs = rhs + self.dt * np.concatenate([np.zeros(nr), f_j])

        if self.forcing is not None:
            fv = np.asarray(self.forcing(self.x_flat, state.t)).reshape(
                self.quad.points.shape)
            cell = np.einsum('eqd,eiqd,eq->ei', fv, self.vals_j,
                             self.quad.weights)
            f_j = np.zeros(ps.j.ndof)
            np.add.at(f_j, ps.j.element_dofs, cell)
            rhs = rhs + self.dt * np.concatenate([np.zeros(nr), f_j])

        if rho_source is not None:
            # the density row carries the kbt weighting of M_w
            cell = p.kbt * np.einsum('eq,iq,eq->ei', rho_source,
                                     self.tab_rho, self.quad.weights)
            f_r = np.zeros(nr)
            np.add.at(f_r, ps.rho.element_dofs, cell)
            rhs = rhs + self.dt * np.concatenate([f_r, np.zeros(ps.j.ndof)])

        if increment is not None and p.sigma > 0:
            amp = sqrt_reg(rho_quad, p.delta)
            if isinstance(self.variant, TimeScaleSwitch):
                amp = amp * np.sqrt(phi_tau(rho_quad, self.variant.tau))
            if increment.modes is not self._noise_modes:
                self._noise_modes = increment.modes
                self._noise_basis = mode_basis(increment.modes, self.x_flat)
            xi = (self._noise_basis @ increment.coeffs.T).reshape(
                self.quad.points.shape)
            cell = (p.sigma / np.sqrt(p.n_particles)) * np.einsum(
                'eq,eqd,eiqd,eq->ei', amp, xi, self.vals_j,
                self.quad.weights)
            g_j = np.zeros(ps.j.ndof)
            np.add.at(g_j, ps.j.element_dofs, cell)
            rhs = rhs + np.concatenate([np.zeros(nr), g_j])

        new_u = lu.solve(rhs)
        if not np.all(np.isfinite(new_u)):
            raise RuntimeError(
                f"non-finite state after step {state.step_index + 1}")
        resid = np.abs(mat @ new_u - rhs).max()
        if resid > _SOLVE_TOL * max(1.0, np.abs(rhs).max()):
            raise RuntimeError(
                f"linear solve failed at step {state.step_index + 1}: "
                f"residual {resid:.3e}")
        return RidkState(ps.pair_from_vector(new_u), state.t + self.dt,
                         state.step_index + 1)

    def min_rho(self, rho_coeffs):
        per_elem = rho_coeffs[self.ps.rho.element_dofs]
        return np.einsum('ei,iq->eq', per_elem, self.tab_min).min()

    def energy(self, u):
        nr = self.ps.rho.ndof
        return (self.params.kbt * (u[:nr] @ (self.m_rho @ u[:nr]))
                + u[nr:] @ (self.m_j @ u[nr:]))


def step(state, params, variant, dt, increment=None):
    """Single step without operator reuse; loops should use run or Stepper."""
    ps = PairSpace(state.pair.rho.space.mesh, state.pair.rho.space.q)
    return Stepper(ps, params, variant, dt).step(state, increment)


def _neighbor_elems(mesh):
    nbrs = [[] for _ in range(mesh.nelem)]
    for f in range(mesh.nfacet):
        a, b = mesh.facet_elems[f]
        nbrs[a].append(b)
        nbrs[b].append(a)
    return nbrs


def _pointwise_mass(space, f):
    """Integral of a pointwise density by elevated quadrature."""
    quad = Quadrature(space.mesh, min(2 * space.q + 6, 6)
                      if space.mesh.d == 2 else 2 * space.q + 6)
    return float(np.sum(quad.weights * _eval_scalar(f, quad.points)))


def run(pair_space, params, variant, init, grid, seed, snapshot_times=(),
        track_degeneracy=False, forcing=None, noise_factory=None):
    """Integrate from interpolated initial data, recording diagnostics.

    init is a pointwise pair (rho0, j0); the density is interpolated and
    corrected to the quadrature mass of rho0 before stepping.  grid is
    (dt, T); snapshot times must be multiples of dt.  noise_factory, if
    given, overrides the default increment sampling with a callable
    (step_index, dt) -> NoiseIncrement (coupled-refinement studies inject
    identical increments at several resolutions this way).
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
    rho0 = mass_correct(interpolate(pair_space.rho, init[0]),
                        _pointwise_mass(pair_space.rho, init[0]))
    j0 = interpolate(pair_space.j, init[1])
    state = RidkState(StatePair(rho0, j0), 0.0, 0)

    stepper = Stepper(pair_space, params, variant, dt, forcing=forcing)
    noisy = params.sigma > 0
    if noisy and noise_factory is None:
        q_tilde = 0.5 if pair_space.q == 0 else float(pair_space.q)
        spectrum = VonMisesSpectrum(params.eps, mesh.d)
        tset = truncation_set(params.eps, mesh.h, q_tilde)
        stream = CounterStream(seed)
        noise_factory = lambda k, step_dt: sample_increment(
            spectrum, tset, step_dt, stream)
    if track_degeneracy and not isinstance(variant, TimeScaleSwitch):
        raise ValueError("degeneracy tracking applies to the time-scale "
                         "variant only")
    nbrs = _neighbor_elems(mesh) if track_degeneracy else None

    times, mass, min_rho, l2_rho, l2_j, energy = [], [], [], [], [], []
    premise = [] if track_degeneracy else None
    snapshots = []

    def record(st):
        u = st.pair.vector()
        nr = pair_space.rho.ndof
        times.append(st.t)
        mass.append(total_mass(st.pair.rho))
        min_rho.append(stepper.min_rho(u[:nr]))
        l2_rho.append(np.sqrt(u[:nr] @ (stepper.m_rho @ u[:nr])))
        l2_j.append(np.sqrt(u[nr:] @ (stepper.m_j @ u[nr:])))
        energy.append(stepper.energy(u))

    record(state)
    if 0 in snap_steps:
        snapshots.append((0.0, state.pair.copy()))

    for k in range(nsteps):
        inc = noise_factory(k, dt) if noisy else None
        if track_degeneracy:
            phi = phi_tau(stepper.rho_at_quad(state.pair.rho.coeffs),
                          variant.tau)
            dead = phi.min(axis=1) == 0.0
            wholly = phi.max(axis=1) == 0.0
            ok = all(wholly[e] and all(wholly[nb] for nb in nbrs[e])
                     for e in np.nonzero(dead)[0])
            premise.append(ok)
        state = stepper.step(state, inc)
        record(state)
        if state.step_index in snap_steps:
            snapshots.append((state.t, state.pair.copy()))

    return RunOutput(times, mass, min_rho, l2_rho, l2_j, energy, snapshots,
                     state,
                     None if premise is None else np.asarray(premise))
