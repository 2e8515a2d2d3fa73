"""Langevin particles on the torus with pairwise A+B -> 2B reactions.

Positions live on [0, 2pi)^d.  The integrator is explicit Euler-Maruyama;
a reaction pass flips an A particle to B with probability 1 - exp(-kappa dt)
whenever any B sits within periodic distance r of it, located either through
a uniform cell list or by brute force.  Kernel-smoothed empirical densities
provide the field-level view of the same configuration.
"""

import itertools

import numpy as np

from .mesh import TWO_PI
from .noise import kernel_eval

SPECIES_A = 0
SPECIES_B = 1


class ParticleSystem:
    """Positions, momenta and species labels of particles on the torus.

    Parameters
    ----------
    positions : array_like, shape (n, d) or (n,)
        Particle positions, wrapped into [0, 2pi)^d on construction.
    momenta : array_like, same shape as positions
        Particle momenta.
    species : array_like of int, shape (n,)
        Per-particle labels, SPECIES_A or SPECIES_B.
    """

    def __init__(self, positions, momenta, species):
        pos = np.asarray(positions, dtype=float)
        mom = np.asarray(momenta, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if mom.ndim == 1:
            mom = mom[:, None]
        lab = np.asarray(species)
        if pos.ndim != 2 or mom.shape != pos.shape:
            raise ValueError("positions and momenta must share shape (n, d)")
        if lab.shape != (pos.shape[0],):
            raise ValueError("species must hold one label per particle")
        if not np.all((lab == SPECIES_A) | (lab == SPECIES_B)):
            raise ValueError("species labels must be SPECIES_A or SPECIES_B")
        self.positions = np.mod(pos, TWO_PI)
        self.momenta = mom.copy()
        self.species = lab.astype(np.int64)

    @property
    def n(self):
        return self.positions.shape[0]

    @property
    def dim(self):
        return self.positions.shape[1]

    @property
    def n_a(self):
        return int(np.sum(self.species == SPECIES_A))

    @property
    def n_b(self):
        return int(np.sum(self.species == SPECIES_B))


class ReactionParams:
    """Rate and interaction radius of the A + B -> 2B reaction.

    Parameters
    ----------
    kappa : float
        Reaction rate, nonnegative.
    radius : float
        Interaction radius, in (0, pi) so a ball never wraps onto itself.
    """

    def __init__(self, kappa, radius):
        if kappa < 0:
            raise ValueError("kappa must be nonnegative")
        if not 0.0 < radius < np.pi:
            raise ValueError("radius must lie in (0, pi)")
        self.kappa = float(kappa)
        self.radius = float(radius)


def langevin_step(system, gamma, sigma, potential, dt, stream):
    """Advance all particles by one explicit Euler-Maruyama step.

    The update is dq = p dt, dp = -gamma p dt - grad V(q) dt + sigma dW with
    the position increment using the pre-step momentum and the force taken at
    the pre-step position.  Consumes one stream step when sigma is nonzero.

    Parameters
    ----------
    system : ParticleSystem
    gamma, sigma : float
        Dissipation and noise coefficients.
    potential : object or None
        Provides grad(q) -> (n, d) forces; None means free motion.
    dt : float
        Time step, positive.
    stream : CounterStream
        Source of the Gaussian kicks.

    Returns
    -------
    ParticleSystem
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    q, p = system.positions, system.momenta
    qn = q + dt * p
    pn = p - (gamma * dt) * p
    if potential is not None:
        pn = pn - dt * potential.grad(q)
    if sigma != 0.0:
        pn = pn + (sigma * np.sqrt(dt)) * stream.block(q.shape)
        stream.advance()
    return ParticleSystem(qn, pn, system.species)


def _sq_within(pa, pb, r):
    # both search methods funnel through this exact arithmetic so their
    # predicates agree bit for bit: wrapped componentwise difference,
    # squared norm against r^2
    delta = np.mod(pa - pb + np.pi, TWO_PI) - np.pi
    return np.einsum('...k,...k->...', delta, delta) <= r * r


def _near_any_brute(pos_a, pos_b, r):
    if len(pos_a) == 0 or len(pos_b) == 0:
        return np.zeros(len(pos_a), dtype=bool)
    return _sq_within(pos_a[:, None, :], pos_b[None, :, :], r).any(axis=1)


def _near_any_cell(pos_a, pos_b, r):
    na = len(pos_a)
    flags = np.zeros(na, dtype=bool)
    if na == 0 or len(pos_b) == 0:
        return flags
    d = pos_a.shape[1]
    ncells = max(1, int(TWO_PI // r))
    # keep the cell width strictly above r so one-cell adjacency survives
    # the rounding in the index assignment
    while ncells > 1 and TWO_PI / ncells < r * (1.0 + 1e-12):
        ncells -= 1
    width = TWO_PI / ncells
    radix = ncells ** np.arange(d)
    ca = np.minimum((pos_a // width).astype(np.int64), ncells - 1)
    cb = np.minimum((pos_b // width).astype(np.int64), ncells - 1)
    flat_b = cb @ radix
    order = np.argsort(flat_b, kind="stable")
    sorted_b = flat_b[order]
    for offset in itertools.product((-1, 0, 1), repeat=d):
        # when ncells < 3 some offsets alias the same cell; the duplicate
        # candidates only repeat checks inside the any-reduction
        target = np.mod(ca + offset, ncells) @ radix
        lo = np.searchsorted(sorted_b, target, side="left")
        counts = np.searchsorted(sorted_b, target, side="right") - lo
        total = int(counts.sum())
        if total == 0:
            continue
        rep = np.repeat(np.arange(na), counts)
        pick = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts) \
            + np.repeat(lo, counts)
        hit = _sq_within(pos_a[rep], pos_b[order[pick]], r)
        flags[rep[hit]] = True
    return flags


def react(system, params, dt, stream, method="cell"):
    """Flip A particles that have a B neighbor, each with one Bernoulli draw.

    An A particle flips to B with probability 1 - exp(-kappa dt) when at
    least one B lies within periodic distance radius; multiple B neighbors
    do not stack the rate.  Every particle owns a fixed slot in the current
    stream step's uniform block, so the flip set depends only on
    (seed, tag, step) and is identical for both neighbor-search methods.
    Consumes one stream step.

    Parameters
    ----------
    system : ParticleSystem
    params : ReactionParams
    dt : float
        Length of the reaction window, positive.
    stream : CounterStream
        Source of the per-particle uniforms.
    method : {"cell", "brute"}
        Neighbor search: uniform cell list (cell size >= radius) or the
        O(n_a n_b) pairwise check.

    Returns
    -------
    ParticleSystem
        Same positions and momenta, updated species labels.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if method not in ("cell", "brute"):
        raise ValueError("method must be 'cell' or 'brute'")
    u = stream.uniform_block((system.n,))
    stream.advance()
    a_idx = np.nonzero(system.species == SPECIES_A)[0]
    b_idx = np.nonzero(system.species == SPECIES_B)[0]
    search = _near_any_cell if method == "cell" else _near_any_brute
    near = search(system.positions[a_idx], system.positions[b_idx],
                  params.radius)
    p_flip = -np.expm1(-params.kappa * dt)
    flips = a_idx[near & (u[a_idx] < p_flip)]
    species = system.species.copy()
    species[flips] = SPECIES_B
    return ParticleSystem(system.positions, system.momenta, species)


def empirical_density(system, eps, grid):
    """Kernel-smoothed per-species density and momentum density fields.

    rho[s, i] = N^-1 sum over particles of species s of w_eps(x_i - q_k),
    and j[s, i, :] carries the same sum weighted by the momenta; N is the
    total particle count, so the species densities add up to a unit-mass
    field.  Kernel values below 1e-14 of the peak are cut to exact zero.

    Parameters
    ----------
    system : ParticleSystem
    eps : float
        Kernel width, positive.
    grid : array_like, shape (npts, d) or (npts,)
        Evaluation points.

    Returns
    -------
    rho : ndarray, shape (2, npts)
    j : ndarray, shape (2, npts, d)
        Indexed by species label in the leading axis.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(grid, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[1] != system.dim:
        raise ValueError("grid dimension does not match the particle system")
    npts, d = x.shape
    rho = np.zeros((2, npts))
    j = np.zeros((2, npts, d))
    peak = float(kernel_eval(eps, np.zeros(d) if d > 1 else 0.0, d=d))
    cutoff = 1e-14 * peak
    for label in (SPECIES_A, SPECIES_B):
        members = np.nonzero(system.species == label)[0]
        for base in range(0, len(members), 512):
            sel = members[base:base + 512]
            dx = x[:, None, :] - system.positions[sel][None, :, :]
            w = kernel_eval(eps, dx if d > 1 else dx[..., 0], d=d)
            w[w < cutoff] = 0.0
            rho[label] += w.sum(axis=1)
            j[label] += w @ system.momenta[sel]
    rho /= system.n
    j /= system.n
    return rho, j


def sample_gaussian_species(counts, means, spreads, stream, dim=2):
    """Draw two species populations with wrapped-Gaussian positions.

    Species label i receives counts[i] particles positioned at
    N(means[i], spreads[i]^2 I) wrapped to the torus, with zero momenta.
    Consumes one stream step.

    Parameters
    ----------
    counts : pair of int
        (n_a, n_b), each nonnegative.
    means : pair of array_like, shape (dim,)
    spreads : pair of float
        Standard deviations, nonnegative.
    stream : CounterStream
    dim : int
        Torus dimension.

    Returns
    -------
    ParticleSystem
    """
    counts = [int(c) for c in counts]
    if len(counts) != 2 or min(counts) < 0:
        raise ValueError("counts must be a pair of nonnegative ints")
    n = counts[0] + counts[1]
    z = stream.block((n, dim))
    stream.advance()
    positions = np.empty((n, dim))
    row = 0
    for c, mu, sd in zip(counts, means, spreads):
        positions[row:row + c] = np.asarray(mu, dtype=float) + float(sd) * z[row:row + c]
        row += c
    species = np.repeat([SPECIES_A, SPECIES_B], counts)
    return ParticleSystem(positions, np.zeros((n, dim)), species)
