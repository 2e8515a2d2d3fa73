"""Numerical fluxes, the discrete bilinear form, and the 1D wave-fan oracle.

The spatial operator couples the density and momentum through Godunov fluxes
of the underlying wave system rho_t = -div j, j_t = -kbt*grad rho.  Facet
jumps follow the orientation-free convention [[phi]] = 2{phi n} (vector) and
[[psi]] = 2{psi . n} (scalar), where n is each side's outward normal.  Since
the momentum space is H(div)-conforming, [[psi_h]] = 0 and only the h_j flux
enters the assembled form.
"""

import numpy as np
import scipy.sparse as sp

from .fespace import Quadrature, _eval_scalar, _eval_vector
from .mesh import edge_rule


def numerical_flux(rho_minus, rho_plus, j_minus, j_plus, n, kbt):
    """Godunov flux pair (h_rho, h_j) from one-sided traces.

    `j_minus`, `j_plus`, and the unit normal `n` (pointing minus -> plus)
    carry a trailing spatial axis; scalars broadcast.  h_rho is scalar,
    h_j has the shape of the j traces.  The result is invariant under
    swapping the two sides together with negating n.
    """
    if kbt <= 0:
        raise ValueError("kbt must be positive")
    rho_minus = np.asarray(rho_minus, dtype=float)
    rho_plus = np.asarray(rho_plus, dtype=float)
    j_minus = np.asarray(j_minus, dtype=float)
    j_plus = np.asarray(j_plus, dtype=float)
    n = np.asarray(n, dtype=float)
    c = np.sqrt(kbt)
    jump_j = np.sum((j_minus - j_plus) * n, axis=-1)        # [[j]] = 2{j.n}
    jump_rho = (rho_minus - rho_plus)[..., None] * n        # [[rho]] = 2{rho n}
    h_rho = 0.5 * (rho_minus + rho_plus) + jump_j / (2.0 * c)
    h_j = 0.5 * (j_minus + j_plus) + (c / 2.0) * jump_rho
    return h_rho, h_j


def riemann_solution(rho_minus, rho_plus, j_minus, j_plus, c, x, t):
    """Exact fan of rho_t = -j_x, j_t = -c^2 rho_x with a jump at x = 0.

    The minus state occupies x < 0 initially.  Solving along characteristics
    w_pm = c*rho +- j (advected right/left at speed c) gives, inside the fan
    |x| < c t, the middle state

        rho* = (rho_- + rho_+)/2 + (j_- - j_+)/(2c),
        j*   = (j_- + j_+)/2 + c (rho_- - rho_+)/2,

    and the unmodified one-sided states outside.  Vectorized over x.
    """
    if c <= 0:
        raise ValueError("wave speed c must be positive")
    if t < 0:
        raise ValueError("time must be nonnegative")
    x = np.asarray(x, dtype=float)
    rho_mid = 0.5 * (rho_minus + rho_plus) + (j_minus - j_plus) / (2.0 * c)
    j_mid = 0.5 * (j_minus + j_plus) + 0.5 * c * (rho_minus - rho_plus)
    rho = np.where(x < -c * t, rho_minus, np.where(x > c * t, rho_plus, rho_mid))
    j = np.where(x < -c * t, j_minus, np.where(x > c * t, j_plus, j_mid))
    return rho, j


# -- facet trace tables ------------------------------------------------------

def facet_tables(pair_space, npts):
    """Tabulate both-side facet traces for the scalar and vector bases.

    Returns a dict with
      srho : (nf, 2, nde_rho, nq) scalar basis traces per side,
      sj   : (nf, 2, nde_j, nq) normal components psi . n_facet per side,
      w    : (nf, nq) physical facet weights (sum to the facet measure),
      drho : (nf, 2, nde_rho) global dof gathers,
      dj   : (nf, 2, nde_j),
      x    : (nf, nq, d) physical (wrapped) facet points,
    with sides ordered (minus, plus).
    """
    mesh = pair_space.mesh
    rho, jsp = pair_space.rho, pair_space.j
    if mesh.d == 1:
        tab_r = np.stack([rho.tabulate(np.array([0.0])),
                          rho.tabulate(np.array([1.0]))])   # (2, nde, 1)
        tab_j = np.stack([jsp.tabulate(np.array([0.0])),
                          jsp.tabulate(np.array([1.0]))])
        srho = tab_r[mesh.facet_local]                       # (nf, 2, nde, 1)
        sj = tab_j[mesh.facet_local] * mesh.facet_normals[:, None, None, :1]
        w = np.ones((mesh.nfacet, 1)) * mesh.facet_measures[:, None]
        xf = np.zeros((mesh.nfacet, 1, 1))
        e0 = mesh.facet_elems[:, 0]
        loc0 = mesh.facet_local[:, 0]
        base = mesh.elem_coords[e0, 0, 0]
        dx = mesh.elem_coords[e0, 1, 0] - base
        xf[:, 0, 0] = mesh.wrap(base + loc0 * dx)
    else:
        s, wq = edge_rule(npts)
        nq = npts
        # reference points per (local edge, orientation sign index)
        ref_lut = np.zeros((3, 2, nq, 2))
        for loc in range(3):
            for oi, orient in enumerate((-1, 1)):
                ref_lut[loc, oi] = mesh.facet_reference_points(loc, orient, s)
        srho = np.ones((mesh.nfacet, 2, 1, nq))
        sj = np.zeros((mesh.nfacet, 2, 3, nq))
        opp = mesh.elem_coords
        elen = mesh.facet_measures[mesh.elem_facets]
        scale = (mesh.elem_facet_sign * elen) / (2.0 * mesh.elem_measures[:, None])
        xf = None
        for side in range(2):
            elems = mesh.facet_elems[:, side]
            loc = mesh.facet_local[:, side]
            oi = (mesh.facet_orient[:, side] + 1) // 2
            ref = ref_lut[loc, oi]                           # (nf, nq, 2)
            p0 = mesh.elem_coords[elems, 0]
            e1 = mesh.elem_coords[elems, 1] - p0
            e2 = mesh.elem_coords[elems, 2] - p0
            x = (p0[:, None, :] + ref[:, :, 0, None] * e1[:, None, :]
                 + ref[:, :, 1, None] * e2[:, None, :])      # (nf, nq, 2)
            if side == 0:
                xf = mesh.wrap(x)
            psi = scale[elems][:, :, None, None] * (x[:, None, :, :]
                                                    - opp[elems][:, :, None, :])
            sj[:, side] = np.einsum('nkqd,nd->nkq', psi, mesh.facet_normals)
        w = wq[None, :] * mesh.facet_measures[:, None]
    drho = rho.element_dofs[mesh.facet_elems]                # (nf, 2, nde)
    dj = jsp.element_dofs[mesh.facet_elems]
    # per-side outward factor: +1 where the facet normal leaves that side
    omega = np.stack([mesh.elem_facet_sign[mesh.facet_elems[:, s],
                                           mesh.facet_local[:, s]]
                      for s in range(2)], axis=1).astype(float)
    return {'srho': srho, 'sj': sj, 'w': w, 'drho': drho, 'dj': dj, 'x': xf,
            'omega': omega}


def facet_jump_norm2(space, coeffs, npts=None):
    """Sum over facets of the squared L2 norm of the scalar jump."""
    from .fespace import ScalarSpaceDG
    if not isinstance(space, ScalarSpaceDG):
        raise TypeError("facet_jump_norm2 expects the scalar space")
    ps = _ScalarOnly(space)
    if npts is None:
        npts = space.q + 2
    tabs = facet_tables(ps, npts)
    vals = np.einsum('nsiq,nsi->nsq', tabs['srho'], coeffs[tabs['drho']])
    jump = np.einsum('ns,nsq->nq', tabs['omega'], vals)
    return float(np.sum(tabs['w'] * jump ** 2))


class _ScalarOnly:
    """Adapter so facet_tables can run with just the scalar space."""

    def __init__(self, scalar):
        self.mesh = scalar.mesh
        self.rho = scalar
        self.j = scalar  # same tabulate signature in 1D; unused entries in 2D

    @property
    def q(self):
        return self.rho.q


class DiscreteOperator:
    """Assembled bilinear form: v^T (matrix @ u) = a_h(u, v).

    Rows index test functions, columns trial functions, both in the
    concatenated (rho dofs, j dofs) ordering of the pair space.
    """

    def __init__(self, pair_space, kbt, gamma, matrix):
        self.pair_space = pair_space
        self.kbt = kbt
        self.gamma = gamma
        self.matrix = matrix

    def quadratic(self, u_vec):
        return float(u_vec @ (self.matrix @ u_vec))


def assemble_ah(pair_space, kbt, gamma):
    """Assemble a_h(u, v) = -kbt sum_e int [[phi_v]].h_j(u)
    + kbt (grad phi_v, j_u) - gamma (psi_v, j_u) + kbt (div psi_v, rho_u).

    Facet rules are exact to degree 2q+3 and volume rules to 2q+2, which
    keeps the dissipation identity of the form at round-off level.
    """
    if kbt <= 0:
        raise ValueError("kbt must be positive")
    from .fespace import PairSpace
    if not isinstance(pair_space, PairSpace):
        raise TypeError("assemble_ah expects a PairSpace")
    mesh = pair_space.mesh
    q = pair_space.q
    nr, nj = pair_space.rho.ndof, pair_space.j.ndof
    n = nr + nj

    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(np.asarray(r).ravel())
        cols.append(np.asarray(c).ravel())
        vals.append(np.asarray(v).ravel())

    # volume terms
    vol = Quadrature(mesh, 2 * q + 2)
    grad_r = pair_space.rho.tabulate_grad(vol.ref)      # (ne, ndr, nq, d)
    tab_r = pair_space.rho.tabulate(vol.ref)            # (ndr, nq)
    vals_j = pair_space.j.values(vol)                   # (ne, ndj, nq, d)
    div_j = pair_space.j.divergence(vol)                # (ne, ndj, nq)
    dr = pair_space.rho.element_dofs
    dj = pair_space.j.element_dofs + nr

    b_rj = kbt * np.einsum('eiqd,ekqd,eq->eik', grad_r, vals_j, vol.weights)
    ndr, ndj = dr.shape[1], dj.shape[1]
    add(np.repeat(dr[:, :, None], ndj, 2), np.repeat(dj[:, None, :], ndr, 1), b_rj)

    b_jr = kbt * np.einsum('eiq,kq,eq->eik', div_j, tab_r, vol.weights)
    add(np.repeat(dj[:, :, None], ndr, 2), np.repeat(dr[:, None, :], ndj, 1), b_jr)

    mj = (-gamma) * pair_space.j.mass_matrix().tocoo()
    add(mj.row + nr, mj.col + nr, mj.data)

    # facet terms; [[phi]] carries each side's outward factor omega
    tabs = facet_tables(pair_space, q + 2)
    omega = tabs['omega']
    srho, sj, w = tabs['srho'], tabs['sj'], tabs['w']
    frho = tabs['drho']
    fj = tabs['dj'] + nr

    f_rr = (-0.5 * kbt ** 1.5) * np.einsum(
        'ns,nt,nsiq,ntkq,nq->nsitk', omega, omega, srho, srho, w)
    r_idx = np.broadcast_to(frho[:, :, :, None, None], f_rr.shape)
    c_idx = np.broadcast_to(frho[:, None, None, :, :], f_rr.shape)
    add(r_idx, c_idx, f_rr)

    f_rj = (-0.5 * kbt) * np.einsum('ns,nsiq,ntkq,nq->nsitk', omega, srho, sj, w)
    r_idx = np.broadcast_to(frho[:, :, :, None, None], f_rj.shape)
    c_idx = np.broadcast_to(fj[:, None, None, :, :], f_rj.shape)
    add(r_idx, c_idx, f_rj)

    A = sp.coo_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsr()
    return DiscreteOperator(pair_space, kbt, gamma, A)


def apply_ah_to_smooth(pair_space, z, kbt, gamma):
    """Vector b with b_i = a_h(z, basis_i) for a smooth pair z = (f_rho, f_j).

    For continuous z the flux reduces to the trace of j, so only the
    [[phi_v]] . j_z facet term and the three volume terms survive.  Uses
    elevated quadrature suitable for smooth data.
    """
    mesh = pair_space.mesh
    q = pair_space.q
    f_rho, f_j = z
    nr, nj = pair_space.rho.ndof, pair_space.j.ndof
    b = np.zeros(nr + nj)

    vol = Quadrature(mesh, 2 * q + 6 if mesh.d == 1 else 6)
    grad_r = pair_space.rho.tabulate_grad(vol.ref)
    vals_j = pair_space.j.values(vol)
    div_j = pair_space.j.divergence(vol)
    rho_z = _eval_scalar(f_rho, vol.points)
    j_z = _eval_vector(f_j, vol.points, mesh.d)

    contrib = kbt * np.einsum('eiqd,eq,eqd->ei', grad_r, vol.weights, j_z)
    np.add.at(b, pair_space.rho.element_dofs, contrib)
    contrib = (kbt * np.einsum('eiq,eq,eq->ei', div_j, vol.weights, rho_z)
               - gamma * np.einsum('eiqd,eq,eqd->ei', vals_j, vol.weights, j_z))
    np.add.at(b, pair_space.j.element_dofs + nr, contrib)

    tabs = facet_tables(pair_space, q + 4)
    jz_f = _eval_vector(f_j, tabs['x'], mesh.d)          # (nf, nq, d)
    jz_n = np.einsum('nqd,nd->nq', jz_f, mesh.facet_normals)
    contrib = -kbt * np.einsum('ns,nsiq,nq,nq->nsi', tabs['omega'],
                               tabs['srho'], tabs['w'], jz_n)
    np.add.at(b, tabs['drho'], contrib)
    return b
