"""Finite element spaces for the density/momentum pair on periodic meshes.

The density lives in DG(q): element-wise Lagrange polynomials with no
inter-element continuity.  The momentum lives in an H(div)-conforming space:
continuous Lagrange of degree q+1 on the interval (H(div) = H^1 in 1D), and
lowest-order Raviart-Thomas on triangles in 2D (three edge dofs per triangle,
one shared dof per mesh edge equal to the normal flux with respect to the
fixed global edge normal).

Tabulations are stored per element as dense arrays; meshes here are uniform
and small enough that this is both simple and fast.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import TWO_PI, edge_rule

# Symmetric triangle rules on the reference triangle (0,0)-(1,0)-(0,1);
# barycentric-style points, weights summing to 1 (multiply by element area).
_TRI_RULES = {}


def _tri_rule(degree):
    if degree <= 1:
        return np.array([[1 / 3, 1 / 3]]), np.array([1.0])
    if degree == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        return pts, np.full(3, 1 / 3)
    if degree <= 4:
        a, b = 0.445948490915965, 0.091576213509771
        wa, wb = 0.223381589678011, 0.109951743655322
        pts = np.array([[a, a], [1 - 2 * a, a], [a, 1 - 2 * a],
                        [b, b], [1 - 2 * b, b], [b, 1 - 2 * b]])
        return pts, np.array([wa, wa, wa, wb, wb, wb])
    if degree == 5:
        a, wa = 0.470142064105115, 0.132394152788506
        b, wb = 0.101286507323456, 0.125939180544827
        pts = np.array([[1 / 3, 1 / 3],
                        [a, a], [1 - 2 * a, a], [a, 1 - 2 * a],
                        [b, b], [1 - 2 * b, b], [b, 1 - 2 * b]])
        return pts, np.array([0.225, wa, wa, wa, wb, wb, wb])
    # Dunavant degree-6, 12 points
    a, wa = 0.063089014491502, 0.050844906370207
    b, wb = 0.249286745170910, 0.116786275726379
    c, d, wc = 0.310352451033785, 0.053145049844816, 0.082851075618374
    e = 1 - c - d
    pts = np.array([[a, a], [1 - 2 * a, a], [a, 1 - 2 * a],
                    [b, b], [1 - 2 * b, b], [b, 1 - 2 * b],
                    [c, d], [d, c], [e, c], [c, e], [d, e], [e, d]])
    w = np.array([wa] * 3 + [wb] * 3 + [wc] * 6)
    return pts, w


def triangle_rule(degree):
    if degree not in _TRI_RULES:
        _TRI_RULES[degree] = _tri_rule(degree)
    return _TRI_RULES[degree]


class Quadrature:
    """Volume quadrature over all elements of a mesh, exact to `degree`.

    Attributes: ref (nq, d) reference points, points (nelem, nq, d) physical
    points in each element's chart, weights (nelem, nq) physical weights.
    """

    def __init__(self, mesh, degree):
        self.mesh = mesh
        if mesh.d == 1:
            npts = degree // 2 + 1
            s, w = edge_rule(npts)
            self.ref = s[:, None]
            wref = w
        else:
            self.ref, wref = triangle_rule(degree)
        nq = len(wref)
        self.nq = nq
        p0 = mesh.elem_coords[:, 0]
        if mesh.d == 1:
            dx = mesh.elem_coords[:, 1] - p0
            self.points = p0[:, None, :] + self.ref[None, :, :] * dx[:, None, :]
            scale = mesh.elem_measures
        else:
            e1 = mesh.elem_coords[:, 1] - p0
            e2 = mesh.elem_coords[:, 2] - p0
            self.points = (p0[:, None, :]
                           + self.ref[None, :, 0, None] * e1[:, None, :]
                           + self.ref[None, :, 1, None] * e2[:, None, :])
            scale = mesh.elem_measures  # reference weights already sum to 1
        self.weights = wref[None, :] * scale[:, None]


def _lagrange_matrix(nodes, pts, deriv=0):
    """Values (or derivatives) of the Lagrange basis on `nodes` at `pts`."""
    k = len(nodes)
    V = np.vander(nodes, k, increasing=True)
    C = np.linalg.inv(V)  # column j = monomial coeffs of basis j? rows/cols:
    # V @ C = I, so C[:, j] are coefficients of the basis dual to node j.
    P = np.vander(pts, k, increasing=True)
    if deriv:
        D = np.zeros((k, k))
        for m in range(1, k):
            D[m - 1, m] = m
        C = D @ C
    return (P @ C).T  # (k basis, npts)


class ScalarSpaceDG:
    """Discontinuous Lagrange space of element-wise degree q."""

    def __init__(self, mesh, q):
        if q < 0:
            raise ValueError("polynomial order q must be >= 0")
        if mesh.d == 2 and q != 0:
            raise NotImplementedError("2D scalar space is implemented at q=0 only")
        if mesh.d == 1 and q > 2:
            raise NotImplementedError("1D scalar space supports q <= 2")
        self.mesh = mesh
        self.q = q
        if mesh.d == 1:
            self.ref_nodes = np.array([0.5]) if q == 0 else np.linspace(0.0, 1.0, q + 1)
            self.ndofs_el = q + 1
        else:
            self.ref_nodes = np.array([[1 / 3, 1 / 3]])
            self.ndofs_el = 1
        self.ndof = mesh.nelem * self.ndofs_el
        self.element_dofs = (np.arange(mesh.nelem)[:, None] * self.ndofs_el
                             + np.arange(self.ndofs_el)[None, :])
        self._mass = None
        self._mass_vec = None

    def tabulate(self, ref):
        """Basis values at reference points, (ndofs_el, npts)."""
        if self.mesh.d == 1:
            return _lagrange_matrix(self.ref_nodes, np.asarray(ref).reshape(-1))
        return np.ones((1, np.asarray(ref).reshape(-1, 2).shape[0]))

    def tabulate_grad(self, ref):
        """Physical basis gradients, (nelem, ndofs_el, npts, d)."""
        m = self.mesh
        npts = np.asarray(ref).reshape(-1, m.d).shape[0]
        if m.d == 2:
            return np.zeros((m.nelem, 1, npts, 2))
        dref = _lagrange_matrix(self.ref_nodes, np.asarray(ref).reshape(-1), deriv=1)
        inv_h = 1.0 / self.mesh.elem_measures
        return (dref[None, :, :] * inv_h[:, None, None])[:, :, :, None]

    def mass_matrix(self):
        if self._mass is None:
            quad = Quadrature(self.mesh, 2 * self.q + 2)
            tab = self.tabulate(quad.ref)
            blocks = np.einsum('iq,kq,eq->eik', tab, tab, quad.weights)
            rows = np.repeat(self.element_dofs[:, :, None], self.ndofs_el, axis=2)
            cols = np.repeat(self.element_dofs[:, None, :], self.ndofs_el, axis=1)
            self._mass = sp.csr_matrix(
                (blocks.ravel(), (rows.ravel(), cols.ravel())),
                shape=(self.ndof, self.ndof))
        return self._mass

    def mass_vector(self):
        """Integrals of the basis functions (the total-mass functional)."""
        if self._mass_vec is None:
            quad = Quadrature(self.mesh, 2 * self.q + 2)
            tab = self.tabulate(quad.ref)
            contrib = np.einsum('iq,eq->ei', tab, quad.weights)
            vec = np.zeros(self.ndof)
            np.add.at(vec, self.element_dofs, contrib)
            self._mass_vec = vec
        return self._mass_vec


class VectorSpaceHdiv:
    """H(div)-conforming momentum space.

    1D: continuous Lagrange of degree q+1 on the periodic interval.
    2D: lowest-order Raviart-Thomas on triangles (q = 0 only); the dof on a
    mesh edge is the constant normal component with respect to the global
    edge normal, which makes normal traces continuous by construction.
    """

    def __init__(self, mesh, q):
        if mesh.d == 2 and q != 0:
            raise NotImplementedError("2D vector space is lowest-order RT only")
        if mesh.d == 1 and q > 2:
            raise NotImplementedError("1D vector space supports q <= 2")
        self.mesh = mesh
        self.q = q
        if mesh.d == 1:
            p = q + 1
            self.degree = p
            self.ref_nodes = np.linspace(0.0, 1.0, p + 1)
            self.ndofs_el = p + 1
            self.ndof = mesh.nelem * p
            base = np.arange(mesh.nelem)[:, None] * p + np.arange(p + 1)[None, :]
            self.element_dofs = base % self.ndof
        else:
            self.ndofs_el = 3
            self.ndof = mesh.nfacet
            self.element_dofs = mesh.elem_facets.copy()
        self._mass = None

    # -- Raviart-Thomas geometry ------------------------------------------

    def _rt_data(self):
        """Per-element opposite vertices, signed scale s = sign*|e|/(2|K|)."""
        m = self.mesh
        opp = m.elem_coords  # (nelem, 3, 2): vertex k is opposite local edge k
        elen = m.facet_measures[m.elem_facets]           # (nelem, 3)
        scale = (m.elem_facet_sign * elen) / (2.0 * m.elem_measures[:, None])
        return opp, scale

    def tabulate(self, ref):
        """Basis values at reference points.

        1D: (ndofs_el, npts) scalar values shared by all elements.
        2D: (nelem, 3, npts, 2) physical vector values.
        """
        m = self.mesh
        if m.d == 1:
            return _lagrange_matrix(self.ref_nodes, np.asarray(ref).reshape(-1))
        ref = np.asarray(ref).reshape(-1, 2)
        # physical points per element for these reference points
        p0 = m.elem_coords[:, 0]
        e1 = m.elem_coords[:, 1] - p0
        e2 = m.elem_coords[:, 2] - p0
        x = (p0[:, None, :] + ref[None, :, 0, None] * e1[:, None, :]
             + ref[None, :, 1, None] * e2[:, None, :])  # (nelem, npts, 2)
        opp, scale = self._rt_data()
        diff = x[:, None, :, :] - opp[:, :, None, :]     # (nelem, 3, npts, 2)
        return scale[:, :, None, None] * diff

    def tabulate_div(self, npts):
        """Divergence values, (nelem, ndofs_el, npts)."""
        m = self.mesh
        if m.d == 1:
            raise RuntimeError("use tabulate_deriv for 1D")
        _, scale = self._rt_data()
        return np.repeat((2.0 * scale)[:, :, None], npts, axis=2)

    def tabulate_deriv(self, ref):
        """1D derivative values, (nelem, ndofs_el, npts)."""
        dref = _lagrange_matrix(self.ref_nodes, np.asarray(ref).reshape(-1), deriv=1)
        inv_h = 1.0 / self.mesh.elem_measures
        return dref[None, :, :] * inv_h[:, None, None]

    def divergence(self, quad):
        """Divergence tabulation at a volume quadrature, (nelem, nde, nq)."""
        if self.mesh.d == 1:
            return self.tabulate_deriv(quad.ref)
        return self.tabulate_div(quad.nq)

    def values(self, quad):
        """Vector values at a volume quadrature, (nelem, nde, nq, d)."""
        if self.mesh.d == 1:
            tab = self.tabulate(quad.ref)
            return np.broadcast_to(tab[None, :, :, None],
                                   (self.mesh.nelem, self.ndofs_el, quad.nq, 1))
        return self.tabulate(quad.ref)

    def mass_matrix(self):
        if self._mass is None:
            quad = Quadrature(self.mesh, 2 * self.q + 2)
            vals = self.values(quad)
            blocks = np.einsum('eiqd,ekqd,eq->eik', vals, vals, quad.weights)
            nde = self.ndofs_el
            rows = np.repeat(self.element_dofs[:, :, None], nde, axis=2)
            cols = np.repeat(self.element_dofs[:, None, :], nde, axis=1)
            self._mass = sp.csr_matrix(
                (blocks.ravel(), (rows.ravel(), cols.ravel())),
                shape=(self.ndof, self.ndof))
        return self._mass


class Field:
    """Coefficient vector over a finite element space."""

    def __init__(self, space, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.ndof,):
            raise ValueError(f"expected {space.ndof} coefficients, got {coeffs.shape}")
        self.space = space
        self.coeffs = coeffs

    def copy(self):
        return Field(self.space, self.coeffs.copy())

    def _locate(self, x):
        m = self.space.mesh
        x = m.wrap(np.asarray(x, dtype=float).reshape(-1, m.d))
        if m.d == 1:
            n = m.shape[0]
            h = TWO_PI / n
            e = np.minimum((x[:, 0] // h).astype(int), n - 1)
            ref = (x[:, 0] - e * h) / h
            return e, ref[:, None]
        nx, ny = m.shape
        hx, hy = TWO_PI / nx, TWO_PI / ny
        i = np.minimum((x[:, 0] // hx).astype(int), nx - 1)
        j = np.minimum((x[:, 1] // hy).astype(int), ny - 1)
        fx = (x[:, 0] - i * hx) / hx
        fy = (x[:, 1] - j * hy) / hy
        lower = fy <= fx
        e = 2 * (j * nx + i) + (~lower).astype(int)
        # reference coords: L has chart (p1-p0, p2-p0) = ((hx,0),(hx,hy)),
        # U has chart ((hx,hy),(0,hy)); invert per type
        rx = np.where(lower, fx - fy, fx)
        ry = np.where(lower, fy, fy - fx)
        return e, np.stack([rx, ry], axis=1)

    def evaluate(self, x):
        """Pointwise evaluation at physical points (npts, d) on the torus.

        Scalar spaces return (npts,), vector spaces (npts, d).
        """
        space = self.space
        m = space.mesh
        e, ref = self._locate(x)
        if isinstance(space, ScalarSpaceDG):
            if m.d == 1:
                tabs = _lagrange_matrix(space.ref_nodes, ref[:, 0])  # (nde, npts)
                vals = self.coeffs[space.element_dofs[e]]            # (npts, nde)
                return np.einsum('pi,ip->p', vals, tabs)
            return self.coeffs[space.element_dofs[e][:, 0]]
        if m.d == 1:
            tabs = _lagrange_matrix(space.ref_nodes, ref[:, 0])
            vals = self.coeffs[space.element_dofs[e]]
            return np.einsum('pi,ip->p', vals, tabs)[:, None]
        opp, scale = space._rt_data()
        p0 = m.elem_coords[e, 0]
        e1 = m.elem_coords[e, 1] - p0
        e2 = m.elem_coords[e, 2] - p0
        xx = p0 + ref[:, :1] * e1 + ref[:, 1:] * e2
        diff = xx[:, None, :] - opp[e]                    # (npts, 3, 2)
        psi = scale[e][:, :, None] * diff                 # (npts, 3, 2)
        return np.einsum('pi,pid->pd', self.coeffs[space.element_dofs[e]], psi)


class PairSpace:
    """The mixed space DG(q) x H(div) for one mesh."""

    def __init__(self, mesh, q):
        self.mesh = mesh
        self.q = q
        self.rho = ScalarSpaceDG(mesh, q)
        self.j = VectorSpaceHdiv(mesh, q)
        self.ndof = self.rho.ndof + self.j.ndof

    def zero_pair(self):
        return StatePair(Field(self.rho, np.zeros(self.rho.ndof)),
                         Field(self.j, np.zeros(self.j.ndof)))

    def pair_from_vector(self, vec):
        nr = self.rho.ndof
        return StatePair(Field(self.rho, vec[:nr].copy()),
                         Field(self.j, vec[nr:].copy()))


class StatePair:
    """Solution pair (rho_h, j_h) over one mesh."""

    def __init__(self, rho, j):
        if rho.space.mesh is not j.space.mesh:
            raise ValueError("state pair fields must share one mesh")
        self.rho = rho
        self.j = j

    def vector(self):
        return np.concatenate([self.rho.coeffs, self.j.coeffs])

    def copy(self):
        return StatePair(self.rho.copy(), self.j.copy())


# -- operations ------------------------------------------------------------

def interpolate(space, f):
    """Canonical interpolation of a pointwise-evaluable function.

    Scalar spaces and the 1D momentum space use nodal evaluation (DG nodes in
    the element's own chart, so one-sided limits at element boundaries are
    respected); Raviart-Thomas uses mean normal-component moments per edge.
    """
    m = space.mesh
    if isinstance(space, ScalarSpaceDG) or m.d == 1:
        if isinstance(space, ScalarSpaceDG):
            if m.d == 1:
                left = m.elem_coords[:, 0, 0]
                dx = m.elem_coords[:, 1, 0] - left
                nodes = left[:, None] + space.ref_nodes[None, :] * dx[:, None]
                vals = np.asarray(f(nodes))
            else:
                cent = m.elem_coords.mean(axis=1)
                vals = np.asarray(f(cent[:, 0], cent[:, 1])).reshape(-1, 1)
            coeffs = np.zeros(space.ndof)
            coeffs[space.element_dofs] = vals
        else:
            n = m.shape[0]
            p = space.degree
            xg = (TWO_PI / (n * p)) * np.arange(n * p)
            vals = np.asarray(f(xg))
            vals = vals[:, 0] if vals.ndim == 2 else vals
            coeffs = vals
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("interpolation data contains non-finite values")
        return Field(space, coeffs)
    # RT edge moments: mean of f . n over each edge
    s, w = edge_rule(space.q + 3)
    coeffs = np.zeros(space.ndof)
    for fct in range(m.nfacet):
        e, loc = m.facet_elems[fct, 0], m.facet_local[fct, 0]
        ref = m.facet_reference_points(loc, m.facet_orient[fct, 0], s)
        pts = m.wrap(m.reference_to_physical(e, ref))
        vals = np.asarray(f(pts[:, 0], pts[:, 1]))  # (npts, 2)
        coeffs[fct] = np.dot(w, vals @ m.facet_normals[fct])
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("interpolation data contains non-finite values")
    return Field(space, coeffs)


def total_mass(field):
    """Exact integral of a scalar field over the torus."""
    if not isinstance(field.space, ScalarSpaceDG):
        raise TypeError("total_mass expects a scalar field")
    return float(np.dot(field.space.mass_vector(), field.coeffs))


def mass_correct(field, m):
    """Shift a scalar field by a constant so that its integral equals m."""
    vol = TWO_PI ** field.space.mesh.d
    shift = (m - total_mass(field)) / vol
    return Field(field.space, field.coeffs + shift * _constant_coeffs(field.space))


def _constant_coeffs(space):
    # nodal Lagrange bases represent the constant 1 by all-ones coefficients
    return np.ones(space.ndof)


def weighted_inner(u, v, kbt):
    """The weighted inner product kbt*(rho_u, rho_v) + (j_u, j_v)."""
    if kbt <= 0:
        raise ValueError("kbt must be positive")
    mr = u.rho.space.mass_matrix()
    mj = u.j.space.mass_matrix()
    return (kbt * float(u.rho.coeffs @ (mr @ v.rho.coeffs))
            + float(u.j.coeffs @ (mj @ v.j.coeffs)))


def jump_average(field, facet, npts=None):
    """Facet traces: (average, jump) at facet quadrature nodes.

    Scalar fields: average (nq,), jump (nq, d) = (minus - plus) * n_minus.
    Vector fields: average (nq, d), jump (nq,) = psi_minus.n_minus + psi_plus.n_plus.
    Both are invariant under swapping the minus/plus labeling.
    """
    space = field.space
    m = space.mesh
    q = space.q
    if npts is None:
        npts = q + 2
    s, _ = edge_rule(npts)
    if m.d == 1:
        s = np.array([0.0])  # facet is a point; parameter unused
    traces = []
    for side in (0, 1):
        e, loc = m.facet_elems[facet, side], m.facet_local[facet, side]
        orient = m.facet_orient[facet, side]
        ref = m.facet_reference_points(loc, orient, s)
        if isinstance(space, ScalarSpaceDG):
            tab = space.tabulate(ref if m.d == 2 else ref[:, 0])
            traces.append(field.coeffs[space.element_dofs[e]] @ tab)
        elif m.d == 1:
            tab = space.tabulate(ref[:, 0])
            traces.append((field.coeffs[space.element_dofs[e]] @ tab)[:, None])
        else:
            opp, scale = space._rt_data()
            pts = m.reference_to_physical(e, ref)
            psi = scale[e][:, None, None] * (pts[None, :, :] - opp[e][:, None, :])
            traces.append(np.einsum('i,ind->nd', field.coeffs[space.element_dofs[e]], psi))
    n = m.facet_normals[facet]
    # each side enters with its outward factor, so the jump is invariant
    # under relabeling which side is minus
    om = [m.elem_facet_sign[m.facet_elems[facet, s], m.facet_local[facet, s]]
          for s in (0, 1)]
    if isinstance(space, ScalarSpaceDG):
        avg = 0.5 * (traces[0] + traces[1])
        jump = (om[0] * traces[0] + om[1] * traces[1])[:, None] * n[None, :]
        return avg, jump
    avg = 0.5 * (traces[0] + traces[1])
    jump = (om[0] * traces[0] + om[1] * traces[1]) @ n
    return avg, jump


def l2_project(pair_space, z):
    """Projection onto the pair space in the weighted inner product.

    Because the weighted product is block diagonal, the result coincides with
    the component-wise L2 projection and is independent of kbt.  `z` is a
    pair (f_rho, f_j) of pointwise-evaluable functions.
    """
    f_rho, f_j = z
    rho = _l2_project_scalar(pair_space.rho, f_rho)
    j = _l2_project_vector(pair_space.j, f_j)
    return StatePair(rho, j)


def _projection_quadrature(mesh, q):
    return Quadrature(mesh, min(2 * q + 6, 6) if mesh.d == 2 else 2 * q + 6)


def _eval_scalar(f, pts):
    if pts.shape[-1] == 1:
        return np.asarray(f(pts[..., 0]))
    return np.asarray(f(pts[..., 0], pts[..., 1]))


def _eval_vector(f, pts, d):
    if d == 1:
        out = np.asarray(f(pts[..., 0]))
        if out.ndim == pts.ndim - 1:
            out = out[..., None]
        return out
    return np.asarray(f(pts[..., 0], pts[..., 1]))


def _l2_project_scalar(space, f):
    quad = _projection_quadrature(space.mesh, space.q)
    tab = space.tabulate(quad.ref)
    fv = _eval_scalar(f, quad.points)
    contrib = np.einsum('iq,eq,eq->ei', tab, quad.weights, fv)
    b = np.zeros(space.ndof)
    np.add.at(b, space.element_dofs, contrib)
    c = spla.spsolve(space.mass_matrix().tocsc(), b)
    return Field(space, c)


def _l2_project_vector(space, f):
    quad = _projection_quadrature(space.mesh, space.q)
    vals = space.values(quad)
    fv = _eval_vector(f, quad.points, space.mesh.d)
    contrib = np.einsum('eiqd,eq,eqd->ei', vals, quad.weights, fv)
    b = np.zeros(space.ndof)
    np.add.at(b, space.element_dofs, contrib)
    c = spla.spsolve(space.mass_matrix().tocsc(), b)
    return Field(space, c)


def ritz_project(pair_space, z, kbt, gamma):
    """Projection through the discrete bilinear form with pinned mass.

    Solves a_h(R z, v_h) = a_h(z, v_h) for all v_h, with the one-dimensional
    kernel (constant density) removed by a single Lagrange multiplier that
    pins total_mass(R z) to the mass of z.  Requires gamma > 0: the quadratic
    identity then forces j = 0 and a continuous, constant density on the
    kernel, so the single mass constraint closes the system.
    """
    if gamma <= 0:
        raise ValueError("ritz projection needs gamma > 0")
    from .forms import assemble_ah, apply_ah_to_smooth
    A = assemble_ah(pair_space, kbt, gamma).matrix
    mvec = np.concatenate([pair_space.rho.mass_vector(), np.zeros(pair_space.j.ndof)])
    if isinstance(z, StatePair):
        # discrete input: the assembled action gives a_h(z, basis) exactly,
        # including the rho-jump flux terms a smooth path would drop
        b = A @ z.vector()
        mass_z = total_mass(z.rho)
    else:
        b = apply_ah_to_smooth(pair_space, z, kbt, gamma)
        f_rho, _ = z
        quad = _projection_quadrature(pair_space.mesh, pair_space.q)
        mass_z = float(np.sum(quad.weights * _eval_scalar(f_rho, quad.points)))
    n = pair_space.ndof
    K = sp.bmat([[A, mvec[:, None]], [mvec[None, :], None]], format='csc')
    rhs = np.concatenate([b, [mass_z]])
    lu = spla.splu(K)
    sol = lu.solve(rhs)
    res = np.linalg.norm(K @ sol - rhs)
    if not np.isfinite(res) or res > 1e-8 * max(1.0, np.linalg.norm(rhs)):
        raise RuntimeError(f"ritz projection solve failed, residual {res:.3e}")
    return pair_space.pair_from_vector(sol[:n])
