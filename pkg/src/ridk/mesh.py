"""Periodic meshes of the torus [0, 2*pi]^d with oriented facet connectivity.

Two mesh families are provided: uniform partitions of the periodic interval
(d=1) and uniform right-triangle splits of a structured nx-by-ny grid on the
periodic square (d=2).  Every facet stores its two adjacent elements (the
"minus" element is the one with the lower element index), the unit normal
oriented from minus to plus, and the facet measure.  Periodicity closes the
boundary, so every facet has exactly two sides.

Element vertex coordinates are stored unwrapped per element: an element
touching the periodic seam uses coordinates beyond 2*pi so that each element
is an honest simplex in R^d.  Wrapped coordinates are only produced when a
physical point on the torus is requested.
"""

import numpy as np

TWO_PI = 2.0 * np.pi

# Reference simplices: [0,1] in 1D, triangle (0,0)-(1,0)-(0,1) in 2D.
_REF_TRI = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def edge_rule(order):
    """Gauss-Legendre rule with `order` points on [0,1].

    Exact for polynomials of degree <= 2*order - 1; weights sum to 1.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    s, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (s + 1.0), 0.5 * w


class Mesh:
    """Periodic simplicial mesh of the torus.

    Attributes
    ----------
    d : int
        Spatial dimension, 1 or 2.
    nelem, nfacet : int
        Element and facet counts.
    elem_coords : (nelem, d+1, d) float
        Per-element vertex coordinates, unwrapped per element.
    elem_measures : (nelem,) float
        Element length (d=1) or area (d=2).
    facet_elems : (nfacet, 2) int
        Adjacent elements, column 0 = minus side, column 1 = plus side.
    facet_local : (nfacet, 2) int
        Local facet index of the facet within each adjacent element
        (facet k of a simplex is the one opposite local vertex k).
    facet_orient : (nfacet, 2) int
        +1 if the element's local edge parametrization runs with the
        facet's global parametrization, -1 otherwise (all +1 in 1D).
    facet_normals : (nfacet, d) float
        Unit normal oriented minus -> plus (outward from the minus element).
    facet_measures : (nfacet,) float
        1.0 for point facets (d=1), edge length for d=2.
    elem_facets : (nelem, d+1) int
        Global facet index of each element's local facets.
    elem_facet_sign : (nelem, d+1) int
        +1 where the global facet normal is this element's outward normal.
    h : float
        Mesh width, the maximum element diameter.
    """

    def __init__(self, d, elem_coords, facet_elems, facet_local, facet_orient,
                 facet_normals, facet_measures, shape, h=None):
        self.d = d
        self.shape = shape  # (n,) or (nx, ny) of the generating grid
        self.elem_coords = np.asarray(elem_coords, dtype=float)
        self.nelem = self.elem_coords.shape[0]
        self.facet_elems = np.asarray(facet_elems, dtype=int)
        self.facet_local = np.asarray(facet_local, dtype=int)
        self.facet_orient = np.asarray(facet_orient, dtype=int)
        self.facet_normals = np.asarray(facet_normals, dtype=float)
        self.facet_measures = np.asarray(facet_measures, dtype=float)
        self.nfacet = self.facet_elems.shape[0]

        if d == 1:
            a = self.elem_coords[:, 0, 0]
            b = self.elem_coords[:, 1, 0]
            self.elem_measures = b - a
            diam = self.elem_measures
        else:
            p = self.elem_coords
            e1 = p[:, 1] - p[:, 0]
            e2 = p[:, 2] - p[:, 0]
            self.elem_measures = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
            sides = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
            diam = np.linalg.norm(sides, axis=2).max(axis=0)
        # uniform refinement must halve h exactly, so builders pass the
        # analytic width instead of the round-off-afflicted coordinate max
        self.h = float(diam.max()) if h is None else float(h)

        # elem_facet_sign is geometric (is the facet normal outward of this
        # element?) so that it is independent of which side is labeled minus
        self.elem_facets = np.full((self.nelem, d + 1), -1, dtype=int)
        self.elem_facet_sign = np.zeros((self.nelem, d + 1), dtype=int)
        for f in range(self.nfacet):
            for side in (0, 1):
                e, loc = self.facet_elems[f, side], self.facet_local[f, side]
                self.elem_facets[e, loc] = f
                if d == 1:
                    outward = 1.0 if loc == 1 else -1.0
                    dot = self.facet_normals[f, 0] * outward
                else:
                    p = self.elem_coords[e]
                    mid = 0.5 * (p[(loc + 1) % 3] + p[(loc + 2) % 3])
                    dot = np.dot(self.facet_normals[f], mid - p[loc])
                self.elem_facet_sign[e, loc] = 1 if dot > 0 else -1

    # -- geometry helpers -------------------------------------------------

    def reference_to_physical(self, elem, ref):
        """Map reference coordinates (m, d) to element-chart physical points."""
        p = self.elem_coords[elem]
        if self.d == 1:
            return p[0] + ref * (p[1] - p[0])
        return p[0] + ref[:, :1] * (p[1] - p[0]) + ref[:, 1:] * (p[2] - p[0])

    def facet_reference_points(self, local, orient, s):
        """Element reference coordinates of facet points at global parameter s."""
        if self.d == 1:
            return np.full((len(np.atleast_1d(s)), 1), float(local))
        sp = s if orient == 1 else 1.0 - s
        a = _REF_TRI[(local + 1) % 3]
        b = _REF_TRI[(local + 2) % 3]
        return a[None, :] + sp[:, None] * (b - a)[None, :]

    def wrap(self, x):
        """Wrap points onto [0, 2*pi)^d."""
        return np.mod(x, TWO_PI)


def build_interval(n):
    """Uniform periodic partition of [0, 2*pi] into n elements.

    Facet f sits at the vertex 2*pi*f/n.  The minus element is the one with
    the lower index; at the periodic seam (facet 0) that is element 0, whose
    outward normal there points in the -x direction.
    """
    if n < 1:
        raise ValueError("build_interval requires n >= 1")
    h = TWO_PI / n
    coords = np.zeros((n, 2, 1))
    coords[:, 0, 0] = h * np.arange(n)
    coords[:, 1, 0] = h * (np.arange(n) + 1)

    facet_elems = np.zeros((n, 2), dtype=int)
    facet_local = np.zeros((n, 2), dtype=int)
    normals = np.zeros((n, 1))
    for f in range(n):
        left = (f - 1) % n   # element with the facet at its right end
        right = f % n        # element with the facet at its left end
        if right <= left:
            # periodic seam (and the degenerate n=1 mesh): minus on the right
            facet_elems[f] = (right, left)
            facet_local[f] = (0, 1)
            normals[f, 0] = -1.0
        else:
            facet_elems[f] = (left, right)
            facet_local[f] = (1, 0)
            normals[f, 0] = 1.0
    return Mesh(1, coords, facet_elems, facet_local,
                np.ones((n, 2), dtype=int), normals, np.ones(n), (n,), h=h)


def build_torus2d(nx, ny):
    """Uniform right-triangle mesh of the periodic square, 2*nx*ny elements.

    Each grid cell (i, j) is split along the diagonal from its lower-left to
    its upper-right corner into a lower triangle L (below the diagonal) and an
    upper triangle U.  Element indices: L(i,j) = 2*(j*nx+i), U(i,j) = that + 1.
    """
    if nx < 2 or ny < 2:
        raise ValueError("build_torus2d requires nx, ny >= 2")
    hx, hy = TWO_PI / nx, TWO_PI / ny
    ncell = nx * ny
    nelem = 2 * ncell
    coords = np.zeros((nelem, 3, 2))
    # (elem, local_edge) -> (global edge id, orientation); edges per cell:
    # H(i,j) bottom horizontal, V(i,j) left vertical, D(i,j) diagonal.
    edge_of = np.zeros((nelem, 3), dtype=int)
    orient_of = np.zeros((nelem, 3), dtype=int)

    def H(i, j):
        return (j % ny) * nx + (i % nx)

    def V(i, j):
        return ncell + (j % ny) * nx + (i % nx)

    def D(i, j):
        return 2 * ncell + (j % ny) * nx + (i % nx)

    for j in range(ny):
        for i in range(nx):
            x0, y0 = i * hx, j * hy
            lo = 2 * (j * nx + i)
            up = lo + 1
            coords[lo] = [(x0, y0), (x0 + hx, y0), (x0 + hx, y0 + hy)]
            coords[up] = [(x0, y0), (x0 + hx, y0 + hy), (x0, y0 + hy)]
            # local edge k joins vertices (k+1)%3 -> (k+2)%3
            edge_of[lo] = (V(i + 1, j), D(i, j), H(i, j))
            orient_of[lo] = (1, -1, 1)
            edge_of[up] = (H(i, j + 1), V(i, j), D(i, j))
            orient_of[up] = (-1, -1, 1)

    nfacet = 3 * ncell
    sides = [[] for _ in range(nfacet)]
    for e in range(nelem):
        for k in range(3):
            sides[edge_of[e, k]].append((e, k, orient_of[e, k]))

    facet_elems = np.zeros((nfacet, 2), dtype=int)
    facet_local = np.zeros((nfacet, 2), dtype=int)
    facet_orient = np.zeros((nfacet, 2), dtype=int)
    normals = np.zeros((nfacet, 2))
    measures = np.zeros(nfacet)
    for f, pair in enumerate(sides):
        assert len(pair) == 2, "torus mesh must close every edge"
        pair.sort(key=lambda t: t[0])
        (em, km, om), (ep, kp, op) = pair
        facet_elems[f] = (em, ep)
        facet_local[f] = (km, kp)
        facet_orient[f] = (om, op)
        p = coords[em]
        a, b = p[(km + 1) % 3], p[(km + 2) % 3]
        t = b - a
        length = np.hypot(t[0], t[1])
        nvec = np.array([t[1], -t[0]]) / length
        if np.dot(nvec, p[km] - a) > 0:  # outward points away from vertex km
            nvec = -nvec
        normals[f] = nvec
        measures[f] = length
    return Mesh(2, coords, facet_elems, facet_local, facet_orient,
                normals, measures, (nx, ny), h=np.hypot(hx, hy))


def facet_trace_points(mesh, facet, order):
    """Quadrature nodes and weights on one facet.

    Returns physical points (wrapped onto the torus) and weights summing to
    the facet measure.  In 1D the facet is a point: one node, weight 1.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    if mesh.d == 1:
        e, loc = mesh.facet_elems[facet, 0], mesh.facet_local[facet, 0]
        x = mesh.elem_coords[e, loc]
        return mesh.wrap(x[None, :]), np.array([1.0])
    s, w = edge_rule(order)
    e, loc = mesh.facet_elems[facet, 0], mesh.facet_local[facet, 0]
    orient = mesh.facet_orient[facet, 0]
    ref = mesh.facet_reference_points(loc, orient, s)
    pts = mesh.reference_to_physical(e, ref)
    return mesh.wrap(pts), w * mesh.facet_measures[facet]
