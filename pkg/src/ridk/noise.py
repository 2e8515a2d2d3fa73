"""Spatially correlated noise: von Mises kernel, spectrum, and increments.

The noise field is white in time and correlated in space through the von
Mises kernel w_eps.  Its convolution operator diagonalizes in the real
trigonometric system e_j (cosines for j > 0, sines for j < 0, the constant
for j = 0), with eigenvalues given by ratios of modified Bessel functions,

    lambda_{j,eps} = I_j(1/(2 eps^2)) / I_0(1/(2 eps^2)),

and d-dimensional eigenvalues formed as products over components.  Sampling
draws one Gaussian per (component, mode) from a counter-based stream, so a
step's increment is reproducible from (seed, step) alone.
"""

import numpy as np
from scipy.integrate import quad

TWO_PI = 2.0 * np.pi

_RESCALE = 1e250
_X_MAX = 1e6


def _ratio_table(jmax, x):
    """I_j(x)/I_0(x) for j = 0..jmax by downward (Miller) recurrence."""
    start = jmax + int(np.ceil(10.0 * np.sqrt(x))) + 50
    vals = np.zeros(jmax + 1)
    upper = 0.0      # unnormalized I_{k+1}
    cur = 1e-30      # unnormalized I_k at k = start
    for k in range(start, 0, -1):
        if k <= jmax:
            vals[k] = cur
        lower = (2.0 * k / x) * cur + upper
        upper, cur = cur, lower
        if cur > _RESCALE:
            cur /= _RESCALE
            upper /= _RESCALE
            vals /= _RESCALE
    vals[0] = cur
    return vals / cur


def bessel_ratio(j, x):
    """Ratio I_j(x)/I_0(x) of modified Bessel functions of the first kind.

    Computed by downward recurrence normalized at j = 0, which stays finite
    where I_j itself would overflow.  Accepts a scalar or array of
    nonnegative integer orders.
    """
    if x <= 0:
        raise ValueError("argument x must be positive")
    if x > _X_MAX:
        raise ValueError("argument x too large for the recurrence")
    jarr = np.asarray(j, dtype=int)
    if np.any(jarr < 0):
        raise ValueError("order j must be nonnegative")
    table = _ratio_table(int(jarr.max()) if jarr.size else 0, float(x))
    out = table[jarr]
    return float(out) if np.isscalar(j) or jarr.ndim == 0 else out


def eigenvalue(j, eps):
    """Spatial-covariance eigenvalue for multi-index j at correlation eps.

    Product over components of the 1D Bessel ratios at x = 1/(2 eps^2).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    jarr = np.atleast_1d(np.asarray(j, dtype=int))
    x = 1.0 / (2.0 * eps * eps)
    return float(np.prod(bessel_ratio(np.abs(jarr), x)))


class TruncationSet:
    """Mode truncation |j|_1 <= J of the noise expansion."""

    def __init__(self, J):
        if J < 0:
            raise ValueError("truncation index must be nonnegative")
        self.J = int(J)
        self._indices = {}

    def contains(self, j):
        return int(np.sum(np.abs(np.atleast_1d(j)))) <= self.J

    def indices(self, d):
        """All multi-indices with |j|_1 <= J, shape (nmodes, d).

        Cached per dimension, so repeated sampling shares one array and
        downstream basis caches can key on its identity.
        """
        if d in self._indices:
            return self._indices[d]
        if d == 1:
            out = np.arange(-self.J, self.J + 1)[:, None]
        elif d == 2:
            rows = []
            for j1 in range(-self.J, self.J + 1):
                r = self.J - abs(j1)
                for j2 in range(-r, r + 1):
                    rows.append((j1, j2))
            out = np.array(rows, dtype=int)
        else:
            raise NotImplementedError("dimensions 1 and 2 only")
        self._indices[d] = out
        return out


def truncation_set(eps, h, q_tilde):
    """Truncation J = ceil(eps^-1 |ln(h^{2 q_tilde})|).

    q_tilde is 1/2 at lowest order and the element degree otherwise.  Meshes
    with h >= 1 fall back to the degenerate single-mode set {0}.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if h <= 0:
        raise ValueError("h must be positive")
    if not (q_tilde == 0.5 or (float(q_tilde).is_integer() and q_tilde >= 1)):
        raise ValueError("q_tilde must be 1/2 or a positive integer")
    if h >= 1.0:
        return TruncationSet(0)
    J = int(np.ceil(abs(np.log(h ** (2.0 * q_tilde))) / eps))
    return TruncationSet(J)


class VonMisesSpectrum:
    """Eigenvalue table of the von Mises covariance at correlation eps."""

    def __init__(self, eps, d):
        if eps <= 0:
            raise ValueError("eps must be positive")
        if d not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        self.eps = float(eps)
        self.d = d
        self.x = 1.0 / (2.0 * eps * eps)
        self._table = _ratio_table(0, self.x)

    def _ensure(self, jmax):
        if jmax > len(self._table) - 1:
            self._table = _ratio_table(jmax, self.x)

    def lambda_1d(self, j):
        """1D eigenvalues for (arrays of) integer orders."""
        jarr = np.abs(np.asarray(j, dtype=int))
        self._ensure(int(jarr.max()) if jarr.size else 0)
        return self._table[jarr]

    def eigenvalues(self, modes):
        """Product eigenvalues for multi-indices of shape (nmodes, d)."""
        modes = np.asarray(modes, dtype=int)
        return np.prod(self.lambda_1d(np.abs(modes)), axis=1)


def mode_basis(modes, x):
    """Matrix of basis products e_{j_1}(x_1)...e_{j_d}(x_d), shape (npts, nm).

    e_j is cos(j x)/sqrt(pi) for j > 0, sin(j x)/sqrt(pi) for j < 0, and
    1/sqrt(2 pi) for j = 0.
    """
    modes = np.asarray(modes, dtype=int)
    x = np.asarray(x, dtype=float).reshape(-1, modes.shape[1])
    E = np.ones((x.shape[0], modes.shape[0]))
    inv_sqrt_pi = 1.0 / np.sqrt(np.pi)
    inv_sqrt_2pi = 1.0 / np.sqrt(TWO_PI)
    for axis in range(modes.shape[1]):
        j = modes[:, axis][None, :]
        arg = x[:, axis][:, None] * j
        vals = np.where(j > 0, np.cos(arg) * inv_sqrt_pi,
                        np.where(j < 0, np.sin(arg) * inv_sqrt_pi,
                                 inv_sqrt_2pi))
        E *= vals
    return E


class CounterStream:
    """Deterministic Gaussian stream from a counter-based generator.

    A draw at step k is a fixed-order block of standard normals produced by
    a Philox generator keyed by (seed, tag) with the step in the counter, so
    results depend only on (seed, tag, step) and never on evaluation order
    or on how many values earlier steps consumed.
    """

    def __init__(self, seed, tag=0, step=0):
        self.seed = int(seed)
        self.tag = int(tag)
        self.step = int(step)

    def block(self, shape):
        key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF,
                        self.tag & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
        counter = np.array([self.step, 0, 0, 0], dtype=np.uint64)
        gen = np.random.Generator(np.random.Philox(key=key, counter=counter))
        return gen.standard_normal(shape)

    def uniform_block(self, shape):
        key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF,
                        self.tag & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
        counter = np.array([self.step, 0, 0, 0], dtype=np.uint64)
        gen = np.random.Generator(np.random.Philox(key=key, counter=counter))
        return gen.random(shape)

    def advance(self):
        self.step += 1

    def child(self, tag):
        return CounterStream(self.seed, tag, self.step)


class NoiseIncrement:
    """One sampled time increment of the correlated noise field.

    coeffs[l, m] = sqrt(lambda_m * dt) * g with g standard normal; the
    component fields are evaluated as E(x) @ coeffs[l].
    """

    def __init__(self, modes, coeffs, dt):
        self.modes = modes
        self.coeffs = coeffs
        self.dt = dt
        self.d = modes.shape[1]

    def evaluate(self, x):
        """Field values at points x (npts, d) -> (npts, d components)."""
        E = mode_basis(self.modes, x)
        return E @ self.coeffs.T


def sample_increment(spectrum, tset, dt, stream):
    """Draw the Gaussian coefficients of one noise increment.

    Components are independent; each (component, mode) coefficient comes from
    a fixed position in the stream's current-step block.  The stream advances
    afterwards so consecutive calls yield independent increments.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    modes = tset.indices(spectrum.d)
    lam = spectrum.eigenvalues(modes)
    g = stream.block((spectrum.d, len(modes)))
    stream.advance()
    coeffs = np.sqrt(lam * dt)[None, :] * g
    return NoiseIncrement(modes, coeffs, dt)


_Z_CACHE = {}


def _kernel_z(eps):
    """1D normalization so the kernel has unit mass on the circle."""
    if eps not in _Z_CACHE:
        val, err = quad(lambda t: np.exp(-np.sin(0.5 * t) ** 2 / (0.5 * eps * eps)),
                        -np.pi, np.pi, points=[0.0], limit=200)
        _Z_CACHE[eps] = val
    return _Z_CACHE[eps]


def kernel_eval(eps, x, d=1):
    """Von Mises kernel w_eps(x) = Z^-d exp(-sum_l sin^2(x_l/2)/(eps^2/2)).

    Normalized to unit mass over the torus.  For d=1, x is any array of
    points; for d=2, the trailing axis holds the components.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    z = _kernel_z(eps)
    x = np.asarray(x, dtype=float)
    if d == 1:
        expo = np.sin(0.5 * x) ** 2 / (0.5 * eps * eps)
    else:
        expo = np.sum(np.sin(0.5 * x) ** 2, axis=-1) / (0.5 * eps * eps)
    # exp underflows to 0 far from the peak at small eps; that is the
    # correct limit, not an error
    with np.errstate(under='ignore'):
        return np.exp(-expo) / z ** d
