"""Exact descriptions of the smooth closed surfaces.

Every surface provides, in vectorized form: the oriented distance ``d``
(negative inside), the closest-point projection ``psi``, the outward unit
normal, and curvature data (principal curvatures/directions, their sum,
and the distance Hessian restricted to the surface).  All quantities are
exact to machine precision for the closed-form kinds (circle, sphere,
torus); implicit level-set kinds compute the projection by a damped
Newton iteration on the foot-point system.

Points are only trusted inside the tubular strip of halfwidth
``strip_halfwidth`` around the surface, where the decomposition
x = psi(x) + d(x) * nu(psi(x)) is unique.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import (DegenerateHessian, NonConvergence, OutsideStrip,
                         UnsupportedCombination)


@dataclass
class CurvatureData:
    """Curvature of the surface at on-surface points.

    ``kappas``: (n, D) principal curvatures, descending.
    ``directions``: (n, D, dim) unit principal directions, orthogonal to
    the normal and to each other.
    ``mean_sum``: (n,) sum of principal curvatures.
    ``hessian``: (n, dim, dim) Hessian of the distance function on the
    surface (the normal spans its kernel).
    """
    kappas: np.ndarray
    directions: np.ndarray
    mean_sum: np.ndarray
    hessian: np.ndarray


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _tangent_frame(nu):
    """Deterministic orthonormal tangent frame(s) completing ``nu``."""
    nu = np.atleast_2d(nu)
    n, dim = nu.shape
    if dim == 2:
        t = np.stack([-nu[:, 1], nu[:, 0]], axis=1)
        return t[:, None, :]
    axes = np.eye(3)
    pick = np.argmin(np.abs(nu @ axes.T), axis=1)
    a = axes[pick]
    t1 = _unit(a - (a * nu).sum(1, keepdims=True) * nu)
    t2 = np.cross(nu, t1)
    return np.stack([t1, t2], axis=1)


class Surface:
    """Base class; subclasses fill in the geometric kernel."""

    kind = "abstract"
    ambient_dim = None

    def project(self, x, trust_radius=None):
        """Closest point and signed distance in one pass: (psi, d).

        ``trust_radius`` overrides the strip check (mesh construction
        snaps coarse points from outside the strip and accepts the
        converged stationary foot point).
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p = self.closest_point(x)
        return p, self.signed_distance(x)

    def signed_distance(self, x):
        raise NotImplementedError

    def closest_point(self, x):
        raise NotImplementedError

    def snap(self, x):
        """Land points on the surface for mesh construction.

        Equals the closest-point projection wherever that is trustworthy;
        implicit kinds fall back to a gradient-line projection for points
        beyond the strip (any on-surface point is acceptable for a coarse
        mesh vertex)."""
        return self.project(x, trust_radius=np.inf)[0]

    def normal(self, x):
        """Outward unit normal at psi(x); equals grad d within the strip."""
        raise NotImplementedError

    def normal_at(self, p):
        """Outward unit normal for points already on the surface (skips
        the projection)."""
        return self.normal(p)

    def curvature_at(self, p, tol_surface=1e-8):
        """Curvature data at points on the surface (|d| <= tol_surface)."""
        p = np.atleast_2d(np.asarray(p, dtype=float))
        d = self.signed_distance(p)
        scale = 1.0 + np.abs(p).max()
        if np.abs(d).max() > tol_surface * scale:
            raise ValueError("curvature requested off the surface: "
                             f"max |d| = {np.abs(d).max():.3e}")
        return self._curvature(p)

    def _curvature(self, p):
        raise NotImplementedError

    def projection_jacobian(self, x, step=1e-6):
        """Jacobian of the closest-point projection, by central differences.

        Closed-form subclasses override with the analytic expression; this
        generic version backs the independent change-of-variables oracle
        for implicit kinds.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n, dim = x.shape
        J = np.empty((n, dim, dim))
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = step
            J[:, :, j] = (self.closest_point(x + e)
                          - self.closest_point(x - e)) / (2 * step)
        return J

    def sample_points(self, n, rng):
        """n quasi-random points on the surface (for probes and tests)."""
        raise NotImplementedError

    def sample_strip_points(self, n, rng, frac=0.9):
        """Points inside the strip: surface samples offset along the normal
        by uniform(-frac, frac) * strip_halfwidth."""
        p = self.sample_points(n, rng)
        nu = self.normal(p)
        off = rng.uniform(-frac, frac, size=n) * self.strip_halfwidth
        return p + off[:, None] * nu


class _RoundSurface(Surface):
    """Common kernel for circle and sphere (distance to a center sphere)."""

    def __init__(self, radius=1.0, strip_halfwidth=None):
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.strip_halfwidth = (0.5 * self.radius if strip_halfwidth is None
                                else float(strip_halfwidth))

    def signed_distance(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.linalg.norm(x, axis=1) - self.radius

    def closest_point(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        if np.any(r == 0.0):
            raise OutsideStrip("center point has no unique projection")
        return self.radius * x / r[:, None]

    def normal(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return _unit(x)

    def projection_jacobian(self, x, step=None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        r = np.linalg.norm(x, axis=1)
        xh = x / r[:, None]
        eye = np.eye(x.shape[1])
        return (self.radius / r)[:, None, None] * (
            eye - xh[:, :, None] * xh[:, None, :])

    def _curvature(self, p):
        nu = _unit(p)
        n, dim = p.shape
        kap = np.full((n, dim - 1), 1.0 / self.radius)
        frames = _tangent_frame(nu)
        proj = np.eye(dim) - nu[:, :, None] * nu[:, None, :]
        return CurvatureData(kap, frames, kap.sum(1), proj / self.radius)


class Circle(_RoundSurface):
    kind = "circle"
    ambient_dim = 2

    def sample_points(self, n, rng):
        th = rng.uniform(0.0, 2 * np.pi, n)
        return self.radius * np.stack([np.cos(th), np.sin(th)], axis=1)


class Sphere(_RoundSurface):
    kind = "sphere"
    ambient_dim = 3

    def sample_points(self, n, rng):
        return self.radius * _unit(rng.standard_normal((n, 3)))


class Torus(Surface):
    kind = "torus"
    ambient_dim = 3

    def __init__(self, major_radius=2.0, minor_radius=1.0,
                 strip_halfwidth=None):
        if not 0 < minor_radius < major_radius:
            raise ValueError("need 0 < minor_radius < major_radius")
        self.major_radius = float(major_radius)
        self.minor_radius = float(minor_radius)
        default = 0.5 * min(minor_radius, major_radius - minor_radius)
        self.strip_halfwidth = (default if strip_halfwidth is None
                                else float(strip_halfwidth))

    def _tube(self, x):
        rho = np.hypot(x[:, 0], x[:, 1])
        if np.any(rho == 0.0):
            raise OutsideStrip("points on the symmetry axis have no unique "
                               "projection")
        c = np.zeros_like(x)
        c[:, 0] = self.major_radius * x[:, 0] / rho
        c[:, 1] = self.major_radius * x[:, 1] / rho
        return rho, c

    def signed_distance(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        rho = np.hypot(x[:, 0], x[:, 1])
        return np.hypot(rho - self.major_radius, x[:, 2]) - self.minor_radius

    def closest_point(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        rho, c = self._tube(x)
        v = x - c
        nv = np.linalg.norm(v, axis=1)
        if np.any(nv == 0.0):
            raise OutsideStrip("points on the tube center circle have no "
                               "unique projection")
        return c + self.minor_radius * v / nv[:, None]

    def normal(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        _, c = self._tube(x)
        return _unit(x - c)

    def _curvature(self, p):
        rho, c = self._tube(p)
        R, r = self.major_radius, self.minor_radius
        nu = _unit(p - c)
        cos_t = (rho - R) / r
        sin_t = p[:, 2] / r
        phi_c, phi_s = p[:, 0] / rho, p[:, 1] / rho
        e_tube = np.stack([-sin_t * phi_c, -sin_t * phi_s, cos_t], axis=1)
        e_major = np.stack([-phi_s, phi_c, np.zeros_like(phi_s)], axis=1)
        k_tube = np.full_like(cos_t, 1.0 / r)
        k_major = cos_t / (R + r * cos_t)
        kap = np.stack([k_tube, k_major], axis=1)
        frames = np.stack([e_tube, e_major], axis=1)
        order = np.argsort(-kap, axis=1)
        kap = np.take_along_axis(kap, order, axis=1)
        frames = np.take_along_axis(frames, order[:, :, None], axis=1)
        hess = np.einsum("nd,ndi,ndj->nij", kap, frames, frames)
        return CurvatureData(kap, frames, kap.sum(1), hess)

    def sample_points(self, n, rng):
        phi = rng.uniform(0.0, 2 * np.pi, n)
        th = rng.uniform(0.0, 2 * np.pi, n)
        R, r = self.major_radius, self.minor_radius
        rho = R + r * np.cos(th)
        return np.stack([rho * np.cos(phi), rho * np.sin(phi),
                         r * np.sin(th)], axis=1)


class ImplicitSurface(Surface):
    """Surface given as the zero level set of a smooth function.

    ``value``, ``gradient``, ``hessian`` are vectorized evaluators taking
    (n, 3) points.  The level-set function must be negative inside the
    bounded component, so sign(value) matches the oriented distance.
    """

    kind = "implicit"
    ambient_dim = 3

    def __init__(self, name, value, gradient, hessian, strip_halfwidth=None,
                 tol_surface=1e-12, max_iter=50):
        self.name = name
        self.value = value
        self.gradient = gradient
        self.hessian = hessian
        self.tol_surface = tol_surface
        self.max_iter = max_iter
        if strip_halfwidth is None:
            strip_halfwidth = self._estimate_strip()
        self.strip_halfwidth = float(strip_halfwidth)

    def _estimate_strip(self):
        # 0.5 / (max sampled principal curvature magnitude)
        rng = np.random.default_rng(2024)
        seeds = 1.05 * _unit(rng.standard_normal((256, 3)))
        p = self._level_set_project(seeds)
        cd = self._curvature(p)
        return 0.5 / np.abs(cd.kappas).max()

    def _level_set_project(self, x, iters=40):
        """Drive value(p) to zero along the gradient line.  Lands on the
        surface near x but not at the closest point; used for seeding and
        for surface sampling, where any on-surface point will do."""
        p = np.array(np.atleast_2d(x), dtype=float)
        scale = 1.0 + np.abs(p).max()
        for _ in range(iters):
            v = self.value(p)
            if np.abs(v).max() <= 1e-14 * scale:
                break
            g = self.gradient(p)
            p = p - (v / (g * g).sum(1))[:, None] * g
        return p

    def _newton_project(self, x):
        """Damped Newton on the foot-point system
        p - x + t grad(p) = 0, value(p) = 0, started near the surface."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        n, dim = x.shape
        p = self._level_set_project(x, iters=8)
        g = self.gradient(p)
        t = ((x - p) * g).sum(1) / (g * g).sum(1)
        scale = 1.0 + np.abs(x).max()
        tol = self.tol_surface * scale

        def residual(p, t):
            f1 = p - x + t[:, None] * self.gradient(p)
            return np.concatenate([f1, self.value(p)[:, None]], axis=1)

        res = residual(p, t)
        rnorm = np.linalg.norm(res, axis=1)
        for _ in range(self.max_iter):
            if rnorm.max() <= tol:
                break
            g = self.gradient(p)
            H = self.hessian(p)
            J = np.zeros((n, dim + 1, dim + 1))
            J[:, :dim, :dim] = np.eye(dim) + t[:, None, None] * H
            J[:, :dim, dim] = g
            J[:, dim, :dim] = g
            try:
                step = np.linalg.solve(J, res[:, :, None])[:, :, 0]
            except np.linalg.LinAlgError as exc:
                raise NonConvergence("singular foot-point Jacobian") from exc
            # Backtracking on the residual norm, per point; points already
            # converged keep alpha = 0.
            alpha = np.where(rnorm <= tol, 0.0, 1.0)
            best_a = alpha.copy()
            best_r = rnorm.copy()
            for _ in range(20):
                active = (alpha > 0) & (best_r > (1 - 1e-4 * alpha) * rnorm)
                if not active.any():
                    break
                pn = p - alpha[:, None] * step[:, :dim]
                tn = t - alpha * step[:, dim]
                rn = np.linalg.norm(residual(pn, tn), axis=1)
                improved = active & (rn < best_r)
                best_a[improved] = alpha[improved]
                best_r[improved] = rn[improved]
                alpha[active] *= 0.5
            p = p - best_a[:, None] * step[:, :dim]
            t = t - best_a * step[:, dim]
            res = residual(p, t)
            rnorm = np.linalg.norm(res, axis=1)
            if best_r.max() <= tol:
                break
            if np.all((best_a == 0) | (rnorm <= tol)):
                break                      # stalled; verdict below
        if rnorm.max() > tol:
            raise NonConvergence(
                f"foot-point Newton failed for {int((rnorm > tol).sum())} "
                f"of {n} points (worst residual {rnorm.max():.3e})")
        return p

    def project(self, x, trust_radius=None):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p = self._newton_project(x)
        d = np.sign(self.value(x)) * np.linalg.norm(x - p, axis=1)
        limit = self.strip_halfwidth if trust_radius is None else trust_radius
        if np.abs(d).max() > limit:
            raise OutsideStrip(
                f"foot point at distance {np.abs(d).max():.3e} exceeds the "
                f"trusted radius {limit:.3e}")
        return p, d

    def closest_point(self, x):
        return self.project(x)[0]

    def signed_distance(self, x):
        return self.project(x)[1]

    def snap(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p = self._level_set_project(x)
        near = np.linalg.norm(x - p, axis=1) <= 0.8 * self.strip_halfwidth
        if near.any():
            p[near] = self._newton_project(x[near])
        return p

    def normal(self, x):
        p = self.closest_point(np.atleast_2d(np.asarray(x, dtype=float)))
        return _unit(self.gradient(p))

    def normal_at(self, p):
        return _unit(self.gradient(np.atleast_2d(np.asarray(p, dtype=float))))

    def _curvature(self, p):
        g = self.gradient(p)
        ng = np.linalg.norm(g, axis=1)
        nu = g / ng[:, None]
        Hphi = self.hessian(p) / ng[:, None, None]
        eye = np.eye(3)
        P = eye - nu[:, :, None] * nu[:, None, :]
        # Distance Hessian on the surface: P (Hphi/|grad|) P, with the
        # eigenproblem posed in an explicit tangent frame to keep the
        # normal's null direction out of it.
        T = _tangent_frame(nu)                       # (n, 2, 3)
        W = np.einsum("nai,nij,nbj->nab", T, P @ Hphi @ P, T)
        try:
            vals, vecs = np.linalg.eigh(W)
        except np.linalg.LinAlgError as exc:
            raise DegenerateHessian(str(exc)) from exc
        vals = vals[:, ::-1]
        vecs = vecs[:, :, ::-1]
        frames = np.einsum("nba,nbi->nai", vecs, T)
        hess = np.einsum("nd,ndi,ndj->nij", vals, frames, frames)
        return CurvatureData(vals, frames, vals.sum(1), hess)

    def sample_points(self, n, rng):
        seeds = 1.05 * _unit(rng.standard_normal((n, 3)))
        return self._level_set_project(seeds)


def _heart_value(shift):
    """Level sets of the family (x - z^2)^2 + y^2 + z^2 + shift-term - 1."""
    if shift:
        def value(p):
            x, y, z = p[:, 0], p[:, 1], p[:, 2]
            return ((x - z ** 2) ** 2 + y ** 2 + z ** 2
                    + 0.5 * (x - 0.1) * (y + 0.1) * (z + 0.2) - 1.0)

        def gradient(p):
            x, y, z = p[:, 0], p[:, 1], p[:, 2]
            gx = 2 * (x - z ** 2) + 0.5 * (y + 0.1) * (z + 0.2)
            gy = 2 * y + 0.5 * (x - 0.1) * (z + 0.2)
            gz = -4 * z * (x - z ** 2) + 2 * z + 0.5 * (x - 0.1) * (y + 0.1)
            return np.stack([gx, gy, gz], axis=1)

        def hessian(p):
            x, y, z = p[:, 0], p[:, 1], p[:, 2]
            n = len(x)
            H = np.empty((n, 3, 3))
            H[:, 0, 0] = 2.0
            H[:, 0, 1] = H[:, 1, 0] = 0.5 * (z + 0.2)
            H[:, 0, 2] = H[:, 2, 0] = -4 * z + 0.5 * (y + 0.1)
            H[:, 1, 1] = 2.0
            H[:, 1, 2] = H[:, 2, 1] = 0.5 * (x - 0.1)
            H[:, 2, 2] = -4 * (x - z ** 2) + 8 * z ** 2 + 2
            return H
    else:
        def value(p):
            x, y, z = p[:, 0], p[:, 1], p[:, 2]
            return (x - z ** 2) ** 2 + y ** 2 + z ** 2 - 1.0

        def gradient(p):
            x, y, z = p[:, 0], p[:, 1], p[:, 2]
            return np.stack([2 * (x - z ** 2), 2 * y,
                             -4 * z * (x - z ** 2) + 2 * z], axis=1)

        def hessian(p):
            x, y, z = p[:, 0], p[:, 1], p[:, 2]
            n = len(x)
            H = np.zeros((n, 3, 3))
            H[:, 0, 0] = 2.0
            H[:, 0, 2] = H[:, 2, 0] = -4 * z
            H[:, 1, 1] = 2.0
            H[:, 2, 2] = -4 * (x - z ** 2) + 8 * z ** 2 + 2
            return H
    return value, gradient, hessian


# Built-in level sets selectable from study configs; no runtime expression
# parsing.
def _make_heart():
    return ImplicitSurface("heart", *_heart_value(False))


def _make_skewed_heart():
    return ImplicitSurface("skewed_heart", *_heart_value(True))


IMPLICIT_REGISTRY = {
    "heart": _make_heart,
    "skewed_heart": _make_skewed_heart,
}


def make_surface(kind, **params):
    """Factory used by study configs.

    kind: 'circle', 'sphere', 'torus', or 'implicit:<registry name>'.
    """
    if kind == "circle":
        return Circle(params.get("radius", 1.0),
                      params.get("strip_halfwidth"))
    if kind == "sphere":
        return Sphere(params.get("radius", 1.0),
                      params.get("strip_halfwidth"))
    if kind == "torus":
        return Torus(params.get("major_radius", 2.0),
                     params.get("minor_radius", 1.0),
                     params.get("strip_halfwidth"))
    if kind.startswith("implicit:"):
        name = kind.split(":", 1)[1]
        if name not in IMPLICIT_REGISTRY:
            raise UnsupportedCombination(
                f"unknown implicit surface {name!r}; "
                f"registry: {sorted(IMPLICIT_REGISTRY)}")
        surf = IMPLICIT_REGISTRY[name]()
        if params.get("strip_halfwidth"):
            surf.strip_halfwidth = float(params["strip_halfwidth"])
        return surf
    raise UnsupportedCombination(f"unknown surface kind {kind!r}")
