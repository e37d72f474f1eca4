"""Error norms, spectral separation, and geometric-consistency probes.

Everything here is evaluated on the approximate surface with the
curvature identities of the distance function: with d = d(x),
kappa_i = kappa_i(psi(x)) and H the distance Hessian at x,

    dsigma = (nu . N) prod_i 1/(1 + d kappa_i) dSigma,
    grad_gamma v(psi(x)) = (I - d H)^{-1} (I - N x nu / (N . nu)) grad_Gamma v,
    grad_Gamma (u o psi)(x) = P_Gamma (I - d H) grad_gamma u(psi(x)),

so the lifted mass and stiffness forms of exact eigenfunctions against
discrete ones are computed without ever inverting the lift.  An
independent change-of-variables route through the Jacobian of psi backs
these identities in the test suite.
"""

from dataclasses import dataclass, field

import numpy as np

from .assembly import default_rule
from .exceptions import (ClusterNotSeparated, ExtrapolationUnstable,
                         OracleInsufficient)
from .quadrature import make_rule


@dataclass
class GeometricFactors:
    """Per-quadrature-point geometry linking the two surfaces.

    Shapes: scalars (n_cells, n_q), vectors (..., dim), matrices
    (..., dim, dim).  ``q_ratio`` is the area ratio dsigma/dSigma;
    ``to_gamma`` maps surface gradients on Gamma to gamma;
    ``ext_push`` maps exact tangential gradients on gamma to surface
    gradients of the extension on Gamma; ``a_gamma`` is the lifted
    stiffness tensor; ``tangent_proj`` is I - nu x nu on gamma.
    """
    points: np.ndarray = field(repr=False)
    d: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    nu: np.ndarray = field(repr=False)
    normal: np.ndarray = field(repr=False)
    kappas: np.ndarray = field(repr=False)
    frames: np.ndarray = field(repr=False)
    mean_sum: np.ndarray = field(repr=False)
    q_ratio: np.ndarray = field(repr=False)
    to_gamma: np.ndarray = field(repr=False)
    ext_push: np.ndarray = field(repr=False)
    a_gamma: np.ndarray = field(repr=False)
    tangent_proj: np.ndarray = field(repr=False)


def geometric_factors(lifted, xhat, cells=None):
    """Evaluate the geometric link quantities at reference points of every
    (or selected) cell of the lifted mesh."""
    surface = lifted.surface
    X = lifted.map_point(xhat, cells)
    N = lifted.normals(xhat, cells)
    nc, nq, dim = X.shape
    flat = X.reshape(-1, dim)
    psi, d = surface.project(flat)
    nu = surface.normal_at(psi)
    curv = surface.curvature_at(psi)
    kap = curv.kappas.reshape(nc, nq, -1)
    frames = curv.directions.reshape(nc, nq, -1, dim)
    d = d.reshape(nc, nq)
    psi = psi.reshape(nc, nq, dim)
    nu = nu.reshape(nc, nq, dim)

    dk = d[:, :, None] * kap                       # (c, q, D)
    q_ratio = np.einsum("cqd,cqd->cq", nu, N) / (1.0 + dk).prod(axis=2)

    eye = np.eye(dim)
    ee = np.einsum("cqai,cqaj->cqaij", frames, frames)
    # I - d H(x); H has eigenvalues kappa/(1 + d kappa) at x
    IdH = eye - np.einsum("cqa,cqaij->cqij", dk / (1.0 + dk), ee)
    IdH_inv = eye + np.einsum("cqa,cqaij->cqij", dk, ee)
    ndot = np.einsum("cqd,cqd->cq", N, nu)
    slant = eye - np.einsum("cqi,cqj->cqij", N, nu) / ndot[..., None, None]
    to_gamma = np.einsum("cqij,cqjk->cqik", IdH_inv, slant)
    P_Gamma = eye - np.einsum("cqi,cqj->cqij", N, N)
    ext_push = np.einsum("cqij,cqjk->cqik", P_Gamma, IdH)
    a_gamma = np.einsum("cqij,cqjk,cqkl->cqil", IdH, P_Gamma, IdH) \
        / q_ratio[..., None, None]
    P = eye - np.einsum("cqi,cqj->cqij", nu, nu)
    return GeometricFactors(X, d, psi, nu, N, kap, frames,
                            curv.mean_sum.reshape(nc, nq), q_ratio,
                            to_gamma, ext_push, a_gamma, P)


class SurfaceQuadrature:
    """A quadrature rule instantiated on the whole lifted mesh, together
    with basis tables and map data; the workhorse for every integral in
    this module."""

    def __init__(self, space, rule):
        self.space = space
        self.rule = rule
        lifted = space.lifted
        self.tab = space.element.eval(rule.points)
        gtab = space.element.grad(rule.points)
        self.J, self.area_factor = lifted.map_jacobian(rule.points)
        G = np.einsum("cqdr,cqds->cqrs", self.J, self.J)
        Ginv = np.linalg.inv(G)
        # push reference basis gradients to tangential gradients on Gamma
        self.push = np.einsum("cqdr,cqrs,qis->cqid", self.J, Ginv, gtab,
                              optimize=True)
        self.weights = rule.weights[None, :] * self.area_factor   # (c, q)

    def values(self, coeffs):
        cf = coeffs[self.space.cell_dofs]
        return np.einsum("qi,ci->cq", self.tab, cf)

    def gradients(self, coeffs):
        cf = coeffs[self.space.cell_dofs]
        return np.einsum("cqid,ci->cqd", self.push, cf)

    def integrate(self, integrand):
        """Sum w * Q * integrand over all cells and points."""
        return float((self.weights * integrand).sum())


def _oracle_pair(space, extra=4):
    """Two nested over-resolved rules for oracle integrals."""
    r, k = space.degree, space.lifted.degree
    base = 2 * r + 2 * k + extra
    n1 = base // 2 + 1
    return (make_rule(space.cell_kind, "gauss_legendre", n1),
            make_rule(space.cell_kind, "gauss_legendre", n1 + 3))


@dataclass
class ErrorNorms:
    """Lifted-norm errors of exact eigenfunctions against the discrete
    invariant space, per requested eigenfunction."""
    l2: np.ndarray
    energy: np.ndarray
    l2_galerkin: np.ndarray        # via the A-orthogonal projection Z
    energy_galerkin: np.ndarray
    alpha: np.ndarray


def lifted_error_norms(space, result, J, pair, alpha_policy="mean_shift",
                       indices=(0,), rule=None):
    """L2 and energy errors of exact eigenfunctions in the lifted forms.

    For each selected exact eigenfunction u the discrete representative
    is its M-projection P u onto span{U_j : j in J}; the L2 error is
    ||u - P u - alpha|| in the lifted mass form (alpha the mean of the
    error under ``mean_shift``, else 0) and the energy error
    ||u - P u|| in the lifted stiffness form.  The A-orthogonal
    (Galerkin) projection Z is evaluated alongside.
    """
    if rule is None:
        rule = _oracle_pair(space)[0]
    sq = SurfaceQuadrature(space, rule)
    gf = geometric_factors(space.lifted, rule.points)
    area = sq.integrate(np.ones_like(sq.weights))

    Uvals = [sq.values(result.eigenvectors[:, j]) for j in J]
    Ugrads = [sq.gradients(result.eigenvectors[:, j]) for j in J]
    lams = result.eigenvalues[np.asarray(J)]

    nfun = len(pair.functions)
    picked = range(nfun) if indices is None else indices
    out = {k: [] for k in ("l2", "en", "l2z", "enz", "al")}
    flatpsi = gf.psi.reshape(-1, gf.psi.shape[-1])
    for i in picked:
        u = pair.functions[i](flatpsi).reshape(sq.weights.shape)
        gu_gamma = pair.gradients[i](flatpsi).reshape(gf.psi.shape)
        gu = np.einsum("cqij,cqj->cqi", gf.ext_push, gu_gamma)

        cM = np.array([sq.integrate(u * Uv) for Uv in Uvals])
        cA = np.array([sq.integrate(np.einsum("cqd,cqd->cq", gu, Ug))
                       for Ug in Ugrads]) / lams
        for cs, keyv, keyg in ((cM, "l2", "en"), (cA, "l2z", "enz")):
            ev = u - sum(c * Uv for c, Uv in zip(cs, Uvals))
            eg = gu - sum(c * Ug for c, Ug in zip(cs, Ugrads))
            alpha = sq.integrate(ev) / area if alpha_policy == "mean_shift" \
                else 0.0
            l2 = np.sqrt(sq.integrate((ev - alpha) ** 2))
            en = np.sqrt(sq.integrate(np.einsum("cqd,cqd->cq", eg, eg)))
            out[keyv].append(l2)
            out[keyg].append(en)
            if keyv == "l2":
                out["al"].append(alpha)
    return ErrorNorms(np.array(out["l2"]), np.array(out["en"]),
                      np.array(out["l2z"]), np.array(out["enz"]),
                      np.array(out["al"]))


def eigenvalue_errors_and_mu(result, J, lam, eps_gap=1e-12):
    """Per-index eigenvalue errors over the cluster and the spectral
    separation measure mu(J), truncated to the computed spectrum.

    mu(J) = max over the targeted exact values of
    max_{j not in J} |lam / (Lambda_j - lam)|.
    """
    J = np.asarray(J)
    vals = result.eigenvalues
    outside = np.setdiff1d(np.arange(len(vals)), J)
    if len(outside) == 0:
        raise ClusterNotSeparated(
            "cluster covers the whole computed spectrum; mu(J) undefined")
    errors = np.abs(vals[J] - lam)
    denom = np.abs(vals[outside] - lam)
    if denom.min() < eps_gap * max(abs(lam), 1.0):
        raise ClusterNotSeparated(
            f"discrete eigenvalue within {eps_gap} of the target outside "
            f"the cluster")
    mu = float(np.max(np.abs(lam) / denom))
    truncated = True      # j only ranges over the computed spectrum
    return errors, mu, truncated


@dataclass
class ConsistencyProbe:
    stiffness_mismatch: float
    mass_mismatch: float
    d_mean_curv_surrogate: float   # max|d| * max|sum kappa| (broken-norm stand-in)


def geometric_consistency_probe(space, coeffs, oracle_check=True):
    """|a(V,V) - A(V,V)| and |m(V,V) - M(V,V)| between the exact-surface
    and approximate-surface forms of a discrete function V.

    Both mismatches integrate pointwise-small integrands (the area-ratio
    and gradient-map defects), so their superconvergent cancellation is
    resolved by quadrature rather than by subtracting O(1) integrals.
    """
    rule1, rule2 = _oracle_pair(space, extra=8)

    def mismatches(rule):
        sq = SurfaceQuadrature(space, rule)
        gf = geometric_factors(space.lifted, rule.points)
        V = sq.values(coeffs)
        gV = sq.gradients(coeffs)
        gVg = np.einsum("cqij,cqj->cqi", gf.to_gamma, gV)
        mass = sq.integrate(V * V * (gf.q_ratio - 1.0))
        stiff = sq.integrate(
            np.einsum("cqd,cqd->cq", gVg, gVg) * gf.q_ratio
            - np.einsum("cqd,cqd->cq", gV, gV))
        sur = np.abs(gf.d).max() * np.abs(gf.mean_sum).max()
        scale = sq.integrate(V * V)
        return abs(stiff), abs(mass), sur, scale

    s1, m1, sur, scale = mismatches(rule1)
    if oracle_check:
        s2, m2, _, _ = mismatches(rule2)
        tol = 1e-13 * (1.0 + scale)
        if abs(s1 - s2) > tol + 0.01 * max(s1, s2) or \
           abs(m1 - m2) > tol + 0.01 * max(m1, m2):
            raise OracleInsufficient(
                f"consistency probes disagree between oracle rules: "
                f"stiffness {s1!r}/{s2!r}, mass {m1!r}/{m2!r}")
        s1, m1 = s2, m2
    return ConsistencyProbe(s1, m1, sur)


def gamma_forms_independent(space, coeffs_v, coeffs_w, rule=None):
    """Exact-surface forms of discrete functions via the Jacobian of the
    closest-point projection (chain rule through psi o F_T).

    Independent of the curvature identities: used to validate q_ratio,
    the gradient maps, and the structural equalities
    A(V,W) = tilde-A(V,W), M(V,W) = tilde-M(V,W).
    """
    if rule is None:
        rule = _oracle_pair(space)[0]
    sq = SurfaceQuadrature(space, rule)
    lifted = space.lifted
    surface = lifted.surface
    nc, nq = sq.weights.shape
    dim = sq.J.shape[2]

    X = lifted.map_point(rule.points)
    Dpsi = surface.projection_jacobian(X.reshape(-1, dim))
    Dpsi = Dpsi.reshape(nc, nq, dim, dim)
    Jt = np.einsum("cqde,cqer->cqdr", Dpsi, sq.J)
    Gt = np.einsum("cqdr,cqds->cqrs", Jt, Jt)
    qt = np.sqrt(np.linalg.det(Gt))              # reference -> gamma factor
    q_ratio = qt / sq.area_factor

    cf_v = coeffs_v[space.cell_dofs]
    cf_w = coeffs_w[space.cell_dofs]
    gtab = space.element.grad(rule.points)
    gref_v = np.einsum("qir,ci->cqr", gtab, cf_v)
    gref_w = np.einsum("qir,ci->cqr", gtab, cf_w)
    Gt_inv = np.linalg.inv(Gt)
    gg_v = np.einsum("cqdr,cqrs,cqs->cqd", Jt, Gt_inv, gref_v)
    gg_w = np.einsum("cqdr,cqrs,cqs->cqd", Jt, Gt_inv, gref_w)
    Vv = np.einsum("qi,ci->cq", sq.tab, cf_v)
    Vw = np.einsum("qi,ci->cq", sq.tab, cf_w)

    wq = rule.weights[None, :] * qt
    a_gamma = float((wq * np.einsum("cqd,cqd->cq", gg_v, gg_w)).sum())
    m_gamma = float((wq * Vv * Vw).sum())
    A_Gamma = float((sq.weights * np.einsum("cqd,cqd->cq",
                                            sq.gradients(coeffs_v),
                                            sq.gradients(coeffs_w))).sum())
    M_Gamma = float((sq.weights * Vv * Vw).sum())
    return {"a_gamma": a_gamma, "m_gamma": m_gamma,
            "A_Gamma": A_Gamma, "M_Gamma": M_Gamma,
            "q_ratio": q_ratio}


@dataclass
class ReferenceSpectrum:
    """Richardson-extrapolated eigenvalues for surfaces without a closed
    form, with an error estimate from the last two extrapolants."""
    values: np.ndarray
    estimates: np.ndarray
    observed_orders: np.ndarray
    per_level: np.ndarray          # (n_levels, n_values)


def richardson_extrapolate(per_level):
    """Extrapolate per-index eigenvalue sequences over halved meshes."""
    per_level = np.asarray(per_level)
    if per_level.shape[0] < 3:
        raise ExtrapolationUnstable("need at least 3 levels")
    v0, v1, v2 = per_level[-3], per_level[-2], per_level[-1]
    num, den = v0 - v1, v1 - v2
    vals = np.empty_like(v2)
    ests = np.empty_like(v2)
    orders = np.empty_like(v2)
    for i in range(len(v2)):
        if den[i] == 0.0:
            vals[i], ests[i], orders[i] = v2[i], abs(num[i]), np.inf
            continue
        ratio = num[i] / den[i]
        if ratio <= 1.0:
            raise ExtrapolationUnstable(
                f"non-contracting eigenvalue sequence at index {i}: "
                f"ratio {ratio!r}")
        p = np.log2(ratio)
        f = 2.0 ** p - 1.0
        r_prev = v1[i] + (v1[i] - v0[i]) / f
        r_last = v2[i] + (v2[i] - v1[i]) / f
        vals[i] = r_last
        ests[i] = abs(r_last - r_prev)
        orders[i] = p
    return vals, ests, orders


def reference_spectrum_extrapolated(surface, cell_kind, n_values, levels,
                                    degree_fem=4, degree_lift=4,
                                    point_kind="gauss_lobatto",
                                    initial=None, solver_kwargs=None):
    """High-order runs on >= 3 halved levels, Richardson-extrapolated per
    sorted index.

    The caller compares ``estimates`` against the study's smallest
    expected error (1% rule) before trusting ``values``.
    """
    from .basemesh import make_base
    from .lift import build_lift, make_point_set
    from .assembly import build_space, assemble
    from .eigensolve import solve_smallest

    if len(levels) < 3:
        raise ExtrapolationUnstable("need at least 3 levels")
    per_level = []
    for lvl in levels:
        base = make_base(surface, cell_kind, lvl, initial=initial)
        ps = make_point_set(cell_kind, degree_lift, point_kind)
        lifted = build_lift(base, degree_lift, ps)
        space = build_space(lifted, degree_fem)
        forms = assemble(space)
        res = solve_smallest(forms, n_values, **(solver_kwargs or {}))
        per_level.append(res.eigenvalues[:n_values])
    vals, ests, orders = richardson_extrapolate(np.array(per_level))
    return ReferenceSpectrum(vals, ests, orders, np.array(per_level))
