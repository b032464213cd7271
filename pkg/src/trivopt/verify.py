"""Finite-difference checks of the exponential-map bounds and related structure.

All exponentials are taken through the manifolds' own ``triv`` maps, while the
derivatives are measured by finite differences in an ambient embedding:

* SO(n) and the sphere use their natural embedding.
* Grassmannians are embedded by the projector ``P = Y Y^T``, which scales
  norms by sqrt(2) relative to the metric.

Each check returns a :class:`CheckResult`; :func:`run_grid` runs the standard
grid and ``format_report`` renders one line per check.
"""
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import curvature as cv
from . import dense
from .expm import expm
from .manifolds import Grassmannian, SpecialOrthogonal, Sphere, Stiefel, frame_skew

__all__ = [
    "FDConfig",
    "CheckResult",
    "fd_directional",
    "tangent_basis",
    "rauch_check",
    "hess_exp_check",
    "flow_defect",
    "sphere_exp",
    "so_exp",
    "cayley_so",
    "sphere_projection",
    "stiefel_formula_crosscheck",
    "stiefel_qr_exp",
    "grassmann_svd_exp",
    "grassmann_formula_crosscheck",
    "principal_angles",
    "submersion_check",
    "flow_checks",
    "grid_manifolds",
    "run_grid",
    "format_report",
    "CHECK_NAMES",
]

RAUCH_TOL = 1e-4
HESS_TOL = 1e-3


@dataclass(frozen=True)
class FDConfig:
    h: float = 1e-5
    h2: float = 1e-4
    probe_count: int = 32
    power_iters: int = 5
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.h < 1e-2 and 0.0 < self.h2 < 1e-2):
            raise ValueError(f"finite-difference steps must lie in (0, 1e-2), got h={self.h}, h2={self.h2}")


@dataclass
class CheckResult:
    name: str
    params: str
    estimate: float
    bound: float
    passed: bool
    note: str = ""
    skipped: bool = False
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        text = f"{self.name} {self.params} estimate={self.estimate:.10g} bound={self.bound:.10g} {status}"
        return f"{text} {self.note}" if self.note else text


def fd_directional(fun, X, E, cfg: FDConfig = FDConfig()):
    """(fun(X + hE) - fun(X - hE)) / 2h."""
    h = cfg.h
    return (np.asarray(fun(X + h * E)) - np.asarray(fun(X - h * E))) / (2.0 * h)


# Geometry adapters ----------------------------------------------------------


class _Geometry:
    """Exp, embedding, tangent projection and an orthonormal tangent basis at a base."""

    def __init__(self, spec, base):
        self.spec = spec
        self.base = base
        if isinstance(spec, Grassmannian):
            self.scale = 1.0 / math.sqrt(2.0)
        else:
            self.scale = 1.0

    def exp(self, D):
        return self.spec.triv(self.base, self.spec.tangent_to_raw(self.base, D))

    def embed(self, q):
        if isinstance(self.spec, Grassmannian):
            return q @ q.T
        return q

    def project(self, q, Z):
        """Tangential part (at ``q``) of an ambient vector in embedded coordinates."""
        if isinstance(self.spec, SpecialOrthogonal):
            return q @ dense.skew(q.T @ Z)
        if isinstance(self.spec, Sphere):
            return Z - (q @ Z) * q
        P = q @ q.T
        Ic = np.eye(P.shape[0]) - P
        return P @ Z @ Ic + Ic @ Z @ P

    def inner(self, a, b):
        return self.scale ** 2 * float(np.sum(a * b))

    def norm(self, a):
        return math.sqrt(self.inner(a, a))


def tangent_basis(spec, base):
    """Tangent vectors at ``base`` (ambient form), orthonormal in the manifold metric."""
    if isinstance(spec, SpecialOrthogonal):
        n = spec.n
        out = []
        for j in range(n):
            for i in range(j + 1, n):
                E = np.zeros((n, n))
                E[i, j], E[j, i] = 1.0, -1.0
                out.append(base @ E / math.sqrt(2.0))
        return out
    if isinstance(spec, Grassmannian):
        n, k = spec.n, spec.k
        Up = base[:, k:]
        out = []
        for i in range(n - k):
            for j in range(k):
                E = np.zeros((n - k, k))
                E[i, j] = 1.0
                out.append(Up @ E)
        return out
    if isinstance(spec, Sphere):
        n = spec.n
        M = np.column_stack([base, np.eye(n)[:, : n - 1]])
        Q, _ = dense.qr(M)
        return [Q[:, i].copy() for i in range(1, n)]
    raise TypeError(f"no tangent basis for {spec.name}")


def _combine(basis, c):
    out = np.zeros_like(basis[0])
    for ci, b in zip(c, basis):
        out = out + ci * b
    return out


def _split_directions(basis, v_coords, rng):
    """Orthonormal coordinate vectors spanning the complement of ``v_coords``."""
    d = len(basis)
    if d == 1:
        return np.zeros((1, 0))
    M = np.column_stack([v_coords, rng.standard_normal((d, d - 1))])
    Q, _ = dense.qr(M)
    return Q[:, 1:]


def _unit_direction(spec, base, rng):
    basis = tangent_basis(spec, base)
    c = rng.standard_normal(len(basis))
    c /= np.linalg.norm(c)
    return _combine(basis, c), c, basis


# Rauch (first order) --------------------------------------------------------


def _dexp_columns(geo, basis, coords, r, v, h):
    center = r * v
    cols = []
    for c in coords.T:
        w = _combine(basis, c)
        d = (geo.embed(geo.exp(center + h * w)) - geo.embed(geo.exp(center - h * w))) / (2.0 * h)
        cols.append(geo.scale * d.ravel())
    return np.column_stack(cols)


def rauch_check(spec, base, v, r, cfg: FDConfig = FDConfig(), tol=RAUCH_TOL):
    """Singular values of d exp at ``r v`` on directions normal to ``v`` against the Rauch bounds.

    ``v`` is a unit tangent vector at ``base`` in ambient form. When the
    tangent space is one-dimensional the radial direction itself is used.
    """
    geo = _Geometry(spec, base)
    rng = np.random.default_rng(cfg.seed)
    basis = tangent_basis(spec, base)
    vc = np.array([geo.inner(v, b) / geo.inner(b, b) for b in basis])
    normal = _split_directions(basis, vc, rng)
    coords = normal if normal.shape[1] else np.eye(len(basis))
    J = _dexp_columns(geo, basis, coords, r, v, cfg.h)
    s = dense.svd(J)[1]
    lo_est, hi_est = float(s[-1]), float(s[0])
    lower, upper, domain = cv.rauch_bounds(spec.curvature, r)
    ok_hi = hi_est <= upper + tol
    ok_lo = lo_est >= lower - tol if domain.contains(r) else True
    res = CheckResult(
        "rauch",
        f"{spec.name} r={r:.6g}",
        lo_est if not ok_lo else hi_est,
        lower if not ok_lo else upper,
        ok_lo and ok_hi,
        note=f"range=[{lo_est:.10g}, {hi_est:.10g}] bounds=[{lower:.10g}, {upper:.10g}]",
        extra={"sigma_min": lo_est, "sigma_max": hi_est, "lower": lower, "upper": upper},
    )
    if not res.passed:
        idx = -1 if not ok_lo else 0
        res.extra["witness"] = dense.svd(J)[2][:, idx]
    return res


# Second order ---------------------------------------------------------------


def _accel(geo, center, w, h):
    q0 = geo.exp(center)
    e0 = geo.embed(q0)
    a = (geo.embed(geo.exp(center + h * w)) - 2.0 * e0 + geo.embed(geo.exp(center - h * w))) / (h * h)
    return geo.project(q0, a)


def _hessian_tensor(geo, basis, coords, r, v, h):
    """T[i][j] = (nabla d exp)_{rv}(w_i, w_j) by polarisation of second differences."""
    center = r * v
    ws = [_combine(basis, c) for c in coords.T]
    m = len(ws)
    diag = [_accel(geo, center, w, h) for w in ws]
    T = [[None] * m for _ in range(m)]
    for i in range(m):
        T[i][i] = diag[i]
        for j in range(i + 1, m):
            plus = _accel(geo, center, ws[i] + ws[j], h)
            minus = _accel(geo, center, ws[i] - ws[j], h)
            T[i][j] = T[j][i] = 0.25 * (plus - minus)
    return T


def _apply(T, c):
    out = np.zeros_like(T[0][0])
    for i, ci in enumerate(c):
        for j, cj in enumerate(c):
            out = out + ci * cj * T[i][j]
    return out


def _diag_norm(geo, T, rng, probes, iters):
    """Estimate max over unit c of |T(c, c)| by random probes plus alternating power steps."""
    m = len(T)
    if m == 0:
        return 0.0
    cands = [np.eye(m)[i] for i in range(m)] + [x / np.linalg.norm(x) for x in rng.standard_normal((probes, m))]
    best_c = max(cands, key=lambda c: geo.norm(_apply(T, c)))
    best = geo.norm(_apply(T, best_c))
    c = best_c
    for _ in range(iters):
        y = _apply(T, c)
        ny = geo.norm(y)
        if ny == 0.0:
            break
        y = y / ny
        M = np.array([[geo.inner(y, T[i][j]) for j in range(m)] for i in range(m)])
        w, V = dense.sym_eig(dense.sym(M))
        c = V[:, int(np.argmax(np.abs(w)))]
        best = max(best, geo.norm(_apply(T, c)))
    return best


def hess_exp_check(spec, base, v, r, cfg: FDConfig = FDConfig(), tol=HESS_TOL):
    """Radial, normal and full parts of the Hessian of exp at ``r v`` against their bounds.

    Returns three results named ``hess_radial``, ``hess_normal`` and ``hess_full``.
    """
    geo = _Geometry(spec, base)
    rng = np.random.default_rng(cfg.seed + 1)
    basis = tangent_basis(spec, base)
    d = len(basis)
    vc = np.array([geo.inner(v, b) for b in basis])
    normal = _split_directions(basis, vc, rng)
    full = np.column_stack([vc, normal]) if normal.shape[1] else vc[:, None]
    T = _hessian_tensor(geo, basis, full, r, v, cfg.h2)
    q = geo.exp(r * v)
    gdot = geo.project(q, (geo.embed(geo.exp((r + cfg.h) * v)) - geo.embed(geo.exp((r - cfg.h) * v))) / (2 * cfg.h))
    gdot = gdot / geo.norm(gdot)
    prof = spec.curvature
    params = f"{spec.name} r={r:.6g}"
    out = []

    m = normal.shape[1]
    Tn = [[T[i + 1][j + 1] for j in range(m)] for i in range(m)]
    if m:
        R = np.array([[geo.inner(Tn[i][j], gdot) for j in range(m)] for i in range(m)])
        ev = dense.sym_eig(dense.sym(R))[0]
        lo_est, hi_est = float(ev[0]), float(ev[-1])
    else:
        lo_est = hi_est = 0.0
    lo, hi = cv.hess_exp_radial_bounds(prof, r)
    ok = lo_est >= lo - tol and hi_est <= hi + tol
    out.append(CheckResult("hess_radial", params, hi_est if hi_est > hi + tol or ok else lo_est,
                           hi if hi_est > hi + tol or ok else lo, ok,
                           note=f"range=[{lo_est:.10g}, {hi_est:.10g}] bounds=[{lo:.10g}, {hi:.10g}]",
                           extra={"lo_est": lo_est, "hi_est": hi_est, "lo": lo, "hi": hi}))

    Nn = [[Tn[i][j] - geo.inner(Tn[i][j], gdot) * gdot for j in range(m)] for i in range(m)]
    n_est = _diag_norm(geo, Nn, rng, cfg.probe_count, cfg.power_iters)
    n_bound = cv.hess_exp_normal_bound(prof, r)
    out.append(CheckResult("hess_normal", params, n_est, n_bound, n_est <= n_bound + tol))

    f_est = _diag_norm(geo, T, rng, cfg.probe_count, cfg.power_iters)
    f_bound = cv.hess_exp_full_bound(prof, r)
    out.append(CheckResult("hess_full", params, f_est, f_bound, f_est <= f_bound + tol, extra={"dim": d}))
    return out


# Flows ----------------------------------------------------------------------


def sphere_exp(p, v):
    u = v - (p @ v) * p
    t = np.linalg.norm(u)
    if t == 0.0:
        return p.copy()
    return math.cos(t) * p + math.sin(t) * u / t


def sphere_projection(p, v):
    u = v - (p @ v) * p
    y = p + u
    return y / np.linalg.norm(y)


def so_exp(B, V):
    return B @ expm(dense.skew(B.T @ V))


def cayley_so(B, V):
    """B (I - W/2)^-1 (I + W/2) with W = skew(B^T V)."""
    W = dense.skew(B.T @ V)
    eye = np.eye(B.shape[0])
    return B @ dense.solve(eye - 0.5 * W, eye + 0.5 * W)


def flow_defect(retraction, p, v, t, s, h=1e-5):
    """| d/dtau R(p, tau v) at t+s  -  d/dtau R(x_t, tau x_t') at s | with velocities by central differences."""

    def vel(base, direction, tau):
        return (retraction(base, (tau + h) * direction) - retraction(base, (tau - h) * direction)) / (2.0 * h)

    xt = retraction(p, t * v)
    vt = vel(p, v, t)
    return dense.fro(vel(p, v, t + s) - vel(xt, vt, s))


def flow_checks(seed=0, t=0.7, s=0.5, tol_flow=1e-6, tol_generic=1e-3):
    """Exponentials should restart consistently; Cayley and projection should not."""
    rng = np.random.default_rng(seed)
    p = rng.standard_normal(3)
    p /= np.linalg.norm(p)
    v = rng.standard_normal(3)
    v -= (p @ v) * p
    v *= 1.3 / np.linalg.norm(v)
    B = SpecialOrthogonal(3).random_base(rng)
    V = B @ frame_skew(rng.standard_normal((3, 3)))
    params = f"t={t} s={s}"
    out = []
    for name, ret, x, d, expect_flow in (
        ("flow_sphere_exp", sphere_exp, p, v, True),
        ("flow_so3_exp", so_exp, B, V, True),
        ("flow_so3_cayley", cayley_so, B, V, False),
        ("flow_sphere_projection", sphere_projection, p, v, False),
    ):
        dfc = flow_defect(ret, x, d, t, s)
        if expect_flow:
            out.append(CheckResult(name, params, dfc, tol_flow, dfc <= tol_flow, note="expect flow"))
        else:
            out.append(CheckResult(name, params, dfc, tol_generic, dfc > tol_generic, note="expect no flow (defect > bound)"))
    return out


# Stiefel / Grassmann formulas -----------------------------------------------


def _complete_rotation(U, rng):
    n, k = U.shape
    Q, _ = dense.qr(np.hstack([U, rng.standard_normal((n, n - k))]))
    Q[:, :k] = U
    if dense.det(Q) < 0.0:
        Q[:, -1] = -Q[:, -1]
    return Q


def stiefel_qr_exp(U, D):
    """Stiefel geodesic (canonical metric) from the 2k x 2k formula; None if rank deficient."""
    n, k = U.shape
    S = dense.skew(U.T @ D)
    Cperp = D - U @ (U.T @ D)
    if not np.any(Cperp) and not np.any(S):
        return U.copy()
    Qc, Rc = dense.qr(Cperp)
    if np.min(np.abs(np.diag(Rc))) <= 1e-10 * max(1.0, dense.fro(Cperp)):
        return None
    block = np.zeros((2 * k, 2 * k))
    block[:k, :k] = S
    block[:k, k:] = -Rc.T
    block[k:, :k] = Rc
    return np.hstack([U, Qc]) @ expm(block)[:, :k]


def stiefel_formula_crosscheck(U, C, cfg: FDConfig = FDConfig(), tol=1e-9):
    """Compare the lifted Stiefel trivialisation with the QR-reduced closed form.

    ``C`` is projected to the tangent space at ``U`` first.
    """
    U = np.asarray(U, dtype=np.float64)
    n, k = U.shape
    D = U @ dense.skew(U.T @ C) + (C - U @ (U.T @ C))
    ref = stiefel_qr_exp(U, D)
    params = f"Stiefel({n},{k})"
    if ref is None:
        return CheckResult("stiefel_formula", params, math.nan, tol, True, note="skipped: (I - UU^T)C is rank deficient",
                           skipped=True)
    rng = np.random.default_rng(cfg.seed)
    Ut = _complete_rotation(U, rng)
    spec = Stiefel(n, k)
    got = spec.triv(Ut, spec.tangent_to_raw(Ut, D))
    err = dense.fro(got - ref)
    return CheckResult("stiefel_formula", params, err, tol, err <= tol)


def principal_angles(Y1, Y2):
    """Principal angles between the column spans of orthonormal ``Y1`` and ``Y2``."""
    M = Y2 - Y1 @ (Y1.T @ Y2)
    s = np.clip(dense.svd(M)[1], 0.0, 1.0)
    return np.arcsin(s)


def grassmann_svd_exp(Y, D):
    """(Y V cos(S) + W sin(S)) V^T where D = W S V^T is horizontal at Y."""
    W, s, V = dense.svd(D)
    return (Y @ V) * np.cos(s) @ V.T + (W * np.sin(s)) @ V.T


def grassmann_formula_crosscheck(n, k, seed=0, scale=1.0, tol=1e-9):
    spec = Grassmannian(n, k)
    rng = np.random.default_rng(seed)
    base = spec.random_base(rng)
    raw = spec.random_raw(rng, scale)
    Y = base[:, :k]
    D = base @ np.vstack([np.zeros((k, k)), raw[k:]])
    got = spec.triv(base, raw)
    ref = grassmann_svd_exp(Y, D)
    err = float(np.max(principal_angles(got, ref)))
    return CheckResult("grassmann_formula", f"{spec.name} scale={scale}", err, tol, err <= tol)


def submersion_check(n=6, k=2, seed=0, points=20, tol=1e-10):
    """Project the SO(n) geodesic with horizontal initial data to k columns; compare with the Stiefel geodesic."""
    rng = np.random.default_rng(seed)
    B = SpecialOrthogonal(n).random_base(rng)
    S = frame_skew(rng.standard_normal((k, k)))
    A = rng.standard_normal((n - k, k))
    Om = np.zeros((n, n))
    Om[:k, :k] = S
    Om[k:, :k] = A
    Om[:k, k:] = -A.T
    Om *= 1.5 / dense.fro(Om)
    so = SpecialOrthogonal(n)
    raw = np.tril(Om, -1)
    U = B[:, :k]
    D = (B @ Om)[:, :k]
    worst = 0.0
    for t in np.linspace(0.0, 1.0, points):
        lifted = so.triv(B, t * raw)[:, :k]
        ref = stiefel_qr_exp(U, t * D)
        worst = max(worst, dense.fro(lifted - ref))
    return CheckResult("submersion", f"SO({n})->Stiefel({n},{k}) points={points}", worst, tol, worst <= tol)


# Grid -----------------------------------------------------------------------


def grid_manifolds():
    return [SpecialOrthogonal(2), SpecialOrthogonal(4), Grassmannian(5, 2), Sphere(3)]


def _radii(limit):
    return [0.1, 0.5, 1.0, min(2.0, 0.9 * limit)]


CHECK_NAMES = ("rauch", "hess", "flow", "stiefel", "grassmann", "submersion")


def _grid_tasks(checks, cfg, rauch_tol, hess_tol):
    tasks = []
    for idx, spec in enumerate(grid_manifolds()):
        prof = spec.curvature
        if "rauch" in checks:
            for r in _radii(cv.pi_kappa(prof.Delta)):
                tasks.append(("rauch", spec, idx, r))
        if "hess" in checks:
            for r in _radii(cv.pi_kappa(0.5 * (prof.Delta + prof.delta))):
                tasks.append(("hess", spec, idx, r))

    def run_one(task):
        kind, spec, idx, r = task
        rng = np.random.default_rng([cfg.seed, idx])
        base = spec.random_base(rng)
        v, _, _ = _unit_direction(spec, base, rng)
        if kind == "rauch":
            return [rauch_check(spec, base, v, r, cfg, rauch_tol)]
        return hess_exp_check(spec, base, v, r, cfg, hess_tol)

    jobs = [lambda t=t: run_one(t) for t in tasks]
    if "flow" in checks:
        jobs.append(lambda: flow_checks(cfg.seed))
    if "stiefel" in checks:
        def stiefel_jobs():
            rng = np.random.default_rng(cfg.seed)
            U = Stiefel(6, 2).random_base(rng)[:, :2]
            out = [stiefel_formula_crosscheck(U, rng.standard_normal((6, 2)), cfg)]
            out.append(stiefel_formula_crosscheck(U, np.zeros((6, 2)), cfg))
            bad = np.outer(rng.standard_normal(6), np.ones(2))
            out.append(stiefel_formula_crosscheck(U, bad, cfg))
            return out
        jobs.append(stiefel_jobs)
    if "grassmann" in checks:
        jobs.append(lambda: [grassmann_formula_crosscheck(5, 2, cfg.seed), grassmann_formula_crosscheck(7, 3, cfg.seed + 1)])
    if "submersion" in checks:
        jobs.append(lambda: [submersion_check(6, 2, cfg.seed)])
    return jobs


def _threads():
    raw = os.environ.get("TRIVOPT_THREADS", "").strip()
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"TRIVOPT_THREADS must be an integer, got {raw!r}") from None
    return os.cpu_count() or 1


def run_grid(checks=CHECK_NAMES, cfg: FDConfig = FDConfig(), rauch_tol=RAUCH_TOL, hess_tol=HESS_TOL, threads=None):
    """Run the named check families; results come back in a fixed order."""
    unknown = set(checks) - set(CHECK_NAMES)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}; choose from {list(CHECK_NAMES)}")
    jobs = _grid_tasks(set(checks), cfg, rauch_tol, hess_tol)
    workers = threads or _threads()
    if workers <= 1:
        chunks = [job() for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(lambda job: job(), jobs))
    return [res for chunk in chunks for res in chunk]


def format_report(results):
    return "\n".join(r.line() for r in results) + "\n"
