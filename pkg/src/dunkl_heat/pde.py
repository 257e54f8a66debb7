"""Explicit finite-volume solver for the Dunkl heat equation in the plane.

The plane is covered by rings r_i = (i + 1/2) dr.  Ring i carries
2 m q_i equally spaced angles (j + 1/2) dtheta_i with dtheta_i = pi/(m q_i),
so the reflection walls (multiples of pi/m) fall on cell faces and every
reflection permutes the nodes of a ring.  q_i = q 2^b grows with the radius
so that r_i dtheta_i stays comparable to dr.

In polar form, with 2 gamma = sum_R k(alpha) and p = 1 + 2 gamma,

    Delta_k u = r^-p (r^p u_r)_r + r^-2 W^-1 (W u_theta)_theta
                - sum_R k(alpha) (u - u o sigma_alpha) / (2 r^2 cos^2(theta - phi_alpha)),

where W(theta) = prod_{R+} |cos(theta - phi_alpha)|^(2 k(alpha)) and phi_alpha
is the polar angle of alpha.  Both divergence terms are discretized in
conservative form with exact cell masses, and the difference term uses the
exact node permutation.  Rings of different angular resolution exchange
radial fluxes through periodic cubic interpolation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.special import roots_jacobi

from .errors import CFLError, ConfigurationError, InvalidParameterError, ResolutionError
from .rootsys import RootSystem

WALL_TOL = 1e-12
# the cubic ring-interface interpolation can undershoot by ~1e-9 of the peak on sharp data
POSITIVITY_RTOL = 1e-6
DEFAULT_CFL = 0.9
BAND_REGION = 1e-3
TRIG_NODES = 16


def canonical_roots(m: int) -> np.ndarray:
    """sqrt(2) (sin(pi j/m), cos(pi j/m)), j < 2m; for m = 2 this is the product layout."""
    j = np.arange(2 * m)
    return np.sqrt(2.0) * np.stack([np.sin(np.pi * j / m), np.cos(np.pi * j / m)], axis=1)


@dataclass(frozen=True)
class PolarGrid:
    m: int
    q: int
    n_r: int
    dr: float
    aspect: float | None
    ring_q: np.ndarray = field(repr=False)
    ring_start: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    theta: np.ndarray = field(repr=False)
    ring: np.ndarray = field(repr=False)
    dtheta: np.ndarray = field(repr=False)
    roots: np.ndarray = field(repr=False)
    reflection_map: np.ndarray = field(repr=False)

    @property
    def radii(self) -> np.ndarray:
        return (np.arange(self.n_r) + 0.5) * self.dr

    @property
    def R_max(self) -> float:
        """Radius of the zero ghost ring (Dirichlet boundary)."""
        return (self.n_r + 0.5) * self.dr

    @property
    def n_nodes(self) -> int:
        return int(self.r.size)

    @property
    def points(self) -> np.ndarray:
        return np.stack([self.r * np.cos(self.theta), self.r * np.sin(self.theta)], axis=1)

    @property
    def root_angles(self) -> np.ndarray:
        return np.arctan2(self.roots[:, 1], self.roots[:, 0])

    def nearest_node(self, x) -> int:
        return int(np.argmin(np.sum((self.points - np.asarray(x, dtype=float)) ** 2, axis=1)))

    def ring_slice(self, i: int) -> slice:
        return slice(int(self.ring_start[i]), int(self.ring_start[i + 1]))


def _ring_levels(m, q, n_r, dr, aspect):
    radii = (np.arange(n_r) + 0.5) * dr
    if aspect is None:
        return np.full(n_r, q, dtype=int)
    levels = np.zeros(n_r, dtype=int)
    for i, ri in enumerate(radii):
        b = 0
        while ri * np.pi / (m * q * 2**b) > aspect * dr:
            b += 1
        levels[i] = b
    # refinement never decreases outward
    return q * 2 ** np.maximum.accumulate(levels)


def build_grid(m: int, q: int, n_r: int, R_max: float, aspect: float | None = 1.0) -> PolarGrid:
    """Polar grid closed under the dihedral group of order 2m.

    R_max is the radius of the zero boundary ring, so dr = R_max / (n_r + 1/2).
    With aspect=None every ring has 2 m q nodes; otherwise ring angular counts
    double as needed to keep r dtheta <= aspect * dr.
    """
    if m < 2 or q < 1 or n_r < 16:
        raise InvalidParameterError(f"need m >= 2, q >= 1, n_r >= 16 (got m={m}, q={q}, n_r={n_r})")
    if not R_max > 0:
        raise InvalidParameterError("R_max must be positive")
    dr = R_max / (n_r + 0.5)
    ring_q = _ring_levels(m, q, n_r, dr, aspect)
    counts = 2 * m * ring_q
    ring_start = np.concatenate([[0], np.cumsum(counts)])
    ring = np.repeat(np.arange(n_r), counts)
    local = np.arange(ring_start[-1]) - ring_start[ring]
    dtheta = np.pi / (m * ring_q[ring])
    theta = (local + 0.5) * dtheta
    r = (ring + 0.5) * dr
    roots = canonical_roots(m)

    # walls are perpendicular to the roots: angle phi + pi/2, a multiple of pi/m
    wall = np.arctan2(roots[:, 1], roots[:, 0]) + np.pi / 2
    wall_steps = np.rint(wall / (np.pi / m)).astype(int)
    if np.max(np.abs(wall - wall_steps * np.pi / m)) > 1e-12:
        raise ConfigurationError("root walls are not multiples of pi/m")
    wall_dist = np.abs(np.sin(theta[None, :] - wall[:, None]))
    if np.min(wall_dist) * 1 < WALL_TOL:
        raise ConfigurationError("a grid node lies on a reflection wall")

    n_ring = counts[ring]
    refl = np.empty((len(roots), r.size), dtype=np.int64)
    for a, L in enumerate(wall_steps):
        # theta -> 2 psi - theta with psi = L pi/m = (L q_i) dtheta_i
        jj = np.mod(2 * L * ring_q[ring] - local - 1, n_ring)
        refl[a] = ring_start[ring] + jj
    grid = PolarGrid(int(m), int(q), int(n_r), float(dr), aspect, ring_q, ring_start, r, theta,
                     ring, dtheta, roots, refl)
    verify_reflection_table(grid)
    return grid


def verify_reflection_table(grid: PolarGrid, tol: float = 1e-9) -> None:
    """Check that each node map is the geometric reflection and an involution."""
    pts = grid.points
    idx = np.arange(grid.n_nodes)
    for a, alpha in enumerate(grid.roots):
        image = pts - (pts @ alpha)[:, None] * alpha[None, :]  # |alpha|^2 = 2
        err = np.max(np.abs(image - pts[grid.reflection_map[a]]))
        if err > tol * (1.0 + grid.R_max):
            raise ConfigurationError(f"reflection table for root {a} is off by {err:.3g}")
        if not np.array_equal(grid.reflection_map[a][grid.reflection_map[a]], idx):
            raise ConfigurationError(f"reflection table for root {a} is not an involution")


def _lagrange_weights(frac):
    """Cubic Lagrange weights on offsets -1, 0, 1, 2 at fractional position frac in [0, 1)."""
    f = np.asarray(frac, dtype=float)
    return np.stack([-f * (f - 1) * (f - 2) / 6, (f + 1) * (f - 1) * (f - 2) / 2,
                     -(f + 1) * f * (f - 2) / 2, (f + 1) * f * (f - 1) / 6], axis=-1)


def _ring_interp(grid: PolarGrid, i: int, theta):
    """(columns, weights) interpolating ring i at angles theta.

    Small rings (at most TRIG_NODES nodes, i.e. near the origin) use the
    periodic trigonometric interpolant, which is exact on the low Fourier
    modes of functions that are smooth at the origin; larger rings use local
    cubic Lagrange.  Both are exact at nodes and commute with reflections.
    """
    n = 2 * grid.m * int(grid.ring_q[i])
    dth = 2 * np.pi / n
    theta = np.mod(np.asarray(theta, dtype=float), 2 * np.pi)
    if n <= TRIG_NODES:
        nodes = (np.arange(n) + 0.5) * dth
        dx = theta[:, None] - nodes[None, :]
        half = np.sin(dx / 2)
        near = np.abs(half) < 1e-12
        safe = np.where(near, 1.0, half)
        w = np.where(near, 1.0, np.sin(n * dx / 2) * np.cos(dx / 2) / (n * safe))
        cols = np.broadcast_to(grid.ring_start[i] + np.arange(n), w.shape)
        return cols, w
    s = theta / dth - 0.5
    j0 = np.floor(s + 1e-12).astype(int)
    frac = np.clip(s - j0, 0.0, None)
    exact = frac < 1e-9
    w = _lagrange_weights(np.where(exact, 0.0, frac))
    w[exact] = [0.0, 1.0, 0.0, 0.0]
    cols = grid.ring_start[i] + np.mod(j0[:, None] + np.arange(-1, 3)[None, :], n)
    return cols, w


def multiplicities_for(grid: PolarGrid, rs: RootSystem | None = None, k=None) -> np.ndarray:
    """Per-root multiplicities on the grid's canonical roots, from a root system or a scalar/array k."""
    if rs is not None:
        if rs.dim != 2:
            raise InvalidParameterError("the polar solver is two-dimensional")
        out = np.empty(len(grid.roots))
        for a, alpha in enumerate(grid.roots):
            hit = np.where(np.max(np.abs(rs.roots - alpha), axis=1) < 1e-9)[0]
            if hit.size != 1:
                raise ConfigurationError("root system does not match the grid's dihedral layout")
            out[a] = rs.mult[hit[0]]
        return out
    k = np.broadcast_to(np.asarray(k, dtype=float), (len(grid.roots),)).copy()
    if np.any(k < 0):
        raise InvalidParameterError("multiplicities must be nonnegative")
    return k


def _angular_weight(theta, phis, ks):
    """W(theta) = prod over positive roots of |cos(theta - phi)|^(2k)."""
    out = np.ones_like(np.asarray(theta, dtype=float))
    for phi, k in zip(phis, ks):
        if k:
            out = out * np.abs(np.cos(theta - phi)) ** (2 * k)
    return out


@dataclass
class HeatState:
    u: np.ndarray
    time: float
    mass: float


class HeatSolver:
    """Sparse Dunkl heat operator on a polar grid with explicit RK4 stepping."""

    def __init__(self, grid: PolarGrid, mult, positivity_rtol: float = POSITIVITY_RTOL):
        self.grid = grid
        self.positivity_rtol = positivity_rtol
        self.mult = np.asarray(mult, dtype=float)
        if self.mult.shape != (len(grid.roots),):
            raise InvalidParameterError("need one multiplicity per root")
        m = grid.m
        # roots j and j + m are negatives; keep j < m as the positive half
        self._pos_phi = grid.root_angles[:m]
        self._pos_k = self.mult[:m]
        self.gamma = 0.5 * float(np.sum(self.mult))
        self.p = 1.0 + 2.0 * self.gamma
        # nodes sit at the r^p-weighted radial centroid of their ring cell, so that
        # nodal values are second-order cell averages even on the innermost ring
        lo = np.arange(grid.n_r) * grid.dr
        hi = lo + grid.dr
        pp = self.p
        self.ring_radii = (pp + 1) / (pp + 2) * (hi ** (pp + 2) - lo ** (pp + 2)) / (hi ** (pp + 1) - lo ** (pp + 1))
        self.node_r = self.ring_radii[grid.ring]
        # r^-2 in the angular and reflection terms becomes <1/r>/rho with <.> the r^p-weighted
        # ring average: exact for the linear modes that dominate near the origin
        inv_r2 = (pp + 1) / pp * (hi**pp - lo**pp) / (hi ** (pp + 1) - lo ** (pp + 1)) / self.ring_radii
        self.node_inv_r2 = inv_r2[grid.ring]
        self.points = np.stack([self.node_r * np.cos(grid.theta), self.node_r * np.sin(grid.theta)], axis=1)
        self.L = self._assemble()
        diag = -self.L.diagonal()
        self.max_rate = float(diag.max())
        self.dt_max = DEFAULT_CFL / self.max_rate
        self.node_mass = self._node_mass()

    # -- assembly -----------------------------------------------------------
    def _cell_integrals(self, lo, hi, root=None):
        """Integrals of W (and of W / cos(theta - phi_root) if root is given) over [lo, hi].

        Walls sit on cell faces, where W vanishes like |theta - face|^(2k);
        those endpoint powers go into a Gauss-Jacobi weight.
        """
        g = self.grid
        walls = np.mod(self._pos_phi + np.pi / 2, np.pi)

        def face_power(f):
            e = np.zeros_like(f)
            for b, (psi, k) in enumerate(zip(walls, self._pos_k)):
                on = np.abs(np.sin(f - psi)) < 1e-9
                e = e + np.where(on, 2 * k, 0.0)
                if root is not None and b == root % g.m:
                    e = e - np.where(on, 1.0, 0.0)
            return e

        e_lo, e_hi = face_power(lo), face_power(hi)
        out = np.empty(lo.shape)
        keys = np.stack([np.round(e_lo, 12), np.round(e_hi, 12)], axis=1)
        for key in np.unique(keys, axis=0):
            sel = np.all(keys == key, axis=1)
            b_lo, b_hi = key
            x, w = roots_jacobi(24, b_hi, b_lo)
            a, c = lo[sel][:, None], hi[sel][:, None]
            half = 0.5 * (c - a)
            th = a + half * (x[None, :] + 1)
            f = _angular_weight(th, self._pos_phi, self._pos_k)
            if root is not None:
                f = f / np.cos(th - g.root_angles[root])
            # divide out the Jacobi weight, written in theta
            f = f / ((th - a) ** b_lo * (c - th) ** b_hi)
            out[sel] = (f @ w) * half[:, 0] ** (1 + b_lo + b_hi)
        return out

    def _node_mass(self):
        g = self.grid
        i = g.ring
        lo = i * g.dr
        hi = (i + 1) * g.dr
        M = (hi ** (self.p + 1) - lo ** (self.p + 1)) / (self.p + 1)
        return 2.0**self.gamma * M * self._Wbar * g.dtheta

    def _assemble(self):
        g = self.grid
        n = g.n_nodes
        rows, cols, vals = [], [], []

        def add(rr, cc, vv):
            rows.append(np.asarray(rr).ravel())
            cols.append(np.asarray(cc).ravel())
            vals.append(np.asarray(vv, dtype=float).ravel())

        idx = np.arange(n)
        lo_f = g.theta - 0.5 * g.dtheta
        hi_f = g.theta + 0.5 * g.dtheta
        self._Wbar = self._cell_integrals(lo_f, hi_f) / g.dtheta
        # angular divergence term
        W_lo = _angular_weight(g.theta - 0.5 * g.dtheta, self._pos_phi, self._pos_k)
        W_hi = _angular_weight(g.theta + 0.5 * g.dtheta, self._pos_phi, self._pos_k)
        ring_n = 2 * g.m * g.ring_q[g.ring]
        local = idx - g.ring_start[g.ring]
        nxt = g.ring_start[g.ring] + np.mod(local + 1, ring_n)
        prv = g.ring_start[g.ring] + np.mod(local - 1, ring_n)
        scale = self.node_inv_r2 / (self._Wbar * g.dtheta**2)
        add(idx, nxt, W_hi * scale)
        add(idx, prv, W_lo * scale)
        add(idx, idx, -(W_hi + W_lo) * scale)
        # reflection difference terms, summed over all of R.  (u - u o sigma)/cos is
        # smooth across the wall, so the remaining 1/cos is averaged against W.
        for a, k in enumerate(self.mult):
            if k == 0:
                continue
            avg = self._cell_integrals(lo_f, hi_f, root=a) / (self._Wbar * g.dtheta)
            c = k * avg * self.node_inv_r2 / (2.0 * np.cos(g.theta - g.root_angles[a]))
            add(idx, idx, -c)
            add(idx, g.reflection_map[a], c)
        # radial divergence term as face fluxes C (u_outer - u_inner), C = 2^gamma face^p W_bar dtheta / gap.
        # Where the outer ring is finer, each outer node sees the inner ring interpolated to
        # its angle, and each inner cell collects the fluxes of the outer cells it covers
        # (the W_bar dtheta of those children add up to its own), so dw-mass is conserved.
        mass = self._node_mass()
        dr, p = g.dr, self.p
        for i in range(g.n_r):
            inner = idx[g.ring_slice(i)]
            face = (i + 1) * dr
            if i == g.n_r - 1:
                gap = g.R_max - self.ring_radii[i]
                C = 2.0**self.gamma * face**p * self._Wbar[inner] * g.dtheta[inner] / gap
                add(inner, inner, -C / mass[inner])  # zero ghost ring
                continue
            outer = idx[g.ring_slice(i + 1)]
            gap = self.ring_radii[i + 1] - self.ring_radii[i]
            C = 2.0**self.gamma * face**p * self._Wbar[outer] * g.dtheta[outer] / gap
            add(outer, outer, -C / mass[outer])
            if g.ring_q[i + 1] == g.ring_q[i]:
                add(outer, inner, C / mass[outer])
                add(inner, outer, C / mass[inner])
                add(inner, inner, -C / mass[inner])
                continue
            ratio = g.ring_q[i + 1] // g.ring_q[i]
            parent = inner[(outer - outer[0]) // ratio]
            cc, ww = _ring_interp(g, i, g.theta[outer])
            cw = C[:, None] * ww
            add(np.repeat(outer, cc.shape[1]), cc, cw / mass[outer][:, None])
            add(parent, outer, C / mass[parent])
            add(np.repeat(parent, cc.shape[1]), cc, -cw / mass[parent][:, None])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        return sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))

    # -- state --------------------------------------------------------------
    def mass(self, u) -> float:
        """Discrete integral of u against dw."""
        return float(self.node_mass @ u)

    def boundary_flux(self, u) -> float:
        """Rate at which dw-mass leaves through the zero outer ring."""
        g = self.grid
        sl = g.ring_slice(g.n_r - 1)
        face = g.n_r * g.dr
        return float(2.0**self.gamma * face**self.p / g.dr * np.sum(self._Wbar[sl] * g.dtheta[sl] * u[sl]))

    def state(self, u, time=0.0) -> HeatState:
        u = np.asarray(u, dtype=float)
        return HeatState(u, float(time), self.mass(u))

    def sample_function(self, f) -> np.ndarray:
        return np.asarray(f(self.points), dtype=float)

    def step(self, state: HeatState, dt: float) -> HeatState:
        if dt > self.dt_max * (1 + 1e-12):
            raise CFLError(f"dt={dt:.3g} exceeds the stability bound {self.dt_max:.3g}", self.dt_max)
        u = state.u
        L = self.L
        k1 = L @ u
        k2 = L @ (u + 0.5 * dt * k1)
        k3 = L @ (u + 0.5 * dt * k2)
        k4 = L @ (u + dt * k3)
        new = u + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        scale = np.max(np.abs(new))
        if new.min() < -self.positivity_rtol * scale:
            raise CFLError(f"positivity lost (min {new.min():.3g} vs max {scale:.3g})", dt / 2)
        return HeatState(new, state.time + dt, self.mass(new))

    def evolve(self, state: HeatState, t_end: float, dt: float | None = None,
               snapshot_times=(), snapshot_path=None) -> HeatState:
        """Step from state.time to t_end with equal steps no larger than dt (default dt_max)."""
        span = t_end - state.time
        if span < 0:
            raise InvalidParameterError("t_end precedes the current time")
        if span == 0:
            return state
        dt = self.dt_max if dt is None else min(dt, self.dt_max)
        n = int(np.ceil(span / dt - 1e-9))
        h = span / n
        pending = sorted(t for t in snapshot_times if state.time <= t <= t_end)
        writer = None
        fh = None
        if snapshot_path is not None and pending:
            fh = open(snapshot_path, "w", newline="")
            writer = csv.writer(fh)
            writer.writerow(["time", "r", "theta", "u"])
        try:
            for s in range(n):
                state = self.step(state, h)
                while pending and pending[0] <= state.time + 0.5 * h:
                    if writer is not None:
                        self._write_snapshot(writer, state)
                    pending.pop(0)
        finally:
            if fh is not None:
                fh.close()
        state.time = float(t_end)
        return state

    def _write_snapshot(self, writer, state):
        g = self.grid
        for rr, th, uu in zip(self.node_r, g.theta, state.u):
            writer.writerow([f"{state.time:.10g}", f"{rr:.10g}", f"{th:.10g}", f"{uu:.17g}"])

    # -- evaluation off the nodes -------------------------------------------
    def sample(self, u, points) -> np.ndarray:
        """Cubic interpolation of a nodal field at arbitrary points (zero beyond R_max).

        Radially the rings are continued through the origin (ring i at angle
        theta + pi sits at radius -rho_i) and by the zero ring at R_max.
        """
        g = self.grid
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rad = np.hypot(pts[:, 0], pts[:, 1])
        ang = np.arctan2(pts[:, 1], pts[:, 0])
        ext = np.concatenate([-self.ring_radii[:2][::-1], self.ring_radii, [g.R_max, g.R_max + g.dr]])
        # ext[e] is ring e - 2; rings >= n_r are zero
        e0 = np.clip(np.searchsorted(ext, rad, side="right") - 1, 1, len(ext) - 3)
        stencil = e0[:, None] + np.arange(-1, 3)[None, :]
        rr = ext[stencil]
        wr = np.ones_like(rr)
        for a in range(4):
            for b in range(4):
                if a != b:
                    wr[:, a] *= (rad - rr[:, b]) / (rr[:, a] - rr[:, b])
        out = np.zeros(len(pts))
        for a in range(4):
            ring_idx = stencil[:, a] - 2
            vals = np.zeros(len(pts))
            for i in np.unique(ring_idx):
                if i >= g.n_r:
                    continue
                sel = ring_idx == i
                ring, th = (-1 - i, ang[sel] + np.pi) if i < 0 else (i, ang[sel])
                cc, ww = _ring_interp(g, ring, th)
                vals[sel] = np.sum(u[cc] * ww, axis=1)
            out += wr[:, a] * vals
        out[rad > g.R_max] = 0.0
        return out


def step(solver: HeatSolver, state: HeatState, dt: float) -> HeatState:
    return solver.step(state, dt)


def initial_surrogate(solver: HeatSolver, x0, t_init: float) -> np.ndarray:
    """Short-time kernel surrogate exp(-|x-x0|^2/4t) / sqrt(w(x)), normalized to unit dw-mass.

    Dividing by sqrt(w) matches the leading short-time behavior of a kernel
    that is symmetric with respect to dw.  The support is cut at the wall
    distance of x0, where the Gaussian is negligible anyway.
    """
    g = solver.grid
    x0 = np.asarray(x0, dtype=float)
    pts = solver.points
    d2 = np.sum((pts - x0) ** 2, axis=1)
    proj = np.abs(pts @ g.roots[: g.m].T)
    wall0 = np.min(np.abs(g.roots[: g.m] @ x0)) / np.sqrt(2.0)
    if wall0**2 < 28 * t_init:  # surrogate cut where it is below ~1e-3 of its peak
        raise ResolutionError(f"x0 is {wall0:.3g} from a wall; t_init={t_init:.3g} needs at least {np.sqrt(28 * t_init):.3g}")
    if 2 * t_init < g.dr**2:
        raise ResolutionError(f"t_init={t_init:.3g} is not resolved by dr={g.dr:.3g} (need 2 t_init >= dr^2)")
    logw = np.sum(2 * solver._pos_k[None, :] * np.log(np.maximum(proj, 1e-300)), axis=1)
    u = np.where(d2 < wall0**2, np.exp(-d2 / (4 * t_init) - 0.5 * logw), 0.0)
    mass = solver.mass(u)
    if not mass > 0:
        raise ResolutionError("initial surrogate has no mass on the grid; t_init is too small for the mesh")
    return u / mass


@dataclass
class KernelApproximation:
    state: HeatState
    x0: np.ndarray
    t_init: float
    band: float | None
    band_parts: dict
    solver: HeatSolver

    def values(self, points):
        return self.solver.sample(self.state.u, points)


def _run_kernel(solver, x0, t_target, t_init, dt=None):
    u0 = initial_surrogate(solver, x0, t_init)
    st = solver.state(u0, t_init)
    return solver.evolve(st, t_target, dt)


def approximate_kernel(solver: HeatSolver, x0, t_target: float, t_init: float,
                       band: bool = True, max_band: float = 0.25) -> KernelApproximation:
    """u ~ h_{t_target}(x0, .) on the grid, with an error band from halving t_init and the mesh.

    The surrogate's error is first order in t_init, so the returned field is
    the Richardson combination 2 u(t_init/2) - u(t_init).  The band is the
    larger of the two unextrapolated differences (t_init halved, mesh halved),
    measured relative to u over the nodes where u exceeds 1e-3 of its maximum.
    x0 is moved to the nearest node.
    """
    if not 0 < t_init < t_target:
        raise InvalidParameterError("need 0 < t_init < t_target")
    g = solver.grid
    if t_init < g.dr**2:
        raise ResolutionError(f"t_init={t_init:.3g} is too small for dr={g.dr:.3g} (need t_init >= dr^2)")
    node = int(np.argmin(np.sum((solver.points - np.asarray(x0, dtype=float)) ** 2, axis=1)))
    x0n = solver.points[node]
    coarse = _run_kernel(solver, x0n, t_target, t_init)
    half = _run_kernel(solver, x0n, t_target, t_init / 2)
    u = 2.0 * half.u - coarse.u
    state = solver.state(u, t_target)
    region = u > BAND_REGION * u.max()
    parts = {"t_init": float(np.max(np.abs(half.u[region] - coarse.u[region]) / u[region]))}
    width = None
    if band:
        fine_grid = build_grid(g.m, 2 * g.q if g.aspect is None else g.q, 2 * g.n_r, g.R_max, g.aspect)
        fine = HeatSolver(fine_grid, solver.mult, solver.positivity_rtol)
        st_f = _run_kernel(fine, x0n, t_target, t_init)
        uf = fine.sample(st_f.u, solver.points[region])
        parts["mesh"] = float(np.max(np.abs(uf - coarse.u[region]) / u[region]))
        width = max(parts.values())
        if width > max_band:
            raise ResolutionError(f"kernel error band {width:.3g} exceeds {max_band}")
    return KernelApproximation(state, x0n, t_init, width, parts, solver)


class PDEKernel:
    """Grid-backed h_t(x0, y) for one source point and one time."""

    backend = "pde-grid"

    def __init__(self, rs: RootSystem, approx: KernelApproximation, time_tol: float = 1e-12):
        self.rs = rs
        self.approx = approx
        self.time_tol = time_tol

    def h(self, x, y, t):
        if abs(t - self.approx.state.time) > self.time_tol * max(1.0, t):
            raise InvalidParameterError("pde-grid kernel is only available at its target time")
        if np.max(np.abs(np.asarray(x, dtype=float) - self.approx.x0)) > 1e-9:
            raise InvalidParameterError("pde-grid kernel is only available at its source point")
        y = np.asarray(y, dtype=float)
        out = self.approx.values(y.reshape(-1, 2)).reshape(y.shape[:-1])
        return float(out) if out.ndim == 0 else out
