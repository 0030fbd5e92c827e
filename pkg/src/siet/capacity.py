"""Channel capacity and the capacity-energy tradeoff curve.

The workhorse is an alternating-maximization (Blahut-Arimoto) solver for the
tilted objective I(X;Y) + mu * E[beta(X)], with two safeguarded accelerations
for fine input grids: an adaptive overrelaxation probe, and a pairwise
mass-transfer step with exact line search that unsticks the multiplicative
update when the optimal support moves. Both accept a candidate only if it
improves the exact objective, so the achieved value is non-decreasing across
iterations and every iterate stays feasible.

The tradeoff curve C_beta(B) is traced by sweeping mu over a geometric ladder
and taking the upper concave hull of the achieved (B, C) points; concavity of
the true curve makes the hull a principled pruning step (any point below a
chord is dominated by mixing its endpoints).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelModel, InputDistribution
from .grid import GridFunction

LN2 = np.log(2.0)


class SolverError(RuntimeError):
    """Raised when an iteration budget is exhausted before convergence."""

    def __init__(self, message: str, residual_gap: float | None = None):
        super().__init__(message)
        self.residual_gap = residual_gap


class _ChannelOps:
    """Per-channel precomputations shared across many tilted solves."""

    def __init__(self, W: np.ndarray):
        self.W = W
        logW = np.where(W > 0, np.log(np.where(W > 0, W, 1.0)), 0.0)
        self.row_neg_entropy = np.einsum("ij,ij->i", W, logW)

    def divergences(self, p: np.ndarray) -> tuple[np.ndarray, float]:
        """Per-letter divergences D_i = D(W_i || q(p)) in nats, and I(p)."""
        q = p @ self.W
        logq = np.log(np.maximum(q, 1e-320))
        D = self.row_neg_entropy - self.W @ logq
        return D, float(p @ D)


def _capped_fill(weights: np.ndarray, cap: float) -> np.ndarray:
    """argmax_p sum p_i*(log w_i - log p_i) over {sum p = 1, 0 <= p <= cap}.

    The maximizer is p_i = min(cap, t * w_i) with t fixed by the mass
    constraint; the mass is monotone in t, solved by bisection.
    """
    lo, hi = 0.0, 2.0 / max(weights.sum(), 1e-300)
    while np.sum(np.minimum(cap, hi * weights)) < 1.0:
        hi *= 2.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if np.sum(np.minimum(cap, mid * weights)) < 1.0:
            lo = mid
        else:
            hi = mid
    p = np.minimum(cap, hi * weights)
    return p / p.sum()


@dataclass
class _TiltedResult:
    capacity_bits: float
    energy: float
    p: np.ndarray
    gap_bits: float
    iterations: int
    converged: bool


def _solve_tilted(ops: _ChannelOps, tilt: np.ndarray, tol: float, max_iter: int,
                  p0: np.ndarray | None = None, cap: float | None = None,
                  callback=None) -> _TiltedResult:
    """Maximize I(p)/ln2 + <p, tilt>/ln2 over the (optionally capped) simplex.

    tilt is in nats. Convergence: the envelope gap max_i(D_i + tilt_i) - obj
    (a true optimality bound for the uncapped problem; for the capped problem
    the analogous directional bound over feasible swaps is used).
    """
    nx = ops.W.shape[0]
    if cap is not None and cap * nx < 1.0 - 1e-12:
        raise ValueError("density cap below 1/n_x leaves no feasible distribution")
    p = np.full(nx, 1.0 / nx) if p0 is None else np.asarray(p0, dtype=float).copy()

    def objective(pv: np.ndarray):
        D, I = ops.divergences(pv)
        return D, I, I + float(pv @ tilt)

    def gap_at(pv, g, obj):
        if cap is None:
            return float(np.max(g) - obj)
        # steepest feasible swap: raise mass where below cap, remove where positive
        up = np.max(g[pv < cap - 1e-15]) if np.any(pv < cap - 1e-15) else -np.inf
        dn = np.min(g[pv > 1e-15])
        return float(max(up - dn, 0.0))

    D, I, obj = objective(p)
    gamma = 2.0
    converged = False
    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = D + tilt
        gap = gap_at(p, g, obj)
        if callback is not None:
            callback(it - 1, I / LN2)
        if gap < tol * LN2:
            converged = True
            break
        logp = np.log(np.maximum(p, 1e-320))
        step = g - np.max(g)
        if cap is None:
            ex = logp + step
            ex -= ex.max()
            plain = np.exp(ex)
            plain /= plain.sum()
        else:
            plain = _capped_fill(np.exp(logp + step - (logp + step).max()), cap)
        Dn, In, objn = objective(plain)
        nxt = (plain, Dn, In, objn)
        # overrelaxation probe, accepted only on strict improvement
        ex = logp + gamma * step
        ex -= ex.max()
        cand = np.exp(ex)
        cand /= cand.sum()
        if cap is not None:
            cand = _capped_fill(cand, cap)
        Dc, Ic, objc = objective(cand)
        if objc > nxt[3]:
            nxt = (cand, Dc, Ic, objc)
            gamma = min(gamma * 2.0, 1e5)
        else:
            gamma = max(gamma / 2.0, 1.0)
        # pairwise mass transfer with line search when multiplicative steps crawl
        if nxt[3] - obj < 0.05 * gap:
            fw = _pairwise_transfer(ops, tilt, p, g, cap, objective)
            if fw is not None and fw[3] > nxt[3]:
                nxt = fw
        if np.array_equal(nxt[0], p):
            break  # numerical fixed point; gap is the honest residual
        p, D, I, obj = nxt
    return _TiltedResult(I / LN2, float("nan"), p, gap / LN2, it, converged)


def _pairwise_transfer(ops, tilt, p, g, cap, objective):
    """Move mass from the worst supported letter toward the best letter."""
    nx = len(p)
    if cap is None:
        room = np.inf
        g_to = g
    else:
        g_to = np.where(p < cap - 1e-15, g, -np.inf)
        if not np.any(np.isfinite(g_to)):
            return None
    i_to = int(np.argmax(g_to))
    g_on = np.where(p > 1e-15, g, np.inf)
    i_from = int(np.argmin(g_on))
    if i_from == i_to:
        return None
    dmax = p[i_from]
    if cap is not None:
        dmax = min(dmax, cap - p[i_to])
    if dmax <= 0:
        return None
    direction = np.zeros(nx)
    direction[i_to], direction[i_from] = 1.0, -1.0
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, dmax
    d1 = hi - invphi * (hi - lo)
    d2 = lo + invphi * (hi - lo)
    f1 = objective(np.maximum(p + d1 * direction, 0.0))[2]
    f2 = objective(np.maximum(p + d2 * direction, 0.0))[2]
    for _ in range(10):
        if f1 < f2:
            lo, d1, f1 = d1, d2, f2
            d2 = lo + invphi * (hi - lo)
            f2 = objective(np.maximum(p + d2 * direction, 0.0))[2]
        else:
            hi, d2, f2 = d2, d1, f1
            d1 = hi - invphi * (hi - lo)
            f1 = objective(np.maximum(p + d1 * direction, 0.0))[2]
    best = None
    for dstar in (0.5 * (lo + hi), dmax):
        cand = np.maximum(p + dstar * direction, 0.0)
        cand /= cand.sum()
        Dc, Ic, objc = objective(cand)
        if best is None or objc > best[3]:
            best = (cand, Dc, Ic, objc)
    return best


def _tilt_vector(beta_vals: np.ndarray, mu: float) -> np.ndarray:
    # shift-normalized so that adding a constant to beta changes nothing
    return mu * LN2 * (beta_vals - np.max(beta_vals))


def blahut_arimoto(ch: ChannelModel, tol: float = 1e-9, max_iter: int = 200_000,
                   callback=None) -> tuple[float, InputDistribution]:
    """Unconstrained channel capacity in bits with its achieving distribution.

    Terminates when the upper/lower capacity bound gap max_i D_i - sum_i p_i D_i
    drops below tol (bits); raises SolverError with the residual gap otherwise.
    """
    ops = _ChannelOps(ch.W)
    res = _solve_tilted(ops, np.zeros(ch.n_x), tol, max_iter, callback=callback)
    if not res.converged:
        raise SolverError(
            f"Blahut-Arimoto did not reach gap {tol} in {max_iter} iterations "
            f"(residual gap {res.gap_bits:.3e} bits)", residual_gap=res.gap_bits)
    return res.capacity_bits, InputDistribution(res.p)


def tilted_blahut_arimoto(ch: ChannelModel, beta: GridFunction, mu: float,
                          tol: float = 1e-9, max_iter: int = 200_000,
                          p0: np.ndarray | None = None,
                          density_cap: float | None = None,
                          strict: bool = True) -> tuple[float, float, InputDistribution]:
    """Maximize I(X;Y) + mu * E[beta(X)]; returns (C bits, B, p).

    mu = 0 reduces to plain capacity. Very large mu concentrates p near the
    argmax of beta; the output remains a valid achieved point. With
    strict=False an exhausted iteration budget returns the (feasible) iterate
    instead of raising.
    """
    if mu < 0:
        raise ValueError("the energy tilt mu must be nonnegative")
    beta_vals = beta(ch.input_grid)
    ops = _ChannelOps(ch.W)
    res = _solve_tilted(ops, _tilt_vector(beta_vals, mu), tol, max_iter,
                        p0=p0, cap=density_cap)
    if strict and not res.converged:
        raise SolverError(
            f"tilted Blahut-Arimoto (mu={mu:g}) did not converge "
            f"(residual gap {res.gap_bits:.3e} bits)", residual_gap=res.gap_bits)
    p = InputDistribution(res.p, density_cap=density_cap)
    return res.capacity_bits, float(res.p @ beta_vals), p


@dataclass(frozen=True)
class CurvePoint:
    B: float
    C: float
    mu: float
    p: np.ndarray | None = None


@dataclass(frozen=True)
class CapacityCurve:
    """Pareto points tracing C_beta(B), with the flat prefix made explicit.

    points are sorted by B; C is non-increasing and concave (the stored points
    are the upper concave hull of achieved operating points). The curve
    evaluates to c_max_bits for B <= b_unconstrained and to 0 beyond b_max.
    """

    points: tuple
    c_max_bits: float
    b_max: float
    b_unconstrained: float
    density_cap: float | None = None

    def _arrays(self) -> tuple[np.ndarray, np.ndarray]:
        Bs = np.array([pt.B for pt in self.points])
        Cs = np.array([pt.C for pt in self.points])
        return Bs, Cs

    def capacity_at(self, B: float) -> float:
        """C(B): maximal rate with energy delivery >= B; 0 beyond b_max."""
        if B <= self.b_unconstrained:
            return self.c_max_bits
        if B > self.b_max:
            return 0.0
        Bs, Cs = self._arrays()
        return float(np.interp(B, Bs, Cs))

    def energy_at(self, R: float) -> float:
        """B(R): maximal energy delivery with rate >= R (the dual curve)."""
        if R > self.c_max_bits + 1e-9:
            raise ValueError("requested rate exceeds the unconstrained capacity")
        if R >= self.c_max_bits:
            return self.b_unconstrained
        Bs, Cs = self._arrays()
        if R <= Cs[-1]:
            return self.b_max
        # Cs is non-increasing along ascending Bs; invert on the negated axis
        return float(np.interp(-R, -Cs, Bs))


def energy_capacity(curve: CapacityCurve, R: float) -> float:
    """Dual curve B(R); R = 0 gives b_max, R = C_max gives b_unconstrained."""
    if R < 0:
        raise ValueError("rate must be nonnegative")
    return curve.energy_at(R)


def _upper_concave_hull(points: list[CurvePoint]) -> list[CurvePoint]:
    pts = sorted(points, key=lambda t: (t.B, -t.C))
    dedup: list[CurvePoint] = []
    for pt in pts:
        if dedup and abs(pt.B - dedup[-1].B) < 1e-15:
            continue
        dedup.append(pt)
    hull: list[CurvePoint] = []
    for pt in dedup:
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b when it lies on/below the chord a -> pt
            if (b.B - a.B) * (pt.C - a.C) - (b.C - a.C) * (pt.B - a.B) >= -1e-15:
                hull.pop()
            else:
                break
        hull.append(pt)
    out: list[CurvePoint] = []
    for pt in hull:
        if out and pt.C > out[-1].C + 1e-12:
            continue  # keep C non-increasing
        out.append(pt)
    return out


def greedy_max_energy(beta_vals: np.ndarray, density_cap: float | None) -> tuple[float, np.ndarray]:
    """Maximal deliverable energy; cap-constrained mass fills in decreasing beta order."""
    n = len(beta_vals)
    p = np.zeros(n)
    if density_cap is None:
        p[int(np.argmax(beta_vals))] = 1.0
        return float(beta_vals.max()), p
    order = np.argsort(-beta_vals, kind="stable")
    remaining = 1.0
    for i in order:
        take = min(density_cap, remaining)
        p[i] = take
        remaining -= take
        if remaining <= 1e-15:
            break
    if remaining > 1e-12:
        raise ValueError("density cap below 1/n_x leaves no feasible distribution")
    return float(p @ beta_vals), p


def capacity_energy_curve(ch: ChannelModel, beta: GridFunction,
                          n_points: int = 48, tol: float = 1e-8,
                          density_cap: float | None = None,
                          max_iter: int = 200_000,
                          sweep_iter_budget: int = 2_000,
                          warm_curve: "CapacityCurve | None" = None) -> CapacityCurve:
    """Trace C_beta(B) by a geometric Lagrange-tilt sweep.

    The tilt ladder is {0} then n_points values from 1e-3 up to mu_hi, where
    mu_hi doubles until the achieved energy reaches b_max - 1e-4 (or 2**20).
    Individual sweep solves run under an iteration budget; unconverged sweep
    points are still feasible operating points and concavity-hull pruning
    discards any that fall inside the envelope. The mu = 0 solve must converge
    (SolverError otherwise). Passing warm_curve reuses its ladder and
    solutions as starting points (the channel must match).
    """
    if n_points < 2:
        raise ValueError("need at least two sweep points")
    beta_vals = beta(ch.input_grid)
    ops = _ChannelOps(ch.W)

    res0 = _solve_tilted(ops, np.zeros(ch.n_x), tol, max_iter,
                         p0=None if warm_curve is None else warm_curve.points[0].p,
                         cap=density_cap)
    if not res0.converged:
        raise SolverError("unconstrained solve did not converge "
                          f"(residual gap {res0.gap_bits:.3e} bits)",
                          residual_gap=res0.gap_bits)
    C0 = res0.capacity_bits
    b_unc = float(res0.p @ beta_vals)
    b_max, p_greedy = greedy_max_energy(beta_vals, density_cap)

    anchors = [CurvePoint(0.0, C0, 0.0, res0.p), CurvePoint(b_unc, C0, 0.0, res0.p)]
    if b_max - b_unc <= 1e-12:
        # constant (or never-binding) harvesting profile: single flat segment
        pts = _upper_concave_hull(anchors + [CurvePoint(b_max, C0, 0.0, res0.p)])
        return CapacityCurve(tuple(pts), C0, b_max, b_unc, density_cap)

    sweep: list[CurvePoint] = []
    if warm_curve is not None:
        mus = [pt.mu for pt in warm_curve.points
               if pt.p is not None and 0.0 < pt.mu < np.inf]
        starts = [pt.p for pt in warm_curve.points
                  if pt.p is not None and 0.0 < pt.mu < np.inf]
    else:
        mu_hi = 1.0
        p_ws = res0.p
        while True:
            res = _solve_tilted(ops, _tilt_vector(beta_vals, mu_hi), tol,
                                sweep_iter_budget, p0=p_ws, cap=density_cap)
            p_ws = res.p
            if float(res.p @ beta_vals) >= b_max - 1e-4 or mu_hi >= 2 ** 20:
                break
            mu_hi *= 2.0
        mus = list(np.geomspace(1e-3, mu_hi, n_points))
        starts = None

    p_ws = res0.p
    for k, mu in enumerate(mus):
        p0 = starts[k] if starts is not None else p_ws
        res = _solve_tilted(ops, _tilt_vector(beta_vals, mu), tol,
                            sweep_iter_budget, p0=p0, cap=density_cap)
        p_ws = res.p
        sweep.append(CurvePoint(float(res.p @ beta_vals), res.capacity_bits,
                                float(mu), res.p))

    # terminal point: best rate among max-energy distributions
    if density_cap is None:
        amax = beta_vals >= beta_vals.max()
        if amax.sum() == 1:
            c_term = 0.0
        else:
            sub_ops = _ChannelOps(ch.W[amax])
            sub = _solve_tilted(sub_ops, np.zeros(int(amax.sum())), tol, max_iter)
            c_term = sub.capacity_bits
        p_term = p_greedy
    else:
        D, I = ops.divergences(p_greedy)
        c_term = I / LN2
        p_term = p_greedy
    terminal = CurvePoint(b_max, c_term, np.inf, p_term)

    pts = _upper_concave_hull(anchors + sweep + [terminal])
    return CapacityCurve(tuple(pts), C0, b_max, b_unc, density_cap)


def export_curve_csv(path, curve: CapacityCurve, header_comment: str | None = None) -> None:
    """Write B,C_bits,mu rows (mu is 'inf' on the terminal point)."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh)
        w.writerow(["B", "C_bits", "mu"])
        for pt in curve.points:
            w.writerow([repr(float(pt.B)), repr(float(pt.C)), repr(float(pt.mu))])
