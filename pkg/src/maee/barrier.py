"""Log-barrier (primal-dual) Newton solver for the linearised multi-user precoding subproblem.

Works on a noise-normalised instance (channel divided by ``sigma``, unit noise)
in the real variables ``z = [u_1, ..., u_K, chi, xi - 1]`` where
``u_k = [Re w_k; Im w_k]``.  Storing ``xi - 1`` (the interference part) keeps
tiny interference levels resolvable next to the unit noise.  The problem is::

    minimise   -sum_k log2(1 + chi_k) + eta * ||W||^2
    subject to ||W||^2 <= P
               sum_{i != k} |h_k^H w_i|^2 + 1 <= xi_k
               c0_k + c1_k (xi_k - xi0_k) + c2_k (chi_k - chi0_k) <= Re(h_k^H w_k)
               xi_k >= xi_floor

where the third line is the first-order expansion of ``sqrt(xi_k chi_k)``
around ``(chi0_k, xi0_k)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LN2 = np.log(2.0)


class InfeasibleLinearization(RuntimeError):
    """No strictly feasible start exists for the given linearisation point."""


@dataclass
class BarrierResult:
    W: np.ndarray
    chi: np.ndarray
    xi: np.ndarray
    objective: float  # sum log2(1 + chi) - eta ||W||^2 at the returned point
    multipliers: np.ndarray
    stationarity: float  # ||grad F + J^T lambda||_inf
    complementarity: float  # max_i lambda_i |f_i|
    violation: float  # max(0, max_i f_i)
    newton_steps: int
    stages: int


class LinearizedSubproblem:
    """One instance of the convex subproblem; see the module docstring."""

    def __init__(self, Hn, eta, p_max, chi0, xi0, xi_floor=0.0):
        Hn = np.asarray(Hn, dtype=complex)
        self.N, self.K = Hn.shape
        self.eta = float(eta)
        self.p_max = float(p_max)
        self.chi0 = np.asarray(chi0, dtype=float)
        self.xi0 = np.asarray(xi0, dtype=float)
        if np.any(self.chi0 <= 0) or np.any(self.xi0 <= 0):
            raise InfeasibleLinearization("linearisation point must be strictly positive")
        self.xi_floor = float(xi_floor)
        self.A = np.concatenate([Hn.real.T, Hn.imag.T], axis=1)  # (K, 2N)
        self.B = np.concatenate([-Hn.imag.T, Hn.real.T], axis=1)
        self.Q = (np.einsum("ka,kb->kab", self.A, self.A)
                  + np.einsum("ka,kb->kab", self.B, self.B))
        self.c0 = np.sqrt(self.xi0 * self.chi0)
        self.c1 = 0.5 * np.sqrt(self.chi0 / self.xi0)
        self.c2 = 0.5 * np.sqrt(self.xi0 / self.chi0)
        self.nu = 2 * self.N * self.K
        self.n = self.nu + 2 * self.K
        self.m = 1 + 3 * self.K

    # -- packing -----------------------------------------------------------
    def split(self, z):
        U = z[: self.nu].reshape(self.K, 2 * self.N)
        return U, z[self.nu: self.nu + self.K], z[self.nu + self.K:]

    def pack(self, W, chi, xi):
        U = np.concatenate([W.real.T, W.imag.T], axis=1)
        return np.concatenate([U.ravel(), chi, np.asarray(xi) - 1.0])

    def precoder(self, z):
        U = self.split(z)[0]
        return (U[:, : self.N] + 1j * U[:, self.N:]).T

    # -- problem functions --------------------------------------------------
    def _inner(self, U):
        return self.A @ U.T, self.B @ U.T  # [k, i] real / imaginary part of h_k^H w_i

    def constraints(self, z):
        U, chi, e = self.split(z)  # e = xi - 1
        R, I = self._inner(U)
        pw = R * R + I * I
        interference = pw.sum(axis=1) - np.diag(pw)
        return np.concatenate([
            [np.sum(U * U) - self.p_max],
            interference - e,
            self.c0 + self.c1 * (e + 1.0 - self.xi0) + self.c2 * (chi - self.chi0) - np.diag(R),
            self.xi_floor - 1.0 - e,
        ])

    def objective(self, z):
        U, chi, _ = self.split(z)
        return -np.sum(np.log1p(chi)) / LN2 + self.eta * np.sum(U * U)

    def in_domain(self, z):
        chi = self.split(z)[1]
        return bool(np.all(chi > -1.0)) and bool(np.all(self.constraints(z) < 0))

    def jacobian(self, z):
        U, chi, xi = self.split(z)
        K, N2, nu = self.K, 2 * self.N, self.nu
        R, I = self._inner(U)
        J = np.zeros((self.m, self.n))
        J[0, :nu] = 2.0 * U.ravel()
        blocks = 2.0 * (R[:, :, None] * self.A[:, None, :] + I[:, :, None] * self.B[:, None, :])
        blocks[np.arange(K), np.arange(K)] = 0.0
        J[1: 1 + K, :nu] = blocks.reshape(K, K * N2)
        ar = np.arange(K)
        J[1 + ar, nu + K + ar] = -1.0
        cut = np.zeros((K, K, N2))
        cut[ar, ar] = -self.A
        J[1 + K: 1 + 2 * K, :nu] = cut.reshape(K, K * N2)
        J[1 + K + ar, nu + ar] = self.c2
        J[1 + K + ar, nu + K + ar] = self.c1
        J[1 + 2 * K + ar, nu + K + ar] = -1.0
        return J

    def objective_grad(self, z):
        U, chi, _ = self.split(z)
        g = np.zeros(self.n)
        g[: self.nu] = 2.0 * self.eta * U.ravel()
        g[self.nu: self.nu + self.K] = -1.0 / ((1.0 + chi) * LN2)
        return g

    def objective_hess_diag(self, z):
        chi = self.split(z)[1]
        h = np.zeros(self.n)
        h[: self.nu] = 2.0 * self.eta
        h[self.nu: self.nu + self.K] = 1.0 / ((1.0 + chi) ** 2 * LN2)
        return h

    def constraint_curvature(self, d):
        """``sum_i d_i * Hessian(f_i)`` restricted to the precoder block."""
        K, N2 = self.K, 2 * self.N
        d_int = d[1: 1 + K]
        S = np.einsum("k,kab->ab", d_int, self.Q)
        out = np.zeros((self.nu, self.nu))
        eye = np.eye(N2)
        for i in range(K):
            sl = slice(i * N2, (i + 1) * N2)
            out[sl, sl] = 2.0 * (d[0] * eye + S - d_int[i] * self.Q[i])
        return out

    # -- start point --------------------------------------------------------
    def strict_start(self, W, shrink=1e-3):
        """A strictly feasible point near ``W`` (columns rotated, power pulled inside)."""
        W = np.array(W, dtype=complex)
        power = np.sum(np.abs(W) ** 2)
        if power >= self.p_max * (1 - shrink):
            W *= np.sqrt(self.p_max * (1 - shrink) / power)
        U = np.concatenate([W.real.T, W.imag.T], axis=1)
        R, I = self._inner(U)
        # rotate each column so that h_k^H w_k is real and non-negative
        phase = np.exp(-1j * np.arctan2(np.diag(I), np.diag(R)))
        W = W * phase[None, :]
        U = np.concatenate([W.real.T, W.imag.T], axis=1)
        R, I = self._inner(U)
        pw = R * R + I * I
        interference = pw.sum(axis=1) - np.diag(pw)
        xi = 1.0 + np.maximum(interference * (1 + shrink) + shrink, self.xi_floor - 1.0 + shrink)
        chi_max = self.chi0 + (np.diag(R) - self.c0 - self.c1 * (xi - self.xi0)) / self.c2
        chi = chi_max - shrink * np.maximum(np.abs(chi_max), 1e-3)
        if np.any(chi <= -1.0 + 1e-9):
            raise InfeasibleLinearization("no strictly feasible slack for the current precoder")
        z = self.pack(W, chi, xi)
        if not self.in_domain(z):
            raise InfeasibleLinearization("start point is not strictly feasible")
        return z


def _kkt(sub: LinearizedSubproblem, z, lam, t):
    f = sub.constraints(z)
    J = sub.jacobian(z)
    r_dual = sub.objective_grad(z) + J.T @ lam
    r_cent = -lam * f - 1.0 / t
    return f, J, r_dual, r_cent


def _center(sub: LinearizedSubproblem, z, t_final: float, t0: float = 1.0,
            mu: float = 20.0, newton_tol: float = 1e-8, max_newton: int = 50,
            alpha: float = 0.01, beta: float = 0.5):
    """Plain barrier method up to ``t_final``; returns ``(z, t, newton_steps)``."""
    t = t0
    steps = 0

    def phi(zz):
        return t * sub.objective(zz) - np.sum(np.log(-sub.constraints(zz)))

    while True:
        for _ in range(max_newton):
            f = sub.constraints(z)
            d = 1.0 / (-f)
            J = sub.jacobian(z)
            grad = t * sub.objective_grad(z) + J.T @ d
            H = (J.T * (d * d)) @ J
            H[: sub.nu, : sub.nu] += sub.constraint_curvature(d)
            H[np.diag_indices(sub.n)] += t * sub.objective_hess_diag(z)
            step = -np.linalg.lstsq(H, grad, rcond=None)[0]
            dec2 = -grad @ step
            if dec2 / 2.0 <= newton_tol:
                break
            s = 1.0
            while not sub.in_domain(z + s * step) and s > 1e-16:
                s *= beta
            base = phi(z)
            while phi(z + s * step) > base - alpha * s * dec2 and s > 1e-16:
                s *= beta
            if s <= 1e-16:
                break
            z = z + s * step
            steps += 1
        if t >= t_final:
            return z, t, steps
        t = min(t * mu, t_final)


def solve(sub: LinearizedSubproblem, z0, mu: float = 10.0, tol: float = 1e-10,
          max_iter: int = 100, warm_t: float = 1e3, alpha: float = 0.01, beta: float = 0.5) -> BarrierResult:
    """Primal-dual interior-point method on the log-barrier central path.

    Iterates until the dual residual and the surrogate duality gap both drop
    below ``tol`` (or ``max_iter`` Newton steps).  ``z0`` must be strictly
    feasible, see :meth:`LinearizedSubproblem.strict_start`.
    """
    z = np.array(z0, dtype=float)
    if not sub.in_domain(z):
        raise InfeasibleLinearization("start point is not strictly feasible")
    # a few barrier stages give well-scaled duals for the primal-dual phase
    z, t0, steps = _center(sub, z, t_final=warm_t)
    f = sub.constraints(z)
    lam = 1.0 / (t0 * (-f))
    stages = 0
    t_prev = None
    for _ in range(max_iter):
        gap = float(-f @ lam)
        t = mu * sub.m / gap
        if t_prev is None or t > t_prev:
            stages += 1
            t_prev = t
        f, J, r_dual, r_cent = _kkt(sub, z, lam, t)
        if np.max(np.abs(r_dual)) <= tol and gap <= tol:
            break
        d = lam / (-f)
        H = (J.T * d) @ J
        H[: sub.nu, : sub.nu] += sub.constraint_curvature(lam)
        H[np.diag_indices(sub.n)] += sub.objective_hess_diag(z)
        rhs = -(sub.objective_grad(z) + J.T @ (1.0 / (t * (-f))))
        try:
            dz = np.linalg.solve(H, rhs)
        except np.linalg.LinAlgError:
            dz = np.linalg.lstsq(H, rhs, rcond=None)[0]
        dlam = (-lam * (J @ dz) + r_cent) / f

        neg = dlam < 0
        s = min(1.0, float(np.min(-lam[neg] / dlam[neg]))) if np.any(neg) else 1.0
        s *= 0.99
        while not sub.in_domain(z + s * dz) and s > 1e-16:
            s *= beta
        norm0 = np.hypot(np.linalg.norm(r_dual), np.linalg.norm(r_cent))
        while s > 1e-16:
            _, _, rd, rc = _kkt(sub, z + s * dz, lam + s * dlam, t)
            if np.hypot(np.linalg.norm(rd), np.linalg.norm(rc)) <= (1 - alpha * s) * norm0:
                break
            s *= beta
        if s <= 1e-16:
            break
        z = z + s * dz
        lam = lam + s * dlam
        f = sub.constraints(z)
        steps += 1

    f, J, r_dual, _ = _kkt(sub, z, lam, 1.0)
    U, chi, e = sub.split(z)
    return BarrierResult(
        W=sub.precoder(z), chi=chi.copy(), xi=e + 1.0, objective=-sub.objective(z),
        multipliers=lam.copy(), stationarity=float(np.max(np.abs(r_dual))),
        complementarity=float(np.max(lam * np.abs(f))),
        violation=float(max(0.0, np.max(f))), newton_steps=steps, stages=stages)
