"""Random-matrix linear response for the input-to-logit map.

The map is defined as the minimum-norm-constrained least-squares fit of
target logits Z_tilde (plus small Gaussian noise sigma0*W) by linear readout
of input features X: omega = [X^T X - lambda* I]^{-1} X^T (Z_tilde - sigma0 W)
with the Lagrange multiplier lambda* pinned by a trace equation. From the
closed-form solution we get per-sample Jacobians, their Gram matrices, and
the first-order logit response to a gradient-direction (FGSM) attack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .rng import substream
from .stats import softmax
from .store import LabelVector
from .surrogate import (
    GapShiftInput,
    MeanFieldParams,
    SurrogateSpec,
    gap_shrinkage,
    surrogate_logit,
)


class ResponseError(Exception):
    pass


@dataclass(frozen=True)
class ResponseProblem:
    X: np.ndarray          # N_data x N_feats, unit-norm rows
    Z_tilde: np.ndarray    # N_data x N_classes
    labels: LabelVector
    sigma0: float = 1e-3
    c: float = 1.0
    epsilon: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        x = np.asarray(self.X, dtype=np.float64)
        z = np.asarray(self.Z_tilde, dtype=np.float64)
        if x.ndim != 2 or z.ndim != 2 or x.shape[0] != z.shape[0]:
            raise ResponseError("X and Z_tilde must share the data dimension")
        if not (np.isfinite(x).all() and np.isfinite(z).all()):
            raise ResponseError("non-finite entries in problem matrices")
        norms = np.linalg.norm(x, axis=1)
        if np.abs(norms - 1.0).max() > 1e-12:
            i = int(np.argmax(np.abs(norms - 1.0)))
            raise ResponseError(f"row {i} of X is not unit-normalized")
        if self.sigma0 < 0 or self.c <= 0 or self.epsilon < 0:
            raise ResponseError("sigma0 >= 0, c > 0, epsilon >= 0 required")
        object.__setattr__(self, "X", x)
        object.__setattr__(self, "Z_tilde", z)


@dataclass(frozen=True)
class FyodorovSolution:
    omega: np.ndarray       # N_feats x N_classes
    lambda_star: float
    W: np.ndarray           # N_data x N_classes


def _gram_eig(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d, v = np.linalg.eigh(x.T @ x)
    return d, v


def solve_lambda_star(problem: ResponseProblem, W: np.ndarray) -> float:
    """Root of the norm-constraint trace equation on the branch where the
    resolvent is positive definite (lambda < lambda_min(X^T X))."""
    x, z = problem.X, problem.Z_tilde
    n_data, n_feats = x.shape
    n_classes = z.shape[1]
    target = problem.c**2 * n_feats * n_classes
    d, v = _gram_eig(x)
    # trace(X R^2 X^T S) = sum_i (Xv_i)^T S (Xv_i) / (d_i - lam)^2
    xv = x @ v
    zt = z - 0.0  # S = Z~Z~^T + sigma0^2 I applied factor-wise
    szv = zt @ (zt.T @ xv) + problem.sigma0**2 * xv
    m = np.einsum("ij,ij->j", xv, szv)

    def trace_gap(lam: float) -> float:
        return float(np.sum(m / (d - lam) ** 2) - target)

    hi = d.min() - 1e-8
    lo = -1e6
    f_lo, f_hi = trace_gap(lo), trace_gap(hi)
    if f_lo > 0 or f_hi < 0:
        raise ResponseError(
            "no lambda* in bracket: achievable trace range "
            f"[{f_lo + target:.3e}, {f_hi + target:.3e}] misses target {target:.3e}"
        )
    lam = brentq(trace_gap, lo, hi, xtol=1e-14, rtol=1e-12)
    return float(lam)


def fyodorov_omega(problem: ResponseProblem) -> FyodorovSolution:
    """Seeded noise draw, multiplier solve, and the closed-form readout."""
    x, z = problem.X, problem.Z_tilde
    rng = substream(problem.seed, 0)
    w = rng.standard_normal(z.shape)
    lam = solve_lambda_star(problem, w)
    gram = x.T @ x - lam * np.eye(x.shape[1])
    try:
        omega = np.linalg.solve(gram, x.T @ (z - problem.sigma0 * w))
    except np.linalg.LinAlgError as e:
        raise ResponseError(f"singular resolvent at lambda*={lam}") from e
    return FyodorovSolution(omega=omega, lambda_star=lam, W=w)


def _resolvent(problem: ResponseProblem, sol: FyodorovSolution) -> np.ndarray:
    x = problem.X
    gram = x.T @ x - sol.lambda_star * np.eye(x.shape[1])
    return np.linalg.inv(gram)


def jacobian_block(
    sol: FyodorovSolution, problem: ResponseProblem, mu: int
) -> np.ndarray:
    """Jacobian of the mu-th sample's input-to-logit map, N_classes x N_feats.

    Entry (m, j) = (R X^T)_{j mu} z~^mu_m + (Z~^T X R)_{m j}, with the
    resolvent R = [X^T X - lambda* I]^{-1} held fixed.
    """
    x, z = problem.X, problem.Z_tilde
    if not (0 <= mu < x.shape[0]):
        raise ResponseError(f"sample index {mu} out of range")
    r = _resolvent(problem, sol)
    rx = r @ x.T                      # N_feats x N_data
    return np.outer(z[mu], rx[:, mu]) + z.T @ x @ r


def jj_transpose(
    sol: FyodorovSolution, problem: ResponseProblem, mu: int
) -> np.ndarray:
    """Gram matrix Jac^mu (Jac^mu)^T via the four-term closed form."""
    x, z = problem.X, problem.Z_tilde
    if not (0 <= mu < x.shape[0]):
        raise ResponseError(f"sample index {mu} out of range")
    r = _resolvent(problem, sol)
    omega_mat = x @ r @ r @ x.T        # N_data x N_data
    b_mu = z.T @ omega_mat[:, mu]      # N_classes
    zm = z[mu]
    return (
        omega_mat[mu, mu] * np.outer(zm, zm)
        + z.T @ omega_mat @ z
        + np.outer(zm, b_mu)
        + np.outer(b_mu, zm)
    )


def fgsm_logit_response(
    sol: FyodorovSolution, problem: ResponseProblem
) -> np.ndarray:
    """First-order per-sample logit shift under a normalized FGSM attack.

    delta z^mu = epsilon * zeta_mu * JJ^T_mu * (softmax(z~^mu) - y^mu) with
    zeta_mu = 1/sqrt(g^T JJ^T g). Samples with zero attack gradient get a
    zero row.
    """
    x, z = problem.X, problem.Z_tilde
    n_data, n_classes = z.shape
    out = np.zeros_like(z)
    if problem.epsilon == 0.0:
        return out
    y = np.eye(n_classes)[problem.labels.labels]
    probs = softmax(z)
    r = _resolvent(problem, sol)
    omega_mat = x @ r @ r @ x.T
    bz = omega_mat @ z                 # row mu is B_mu^T
    zoz = z.T @ omega_mat @ z
    for mu in range(n_data):
        g = probs[mu] - y[mu]
        zm = z[mu]
        jj = (
            omega_mat[mu, mu] * np.outer(zm, zm)
            + zoz
            + np.outer(zm, bz[mu])
            + np.outer(bz[mu], zm)
        )
        jjg = jj @ g
        quad = float(g @ jjg)
        if quad <= 0.0:
            continue
        out[mu] = problem.epsilon * jjg / np.sqrt(quad)
    return out


def _top_two_gap(row: np.ndarray) -> float:
    part = np.partition(row, row.size - 2)
    return float(part[-1] - part[-2])


def gap_shift_experiment(
    params: MeanFieldParams,
    n_data: int,
    n_feats: int,
    epsilon: float,
    sigma0: float = 1e-3,
    c: float = 1.0,
    seed: int = 0,
    branch: str = "plus",
) -> tuple[float, float, float]:
    """Synthetic end-to-end check of the gap-shrinkage prediction.

    Builds unit-normalized Gaussian features, assembles surrogate logits with
    misclassified samples at rate error_rate, runs the FGSM linear response,
    and returns (predicted shrinkage, measured mean gap change over
    correctly classified samples, measured std).
    """
    n = params.n_classes
    rng = substream(seed, 1)
    x = rng.standard_normal((n_data, n_feats))
    x /= np.linalg.norm(x, axis=1, keepdims=True)

    n_wrong = int(round(params.error_rate * n_data))
    labels = rng.integers(0, n, size=n_data)
    z = np.empty((n_data, n))
    correct_mask = np.ones(n_data, dtype=bool)
    spec_c = SurrogateSpec(n, params.beta_correct, "correct", branch)
    spec_w = SurrogateSpec(n, params.beta_wrong, "misclassified", branch)
    for i in range(n_data):
        lab = int(labels[i])
        if i < n_wrong:
            correct_mask[i] = False
            arg = int((lab + 1 + rng.integers(0, n - 1)) % n)
            z[i] = surrogate_logit(spec_w, lab, arg)
        else:
            z[i] = surrogate_logit(spec_c, lab, lab)

    problem = ResponseProblem(
        X=x, Z_tilde=z, labels=LabelVector(labels),
        sigma0=sigma0, c=c, epsilon=epsilon, seed=seed,
    )
    sol = fyodorov_omega(problem)
    dz = fgsm_logit_response(sol, problem)

    gaps_before = np.array([_top_two_gap(z[i]) for i in range(n_data)])
    gaps_after = np.array([_top_two_gap(z[i] + dz[i]) for i in range(n_data)])
    change = gaps_after[correct_mask] - gaps_before[correct_mask]
    measured_mean = float(change.mean()) if change.size else 0.0
    measured_std = float(change.std()) if change.size else 0.0

    # Omega aggregation: row-mu sums of Omega(X, lambda*) over correctly and
    # incorrectly labeled nu, scaled by epsilon*zeta_mu and averaged over mu.
    r = _resolvent(problem, sol)
    omega_mat = x @ r @ r @ x.T
    probs = softmax(z)
    y = np.eye(n)[labels]
    zeta = np.zeros(n_data)
    bz = omega_mat @ z
    zoz = z.T @ omega_mat @ z
    for mu in range(n_data):
        g = probs[mu] - y[mu]
        jj = (
            omega_mat[mu, mu] * np.outer(z[mu], z[mu])
            + zoz
            + np.outer(z[mu], bz[mu])
            + np.outer(bz[mu], z[mu])
        )
        quad = float(g @ jj @ g)
        zeta[mu] = 1.0 / np.sqrt(quad) if quad > 0 else 0.0
    sum_correct = omega_mat[:, correct_mask].sum(axis=1)
    sum_wrong = omega_mat[:, ~correct_mask].sum(axis=1)
    eps_err = params.error_rate
    w_c = epsilon * np.mean(zeta * sum_correct)
    w_w = epsilon * np.mean(zeta * sum_wrong)
    omega_correct = max(w_c / (1.0 - eps_err), 0.0) if eps_err < 1.0 else 0.0
    omega_wrong = max(w_w / eps_err, 0.0) if eps_err > 0.0 else 0.0
    predicted = gap_shrinkage(
        GapShiftInput(params, epsilon, omega_correct, omega_wrong), branch
    )
    if epsilon == 0.0:
        predicted = 0.0
    return predicted, measured_mean, measured_std
