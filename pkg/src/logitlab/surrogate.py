"""Analytically tractable surrogate-logit model.

A surrogate logit vector is z = beta*phi_hat + v where phi_hat is a one-hot
argmax direction, beta is the prescribed maximum, and v lives in the
orthogonal complement of phi_hat. Closed forms f+-, (g+-, kappa, psi+-) give
published stationary candidates of the third-order expansion of the
cross-entropy around beta*phi_hat, for correctly classified and misclassified
samples respectively. This module evaluates those closed forms exactly as
printed, the truncated and exact losses, admissibility constraints, the
mean-field loss surface, a brute-force stationary-point finder that serves as
the independent oracle, and the first-order gap-shrinkage prediction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .rng import substream

POLE_TOL = 1e-8


class SurrogateError(Exception):
    pass


class DomainError(SurrogateError):
    """Parameter at or within tolerance of a formula singularity."""


class SearchError(SurrogateError):
    pass


@dataclass(frozen=True)
class SurrogateSpec:
    n_classes: int
    beta: float
    case: str  # correct | misclassified
    branch: str = "plus"

    def __post_init__(self) -> None:
        if self.case not in ("correct", "misclassified"):
            raise SurrogateError(f"unknown case {self.case!r}")
        if self.branch not in ("plus", "minus"):
            raise SurrogateError(f"unknown branch {self.branch!r}")
        if self.n_classes < 2:
            raise SurrogateError("n_classes must be >= 2")
        if self.case == "misclassified" and self.n_classes < 3:
            raise SurrogateError("misclassified case needs n_classes >= 3")


@dataclass(frozen=True)
class MeanFieldParams:
    beta_correct: float
    beta_wrong: float
    n_classes: int
    error_rate: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.error_rate <= 1.0):
            raise SurrogateError("error_rate must be in [0, 1]")


@dataclass(frozen=True)
class GapShiftInput:
    params: MeanFieldParams
    epsilon: float
    omega_correct: float
    omega_wrong: float

    def __post_init__(self) -> None:
        if self.omega_correct < 0 or self.omega_wrong < 0:
            raise SurrogateError("omega coefficients must be nonnegative")


def _sign(branch: str) -> float:
    return 1.0 if branch == "plus" else -1.0


def _check_poles(beta: float, n_classes: int, n_minus_3: bool) -> None:
    if n_classes >= 2 and abs(beta - np.log(n_classes - 1)) < POLE_TOL:
        raise DomainError(f"beta at pole ln(N-1) = ln({n_classes - 1})")
    if n_minus_3 and n_classes >= 4 and abs(beta - np.log(n_classes - 3)) < POLE_TOL:
        raise DomainError(f"beta at pole ln(N-3) = ln({n_classes - 3})")


def f_pm(beta: float, n_classes: int, branch: str = "plus") -> float:
    """Stationary coefficient for the correctly classified case."""
    _check_poles(beta, n_classes, n_minus_3=False)
    a = np.exp(-beta) * (n_classes - 1)
    rad = 1.0 + 2.0 * np.exp(-2.0 * beta) * (1.0 - a) / (1.0 + a) ** 2
    if rad < 0:
        raise DomainError(f"negative discriminant at beta={beta}, N={n_classes}")
    return float((1.0 + a) / (1.0 - a) * (-1.0 + _sign(branch) * np.sqrt(rad)))


def misclassified_coeffs(
    beta: float, n_classes: int, branch: str = "plus"
) -> tuple[float, float, float]:
    """(g, kappa, psi) coefficients for the misclassified case."""
    _check_poles(beta, n_classes, n_minus_3=True)
    if n_classes == 3:
        warnings.warn("n_classes=3 makes the N-3 factor vanish; result is degenerate")
    a = np.exp(-beta) * (n_classes - 1)
    b = np.exp(-beta) * (n_classes - 3)
    rad = 1.0 + 2.0 * (1.0 - a) * (1.0 - b) / (1.0 + a)
    if rad < 0:
        raise DomainError(f"negative discriminant at beta={beta}, N={n_classes}")
    kappa = (1.0 + a) / (1.0 - b) * np.sqrt(rad)
    g = -(1.0 - b) / (1.0 - a) * (1.0 + _sign(branch) * kappa)
    psi = 2.0 * (np.exp(-beta) / (1.0 - a) * g - (1.0 + a) / (1.0 - b))
    return float(g), float(kappa), float(psi)


def admissible(spec: SurrogateSpec) -> bool:
    """Whether the closed-form solution obeys the strict max constraint."""
    if spec.case == "correct":
        return spec.beta > f_pm(spec.beta, spec.n_classes, spec.branch)
    g, _, psi = misclassified_coeffs(spec.beta, spec.n_classes, spec.branch)
    return spec.beta > max(g, psi)


def admissibility_threshold(
    n_classes: int, case: str, branch: str = "plus"
) -> float:
    """Smallest beta above which admissible() holds for every larger beta.

    Scans [0, 100] in steps of 0.1 (skipping pole neighborhoods), brackets the
    last inadmissible-to-admissible transition, and bisects to 1e-10. Returns
    -inf when the whole scanned grid is admissible.
    """

    def ok(b: float) -> bool:
        try:
            return admissible(SurrogateSpec(n_classes, b, case, branch))
        except DomainError:
            return False

    grid = np.arange(0.0, 100.0 + 1e-12, 0.1)
    vals = [ok(b) for b in grid]
    if not vals[-1]:
        raise SearchError("no admissible beta found in [0, 100]")
    if all(vals):
        return float("-inf")
    last_false = max(i for i, v in enumerate(vals) if not v)
    lo, hi = grid[last_false], grid[last_false + 1]
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


def surrogate_logit(
    spec: SurrogateSpec, true_class: int, argmax_class: int
) -> np.ndarray:
    """Full logit vector beta*phi_hat + v for the given class assignment."""
    n = spec.n_classes
    if not (0 <= true_class < n and 0 <= argmax_class < n):
        raise SurrogateError("class index out of range")
    if spec.case == "correct" and true_class != argmax_class:
        raise SurrogateError("correct case requires true_class == argmax_class")
    if spec.case == "misclassified" and true_class == argmax_class:
        raise SurrogateError("misclassified case requires distinct classes")
    if not admissible(spec):
        raise SurrogateError(
            f"beta={spec.beta} is inadmissible for case={spec.case}, "
            f"branch={spec.branch}, N={n}"
        )
    z = np.zeros(n)
    if spec.case == "correct":
        f = f_pm(spec.beta, n, spec.branch)
        z[:] = f
    else:
        g, _, psi = misclassified_coeffs(spec.beta, n, spec.branch)
        z[:] = psi
        z[true_class] = g
    z[argmax_class] = spec.beta
    return z


def exact_ce(z: np.ndarray, y: int) -> float:
    """Cross-entropy -z_y + logsumexp(z), max-subtracted."""
    z = np.asarray(z, dtype=np.float64)
    m = z.max()
    return float(-z[y] + m + np.log(np.sum(np.exp(z - m))))


def _field_and_form(beta: float, phi: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    h = (1.0 + (np.exp(beta) - 1.0) * phi) / (np.exp(beta) + n - 1)
    q = np.diag(h) - np.outer(h, h)
    return h, q


def truncated_ce(z: np.ndarray, y: int) -> float:
    """Third-order expansion of the cross-entropy around beta*phi_hat.

    beta and phi_hat are read off as the max and argmax of z; the remainder
    u = z - beta*phi_hat must be orthogonal to phi_hat within 1e-12.
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.size
    k = int(np.argmax(z))
    beta = float(z[k])
    phi = np.zeros(n)
    phi[k] = 1.0
    u = z - beta * phi
    if abs(u[k]) > 1e-12:
        raise SurrogateError("z - beta*phi_hat is not orthogonal to phi_hat")
    yv = np.zeros(n)
    yv[y] = 1.0
    h, q = _field_and_form(beta, phi, n)
    log_z = beta + np.log(1.0 + np.exp(-beta) * (n - 1))
    qu = q @ u
    uqu = u @ qu
    return float(
        log_z
        - beta * phi[y]
        + u @ (h - yv)
        + 0.5 * uqu
        + (u * u) @ qu / 6.0
        - (u @ h) * uqu / 3.0
    )


def truncated_ce_grad(z: np.ndarray, y: int) -> np.ndarray:
    """Analytic gradient of truncated_ce in u, full ambient coordinates."""
    z = np.asarray(z, dtype=np.float64)
    k = int(np.argmax(z))
    return _grad(float(z[k]), k, z - z[k] * (np.arange(z.size) == k), y, z.size)


def _grad(beta: float, k: int, u: np.ndarray, y: int, n: int) -> np.ndarray:
    phi = np.zeros(n)
    phi[k] = 1.0
    yv = np.zeros(n)
    yv[y] = 1.0
    h, q = _field_and_form(beta, phi, n)
    qu = q @ u
    return (
        h
        - yv
        + qu
        + (u * qu) / 3.0
        + q @ (u * u) / 6.0
        - (h * (u @ qu) + 2.0 * (u @ h) * qu) / 3.0
    )


def _truncated_ce_hess(beta: float, k: int, u: np.ndarray, n: int) -> np.ndarray:
    phi = np.zeros(n)
    phi[k] = 1.0
    h, q = _field_and_form(beta, phi, n)
    qu = q @ u
    hess = (
        q
        + (np.diag(qu) + np.diag(u) @ q + q @ np.diag(u)) / 3.0
        - 2.0 / 3.0 * (np.outer(h, qu) + np.outer(qu, h) + (u @ h) * q)
    )
    return hess


def brute_force_stationary(
    beta: float,
    n_classes: int,
    case: str,
    true_class: int,
    argmax_class: int,
    n_inits: int = 64,
    seed: int = 0,
    tol: float = 1e-6,
) -> list[np.ndarray]:
    """Stationary points of the truncated loss in the complement of phi_hat.

    Runs damped Newton iterations on the projected gradient from random
    starts, clusters converged points, keeps those obeying the strict
    max(u) < beta constraint, and returns the cluster representatives (the
    orthogonal components u, full ambient length).
    """
    n = n_classes
    if case == "correct" and true_class != argmax_class:
        raise SurrogateError("correct case requires true_class == argmax_class")
    if case == "misclassified" and true_class == argmax_class:
        raise SurrogateError("misclassified case requires distinct classes")
    phi = np.zeros(n)
    phi[argmax_class] = 1.0
    # orthonormal basis of the complement of phi_hat
    basis = np.delete(np.eye(n), argmax_class, axis=1)
    rng = substream(seed, 0)

    found: list[np.ndarray] = []
    best_residual = np.inf
    for _ in range(n_inits):
        c = rng.normal(scale=1.0, size=n - 1)
        for _ in range(200):
            u = basis @ c
            g = basis.T @ _grad(beta, argmax_class, u, true_class, n)
            res = np.linalg.norm(g)
            if res < 1e-12:
                break
            hess = basis.T @ _truncated_ce_hess(beta, argmax_class, u, n) @ basis
            try:
                step = np.linalg.solve(hess, g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(hess, g, rcond=None)[0]
            # trust-region style cap keeps the cubic's unbounded tail at bay
            ns = np.linalg.norm(step)
            if ns > 5.0:
                step *= 5.0 / ns
            c = c - step
        u = basis @ c
        res = np.linalg.norm(basis.T @ _grad(beta, argmax_class, u, true_class, n))
        best_residual = min(best_residual, res)
        if res > 1e-10 or not np.all(np.isfinite(u)):
            continue
        if u.max() >= beta:  # strict S-set constraint
            continue
        if not any(np.linalg.norm(u - v) < tol for v in found):
            found.append(u)
    if not found and best_residual > 1e-10:
        raise SearchError(
            f"no stationary point converged; best residual {best_residual:.3e}"
        )
    return found


def mean_field_loss_surface(
    grid_correct: np.ndarray,
    grid_wrong: np.ndarray,
    n_classes: int,
    error_rate: float,
    branch: str = "plus",
) -> np.ndarray:
    """Loss values on the (beta_correct, beta_wrong) grid; NaN where
    either beta is inadmissible for its case."""
    grid_correct = np.asarray(grid_correct, dtype=np.float64)
    grid_wrong = np.asarray(grid_wrong, dtype=np.float64)
    out = np.full((grid_correct.size, grid_wrong.size), np.nan)
    loss_c = np.full(grid_correct.size, np.nan)
    loss_w = np.full(grid_wrong.size, np.nan)
    for i, bc in enumerate(grid_correct):
        try:
            spec = SurrogateSpec(n_classes, float(bc), "correct", branch)
            if admissible(spec):
                loss_c[i] = exact_ce(surrogate_logit(spec, 0, 0), 0)
        except DomainError:
            pass
    for j, bw in enumerate(grid_wrong):
        try:
            spec = SurrogateSpec(n_classes, float(bw), "misclassified", branch)
            if admissible(spec):
                loss_w[j] = exact_ce(surrogate_logit(spec, 1, 0), 1)
        except DomainError:
            pass
    for i in range(grid_correct.size):
        for j in range(grid_wrong.size):
            if np.isfinite(loss_c[i]) and np.isfinite(loss_w[j]):
                out[i, j] = (1.0 - error_rate) * loss_c[i] + error_rate * loss_w[j]
    return out


def gap_shrinkage(inp: GapShiftInput, branch: str = "plus") -> float:
    """First-order change of the correct-sample logit gap under an attack."""
    p = inp.params
    n = p.n_classes
    f = f_pm(p.beta_correct, n, branch)
    g, _, psi = misclassified_coeffs(p.beta_wrong, n, branch)
    gap_c = p.beta_correct - f
    gap_w = p.beta_wrong - g
    eps = p.error_rate
    quad = (1.0 - eps) * inp.omega_correct * gap_c**2 + eps * inp.omega_wrong * gap_w**2
    cross = (
        2.0 * (n - 2) / (n - 1) * eps * inp.omega_wrong * gap_w * (g - psi)
    )
    return float(-quad - cross)
