"""Full-horizon matrices and the integer least-squares form of both controllers.

Frequency tracking (``"ft"``) stacks ``[u_ph(l); p(l)]`` per step, six
entries each.  Frequency limiting (``"fl"``) stacks ``[u_ph(l); s(l+1)]``,
four entries each.  In both cases the horizon cost equals
``||U_hat - V U||^2`` plus a term that does not depend on ``U``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import block_diag, solve_triangular

from .plant import PlantMatrices, SystemParams, discretize
from .swfreq import FilterParams, filter_matrices

FT = "ft"
FL = "fl"
STEP_SIZE = {FT: 6, FL: 4}


@dataclass(frozen=True)
class AugmentedModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray


def augmented_ft(plant: PlantMatrices, fp: FilterParams, f_base: float = 1.0) -> AugmentedModel:
    """Plant current and filter state side by side; input ``[u_ph; p]``.

    The frequency output is expressed in units of ``f_base`` Hz.
    """
    A_sw, B_sw, C_sw = filter_matrices(fp)
    return AugmentedModel(
        A=block_diag(plant.A, A_sw),
        B=block_diag(plant.B, B_sw),
        C=block_diag(plant.C, C_sw / f_base),
        D=np.vstack([plant.D, np.zeros((2, 3))]),
    )


def augmented_fl(plant: PlantMatrices) -> AugmentedModel:
    """Plant current only; the slack input enters through a zero column."""
    return AugmentedModel(
        A=plant.A.copy(),
        B=np.hstack([plant.B, np.zeros((2, 1))]),
        C=plant.C.copy(),
        D=plant.D.copy(),
    )


def build_prediction(model: AugmentedModel, N_p: int):
    """Return ``(Gamma, Upsilon, Psi)`` so that
    ``Y = Gamma x + Upsilon U + Psi [v_g; ...; v_g]``."""
    if N_p < 1:
        raise ValueError("horizon must be at least one step")
    A, B, C, D = model.A, model.B, model.C, model.D
    q, n = C.shape
    m = B.shape[1]
    nd = D.shape[1]
    powers = [np.eye(n)]
    for _ in range(N_p):
        powers.append(A @ powers[-1])
    Gamma = np.vstack([C @ powers[i + 1] for i in range(N_p)])
    Upsilon = np.zeros((q * N_p, m * N_p))
    Psi = np.zeros((q * N_p, nd * N_p))
    for i in range(N_p):
        for j in range(i + 1):
            CA = C @ powers[i - j]
            Upsilon[q * i:q * (i + 1), m * j:m * (j + 1)] = CA @ B
            Psi[q * i:q * (i + 1), nd * j:nd * (j + 1)] = CA @ D
    return Gamma, Upsilon, Psi


def build_pi_e_ft(N_p: int):
    """Return ``(Pi_T, E_T)`` with ``P = Pi_T U_T - E_T u_T(k-1)`` stacking
    ``[du(l); p(l)]`` per step."""
    if N_p < 1:
        raise ValueError("horizon must be at least one step")
    I3 = np.eye(3)
    Pi = np.zeros((6 * N_p, 6 * N_p))
    for l in range(N_p):
        r = 6 * l
        Pi[r:r + 3, r:r + 3] = I3
        Pi[r + 3:r + 6, r + 3:r + 6] = I3
        if l > 0:
            Pi[r:r + 3, r - 6:r - 3] = -I3
    E = np.zeros((6 * N_p, 6))
    E[:3, :3] = I3
    return Pi, E


def build_pi_e_l_fl(N_p: int):
    """Return ``(Pi_S, E_S, L_S)``; the slack rows of ``Pi_S`` are zero and
    ``L_S`` picks every fourth entry of ``U_S``."""
    if N_p < 1:
        raise ValueError("horizon must be at least one step")
    I3 = np.eye(3)
    Pi = np.zeros((4 * N_p, 4 * N_p))
    L = np.zeros((N_p, 4 * N_p))
    for l in range(N_p):
        r = 4 * l
        Pi[r:r + 3, r:r + 3] = I3
        if l > 0:
            Pi[r:r + 3, r - 4:r - 1] = -I3
        L[l, r + 3] = 1.0
    E = np.zeros((4 * N_p, 4))
    E[:3, :3] = I3
    return Pi, E, L


def lower_generator(H: np.ndarray) -> np.ndarray:
    """Lower-triangular ``V`` with ``V.T @ V == H``.

    Cholesky of the index-reversed Hessian, reversed back.  Raises
    ``ValueError`` if ``H`` is not positive definite.
    """
    Hr = H[::-1, ::-1]
    try:
        Lr = np.linalg.cholesky(Hr)
    except np.linalg.LinAlgError as exc:
        raise ValueError("Hessian is not positive definite; check the weights") from exc
    return np.ascontiguousarray(Lr.T[::-1, ::-1])


@dataclass(frozen=True)
class HorizonProblem:
    kind: str
    N_p: int
    Gamma: np.ndarray
    Upsilon: np.ndarray
    Psi: np.ndarray
    Pi: np.ndarray
    E: np.ndarray
    L_slack: Optional[np.ndarray]
    Q_bar: np.ndarray
    H: np.ndarray
    V: np.ndarray
    lambda_u: float
    lambda_sw: float
    plant: PlantMatrices
    filt: FilterParams
    f_base: float = 1.0  # Hz per unit of switching frequency in the cost

    @property
    def step_size(self) -> int:
        return STEP_SIZE[self.kind]

    @property
    def dim(self) -> int:
        return self.step_size * self.N_p

    @property
    def du_weight(self) -> float:
        # ||P||^2 counts each transition twice in the tracking form
        return self.lambda_u / 2.0 if self.kind == FT else self.lambda_u


def _freeze(*arrays):
    for a in arrays:
        if a is not None:
            a.setflags(write=False)


def _check_base(f_base):
    if not f_base > 0:
        raise ValueError("frequency base must be positive")


def assemble_ft(params: SystemParams, fp: FilterParams, N_p: int = 5,
                lambda_u: float = 13e-3, lambda_sw: float = 60.0, f_base: float = 1.0,
                hessian_perturbation: Optional[np.ndarray] = None) -> HorizonProblem:
    """Horizon problem of the frequency-tracking controller."""
    if lambda_u <= 0 or lambda_sw < 0:
        raise ValueError("weights must satisfy lambda_u > 0 and lambda_sw >= 0")
    _check_base(f_base)
    plant = discretize(params)
    Gamma, Upsilon, Psi = build_prediction(augmented_ft(plant, fp, f_base), N_p)
    Pi, E = build_pi_e_ft(N_p)
    Q_bar = np.kron(np.eye(N_p), np.diag([1.0, 1.0, lambda_sw]))
    H = Upsilon.T @ Q_bar @ Upsilon + (lambda_u / 2.0) * Pi.T @ Pi
    H = 0.5 * (H + H.T)
    V = lower_generator(H if hessian_perturbation is None else H + hessian_perturbation)
    _freeze(Gamma, Upsilon, Psi, Pi, E, Q_bar, H, V)
    return HorizonProblem(FT, N_p, Gamma, Upsilon, Psi, Pi, E, None, Q_bar, H, V,
                          lambda_u, lambda_sw, plant, fp, f_base)


def assemble_fl(params: SystemParams, fp: FilterParams, N_p: int = 5,
                lambda_u: float = 13e-3, lambda_sw: float = 60.0, f_base: float = 1.0,
                hessian_perturbation: Optional[np.ndarray] = None) -> HorizonProblem:
    """Horizon problem of the frequency-limiting controller.

    Slacks enter the cost in units of ``f_base`` Hz.
    """
    if lambda_u <= 0 or lambda_sw <= 0:
        raise ValueError("weights must be positive")
    _check_base(f_base)
    plant = discretize(params)
    Gamma, Upsilon, Psi = build_prediction(augmented_fl(plant), N_p)
    Pi, E, L = build_pi_e_l_fl(N_p)
    Q_bar = np.eye(2 * N_p)
    H = Upsilon.T @ Upsilon + lambda_sw * L.T @ L + lambda_u * Pi.T @ Pi
    H = 0.5 * (H + H.T)
    V = lower_generator(H if hessian_perturbation is None else H + hessian_perturbation)
    _freeze(Gamma, Upsilon, Psi, Pi, E, L, Q_bar, H, V)
    return HorizonProblem(FL, N_p, Gamma, Upsilon, Psi, Pi, E, L, Q_bar, H, V,
                          lambda_u, lambda_sw, plant, fp, f_base)


def assemble(kind: str, params: SystemParams, fp: FilterParams, **kw) -> HorizonProblem:
    if kind == FT:
        return assemble_ft(params, fp, **kw)
    if kind == FL:
        return assemble_fl(params, fp, **kw)
    raise ValueError(f"unknown controller kind {kind!r}")


@dataclass(frozen=True)
class UnconstrainedPoint:
    U_hat: np.ndarray
    Theta: np.ndarray


def _prev_input(problem: HorizonProblem, u_prev) -> np.ndarray:
    u_prev = np.asarray(u_prev, dtype=float)
    full = np.zeros(problem.step_size)
    if u_prev.shape not in ((3,), (problem.step_size,)):
        raise ValueError(f"u_prev must have 3 or {problem.step_size} entries")
    full[:u_prev.size] = u_prev
    return full


def free_response(problem: HorizonProblem, x, v_g) -> np.ndarray:
    """Predicted outputs with every input held at zero."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.Gamma.shape[1],):
        raise ValueError(f"state must have {problem.Gamma.shape[1]} entries")
    V_g = np.tile(np.asarray(v_g, dtype=float), problem.N_p)
    return problem.Gamma @ x + problem.Psi @ V_g


def linear_term(problem: HorizonProblem, x, v_g, Y_star, u_prev) -> UnconstrainedPoint:
    """Linear cost term and unconstrained solution for one control step.

    ``x`` is ``[i_alpha, i_beta, x_sw1, x_sw2]`` for frequency tracking and
    ``[i_alpha, i_beta]`` for frequency limiting.  ``Y_star`` stacks the
    output references of steps k+1 .. k+N_p; frequency references are in Hz.
    """
    Y_star = np.array(Y_star, dtype=float).ravel()
    if Y_star.shape != (problem.Gamma.shape[0],):
        raise ValueError(f"reference must have {problem.Gamma.shape[0]} entries")
    if problem.kind == FT:
        Y_star[2::3] /= problem.f_base
    residual = free_response(problem, x, v_g) - Y_star
    Theta = (problem.Upsilon.T @ (problem.Q_bar @ residual)
             - problem.du_weight * problem.Pi.T @ (problem.E @ _prev_input(problem, u_prev)))
    # U_hat = -V H^-1 Theta = -V^-T Theta
    U_hat = -solve_triangular(problem.V, Theta, trans="T", lower=True)
    return UnconstrainedPoint(U_hat=U_hat, Theta=Theta)


def ils_cost(problem: HorizonProblem, U_hat, U) -> float:
    r = np.asarray(U_hat) - problem.V @ np.asarray(U, dtype=float)
    return float(r @ r)
