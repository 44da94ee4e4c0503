"""Adiabatic states, their tracking along paths, and non-adiabatic couplings.

All routines work on stacks of matrices: a leading batch shape is carried
through unchanged.  ``T[..., n, k]`` is the diabatic component ``n`` of the
adiabatic state ``k``.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateFrameError, NumericalFailure

DEGENERACY_THRESHOLD = 1e-10


@dataclass(frozen=True)
class AdiabaticFrame:
    E: np.ndarray
    T: np.ndarray
    d: Optional[np.ndarray]
    min_gap: float


def _eigh_2x2(V):
    a, b, c = V[..., 0, 0], V[..., 0, 1], V[..., 1, 1]
    mean = 0.5 * (a + c)
    half = 0.5 * (a - c)
    r = np.hypot(half, b)
    theta = 0.5 * np.arctan2(b, half)
    cs, sn = np.cos(theta), np.sin(theta)
    E = np.stack([mean - r, mean + r], axis=-1)
    T = np.empty(V.shape)
    T[..., 0, 0], T[..., 1, 0] = -sn, cs
    T[..., 0, 1], T[..., 1, 1] = cs, sn
    return E, T


def _eigh(V):
    if V.shape[-1] == 2:
        return _eigh_2x2(V)
    if V.shape[-1] == 1:
        return V[..., 0].copy(), np.ones(V.shape)
    return np.linalg.eigh(V)


def align_columns(E, T, T_prev):
    """Reorder and flip the columns of T to follow T_prev (greedy maximum overlap)."""
    F = T.shape[-1]
    batch = T.shape[:-2]
    O = np.swapaxes(T, -1, -2) @ T_prev  # O[n, m] = <new n | old m>
    A = np.abs(O).reshape((-1, F, F)).copy()
    B = A.shape[0]
    rows = np.arange(B)
    perm = np.empty((B, F), dtype=np.intp)
    for _ in range(F):
        flat = A.reshape(B, -1).argmax(axis=-1)
        n, m = np.divmod(flat, F)
        perm[rows, m] = n
        A[rows, n, :] = -1.0
        A[rows, :, m] = -1.0
    perm = perm.reshape(batch + (F,))
    T = np.take_along_axis(T, perm[..., None, :], axis=-1)
    E = np.take_along_axis(E, perm, axis=-1)
    overlap = np.einsum("...nk,...nk->...k", T, T_prev)
    T = T * np.where(overlap < 0, -1.0, 1.0)[..., None, :]
    return E, T


def _jacobi_follow(V, T_prev, max_sweeps=12):
    """Diagonalize V starting from the nearly diagonalizing basis T_prev.

    Returns (E, T, converged).  Small rotations keep the column order and
    sign of T_prev, which is what continuity along a path needs.
    """
    F = V.shape[-1]
    A = np.swapaxes(T_prev, -1, -2) @ V @ T_prev
    Q = T_prev.copy()
    iu = np.triu_indices(F, 1)
    for _ in range(max_sweeps):
        scale = np.max(np.abs(np.diagonal(A, axis1=-2, axis2=-1)), axis=-1) + 1e-300
        off = np.max(np.abs(A[..., iu[0], iu[1]]), axis=-1)
        if np.all(off <= 1e-15 * scale):
            break
        for p, q in zip(*iu):
            apq = A[..., p, q]
            active = apq != 0.0
            if not np.any(active):
                continue
            safe = np.where(active, apq, 1.0)
            theta = (A[..., q, q] - A[..., p, p]) / (2.0 * safe)
            t = np.where(active, np.copysign(1.0, theta) / (np.abs(theta) + np.sqrt(theta * theta + 1.0)), 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            cc, ss = c[..., None], s[..., None]
            Ap, Aq = A[..., :, p].copy(), A[..., :, q].copy()
            A[..., :, p], A[..., :, q] = cc * Ap - ss * Aq, ss * Ap + cc * Aq
            Ap, Aq = A[..., p, :].copy(), A[..., q, :].copy()
            A[..., p, :], A[..., q, :] = cc * Ap - ss * Aq, ss * Ap + cc * Aq
            Qp, Qq = Q[..., :, p].copy(), Q[..., :, q].copy()
            Q[..., :, p], Q[..., :, q] = cc * Qp - ss * Qq, ss * Qp + cc * Qq
    scale = np.max(np.abs(np.diagonal(A, axis1=-2, axis2=-1)), axis=-1) + 1e-300
    off = np.max(np.abs(A[..., iu[0], iu[1]]), axis=-1)
    overlap = np.einsum("...nk,...nk->...k", Q, T_prev)
    converged = (off <= 1e-13 * scale) & np.all(overlap > 0.5, axis=-1)
    return np.diagonal(A, axis1=-2, axis2=-1).copy(), Q, converged


def diagonalize(V, T_prev=None):
    """Eigen-decomposition of a stack of real symmetric matrices.

    Without ``T_prev`` energies come out ascending.  With ``T_prev`` the
    columns are aligned to it so that each adiabatic state is followed
    continuously.
    """
    V = np.asarray(V, dtype=float)
    F = V.shape[-1]
    if T_prev is None:
        return _eigh(V)
    if F == 3:
        # measured: cheaper than LAPACK plus matching for 3x3, not for larger F
        E, T, ok = _jacobi_follow(V, T_prev)
        if not np.all(ok):
            bad = ~ok
            E2, T2 = align_columns(*np.linalg.eigh(V[bad]), T_prev[bad])
            E[bad], T[bad] = E2, T2
        return E, T
    E, T = _eigh(V)
    return align_columns(E, T, T_prev)


def gaps(E):
    """Smallest pairwise energy gap along the last axis."""
    diff = np.abs(E[..., :, None] - E[..., None, :])
    F = E.shape[-1]
    diff[..., np.arange(F), np.arange(F)] = np.inf
    return diff.min(axis=(-2, -1))


def coupling_matrix(E, T, G):
    """(T^T G T)_kl / (E_l - E_k) with zero diagonal; G may carry extra leading axes
    between the batch and the matrix axes (e.g. the nuclear DOF axis)."""
    D = np.swapaxes(T, -1, -2)[..., None, :, :] @ G @ T[..., None, :, :] if G.ndim > T.ndim else \
        np.swapaxes(T, -1, -2) @ G @ T
    dE = E[..., None, :] - E[..., :, None]
    if G.ndim > T.ndim:
        dE = dE[..., None, :, :]
    F = E.shape[-1]
    off = ~np.eye(F, dtype=bool)
    out = np.zeros_like(D)
    with np.errstate(divide="ignore", invalid="ignore"):
        np.divide(D, dE, out=out, where=np.broadcast_to(off, D.shape))
    return out


def _raise_if_degenerate(E):
    F = E.shape[-1]
    diff = np.abs(E[..., :, None] - E[..., None, :])
    diff[..., np.arange(F), np.arange(F)] = np.inf
    flat = diff.reshape(-1, F * F)
    worst = np.unravel_index(np.argmin(flat), flat.shape)
    gap = flat[worst]
    if gap < DEGENERACY_THRESHOLD:
        k, l = divmod(worst[1], F)
        raise DegenerateFrameError((min(k, l), max(k, l)), gap)
    return float(np.min(diff)) if F > 1 else np.inf


def adiabatic_frame(V, dV=None, prev=None):
    """Adiabatic frame at one configuration (or a stack of them).

    ``dV`` has shape (..., N, F, F); when given the coupling vectors
    ``d[..., J, k, l] = <phi_k | d phi_l / dR_J>`` are computed from the
    Hellmann-Feynman expression.
    """
    V = np.asarray(V, dtype=float)
    if np.max(np.abs(V - np.swapaxes(V, -1, -2)), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(V))):
        raise NumericalFailure("potential matrix is not symmetric")
    E, T = diagonalize(V, None if prev is None else prev.T)
    min_gap = _raise_if_degenerate(E)
    d = None if dV is None else coupling_matrix(E, T, np.asarray(dV, dtype=float))
    return AdiabaticFrame(E, T, d, min_gap)


def effective_potential(frame, P, masses):
    """diag(E) - i sum_J (P_J / M_J) d_J."""
    v = np.asarray(P, dtype=float) / masses
    vd = np.einsum("...j,...jkl->...kl", v, frame.d)
    F = frame.E.shape[-1]
    return frame.E[..., :, None] * np.eye(F) - 1j * vd


def canonical_adiabatic_momentum(P, g, Gamma, frame, rtol=1e-10):
    """Canonical momentum in the adiabatic representation from the kinematic one."""
    g = np.asarray(g)
    rho = 0.5 * g[..., :, None] * np.conj(g)[..., None, :] - np.asarray(Gamma)
    # sum_mn rho_nm d_mn for each nuclear DOF
    term = 1j * np.einsum("...nm,...jmn->...j", rho, frame.d)
    scale = np.max(np.abs(rho)) * np.max(np.abs(frame.d), initial=0.0) + 1e-300
    if np.max(np.abs(term.imag), initial=0.0) > rtol * scale:
        raise NumericalFailure("canonical momentum picked up an imaginary part")
    return np.asarray(P, dtype=float) + term.real


def gauge_tensor_diagnostic(model, R, h=1e-4):
    """Finite-difference field tensor of the derivative couplings.

    Entry [I, J] is dA_J/dR_I - dA_I/dR_J + i [A_I, A_J] with A_J = -i d_J.
    Only meant for small models (a handful of nuclear DOFs).
    """
    R = np.asarray(R, dtype=float)
    N, F = model.N, model.F
    centre = adiabatic_frame(model.potential(R), model.gradient(R))
    A = -1j * centre.d
    dA = np.empty((N, N, F, F), dtype=complex)  # dA[I, J] = d A_J / d R_I
    for I in range(N):
        step = np.zeros(N)
        step[I] = h
        ends = []
        for sign in (1.0, -1.0):
            Rs = R + sign * step
            ends.append(adiabatic_frame(model.potential(Rs), model.gradient(Rs), prev=centre))
        dA[I] = (-1j * ends[0].d - -1j * ends[1].d) / (2.0 * h)
    out = dA - np.swapaxes(dA, 0, 1)
    out = out + 1j * (np.einsum("ikl,jlm->ijkm", A, A) - np.einsum("jkl,ilm->ijkm", A, A))
    return out
