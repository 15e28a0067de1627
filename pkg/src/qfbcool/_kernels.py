"""Compiled inner loop for batched Kraus-form trajectory steps."""

import numba as nb
import numpy as np


@nb.njit(cache=True)
def kraus_step_batch(rho, A0, A1, L, Lsum, f, dW, dt, x_out, dy_out):
    """Advance every state in ``rho`` (shape ``(B, N, N)``) by one step, in place.

    ``A0``/``A1`` are ``I + (-i H_f - L^+L/2) dt`` for ``f = 0, 1`` and
    ``Lsum = L + L^+``. Writes the pre-step drift ``Tr[Lsum rho]`` to
    ``x_out`` and the record increment to ``dy_out``; returns the smallest
    unnormalised trace seen in the batch.
    """
    B, N, _ = rho.shape
    M = np.empty((N, N), np.complex128)
    T = np.empty((N, N), np.complex128)
    min_tr = np.inf
    for b in range(B):
        x = 0.0
        for i in range(N):
            for j in range(N):
                x += (Lsum[i, j] * rho[b, j, i]).real
        dy = x * dt + dW[b]
        if f[b] != 0:
            for i in range(N):
                for j in range(N):
                    M[i, j] = A1[i, j] + dy * L[i, j]
        else:
            for i in range(N):
                for j in range(N):
                    M[i, j] = A0[i, j] + dy * L[i, j]
        for i in range(N):
            for j in range(N):
                s = 0j
                for k in range(N):
                    s += M[i, k] * rho[b, k, j]
                T[i, j] = s
        tr = 0.0
        for i in range(N):
            for j in range(i, N):
                s = 0j
                for k in range(N):
                    s += T[i, k] * M[j, k].conjugate()
                if i == j:
                    rho[b, i, i] = s.real
                    tr += s.real
                else:
                    rho[b, i, j] = s
                    rho[b, j, i] = s.conjugate()
        inv = 1.0 / tr
        for i in range(N):
            for j in range(N):
                rho[b, i, j] *= inv
        if tr < min_tr:
            min_tr = tr
        x_out[b] = x
        dy_out[b] = dy
    return min_tr
