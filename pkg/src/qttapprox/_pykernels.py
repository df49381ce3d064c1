"""Numpy implementation of the contraction kernels (fallback backend)."""
from __future__ import annotations

import numpy as np


def tt_contract(cores, digits: np.ndarray, phis: np.ndarray) -> np.ndarray:
    """Contract the train at every point; see the compiled twin for the layout."""
    nd = digits.shape[1]
    npoly = phis.shape[1]
    if len(cores) != nd + npoly:
        raise ValueError("number of cores does not match digits and polynomial factors")
    N = digits.shape[0]
    v = np.ones((N, 1))
    for k in range(nd):
        # gather the slices selected by each point's digit: (r, N, s)
        sl = cores[k][:, digits[:, k], :]
        v = np.einsum("pr,rps->ps", v, sl)
    for k in range(npoly):
        v = np.einsum("pr,rns,pn->ps", v, cores[nd + k], phis[:, k, :], optimize=True)
    return v[:, 0].copy()
