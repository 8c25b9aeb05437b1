"""Online adaptation of the stacked readout by a recursive projection update.

Theta is updated from streaming samples through the gain matrix H, the
inverse of the accumulated feature outer products plus the c-scaled identity
it is initialized from. Each step applies the rank-one inverse-update
identity, so no matrix is ever inverted explicitly. Only the readout adapts;
rules and reservoir weights stay fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TimeSeriesDataset
from .model import FrscnModel, stacked_features, stacked_readout


@dataclass
class OnlineState:
    """Mutable readout-adaptation state; steps are strictly sequential.

    theta: current stacked readout, L x D.
    h: D x D gain matrix (inverse information matrix), symmetric positive
       definite; initialized to (1/c) I.
    a: gain factor in (0, 1]; c: positive initialization constant.
    """

    theta: np.ndarray
    h: np.ndarray
    a: float = 1.0
    c: float = 1e-2
    step_count: int = 0
    block_sizes: tuple = ()

    def assert_spd(self):
        """Cholesky-feasibility probe of the gain matrix."""
        np.linalg.cholesky(self.h)


def init_online(model: FrscnModel, a: float = 1.0, c: float = 1e-2) -> OnlineState:
    """Assemble Theta from the model's readouts and set H to (1/c) I."""
    if not 0 < a <= 1:
        raise ValueError("a must be in (0, 1]")
    if not c > 0:
        raise ValueError("c must be positive")
    theta = stacked_readout(model)
    dim = theta.shape[1]
    return OnlineState(
        theta=theta.copy(),
        h=np.eye(dim) / c,
        a=a,
        c=c,
        block_sizes=tuple(res.n_nodes + model.n_inputs for res in model.sub_reservoirs),
    )


def online_step(st: OnlineState, g_n: np.ndarray, t_n: np.ndarray):
    """One projection update; returns (state, prior error e_s(n)).

    e_s(n) = t(n) - Theta(n-1) G(n). H absorbs G(n) G(n)^T through the
    rank-one inverse-update identity, then
    Theta^T(n) = Theta^T(n-1) + a H(n) G(n) e_s^T(n).
    Non-finite inputs are rejected with the state unchanged.
    """
    g = np.asarray(g_n, dtype=float).ravel()
    t = np.asarray(t_n, dtype=float).ravel()
    if g.shape[0] != st.theta.shape[1]:
        raise ValueError(f"feature vector has {g.shape[0]} entries, expected {st.theta.shape[1]}")
    if t.shape[0] != st.theta.shape[0]:
        raise ValueError(f"target has {t.shape[0]} entries, expected {st.theta.shape[0]}")
    if not (np.isfinite(g).all() and np.isfinite(t).all()):
        return st, None

    e_s = t - st.theta @ g
    hg = st.h @ g
    st.h -= np.outer(hg, hg) / (1.0 + g @ hg)
    st.theta += st.a * np.outer(e_s, st.h @ g)
    st.step_count += 1
    return st, e_s


def run_online(
    model: FrscnModel,
    st: OnlineState,
    ds: TimeSeriesDataset,
    record_thetas: bool = False,
):
    """Stream a dataset through the projection update.

    Sub-reservoir states evolve over every sample, but updates (and the error
    trace) start after the washout. On completion the adapted Theta blocks
    are written back into a copy of the model's per-rule readouts. Returns
    (updated model, error trace L x n_updates[, theta snapshots]).
    """
    if ds.n_inputs != model.n_inputs or ds.n_outputs != model.n_outputs:
        raise ValueError("dataset dimensions do not match the model")
    session = model.session()
    errors = []
    thetas = [] if record_thetas else None
    for n in range(ds.n_samples):
        phi, blocks = session.features(ds.inputs[:, n])
        if n < ds.washout:
            continue
        g_n = stacked_features(phi, blocks)
        t_n = model.normalization.apply_targets(ds.targets[:, n][:, None])[:, 0]
        _, e_s = online_step(st, g_n, t_n)
        if e_s is not None:
            errors.append(e_s)
            if record_thetas:
                thetas.append(st.theta.copy())

    updated = _write_back(model, st)
    trace = np.array(errors).T if errors else np.zeros((model.n_outputs, 0))
    if record_thetas:
        return updated, trace, thetas
    return updated, trace


def _write_back(model: FrscnModel, st: OnlineState) -> FrscnModel:
    from dataclasses import replace

    offset = 0
    reservoirs = []
    for res, size in zip(model.sub_reservoirs, st.block_sizes):
        block = st.theta[:, offset : offset + size]
        reservoirs.append(replace(res, w_out=block.copy()))
        offset += size
    return replace(model, sub_reservoirs=tuple(reservoirs))


def contraction_diagnostic(theta_history, theta_ref: np.ndarray) -> np.ndarray:
    """Deviation norms ||Theta(n) - Theta_ref|| over a history of snapshots.

    Pass the true readout as the reference in tests, or the final adapted
    readout in field use, to obtain the convergence curve.
    """
    ref = np.asarray(theta_ref, dtype=float)
    return np.array([float(np.linalg.norm(th - ref)) for th in theta_history])
