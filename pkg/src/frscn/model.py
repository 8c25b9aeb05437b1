"""Model assembly: rule bank + sub-reservoirs + readouts, and baselines.

The deployable model pairs each fuzzy rule with one sub-reservoir. Its
prediction is the fire-strength-weighted sum of the per-rule readouts, which
is algebraically the stacked form Theta G(n). Models serialize to a versioned
JSON file that round-trips bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import NormalizationStats, TimeSeriesDataset, fit_normalization
from .errors import ModelFormatError
from .fuzzy import FcmConfig, FuzzyRuleBank, fire_strength_matrix, fire_strengths, fit_fcm
from .reservoir import ACTIVATIONS, SubReservoir
from .trainer import ScConfig, fit_readout, train_sub_reservoir

MODEL_FORMAT_VERSION = "frscn-1"


@dataclass(frozen=True)
class EsnConfig:
    """Fixed-size baseline reservoir settings (no supervisory growth)."""

    n_nodes: int = 100
    alpha: float = 0.9
    sparsity_range: tuple = (0.01, 0.05)
    ridge: float = 1e-8
    activation: str = "tanh"
    weight_scale: float = 1.0

    def __post_init__(self):
        if self.n_nodes < 1:
            raise ValueError("n_nodes must be >= 1")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        lo, hi = self.sparsity_range
        if not (0 < lo <= hi < 1):
            raise ValueError("sparsity_range must satisfy 0 < lo <= hi < 1")
        if self.ridge < 0:
            raise ValueError("ridge must be >= 0")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.weight_scale <= 0:
            raise ValueError("weight_scale must be positive")


@dataclass(frozen=True)
class FrscnModel:
    """Rule bank, Q sub-reservoirs, normalization stats, and run metadata."""

    rule_bank: FuzzyRuleBank
    sub_reservoirs: tuple
    normalization: NormalizationStats
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sub_reservoirs", tuple(self.sub_reservoirs))
        if self.rule_bank.n_rules != len(self.sub_reservoirs):
            raise ValueError("rule count must equal sub-reservoir count")
        k = self.rule_bank.n_inputs
        l_dims = set()
        for res in self.sub_reservoirs:
            if res.n_inputs != k:
                raise ValueError("all sub-reservoirs must share the rule bank's input dim")
            if res.w_out is None:
                raise ValueError("sub-reservoirs must have fitted readouts")
            l_dims.add(res.w_out.shape[0])
        if len(l_dims) != 1:
            raise ValueError("all sub-reservoirs must share one output dim")

    @property
    def n_rules(self) -> int:
        return self.rule_bank.n_rules

    @property
    def n_inputs(self) -> int:
        return self.rule_bank.n_inputs

    @property
    def n_outputs(self) -> int:
        return self.sub_reservoirs[0].w_out.shape[0]

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return predict(self, inputs)

    def session(self) -> "PredictionSession":
        return PredictionSession(self)


class PredictionSession:
    """Stateful step-by-step prediction; states reset at session start.

    Within one session the sub-reservoir states carry across consecutive
    steps. Sessions are single-owner: do not share across threads.
    """

    def __init__(self, model: FrscnModel):
        self.model = model
        self.states = [np.zeros(res.n_nodes) for res in model.sub_reservoirs]

    def reset(self):
        for x in self.states:
            x[:] = 0.0

    def features(self, u_raw: np.ndarray):
        """Advance one step; return (phi, per-rule [state; input] blocks).

        The input is normalized with the model's stats before anything else,
        so callers always pass raw-scale inputs.
        """
        u_raw = np.asarray(u_raw, dtype=float).ravel()
        u = self.model.normalization.apply_inputs(u_raw[:, None])[:, 0]
        phi = fire_strengths(self.model.rule_bank, u)
        blocks = []
        for i, res in enumerate(self.model.sub_reservoirs):
            g = ACTIVATIONS[res.activation]
            x = g(res.w_in @ u + res.w_r @ self.states[i] + res.b)
            self.states[i] = x
            blocks.append(np.concatenate([x, u]))
        return phi, blocks

    def step(self, u_raw: np.ndarray) -> np.ndarray:
        """One-step prediction in raw target scale."""
        phi, blocks = self.features(u_raw)
        y = np.zeros(self.model.n_outputs)
        for p, res, blk in zip(phi, self.model.sub_reservoirs, blocks):
            y += p * (res.w_out @ blk)
        return self.model.normalization.invert_targets(y[:, None])[:, 0]


def predict(model: FrscnModel, inputs: np.ndarray) -> np.ndarray:
    """Predict over a whole input sequence; one fresh session per call.

    Per sample: y(n) = sum_i phi_i(n) W_out^i [x^i(n); u(n)], with every
    sub-reservoir rolled forward from zero state at the sequence start.
    """
    u_raw = np.atleast_2d(np.asarray(inputs, dtype=float))
    if u_raw.shape[0] != model.n_inputs:
        raise ValueError(f"expected {model.n_inputs} input dims, got {u_raw.shape[0]}")
    u = model.normalization.apply_inputs(u_raw)
    phi = fire_strength_matrix(model.rule_bank, u)  # Q x n
    y = np.zeros((model.n_outputs, u.shape[1]))
    for i, res in enumerate(model.sub_reservoirs):
        states = res.rollout(u)
        y += phi[i][None, :] * res.readout(states, u)
    return model.normalization.invert_targets(y)


def stacked_readout(model: FrscnModel) -> np.ndarray:
    """Theta: the per-rule readouts concatenated along the feature axis."""
    return np.hstack([res.w_out for res in model.sub_reservoirs])


def stacked_features(phi: np.ndarray, blocks: list) -> np.ndarray:
    """G(n): the fire-strength-weighted per-rule blocks stacked into one vector."""
    return np.concatenate([p * blk for p, blk in zip(phi, blocks)])


def _derived_seeds(seed: int, count: int) -> list:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def train_frscn(
    train: TimeSeriesDataset,
    q: int = 5,
    sc_cfg: ScConfig | None = None,
    fcm_cfg: FcmConfig | None = None,
    seed: int = 0,
    normalize: bool = True,
    threads: int = 1,
    accept_hook=None,
) -> tuple[FrscnModel, list]:
    """Full training: rule extraction, per-rule supervisory growth, assembly.

    Every sub-reservoir is trained against the full target independently;
    fire strengths enter only when predictions are combined. With q == 1 the
    fuzzy layer is the identity and the result is the plain recurrent
    stochastic configuration model.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    sc_cfg = sc_cfg or ScConfig()
    fcm_cfg = fcm_cfg or FcmConfig()
    stats = fit_normalization(train, enabled=normalize)
    ds = stats.apply(train)

    seeds = _derived_seeds(seed, q + 1)
    bank = fit_fcm(ds.inputs[:, ds.washout :], q, replace(fcm_cfg, seed=seeds[0]))

    def train_rule(i: int):
        return train_sub_reservoir(ds, sc_cfg, seeds[i + 1], accept_hook=accept_hook)

    results = _parallel_map(train_rule, range(q), threads)
    reservoirs = [res for res, _ in results]
    reports = [rep for _, rep in results]
    model = FrscnModel(
        rule_bank=bank,
        sub_reservoirs=tuple(reservoirs),
        normalization=stats,
        metadata={
            "kind": "frscn",
            "q": q,
            "seed": seed,
            "sc_cfg": _cfg_dict(sc_cfg),
            "fcm_cfg": _cfg_dict(fcm_cfg),
            "normalize": normalize,
        },
    )
    return model, reports


def train_fesn(
    train: TimeSeriesDataset,
    q: int = 5,
    fcm_cfg: FcmConfig | None = None,
    esn_cfg: EsnConfig | None = None,
    seed: int = 0,
    normalize: bool = True,
) -> FrscnModel:
    """Baseline: same architecture with fixed-size randomly assigned reservoirs.

    Each sub-reservoir's weights are drawn once from a uniform distribution,
    the feedback matrix is sparsified and spectrally rescaled, and only the
    readout is fitted. With q == 1 this is the plain echo-state baseline.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    fcm_cfg = fcm_cfg or FcmConfig()
    esn_cfg = esn_cfg or EsnConfig()
    stats = fit_normalization(train, enabled=normalize)
    ds = stats.apply(train)
    k = ds.n_inputs

    seeds = _derived_seeds(seed, q + 1)
    bank = fit_fcm(ds.inputs[:, ds.washout :], q, replace(fcm_cfg, seed=seeds[0]))

    scale = esn_cfg.weight_scale
    reservoirs = []
    for i in range(q):
        rng = np.random.default_rng(seeds[i + 1])
        n = esn_cfg.n_nodes
        w_in = rng.uniform(-scale, scale, (n, k))
        density = rng.uniform(*esn_cfg.sparsity_range)
        w_r = rng.uniform(-scale, scale, (n, n))
        w_r *= rng.random((n, n)) < density
        w_r = np.tril(w_r, -1)
        # self-loops always present: the diagonal carries the state memory
        w_r[np.arange(n), np.arange(n)] = rng.uniform(-scale, scale, n)
        b = rng.uniform(-scale, scale, n)
        res = SubReservoir(
            w_in=w_in, w_r=w_r, b=b, activation=esn_cfg.activation, alpha=esn_cfg.alpha
        ).rescale(esn_cfg.alpha)
        states = res.rollout(ds.inputs)
        w_out, _ = fit_readout(states, ds.inputs, ds.targets, esn_cfg.ridge, ds.washout)
        reservoirs.append(replace(res, w_out=w_out))

    return FrscnModel(
        rule_bank=bank,
        sub_reservoirs=tuple(reservoirs),
        normalization=stats,
        metadata={
            "kind": "fesn",
            "q": q,
            "seed": seed,
            "esn_cfg": _cfg_dict(esn_cfg),
            "fcm_cfg": _cfg_dict(fcm_cfg),
            "normalize": normalize,
        },
    )


def _cfg_dict(cfg) -> dict:
    out = {}
    for name, value in vars(cfg).items():
        if isinstance(value, tuple):
            out[name] = list(value)
        else:
            out[name] = value
    return out


def _parallel_map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def save_model(model: FrscnModel, path) -> None:
    """Write the model as versioned JSON; floats keep full binary precision."""
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "metadata": model.metadata,
        "normalization": {
            "enabled": model.normalization.enabled,
            "input_min": model.normalization.input_min.tolist(),
            "input_max": model.normalization.input_max.tolist(),
            "target_min": model.normalization.target_min.tolist(),
            "target_max": model.normalization.target_max.tolist(),
        },
        "rule_bank": {
            "centers": model.rule_bank.centers.tolist(),
            "widths": model.rule_bank.widths.tolist(),
        },
        "sub_reservoirs": [
            {
                "w_in": res.w_in.tolist(),
                "w_r": res.w_r.tolist(),
                "b": res.b.tolist(),
                "w_out": res.w_out.tolist(),
                "activation": res.activation,
                "alpha": res.alpha,
            }
            for res in model.sub_reservoirs
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_model(path) -> FrscnModel:
    """Load a model written by save_model; strict about version and shape."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not a valid model file ({exc})") from None
    if not isinstance(doc, dict) or "version" not in doc:
        raise ModelFormatError(f"{path}: missing version field")
    if doc["version"] != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: expected version {MODEL_FORMAT_VERSION!r}, found {doc['version']!r}"
        )
    try:
        norm = doc["normalization"]
        stats = NormalizationStats(
            input_min=np.asarray(norm["input_min"], dtype=float),
            input_max=np.asarray(norm["input_max"], dtype=float),
            target_min=np.asarray(norm["target_min"], dtype=float),
            target_max=np.asarray(norm["target_max"], dtype=float),
            enabled=bool(norm["enabled"]),
        )
        bank = FuzzyRuleBank(
            centers=np.asarray(doc["rule_bank"]["centers"], dtype=float),
            widths=np.asarray(doc["rule_bank"]["widths"], dtype=float),
        )
        reservoirs = tuple(
            SubReservoir(
                w_in=np.asarray(r["w_in"], dtype=float),
                w_r=np.asarray(r["w_r"], dtype=float),
                b=np.asarray(r["b"], dtype=float),
                w_out=np.asarray(r["w_out"], dtype=float),
                activation=r["activation"],
                alpha=float(r["alpha"]),
            )
            for r in doc["sub_reservoirs"]
        )
        return FrscnModel(
            rule_bank=bank,
            sub_reservoirs=reservoirs,
            normalization=stats,
            metadata=doc.get("metadata", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"{path}: malformed model file ({exc})") from None
