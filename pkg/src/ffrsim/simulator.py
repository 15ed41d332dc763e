"""Monte Carlo engine for the downlink SIR of a typical user under modified FFR.

One *drop* is an independent realisation of BS and user positions,
association, sub-band occupancy and fading. The typical user sits at the
window centre and is user 0 of every drop.

Every random quantity of drop ``i`` comes from
``SeedSequence(master_seed, spawn_key=(i,))``, split into four child streams
(BS positions, user positions, typical-user fading, interferer draws). The
draws never depend on the FFR or path-loss parameters, so many parameter
variants can be scored against the same drops; :func:`estimate_many` does
exactly that.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from numba import njit

from . import geometry
from .errors import ParameterError
from .ffr import FfrConfig, UserClass, classify, db_to_linear, tx_power
from .geometry import Association, Window
from .pathloss import PathLossParams, loss

_STREAMS = 4
_BS, _USERS, _TYPICAL, _INTERF = range(_STREAMS)


@dataclass(frozen=True)
class SimConfig:
    lambda_bs: float = 1e-2
    lambda_user: float = 1e-1
    window: Window = field(default_factory=Window)
    ffr: FfrConfig = field(default_factory=FfrConfig)
    pathloss: PathLossParams = field(default_factory=PathLossParams)
    coverage_threshold_db: float = -20.0
    n_drops: int = 100_000
    master_seed: int = 20250101
    reuse_broadcast_fade: bool = False

    def __post_init__(self) -> None:
        if not self.lambda_bs > 0:
            raise ParameterError("lambda_bs must be positive")
        if not self.lambda_user >= 0:
            raise ParameterError("lambda_user must be non-negative")
        if self.n_drops < 1:
            raise ParameterError("n_drops must be >= 1")
        if not math.isfinite(self.coverage_threshold_db):
            raise ParameterError("coverage_threshold_db must be finite")
        if not 0 <= self.master_seed < 2**64:
            raise ParameterError("master_seed must be a 64-bit unsigned integer")

    @property
    def coverage_threshold(self) -> float:
        return db_to_linear(self.coverage_threshold_db)

    def replace(self, **changes) -> "SimConfig":
        return replace(self, **changes)


@dataclass
class Fading:
    """Unit-mean exponential power gains and occupancy uniforms of one drop.

    Per-BS arrays are indexed by BS. ``selected`` holds the broadcast gains
    (to the nearest and second-nearest BS) of the user each BS would serve on
    the typical user's sub-band.
    """

    typical_broadcast: np.ndarray  # (g1, g2)
    typical_data: float
    interferer: np.ndarray
    selected: np.ndarray
    occupancy_u: np.ndarray
    selection_u: np.ndarray


@dataclass
class Scenario:
    """One drop. User 0 is the typical user.

    ``selected[k]`` is the user BS ``k`` serves on the typical user's
    sub-band (-1 for an idle BS); ``selected_r1``/``selected_r2`` are that
    user's distances to its nearest and second-nearest BS.
    """

    bss: np.ndarray
    users: np.ndarray
    typical: np.ndarray
    association: Association
    fading: Fading
    r1: float
    r2: float
    selected: np.ndarray
    selected_r1: np.ndarray
    selected_r2: np.ndarray

    @property
    def serving(self) -> int:
        return int(self.association.serving[0])


@dataclass(frozen=True)
class DropOutcome:
    sir: float
    user_class: UserClass
    covered: bool
    interferer_count: int


@dataclass(frozen=True)
class Estimate:
    coverage: float
    ceu_density: float
    ci_half_width: float
    ceu_ci_half_width: float
    n_drops: int
    covered: int
    ceu: int
    covered_ceu: int

    @property
    def coverage_ccu(self) -> float:
        """Coverage conditioned on the typical user being a CCU."""
        n = self.n_drops - self.ceu
        return (self.covered - self.covered_ceu) / n if n else math.nan

    @property
    def coverage_ceu(self) -> float:
        return self.covered_ceu / self.ceu if self.ceu else math.nan


def ci_half_width(p: float, n: int) -> float:
    """95% normal-approximation half-width.

    ``p`` is kept half a count away from 0 and 1 so the width stays
    positive for all-or-nothing outcomes.
    """
    q = min(max(p, 0.5 / n), 1.0 - 0.5 / n)
    return 1.96 * math.sqrt(q * (1.0 - q) / n)


def drop_streams(master_seed: int, drop_index: int) -> list[np.random.Generator]:
    root = np.random.SeedSequence(master_seed, spawn_key=(drop_index,))
    return [np.random.default_rng(s) for s in root.spawn(_STREAMS)]


def _sample_bss(cfg: SimConfig, rng: np.random.Generator) -> np.ndarray:
    # fewer than two BSs leaves r2 undefined; redraw from the same stream
    while True:
        bss = geometry.sample_ppp(cfg.lambda_bs, cfg.window, rng)
        if len(bss) >= 2:
            return bss


def generate_drop(cfg: SimConfig, drop_index: int) -> Scenario:
    """Build drop ``drop_index``; a pure function of ``(cfg.master_seed, drop_index)``."""
    streams = drop_streams(cfg.master_seed, drop_index)
    bss = _sample_bss(cfg, streams[_BS])
    typical = cfg.window.center
    others = geometry.sample_ppp(cfg.lambda_user, cfg.window, streams[_USERS])
    users = np.vstack([typical[None, :], others])

    g_typ = streams[_TYPICAL].exponential(size=3)
    rng = streams[_INTERF]
    n = len(bss)
    occupancy_u = rng.random(n)
    selection_u = rng.random(n)
    selected = rng.exponential(size=(n, 2))
    interferer = rng.exponential(size=n)
    fading = Fading(g_typ[:2], float(g_typ[2]), interferer, selected, occupancy_u, selection_u)
    return build_scenario(bss, users, fading)


def build_scenario(bss: np.ndarray, users: np.ndarray, fading: Fading) -> Scenario:
    """Assemble a scenario from positions and draws; ``users[0]`` is the typical user."""
    bss = np.asarray(bss, dtype=float).reshape(-1, 2)
    users = np.asarray(users, dtype=float).reshape(-1, 2)
    n = len(bss)
    assoc = geometry.associate(users, bss)
    _, r1, _, r2 = geometry.nearest_two(users[0], bss)
    pick = _pick_members(assoc.serving, assoc.load, np.asarray(fading.selection_u, dtype=float))
    sel_r1 = np.full(n, np.nan)
    sel_r2 = np.full(n, np.nan)
    busy = pick >= 0
    if busy.any():
        _, sel_r1[busy], _, sel_r2[busy] = geometry.nearest_two_many(users[pick[busy]], bss)
    return Scenario(bss, users, users[0].copy(), assoc, fading, r1, r2, pick, sel_r1, sel_r2)


@njit(cache=True)
def _pick_members(serving, load, u):
    # the floor(u*load)-th member of each BS, members taken in user-index order
    n = load.shape[0]
    target = np.full(n, -1, np.int64)
    for b in range(n):
        if load[b] > 0:
            target[b] = min(int(u[b] * load[b]), load[b] - 1)
    seen = np.zeros(n, np.int64)
    pick = np.full(n, -1, np.int64)
    for i in range(serving.shape[0]):
        b = serving[i]
        if seen[b] == target[b]:
            pick[b] = i
        seen[b] += 1
    return pick


def subband_active(load_Nu: int, N: int, rng: np.random.Generator) -> bool:
    """Whether a BS with ``load_Nu`` users transmits on a given sub-band."""
    if load_Nu < 0 or N < 1:
        raise ParameterError("load must be >= 0 and N >= 1")
    if load_Nu == 0:
        return False
    return bool(rng.random() < min(load_Nu / N, 1.0))


def interferer_power_level(bs_index: int, scenario: Scenario, cfg: SimConfig, rng: np.random.Generator) -> float:
    """Transmit power of an active BS on the typical user's sub-band.

    Picks one of the BS's users uniformly, classifies it with fresh
    broadcast gains, and returns ``P`` for a CCU or ``a*P`` for a CEU.
    """
    assoc = scenario.association
    members = np.flatnonzero(assoc.serving == bs_index)
    if len(members) == 0:
        raise ParameterError(f"BS {bs_index} serves no users")
    u = members[min(int(rng.random() * len(members)), len(members) - 1)]
    g1, g2 = rng.exponential(size=2)
    _, r1, _, r2 = geometry.nearest_two(scenario.users[u], scenario.bss)
    L1 = loss(r1, cfg.pathloss)
    L2 = loss(r2, cfg.pathloss)
    return tx_power(classify(g1, g2, L1, L2, cfg.ffr.threshold_T), cfg.ffr)


def typical_sir(scenario: Scenario, cfg: SimConfig, rng: np.random.Generator) -> DropOutcome:
    """Reference (per-BS loop) evaluation of one drop.

    The typical user's classification uses the scenario's broadcast gains;
    occupancy, interferer classification and data-channel fading are drawn
    from ``rng``. :func:`evaluate_drop` is the vectorised engine used by the
    estimators.
    """
    assoc = scenario.association
    s = scenario.serving
    r1, r2 = scenario.r1, scenario.r2
    g1, g2 = scenario.fading.typical_broadcast
    cls = classify(g1, g2, loss(r1, cfg.pathloss), loss(r2, cfg.pathloss), cfg.ffr.threshold_T)
    g = g1 if cfg.reuse_broadcast_fade else rng.exponential()
    desired = tx_power(cls, cfg.ffr) * g * loss(r1, cfg.pathloss)

    d = np.hypot(*(scenario.bss - scenario.typical).T)
    interference = 0.0
    count = 0
    for k in range(len(scenario.bss)):
        if k == s or not subband_active(int(assoc.load[k]), cfg.ffr.subbands_N, rng):
            continue
        power = interferer_power_level(k, scenario, cfg, rng)
        interference += power * rng.exponential() * loss(d[k], cfg.pathloss)
        count += 1
    sir = desired / interference if interference > 0 else math.inf
    return DropOutcome(sir, cls, sir > cfg.coverage_threshold, count)


@dataclass(frozen=True)
class _Variants:
    """Column vectors of the per-variant parameters (shape ``(V, 1)``)."""

    alpha: np.ndarray
    beta: np.ndarray
    log_T: np.ndarray
    a: np.ndarray
    N: np.ndarray
    coverage_threshold: np.ndarray
    reuse: np.ndarray

    @classmethod
    def from_configs(cls, cfgs: Sequence[SimConfig]) -> "_Variants":
        def col(values, dtype=float):
            return np.asarray(values, dtype=dtype).reshape(-1, 1)

        return cls(
            alpha=col([c.pathloss.alpha for c in cfgs]),
            beta=col([c.pathloss.beta for c in cfgs]),
            log_T=col([math.log(c.ffr.threshold_T) for c in cfgs]),
            a=col([c.ffr.power_ratio_a for c in cfgs]),
            N=col([c.ffr.subbands_N for c in cfgs]),
            coverage_threshold=col([c.coverage_threshold for c in cfgs]),
            reuse=col([c.reuse_broadcast_fade for c in cfgs], bool),
        )


def _typical_is_ceu(r1: float, r2: float, g1: float, g2: float, v: _Variants) -> np.ndarray:
    # log form of g1 L1 / (g2 L2) < T; stays finite when L underflows
    s1 = v.alpha * r1 ** v.beta
    s2 = v.alpha * r2 ** v.beta
    return (math.log(g1) - s1) - (math.log(g2) - s2) < v.log_T


def evaluate_drop(scenario: Scenario, cfgs: Sequence[SimConfig] | _Variants) -> dict[str, np.ndarray]:
    """Score one drop for every parameter variant at once.

    Returns arrays of length ``V``: ``covered``, ``ceu``, ``sir`` and
    ``interferer_count``. SIR is computed relative to the serving link's
    attenuation, which avoids underflow for large path-loss exponents.
    """
    v = cfgs if isinstance(cfgs, _Variants) else _Variants.from_configs(cfgs)
    assoc = scenario.association
    fad = scenario.fading
    s = scenario.serving
    r1, r2 = scenario.r1, scenario.r2
    g1, g2 = (float(x) for x in fad.typical_broadcast)
    ceu = _typical_is_ceu(r1, r2, g1, g2, v)[:, 0]

    load = assoc.load
    has_users = scenario.selected >= 0
    active = fad.occupancy_u < np.minimum(load / v.N, 1.0)
    active[:, s] = False
    active &= has_users

    lr1 = np.log(np.where(has_users, scenario.selected_r1, 1.0))
    lr2 = np.log(np.where(has_users, scenario.selected_r2, 1.0))
    sel_ceu = (np.log(fad.selected[:, 0]) - v.alpha * np.exp(v.beta * lr1)) - (
        np.log(fad.selected[:, 1]) - v.alpha * np.exp(v.beta * lr2)) < v.log_T
    power = np.where(sel_ceu, v.a, 1.0)

    d = np.hypot(scenario.bss[:, 0] - scenario.typical[0], scenario.bss[:, 1] - scenario.typical[1])
    d = np.maximum(d, r1)  # guards rounding; the serving BS is the nearest
    rel = np.exp(-v.alpha * (np.exp(v.beta * np.log(d)) - r1 ** v.beta))
    interference = np.sum(np.where(active, power * fad.interferer * rel, 0.0), axis=1)

    g = np.where(v.reuse[:, 0], g1, fad.typical_data)
    desired = np.where(ceu, v.a[:, 0], 1.0) * g
    with np.errstate(divide="ignore"):
        sir = np.where(interference > 0, desired / interference, np.inf)
    covered = np.where(interference > 0, desired > v.coverage_threshold[:, 0] * interference, True)
    return {
        "covered": covered,
        "ceu": ceu,
        "sir": sir,
        "interferer_count": active.sum(axis=1),
    }


def _geometry_key(cfg: SimConfig) -> tuple:
    return (cfg.lambda_bs, cfg.lambda_user, cfg.window, cfg.master_seed)


def _classify_only_chunk(base: SimConfig, v: _Variants, start: int, stop: int) -> np.ndarray:
    counts = np.zeros((len(v.alpha), 4), dtype=np.int64)
    centre = base.window.center
    for i in range(start, stop):
        streams = drop_streams(base.master_seed, i)
        bss = _sample_bss(base, streams[_BS])
        _, r1, _, r2 = geometry.nearest_two(centre, bss)
        g1, g2, _ = streams[_TYPICAL].exponential(size=3)
        counts[:, 1] += _typical_is_ceu(r1, r2, g1, g2, v)[:, 0]
    return counts


def _full_chunk(base: SimConfig, v: _Variants, start: int, stop: int) -> np.ndarray:
    counts = np.zeros((len(v.alpha), 4), dtype=np.int64)
    for i in range(start, stop):
        out = evaluate_drop(generate_drop(base, i), v)
        counts[:, 0] += out["covered"]
        counts[:, 1] += out["ceu"]
        counts[:, 2] += out["covered"] & out["ceu"]
    return counts


def _run_chunk(args) -> np.ndarray:
    base, v, start, stop, classification_only = args
    fn = _classify_only_chunk if classification_only else _full_chunk
    return fn(base, v, start, stop)


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, math.ceil(n / (4 * workers)))
    return [(i, min(i + size, n)) for i in range(0, n, size)]


def estimate_many(cfgs: Sequence[SimConfig], workers: int = 1,
                  classification_only: bool = False) -> list[Estimate]:
    """Estimate every config, sharing drops between configs with equal geometry.

    Configs that agree on BS/user densities, window, seed and drop count are
    scored on identical drops (common random numbers). Results do not depend
    on ``workers``: each drop owns its random streams and chunk counts are
    summed as integers.

    With ``classification_only`` only the BS layout and the typical user's
    broadcast gains are drawn; ``ceu_density`` is then identical to the full
    run and coverage is left at NaN.
    """
    if workers < 1:
        raise ParameterError("workers must be >= 1")
    results: list[Estimate | None] = [None] * len(cfgs)
    groups: dict[tuple, list[int]] = {}
    for i, c in enumerate(cfgs):
        groups.setdefault(_geometry_key(c) + (c.n_drops,), []).append(i)

    for idx in groups.values():
        base = cfgs[idx[0]]
        v = _Variants.from_configs([cfgs[i] for i in idx])
        n = base.n_drops
        jobs = [(base, v, a, b, classification_only) for a, b in _chunks(n, workers)]
        if workers == 1:
            parts = [_run_chunk(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(_run_chunk, jobs))
        counts = np.sum(parts, axis=0)
        for row, i in zip(counts, idx):
            covered, ceu, covered_ceu = int(row[0]), int(row[1]), int(row[2])
            if classification_only:
                p_cov, ci = math.nan, math.nan
            else:
                p_cov = covered / n
                ci = ci_half_width(p_cov, n)
            p_ceu = ceu / n
            results[i] = Estimate(p_cov, p_ceu, ci, ci_half_width(p_ceu, n), n, covered, ceu, covered_ceu)
    return results  # type: ignore[return-value]


def estimate(cfg: SimConfig, workers: int = 1, classification_only: bool = False) -> Estimate:
    """Coverage probability and CEU density of the typical user over ``cfg.n_drops`` drops."""
    return estimate_many([cfg], workers=workers, classification_only=classification_only)[0]

