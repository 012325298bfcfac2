"""Empirical checks of exchangeability, parallel trends and the dynamic-panel moments.

Every check reads counterfactual outcomes straight from the world, forms
treated-minus-control contrasts of conditional means within cells, and
standardises each by its Monte Carlo standard error. A condition is declared
``violated`` when the largest standardised contrast exceeds ``k``.

When ``Y1`` is continuous the cells conditioning on it are quantile bins,
and the contrast within a bin is adjusted linearly for ``Y1`` (analysis of
covariance with a slope pooled across the two arms).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ..core import PotentialOutcomeWorld, realize_observed
from ..errors import ConfigError, HorizonError, NotApplicableError
from ..estimators.cells import cell_codes

HOLDS = "holds-within-band"
VIOLATED = "violated"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class CheckConfig:
    """Tuning for the checks.

    Parameters
    ----------
    k : float
        Band multiplier; a contrast beyond ``k`` standard errors is a violation.
    min_count : int
        Each arm of a cell needs this many units for the cell to be evaluated.
    y1_bins : int
        Upper bound on quantile bins of a continuous ``Y1`` within a cell.
    alpha_bins : int
        Quantile bins for a continuous fixed effect.
    condition_on_alpha : bool
        Add the fixed-effect bin to every conditioning set.
    min_coverage : float
        Share of units that must sit in evaluated cells for a clean verdict.
    max_discrete : int
        ``Y1`` with at most this many distinct values is conditioned on exactly.
    ab_k : float
        Band multiplier for the dynamic-panel moment check.
    """

    k: float = 5.0
    min_count: int = 50
    y1_bins: int = 20
    alpha_bins: int = 10
    condition_on_alpha: bool = False
    min_coverage: float = 0.5
    max_discrete: int = 50
    ab_k: float = 4.0

    @classmethod
    def from_dict(cls, doc=None) -> "CheckConfig":
        doc = dict(doc or {})
        unknown = set(doc) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"check config: unknown keys {sorted(unknown)}")
        cfg = cls(**doc)
        if cfg.k <= 0 or cfg.ab_k <= 0 or cfg.min_count < 2 or cfg.y1_bins < 1 or cfg.alpha_bins < 1:
            raise ConfigError("check config: k > 0, min_count >= 2 and bin counts >= 1 required")
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class AssumptionVerdict:
    name: str
    max_abs_contrast: float
    noise_band: float
    verdict: str
    cells: tuple = ()
    k: float = 5.0
    detail: dict = field(default_factory=dict)

    @property
    def max_z(self) -> float:
        return _z(self.max_abs_contrast, self.noise_band)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict,
            "max_abs_contrast": _num(self.max_abs_contrast),
            "noise_band": _num(self.noise_band),
            "max_z": _num(self.max_z),
            "k": self.k,
            "evaluated_cells": sum(1 for c in self.cells if c.get("evaluated")),
            "detail": self.detail,
        }


def _num(v):
    v = float(v)
    return v if np.isfinite(v) else (None if np.isnan(v) else ("inf" if v > 0 else "-inf"))


def _z(c, se):
    c, se = abs(c), abs(se)
    if se > 0:
        return c / se
    return 0.0 if c == 0 else float("inf")


def group_contrasts(y, treat, groups, min_count, x=None):
    """Treated-minus-control mean of ``y`` within each group, with its standard error.

    With a covariate ``x`` the difference is adjusted by a within-group slope
    pooled over both arms, and the standard error carries the usual
    ``(xbar1 - xbar0)**2 / Sxx`` term.
    """
    y = np.asarray(y, dtype=np.float64)
    t = np.asarray(treat).astype(bool)
    G = int(groups.max()) + 1 if len(groups) else 0
    arm = groups * 2 + t  # (group, arm) code
    n_arm = np.bincount(arm, minlength=2 * G).astype(np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        ybar = np.bincount(arm, weights=y, minlength=2 * G) / n_arm
        dy = y - ybar[arm]
        n1, n0 = n_arm[1::2], n_arm[0::2]
        diff = ybar[1::2] - ybar[0::2]
        if x is None:
            ss = np.bincount(arm, weights=dy * dy, minlength=2 * G)
            var = ss / (n_arm - 1)
            se = np.sqrt(var[1::2] / n1 + var[0::2] / n0)
            contrast = diff
        else:
            x = np.asarray(x, dtype=np.float64)
            xbar = np.bincount(arm, weights=x, minlength=2 * G) / n_arm
            dx = x - xbar[arm]
            sxx = np.bincount(groups, weights=dx * dx, minlength=G)
            sxy = np.bincount(groups, weights=dx * dy, minlength=G)
            slope = np.where(sxx > 0, sxy / np.where(sxx > 0, sxx, 1.0), 0.0)
            gap = xbar[1::2] - xbar[0::2]
            contrast = diff - slope * gap
            resid = dy - slope[groups] * dx
            ssr = np.bincount(groups, weights=resid * resid, minlength=G)
            s2 = ssr / (n1 + n0 - 3)
            lever = np.where(sxx > 0, gap * gap / np.where(sxx > 0, sxx, 1.0), 0.0)
            se = np.sqrt(s2 * (1 / n1 + 1 / n0 + lever))
    ok = (n1 >= min_count) & (n0 >= min_count)
    return n1.astype(int), n0.astype(int), contrast, se, ok


def _quantile_bins(x, groups, cfg: CheckConfig):
    """Equal-count bins of ``x`` within each group, fewer bins for small groups."""
    n = len(x)
    order = np.lexsort((x, groups))
    size = np.bincount(groups)
    start = np.concatenate([[0], np.cumsum(size)[:-1]])
    pos = np.empty(n, dtype=np.int64)
    pos[order] = np.arange(n) - start[groups[order]]
    nb = np.clip(size // (10 * cfg.min_count), 1, cfg.y1_bins)
    return pos * nb[groups] // size[groups]


def _alpha_key(world, cfg: CheckConfig):
    alpha = world.latent.get("alpha")
    if alpha is None:
        raise NotApplicableError("conditioning on the fixed effect needs a world that records 'alpha'")
    alpha = np.asarray(alpha, dtype=np.float64).reshape(world.n, -1)
    cols = []
    for j in range(alpha.shape[1]):
        a = alpha[:, j]
        if np.unique(a).size <= cfg.alpha_bins:
            cols.append(a)
        else:
            edges = np.quantile(a, np.linspace(0, 1, cfg.alpha_bins + 1)[1:-1])
            cols.append(np.searchsorted(edges, a).astype(np.float64))
    return cols


class _Cells:
    """Accumulates per-cell contrast rows for one check."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.rows = []
        self.coverage = {}

    def add(self, clause, label, y, treat, key_cols, key_names, x=None, extra=None):
        codes, keys = cell_codes(*key_cols)
        n1, n0, c, se, ok = group_contrasts(y, treat, codes, self.cfg.min_count, x)
        covered = np.bincount(codes, minlength=len(keys))[ok].sum()
        prev = self.coverage.get(clause, (0, 0))
        self.coverage[clause] = (prev[0] + covered, prev[1] + len(codes))
        for g in range(len(keys)):
            row = {"clause": clause, "outcome": label, "n1": int(n1[g]), "n0": int(n0[g]), "evaluated": bool(ok[g])}
            row.update({nm: float(v) for nm, v in zip(key_names, keys[g])})
            if extra:
                row.update(extra)
            if ok[g]:
                row.update(contrast=float(c[g]), se=float(se[g]), z=_z(c[g], se[g]))
            self.rows.append(row)

    def verdict(self, name, k, detail=None):
        evaluated = [r for r in self.rows if r["evaluated"]]
        cov = {cl: (a / b if b else 0.0) for cl, (a, b) in self.coverage.items()}
        detail = dict(detail or {}, coverage=cov)
        if not evaluated:
            return AssumptionVerdict(name, float("nan"), float("nan"), INCONCLUSIVE, tuple(self.rows), k, detail)
        worst = max(evaluated, key=lambda r: r["z"])
        clause_z = {}
        for r in evaluated:
            clause_z[r["clause"]] = max(clause_z.get(r["clause"], 0.0), r["z"])
        detail["clause_max_z"] = clause_z
        c, se = abs(worst["contrast"]), worst["se"]
        if _z(c, se) > k:
            verdict = VIOLATED
        elif min(cov.values()) < self.cfg.min_coverage:
            verdict = INCONCLUSIVE
        else:
            verdict = HOLDS
        detail["worst_cell"] = {key: v for key, v in worst.items() if key != "evaluated"}
        return AssumptionVerdict(name, c, se, verdict, tuple(self.rows), k, detail)


def _require_t2(world):
    if world.horizon != 2:
        raise HorizonError(f"this check is defined for T = 2 worlds, got T = {world.horizon}")


def _se_cells(world: PotentialOutcomeWorld, cfg: CheckConfig, form: str) -> _Cells:
    """Contrasts for the three exchangeability clauses in levels or trends form."""
    _require_t2(world)
    trends = form == "trends"
    y0 = world.y0
    y1po, y2po = world.po
    d1, d2 = world.assigned[:, 0], world.assigned[:, 1]
    base_cols, base_names = [y0], ["y0"]
    if cfg.condition_on_alpha:
        a_cols = _alpha_key(world, cfg)
        base_cols = base_cols + a_cols
        base_names = base_names + [f"alpha_{j}" for j in range(len(a_cols))]
    cells = _Cells(cfg)

    # period one: E[Y1(a) | Y0, D1] and E[Y2(a, b) | Y0, D1] invariant in D1
    for a in (0, 1):
        y = y1po[:, a] - (y0 if trends else 0.0)
        cells.add("mse1", f"Y1({a})", y, d1, base_cols, base_names)
    for k in range(4):
        a, b = k >> 1, k & 1
        y = y2po[:, k] - (y1po[:, a] if trends else 0.0)
        cells.add("mse2", f"Y2({a},{b})", y, d1, base_cols, base_names)

    # period two, along the realized first-period arm: condition on Y1 as well
    y1 = realize_observed(world).y[:, 1]
    for a in (0, 1):
        sel = d1 == a
        if not np.any(sel):
            continue
        cols = [c[sel] for c in base_cols]
        y1s = y1[sel]
        if np.unique(y1s).size <= cfg.max_discrete:
            key_cols, names, x = cols + [y1s], base_names + ["y1"], None
        else:
            pre, _ = cell_codes(*cols)
            bins = _quantile_bins(y1s, pre, cfg).astype(np.float64)
            key_cols, names, x = cols + [bins], base_names + ["y1_bin"], y1s
        for b in (0, 1):
            y = y2po[sel, 2 * a + b] - (y1po[sel, a] if trends else 0.0)
            cells.add("mse3", f"Y2({a},{b})", y, d2[sel], key_cols, names, x=x, extra={"d1": a})
    return cells


def check_sequential_exchangeability(world: PotentialOutcomeWorld, config: CheckConfig = None,
                                     form: str = "levels") -> AssumptionVerdict:
    cfg = config or CheckConfig()
    if form not in ("levels", "trends"):
        raise ConfigError("form must be 'levels' or 'trends'")
    name = "sequential_exchangeability" + ("_given_alpha" if cfg.condition_on_alpha else "")
    if form == "trends":
        name += "_trends"
    return _se_cells(world, cfg, form).verdict(name, cfg.k, {"form": form})


def _identity_gap(levels: AssumptionVerdict, trends: AssumptionVerdict) -> float:
    gap = 0.0
    for a, b in zip(levels.cells, trends.cells):
        if a["clause"] in ("mse1", "mse3") and a["evaluated"]:
            gap = max(gap, abs(a["contrast"] - b["contrast"]))
    return gap


def check_trend_equivalence(world: PotentialOutcomeWorld, config: CheckConfig = None) -> AssumptionVerdict:
    """Trends-form exchangeability verdict, annotated with its agreement with the levels form.

    ``detail["identity_gap"]`` is the largest difference between the two
    forms' contrasts in the clauses where the trend subtracts an outcome
    that is already conditioned on; it is zero up to rounding.
    """
    cfg = config or CheckConfig()
    levels = check_sequential_exchangeability(world, cfg, "levels")
    trends = check_sequential_exchangeability(world, cfg, "trends")
    detail = dict(trends.detail)
    detail.update(
        levels_verdict=levels.verdict,
        agree=levels.verdict == trends.verdict,
        identity_gap=_identity_gap(levels, trends),
        levels_max_z=_num(levels.max_z),
    )
    name = "trend_equivalence" + ("_given_alpha" if cfg.condition_on_alpha else "")
    return AssumptionVerdict(name, trends.max_abs_contrast, trends.noise_band, trends.verdict,
                             trends.cells, cfg.k, detail)


def check_parallel_trends(world: PotentialOutcomeWorld, config: CheckConfig = None) -> AssumptionVerdict:
    """Is ``E[Y2(0,0) - Y1(0) | D1, D2, Y0]`` the same in all four treatment cells?"""
    cfg = config or CheckConfig()
    _require_t2(world)
    y1po, y2po = world.po
    trend = y2po[:, 0] - y1po[:, 0]
    cell = world.assigned[:, 0] * 2 + world.assigned[:, 1]
    codes, levels = cell_codes(world.y0)
    rows = []
    complete = True
    for g, level in enumerate(levels[:, 0]):
        sel = codes == g
        stats = []
        for c in range(4):
            v = trend[sel & (cell == c)]
            stats.append((v.size, v.mean() if v.size else np.nan, v.var(ddof=1) if v.size > 1 else np.nan))
            complete &= v.size >= cfg.min_count
        for a in range(4):
            for b in range(a + 1, 4):
                (na, ma, va), (nb, mb, vb) = stats[a], stats[b]
                row = {"y0": float(level), "cell_a": f"{a >> 1}{a & 1}", "cell_b": f"{b >> 1}{b & 1}",
                       "n_a": int(na), "n_b": int(nb), "evaluated": bool(na >= cfg.min_count and nb >= cfg.min_count)}
                if row["evaluated"]:
                    c, se = mb - ma, np.sqrt(va / na + vb / nb)
                    row.update(contrast=float(c), se=float(se), z=_z(c, se))
                rows.append(row)
    evaluated = [r for r in rows if r["evaluated"]]
    if not evaluated:
        return AssumptionVerdict("parallel_trends", float("nan"), float("nan"), INCONCLUSIVE, tuple(rows), cfg.k)
    worst = max(evaluated, key=lambda r: r["z"])
    if worst["z"] > cfg.k:
        verdict = VIOLATED
    elif not complete:
        verdict = INCONCLUSIVE
    else:
        verdict = HOLDS
    detail = {"worst_cell": {key: v for key, v in worst.items() if key != "evaluated"}, "complete": bool(complete)}
    return AssumptionVerdict("parallel_trends", abs(worst["contrast"]), worst["se"], verdict, tuple(rows), cfg.k,
                             detail)


def check_full_se_period_one(world: PotentialOutcomeWorld, config: CheckConfig = None) -> AssumptionVerdict:
    """Distributional proxy for full exchangeability in period one.

    Within each ``Y0`` cell, the Kolmogorov-Smirnov distance between the
    ``D1 = 1`` and ``D1 = 0`` distributions of every potential outcome, with
    band ``sqrt((n1 + n0) / (n1 * n0))``. This is a proxy, not a test with
    controlled size.
    """
    cfg = config or CheckConfig()
    _require_t2(world)
    y1po, y2po = world.po
    d1 = world.assigned[:, 0].astype(bool)
    codes, levels = cell_codes(world.y0)
    rows = []
    outcomes = [(f"Y1({a})", y1po[:, a]) for a in (0, 1)] + [(f"Y2({k >> 1},{k & 1})", y2po[:, k]) for k in range(4)]
    for g, level in enumerate(levels[:, 0]):
        sel = codes == g
        for label, y in outcomes:
            a, b = np.sort(y[sel & d1]), np.sort(y[sel & ~d1])
            row = {"y0": float(level), "outcome": label, "n1": a.size, "n0": b.size,
                   "evaluated": bool(a.size >= cfg.min_count and b.size >= cfg.min_count)}
            if row["evaluated"]:
                grid = np.concatenate([a, b])
                dist = np.max(np.abs(np.searchsorted(a, grid, "right") / a.size
                                     - np.searchsorted(b, grid, "right") / b.size))
                band = np.sqrt((a.size + b.size) / (a.size * b.size))
                row.update(contrast=float(dist), se=float(band), z=_z(dist, band))
            rows.append(row)
    evaluated = [r for r in rows if r["evaluated"]]
    detail = {"proxy": "per-cell Kolmogorov-Smirnov distance; engineering gate, not a calibrated test"}
    if not evaluated:
        return AssumptionVerdict("full_se_period_one", float("nan"), float("nan"), INCONCLUSIVE, tuple(rows), cfg.k,
                                 detail)
    worst = max(evaluated, key=lambda r: r["z"])
    verdict = VIOLATED if worst["z"] > cfg.k else HOLDS
    return AssumptionVerdict("full_se_period_one", worst["contrast"], worst["se"], verdict, tuple(rows), cfg.k, detail)


def check_ab_moments(world: PotentialOutcomeWorld, config: CheckConfig = None) -> AssumptionVerdict:
    """Sample moments of the realized structural errors that the GMM instruments rely on.

    ``eps_t = eps*_t(D_t)``; checked: ``E[eps_s eps_t]`` (s != t), ``E[D_s eps_t]``
    (s <= t), ``E[d eps_t alpha]`` and ``E[d eps_t Y0]``, each against ``ab_k``
    standard errors.
    """
    cfg = config or CheckConfig()
    if world.regime != "linear_dpdm" or "t_eps" not in world.latent or "alpha" not in world.latent:
        raise NotApplicableError("moment check needs a linear dynamic-panel world with structural errors recorded")
    T, n = world.horizon, world.n
    rows_idx = np.arange(n)
    eps_po = world.latent["t_eps"]
    d = world.assigned
    eps = np.column_stack([eps_po[rows_idx, t, d[:, t]] for t in range(T)])
    alpha = np.asarray(world.latent["alpha"], dtype=np.float64)
    moments = []
    for s in range(T):
        for t in range(s + 1, T):
            moments.append((f"E[eps{s + 1}*eps{t + 1}]", eps[:, s] * eps[:, t]))
    for s in range(T):
        for t in range(s, T):
            moments.append((f"E[D{s + 1}*eps{t + 1}]", d[:, s] * eps[:, t]))
    for t in range(1, T):
        de = eps[:, t] - eps[:, t - 1]
        moments.append((f"E[deps{t + 1}*alpha]", de * alpha))
        moments.append((f"E[deps{t + 1}*Y0]", de * world.y0))
    rows = []
    for label, m in moments:
        mean, se = float(m.mean()), float(m.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        rows.append({"moment": label, "contrast": mean, "se": se, "z": _z(mean, se), "evaluated": True})
    worst = max(rows, key=lambda r: r["z"])
    verdict = VIOLATED if worst["z"] > cfg.ab_k else HOLDS
    return AssumptionVerdict("ab_moments", abs(worst["contrast"]), worst["se"], verdict, tuple(rows), cfg.ab_k,
                             {"worst_moment": worst["moment"]})
