"""Per-type extreme value fits and return-period curves.

Storm maxima are grouped by wind type. Typhoon maxima get a two-parameter
Gumbel law, monsoon and "other" maxima a generalized Pareto law over the
threshold excesses. Each per-event law is combined with its annual event rate
``N``:

* per type, a return period ``T`` maps to the exceedance probability
  ``1 / (T * N)`` per event (:func:`return_level`);
* for the mixed climate, per-type annual CDFs ``exp(-N * (1 - F(V)))``
  multiply (independent types) and the product is inverted numerically
  (:func:`mixture_curve`).

The commingled reference curve is a Gumbel fit to calendar-year maxima of the
whole record, ignoring type.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy import optimize

from .errors import ConvergenceError, DegenerateSampleError, ReturnPeriodError
from .features import CLASSES
from .ingest import GRID_HOURS, StationMeta, format_float
from .storms import StormSegment

log = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
XI_BOUNDS = (-0.5, 0.5)
DEFAULT_GRID = np.geomspace(1.0, 1000.0, 30)
CURVE_COLUMNS = ("monsoon", "typhoon", "other", "commingled", "mixture")


@dataclass(frozen=True)
class GumbelFit:
    loc: float
    scale: float
    n: int = 0

    def cdf(self, v):
        return np.exp(-np.exp(-(np.asarray(v, float) - self.loc) / self.scale))

    def sf(self, v):
        return -np.expm1(-np.exp(-(np.asarray(v, float) - self.loc) / self.scale))

    def ppf(self, p):
        return self.loc - self.scale * np.log(-np.log(np.asarray(p, float)))

    def isf(self, q):
        """Value exceeded with probability ``q``."""
        return self.loc - self.scale * np.log(-np.log1p(-np.asarray(q, float)))


@dataclass(frozen=True)
class GpdFit:
    shape: float
    scale: float
    threshold: float
    n: int = 0
    method: str = "mle"
    clamped: bool = False

    def _z(self, v):
        return (np.asarray(v, float) - self.threshold) / self.scale

    def sf(self, v):
        z = np.maximum(self._z(v), 0.0)
        if abs(self.shape) < 1e-12:
            return np.exp(-z)
        base = 1.0 + self.shape * z
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(base > 0, np.power(np.maximum(base, 1e-300), -1.0 / self.shape), 0.0)
        return out

    def cdf(self, v):
        return 1.0 - self.sf(v)

    def isf(self, q):
        q = np.asarray(q, float)
        if abs(self.shape) < 1e-12:
            return self.threshold - self.scale * np.log(q)
        return self.threshold + self.scale / self.shape * (np.power(q, -self.shape) - 1.0)

    def ppf(self, p):
        return self.isf(1.0 - np.asarray(p, float))

    @property
    def upper_bound(self) -> float:
        return self.threshold - self.scale / self.shape if self.shape < 0 else math.inf


Fit = Union[GumbelFit, GpdFit]


# ---------------------------------------------------------------------------
# Gumbel


def _gumbel_grad(x, mu, beta):
    z = (x - mu) / beta
    e = np.exp(-z)
    n = len(x)
    return np.array([(n - e.sum()) / beta, (-n + z.sum() - (z * e).sum()) / beta])


def fit_gumbel(samples: Sequence[float], tol: float = 1e-8, max_iter: int = 200) -> GumbelFit:
    """Maximum-likelihood Gumbel fit.

    Starts from the method of moments and runs Newton's method on the
    profile equation for the scale; the location then follows in closed
    form. Converged when the log-likelihood gradient norm is below ``tol``.
    """
    x = np.asarray(samples, dtype=float)
    x = x[~np.isnan(x)]
    if len(x) < 10:
        raise DegenerateSampleError(f"Gumbel fit needs >= 10 samples, got {len(x)}")
    s = x.std(ddof=1)
    if not s > 0:
        raise DegenerateSampleError("all samples are equal; Gumbel scale would be zero")
    xbar = x.mean()
    c = x - xbar
    beta = s * math.sqrt(6.0) / math.pi

    def location(beta):
        # stable log-mean-exp of -c/beta
        a = -c / beta
        amax = a.max()
        return xbar - beta * (amax + math.log(np.mean(np.exp(a - amax))))

    for it in range(max_iter):
        a = -c / beta
        w = np.exp(a - a.max())
        w /= w.sum()
        mc = (w * c).sum()
        g = beta + mc  # profile equation: beta - mean(x) + sum(x w)/sum(w)
        vw = (w * (c - mc) ** 2).sum()
        dg = 1.0 + vw / beta ** 2
        step = g / dg
        new = beta - step
        if new <= 0:
            new = beta / 2
        beta = new
        mu = location(beta)
        grad = _gumbel_grad(x, mu, beta)
        if np.linalg.norm(grad) < tol:
            return GumbelFit(float(mu), float(beta), len(x))
    raise ConvergenceError("Gumbel MLE did not converge",
                           {"iterations": max_iter, "grad_norm": float(np.linalg.norm(grad)),
                            "loc": float(mu), "scale": float(beta)})


# ---------------------------------------------------------------------------
# GPD


def gpd_pwm(excess: np.ndarray) -> tuple[float, float]:
    """Probability-weighted-moment estimates ``(shape, scale)`` (Hosking & Wallis, 1987)."""
    y = np.sort(excess)
    n = len(y)
    p = (np.arange(1, n + 1) - 0.35) / n
    a0 = y.mean()
    a1 = np.mean((1.0 - p) * y)
    k = a0 / (a0 - 2.0 * a1) - 2.0
    sigma = 2.0 * a0 * a1 / (a0 - 2.0 * a1)
    return float(-k), float(sigma)


def gpd_loglik(excess, shape, scale) -> float:
    y = np.asarray(excess, float)
    if scale <= 0:
        return -math.inf
    z = y / scale
    if abs(shape) < 1e-12:
        return float(-len(y) * math.log(scale) - z.sum())
    t = 1.0 + shape * z
    if np.any(t <= 0):
        return -math.inf
    return float(-len(y) * math.log(scale) - (1.0 + 1.0 / shape) * np.log(t).sum())


def _gpd_mle(y: np.ndarray) -> tuple[float, float]:
    """Profile-likelihood MLE (Grimshaw, 1993) in ``theta = shape / scale``."""
    n = len(y)
    ymax, ybar = y.max(), y.mean()

    def xi_of(theta):
        return float(np.mean(np.log1p(theta * y)))

    def negprof(theta):
        if abs(theta) < 1e-12 / ybar:
            return n * (math.log(ybar) + 1.0)
        xi = xi_of(theta)
        ratio = xi / theta
        if ratio <= 0:
            return math.inf
        return n * (math.log(ratio) + 1.0 + xi)

    lo = -(1.0 - 1e-10) / ymax
    if xi_of(lo) < -1.0:
        # beyond shape -1 the likelihood is unbounded at the support edge
        lo = optimize.brentq(lambda th: xi_of(th) + 1.0, lo, 0.0, xtol=1e-14 / ymax)
    hi = 20.0 / ybar
    grid = np.concatenate([np.linspace(lo, 0.0, 200, endpoint=False),
                           np.geomspace(1e-6 / ybar, hi, 200)])
    vals = np.array([negprof(t) for t in grid])
    k = int(np.argmin(vals))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, len(grid) - 1)]
    if k in (0, len(grid) - 1):
        raise ConvergenceError("GPD profile likelihood maximum on search boundary",
                               {"theta": float(grid[k])})
    res = optimize.minimize_scalar(negprof, bounds=(a, b), method="bounded",
                                   options={"xatol": 1e-12 / ybar, "maxiter": 500})
    theta = float(res.x)
    if abs(theta) < 1e-12 / ybar:
        return 0.0, float(ybar)
    xi = xi_of(theta)
    return xi, xi / theta


def _scale_given_shape(y, shape, start):
    lo = 1e-9 * y.mean()
    if shape < 0:
        lo = max(lo, -shape * y.max() * (1 + 1e-12))
    res = optimize.minimize_scalar(lambda ls: -gpd_loglik(y, shape, math.exp(ls)),
                                   bounds=(math.log(lo), math.log(max(start, lo) * 100 + y.max())),
                                   method="bounded", options={"xatol": 1e-12})
    return float(math.exp(res.x))


def fit_gpd(samples: Sequence[float], threshold: float) -> GpdFit:
    """Generalized Pareto fit to the excesses over ``threshold``.

    Maximum likelihood first, probability-weighted moments if the MLE fails.
    The shape is restricted to [-0.5, 0.5]; an estimate outside is clamped
    with a warning and the scale re-maximized at the clamped shape.
    """
    v = np.asarray(samples, dtype=float)
    v = v[~np.isnan(v)]
    if len(v) < 20:
        raise DegenerateSampleError(f"GPD fit needs >= 20 samples, got {len(v)}")
    if np.any(v < threshold - 1e-9):
        raise DegenerateSampleError(f"samples below threshold {threshold}")
    y = np.maximum(v - threshold, 0.0)
    if not np.any(y > 0):
        raise DegenerateSampleError("all excesses are zero")

    method = "mle"
    try:
        shape, scale = _gpd_mle(y)
        if not (np.isfinite(shape) and np.isfinite(scale) and scale > 0):
            raise ConvergenceError("non-finite GPD MLE")
    except (ConvergenceError, ValueError, FloatingPointError) as exc:
        log.info("GPD MLE failed (%s); using probability-weighted moments", exc)
        shape, scale = gpd_pwm(y)
        method = "pwm"
    clamped = False
    if not XI_BOUNDS[0] <= shape <= XI_BOUNDS[1]:
        warnings.warn(f"GPD shape {shape:.3f} outside {XI_BOUNDS}; clamped", RuntimeWarning,
                      stacklevel=2)
        shape = min(max(shape, XI_BOUNDS[0]), XI_BOUNDS[1])
        scale = _scale_given_shape(y, shape, scale)
        clamped = True
    return GpdFit(float(shape), float(scale), float(threshold), len(v), method, clamped)


# ---------------------------------------------------------------------------
# return levels


def return_level(fit: Fit, rate: float, period: float) -> float:
    """Speed whose per-event exceedance probability is ``1 / (period * rate)``."""
    tn = period * rate
    if not tn > 1.0:
        raise ReturnPeriodError(f"T * N = {tn:g} <= 1: return period below one event interval")
    return float(fit.isf(1.0 / tn))


def annual_return_level(fit: Fit, rate: float, period: float) -> float:
    """Return level under Poisson annualization, NaN where it falls below the fit's support.

    Solves ``exp(-rate * (1 - F(V))) = 1 - 1/period``.
    """
    if period <= 1.0:
        return math.nan
    q = -math.log1p(-1.0 / period) / rate
    if q >= 1.0:
        return math.nan
    return float(fit.isf(q))


def annual_cdf(fit: Fit, rate: float, v) -> np.ndarray:
    return np.exp(-rate * fit.sf(v))


def mixture_level(components: Mapping[str, tuple], period: float, lower: float,
                  upper: float = 200.0, tol: float = 1e-4) -> float:
    """Speed with annual exceedance ``1/period`` for the product of annual CDFs.

    ``components`` maps a name to ``(fit, rate)``. Bisection keeps the upper
    end of the bracket, so the result never undershoots the root. NaN when
    the root lies below ``lower``.
    """
    if period <= 1.0:
        return math.nan
    target = -math.log1p(-1.0 / period)  # total annual hazard at the answer

    def hazard(v):
        return sum(rate * float(fit.sf(v)) for fit, rate in components.values())

    if hazard(upper) > target:
        raise ConvergenceError("no bracket: mixture exceedance above target at the upper bound",
                               {"period": period, "upper": upper})
    if hazard(lower) <= target:
        return math.nan
    lo, hi = lower, upper
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if hazard(mid) > target:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass
class ReturnCurve:
    periods: np.ndarray
    columns: dict = field(default_factory=dict)  # name -> array of m/s, NaN = inapplicable


def mixture_curve(components: Mapping[str, tuple], periods: Sequence[float] = DEFAULT_GRID,
                  lower: Optional[float] = None, upper: float = 200.0,
                  tol: float = 1e-4) -> np.ndarray:
    """Mixed-climate return levels over ``periods``.

    Types missing from ``components`` contribute a factor of one. ``lower``
    defaults to the smallest GPD threshold (0 when there is none).
    """
    if lower is None:
        thresholds = [f.threshold for f, _ in components.values() if isinstance(f, GpdFit)]
        lower = min(thresholds) if thresholds else 0.0
    return np.array([mixture_level(components, T, lower, upper, tol) for T in periods])


# ---------------------------------------------------------------------------
# samples


@dataclass
class TypeSamples:
    speeds: dict
    directions: dict
    rates: dict
    threshold: float
    record_years: float
    ids: dict = field(default_factory=dict)

    def count(self, kind: str) -> int:
        return len(self.speeds.get(kind, ()))


def build_type_samples(storms: Sequence[StormSegment], labels: Mapping[str, str],
                       station: StationMeta, threshold: float = 12.0) -> TypeSamples:
    """One maximum per labelled storm, grouped by type, with annual rates.

    Storms without a label, or whose maximum does not exceed ``threshold``,
    are skipped. The direction recorded is the one at the peak slot.
    """
    speeds = {c: [] for c in CLASSES}
    dirs = {c: [] for c in CLASSES}
    ids = {c: [] for c in CLASSES}
    for s in storms:
        lab = labels.get(s.storm_id)
        if lab is None or not s.peak_speed >= threshold:
            continue
        speeds[lab].append(s.peak_speed)
        ids[lab].append(s.storm_id)
        d = math.nan
        if s.peak_time in s.records.index:
            d = float(s.records.loc[s.peak_time, "wind_dir_deg"])
        dirs[lab].append(d)
    rates = {c: len(speeds[c]) / station.record_years for c in CLASSES}
    return TypeSamples({c: np.array(v) for c, v in speeds.items()},
                       {c: np.array(v) for c, v in dirs.items()}, rates, threshold,
                       station.record_years, ids)


def annual_maxima(frame: pd.DataFrame, min_fraction: float = 0.5) -> pd.Series:
    """Largest speed of each calendar year with enough valid 3-hourly slots."""
    speed = frame["wind_speed_ms"]
    years = frame.index.year
    out = {}
    for year, grp in speed.groupby(years):
        slots = (366 if pd.Timestamp(year=int(year), month=12, day=31).dayofyear == 366 else 365) \
            * 24 // GRID_HOURS
        if grp.notna().sum() >= min_fraction * slots:
            out[int(year)] = float(grp.max())
    return pd.Series(out, name="annual_max", dtype=float)


def commingled_annual_max(frame: pd.DataFrame, min_years: int = 10,
                          min_fraction: float = 0.5) -> tuple[pd.Series, GumbelFit]:
    """Annual maxima of the whole record and their Gumbel fit."""
    maxima = annual_maxima(frame, min_fraction)
    if len(maxima) < min_years:
        raise DegenerateSampleError(f"{len(maxima)} qualifying years; need >= {min_years}")
    return maxima, fit_gumbel(maxima.to_numpy())


# ---------------------------------------------------------------------------
# fitting per type and assembling curves


DEFAULT_DISTRIBUTIONS = {"typhoon": "gumbel", "monsoon": "gpd", "other": "gpd"}


def fit_type_models(samples: TypeSamples, distributions: Mapping[str, str] = DEFAULT_DISTRIBUTIONS
                    ) -> dict:
    """Fit each type with enough samples; returns ``{type: (fit, rate)}``.

    Types that cannot be fitted (too few or degenerate samples) are logged
    and left out, which makes them neutral in the mixture.
    """
    out = {}
    for kind, dist in distributions.items():
        x = samples.speeds.get(kind, np.array([]))
        try:
            fit = fit_gumbel(x) if dist == "gumbel" else fit_gpd(x, samples.threshold)
        except DegenerateSampleError as exc:
            log.warning("type %s not fitted: %s", kind, exc)
            continue
        out[kind] = (fit, samples.rates[kind])
    return out


def build_return_curves(components: Mapping[str, tuple], commingled: Optional[GumbelFit] = None,
                        periods: Sequence[float] = DEFAULT_GRID, upper: float = 200.0
                        ) -> ReturnCurve:
    """All curve columns on one grid.

    Per-type columns use the same Poisson annualization as the mixture so
    the columns are directly comparable; the commingled column is the plain
    annual-maximum convention (``N = 1``).
    """
    periods = np.asarray(periods, float)
    cols = {}
    for kind in ("monsoon", "typhoon", "other"):
        if kind in components:
            fit, rate = components[kind]
            cols[kind] = np.array([annual_return_level(fit, rate, T) for T in periods])
        else:
            cols[kind] = np.full(len(periods), np.nan)
    if commingled is not None:
        cols["commingled"] = np.array([return_level(commingled, 1.0, T) if T > 1 else np.nan
                                       for T in periods])
    else:
        cols["commingled"] = np.full(len(periods), np.nan)
    cols["mixture"] = mixture_curve(components, periods, upper=upper) if components \
        else np.full(len(periods), np.nan)
    return ReturnCurve(periods, cols)


def format_curves_csv(curve: ReturnCurve) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["return_period_years"] + [f"v_{c}" for c in CURVE_COLUMNS])
    for i, T in enumerate(curve.periods):
        w.writerow([format_float(T)] + [format_float(curve.columns[c][i]) for c in CURVE_COLUMNS])
    return out.getvalue()


def parse_curves_csv(text: str) -> ReturnCurve:
    rows = list(csv.DictReader(io.StringIO(text)))
    periods = np.array([float(r["return_period_years"]) for r in rows])
    cols = {c: np.array([float(r[f"v_{c}"]) if r[f"v_{c}"] else np.nan for r in rows])
            for c in CURVE_COLUMNS}
    return ReturnCurve(periods, cols)


FIT_HEADER = ("type", "distribution", "method", "location", "scale", "shape", "threshold",
              "rate_per_year", "n_samples")


def format_fits_csv(components: Mapping[str, tuple], samples: TypeSamples,
                    commingled: Optional[GumbelFit] = None) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(FIT_HEADER)
    for kind in CLASSES:
        if kind in components:
            fit, rate = components[kind]
            if isinstance(fit, GumbelFit):
                row = [kind, "gumbel", "mle", format_float(fit.loc), format_float(fit.scale), "", "",
                       format_float(rate), samples.count(kind)]
            else:
                row = [kind, "gpd", fit.method + ("+clamped" if fit.clamped else ""), "",
                       format_float(fit.scale), format_float(fit.shape), format_float(fit.threshold),
                       format_float(rate), samples.count(kind)]
        else:
            row = [kind, "none", "", "", "", "", "", format_float(samples.rates.get(kind, 0.0)),
                   samples.count(kind)]
        w.writerow(row)
    if commingled is not None:
        w.writerow(["commingled", "gumbel", "mle", format_float(commingled.loc),
                    format_float(commingled.scale), "", "", "1.0", commingled.n])
    return out.getvalue()


def parse_fits_csv(text: str) -> tuple[dict, Optional[GumbelFit]]:
    components, commingled = {}, None
    for r in csv.DictReader(io.StringIO(text)):
        n = int(r["n_samples"])
        if r["distribution"] == "gumbel":
            fit = GumbelFit(float(r["location"]), float(r["scale"]), n)
        elif r["distribution"] == "gpd":
            method = r["method"]
            fit = GpdFit(float(r["shape"]), float(r["scale"]), float(r["threshold"]), n,
                         method.split("+")[0], method.endswith("+clamped"))
        else:
            continue
        if r["type"] == "commingled":
            commingled = fit
        else:
            components[r["type"]] = (fit, float(r["rate_per_year"]))
    return components, commingled
