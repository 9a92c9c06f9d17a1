"""Monte Carlo oracles and the adjudication harness.

Estimators return standard errors next to every value. Two quantities are
declared consistent when every grid point satisfies |deviation| <= 4 SE;
complex values use the modulus of the difference and the root sum of the
real and imaginary variances.
"""

from __future__ import annotations

import datetime as _dt
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special, stats

from .exceptions import SkellError, ValidationError
from .moments import MomentSet, b3_ablation, se_moments
from .sampling import RngState, sample_conditioning, sample_representation, sample_skew_uniform

__all__ = [
    "AdjudicationReport",
    "CfEstimate",
    "MomentEstimate",
    "Subject",
    "Z_CRITERION",
    "adjudicate",
    "chisq_gof",
    "default_suite",
    "empirical_cf",
    "ks_test",
    "mc_moment_set",
    "read_reports",
    "verdict_of",
    "write_reports",
]

Z_CRITERION = 4.0
_CHUNK = 1 << 15


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


class _Accumulator:
    """Running sums of shifted values for a mean and its standard error.

    Values are shifted by the first row seen, so constant input gives an
    exactly zero variance and the exact mean.
    """

    def __init__(self):
        self.shift = None
        self.s1 = self.s2 = None
        self.count = 0

    def add(self, block):
        if self.shift is None:
            self.shift = block[0].copy()
            self.s1 = np.zeros_like(self.shift)
            self.s2 = np.zeros_like(self.shift)
        d = block - self.shift
        self.s1 += d.sum(axis=0)
        self.s2 += (d * d).sum(axis=0)
        self.count += block.shape[0]

    def result(self):
        N = self.count
        m = self.s1 / N
        var = np.maximum(self.s2 - self.s1 * m, 0.0) / (N - 1)
        return self.shift + m, np.sqrt(var / N)


@dataclass(frozen=True)
class MomentEstimate:
    estimate: MomentSet
    se: MomentSet
    count: int


def mc_moment_set(samples, order=4):
    """Empirical raw moments M1..M4 with per-entry standard errors.

    Uses the same layouts as :mod:`skell.moments`.
    """
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    N, n = x.shape
    if N < 2:
        raise ValidationError("need at least two samples")
    accs = [_Accumulator() for _ in range(order)]
    for lo in range(0, N, _CHUNK):
        y = x[lo : lo + _CHUNK]
        yy = (y[:, :, None] * y[:, None, :]).reshape(len(y), n * n)  # column i*n+k is y_i y_k
        blocks = [y, yy]
        if order >= 3:
            blocks.append((yy[:, :, None] * y[:, None, :]).reshape(len(y), -1))
        if order >= 4:
            blocks.append((yy[:, :, None] * yy[:, None, :]).reshape(len(y), -1))
        for acc, b in zip(accs, blocks):
            acc.add(b)
    shapes = [(n,), (n, n), (n * n, n), (n * n, n * n)]
    est, se = [], []
    for acc, shape in zip(accs, shapes):
        m, s = acc.result()
        est.append(m.reshape(shape))
        se.append(s.reshape(shape))
    est += [None] * (4 - order)
    se += [None] * (4 - order)
    nan = np.full(4, np.nan)
    return MomentEstimate(MomentSet(*est, nan), MomentSet(*se, nan), N)


@dataclass(frozen=True)
class CfEstimate:
    re: np.ndarray
    im: np.ndarray
    se_re: np.ndarray
    se_im: np.ndarray

    @property
    def value(self):
        return self.re + 1j * self.im

    @property
    def se(self):
        return np.hypot(self.se_re, self.se_im)


def empirical_cf(samples, t_grid):
    """Mean of exp(i t'X) over the rows of ``samples`` for every row of ``t_grid``."""
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    T = np.atleast_2d(np.asarray(t_grid, dtype=float))
    if T.shape[1] != x.shape[1]:
        raise ValidationError("grid and samples have different dimensions")
    acc_c, acc_s = _Accumulator(), _Accumulator()
    for lo in range(0, x.shape[0], _CHUNK):
        ph = x[lo : lo + _CHUNK] @ T.T
        acc_c.add(np.cos(ph))
        acc_s.add(np.sin(ph))
    re, se_re = acc_c.result()
    im, se_im = acc_s.result()
    return CfEstimate(re, im, se_re, se_im)


def ks_test(samples_1d, cdf: Callable, alpha=0.01):
    """One-sample Kolmogorov-Smirnov test with the asymptotic critical value."""
    x = np.sort(np.asarray(samples_1d, dtype=float).ravel())
    N = x.size
    if N < 100:
        raise ValidationError("ks_test needs at least 100 samples")
    F = np.asarray(cdf(x), dtype=float)
    if F.shape != x.shape or not np.all(np.isfinite(F)) or np.any((F < 0) | (F > 1)):
        raise ValidationError("cdf must return finite values in [0, 1]")
    if np.any(np.diff(F) < -1e-12):
        raise ValidationError("cdf is not monotone")
    if F[-1] - F[0] <= 0.0:
        raise ValidationError("cdf is degenerate on the sample range")
    i = np.arange(1, N + 1)
    D = float(max(np.max(i / N - F), np.max(F - (i - 1) / N)))
    crit = float(special.kolmogi(alpha)) / math.sqrt(N)
    return {"statistic": D, "critical": crit, "passed": D <= crit, "n": N}


def chisq_gof(samples_1d, cdf: Callable, bins=50, alpha=0.01):
    """Pearson chi-square goodness of fit on bins equiprobable under ``cdf``.

    Bin edges are found by bisection on the sample range, so ``cdf`` only
    needs to be evaluable.
    """
    x = np.asarray(samples_1d, dtype=float).ravel()
    N = x.size
    lo, hi = np.quantile(x, [0.0, 1.0])
    grid = np.linspace(lo, hi, 4001)
    F = np.asarray(cdf(grid), dtype=float)
    targets = np.linspace(0.0, 1.0, bins + 1)[1:-1]
    targets = targets[(targets > F[0]) & (targets < F[-1])]
    edges = np.interp(targets, F, grid)
    edges = np.unique(edges)
    probs = np.diff(np.concatenate([[0.0], np.asarray(cdf(edges), dtype=float), [1.0]]))
    counts = np.bincount(np.searchsorted(edges, x, side="right"), minlength=edges.size + 1)
    expected = N * probs
    keep = expected > 5
    stat = float(np.sum((counts[keep] - expected[keep]) ** 2 / expected[keep]))
    dof = int(keep.sum()) - 1
    p = float(stats.chi2.sf(stat, dof))
    return {"statistic": stat, "dof": dof, "p_value": p, "passed": p >= alpha}


# ---------------------------------------------------------------------------
# adjudication
# ---------------------------------------------------------------------------


def verdict_of(deviations, se):
    """``consistent`` iff every |dev| <= 4 SE (an SE of 0 demands |dev| < 1e-12)."""
    dev = np.abs(np.asarray(deviations, dtype=float))
    se = np.asarray(se, dtype=float)
    if dev.size == 0 or not np.all(np.isfinite(dev)):
        return "inconsistent"
    zero = se <= 0
    ok_zero = np.all(dev[zero] < 1e-12)
    ok = np.all(dev[~zero] <= Z_CRITERION * se[~zero])
    return "consistent" if ok and ok_zero else "inconsistent"


@dataclass
class AdjudicationReport:
    """One subject compared against one reference on a grid."""

    subject: str
    reference: str
    grid: list
    deviations: list
    se: list
    verdict: str
    metadata: dict = field(default_factory=dict)

    @property
    def max_z(self):
        d = np.abs(np.asarray(self.deviations, dtype=float))
        s = np.asarray(self.se, dtype=float)
        if d.size == 0:
            return math.nan
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(s > 0, d / s, np.where(d < 1e-12, 0.0, np.inf))
        return float(np.max(z))

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=False, allow_nan=True)

    def summary(self):
        return f"{self.subject} vs {self.reference}: {self.verdict} (max |dev|/se = {self.max_z:.3g})"


@dataclass(frozen=True)
class Subject:
    """A quantity evaluable on a grid.

    ``evaluate(grid)`` returns values, or ``(values, se)`` for stochastic
    subjects; values may be complex.
    """

    name: str
    evaluate: Callable


def _unpack(out, size):
    if isinstance(out, tuple):
        v, s = out
    else:
        v, s = out, np.zeros(size)
    return np.asarray(v), np.asarray(s, dtype=float)


def adjudicate(subjects: Sequence[Subject], reference: Subject, grid, N=None, seed=None, timestamp=False, extra=None):
    """Compare every subject with the reference on ``grid``.

    Failures while evaluating a subject are recorded with verdict ``error``
    instead of aborting the run.
    """
    grid = list(grid)
    meta = {"seed": seed, "N": N, "timestamp": _now() if timestamp else None}
    if extra:
        meta.update(extra)
    rv, rs = _unpack(reference.evaluate(grid), len(grid))
    reports = []
    for sub in subjects:
        try:
            t0 = time.perf_counter()
            sv, ss = _unpack(sub.evaluate(grid), len(grid))
            dev = np.abs(sv - rv)
            se = np.sqrt(ss**2 + rs**2)
            rep = AdjudicationReport(
                sub.name, reference.name, _jsonable(grid), dev.tolist(), se.tolist(), verdict_of(dev, se), dict(meta)
            )
            rep.metadata["values"] = _pairs(sv)
            rep.metadata["reference_values"] = _pairs(rv)
            rep.metadata["reference_se"] = rs.tolist()
            rep.metadata["seconds"] = None if not timestamp else round(time.perf_counter() - t0, 3)
        except (SkellError, ArithmeticError, ValueError) as exc:
            rep = AdjudicationReport(sub.name, reference.name, _jsonable(grid), [], [], "error", dict(meta))
            rep.metadata["error"] = f"{type(exc).__name__}: {exc}"
        reports.append(rep)
    return reports


def _pairs(v):
    """Real values as a list, complex ones as [re, im] pairs."""
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return [[float(z.real), float(z.imag)] for z in v]
    return v.astype(float).tolist()


def _route_gaps(reports):
    """Pairwise max |difference| between the deterministic routes of one grid."""
    vals = {}
    for r in reports:
        if r.verdict != "error":
            v = np.array(r.metadata["values"], dtype=float)
            vals[r.subject] = v[:, 0] + 1j * v[:, 1] if v.ndim == 2 else v
    names = sorted(vals)
    return {f"{a}|{b}": float(np.max(np.abs(vals[a] - vals[b]))) for i, a in enumerate(names) for b in names[i + 1 :]}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _jsonable(grid):
    out = []
    for g in grid:
        if isinstance(g, np.ndarray):
            out.append(g.tolist())
        elif isinstance(g, (np.floating, np.integer)):
            out.append(g.item())
        else:
            out.append(g)
    return out


def write_reports(reports, path, append=False):
    """Write reports as JSON lines (one object per line)."""
    with open(path, "a" if append else "w", encoding="utf-8", newline="\n") as fh:
        for r in reports:
            fh.write(r.to_json() + "\n")


def read_reports(path):
    with open(path, encoding="utf-8") as fh:
        return [AdjudicationReport(**json.loads(line)) for line in fh if line.strip()]


# ---------------------------------------------------------------------------
# the default suite
# ---------------------------------------------------------------------------


def _moment_labels(n):
    labels = [("M1", (i,)) for i in range(n)]
    labels += [("M2", (i, j)) for i in range(n) for j in range(i, n)]
    labels += [("M3", (i * n + i, i)) for i in range(n)]
    labels += [("M4", (i * n + i, i * n + i)) for i in range(n)]
    return labels


def _moment_subject(name, samples_fn):
    """Subject reporting M1, M2 and marginal third/fourth moments of a sampler."""

    def evaluate(grid):
        est = mc_moment_set(samples_fn())
        vals = [getattr(est.estimate, b)[idx] for b, idx in grid]
        ses = [getattr(est.se, b)[idx] for b, idx in grid]
        return np.array(vals), np.array(ses)

    return Subject(name, evaluate)


def _grid_cf_subject(name, fn):
    return Subject(name, lambda grid: np.array([complex(fn(np.asarray(t))) for t in grid]))


def _mc_cf_subject(name, samples_fn):
    def evaluate(grid):
        est = empirical_cf(samples_fn(), np.asarray(grid))
        return est.value, est.se

    return Subject(name, evaluate)


def cf_grid(n, points, rng, max_norm=3.0):
    """Random directions with norms spread over (0, max_norm]."""
    u = rng.standard_normal((points, n))
    u /= np.linalg.norm(u, axis=1)[:, None]
    r = max_norm * (np.arange(1, points + 1) / points)
    return u * r[:, None]


def default_suite(params, gen, N=10**6, seed=0, threads=None, timestamp=False, cf_points=8, uniform_n=2):
    """Run the standard adjudications for one model.

    * sampler variants (rep_a and the printed/corrected rep_b, rep_c) against
      the conditioning sampler on M1, M2 and marginal third/fourth moments;
    * the closed skew-normal and skew-t CFs, the conditional-integral route
      and both readings of the generic radial route against the empirical CF
      of conditioning draws;
    * the printed delta = 0 skew-uniform reduction against draws of d2 U^(n).
    """
    from . import charfn  # noqa: PLC0415 (charfn imports sampling)

    n = params.n
    reports = []
    extra = {"family": gen.family, "n": n}
    ref_x = sample_conditioning(params, gen, N, RngState(seed, 0), threads)

    labels = _moment_labels(n)
    ref = _moment_subject("conditioning", lambda: ref_x)
    subs = []
    for k, variant in enumerate(("rep_a", "rep_b_paper", "rep_b_corrected", "rep_c_paper", "rep_c_corrected"), 1):
        subs.append(
            _moment_subject(
                variant,
                lambda v=variant, k=k: sample_representation(params, gen, v, N, RngState(seed, k), threads),
            )
        )
    reports += adjudicate(subs, ref, labels, N=N, seed=seed, timestamp=timestamp, extra=extra)

    analytic = Subject(
        "se_moments",
        lambda grid: np.array([getattr(se_moments(params, gen, partial=True), b)[idx] for b, idx in grid]),
    )
    avail = se_moments(params, gen, partial=True).order
    mlabels = [lab for lab in labels if int(lab[0][1]) <= avail]
    reports += adjudicate([analytic], ref, mlabels, N=N, seed=seed, timestamp=timestamp, extra=extra)

    grid = list(cf_grid(n, cf_points, np.random.default_rng(seed)))
    cf_ref = _mc_cf_subject("cf_mc", lambda: ref_x)
    cfs = []
    if gen.family == "normal":
        cfs.append(_grid_cf_subject("cf_skew_normal", lambda t: charfn.cf_skew_normal(params, t).value))
    nu = gen.t_equivalent_nu
    if nu is not None:
        cfs.append(_grid_cf_subject("cf_skew_t", lambda t: charfn.cf_skew_t(params, nu, t).value))
        cfs.append(
            _grid_cf_subject("cf_skew_t_printed", lambda t: charfn.cf_skew_t(params, nu, t, prefactor="printed").value)
        )
    if gen.family == "normal" or nu is not None:
        cfs.append(_grid_cf_subject("cf_theorem32", lambda t: charfn.cf_theorem32(params, gen, t).value))
    for reading in charfn.GENERIC_READINGS:
        cfs.append(
            _grid_cf_subject(
                f"cf_generic_{reading}", lambda t, r=reading: charfn.cf_generic(params, gen, t, reading=r).value
            )
        )
    cf_reports = adjudicate(cfs, cf_ref, grid, N=N, seed=seed, timestamp=timestamp, extra=extra)
    gaps = _route_gaps(cf_reports)
    for r in cf_reports:
        r.metadata["route_gaps"] = gaps
    reports += cf_reports

    # printed delta = 0 reduction of the skew-uniform CF
    zero = np.zeros(uniform_n)
    ugrid = list(cf_grid(uniform_n, cf_points, np.random.default_rng(seed + 1), max_norm=4.0))
    u_ref = _mc_cf_subject(
        "mc_d2_U", lambda: sample_skew_uniform(zero, N, RngState(seed, 10), beta="paper", threads=threads)
    )
    usubs = [
        _grid_cf_subject("skew_uniform_delta0_claim", lambda t: charfn.cf_skew_uniform_claim(t).value),
        _grid_cf_subject("cf_skew_uniform_eq_3_19", lambda t: charfn.cf_skew_uniform(zero, t, "eq_3_19").value),
    ]
    reports += adjudicate(usubs, u_ref, ugrid, N=N, seed=seed, timestamp=timestamp, extra={"n": uniform_n})
    return reports


def b3_report(params, gen, N=10**6, seed=0, threads=None):
    """M4 fit against conditioning draws with each B3 summand ablated in turn."""
    x = sample_conditioning(params, gen, N, RngState(seed, 0), threads)
    est = mc_moment_set(x)
    return b3_ablation(params, gen, est.estimate.M4, est.se.M4)
