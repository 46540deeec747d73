"""Scenario registry and post-processing for the validation suite.

This module owns everything between the raw engine and the benchmark
numbers: the named scenario catalogue (through-flow convergence case,
flume obstacle/step/beach/bar experiments), the error norms and the
convergence driver, gauge analytics (solitary peak detection, reflected
and transmitted amplitudes, period folding) and the table/CSV writers.
All analytics are pure functions over SimulationRecord or plain arrays;
nothing here mutates engine state.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import find_peaks

from . import analytic, fem1d
from .analytic import SolitaryParams, SteadyStateParams
from .fem1d import (WALL, BoundarySide, BoundarySpec, LakeAtRest,
                    ScenarioConfig, SimulationRecord, SpongeZone,
                    TimeControls)
from .physics import ModelVariant

# ---------------------------------------------------------------------------
# Benchmark reference data.
#
# Row numbering follows the wave-flume experiment series the validation
# targets; amplitudes are in centimeters, depths in meters.  The reference
# amplitude tables carry the published computed values used as acceptance
# targets (full model and, for the obstacle rows, the incomplete variant).

TRIANGLE_EXPERIMENTS = {
    72: (0.150, 0.0296),
    73: (0.150, 0.0435),
    74: (0.150, 0.0581),
    75: (0.150, 0.0656),
    76: (0.150, 0.0840),
    77: (0.125, 0.0250),
    78: (0.125, 0.0475),
    79: (0.125, 0.0600),
    80: (0.125, 0.0630),
}

# exp -> (alpha_r full, alpha_r incomplete) [cm]
REFERENCE_REFLECTED_CM = {
    72: (0.37, 0.61),
    73: (0.53, 1.07),
    74: (0.70, 1.64),
    75: (0.79, 1.93),
    76: (0.96, 2.56),
    77: (0.49, 0.75),
    78: (0.86, 1.66),
    79: (1.03, 2.21),
    80: (1.07, 2.34),
}

STEP_EXPERIMENTS = {
    1: (0.30, 0.0425),
    2: (0.30, 0.0680),
    3: (0.30, 0.0710),
    4: (0.30, 0.0750),
    6: (0.30, 0.0970),
    7: (0.25, 0.0178),
    8: (0.25, 0.0257),
    9: (0.25, 0.0384),
    10: (0.25, 0.0575),
    11: (0.25, 0.0717),
    20: (0.20, 0.0163),
    21: (0.20, 0.0208),
    22: (0.20, 0.0243),
    23: (0.20, 0.0293),
    24: (0.20, 0.0365),
}

# exp -> ranked transmitted amplitudes [cm]; the shallow rows resolve three
STEP_FINAL_TIME = {0.30: 20.0, 0.25: 20.0, 0.20: 25.0}
REFERENCE_TRANSMITTED_CM = {
    1: (5.58, 1.18),
    2: (8.92, 1.78),
    3: (9.30, 1.85),
    4: (9.81, 1.94),
    6: (12.54, 2.43),
    7: (2.40, 0.69),
    8: (3.61, 0.96),
    9: (5.42, 1.39),
    10: (7.96, 2.03),
    11: (9.79, 2.49),
    20: (2.57, 0.90, 0.19),
    21: (3.26, 1.17, 0.21),
    22: (3.77, 1.36, 0.24),
    23: (4.49, 1.64, 0.27),
    24: (5.48, 2.01, 0.32),
}

# n_elements -> (E1, E2, E3, E4) on the through-flow convergence case
REFERENCE_STEADY_ERRORS = {
    100: (1.98e-3, 7.55e-3, 8.54e-5, 1.33e-1),
    200: (1.09e-3, 3.15e-3, 3.83e-5, 6.77e-2),
    400: (4.23e-4, 1.05e-3, 1.76e-5, 3.40e-2),
    800: (1.73e-4, 4.07e-4, 8.51e-6, 1.70e-2),
    1600: (7.92e-5, 1.82e-4, 4.20e-6, 8.51e-3),
    3200: (3.62e-5, 8.51e-5, 2.09e-6, 4.25e-3),
    6400: (1.85e-5, 4.31e-5, 1.05e-6, 2.13e-3),
}

SHOALING_CASES = {
    1: (0.096, (7.75, 8.25, 8.75)),
    2: (0.2975, (5.75, 6.25, 6.75)),
    3: (0.456, (4.25, 5.00, 5.75)),
    4: (0.5343, (4.25, 5.00, 5.75)),
}

BAR_CASES = {
    # name -> (amplitude [m], period [s], generation-zone length [m])
    "SL": (0.010, 2.01975, 6.0),
    "SH": (0.014, 1.26215, 4.0),
}
BAR_GAUGES = (5.7, 10.5, 12.5, 13.5, 14.5, 15.7, 17.3)

GAUGE_SAMPLES_PER_PERIOD = 100


# ---------------------------------------------------------------------------
# Gauge series and error norms


@dataclass(frozen=True)
class GaugeSeries:
    """Sampled free-surface elevation h+z at fixed gauge positions."""

    t: np.ndarray
    values: np.ndarray  # shape (len(t), n_gauges)

    def __post_init__(self):
        t = np.asarray(self.t)
        if t.ndim != 1 or (np.diff(t) <= 0.0).any():
            raise ValueError("gauge sample times must be strictly increasing")

    @classmethod
    def from_record(cls, record: SimulationRecord):
        t, vals = record.gauge_series()
        return cls(t=t, values=vals)


@dataclass(frozen=True)
class ConvergenceRow:
    """One mesh level of a refinement study with rates vs. the coarser row."""

    n: int
    e1: float
    e2: float
    e3: float
    e4: float
    r1: float = math.nan
    r2: float = math.nan
    r3: float = math.nan
    r4: float = math.nan

    @property
    def errors(self):
        return (self.e1, self.e2, self.e3, self.e4)


def error_norms(U, h_exact, m, dzdx):
    """Relative error norms of a state against an exact depth profile.

    Returns (E1, E2, E3, E4): lumped-L1 and max-norm depth errors plus the
    two relaxation disequilibrium measures |h^2-q1| and |q dz/dx - q3|,
    each normalized by the corresponding field's own magnitude.
    """
    h, q, q1, q3 = U[0], U[1], U[2], U[4]
    den1 = float(np.sum(np.abs(h_exact) * m))
    den2 = float(np.abs(h_exact).max())
    den3 = float(np.sum(np.abs(q1) * m))
    slope_flux = q * dzdx
    den4 = float(np.sum(np.abs(slope_flux) * m))
    if min(den1, den2, den3, den4) <= 0.0:
        raise ValueError("error norm denominator is zero")
    e1 = float(np.sum(np.abs(h - h_exact) * m)) / den1
    e2 = float(np.abs(h - h_exact).max()) / den2
    e3 = float(np.sum(np.abs(h * h - q1) * m)) / den3
    e4 = float(np.sum(np.abs(slope_flux - q3) * m)) / den4
    return e1, e2, e3, e4


def _rate(coarse, fine):
    if coarse > 0.0 and fine > 0.0:
        return math.log2(coarse / fine)
    return math.nan


def convergence_study(base: ScenarioConfig, counts):
    """Run the scenario on each element count and tabulate errors and rates.

    The scenario must carry a SteadyStateParams initial condition so the
    exact profile is available on every mesh.  Rates on each row are
    log2(E(previous)/E(this)) against the next-coarser count.
    """
    if not isinstance(base.initial, SteadyStateParams):
        raise TypeError("convergence study needs an exact-solution scenario")
    rows = []
    prev = None
    for n in sorted(counts):
        record = fem1d.run(replace(base, n_elements=n))
        h_exact, _, _, _ = analytic.steady_state_exact(record.x, base.initial)
        errs = error_norms(record.final_state, h_exact, record.mesh.m,
                           record.dzdx)
        rates = (math.nan,) * 4 if prev is None else tuple(
            _rate(p, e) for p, e in zip(prev, errs))
        rows.append(ConvergenceRow(n, *errs, *rates))
        prev = errs
    return rows


# ---------------------------------------------------------------------------
# Wave analytics


def detect_solitary_peaks(coords, values, base, min_prominence):
    """Local maxima of (values - base), largest first.

    Works on a gauge time series (coords = t) or a spatial slice
    (coords = x).  Returns a list of (coordinate, amplitude) pairs with
    amplitude = peak value - base, sorted by amplitude descending; peaks
    less prominent than min_prominence are ignored.
    """
    excess = np.asarray(values, dtype=float) - base
    idx, _ = find_peaks(excess, prominence=min_prominence)
    idx = idx[excess[idx] >= min_prominence]
    order = np.argsort(-excess[idx], kind="stable")
    coords = np.asarray(coords)
    return [(float(coords[i]), float(excess[i])) for i in idx[order]]


def reflected_window_open(p: SolitaryParams, x_gauge, g=9.81):
    """Earliest time the gauge reads reflection only.

    The launch transient needs (x0 - x_gauge)/c to clear the gauge plus
    two solitary widths of trailing slope.
    """
    c = analytic.solitary_speed(p, g)
    r = analytic.solitary_width(p)
    return (p.x0 - x_gauge) / c + 2.0 / (r * c)


def reflected_amplitude(record: SimulationRecord):
    """Peak surface excess [cm] at the reflection gauge after the window opens."""
    cfg = record.config
    if not cfg.gauges:
        raise ValueError("scenario has no gauges")
    if not isinstance(cfg.initial, SolitaryParams):
        raise TypeError("reflected amplitude needs a solitary-wave scenario")
    t_open = reflected_window_open(cfg.initial, cfg.gauges[0], cfg.g)
    t, vals = record.gauge_series()
    sel = t >= t_open
    if not sel.any():
        raise ValueError("run too short: reflection window never opens")
    return float((vals[sel, 0] - cfg.still_surface).max()) * 100.0


def transmitted_amplitudes(record: SimulationRecord, min_prominence=None):
    """Ranked transmitted-wave amplitudes [cm] at the first gauge.

    The default prominence threshold is 2% of the incident amplitude,
    below the smallest wave the benchmark tables resolve.
    """
    cfg = record.config
    if not cfg.gauges:
        raise ValueError("scenario has no gauges")
    if min_prominence is None:
        if not isinstance(cfg.initial, SolitaryParams):
            raise TypeError("default prominence needs a solitary-wave scenario")
        min_prominence = 0.02 * cfg.initial.alpha
    t, vals = record.gauge_series()
    peaks = detect_solitary_peaks(t, vals[:, 0], cfg.still_surface,
                                  min_prominence)
    return [100.0 * amp for _, amp in peaks]


def period_fold(t, values, t0, period):
    """Fold a time series onto one period: tau = (t - t0) mod period.

    Returns (tau, folded_values) sorted by tau with a stable order, so the
    result is invariant under t0 -> t0 + n*period.
    """
    if period <= 0.0:
        raise ValueError("period must be positive")
    t = np.asarray(t, dtype=float)
    shifted = t - t0
    tau = shifted - np.floor(shifted / period) * period
    order = np.argsort(tau, kind="stable")
    return tau[order], np.asarray(values)[order]


# ---------------------------------------------------------------------------
# Scenario registry


def _solitary_gauge_dt(p: SolitaryParams, g=9.81):
    return p.h0 / analytic.solitary_speed(p, g) / GAUGE_SAMPLES_PER_PERIOD


def _steady_scenario(n_elements=400):
    p = SteadyStateParams(h0=1.0, a=0.2, g=9.81)
    ends = np.array([-10.0, 15.0])
    h_b, q_b, _, _ = analytic.steady_state_exact(ends, p)
    profile = analytic.BathymetryProfile(tag="soliton-bump", h0=p.h0,
                                         bump_amplitude=p.a)
    _, dz_b = analytic.bathymetry_eval(profile, ends)
    inflow = BoundarySide(kind="dirichlet", h=float(h_b[0]), q=float(q_b),
                          q1=float(h_b[0]) ** 2, q2=0.0,
                          q3=float(q_b) * float(dz_b[0]))
    outflow = BoundarySide(kind="dirichlet", h=float(h_b[1]))
    return ScenarioConfig(
        name="steady",
        variant=ModelVariant.FULL,
        domain=(-10.0, 15.0),
        n_elements=n_elements,
        bathymetry="soliton-bump",
        bathymetry_params={"h0": p.h0, "bump_amplitude": p.a},
        initial=p,
        boundary=BoundarySpec(inflow, outflow),
        sponges=(SpongeZone(x_lo=-10.0, x_hi=-7.5, kind="absorption",
                            outer="left"),
                 SpongeZone(x_lo=12.5, x_hi=15.0, kind="absorption",
                            outer="right")),
        time=TimeControls(cfl=0.3, t_final=100.0, steady_tol=1e-8,
                          steady_window=1.0),
        h_ref=1.0,
        still_surface=1.0,
    )


def _lake_scenario():
    h0 = 0.125
    return ScenarioConfig(
        name="lake-triangle",
        variant=ModelVariant.FULL,
        domain=(-20.0, 20.0),
        n_elements=800,
        bathymetry="smoothed-triangle",
        bathymetry_params={"h0": h0, "d": analytic.smoothing_constant(h0, 40.0)},
        initial=LakeAtRest(surface=0.15),
        boundary=BoundarySpec(WALL, WALL),
        time=TimeControls(cfl=0.4, t_final=10.0),
        h_ref=h0,
        still_surface=0.15,
    )


def _solitary_flat_scenario():
    p = SolitaryParams(h0=0.25, alpha=0.05, x0=0.0)
    return ScenarioConfig(
        name="solitary-flat",
        variant=ModelVariant.FULL,
        domain=(-10.0, 30.0),
        n_elements=3200,
        bathymetry="flat",
        bathymetry_params={"h0": p.h0},
        initial=p,
        boundary=BoundarySpec(WALL, WALL),
        time=TimeControls(cfl=0.4, t_final=10.0, fields_dt=0.5,
                          gauge_dt=_solitary_gauge_dt(p)),
        gauges=(15.0,),
        h_ref=p.h0,
        still_surface=p.h0,
    )


def _triangle_scenario(exp):
    h0, alpha = TRIANGLE_EXPERIMENTS[exp]
    p = SolitaryParams(h0=h0, alpha=alpha, x0=-15.0 * h0)
    return ScenarioConfig(
        name=f"triangle-{exp}",
        variant=ModelVariant.FULL,
        domain=(-20.0, 20.0),
        n_elements=3200,
        bathymetry="smoothed-triangle",
        bathymetry_params={"h0": h0, "d": analytic.smoothing_constant(h0, 40.0)},
        initial=p,
        boundary=BoundarySpec(WALL, WALL),
        time=TimeControls(cfl=0.1, t_final=10.0, fields_dt=0.25,
                          gauge_dt=_solitary_gauge_dt(p)),
        gauges=(-25.0 * h0,),
        h_ref=h0,
        still_surface=h0,
    )


def _step_scenario(exp):
    h0, alpha = STEP_EXPERIMENTS[exp]
    p = SolitaryParams(h0=h0, alpha=alpha, x0=-15.0 * h0)
    return ScenarioConfig(
        name=f"step-{exp}",
        variant=ModelVariant.FULL,
        domain=(-10.0, 30.0),
        n_elements=3200,
        bathymetry="smoothed-step",
        bathymetry_params={"h0": h0, "d": analytic.smoothing_constant(h0, 40.0)},
        initial=p,
        boundary=BoundarySpec(WALL, WALL),
        sponges=(SpongeZone(x_lo=-10.0, x_hi=-5.0, kind="absorption",
                            outer="left"),),
        time=TimeControls(cfl=0.1, t_final=STEP_FINAL_TIME[h0],
                          gauge_dt=_solitary_gauge_dt(p)),
        gauges=(15.0,),
        h_ref=h0,
        still_surface=h0,
    )


def _shoaling_scenario(case):
    ratio, gauges = SHOALING_CASES[case]
    h0 = 0.25
    p = SolitaryParams(h0=h0, alpha=ratio * h0, x0=0.0)
    return ScenarioConfig(
        name=f"shoaling-{case}",
        variant=ModelVariant.FULL,
        domain=(-5.0, 35.0),
        n_elements=800,
        bathymetry="beach",
        bathymetry_params={"h0": h0, "datum_offset": h0},
        initial=p,
        boundary=BoundarySpec(WALL, WALL),
        time=TimeControls(cfl=0.1, t_final=10.0, gauge_dt=_solitary_gauge_dt(p)),
        gauges=gauges,
        h_ref=h0,
        still_surface=h0,
    )


def _bar_scenario(case):
    amplitude, period, gen_length = BAR_CASES[case]
    h0 = 0.4
    return ScenarioConfig(
        name=f"bar-{case}",
        variant=ModelVariant.FULL,
        domain=(-12.3, 37.7),
        n_elements=1000,
        bathymetry="trapezoid-bar",
        bathymetry_params={"h0": h0},
        initial=LakeAtRest(surface=h0),
        boundary=BoundarySpec(WALL, WALL),
        sponges=(SpongeZone(x_lo=-12.3, x_hi=-12.3 + gen_length,
                            kind="generation", outer="left",
                            amplitude=amplitude, period=period),
                 SpongeZone(x_lo=25.0, x_hi=37.7, kind="absorption",
                            outer="right")),
        time=TimeControls(cfl=0.175, t_final=60.0,
                          gauge_dt=period / GAUGE_SAMPLES_PER_PERIOD),
        gauges=BAR_GAUGES,
        h_ref=h0,
        still_surface=h0,
    )


def scenario_registry():
    """Fresh name -> ScenarioConfig mapping of every named scenario."""
    registry = {
        "steady": _steady_scenario(),
        "lake-triangle": _lake_scenario(),
        "solitary-flat": _solitary_flat_scenario(),
    }
    for exp in TRIANGLE_EXPERIMENTS:
        registry[f"triangle-{exp}"] = _triangle_scenario(exp)
    for exp in STEP_EXPERIMENTS:
        registry[f"step-{exp}"] = _step_scenario(exp)
    for case in SHOALING_CASES:
        registry[f"shoaling-{case}"] = _shoaling_scenario(case)
    for case in BAR_CASES:
        registry[f"bar-{case}"] = _bar_scenario(case)
    return registry


def get_scenario(name):
    registry = scenario_registry()
    try:
        return registry[name]
    except KeyError:
        known = ", ".join(sorted(registry))
        raise ValueError(f"unknown scenario {name!r}; available: {known}")


def apply_overrides(config: ScenarioConfig, n_elements=None, cfl=None,
                    t_final=None, variant=None):
    """Shallow scalar overrides used by the batch front-end."""
    tc = config.time
    if cfl is not None or t_final is not None:
        tc = replace(tc,
                     cfl=tc.cfl if cfl is None else cfl,
                     t_final=tc.t_final if t_final is None else t_final)
    return replace(
        config,
        n_elements=config.n_elements if n_elements is None else n_elements,
        variant=config.variant if variant is None else variant,
        time=tc,
    )


# ---------------------------------------------------------------------------
# Table drivers


def _triangle_amplitude(args):
    exp, variant, n_elements = args
    cfg = apply_overrides(_triangle_scenario(exp), n_elements=n_elements,
                          variant=variant)
    return reflected_amplitude(fem1d.run(cfg))


def run_table2(rows=None, n_elements=None, jobs=1):
    """Reflected amplitudes for the obstacle rows, both model variants.

    Returns one dict per row with computed and reference values [cm].
    """
    rows = sorted(TRIANGLE_EXPERIMENTS if rows is None else rows)
    tasks = [(exp, variant, n_elements)
             for exp in rows
             for variant in (ModelVariant.FULL, ModelVariant.INCOMPLETE)]
    amplitudes = _map_tasks(_triangle_amplitude, tasks, jobs)
    results = []
    for i, exp in enumerate(rows):
        h0, alpha = TRIANGLE_EXPERIMENTS[exp]
        ref_full, ref_inc = REFERENCE_REFLECTED_CM[exp]
        results.append({
            "exp": exp,
            "h0_cm": 100.0 * h0,
            "alpha_cm": 100.0 * alpha,
            "alpha_r_cm": amplitudes[2 * i],
            "reference_cm": ref_full,
            "alpha_r_incomplete_cm": amplitudes[2 * i + 1],
            "reference_incomplete_cm": ref_inc,
        })
    return results


def _step_amplitudes(args):
    exp, n_elements = args
    cfg = apply_overrides(_step_scenario(exp), n_elements=n_elements)
    return transmitted_amplitudes(fem1d.run(cfg))


def run_table3(rows=None, n_elements=None, jobs=1):
    """Ranked transmitted amplitudes for the step rows (full model)."""
    rows = sorted(STEP_EXPERIMENTS if rows is None else rows)
    tasks = [(exp, n_elements) for exp in rows]
    ranked = _map_tasks(_step_amplitudes, tasks, jobs)
    results = []
    for exp, amps in zip(rows, ranked):
        h0, alpha = STEP_EXPERIMENTS[exp]
        refs = REFERENCE_TRANSMITTED_CM[exp]
        results.append({
            "exp": exp,
            "h0_cm": 100.0 * h0,
            "alpha_cm": 100.0 * alpha,
            "transmitted_cm": tuple(amps[:3]),
            "reference_cm": refs,
        })
    return results


def _map_tasks(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# CSV writers and readers


def _fmt(value):
    return f"{value:.17g}"


def _cell(value):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return _fmt(value)


def write_table1(path, rows):
    with open(path, "w") as fh:
        fh.write("n,E1,rate1,E2,rate2,E3,rate3,E4,rate4\n")
        for row in rows:
            cells = [str(row.n),
                     _fmt(row.e1), _cell(row.r1),
                     _fmt(row.e2), _cell(row.r2),
                     _fmt(row.e3), _cell(row.r3),
                     _fmt(row.e4), _cell(row.r4)]
            fh.write(",".join(cells) + "\n")


def write_table2(path, results):
    with open(path, "w") as fh:
        fh.write("exp,h0_cm,alpha_cm,alpha_r_cm,reference_cm,"
                 "alpha_r_incomplete_cm,reference_incomplete_cm\n")
        for row in results:
            cells = [str(row["exp"]), _fmt(row["h0_cm"]), _fmt(row["alpha_cm"]),
                     _fmt(row["alpha_r_cm"]), _fmt(row["reference_cm"]),
                     _fmt(row["alpha_r_incomplete_cm"]),
                     _fmt(row["reference_incomplete_cm"])]
            fh.write(",".join(cells) + "\n")


def write_table3(path, results):
    with open(path, "w") as fh:
        fh.write("exp,h0_cm,alpha_cm,alpha_t1_cm,alpha_t2_cm,alpha_t3_cm,"
                 "reference_t1_cm,reference_t2_cm,reference_t3_cm\n")
        for row in results:
            computed = list(row["transmitted_cm"]) + [None] * 3
            refs = list(row["reference_cm"]) + [None] * 3
            cells = ([str(row["exp"]), _fmt(row["h0_cm"]), _fmt(row["alpha_cm"])]
                     + [_cell(v) for v in computed[:3]]
                     + [_cell(v) for v in refs[:3]])
            fh.write(",".join(cells) + "\n")


def read_gauges_csv(path):
    """Parse a gauges.csv into (t, values, column names)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if not header or header[0] != "t":
        raise ValueError(f"{path}: expected a gauges.csv header starting with 't'")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:], header[1:]


def write_folded(out_dir, name, tau, values):
    path = os.path.join(out_dir, f"folded_{name}.csv")
    with open(path, "w") as fh:
        fh.write("tau,surface\n")
        for a, b in zip(tau, values):
            fh.write(f"{_fmt(a)},{_fmt(b)}\n")
    return path


def fold_gauge_file(gauges_csv, t0, period, out_dir):
    """Period-fold every gauge column of a gauges.csv; returns written paths."""
    t, values, names = read_gauges_csv(gauges_csv)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for k, name in enumerate(names):
        tau, folded = period_fold(t, values[:, k], t0, period)
        paths.append(write_folded(out_dir, name, tau, folded))
    return paths
