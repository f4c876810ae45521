"""The headline experiments: flat and revolution entropy slopes, and the face witness."""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from hpol_lab.entropy import FlowSystem, SaturationWarning, hpol_estimate
from hpol_lab.experiments.config import ConfigError
from hpol_lab.experiments.properties import COUNTS_HEADER as PROP_HEADER
from hpol_lab.experiments.properties import run_checks
from hpol_lab.experiments.witness import analyse_face, build_witness, engine_crosscheck, witness_slope
from hpol_lab.flow import restrict_to_energy
from hpol_lab.torus import model_from_params

FLAT_WINDOW = (0.8, 1.3)
REVOLUTION_WINDOW = (1.6, 2.4)
WITNESS_SLOPE_FLOOR = 1.7

COUNTS_HEADER = ["eps", "horizon_exponent", "horizon", "count"]
WITNESS_COUNTS_HEADER = ["m", "count", "m_squared", "horizon", "eps0", "separated", "n_failures"]
PAIRS_HEADER = ["m", "k_a", "j_a", "k_b", "j_b", "distance", "eps0", "separated"]


@dataclass
class Report:
    """What an experiment hands to the writer: a summary, named tables and a verdict.

    ``passed`` is None when the run is inconclusive (for instance every eps
    saturates), which the CLI reports without failing.
    """

    experiment: str
    config: object
    summary: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    passed: object = None
    elapsed: float = 0.0


def fan_sampler(model, e, q0, angle, width):
    """K momenta at one base point, directions evenly spread over ``width`` radians."""
    q0 = np.asarray(q0, float)

    def sample(K, rng):
        ang = angle + np.linspace(-width / 2, width / 2, K)
        q = np.tile(q0, (K, 1))
        p = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        st = restrict_to_energy(model, (q, p), e)
        return st.q, st.p

    return sample


def shell_sampler(model, e):
    """K states with uniform base points and uniform directions."""

    def sample(K, rng):
        q = rng.random((K, 2))
        ang = 2 * np.pi * rng.random(K)
        p = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        st = restrict_to_energy(model, (q, p), e)
        return st.q, st.p

    return sample


def fan_width(config):
    # counts reach about K/2 at the coarsest eps and the longest horizon
    T_max = 2.0 ** max(config.horizons) * config.T_unit
    return config.K * max(config.eps) / (2 * T_max)


def _sampler(config, model):
    if config.ensemble == "shell":
        return shell_sampler(model, config.e)
    return fan_sampler(model, config.e, (config.fan_q1, config.fan_q2), config.fan_angle,
                       fan_width(config))


def _entropy_run(config, window):
    model = model_from_params(config.model_params())
    system = FlowSystem(model, config.e, _sampler(config, model), config.dt, config.dt_sample,
                        config.T_unit)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SaturationWarning)
        fit = hpol_estimate(system, config.eps, config.horizons, config.K, config.seed)
    rows = []
    for i, eps in enumerate(fit.eps):
        for k, h, c in zip(config.horizons, fit.horizons, fit.counts[i]):
            rows.append([eps, k, h, int(c)])
    proxy = fit.hpol_proxy
    summary = fit.summary()
    summary["warnings"] = list(fit.warnings) + [str(w.message) for w in caught]
    summary["window"] = list(window)
    summary["ensemble"] = config.ensemble
    if config.ensemble == "fan":
        summary["fan_width"] = fan_width(config)
    passed = None if proxy is None else bool(window[0] <= proxy <= window[1])
    return summary, {"counts": (COUNTS_HEADER, rows)}, passed


def run_flat_baseline(config):
    if config.model != "flat":
        raise ConfigError("flat_baseline needs model=flat")
    t0 = time.perf_counter()
    summary, tables, passed = _entropy_run(config, FLAT_WINDOW)
    return Report("flat_baseline", config, summary, tables, passed, time.perf_counter() - t0)


def run_revolution(config):
    if config.model != "revolution":
        raise ConfigError("revolution needs model=revolution")
    if not (config.a > config.b >= 0):
        raise ConfigError("revolution needs a > b >= 0")
    t0 = time.perf_counter()
    summary, tables, passed = _entropy_run(config, REVOLUTION_WINDOW)
    return Report("revolution", config, summary, tables, passed, time.perf_counter() - t0)


def _face_summary(face):
    meta = dict(face.section.meta)
    return {
        "e": face.e,
        "A": face.A,
        "rho": list(face.rho),
        "c_minus": face.c_minus.tolist(),
        "c_plus": face.c_plus.tolist(),
        "c_plus_exact": face.c_plus_exact.tolist(),
        "face_samples": face.face_samples,
        "face_length": float(np.linalg.norm(face.c_plus - face.c_minus)),
        "alpha_c_plus": face.alpha_c_plus,
        "sigma_homology": list(face.sigma_homology),
        "section": meta,
        "tau": face.tau,
        "J": list(face.J),
        "mather_q2_on_section": face.mather_q2.tolist(),
    }


def run_face_witness(config):
    if config.model != "pinched":
        raise ConfigError("face_witness needs model=pinched")
    t0 = time.perf_counter()
    model = model_from_params(config.model_params())
    face = analyse_face(model, config.e, config.n_samples, config.N, config.N_lp, config.M_p,
                        workers=config.threads)
    ms = sorted(config.m_range)
    with ThreadPoolExecutor(config.threads) as ex:
        families = list(ex.map(lambda m: build_witness(face, m), ms))

    counts, pairs = [], []
    for fam in families:
        counts.append([fam.m, fam.count, fam.m * fam.m, fam.horizon * fam.tau, fam.eps0,
                       fam.separated, len(fam.failures)])
        iu, ju = np.triu_indices(fam.count, 1)
        for a, b in zip(iu, ju):
            d = float(fam.distances[a, b])
            pairs.append([fam.m, *fam.labels[a], *fam.labels[b], d, fam.eps0, d >= fam.eps0])

    good = [f.m for f in families if f.separated and f.count >= f.m * f.m]
    slope = witness_slope(families) if len(families) >= 2 else None
    k_check = min(ms[0], 5)
    summary = {
        "face": _face_summary(face),
        "families": [f.summary() for f in families],
        "slope": slope,
        "slope_floor": WITNESS_SLOPE_FLOOR,
        "m0": min(good) if good else None,
        "engine_crosscheck": {"k": k_check, "max_deviation": engine_crosscheck(model, face, k_check)},
        "failures": [{"m": f.m, "pairs": [[list(a), list(b), d] for a, b, d in f.failures]}
                     for f in families if f.failures],
    }
    passed = (all(f.count >= f.m * f.m and f.separated for f in families)
              and (slope is None or slope >= WITNESS_SLOPE_FLOOR))
    tables = {
        "counts": (WITNESS_COUNTS_HEADER, counts),
        "level_curve": (None, list(face.curve.rows())),
        "witness_pairs": (PAIRS_HEADER, pairs),
    }
    return Report("face_witness", config, summary, tables, bool(passed), time.perf_counter() - t0)


def run_property_suite(config):
    t0 = time.perf_counter()
    rows, counts, timings = run_checks(config)
    failed = [r["name"] for r in rows if r["passed"] is False]
    summary = {"model": config.model_params(), "checks": rows, "timings": timings,
               "failed": failed}
    return Report("property_suite", config, summary, {"counts": (PROP_HEADER, counts)},
                  not failed, time.perf_counter() - t0)


RUNNERS = {
    "flat_baseline": run_flat_baseline,
    "revolution": run_revolution,
    "face_witness": run_face_witness,
    "property_suite": run_property_suite,
}


def run(config):
    return RUNNERS[config.experiment](config)
