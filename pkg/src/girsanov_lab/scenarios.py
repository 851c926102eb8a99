"""Built-in scenarios.

Each scenario simulates what it needs from the config, records estimates
and gates on a :class:`RunReport`, and fills its CSV tables.  Reference and
tilted ensembles use independent seeds derived from the config seed.
"""

from __future__ import annotations

import csv
from typing import Callable

import numpy as np
from scipy import integrate

from . import _rng, diffusion as dif, jumps as jmp
from .config import ConfigError, ScenarioConfig
from .entropy_core import DiscreteDist, dv_supremum, entropy_integrand, kl_divergence, SearchConfig
from .estimates import DECOMPOSITION, EntropyEstimate, mean_stderr
from .laws import PointMass
from .path_model import TimeGrid, fmt, write_ensemble_csv
from .report import RunReport, compare_estimators

SEED_TILTED = 0
SEED_REFERENCE = 1
MAX_EXPLODED = 0.01
EXACT_TOL = 1e-12


def _seeds(cfg: ScenarioConfig):
    return _rng.derive_seed(cfg.seed, SEED_TILTED), _rng.derive_seed(cfg.seed, SEED_REFERENCE)


def _par(cfg: ScenarioConfig, module) -> dict:
    """Block size (param ``block_size``) and worker count for the simulators."""
    return {"block_size": cfg.integer("block_size", module.DEFAULT_BLOCK), "workers": cfg.workers}


def _value_gate(rep: RunReport, est: EntropyEstimate, target: float, provenance: str, sigmas: float):
    tol = sigmas * est.stderr + EXACT_TOL * (1 + abs(target))
    return rep.gate(f"{est.estimator_tag} vs target", target, provenance, est.value, tol)


def _martingale_gate(rep, name, z, sigmas, provenance="E_R Z = 1"):
    mean, se = mean_stderr(z)
    rep.checks[name] = {"mean": mean, "stderr": se, "n": int(np.size(z))}
    # heavier-tailed products: one extra sigma of slack
    return rep.gate(name, 1.0, provenance, mean, (sigmas + 1) * se + EXACT_TOL)


def _closure_gate(rep, name, is_est, is_se, direct, direct_se, sigmas):
    rep.checks[name] = {"importance": is_est, "importance_stderr": is_se, "direct": direct, "direct_stderr": direct_se}
    return rep.gate(name, direct, "direct mean under P", is_est, sigmas * float(np.hypot(is_se, direct_se)) + EXACT_TOL)


# diffusion -------------------------------------------------------------------------


def _diffusion_run(cfg: ScenarioConfig, rep: RunReport, spec, beta, *, h0=0.0, target=None, provenance=""):
    sigmas = cfg.tolerance_sigmas
    grid = TimeGrid.uniform(cfg.grid_n)
    seed_p, seed_r = _seeds(cfg)
    csv_paths = cfg.integer("csv_paths", 8)
    rep.diagnostics.update(seed_tilted=seed_p, seed_reference=seed_r)

    weights_csv = csv.writer(rep.table("weights"), lineterminator="\n")
    weights_csv.writerow(["path_id", "log_init", "stoch_integral", "energy", "log_z"])
    parts, x1 = [], []
    for k, ens in enumerate(dif.iter_tilted(spec, beta, grid, cfg.n_paths, seed_p, **_par(cfg, dif))):
        if k == 0:
            write_ensemble_csv(ens, rep.table("paths", header=False), rep.version, max_paths=csv_paths)
        w = dif.ensemble_weights(ens, beta, spec)
        for row in zip(w.path_ids[~w.exploded], w.log_init[~w.exploded], w.stoch_integral[~w.exploded],
                       w.energy[~w.exploded], w.log_z[~w.exploded]):
            weights_csv.writerow([int(row[0]), *map(fmt, row[1:])])
        parts.append(w)
        x1.append(ens.terminal[~ens.exploded, 0])
    w = dif.ContinuousWeights.concat(parts)
    x1 = np.concatenate(x1)
    n_exp = int(w.exploded.sum())
    rep.diagnostics["exploded_tilted"] = n_exp
    if n_exp == len(w):
        rep.gate("exploded fraction", 0.0, f"at most {MAX_EXPLODED:.0%} of paths", 1.0, MAX_EXPLODED, one_sided=True)
        return

    plug = rep.estimate(dif.plugin_estimate(w))
    dec = rep.estimate(dif.decomposition_estimate(w, h0))
    if target is not None:
        _value_gate(rep, plug, target, provenance, sigmas)
        _value_gate(rep, dec, target, provenance, sigmas)
    rep.add(compare_estimators(plug, dec, sigmas))
    rep.gate("decomposition <= plug-in", plug.value, "entropy inequality", dec.value,
             sigmas * float(np.hypot(plug.stderr, dec.stderr)), one_sided=True)

    logs, xr, n_exploded_r = [], [], 0
    for ens in dif.iter_reference(spec, grid, cfg.n_paths, seed_r, **_par(cfg, dif)):
        wr = dif.ensemble_weights(ens, beta, spec)
        ok = ~wr.exploded
        n_exploded_r += int(wr.exploded.sum())
        logs.append(wr.log_z[ok])
        xr.append(ens.terminal[ok, 0])
    z = np.exp(np.concatenate(logs))
    if z.size:
        _martingale_gate(rep, "E_R Z_1", z, sigmas)
        is_est, is_se = mean_stderr(z * np.concatenate(xr))
        direct, direct_se = mean_stderr(x1)
        _closure_gate(rep, "E_R[Z X_1] vs E_P[X_1]", is_est, is_se, direct, direct_se, sigmas)

    frac = max(n_exp, n_exploded_r) / cfg.n_paths
    rep.diagnostics["exploded_reference"] = n_exploded_r
    rep.gate("exploded fraction", 0.0, f"at most {MAX_EXPLODED:.0%} of paths", frac, MAX_EXPLODED, one_sided=True)


def bm_const_drift(cfg: ScenarioConfig, rep: RunReport):
    """Brownian motion with scale sigma, tilted by a constant beta."""
    c, s, x0 = cfg.num("beta", 1.0), cfg.num("sigma", 1.0), cfg.num("x0", 0.0)
    spec = dif.DiffusionSpec.brownian(PointMass([x0]), scale=s)
    beta = dif.DriftPerturbation.constant(c)
    _diffusion_run(cfg, rep, spec, beta, target=0.5 * c * c * s * s, provenance="beta^2 sigma^2 / 2 closed form")


def _euler_ou_energy(kappa, gamma, x0, grid_n):
    """E sum gamma^2 X_i^2 dt for the Euler chain of the tilted OU model (rate kappa + gamma)."""
    dt = 1.0 / grid_n
    k = kappa + gamma
    m2, total = x0 * x0, 0.0
    for _ in range(grid_n):
        total += gamma * gamma * m2 * dt
        m2 = (1 - k * dt) ** 2 * m2 + dt
    return total


def ou_drift(cfg: ScenarioConfig, rep: RunReport):
    """dX = -kappa X dt + dW, tilted by beta(x) = -gamma x (a faster mean reversion)."""
    kappa, gamma, x0 = cfg.num("kappa", 1.0), cfg.num("gamma", 1.0), cfg.num("x0", 1.0)
    spec = dif.DiffusionSpec(1, lambda t, x: -kappa * x, lambda t, x: 1.0, PointMass([x0]), name="ou")
    beta = dif.DriftPerturbation(lambda t, x: -gamma * x, name="ou-tilt")
    target = 0.5 * _euler_ou_energy(kappa, gamma, x0, cfg.grid_n)
    _diffusion_run(cfg, rep, spec, beta, target=target, provenance="second-moment recursion of the Euler chain")


def sine_drift(cfg: ScenarioConfig, rep: RunReport):
    """Reference drift a sin(x); perturbation beta(t, x) = sin(x) + t.  Cross-estimator gates only."""
    a, x0 = cfg.num("drift_amp", 1.0), cfg.num("x0", 0.0)
    spec = dif.DiffusionSpec(1, lambda t, x: a * np.sin(x), lambda t, x: 1.0, PointMass([x0]), name="sine")
    beta = dif.DriftPerturbation(lambda t, x: np.sin(x) + t, name="sin(x)+t")
    _diffusion_run(cfg, rep, spec, beta)


# jumps -----------------------------------------------------------------------------


def _jump_run(cfg, rep, spec, tilt, *, h0=0.0, target=None, provenance="", extra_h: dict | None = None):
    sigmas = cfg.tolerance_sigmas
    grid = TimeGrid.uniform(cfg.grid_n)
    seed_p, seed_r = _seeds(cfg)
    csv_paths = cfg.integer("csv_paths", 8)
    rep.diagnostics.update(seed_tilted=seed_p, seed_reference=seed_r, truncation=spec.truncation)

    out = csv.writer(rep.table("weights"), lineterminator="\n")
    out.writerow(["path_id", "n_jumps", "log_z_plus", "log_z_minus", "tau_minus_hit", "log_z"])
    parts, counts, x1, census = [], [], [], {}
    for k, ens in enumerate(jmp.iter_tilted_jumps(spec, tilt, grid, cfg.n_paths, seed_p, **_par(cfg, jmp))):
        if k == 0:
            write_ensemble_csv(ens, rep.table("paths", header=False), rep.version, max_paths=csv_paths)
            rep.diagnostics["dominating_rate"] = ens.metadata["dominating_rate"]
        w = jmp.jump_weights(ens, tilt, spec)
        for row in zip(w.path_ids, w.n_jumps, w.log_z_plus, w.log_z_minus, w.tau_minus_hit, w.log_z):
            out.writerow([int(row[0]), int(row[1]), fmt(row[2]), fmt(row[3]), int(row[4]), fmt(row[5])])
        parts.append(w)
        counts.append(ens.n_jumps)
        x1.append(ens.terminal[:, 0])
        for lev, c in jmp.tau_minus_census(ens, tilt).items():
            census[lev] = census.get(lev, 0) + c
    w = jmp.JumpWeights.concat(parts)
    counts, x1 = np.concatenate(counts), np.concatenate(x1)
    rep.diagnostics["tau_minus_census"] = {str(k): v for k, v in census.items()}

    plug = rep.estimate(jmp.plugin_estimate_jump(w))
    dec = rep.estimate(EntropyEstimate(h0 + jmp.decomposition_integral(tilt, spec, grid), 0.0, len(w), DECOMPOSITION))
    if target is not None:
        _value_gate(rep, plug, target, provenance, sigmas)
        _value_gate(rep, dec, target, provenance, sigmas)
    rep.add(compare_estimators(plug, dec, sigmas))
    rep.gate("tilted paths hitting tau-", 0.0, "P(tau- = inf) = 1", float(np.sum(w.tau_minus_hit)), 0.0)

    logs, n_r, x_r, zh = [], [], [], {name: [] for name in (extra_h or {})}
    for ens in jmp.iter_reference_jumps(spec, grid, cfg.n_paths, seed_r, **_par(cfg, jmp)):
        logs.append(jmp.jump_weights(ens, tilt, spec).log_z)
        n_r.append(ens.n_jumps)
        x_r.append(ens.terminal[:, 0])
        for name, h in (extra_h or {}).items():
            zh[name].append(jmp.exponential_martingale_values(h, ens, spec))
    z = np.exp(np.concatenate(logs))
    _martingale_gate(rep, "E_R Z_1", z, sigmas)
    for name, parts_h in zh.items():
        _martingale_gate(rep, name, np.concatenate(parts_h), sigmas)
    is_est, is_se = mean_stderr(z * np.concatenate(n_r))
    direct, direct_se = mean_stderr(counts)
    _closure_gate(rep, "E_R[Z N_1] vs E_P[N_1]", is_est, is_se, direct, direct_se, sigmas)
    is_est, is_se = mean_stderr(z * np.concatenate(x_r))
    direct, direct_se = mean_stderr(x1)
    _closure_gate(rep, "E_R[Z X_1] vs E_P[X_1]", is_est, is_se, direct, direct_se, sigmas)


def _const_h(c):
    return lambda t, q: np.full(np.shape(t), float(c))


def poisson_tilt(cfg: ScenarioConfig, rep: RunReport):
    """Unit jumps at rate ``rate``, constant tilt ``ell``."""
    rate, ell, h = cfg.num("rate", 1.0), cfg.num("ell", 2.0), cfg.num("h", 0.5)
    spec = jmp.JumpSpec(jmp.DiscreteKernel([1.0], [rate]), name="poisson")
    tilt = jmp.TiltField.constant(ell)
    target = rate * float(entropy_integrand(ell))
    _jump_run(cfg, rep, spec, tilt, target=target, provenance="Poisson KL rate (l log l - l + 1)",
              extra_h={f"E_R Z^h_1 (h={h})": _const_h(h)})


def two_atom_tilt(cfg: ScenarioConfig, rep: RunReport):
    """Signed jumps on two atoms with a per-atom tilt; includes the h = -inf martingale."""
    atoms = cfg.nums("atoms", [1.0, -1.0])
    masses = cfg.nums("masses", [0.5, 0.5])
    ells = cfg.nums("ell", [2.0, 0.5])
    if not len(atoms) == len(masses) == len(ells):
        raise ConfigError("atoms, masses and ell need equal lengths")
    h = cfg.num("h", 0.3)
    spec = jmp.JumpSpec(jmp.DiscreteKernel(atoms, masses), name="two-atom")
    tilt = jmp.TiltField.per_atom(atoms, ells)
    target = float(np.sum(np.asarray(masses) * entropy_integrand(np.asarray(ells))))
    first = atoms[0]

    def killed(t, q):
        return np.where(q[..., 0] == first, -np.inf, h)

    _jump_run(cfg, rep, spec, tilt, target=target, provenance="sum of per-atom Poisson KL rates",
              extra_h={f"E_R Z^h_1 (h=-inf on atom {first})": killed})
    if min(ells) > 0:
        _formula_gates(cfg, rep, spec, tilt)


def _formula_gates(cfg, rep, spec, tilt, n=1000):
    grid = TimeGrid.uniform(cfg.grid_n)
    ens = jmp.simulate_reference_jumps(spec, grid, min(n, cfg.n_paths), _rng.derive_seed(cfg.seed, 2))
    ledger = np.exp(jmp.jump_weights(ens, tilt, spec).log_z)
    alt = jmp.alt_product_densities(ens, tilt, spec)
    rel = float(np.max(np.abs(alt - ledger) / (1 + np.abs(alt))))
    rep.gate("ledger vs product formula", 0.0, "two expressions of dP/dR", rel, 1e-10)
    base = jmp.jump_weights(ens, tilt, spec, alpha=0.5).log_z
    shift = max(float(np.max(np.abs(jmp.jump_weights(ens, tilt, spec, alpha=a).log_z - base))) for a in (0.1, 0.9))
    rep.gate("ledger threshold invariance", 0.0, "Z+ Z- independent of alpha", shift, 1e-10)


def uniform_mark_tilt(cfg: ScenarioConfig, rep: RunReport):
    """Marks uniform on [low, high]; tilt 1 + amp sin(pi q)."""
    low, high = cfg.num("low", -2.0), cfg.num("high", 2.0)
    mass, amp = cfg.num("mass", 1.0), cfg.num("amp", 0.5)
    if not 0 <= amp < 1:
        raise ConfigError("amp must lie in [0, 1)")
    spec = jmp.JumpSpec(jmp.UniformKernel(low, high, mass), name="uniform-marks")

    def ell(t, q):
        return 1.0 + amp * np.sin(np.pi * np.asarray(q)[..., 0])

    tilt = jmp.TiltField(ell, bound=1.0 + amp, name="1+amp sin(pi q)")
    density = mass / (high - low)
    target, _ = integrate.quad(lambda q: density * float(entropy_integrand(1.0 + amp * np.sin(np.pi * q))),
                               low, high, epsabs=1e-14, epsrel=1e-13, limit=200)
    _jump_run(cfg, rep, spec, tilt, target=target, provenance="adaptive quadrature of the entropy integrand",
              extra_h={"E_R Z^h_1 (h=sin q)": lambda t, q: np.sin(np.asarray(q)[..., 0])})
    if amp > 0:
        _formula_gates(cfg, rep, spec, tilt)


# finite space ------------------------------------------------------------------------


def dv_finite_space(cfg: ScenarioConfig, rep: RunReport):
    """Variational supremum against closed-form KL on a finite space."""
    p = DiscreteDist.from_weights(cfg.nums("p", [0.2, 0.3, 0.5]))
    r = DiscreteDist.from_weights(cfg.nums("r", [0.2, 0.3, 0.5]), labels=p.labels)
    res = dv_supremum(p, r, SearchConfig(divergence_cap=cfg.num("divergence_cap", 1e3)))
    kl = kl_divergence(p, r)
    rep.diagnostics.update(iterations=res.iterations, converged=res.converged, diverged=res.diverged)
    rep.checks["dv"] = {"supremum": res.value, "kl": kl}
    if np.isfinite(kl):
        rep.gate("DV supremum vs KL", kl, "closed-form KL", res.value, 1e-6)
    else:
        cap = cfg.num("divergence_cap", 1e3)
        rep.gate("DV supremum exceeds cap", cap, "KL = inf when p is not << r", min(res.value, cap), 0.0)
    out = csv.writer(rep.table("potential"), lineterminator="\n")
    out.writerow(["label", "p", "r", "u"])
    for lab, pi, ri, ui in zip(p.labels, p.probs, r.aligned(p.labels), res.u):
        out.writerow([lab, fmt(pi), fmt(ri), fmt(ui)])


REGISTRY: dict[str, Callable[[ScenarioConfig, RunReport], None]] = {
    "bm_const_drift": bm_const_drift,
    "ou_drift": ou_drift,
    "sine_drift": sine_drift,
    "poisson_tilt": poisson_tilt,
    "two_atom_tilt": two_atom_tilt,
    "uniform_mark_tilt": uniform_mark_tilt,
    "dv_finite_space": dv_finite_space,
}
