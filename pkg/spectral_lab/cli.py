"""
Command-Line Harness

This module provides the `spectral_lab` command line. Every subcommand reads an
ExperimentConfig JSON file, dispatches to the owning module and writes CSV/JSON
outputs plus a manifest into one run directory.

Usage:
    python -m spectral_lab <subcommand> --config run.json [--seed N --out DIR --threads K]

Exit codes: 0 success, 2 configuration or domain error, 3 numeric failure.
"""

import argparse
import json
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from . import lowenergy, spectral, universality
from .config import get_settings
from .ensembles import Instance, SparsePauliSum, sample_instance
from .errors import ConfigError, DomainError, NumericError, ResourceError, SpectralLabError
from .models import (
    DOSProxyQuery,
    EnsembleSpec,
    EnsembleVariant,
    ExperimentConfig,
    QPEModel,
    ResolventQuery,
    WitnessConfig,
)
from .montecarlo import (
    STREAM_GUE,
    STREAM_KLOCAL,
    STREAM_LANCZOS,
    STREAM_PAULI,
    STREAM_PERMUTATION,
    STREAM_QPE,
    STREAM_RESTART,
    derive_seed,
    map_trials,
)
from .persistence import RunWriter, content_hash, instance_files, load_instance, spectrum_rows, spectrum_summary

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_VARIANT_STREAMS = {
    EnsembleVariant.PAULI: STREAM_PAULI,
    EnsembleVariant.GUE: STREAM_GUE,
    EnsembleVariant.COMPLEX_SIGNED_PERM_SUM: STREAM_PERMUTATION,
    EnsembleVariant.REAL_SIGNED_PERM_SUM: STREAM_PERMUTATION,
    EnsembleVariant.COMPLETE_KLOCAL: STREAM_KLOCAL,
}


# --- Config loading ---

def load_config(path: str, seed: Optional[int] = None, out: Optional[str] = None,
                threads: Optional[int] = None) -> ExperimentConfig:
    """
    Read and validate the experiment config, applying command-line overrides.

    Raises:
        ConfigError: If the file is missing or not JSON
        ValidationError: If the content does not satisfy ExperimentConfig
    """
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    overrides = {"seed": seed, "output_dir": out, "threads": threads}
    data.update({key: value for key, value in overrides.items() if value is not None})
    return ExperimentConfig.model_validate(data)


def _param(config: ExperimentConfig, name: str, default: Any = None) -> Any:
    return config.params.get(name, default)


def _first(values: Sequence[Any], name: str, default: Any = None) -> Any:
    if values:
        return values[0]
    if default is None:
        raise ConfigError(f"Config needs a non-empty {name}")
    return default


def _require(value: Any, name: str) -> Any:
    if value is None:
        raise ConfigError(f"Config needs {name}")
    return value


def _instance_label(index: int) -> str:
    return f"instance-{index:03d}"


def instance_specs(config: ExperimentConfig) -> List[EnsembleSpec]:
    """
    Seeded ensemble specs for the run's instances.

    A seed fixed in the ensemble spec is used as is for a single instance;
    otherwise instance i is seeded by derive_seed(master, variant stream, i).
    """
    spec = _require(config.ensemble, "an ensemble or instance_path")
    if spec.seed is not None and config.trials == 1:
        return [spec]
    stream = _VARIANT_STREAMS[spec.variant]
    return [spec.with_seed(derive_seed(config.seed, stream, index)) for index in range(config.trials)]


def load_instances(config: ExperimentConfig) -> List[Tuple[str, Instance, Optional[EnsembleSpec]]]:
    """(label, instance, spec) for the instance file or the sampled ensemble instances."""
    if config.instance_path:
        h, _ = load_instance(config.instance_path)
        return [(os.path.splitext(os.path.basename(config.instance_path))[0], h, None)]
    specs = instance_specs(config)
    instances = map_trials(lambda index: sample_instance(specs[index]), len(specs), config.threads)
    return [(_instance_label(index), h, spec) for index, (h, spec) in enumerate(zip(instances, specs))]


def _with_context(label: str, fn: Callable[[], Any]) -> Any:
    """Run fn and prefix any laboratory error with the experiment row it came from."""
    try:
        return fn()
    except NumericError as e:
        raise NumericError(f"{label}: {e}", e.best_estimate, e.diagnostics) from e
    except (DomainError, ResourceError, ConfigError) as e:
        raise type(e)(f"{label}: {e}") from e


def _spectra(config: ExperimentConfig, instances) -> List[spectral.Spectrum]:
    return map_trials(lambda index: _with_context(instances[index][0], lambda: spectral.eigenvalues(instances[index][1])),
                      len(instances), config.threads)


# --- Subcommands ---

def cmd_sample(config: ExperimentConfig, run: RunWriter) -> None:
    rows = []
    for label, h, spec in load_instances(config):
        run.write_instance(h, label, spec)
        dim = h.dim
        rows.append([label, spec.variant.value if spec else "custom", spec.seed if spec else None, dim])
    run.write_csv("instances.csv", ["instance", "variant", "seed", "dim"], rows)


def cmd_spectrum(config: ExperimentConfig, run: RunWriter) -> None:
    instances = load_instances(config)
    spectra = _spectra(config, instances)
    summaries = []
    for (label, h, _), s in zip(instances, spectra):
        header, rows = spectrum_rows(s)
        run.write_csv(f"{label}-spectrum.csv", header, rows)
        summary = {"instance": label, **spectrum_summary(s)}
        if _param(config, "norm_estimate", False):
            lanczos_seed = derive_seed(config.seed, STREAM_LANCZOS)
            max_iters = int(_param(config, "lanczos_max_iters", 300))
            estimate = _with_context(label, lambda: spectral.spectral_norm_estimate(h, max_iters=max_iters,
                                                                                   seed=lanczos_seed))
            summary.update(lanczos_norm=estimate.value, lanczos_residual=estimate.residual,
                           lanczos_iterations=estimate.iterations)
        summaries.append(summary)
    run.write_json("summary.json", summaries)


def cmd_pnorm(config: ExperimentConfig, run: RunWriter) -> None:
    instances = load_instances(config)
    spectra = _spectra(config, instances)
    p_values: List[Any] = list(config.p_grid) or [2]
    if _param(config, "include_inf", False):
        p_values.append("inf")
    rows = []
    for (label, _, _), s in zip(instances, spectra):
        for p in p_values:
            rows.append([label, p, _with_context(label, lambda: spectral.schatten_p_norm(s, p))])
    run.write_csv("pnorm.csv", ["instance", "p", "value"], rows)


def cmd_resolvent(config: ExperimentConfig, run: RunWriter) -> None:
    instances = load_instances(config)
    spectra = _spectra(config, instances)
    with_semicircle = _param(config, "semicircle", True)
    rows = []
    for omega in config.omega_grid or [0.0]:
        for eta in _require(config.eta_grid or None, "eta_grid"):
            for p in config.p_grid or [2]:
                query = ResolventQuery(omega=omega, eta=eta, p=p)
                reference = spectral.semicircle_resolvent_moment(query) if with_semicircle else None
                for (label, _, _), s in zip(instances, spectra):
                    rows.append([label, omega, eta, p, spectral.resolvent_trace_moment(s, query),
                                 spectral.resolvent_norm(s, query), reference])
    run.write_csv("resolvent.csv", ["instance", "omega", "eta", "p", "trace_moment", "norm", "semicircle"], rows)


def cmd_dos(config: ExperimentConfig, run: RunWriter) -> None:
    instances = load_instances(config)
    spectra = _spectra(config, instances)
    pooled = np.concatenate([s.eigenvalues for s in spectra])

    low, high = _param(config, "range", [-2.5, 2.5])
    bins = int(_param(config, "bins", 80))
    counts, edges = np.histogram(pooled, bins=bins, range=(low, high))
    width = edges[1] - edges[0]
    centers = (edges[:-1] + edges[1:]) / 2
    densities = counts / (pooled.size * width)
    semicircle = spectral.semicircle_density(centers)
    run.write_csv("histogram.csv", ["left", "right", "count", "density", "semicircle_density"],
                  [[edges[i], edges[i + 1], counts[i], densities[i], semicircle[i]] for i in range(bins)])
    pooled_spectrum = spectral.Spectrum(pooled, source="pooled")
    summary = {"eigenvalues": int(pooled.size), "instances": len(spectra),
               "mass_in_support": spectral.window_fraction(pooled_spectrum, -2.0, 2.0),
               "histogram_mass_in_support": float(counts[(edges[:-1] >= -2.0) & (edges[1:] <= 2.0)].sum() / pooled.size)}

    curve_points = int(_param(config, "curve_points", 401))
    xs = np.linspace(low, high, curve_points)
    curve_rows = []
    for omega in config.omega_grid:
        for eta in config.eta_grid:
            for p in config.p_grid or [2]:
                values = spectral.resolvent_weights(xs, omega, eta, p) * eta ** p
                curve_rows.extend([omega, eta, p, x, value] for x, value in zip(xs, values))
    if curve_rows:
        run.write_csv("filter_curves.csv", ["omega", "eta", "p", "x", "filter"], curve_rows)

    epsilons = list(config.epsilon_grid) or ([config.epsilon] if config.epsilon is not None else [])
    proxy_rows, profile_rows = [], []
    for epsilon in epsilons:
        summary[f"low_energy_fraction_eps_{epsilon}"] = spectral.low_energy_fraction(pooled_spectrum, epsilon)
        summary[f"semicircle_mass_eps_{epsilon}"] = spectral.semicircle_mass(-2.0, -2.0 * (1.0 - epsilon))
        for p in config.p_grid or [2]:
            query = DOSProxyQuery.from_accuracy(epsilon, p)
            reference = lowenergy.semicircle_dos_proxy(query)
            for (label, _, _), s in zip(instances, spectra):
                proxy_rows.append([label, epsilon, p, query.e0, query.eta, query.omega_bar,
                                   lowenergy.dos_proxy(s, query), reference, spectral.low_energy_fraction(s, epsilon)])
                profile_rows.extend([label, epsilon, p, center, value]
                                    for center, value in lowenergy.dos_proxy_profile(s, query))
    if proxy_rows:
        run.write_csv("dos_proxy.csv", ["instance", "epsilon", "p", "e0", "eta", "omega_bar", "proxy",
                                        "semicircle_proxy", "low_energy_fraction"], proxy_rows)
        run.write_csv("dos_proxy_profile.csv", ["instance", "epsilon", "p", "center", "contribution"], profile_rows)
    run.write_json("summary.json", summary)


def _universality_moments(config: ExperimentConfig) -> List[Any]:
    return universality.moment_comparison_experiment(
        _require(config.n, "n"), _first(config.p_grid, "p_grid"), _require(config.m_grid or None, "m_grid"),
        config.trials, config.seed, config.threads, _param(config, "target_standard_error"))


def _universality_resolvent(config: ExperimentConfig) -> List[Any]:
    return universality.resolvent_comparison_experiment(
        _require(config.n, "n"), _first(config.p_grid, "p_grid"), _first(config.eta_grid, "eta_grid"),
        config.omega_grid or [0.0], _require(config.m_grid or None, "m_grid"), config.trials, config.seed,
        config.threads, _param(config, "target_standard_error"))


def _universality_tail(config: ExperimentConfig) -> List[Any]:
    m_values = config.m_grid or [None]
    epsilon = _require(config.epsilon, "epsilon")
    return [universality.norm_tail_experiment(_require(config.n, "n"), epsilon, config.trials, config.seed, m,
                                              config.threads) for m in m_values]


def _universality_telescope(config: ExperimentConfig) -> List[Any]:
    return universality.lindeberg_telescope_experiment(
        _require(config.n, "n"), _first(config.m_grid, "m_grid"), _first(config.p_grid, "p_grid"),
        config.trials, config.seed, config.threads)


def _universality_concentration(config: ExperimentConfig) -> List[Any]:
    return [universality.resolvent_concentration_experiment(
        _require(config.n, "n"), m, _first(config.p_grid, "p_grid"), _first(config.omega_grid, "omega_grid", 0.0),
        _first(config.eta_grid, "eta_grid"), config.trials, config.seed, int(_param(config, "q", 2)), config.threads)
        for m in _require(config.m_grid or None, "m_grid")]


def _universality_gue_closeness(config: ExperimentConfig) -> List[Any]:
    dims = _param(config, "N") or ([config.ensemble.N] if config.ensemble and config.ensemble.N else None)
    dims = _require(dims, "params.N")
    records = []
    for N in dims if isinstance(dims, list) else [dims]:
        for omega in config.omega_grid or [0.0]:
            for eta in _require(config.eta_grid or None, "eta_grid"):
                for p in config.p_grid or [2]:
                    records.append(universality.gue_resolvent_closeness(N, omega, eta, p, config.trials, config.seed,
                                                                        config.threads))
    return records


def _universality_matching(config: ExperimentConfig) -> List[Dict[str, Any]]:
    spec = _require(config.ensemble, "ensemble")
    if spec.seed is None:
        spec = spec.with_seed(config.seed)
    mode = _param(config, "mode", "exhaustive")
    trials = int(_param(config, "matching_trials", config.trials))
    return [{"variant": spec.variant.value, "k": k, "mode": mode,
             "deviation": universality.moment_matching_check(spec, k, mode, trials)}
            for k in _param(config, "k", [1, 2, 3])]


_UNIVERSALITY_KINDS = {
    "moments": _universality_moments,
    "resolvent": _universality_resolvent,
    "tail": _universality_tail,
    "telescope": _universality_telescope,
    "concentration": _universality_concentration,
    "gue_closeness": _universality_gue_closeness,
    "matching": _universality_matching,
}


def cmd_universality(config: ExperimentConfig, run: RunWriter) -> None:
    kind = _param(config, "kind", "moments")
    if kind not in _UNIVERSALITY_KINDS:
        raise ConfigError(f"Unknown universality kind {kind!r}; choose from {sorted(_UNIVERSALITY_KINDS)}")
    records = _UNIVERSALITY_KINDS[kind](config)
    if kind == "matching":
        run.write_csv(f"{kind}.csv", ["variant", "k", "mode", "deviation"],
                      [[r["variant"], r["k"], r["mode"], r["deviation"]] for r in records])
    else:
        run.write_records(f"{kind}.csv", records)
    if kind in ("moments", "resolvent") and config.n is not None:
        p = _first(config.p_grid, "p_grid")
        eta = config.eta_grid[0] if config.eta_grid else 1.0
        bounds = {}
        for m in config.m_grid:
            inputs = universality.pauli_bound_inputs(config.n, m, p, eta=eta)
            bounds[str(m)] = {name: universality.evaluate_bounds(inputs, name)
                              for name in ("moment_universality", "moment_universality_simplified",
                                           "resolvent_universality", "pauli_moments", "pauli_resolvent")}
        run.write_json("bounds.json", bounds)


def _qpe_model(config: ExperimentConfig, index: int, epsilon: float, m: Optional[int]) -> QPEModel:
    repeats = _param(config, "repeats")
    if repeats is None:
        repeats = lowenergy.amplification_repeats(epsilon, m) if m else 1
    return QPEModel(resolution=_param(config, "resolution", 0.0), repeats=repeats,
                    kernel=_param(config, "kernel", "gaussian"),
                    allowance_factor=_param(config, "allowance_factor", 1.0),
                    seed=derive_seed(config.seed, STREAM_QPE, index))


def cmd_qpe(config: ExperimentConfig, run: RunWriter) -> None:
    instances = load_instances(config)
    spectra = _spectra(config, instances)
    epsilons = list(config.epsilon_grid) or [_require(config.epsilon, "epsilon or epsilon_grid")]
    shots = int(_param(config, "shots", 1000))
    results = []
    for index, ((label, h, spec), s) in enumerate(zip(instances, spectra)):
        instance_hash = content_hash(b"".join(instance_files(h, label, spec).values()))
        per_instance = []
        for epsilon in epsilons:
            m = h.m if isinstance(h, SparsePauliSum) else (spec.m if spec else None)
            model = _qpe_model(config, index, epsilon, m)
            result = _with_context(label, lambda: lowenergy.qpe_success_experiment(
                s, epsilon, model, shots, instance_hash, config.threads))
            per_instance.append(result)
        run.write_json(f"{label}-qpe.json", [r.model_dump(mode="json") for r in per_instance])
        results.extend(per_instance)
    run.write_records("qpe.csv", results)


def cmd_witness(config: ExperimentConfig, run: RunWriter) -> None:
    instances = load_instances(config)
    epsilon = _require(config.epsilon, "epsilon")
    witness_config = WitnessConfig(**_param(config, "witness", {}))
    with_baseline = _param(config, "baseline", False)
    rows = []
    for index, (label, h, _) in enumerate(instances):
        result = _with_context(label, lambda: lowenergy.chebyshev_witness(h, epsilon, witness_config))
        payload = result.model_dump(mode="json")
        baseline_energy = None
        if with_baseline and isinstance(h, SparsePauliSum):
            baseline = lowenergy.product_state_baseline(h, restarts=int(_param(config, "restarts", 8)),
                                                        seed=derive_seed(config.seed, STREAM_RESTART, index))
            payload["baseline"] = baseline.model_dump(mode="json")
            baseline_energy = baseline.energy
        run.write_json(f"{label}-witness.json", payload)
        rows.append([label, epsilon, result.spec.degree, result.spec.beta, result.energy, result.lambda_min,
                     result.ratio, result.gibbs_ratio, result.success, result.trace_error,
                     result.min_state_eigenvalue, baseline_energy,
                     None if baseline_energy is None else baseline_energy / result.lambda_min])
    run.write_csv("witness.csv", ["instance", "epsilon", "degree", "beta", "energy", "lambda_min", "ratio",
                                  "gibbs_ratio", "success", "trace_error", "min_state_eigenvalue",
                                  "baseline_energy", "baseline_ratio"], rows)


def cmd_bound(config: ExperimentConfig, run: RunWriter) -> None:
    n = _require(config.n, "n")
    epsilons = list(config.epsilon_grid) or [_require(config.epsilon, "epsilon or epsilon_grid")]
    records = [lowenergy.circuit_lower_bound(epsilon, m, n)
               for epsilon in epsilons for m in _require(config.m_grid or None, "m_grid")]
    run.write_records("bound.csv", records)
    t_grid = _param(config, "t_grid", [])
    if t_grid:
        run.write_csv("bernstein.csv", ["t", "N", "m", "tail"],
                      [[t, 1 << n, m, lowenergy.bernstein_tail(t, 1 << n, m)] for t in t_grid for m in config.m_grid])
    if _param(config, "mean_check", False):
        rows = []
        for m in config.m_grid:
            estimate = lowenergy.mean_ground_energy_check(n, m, config.trials, config.seed, config.threads)
            rows.append([n, m, config.trials, estimate.mean, estimate.standard_error])
        run.write_csv("mean_ground_energy.csv", ["n", "m", "trials", "mean_lambda_min", "standard_error"], rows)


COMMANDS: Dict[str, Callable[[ExperimentConfig, RunWriter], None]] = {
    "sample": cmd_sample,
    "spectrum": cmd_spectrum,
    "pnorm": cmd_pnorm,
    "resolvent": cmd_resolvent,
    "dos": cmd_dos,
    "universality": cmd_universality,
    "qpe": cmd_qpe,
    "witness": cmd_witness,
    "bound": cmd_bound,
}


# --- Entry point ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spectral_lab",
                                     description="Spectral experiments on sparse random Hamiltonians")
    parser.add_argument("subcommand", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="Path to the experiment config JSON")
    parser.add_argument("--seed", type=int, help="Override the master seed")
    parser.add_argument("--out", help="Override the output root directory")
    parser.add_argument("--threads", type=int, help="Worker threads (results do not depend on it)")
    return parser


def run_command(subcommand: str, config: ExperimentConfig) -> str:
    """Run one subcommand and return the published run directory."""
    output_root = config.output_dir or get_settings().output_root
    with RunWriter(config, subcommand, output_root) as run:
        COMMANDS[subcommand](config, run)
    return run.final_dir


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=get_settings().log_level, format='%(asctime)s - %(levelname)s - %(message)s')
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config, seed=args.seed, out=args.out, threads=args.threads)
        run_dir = run_command(args.subcommand, config)
    except NumericError as e:
        logger.error(f"{args.subcommand} failed numerically: {e} (diagnostics: {e.diagnostics})")
        return EXIT_NUMERIC
    except ValidationError as e:
        logger.error(f"Invalid config {args.config}: {e}")
        return EXIT_CONFIG
    except (SpectralLabError, ValueError, OSError) as e:
        logger.error(f"{args.subcommand} failed: {e}")
        return EXIT_CONFIG

    print(run_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
