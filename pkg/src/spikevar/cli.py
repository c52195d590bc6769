"""Command-line front end: seeded, config-driven experiment runs with CSV output.

    spikevar <command> --config FILE [--seed N] [--out DIR] [--jobs K]

Commands: neuron-trace, boundary-map, evolve, perturb, reram.  The config is
one JSON file holding a master seed, an output directory, and one block per
command (see README for the schema).  Every emitted file starts with comment
lines recording the tool version, the config hash, the effective seed and
the command, and all randomness is derived from the seed, so outputs are
byte-identical across reruns and across --jobs settings.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cartpole import EpisodeConfig, balance_task_config
from .errors import ConfigError, SpikevarError, UndefinedMetricError
from .evolution import EvoConfig, MutationRates, evolve
from .network import NetworkGraph
from .neuron import NeuronParams, SpikeTrain, simulate_sde
from .rng import derive_seed
from .reram import (
    QuantizationScheme,
    ResistanceLevelTable,
    quantize_network,
    variability_ramp,
    weight_value_distribution,
)
from .robustness import (
    default_magnitudes,
    half_fitness_magnitude,
    robustness_curve,
    welch_t_test,
)
from .weightspace import (
    ProbeBattery,
    enumerate_hyperplanes,
    map_behavior_boundaries,
)

FULL_FITNESS = 15_000


# -- config plumbing -----------------------------------------------------------


class _Ctx:
    def __init__(self, config: dict, config_hash: str, seed: int, out: Path,
                 jobs: int, command: str):
        self.config = config
        self.config_hash = config_hash
        self.seed = seed
        self.out = out
        self.jobs = jobs
        self.command = command

    def meta_lines(self) -> list[str]:
        return [
            f"# spikevar {__version__}",
            f"# command {self.command}",
            f"# config_sha256 {self.config_hash}",
            f"# seed {self.seed}",
        ]


def _load_config(path: str) -> tuple[dict, str]:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    raw = p.read_bytes()
    try:
        config = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"config {path}: not valid JSON ({exc})") from exc
    if not isinstance(config, dict):
        raise ConfigError(f"config {path}: top level must be a JSON object")
    return config, hashlib.sha256(raw).hexdigest()


def _block(config: dict, name: str) -> dict:
    if name not in config:
        raise ConfigError(f"config is missing the {name!r} block")
    block = config[name]
    if not isinstance(block, dict):
        raise ConfigError(f"{name}: must be a JSON object")
    return block


def _get(block: dict, path: str, key: str, kind, default=None, required=False):
    if key not in block:
        if required:
            raise ConfigError(f"{path}.{key}: required field is missing")
        return default
    value = block[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(
            f"{path}.{key}: expected {getattr(kind, '__name__', kind)}, "
            f"got {type(value).__name__}")
    return value


def _episode_config(block: dict, path: str) -> EpisodeConfig:
    """Episode block shared by evolve/perturb/reram; defaults to the
    deterministic fixed-tilt balancing task."""
    base = balance_task_config()
    return EpisodeConfig(
        sub_cycles=_get(block, path, "sub_cycles", int, base.sub_cycles),
        jitter=_get(block, path, "jitter", float, base.jitter),
        initial_theta=_get(block, path, "initial_theta_rad", float,
                           base.initial_theta),
        max_cycles=_get(block, path, "max_cycles", int, base.max_cycles),
    )


# -- CSV output ----------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(ctx: _Ctx, name: str, columns: list[str], rows) -> Path:
    path = ctx.out / name
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in ctx.meta_lines():
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


# -- commands -------------------------------------------------------------------


def cmd_neuron_trace(ctx: _Ctx) -> None:
    block = _block(ctx.config, "neuron_trace")
    params = NeuronParams(
        threshold=_get(block, "neuron_trace", "threshold_mv", float, required=True),
        leak=_get(block, "neuron_trace", "leak_per_ms", float, 0.0),
        noise_sigma=_get(block, "neuron_trace", "noise_sigma", float, 0.0),
    )
    weights = _get(block, "neuron_trace", "weights_mv", list, required=True)
    train = SpikeTrain(_get(block, "neuron_trace", "train_ms", list, required=True))
    dt = _get(block, "neuron_trace", "dt_ms", float, 0.1)
    horizon = _get(block, "neuron_trace", "horizon_ms", float, required=True)
    trace = simulate_sde(params, weights, train, dt, horizon,
                         seed=derive_seed(ctx.seed, 0x7A))
    spike_idx = np.searchsorted(trace.times, trace.spike_times, side="left")
    spiking = np.zeros(len(trace.times), dtype=np.int64)
    for k in spike_idx:
        spiking[min(k, len(spiking) - 1)] = 1
    rows = zip(trace.times, trace.voltages, spiking)
    out = _write_csv(ctx, "trace.csv", ["time", "voltage", "spike"], rows)
    print(f"wrote {out}")


def cmd_boundary_map(ctx: _Ctx) -> None:
    block = _block(ctx.config, "boundary_map")
    threshold = _get(block, "boundary_map", "threshold_mv", float, 50.0)
    params = NeuronParams(
        threshold=threshold,
        leak=_get(block, "boundary_map", "leak_per_ms", float, 0.0),
        noise_sigma=_get(block, "boundary_map", "noise_sigma", float, 0.0),
    )
    battery = ProbeBattery.generate(
        n_probes=_get(block, "boundary_map", "probes", int, 64),
        spikes_min=_get(block, "boundary_map", "spikes_min", int, 1),
        spikes_max=_get(block, "boundary_map", "spikes_max", int, 6),
        window=_get(block, "boundary_map", "window_ms", float, 200.0),
        seed=derive_seed(ctx.seed, 0xBA),
    )
    bmap = map_behavior_boundaries(
        params,
        grid_cells=_get(block, "boundary_map", "grid_cells", int, 100),
        battery=battery,
        seed=derive_seed(ctx.seed, 0x3A9),
        sde_dt=_get(block, "boundary_map", "sde_dt_ms", float, 0.5),
    )

    def rows():
        for i in range(len(bmap.axis)):
            for j in range(len(bmap.axis)):
                yield (bmap.axis[i], bmap.axis[j], bmap.signature_hex(i, j),
                       int(bmap.boundary[i, j]))

    out = _write_csv(ctx, "boundary_map.csv",
                     ["w1", "w2", "signature", "boundary"], rows())
    planes = enumerate_hyperplanes(2, battery.max_spike_count(), threshold)
    out2 = _write_csv(ctx, "hyperplanes.csv", ["f1", "f2", "threshold_mv"],
                      ((f[0], f[1], threshold) for f in planes))
    print(f"wrote {out} ({bmap.boundary_count()} boundary cells) and {out2}")


def _evo_config(block: dict, seed: int) -> EvoConfig:
    rates_block = _get(block, "evolve", "rates", dict, {})
    rates = MutationRates(**{
        k: _get(rates_block, "evolve.rates", k, float, getattr(MutationRates, k))
        for k in ("add_neuron", "remove_neuron", "add_synapse", "remove_synapse",
                  "perturb_weight", "perturb_delay", "crossover")
    })
    wr = _get(block, "evolve", "weight_range", list, [-2.0, 2.0])
    return EvoConfig(
        kind=_get(block, "evolve", "kind", str, required=True),
        population=_get(block, "evolve", "population", int, 100),
        generations=_get(block, "evolve", "generations", int, 60),
        tournament_size=_get(block, "evolve", "tournament_size", int, 4),
        rates=rates,
        weight_range=(float(wr[0]), float(wr[1])),
        max_delay=_get(block, "evolve", "max_delay", int, 4),
        max_hidden=_get(block, "evolve", "max_hidden", int, 12),
        t_cycles=_get(block, "evolve", "t_cycles", float, 50.0),
        sigma_a=_get(block, "evolve", "sigma_a", float, 0.60),
        episode=_episode_config(block, "evolve"),
        target_accepted=_get(block, "evolve", "target_accepted", int, None),
        seed=seed,
    )


def cmd_evolve(ctx: _Ctx) -> None:
    block = _block(ctx.config, "evolve")
    config = _evo_config(block, ctx.seed)
    result = evolve(config, jobs=ctx.jobs)
    net_dir = ctx.out / "networks"
    net_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for k, genome in enumerate(result.accepted):
        name = f"networks/net_{k:03d}.json"
        genome.graph.save(ctx.out / name)
        rows.append((name, config.kind, genome.median, config.trials))
    out = _write_csv(ctx, "manifest.csv",
                     ["file", "kind", "median_fitness", "trials"], rows)
    print(f"accepted {len(result.accepted)} network(s); {result.summary()}")
    print(f"wrote {out}")


def _load_networks(block: dict, path: str) -> list[tuple[str, NetworkGraph]]:
    files = _get(block, path, "networks", list, required=True)
    loaded = []
    for f in files:
        p = Path(f)
        if not p.is_file():
            raise ConfigError(f"{path}.networks: file not found: {f}")
        loaded.append((str(f), NetworkGraph.load(p)))
    return loaded


def cmd_perturb(ctx: _Ctx) -> None:
    block = _block(ctx.config, "perturb")
    networks = _load_networks(block, "perturb")
    episode = _episode_config(block, "perturb")
    magnitudes = default_magnitudes(
        stop=_get(block, "perturb", "magnitude_max", float, 0.40),
        step=_get(block, "perturb", "magnitude_step", float, 0.02),
    )
    samples = _get(block, "perturb", "samples", int, 10)
    metric_rows = []
    metrics_by_kind: dict[str, list[float]] = {}
    for file_name, graph in networks:
        trials = 20 if graph.sigma_a > 0 else 1
        curve = robustness_curve(
            graph, episode, magnitudes, samples=samples, trials=trials,
            seed=derive_seed(ctx.seed, 0x9E, _stable_hash(file_name)),
            jobs=ctx.jobs)
        stem = Path(file_name).stem
        rows = []
        for mi, mag in enumerate(curve.magnitudes):
            for si in range(curve.n_samples):
                rows.append((mag, si, curve.fitness[mi, si], 0))
            rows.append((mag, -1, curve.medians[mi], 1))
        _write_csv(ctx, f"curve_{stem}.csv",
                   ["magnitude", "sample_index", "fitness", "is_median_row"], rows)
        try:
            point = half_fitness_magnitude(curve, FULL_FITNESS)
        except UndefinedMetricError as exc:
            print(f"warning: {file_name}: {exc}; skipped in half_fitness.csv",
                  file=sys.stderr)
            continue
        metric_rows.append((file_name, graph.kind, point.magnitude,
                            int(point.censored)))
        metrics_by_kind.setdefault(graph.kind, []).append(point.magnitude)
    out = _write_csv(ctx, "half_fitness.csv",
                     ["network_file", "kind", "half_fitness_magnitude", "censored"],
                     metric_rows)
    print(f"wrote {out}")
    compare = _get(block, "perturb", "compare", list,
                   [["noisy", "perfect"], ["perfect", "leaky"]])
    test_rows = []
    for pair in compare:
        ka, kb = pair
        a = metrics_by_kind.get(ka, [])
        b = metrics_by_kind.get(kb, [])
        if len(a) >= 2 and len(b) >= 2:
            res = welch_t_test(a, b)
            test_rows.append((ka, kb, len(a), len(b), res.t, res.dof, res.p_value))
            print(f"welch t-test {ka} vs {kb}: t={res.t:.4f} dof={res.dof:.2f} "
                  f"p={res.p_value:.6g}")
        else:
            print(f"welch t-test {ka} vs {kb}: skipped (need >= 2 networks per kind)")
    out = _write_csv(ctx, "t_test.csv",
                     ["kind_a", "kind_b", "n_a", "n_b", "t", "dof", "p_value"],
                     test_rows)
    print(f"wrote {out}")


def _stable_hash(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big")


def cmd_reram(ctx: _Ctx) -> None:
    block = _block(ctx.config, "reram")
    table_csv = _get(block, "reram", "table_csv", str, None)
    table = (ResistanceLevelTable.from_csv(table_csv) if table_csv
             else ResistanceLevelTable.default())
    draws = _get(block, "reram", "draws_per_level", int, 1000)
    rows = []
    summary = []
    for k in range(-(table.n - 1), table.n):
        dist = weight_value_distribution(
            k, table, 1.0, draws, seed=derive_seed(ctx.seed, 0x4E4A))
        summary.append((k, dist.mean, dist.sd))
        for di, v in enumerate(dist.values):
            rows.append((k, di, v))
    out = _write_csv(ctx, "weight_draws.csv",
                     ["level", "draw_index", "weight"], rows)
    out2 = _write_csv(ctx, "weight_level_summary.csv",
                      ["level", "mean", "sd"], summary)
    print(f"wrote {out} and {out2}")

    network = _get(block, "reram", "network", str, None)
    if network is None:
        return
    p = Path(network)
    if not p.is_file():
        raise ConfigError(f"reram.network: file not found: {network}")
    graph = NetworkGraph.load(p)
    scheme = QuantizationScheme.for_graph(
        graph, scale=_get(block, "reram", "scale", float, 1.0))
    quantized = quantize_network(graph, scheme)
    episode = _episode_config(block, "reram")
    lam_steps = _get(block, "reram", "lambda_steps", int, 11)
    trials = 20 if graph.sigma_a > 0 else 1
    ramp = variability_ramp(
        quantized, scheme, table,
        variability_grid=np.linspace(0.0, 1.0, lam_steps),
        samples=_get(block, "reram", "samples_per_lambda", int, 100),
        config=episode, trials=trials,
        seed=derive_seed(ctx.seed, 0xDA), jobs=ctx.jobs)
    rows = []
    for li, lam in enumerate(ramp.variability):
        for si in range(ramp.fitness.shape[1]):
            rows.append((lam, si, ramp.fitness[li, si]))
    out = _write_csv(ctx, "ramp.csv", ["lambda", "sample_index", "fitness"], rows)
    print(f"wrote {out}")


COMMANDS = {
    "neuron-trace": cmd_neuron_trace,
    "boundary-map": cmd_boundary_map,
    "evolve": cmd_evolve,
    "perturb": cmd_perturb,
    "reram": cmd_reram,
}


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikevar",
        description="Spiking-neuron variability experiments (seeded, CSV output).",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config master seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("--jobs", type=int, default=None,
                        help="parallel worker count (default from config, else 1)")
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config, config_hash = _load_config(args.config)
        seed = args.seed if args.seed is not None else config.get("seed")
        if seed is None:
            raise ConfigError("config needs a 'seed' (or pass --seed); "
                              "wall-clock seeding is not supported")
        if not isinstance(seed, int) or isinstance(seed, bool):
            raise ConfigError("seed: expected int")
        out = Path(args.out if args.out is not None else config.get("out", "out"))
        jobs = args.jobs if args.jobs is not None else config.get("jobs", 1)
        if not isinstance(jobs, int) or jobs < 1:
            raise ConfigError("jobs: expected a positive int")
        ctx = _Ctx(config, config_hash, seed, out, jobs, args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        COMMANDS[args.command](ctx)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SpikevarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
