"""Seeded experiment orchestration and CSV emission.

Usage: ergodic-lattice <capacity|gap|quantize|simulate|fig1|fig2>
           --config cfg.toml [--seed N] [--out results.csv]

Config files are TOML; every command's output is a pure function of the
config (including the master seed), so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                      # Python < 3.11
    import tomli as tomllib

from . import csir, csit, fading, lattice, waterfilling

EXIT_CONFIG = 2
EXIT_NUMERIC = 3

MAX_DESK_N = 64
MAX_DESK_Q = 1009


class ConfigError(ValueError):
    pass


def _load_config(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}") from exc


def _channel(cfg):
    table = cfg.get("channel")
    if not isinstance(table, dict):
        raise ConfigError("missing [channel] table")
    try:
        dist = fading.distribution_from_dict(table)
    except fading.FadingError as exc:
        raise ConfigError(str(exc)) from exc
    b = int(table.get("coherence_b", 1))
    dims = tuple(table.get("dims", (1, 1)))
    if len(dims) != 2:
        raise ConfigError("channel dims must be [M, N]")
    return fading.BlockFadingProcess(distribution=dist, b=b, dims=dims)


def _snr_grid(cfg, default=None):
    grid = cfg.get("sim", {}).get("snr_grid_db", cfg.get("snr_grid_db", default))
    if grid is None or len(grid) == 0:
        raise ConfigError("empty SNR grid")
    return [float(v) for v in grid]


def _master_seed(cfg, override):
    if override is not None:
        return int(override)
    return int(cfg.get("master_seed", 0))


def _trial_seed(master_seed, index):
    # counter-based fan-out; parallel execution order never changes results
    return np.random.SeedSequence((master_seed, index))


def _emit(rows, header, out_path):
    text = header + "\n" + "\n".join(rows) + ("\n" if rows else "")
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(v):
    return f"{v:.6f}"


def _mimo_draws(process, draws, seed):
    M, N = process.dims
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC0FFEE)))
    dist = process.distribution
    if isinstance(dist, fading.DiscreteFadingDistribution):
        return rng.choice(dist.support, size=(draws, N, M), p=dist.probs)
    return dist.sample_abs(rng, (draws, N, M))


# ---------------------------------------------------------------------------
# commands


def cmd_capacity(cfg, seed, out):
    process = _channel(cfg)
    grid = _snr_grid(cfg)
    scheme = cfg.get("scheme", "csit")
    draws = int(cfg.get("capacity", {}).get("draws", 100_000))
    dist = process.distribution
    rows = []
    M, N = process.dims
    siso_discrete = (M, N) == (1, 1) and isinstance(dist, fading.DiscreteFadingDistribution)
    h_samples = None if siso_discrete else _mimo_draws(process, draws, _master_seed(cfg, seed))
    for snr_db in grid:
        rho = 10.0 ** (snr_db / 10.0)
        if scheme == "csit" and siso_discrete:
            cap, err = waterfilling.ergodic_capacity_csit(dist, rho), 0.0
        elif siso_discrete:
            # CSIR white input: P* replaced by the full budget
            gains = dist.support ** 2
            cap = float(0.5 * dist.probs @ np.log2(1.0 + gains * rho))
            err = 0.0
        elif isinstance(dist, fading.RayleighFading) and (M, N) == (1, 1):
            cap, err = csir.rayleigh_capacity_csir(dist, rho), 0.0
        else:
            cap, err = waterfilling.mimo_capacity_white(h_samples, rho)
        rows.append(f"{_fmt(snr_db)},{_fmt(cap)},{_fmt(err)}")
    _emit(rows, "snr_db,capacity,stderr", out)


def cmd_gap(cfg, seed, out):
    process = _channel(cfg)
    M, N = process.dims
    dist = process.distribution
    if isinstance(dist, fading.DiscreteFadingDistribution):
        gap = csir.universality_gap(M, N, process.b, dist)
        rows = [f"{M},{N},{process.b},{_fmt(dist.entropy_rate())},"
                f"{_fmt(gap.gap_bits)},{_fmt(gap.cardinality_bound_bits)}"]
        _emit(rows, "M,N,b,entropy_bits,gap_bits,cardinality_bound_bits", out)
        return
    # continuous law: optimized quantizer gap per SNR point
    _fig2_body(cfg, out, process)


def cmd_quantize(cfg, seed, out):
    process = _channel(cfg)
    dist = process.distribution
    if not isinstance(dist, fading.RayleighFading):
        raise ConfigError("quantizer design needs a rayleigh channel")
    qcfg = cfg.get("quantizer", {})
    try:
        L = int(qcfg["levels"])
        q_L = float(qcfg["top_threshold"])
    except KeyError as exc:
        raise ConfigError(f"missing [quantizer] key {exc}") from exc
    design = csir.design_equalprob_quantizer(dist, L, q_L)
    rows = [f"{i},{_fmt(t)}" for i, t in enumerate(design.thresholds)]
    rows.append(f"tail_mass,{_fmt(design.tail_mass)}")
    _emit(rows, "level,threshold", out)


def cmd_fig1(cfg, seed, out):
    """White-input capacity and universal achievable rate, discrete MIMO law."""
    cfg = dict(cfg)
    cfg.setdefault("channel", {"type": "uniform_grid", "states": 1000,
                               "coherence_b": 20, "dims": [2, 2]})
    process = _channel(cfg)
    dist = process.distribution
    if not isinstance(dist, fading.DiscreteFadingDistribution):
        raise ConfigError("fig1 needs a discrete fading law")
    M, N = process.dims
    grid = _snr_grid(cfg, default=list(range(0, 45, 5)))
    draws = int(cfg.get("capacity", {}).get("draws", 100_000))
    gap = csir.universality_gap(M, N, process.b, dist).gap_bits
    h_samples = _mimo_draws(process, draws, _master_seed(cfg, seed))
    rows = []
    for snr_db in grid:
        rho = 10.0 ** (snr_db / 10.0)
        cap, _ = waterfilling.mimo_capacity_white(h_samples, rho)
        rows.append(f"{_fmt(snr_db)},{_fmt(cap)},{_fmt(cap - gap)}")
    _emit(rows, "snr_db,white_capacity,proposed_rate", out)


def _fig2_body(cfg, out, process=None):
    if process is None:
        cfg = dict(cfg)
        cfg.setdefault("channel", {"type": "rayleigh", "mean_square_gain": 1.0,
                                   "coherence_b": 20})
        process = _channel(cfg)
    dist = process.distribution
    if not isinstance(dist, fading.RayleighFading):
        raise ConfigError("fig2 needs a rayleigh fading law")
    grid = _snr_grid(cfg, default=list(range(0, 70, 10)))
    qcfg = cfg.get("quantizer", {})
    L_max = int(qcfg.get("levels_max", 256))
    qL_points = int(qcfg.get("top_threshold_points", 64))
    L_grid, qL_grid = csir.default_quantizer_grids(dist, L_max, qL_points)
    rows = []
    for snr_db in grid:
        rho = 10.0 ** (snr_db / 10.0)
        cap = csir.rayleigh_capacity_csir(dist, rho)
        opt = csir.optimize_quantizer(dist, rho, process.b, L_grid, qL_grid)
        g = opt.gap
        rows.append(",".join([_fmt(snr_db), _fmt(cap), _fmt(g.gap_bits),
                              _fmt(cap - g.gap_bits), str(opt.L), _fmt(opt.q_L),
                              _fmt(g.term_quant), _fmt(g.term_bins), _fmt(g.term_tail)]))
    _emit(rows, "snr_db,capacity,gap_bound,rate,L_star,qL_star,"
                "term_quant,term_bins,term_tail", out)


def cmd_fig2(cfg, seed, out):
    """Optimized quantizer gap and achievable rate under Rayleigh fading."""
    _fig2_body(cfg, out)


def cmd_simulate(cfg, seed, out):
    process = _channel(cfg)
    dist = process.distribution
    if not isinstance(dist, fading.DiscreteFadingDistribution):
        raise ConfigError("simulate needs a discrete fading law")
    lat = cfg.get("lattice", {})
    try:
        n = int(lat["n"])
        q = int(lat["q"])
    except KeyError as exc:
        raise ConfigError(f"missing [lattice] key {exc}") from exc
    if n > MAX_DESK_N or q > MAX_DESK_Q:
        raise ConfigError(f"lattice dims over desk budget (n <= {MAX_DESK_N}, q <= {MAX_DESK_Q})")
    sim = cfg.get("sim", {})
    trials = int(sim.get("trials", 0))
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    backoffs = [float(v) for v in sim.get("backoffs", [0.5])]
    workers = int(sim.get("workers", 1))
    channel_model = sim.get("channel_model", "random_location")
    master = _master_seed(cfg, seed)
    pair = lattice.build_nested_pair(n, q, g_or_seed=int(sim.get("generator_seed", 7)),
                                     target_power=1.0)

    rows = []
    summary = []
    for backoff in backoffs:
        rho = waterfilling.power_for_target_capacity(dist, pair.rate / backoff)
        tasks = [(pair, process, backoff, _trial_seed(master, i), rho, channel_model)
                 for i in range(trials)]
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_trial_task, tasks, chunksize=32))
        else:
            results = [_run_trial_task(t) for t in tasks]
        errors = 0
        for i, res in enumerate(results):
            errors += not res.decoded_ok
            rows.append(",".join([str(i), str(n), str(q), _fmt(pair.rate),
                                  _fmt(backoff), _fmt(10.0 * np.log10(res.rho)),
                                  str(int(res.decoded_ok)), _fmt(res.noise_metric)]))
        lo, hi = wilson_interval(errors, trials)
        summary.append(f"# backoff={_fmt(backoff)} error_rate={_fmt(errors / trials)} "
                       f"wilson95=[{_fmt(lo)},{_fmt(hi)}]")
    _emit(rows + summary, "seed,n,q,rate,backoff,snr_db,decoded_ok,noise_metric", out)


def _run_trial_task(task):
    pair, process, backoff, seed, rho, channel_model = task
    return csit.run_siso_trial(pair, process, backoff, seed, rho=rho,
                               channel_model=channel_model)


def wilson_interval(errors, trials, z=1.96):
    """95% Wilson score interval for an error rate."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    p = errors / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * np.sqrt(p * (1 - p) / trials + z * z / (4 * trials ** 2)) / denom
    return max(center - half, 0.0), min(center + half, 1.0)


COMMANDS = {
    "capacity": cmd_capacity,
    "gap": cmd_gap,
    "quantize": cmd_quantize,
    "simulate": cmd_simulate,
    "fig1": cmd_fig1,
    "fig2": cmd_fig2,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="ergodic-lattice",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=False, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config) if args.config else {}
        out = args.out or cfg.get("output_path")
        COMMANDS[args.command](cfg, args.seed, out)
    except (ConfigError, fading.FadingError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (csir.CsirError, csit.SchemeError, lattice.LatticeError,
            waterfilling.PowerAllocationError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
