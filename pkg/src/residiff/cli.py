"""Pipeline driver: gen, label, train, solve, eval.

One INI config file drives every stage; a single root seed is split per
stage and per item, so a fixed (config, seed) pair reproduces every
artifact byte for byte (wall-time fields excepted).

    residiff gen --config run.ini --out workdir
    residiff label --config run.ini --out workdir
    residiff train --config run.ini --out workdir
    residiff solve --config run.ini --out workdir --threads 4
    residiff eval --config run.ini --out workdir
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import nets, oracles
from .dataio import read_dataset, write_dataset
from .decoding import greedy_decode_mis, greedy_decode_tsp, sample_decode, two_opt
from .diffusion import SamplerConfig, sample_heatmap
from .instances import (
    MisInstance,
    Tour,
    TspInstance,
    degraded_solution,
    generate_er,
    generate_tsp,
    selection_size,
    solution_to_tour,
    tour_length,
)
from .metrics import EvalRecord, compute_gap, summarize, write_results, write_trial_trace
from .search import SearchConfig, multi_modal_search
from .training import GnnDenoiser, TrainConfig, train

STAGE_CODES = {"gen": 1, "label": 2, "train": 3, "solve": 4, "eval": 5}

TSP_METHODS = ("greedy", "greedy2opt", "sample", "search", "fi2opt")
MIS_METHODS = ("greedy", "sample", "greedy_baseline")


class ConfigError(ValueError):
    """Schema violation; the message starts with the section.key path."""


_REQUIRED = object()


def _choice(*options):
    def convert(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"expected one of {options}")
        return raw

    return convert


SCHEMA = {
    "common": {"seed": (int, 0)},
    "gen": {
        "problem": (_choice("tsp", "mis"), "tsp"),
        "count": (int, _REQUIRED),
        "n": (int, _REQUIRED),
        "k": (int, 16),
        "distribution": (_choice("uniform", "normal", "cluster"), "uniform"),
        "p": (float, 0.15),
        "out": (str, "instances.txt"),
    },
    "label": {
        "in": (str, "instances.txt"),
        "out": (str, "labeled.txt"),
    },
    "train": {
        "in": (str, "labeled.txt"),
        "lr": (float, 2e-3),
        "epochs": (int, 20),
        "batch_size": (int, 8),
        "momentum": (float, 0.9),
        "layers": (int, 4),
        "width": (int, 64),
        "out": (str, "model.bin"),
        "trace_out": (str, "loss_trace.csv"),
    },
    "solve": {
        "in": (str, "labeled.txt"),
        "model": (str, "model.bin"),
        "method": (_choice(*sorted(set(TSP_METHODS + MIS_METHODS))), "greedy"),
        "steps": (int, 1),
        "process": (_choice("decoupled", "residual_ddpm"), "decoupled"),
        "m": (int, 4),
        "subgraph_size": (int, 50),
        "omega": (int, 1),
        "q": (int, 2),
        "n_trials": (int, 50),
        "k": (int, 16),
        "out": (str, "solutions.txt"),
        "times_out": (str, "solve_times.csv"),
    },
    "eval": {
        "in": (str, "labeled.txt"),
        "solutions": (str, "solutions.txt"),
        "times": (str, "solve_times.csv"),
        "baseline": (
            _choice("labels", "held_karp", "fi2opt", "exact_mis", "greedy_baseline"),
            "labels",
        ),
        "csv_out": (str, "results.csv"),
        "json_out": (str, "results.json"),
    },
}


def load_config(path: str | None) -> dict:
    """Parse and validate the INI file against the schema.

    Returns {section: {key: typed value}} with defaults filled in;
    required keys stay as the sentinel until a command demands them.
    """
    parser = configparser.ConfigParser()
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        parser.read(path)
    cfg = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{section}: unknown section")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}: unknown key")
            convert = SCHEMA[section][key][0]
            try:
                cfg[section][key] = convert(raw)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}: {exc} (got {raw!r})") from None
    return cfg


def _require(cfg: dict, section: str, key: str):
    value = cfg[section][key]
    if value is _REQUIRED:
        raise ConfigError(f"{section}.{key}: required key missing")
    return value


def _item_seed(root: int, stage: str, i: int) -> int:
    return int(np.random.SeedSequence([root, STAGE_CODES[stage], i]).generate_state(1)[0])


def _item_rng(root: int, stage: str, i: int) -> np.random.Generator:
    return np.random.default_rng([root, STAGE_CODES[stage], i])


def _fingerprint(cfg: dict, command: str, seed: int) -> str:
    view = {"command": command, "seed": seed, "cfg": cfg.get(command, {})}
    blob = json.dumps(view, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _resolve(out_dir: str, name: str) -> str:
    return name if os.path.isabs(name) else os.path.join(out_dir, name)


def cmd_gen(cfg: dict, seed: int, out_dir: str) -> None:
    g = cfg["gen"]
    count, n = _require(cfg, "gen", "count"), _require(cfg, "gen", "n")
    items = []
    for i in range(count):
        s = _item_seed(seed, "gen", i)
        if g["problem"] == "tsp":
            inst = generate_tsp(n, g["distribution"], s, k=min(g["k"], n - 1))
        else:
            inst = generate_er(n, g["p"], s)
        items.append((inst, None))
    write_dataset(_resolve(out_dir, g["out"]), items)
    print(f"gen: wrote {count} instances to {g['out']}")


def cmd_label(cfg: dict, seed: int, out_dir: str) -> None:
    del seed
    items = read_dataset(_resolve(out_dir, cfg["label"]["in"]))
    labeled = []
    for inst, _ in items:
        if isinstance(inst, TspInstance):
            labeled.append((inst, oracles.label_tsp(inst)))
        else:
            labeled.append((inst, oracles.label_mis(inst)))
    write_dataset(_resolve(out_dir, cfg["label"]["out"]), labeled)
    print(f"label: wrote {len(labeled)} labeled instances to {cfg['label']['out']}")


def cmd_train(cfg: dict, seed: int, out_dir: str) -> None:
    t = cfg["train"]
    items = read_dataset(_resolve(out_dir, t["in"]))
    if any(label is None for _, label in items):
        raise ValueError(f"train input {t['in']} has unlabeled instances")
    triples = [
        (inst, label, degraded_solution(inst, seed=_item_seed(seed, "train", i)))
        for i, (inst, label) in enumerate(items)
    ]
    tc = TrainConfig(
        lr=t["lr"],
        epochs=t["epochs"],
        batch_size=t["batch_size"],
        momentum=t["momentum"],
        seed=_item_seed(seed, "train", len(items)),
    )
    params = nets.params_for(
        triples[0][0], L=t["layers"], W=t["width"], seed=tc.seed
    )
    params, trace = train(triples, tc, params=params)
    nets.save_params(_resolve(out_dir, t["out"]), params)
    with open(_resolve(out_dir, t["trace_out"]), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "loss"])
        for i, value in enumerate(trace):
            writer.writerow([i, repr(float(value))])
    print(
        f"train: {len(trace)} updates, final loss {trace[-1]:.4f}, "
        f"checkpoint {t['out']}"
    )


def _solve_one(method, inst, denoiser, scfg, search_cfg, m, rng):
    """Returns (solution ints, extra artifacts dict)."""
    if isinstance(inst, TspInstance):
        if method == "fi2opt":
            return two_opt(inst, oracles.farthest_insertion(inst)).order, {}
        if method == "search":
            tour, trace = multi_modal_search(inst, denoiser, search_cfg, rng)
            return tour.order, {"trace": trace}
        X_d = degraded_solution(inst, seed=0)
        if method == "sample":
            return sample_decode(denoiser, inst, X_d, scfg, m, rng).order, {}
        h = sample_heatmap(denoiser, inst, X_d, scfg, rng)
        tour = greedy_decode_tsp(inst, h)
        if method == "greedy2opt":
            tour = two_opt(inst, tour)
        return tour.order, {}
    if method == "greedy_baseline":
        return oracles.greedy_mis(inst), {}
    X_d = degraded_solution(inst, seed=int(rng.integers(2**31)))
    if method == "sample":
        return sample_decode(denoiser, inst, X_d, scfg, m, rng), {}
    h = sample_heatmap(denoiser, inst, X_d, scfg, rng)
    return greedy_decode_mis(inst, h), {}


def cmd_solve(cfg: dict, seed: int, out_dir: str, threads: int) -> None:
    s = cfg["solve"]
    items = read_dataset(_resolve(out_dir, s["in"]))
    if not items:
        raise ValueError(f"solve input {s['in']} is empty")
    problem = "tsp" if isinstance(items[0][0], TspInstance) else "mis"
    method = s["method"]
    allowed = TSP_METHODS if problem == "tsp" else MIS_METHODS
    if method not in allowed:
        raise ConfigError(f"solve.method: {method!r} not valid for {problem}")

    needs_model = method not in ("fi2opt", "greedy_baseline")
    denoiser = None
    if needs_model:
        model_path = _resolve(out_dir, s["model"])
        if not os.path.exists(model_path):
            raise FileNotFoundError(f"model checkpoint not found: {model_path}")
        denoiser = GnnDenoiser(nets.load_params(model_path))
    scfg = SamplerConfig(K=s["steps"], process=s["process"])
    search_cfg = SearchConfig(
        subgraph_size=s["subgraph_size"],
        omega=s["omega"],
        q=s["q"],
        n_trials=s["n_trials"],
        k=s["k"],
        sampler=scfg,
    )

    def run(i: int):
        inst = items[i][0]
        rng = _item_rng(seed, "solve", i)
        start = time.perf_counter()
        sol, extra = _solve_one(method, inst, denoiser, scfg, search_cfg, s["m"], rng)
        return sol, time.perf_counter() - start, extra

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(len(items))))
    else:
        results = [run(i) for i in range(len(items))]

    with open(_resolve(out_dir, s["out"]), "w") as f:
        f.write(f"solutions {problem} {method} {len(items)}\n")
        for sol, _, _ in results:
            f.write(" ".join(str(int(v)) for v in sol) + "\n")
    with open(_resolve(out_dir, s["times_out"]), "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["instance", "time_s"])
        for i, (_, dt, _) in enumerate(results):
            writer.writerow([i, repr(dt)])
    for i, (_, _, extra) in enumerate(results):
        if "trace" in extra:
            write_trial_trace(
                _resolve(out_dir, f"trial_trace_{i}.csv"), extra["trace"]
            )
    total = sum(dt for _, dt, _ in results)
    print(f"solve: {method} on {len(items)} instances in {total:.2f}s")


def read_solutions(path: str):
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise ValueError(f"solutions file {path} is empty")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "solutions":
        raise ValueError(f"solutions file {path} has a malformed header")
    problem, method, count = head[1], head[2], int(head[3])
    rows = [np.array([int(v) for v in ln.split()], dtype=np.int64)
            for ln in lines[1 : count + 1]]
    if len(rows) != count:
        raise ValueError(f"solutions file {path} truncated")
    return problem, method, rows


def _mis_cost(inst: MisInstance, nodes: np.ndarray) -> float:
    sel = np.zeros(inst.n, dtype=bool)
    sel[nodes] = True
    for u, v in inst.edges:
        if sel[u] and sel[v]:
            raise ValueError(f"solution selects adjacent nodes {u} and {v}")
    return float(nodes.shape[0])


def _baseline_cost(kind: str, inst, label) -> float:
    if kind == "labels":
        if label is None:
            raise ValueError("eval.baseline = labels but the dataset is unlabeled")
        if isinstance(inst, TspInstance):
            return tour_length(inst, solution_to_tour(inst, label))
        return float(selection_size(label))
    if kind == "held_karp":
        return oracles.held_karp(inst)[1]
    if kind == "fi2opt":
        return tour_length(inst, two_opt(inst, oracles.farthest_insertion(inst)))
    if kind == "exact_mis":
        return float(oracles.exact_mis(inst).shape[0])
    return float(oracles.greedy_mis(inst).shape[0])


def cmd_eval(cfg: dict, seed: int, out_dir: str, fingerprint: str) -> None:
    del seed
    e = cfg["eval"]
    items = read_dataset(_resolve(out_dir, e["in"]))
    problem, method, rows = read_solutions(_resolve(out_dir, e["solutions"]))
    if len(rows) != len(items):
        raise ValueError(
            f"{len(rows)} solutions for {len(items)} instances; files disagree"
        )
    times = [0.0] * len(items)
    times_path = _resolve(out_dir, e["times"])
    if os.path.exists(times_path):
        with open(times_path, newline="") as f:
            for row in csv.DictReader(f):
                times[int(row["instance"])] = float(row["time_s"])

    sense = "min" if problem == "tsp" else "max"
    records = []
    for i, ((inst, label), sol) in enumerate(zip(items, rows)):
        if problem == "tsp":
            cost = tour_length(inst, Tour(sol))
        else:
            cost = _mis_cost(inst, sol)
        base = _baseline_cost(e["baseline"], inst, label)
        records.append(
            EvalRecord(
                instance=i,
                method=method,
                cost=cost,
                baseline=base,
                gap=compute_gap(cost, base, sense),
                time_s=times[i],
                fingerprint=fingerprint,
            )
        )
    write_results(
        _resolve(out_dir, e["csv_out"]), _resolve(out_dir, e["json_out"]), records
    )
    for name, row in summarize(records).items():
        print(
            f"eval: method={name} count={row['count']} "
            f"mean_cost={row['mean_cost']:.4f} mean_gap={row['mean_gap']:.4%} "
            f"total_time_s={row['total_time_s']:.2f}"
        )


def run_pipeline(
    command: str,
    config: str | None = None,
    seed: int | None = None,
    out: str = ".",
    threads: int = 1,
) -> int:
    """Run one stage; returns a process exit status (0 = success)."""
    try:
        cfg = load_config(config)
        root_seed = cfg["common"]["seed"] if seed is None else seed
        os.makedirs(out, exist_ok=True)
        if command == "gen":
            cmd_gen(cfg, root_seed, out)
        elif command == "label":
            cmd_label(cfg, root_seed, out)
        elif command == "train":
            cmd_train(cfg, root_seed, out)
        elif command == "solve":
            cmd_solve(cfg, root_seed, out, threads)
        elif command == "eval":
            cmd_eval(cfg, root_seed, out, _fingerprint(cfg, "eval", root_seed))
        else:
            print(f"unknown command {command!r}", file=sys.stderr)
            return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="residiff",
        description="Residual-diffusion pipeline for TSP and MIS.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGE_CODES:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="INI config file")
        p.add_argument("--seed", type=int, default=None, help="root seed override")
        p.add_argument("--out", default=".", help="artifact directory")
        p.add_argument("--threads", type=int, default=1, help="solver worker count")
    args = parser.parse_args(argv)
    sys.exit(
        run_pipeline(
            args.command,
            config=args.config,
            seed=args.seed,
            out=args.out,
            threads=args.threads,
        )
    )
