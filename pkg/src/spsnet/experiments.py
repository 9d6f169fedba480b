"""Seeded batch experiments: coverage Monte Carlo, volume-traffic curves,
TAS-versus-MF success rates.

Every runner is a pure function of its configuration: topology, data, signs
and tie-breaks all come from named substreams of the config seed, rows are
emitted in sorted order, and the CSV/JSON writers stamp each record with a
hash of the configuration so outputs can be replayed and diffed byte for
byte.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema
import numpy as np

from .analysis import traffic_mf_tree, traffic_tas_tree
from .diffusion import (
    payload_sizes,
    run_consensus,
    run_mf,
    run_mf_tree,
    run_pf,
    run_tas,
    run_tas_tree,
)
from .model import FieldConfig, NoiseSpec, generate_measurements
from .rng import derive_seed, substream
from .sps import (
    AggregateSums,
    RegionResult,
    SignMatrix,
    batch_aggregate,
    draw_sign_matrix,
    evaluate_region,
    local_aggregate,
    ls_estimate,
    membership,
    truncated_aggregate,
    z_values,
)
from .topology import (
    Graph,
    clustered,
    complete_binary_tree,
    diameter,
    random_geometric,
    spanning_tree,
)

TOOL_VERSION = "0.1.0"

_DEFAULTS = {
    "trials": 100,
    "node": 0,
    "all_nodes": False,
    "output_dir": ".",
    "topology": {"kind": "rgg", "n_nodes": 20, "depth": 3, "n_clusters": 4, "radius": None},
    "model": {
        "n_p": 2,
        "p_true": None,
        "n_x": 2,
        "regressor_family": "polynomial-basis",
        "regressor_seed": 0,
        "noise": {"kind": "gaussian", "scale": 0.1},
    },
    "sps": {"m": 10, "q": 1},
    "diffusion": {"protocol": "full", "rounds": None, "iterations": 4, "scheme": "metropolis"},
    "region": {"box": None, "grid_per_dim": 12, "tie_seed": None, "evaluate": False},
    "tradeoff": {
        "n_seeds": 50,
        "node_sample": None,
        "rounds": None,
        "max_iterations": 512,
        "volume_tolerance": 0.02,
    },
    "success_rate": {
        "n_nodes": [10, 25, 50, 100, 200, 350, 500],
        "n_p": [2, 3, 4, 5],
        "realizations": 100,
    },
}


def load_schema() -> dict:
    text = resources.files("spsnet").joinpath("data/experiment_config.schema.json").read_text()
    return json.loads(text)


def validate_config(raw: dict) -> None:
    """Raise jsonschema.ValidationError when the config does not fit the schema."""
    jsonschema.validate(raw, load_schema(), cls=jsonschema.Draft202012Validator)


def _merge(defaults, given):
    if not isinstance(defaults, dict):
        return defaults if given is None else given
    out = {}
    given = given or {}
    for key, dval in defaults.items():
        out[key] = _merge(dval, given.get(key))
    for key, gval in given.items():
        if key not in out:
            out[key] = gval
    return out


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class ExperimentConfig:
    """Validated experiment configuration with defaults applied on access."""

    def __init__(self, raw: dict):
        validate_config(raw)
        if "seed" not in raw:
            raise ValueError("config must set a seed")
        self.raw = copy.deepcopy(raw)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls(json.load(fh))

    @property
    def config_hash(self) -> str:
        # where the outputs land does not affect what the experiment computes
        material = {k: v for k, v in self.raw.items() if k != "output_dir"}
        return hashlib.sha256(_canonical_json(material).encode()).hexdigest()[:12]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def trials(self) -> int:
        return int(self.raw.get("trials", _DEFAULTS["trials"]))

    @property
    def node(self) -> int:
        return int(self.raw.get("node", _DEFAULTS["node"]))

    @property
    def all_nodes(self) -> bool:
        return bool(self.raw.get("all_nodes", _DEFAULTS["all_nodes"]))

    @property
    def output_dir(self) -> str:
        return self.raw.get("output_dir", _DEFAULTS["output_dir"])

    def topology(self) -> dict:
        return _merge(_DEFAULTS["topology"], self.raw.get("topology"))

    def model(self) -> dict:
        cfg = _merge(_DEFAULTS["model"], self.raw.get("model"))
        if cfg["p_true"] is None:
            cfg["p_true"] = [(-0.5) ** k for k in range(cfg["n_p"])]
        return cfg

    def field_config(self) -> FieldConfig:
        cfg = self.model()
        return FieldConfig(
            n_p=cfg["n_p"],
            p_true=np.asarray(cfg["p_true"], dtype=float),
            n_x=cfg["n_x"],
            regressor_family=cfg["regressor_family"],
            noise=NoiseSpec(kind=cfg["noise"]["kind"], scale=cfg["noise"]["scale"]),
            regressor_seed=cfg["regressor_seed"],
        )

    def sps_params(self) -> tuple[int, int]:
        cfg = _merge(_DEFAULTS["sps"], self.raw.get("sps"))
        return int(cfg["m"]), int(cfg["q"])

    def diffusion(self) -> dict:
        return _merge(_DEFAULTS["diffusion"], self.raw.get("diffusion"))

    def region_params(self, center=None) -> dict:
        cfg = _merge(_DEFAULTS["region"], self.raw.get("region"))
        if cfg["box"] is None and center is not None:
            cfg["box"] = [[float(c) - 1.0, float(c) + 1.0] for c in np.atleast_1d(center)]
        return cfg

    def tradeoff_params(self) -> dict:
        return _merge(_DEFAULTS["tradeoff"], self.raw.get("tradeoff"))

    def success_rate_params(self) -> dict:
        return _merge(_DEFAULTS["success_rate"], self.raw.get("success_rate"))


@dataclass(eq=False)
class ExperimentRecord:
    """Tabular result of one experiment plus its summary statistics."""

    name: str
    columns: list[str]
    rows: list[tuple]
    summary: dict
    config_hash: str

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# name={self.name} config_hash={self.config_hash} tool_version={TOOL_VERSION}\n")
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow(list(row))

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "config_hash": self.config_hash,
            "tool_version": TOOL_VERSION,
            "columns": list(self.columns),
            "rows": [list(r) for r in self.rows],
            "summary": self.summary,
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def wilson_interval(successes: int, trials: int, z: float = 3.0) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion (default 3-sigma)."""
    if trials < 1:
        raise ValueError("trials must be positive")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = z * np.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return float(max(0.0, center - half)), float(min(1.0, center + half))


# ---------------------------------------------------------------------------
# topology construction from config


@dataclass(eq=False)
class TopologyBundle:
    kind: str
    graph: Graph
    tree: object | None
    clusters: object | None
    positions: np.ndarray


def build_topology(seed: int, tcfg: dict) -> TopologyBundle:
    """Instantiate the configured topology from named substreams of ``seed``.

    Geometric kinds carry their own node positions; the synthetic kinds
    (complete, binary, clustered) get uniform positions so the measurement
    model is always well defined.
    """
    kind = tcfg["kind"]
    n = int(tcfg["n_nodes"])
    if kind == "rgg":
        g = random_geometric(n, substream(seed, "topology"), radius=tcfg.get("radius"))
        return TopologyBundle(kind, g, None, None, g.positions)
    if kind == "tree":
        g = random_geometric(n, substream(seed, "topology"), radius=tcfg.get("radius"))
        tree = spanning_tree(g)
        return TopologyBundle(kind, tree.graph(), tree, None, g.positions)
    positions = substream(seed, "positions").uniform(0.0, 1.0, size=(n, 2))
    if kind == "complete":
        adj = ~np.eye(n, dtype=bool)
        return TopologyBundle(kind, Graph(adjacency=adj, positions=positions), None, None, positions)
    if kind == "binary":
        tree = complete_binary_tree(int(tcfg["depth"]))
        if tree.n_nodes != n and "n_nodes" in tcfg:
            n = tree.n_nodes
            positions = substream(seed, "positions").uniform(0.0, 1.0, size=(n, 2))
        return TopologyBundle(kind, tree.graph(), tree, None, positions)
    if kind == "clustered":
        topo = clustered(n, int(tcfg["n_clusters"]), substream(seed, "topology"))
        return TopologyBundle(kind, topo.graph(), None, topo, positions)
    raise ValueError(f"unknown topology kind {kind!r}")


# ---------------------------------------------------------------------------
# coverage Monte Carlo


def _trial_state(protocol, graph, samples, signs, diff, nodes):
    """One trial's per-node (weights, aggregate) plus run metadata."""
    n = graph.n_nodes
    if protocol == "full":
        agg = batch_aggregate(samples, signs)
        ones = np.ones(n)
        return {k: (ones, agg) for k in nodes}, 0, None
    if protocol == "local":
        out = {}
        for k in nodes:
            c = np.zeros(n)
            c[k] = 1.0
            out[k] = (c, local_aggregate(samples[k], signs.column(k)))
        return out, 0, None
    if protocol == "pf":
        res = run_pf(graph, samples, max_rounds=diff["rounds"])
        out = {}
        for k in nodes:
            c = res.known[k].astype(float)
            out[k] = (c, truncated_aggregate(samples, signs, c))
        return out, res.rounds_run, res.traffic
    if protocol == "mf":
        res = run_mf(graph, samples, max_rounds=diff["rounds"])
        out = {}
        for k in nodes:
            c = res.known[k].astype(float)
            out[k] = (c, truncated_aggregate(samples, signs, c))
        return out, res.rounds_run, res.traffic
    if protocol == "tas":
        res = run_tas(graph, samples, signs, rounds=diff["rounds"], wrapup_nodes=nodes)
        out = {k: (res.weights[k], res.aggregates[k]) for k in nodes}
        return out, res.rounds_run, res.traffic
    if protocol == "consensus":
        res = run_consensus(graph, samples, signs, iterations=diff["iterations"], scheme=diff["scheme"])
        eff = res.effective_weights()
        out = {k: (np.clip(eff[k], 0.0, 1.0), res.state(k)) for k in nodes}
        return out, res.iterations, res.traffic
    raise ValueError(f"unknown protocol {protocol!r}")


def run_coverage(config: ExperimentConfig) -> ExperimentRecord:
    """Monte Carlo estimate of the confidence region's coverage of p_true.

    Each trial redraws noise and signs (topology and regressors stay fixed),
    runs the configured diffusion, and tests membership of the true parameter
    at the designated node (all nodes with ``all_nodes``). Region volumes are
    evaluated per row only when the region section asks for it.
    """
    seed = config.seed
    bundle = build_topology(seed, config.topology())
    graph = bundle.graph
    n = graph.n_nodes
    fc = config.field_config()
    m, q = config.sps_params()
    diff = config.diffusion()
    protocol = diff["protocol"]
    nodes = list(range(n)) if config.all_nodes else [config.node]
    if any(not 0 <= k < n for k in nodes):
        raise ValueError("designated node is out of range")
    region = config.region_params(fc.p_true)

    rows = []
    covers_by_node = {k: 0 for k in nodes}
    for trial in range(config.trials):
        samples = generate_measurements(bundle.positions, fc, substream(seed, "noise", trial))
        signs = draw_sign_matrix(m, n, derive_seed(seed, "signs", trial))
        state, rounds_done, traffic = _trial_state(protocol, graph, samples, signs, diff, nodes)
        per_node = traffic.per_node_totals if traffic is not None else np.zeros(n, dtype=np.int64)
        for k in nodes:
            c, agg = state[k]
            covers = membership(z_values(agg, fc.p_true), q, substream(seed, "ties", trial, k))
            covers_by_node[k] += covers
            if region["evaluate"]:
                res = evaluate_region(
                    agg, region["box"], region["grid_per_dim"], q,
                    tie_seed=derive_seed(seed, "region-ties", trial, k),
                )
                volume = float(res.volume)
            else:
                volume = ""
            rows.append((
                trial, k, int(rounds_done), int(per_node[k]), volume, int(covers),
                float(np.min(c)), float(np.mean(c)), float(np.max(c)),
            ))

    trials = config.trials
    rates = {k: covers_by_node[k] / trials for k in nodes}
    designated = config.node if config.node in rates else nodes[0]
    lo, hi = wilson_interval(covers_by_node[designated], trials)
    summary = {
        "protocol": protocol,
        "trials": trials,
        "node": designated,
        "coverage": rates[designated],
        "expected": 1.0 - q / m,
        "wilson_low": lo,
        "wilson_high": hi,
    }
    if config.all_nodes:
        summary["coverage_min"] = float(min(rates.values()))
        summary["coverage_max"] = float(max(rates.values()))
    return ExperimentRecord(
        name="coverage",
        columns=["trial", "node", "rounds_done", "scalars_sent", "volume", "covers_truth",
                 "c_min", "c_mean", "c_max"],
        rows=rows,
        summary=summary,
        config_hash=config.config_hash,
    )


# ---------------------------------------------------------------------------
# volume-versus-traffic trade-off


def _consensus_checkpoints(limit: int) -> list[int]:
    """Dense early, geometric later; always includes 4 and the limit."""
    ts = set(range(1, min(16, limit) + 1))
    t = 16
    while t < limit:
        t = min(limit, max(t + 1, int(t * 1.3)))
        ts.add(t)
    return sorted(ts)


def _region_volume(agg, region, q, tie_seed) -> float:
    res = evaluate_region(agg, region["box"], region["grid_per_dim"], q, tie_seed=tie_seed)
    return float(res.volume)


def run_tradeoff(config: ExperimentConfig) -> ExperimentRecord:
    """Average region volume against average per-node traffic, per round.

    For every seed: one data draw on a fresh random geometric network, then
    MF, TAS and both consensus schemes run with snapshots, and the region
    volume of every sampled node's current aggregate is measured after each
    round (wrap-up applied for TAS, knowledge-truncated aggregate for MF, raw
    state for consensus). Rows are (protocol, round, avg scalars per node,
    avg volume) averaged over seeds and sampled nodes; the summary locates
    the consensus iteration bracket whose mean volume first matches full
    diffusion and the per-node scalars this costs.
    """
    seed = config.seed
    tcfg = config.topology()
    n = int(tcfg["n_nodes"])
    fc = config.field_config()
    if fc.n_p > 3:
        raise ValueError("trade-off study evaluates regions; n_p must be at most 3")
    m, q = config.sps_params()
    region = config.region_params(fc.p_true)
    pars = config.tradeoff_params()
    n_seeds = int(pars["n_seeds"])
    d_rec, d_agg = payload_sizes(fc.n_p, m)
    checkpoints = _consensus_checkpoints(int(pars["max_iterations"]))

    curves: dict[str, list[list[tuple[int, float, float]]]] = {
        "mf": [], "tas": [], "consensus-metropolis": [], "consensus-perron": [],
    }
    full_volumes = []

    for s in range(n_seeds):
        graph = random_geometric(n, substream(seed, "topology", s), radius=tcfg.get("radius"))
        samples = generate_measurements(graph.positions, fc, substream(seed, "noise", s))
        signs = draw_sign_matrix(m, n, derive_seed(seed, "signs", s))
        if pars["node_sample"] is None:
            sample_nodes = list(range(n))
        else:
            pick = substream(seed, "node-sample", s).choice(n, size=min(int(pars["node_sample"]), n), replace=False)
            sample_nodes = sorted(int(v) for v in pick)

        full_agg = batch_aggregate(samples, signs)
        full_volumes.append(_region_volume(full_agg, region, q, derive_seed(seed, "rt", s, "full")))

        # modified flooding: knowledge snapshot after every round
        mf = run_mf(graph, samples, snapshot_rounds=range(0, n + 2))
        curve = []
        for r in range(0, mf.rounds_run + 1):
            known = mf.snapshots[r]
            vols = []
            for k in sample_nodes:
                agg = truncated_aggregate(samples, signs, known[k].astype(float))
                vols.append(_region_volume(agg, region, q, derive_seed(seed, "rt", s, "mf", r, k)))
            scal = mf.traffic.total_through_round(r) / n
            curve.append((r, float(scal), float(np.mean(vols))))
        curves["mf"].append(curve)

        # tagged aggregate sums: wrap-up snapshot after every round
        rounds_tas = pars["rounds"] if pars["rounds"] is not None else diameter(graph) + 2
        tas = run_tas(
            graph, samples, signs, rounds=rounds_tas,
            snapshot_rounds=range(0, rounds_tas + 1), wrapup_nodes=sample_nodes,
        )
        curve = []
        for r in range(0, rounds_tas + 1):
            _, aggs = tas.snapshots[r]
            vols = [
                _region_volume(aggs[k], region, q, derive_seed(seed, "rt", s, "tas", r, k))
                for k in sample_nodes
            ]
            scal = tas.traffic.total_through_round(r) / n
            curve.append((r, float(scal), float(np.mean(vols))))
        curves["tas"].append(curve)

        # consensus, both mixing schemes, checkpointed iterations
        for scheme in ("metropolis", "perron"):
            res = run_consensus(
                graph, samples, signs, iterations=checkpoints[-1],
                scheme=scheme, snapshot_iters=checkpoints,
            )
            curve = []
            for t in checkpoints:
                vols = [
                    _region_volume(res.state(k, t), region, q, derive_seed(seed, "rt", s, scheme, t, k))
                    for k in sample_nodes
                ]
                curve.append((t, float(t * d_agg), float(np.mean(vols))))
            curves[f"consensus-{scheme}"].append(curve)

    # average the per-seed curves; step-extend the shorter flooding curves
    rows = []
    full_avg = float(np.mean(full_volumes))
    rows.append(("full", 0, 0.0, full_avg))
    averaged: dict[str, list[tuple[int, float, float]]] = {}
    for protocol, seed_curves in curves.items():
        if protocol.startswith("consensus"):
            pts = []
            for i, t in enumerate(checkpoints):
                scal = seed_curves[0][i][1]
                vol = float(np.mean([c[i][2] for c in seed_curves]))
                pts.append((t, scal, vol))
        else:
            max_r = max(len(c) - 1 for c in seed_curves)
            pts = []
            for r in range(0, max_r + 1):
                entries = [c[min(r, len(c) - 1)] for c in seed_curves]
                pts.append((r, float(np.mean([e[1] for e in entries])),
                            float(np.mean([e[2] for e in entries]))))
        averaged[protocol] = pts
        for r, scal, vol in pts:
            rows.append((protocol, r, scal, vol))

    tol = float(pars["volume_tolerance"])
    summary = {
        "n_seeds": n_seeds,
        "d_record": d_rec,
        "d_aggregate": d_agg,
        "full_avg_volume": full_avg,
    }
    for protocol in ("mf", "tas"):
        _, scal, vol = averaged[protocol][-1]
        summary[protocol] = {
            "final_avg_scalars_per_node": scal,
            "final_avg_volume": vol,
        }
    for scheme in ("metropolis", "perron"):
        pts = averaged[f"consensus-{scheme}"]
        at4 = next((vol for t, _, vol in pts if t == 4), None)
        entry = {"avg_volume_at_4": at4, "final_avg_volume": pts[-1][2]}
        # iterations the consensus needs to first reach each flooding
        # protocol's achieved mean volume; (lo, hi] brackets the matching
        # point, so (lo + 1) * d_agg is a per-node scalar lower bound
        for protocol in ("mf", "tas"):
            threshold = summary[protocol]["final_avg_volume"] * (1.0 + tol)
            hi = None
            lo = 0
            for t, _, vol in pts:
                if vol <= threshold:
                    hi = t
                    break
                lo = t
            entry[f"matched_vs_{protocol}"] = {
                "threshold_volume": float(threshold),
                "lo": lo,
                "hi": hi,
                "scalars_per_node_lower_bound": float((lo + 1) * d_agg) if hi is not None else None,
            }
        summary[f"consensus-{scheme}"] = entry
    return ExperimentRecord(
        name="tradeoff",
        columns=["protocol", "round", "avg_scalars_per_node", "avg_volume"],
        rows=rows,
        summary=summary,
        config_hash=config.config_hash,
    )


# ---------------------------------------------------------------------------
# TAS-versus-MF success rate on random trees


def run_success_rate(config: ExperimentConfig) -> ExperimentRecord:
    """Fraction of random-tree realizations on which TAS moves fewer scalars.

    Trees are breadth-first spanning trees of connected random geometric
    deployments. Per realization the two scheduled simulators run once and
    their totals are checked against the census formulas exactly; the n_p
    sweep then evaluates the (verified) formulas on the same census, since
    only the payload sizes change with n_p.
    """
    seed = config.seed
    pars = config.success_rate_params()
    m, _ = config.sps_params()
    n_list = [int(v) for v in pars["n_nodes"]]
    np_list = [int(v) for v in pars["n_p"]]
    realizations = int(pars["realizations"])
    np_check = np_list[0]
    fc = FieldConfig(
        n_p=np_check,
        p_true=np.zeros(np_check),
        noise=NoiseSpec(kind="gaussian", scale=0.1),
    )

    rows = []
    rates: dict[tuple[int, int], float] = {}
    crosscheck_failures = 0
    for n_nodes in n_list:
        wins = {n_p: 0 for n_p in np_list}
        for r in range(realizations):
            g = random_geometric(n_nodes, substream(seed, "topology", n_nodes, r))
            tree = spanning_tree(g)
            lam = tree.level_counts
            bar = tree.childless_counts
            samples = generate_measurements(g.positions, fc, substream(seed, "noise", n_nodes, r))
            signs = draw_sign_matrix(m, n_nodes, derive_seed(seed, "signs", n_nodes, r))
            tas_sim = run_tas_tree(tree, samples, signs).traffic.total_scalars
            mf_sim = run_mf_tree(tree, samples).traffic.total_scalars
            if tas_sim != traffic_tas_tree(lam, bar, np_check, m):
                crosscheck_failures += 1
            if mf_sim != traffic_mf_tree(lam, bar, np_check, m):
                crosscheck_failures += 1
            for n_p in np_list:
                if traffic_tas_tree(lam, bar, n_p, m) < traffic_mf_tree(lam, bar, n_p, m):
                    wins[n_p] += 1
        for n_p in np_list:
            rate = wins[n_p] / realizations
            rates[(n_nodes, n_p)] = rate
            rows.append((n_nodes, n_p, realizations, wins[n_p], rate))

    inversions = {}
    for n_p in np_list:
        seq = [rates[(n_nodes, n_p)] for n_nodes in n_list]
        inversions[str(n_p)] = int(sum(1 for a, b in zip(seq, seq[1:]) if b < a))
    summary = {
        "m": m,
        "n_nodes": n_list,
        "n_p": np_list,
        "realizations": realizations,
        "crosscheck_failures": crosscheck_failures,
        "rates": {f"{n}:{p}": rates[(n, p)] for (n, p) in rates},
        "monotone_inversions": inversions,
    }
    return ExperimentRecord(
        name="success_rate",
        columns=["n_nodes", "n_p", "realizations", "tas_wins", "success_rate"],
        rows=rows,
        summary=summary,
        config_hash=config.config_hash,
    )


# ---------------------------------------------------------------------------
# one-shot region evaluation (library core of the `region` subcommand)


def run_region(config: ExperimentConfig) -> tuple[RegionResult, dict]:
    """Confidence region for one data set: explicit data block or simulation.

    With a ``data`` block the aggregate is built directly from the given
    regressors, measurements, and sign matrix (drawn from sps.m when only a
    sign seed is given). Otherwise one seeded trial of the configured
    diffusion supplies the designated node's aggregate. Without an explicit
    box the region is evaluated on a unit-halfwidth box around the
    least-squares estimate.
    """
    seed = config.seed
    m, q = config.sps_params()
    if "data" in config.raw:
        data = config.raw["data"]
        phi = np.asarray(data["phi"], dtype=float)
        y = np.asarray(data["y"], dtype=float)
        if phi.ndim != 2 or phi.shape[0] != y.shape[0]:
            raise ValueError("phi must be (N, n_p) with one measurement per row")
        if "signs" in data:
            signs = SignMatrix(np.asarray(data["signs"], dtype=int))
        else:
            signs = draw_sign_matrix(m, phi.shape[0], data.get("sign_seed", seed))
        vec = signs.entries.astype(float) @ (phi * y[:, None])
        mat = np.einsum("ji,ik,il->jkl", signs.entries.astype(float), phi, phi)
        agg = AggregateSums(vec, mat)
        m = signs.m
        meta = {"source": "data", "n_nodes": int(phi.shape[0])}
    else:
        fc = config.field_config()
        bundle = build_topology(seed, config.topology())
        samples = generate_measurements(bundle.positions, fc, substream(seed, "noise", 0))
        signs = draw_sign_matrix(m, bundle.graph.n_nodes, derive_seed(seed, "signs", 0))
        diff = config.diffusion()
        state, _, _ = _trial_state(diff["protocol"], bundle.graph, samples, signs, diff, [config.node])
        _, agg = state[config.node]
        meta = {"source": "simulation", "n_nodes": bundle.graph.n_nodes, "protocol": diff["protocol"]}
    region = config.region_params()
    box = region["box"]
    if box is None:
        center = ls_estimate(agg)
        box = [[float(c) - 1.0, float(c) + 1.0] for c in center]
    tie_seed = region["tie_seed"] if region["tie_seed"] is not None else derive_seed(seed, "region-ties")
    result = evaluate_region(agg, box, region["grid_per_dim"], q, tie_seed=tie_seed)
    meta.update({"m": int(m), "q": int(q), "volume": float(result.volume)})
    return result, meta
