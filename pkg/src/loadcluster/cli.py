"""Command line entry point.

Stages, in pipeline order::

    synth       write a planted benchmark CSV
    decompose   normalize + R-PCA -> normalized.csv, low_rank.csv, sparse.csv
    features    -> features.csv, features_order.txt
    similarity  -> distances.csv, similarity.csv, heatmap.csv
    select      -> rank_list.csv
    sweep       -> sweep.csv
    assign      -> assignment.csv, cluster_profiles.csv
    pipeline    all of the above plus manifest.json

The single-stage commands read their inputs from the files an earlier stage
left in ``--out``, so running them in order reproduces the pipeline output.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver did not
converge.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import hashlib
import json
import logging
import sys
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

from loadcluster import __version__, bench, clustering, features, io, rpca, similarity, submodular
from loadcluster.errors import ConvergenceError, LoadClusterError

logger = logging.getLogger("loadcluster")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_CONVERGENCE = 0, 2, 3, 4

HINTS = {
    "ingest": "check the CSV layout: header 'timestamp,<area>,...', ISO-8601 times, one row per timestamp",
    "normalize": "drop or repair constant / non-finite areas",
    "decompose": "raise --max-iter or loosen --tol (the balanced schedule needs more iterations)",
    "features": "the data must contain at least two samples in each season; check --summer-months/--winter-months",
    "similarity": "areas with identical features make the kernel scale degenerate; pass --lambda explicitly",
    "select": "--k must lie in [1, N]",
    "sweep": "--k-range must lie within [2, N-1] and not exceed the rank list",
    "assign": "--k must not exceed the stored rank list; rerun 'select' with a larger --k",
    "config": "see --help",
}


class ConfigError(ValueError):
    pass


class StageError(Exception):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {cause}")


@contextlib.contextmanager
def stage(name):
    logger.info("stage %s", name)
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def parse_months(text: str) -> frozenset:
    try:
        months = frozenset(int(m) for m in text.split(",") if m.strip())
    except ValueError:
        raise ConfigError(f"bad month list {text!r}") from None
    if not months or not months <= frozenset(range(1, 13)):
        raise ConfigError(f"months must be in 1..12, got {text!r}")
    return months


def parse_k_range(text: str) -> tuple:
    try:
        if ".." in text:
            lo, hi = (int(x) for x in text.split(".."))
            ks = tuple(range(lo, hi + 1))
        else:
            ks = tuple(sorted({int(x) for x in text.split(",")}))
    except ValueError:
        raise ConfigError(f"bad K range {text!r}; use e.g. 2..8 or 2,3,5") from None
    if not ks:
        raise ConfigError(f"empty K range {text!r}")
    return ks


@dataclass
class PipelineConfig:
    input: str
    out: str
    summer_months: tuple = (6, 7, 8, 9)
    winter_months: tuple = (10, 11, 12, 1, 2, 3, 4, 5)
    mu: Optional[float] = None
    lam: Optional[float] = None
    k: Optional[int] = None
    k_range: Optional[tuple] = None  # default 2..min(8, N-1)
    tol: float = 1e-7
    max_iter: int = 1000
    rho_schedule: str = "geometric"
    dump_components: bool = False
    compare_kmeans: bool = False
    restarts: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.mu is not None and not self.mu > 0:
            raise ConfigError("--mu must be positive")
        if self.lam is not None and not self.lam > 0:
            raise ConfigError("--lambda must be positive")
        if self.k is not None and self.k < 1:
            raise ConfigError("--k must be positive")
        if self.restarts < 1:
            raise ConfigError("--restarts must be >= 1")
        try:
            self.season_config()
            self.solver_options()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def season_config(self) -> features.SeasonConfig:
        return features.SeasonConfig(frozenset(self.summer_months), frozenset(self.winter_months))

    def solver_options(self) -> rpca.SolverOptions:
        return rpca.SolverOptions(tol=self.tol, max_iter=self.max_iter,
                                  schedule=self.rho_schedule)

    def resolve_k_range(self, n: int) -> tuple:
        ks = self.k_range or tuple(range(2, min(8, n - 1) + 1))
        if not ks or min(ks) < 2 or max(ks) > n - 1:
            raise ConfigError(f"K range {ks} must lie within [2, {n - 1}] for {n} areas")
        return tuple(ks)

    def to_json(self) -> dict:
        d = dataclasses.asdict(self)
        d["summer_months"] = sorted(self.summer_months)
        d["winter_months"] = sorted(self.winter_months)
        d["k_range"] = list(self.k_range) if self.k_range else None
        return d


class Outputs:
    """Tracks files written by one invocation so they can be rolled back."""

    def __init__(self, root):
        self.root = Path(root)
        self.written = []

    def write(self, name: str, text: str) -> Path:
        path = self.root / name
        io.atomic_write_text(path, text)
        self.written.append(path)
        return path

    def rollback(self):
        for p in self.written:
            with contextlib.suppress(FileNotFoundError):
                p.unlink()
        self.written.clear()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# -- stage cache -----------------------------------------------------------

def _cache_key(data_hash: str, mu, opts: rpca.SolverOptions) -> str:
    payload = json.dumps({"data": data_hash, "mu": mu, "opts": dataclasses.asdict(opts)},
                         sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


def cached_decompose(values: np.ndarray, data_hash: str, mu, opts, out_dir) -> rpca.Decomposition:
    """R-PCA keyed by content hash of the normalized data and solver settings."""
    cache = Path(out_dir) / ".cache"
    path = cache / f"rpca-{_cache_key(data_hash, mu, opts)}.npz"
    if path.exists():
        with np.load(path) as f:
            diag = json.loads(str(f["diagnostics"]))
            logger.info("using cached decomposition %s", path.name)
            return rpca.Decomposition(f["low_rank"], f["sparse"], diag["mu"],
                                      diag["iterations"], diag["residual"])
    d = rpca.rpca_decompose(values, mu, opts)
    cache.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp.npz")
    np.savez(tmp, low_rank=d.low_rank, sparse=d.sparse,
             diagnostics=json.dumps(_jsonable(d.diagnostics())))
    tmp.replace(path)
    return d


def _jsonable(d: dict) -> dict:
    out = {}
    for k, v in d.items():
        if isinstance(v, (np.floating, np.integer, np.bool_)):
            v = v.item()
        out[k] = v
    return out


def _values_hash(m: io.LoadMatrix) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(m.values).tobytes())
    h.update(m.timestamps.astype(np.int64).tobytes())
    h.update("\x1f".join(m.area_ids).encode())
    return h.hexdigest()


# -- stage bodies shared by the pipeline and the single commands ------------

def _write_components(out: Outputs, nm: io.LoadMatrix, d: rpca.Decomposition):
    out.write("normalized.csv", io.matrix_csv(nm.timestamps, nm.values, nm.area_ids))
    out.write("low_rank.csv", io.matrix_csv(nm.timestamps, d.low_rank, nm.area_ids))
    out.write("sparse.csv", io.matrix_csv(nm.timestamps, d.sparse, nm.area_ids))


def _write_features(out: Outputs, z):
    out.write("features.csv", features.features_csv(z))
    out.write("features_order.txt", features.ordering_note())


def _write_similarity(out: Outputs, g: similarity.SimilarityGraph):
    out.write("distances.csv", similarity.square_csv(g.distances, g.area_ids))
    out.write("similarity.csv", similarity.square_csv(g.similarities, g.area_ids))
    out.write("heatmap.csv", similarity.heatmap_csv(g.similarities))


def _write_assignment(out: Outputs, nm_ts, nm_values, w, rank_list, k, area_ids):
    centers = rank_list.prefix(k)
    labels = clustering.assign(w, centers)
    out.write("assignment.csv", clustering.assignment_csv(labels, centers, area_ids))
    out.write("cluster_profiles.csv",
              clustering.cluster_profiles_csv(nm_ts, nm_values, labels, centers, area_ids))
    return labels


def _sweep(out: Outputs, w, z, rank_list, ks, compare_kmeans, seed, restarts):
    result = clustering.sweep_k(w, z, rank_list, ks)
    km = clustering.kmeans_curve(z, ks, seed=seed, restarts=restarts) if compare_kmeans else None
    out.write("sweep.csv", clustering.sweep_csv(result, km))
    return result, km


# -- pipeline -----------------------------------------------------------------

def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every stage and write all artifacts plus ``manifest.json``.

    Returns the manifest. Files written before a failure are removed.
    """
    out = Outputs(cfg.out)
    try:
        return _run_pipeline(cfg, out)
    except BaseException:
        out.rollback()
        raise


def _run_pipeline(cfg: PipelineConfig, out: Outputs) -> dict:
    with stage("ingest"):
        raw = io.load_profiles(cfg.input)
        data_hash = sha256_file(cfg.input)
    with stage("normalize"):
        nm = io.normalize(raw)
    t, n = nm.shape
    with stage("config"):
        ks = cfg.resolve_k_range(n)
        k_select = max(max(ks), cfg.k or 0)
        if k_select > n:
            raise ConfigError(f"--k {cfg.k} exceeds the number of areas ({n})")
    mu = cfg.mu if cfg.mu is not None else rpca.compute_mu(t, n)
    with stage("decompose"):
        d = cached_decompose(nm.values, _values_hash(nm), mu, cfg.solver_options(), cfg.out)
        if cfg.dump_components:
            _write_components(out, nm, d)
    with stage("features"):
        z = features.feature_matrix(d.low_rank, d.sparse, nm.timestamps, nm.area_ids,
                                    cfg.season_config())
        _write_features(out, z)
    with stage("similarity"):
        g = similarity.build_graph(z, cfg.lam)
        _write_similarity(out, g)
    with stage("select"):
        rl = submodular.lazy_greedy_select(g.similarities, k_select)
        out.write("rank_list.csv", submodular.rank_list_csv(rl, nm.area_ids))
    with stage("sweep"):
        result, km = _sweep(out, g.similarities, z, rl, ks, cfg.compare_kmeans, cfg.seed,
                            cfg.restarts)
    final_k = cfg.k or result.best_k
    with stage("assign"):
        _write_assignment(out, nm.timestamps, nm.values, g.similarities, rl, final_k,
                          nm.area_ids)

    manifest = {
        "tool": "loadcluster",
        "version": __version__,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config": cfg.to_json(),
        "input": {"path": str(cfg.input), "sha256": data_hash, "rows": t, "areas": n,
                  "filled_cells": raw.summary.filled_cells if raw.summary else 0},
        "mu": float(mu),
        "lambda": g.lam,
        "rpca": _jsonable(d.diagnostics()),
        "selection": {"length": len(rl), "evaluations": rl.evaluations,
                      "passes": result.selection_passes},
        "k_range": list(ks),
        "recommended_k": result.best_k,
        "final_k": final_k,
        "outputs": {p.name: sha256_file(p) for p in out.written},
    }
    out.write("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def config_from_manifest(path, out: Optional[str] = None) -> PipelineConfig:
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    c = dict(manifest["config"])
    c["summer_months"] = tuple(c["summer_months"])
    c["winter_months"] = tuple(c["winter_months"])
    c["k_range"] = tuple(c["k_range"]) if c["k_range"] else None
    if out is not None:
        c["out"] = out
    cfg = PipelineConfig(**c)
    if sha256_file(cfg.input) != manifest["input"]["sha256"]:
        raise io.ValidationError(f"input {cfg.input} changed since the manifest was written")
    return cfg


# -- single-stage commands --------------------------------------------------

def _need(path: Path, producer: str) -> Path:
    if not path.exists():
        raise ConfigError(f"{path} not found; run '{producer}' first")
    return path


def _load_stage_matrix(out_dir: Path, name: str, producer: str) -> io.LoadMatrix:
    return io.load_profiles(_need(out_dir / name, producer))


def cmd_decompose(args, out: Outputs):
    cfg = _config_from_args(args, need_input=True)
    with stage("ingest"):
        raw = io.load_profiles(cfg.input)
    with stage("normalize"):
        nm = io.normalize(raw)
    mu = cfg.mu if cfg.mu is not None else rpca.compute_mu(*nm.shape)
    with stage("decompose"):
        d = cached_decompose(nm.values, _values_hash(nm), mu, cfg.solver_options(), cfg.out)
        _write_components(out, nm, d)
        out.write("decomposition.json",
                  json.dumps(_jsonable(d.diagnostics()), indent=2, sort_keys=True) + "\n")


def cmd_features(args, out: Outputs):
    cfg = _config_from_args(args)
    root = Path(cfg.out)
    with stage("features"):
        low = _load_stage_matrix(root, "low_rank.csv", "decompose")
        sp = _load_stage_matrix(root, "sparse.csv", "decompose")
        z = features.feature_matrix(low.values, sp.values, low.timestamps, low.area_ids,
                                    cfg.season_config())
        _write_features(out, z)


def cmd_similarity(args, out: Outputs):
    cfg = _config_from_args(args)
    with stage("similarity"):
        z = features.read_features_csv(_need(Path(cfg.out) / "features.csv", "features"))
        _write_similarity(out, similarity.build_graph(z, cfg.lam))


def _load_similarity(root: Path):
    return similarity.read_square_csv(_need(root / "similarity.csv", "similarity"))


def cmd_select(args, out: Outputs):
    cfg = _config_from_args(args)
    root = Path(cfg.out)
    with stage("select"):
        w, ids = _load_similarity(root)
        k = cfg.k or len(ids)
        rl = submodular.lazy_greedy_select(w, k)
        out.write("rank_list.csv", submodular.rank_list_csv(rl, ids))


def cmd_sweep(args, out: Outputs):
    cfg = _config_from_args(args)
    root = Path(cfg.out)
    with stage("sweep"):
        w, ids = _load_similarity(root)
        z = features.read_features_csv(_need(root / "features.csv", "features"))
        rl = submodular.read_rank_list_csv(_need(root / "rank_list.csv", "select"), ids)
        ks = cfg.resolve_k_range(len(ids))
        result, _ = _sweep(out, w, z, rl, ks, cfg.compare_kmeans, cfg.seed, cfg.restarts)
    print(f"recommended K = {result.best_k}")


def cmd_assign(args, out: Outputs):
    cfg = _config_from_args(args)
    root = Path(cfg.out)
    if cfg.k is None:
        raise ConfigError("assign needs --k")
    with stage("assign"):
        w, ids = _load_similarity(root)
        rl = submodular.read_rank_list_csv(_need(root / "rank_list.csv", "select"), ids)
        nm = _load_stage_matrix(root, "normalized.csv", "decompose")
        _write_assignment(out, nm.timestamps, nm.values, w, rl, cfg.k, ids)


def cmd_pipeline(args, out: Outputs):
    if args.replay:
        cfg = config_from_manifest(args.replay, args.out)
    else:
        cfg = _config_from_args(args, need_input=True)
    manifest = run_pipeline(cfg)
    print(f"recommended K = {manifest['recommended_k']}; outputs in {cfg.out}")


def cmd_synth(args, out: Outputs):
    try:
        spec = bench.SyntheticSpec(
            n_patterns=args.patterns, areas_per_pattern=args.areas_per_pattern, t=args.hours,
            noise_sigma=args.noise, spike_fraction=args.spike_fraction,
            spike_amplitude=args.spike_amplitude, seed=args.seed,
        )
        lm, labels = bench.generate(spec)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out.write("loads.csv", io.matrix_csv(lm.timestamps, lm.values, lm.area_ids))
    lines = ["area_id,pattern"] + [f"{a},{bench.ARCHETYPES[p]}" for a, p in zip(lm.area_ids, labels)]
    out.write("planted_labels.csv", "\n".join(lines) + "\n")


def _config_from_args(args, need_input=False) -> PipelineConfig:
    inp = getattr(args, "input", None)
    if need_input and not inp:
        raise ConfigError("--input is required")
    return PipelineConfig(
        input=inp or "",
        out=args.out,
        summer_months=tuple(sorted(getattr(args, "summer_months", None) or (6, 7, 8, 9))),
        winter_months=tuple(sorted(getattr(args, "winter_months", None)
                                   or (10, 11, 12, 1, 2, 3, 4, 5))),
        mu=getattr(args, "mu", None),
        lam=getattr(args, "lam", None),
        k=getattr(args, "k", None),
        k_range=getattr(args, "k_range", None),
        tol=getattr(args, "tol", 1e-7),
        max_iter=getattr(args, "max_iter", 1000),
        rho_schedule=getattr(args, "rho_schedule", "geometric"),
        dump_components=getattr(args, "dump_components", False),
        compare_kmeans=getattr(args, "compare_kmeans", False),
        restarts=getattr(args, "restarts", 10),
        seed=getattr(args, "seed", 0),
    )


# -- argument parsing ---------------------------------------------------------

def _months_arg(text):
    try:
        return parse_months(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _k_range_arg(text):
    try:
        return parse_k_range(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="loadcluster", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", required=True, help="output directory")

    def solver(sp):
        sp.add_argument("--input", help="wide CSV: timestamp,<area>,...")
        sp.add_argument("--mu", type=float, help="sparse weight (default 1/sqrt(max(T, N)))")
        sp.add_argument("--tol", type=float, default=1e-7)
        sp.add_argument("--max-iter", type=int, default=1000)
        sp.add_argument("--rho-schedule", choices=rpca.SCHEDULES, default="geometric",
                        help="penalty schedule; 'balanced' is slower but solves to optimality")

    def seasons(sp):
        sp.add_argument("--summer-months", type=_months_arg, default=None)
        sp.add_argument("--winter-months", type=_months_arg, default=None)

    def kmeans(sp):
        sp.add_argument("--compare-kmeans", action="store_true")
        sp.add_argument("--restarts", type=int, default=10)
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("decompose", help="normalize and split into low-rank + sparse")
    common(sp), solver(sp)
    sp.set_defaults(func=cmd_decompose)

    sp = sub.add_parser("features", help="16 seasonal features per area")
    common(sp), seasons(sp)
    sp.set_defaults(func=cmd_features)

    sp = sub.add_parser("similarity", help="distance and kernel matrices")
    common(sp)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.set_defaults(func=cmd_similarity)

    sp = sub.add_parser("select", help="rank cluster centers")
    common(sp)
    sp.add_argument("--k", type=int, help="rank list length (default: all areas)")
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("sweep", help="Calinski-Harabasz over a K range")
    common(sp), kmeans(sp)
    sp.add_argument("--k-range", type=_k_range_arg)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("assign", help="assign areas to the first K centers")
    common(sp)
    sp.add_argument("--k", type=int, required=True)
    sp.set_defaults(func=cmd_assign)

    sp = sub.add_parser("pipeline", help="run every stage")
    common(sp), solver(sp), seasons(sp), kmeans(sp)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--k", type=int, help="final cluster count (default: best CH)")
    sp.add_argument("--k-range", type=_k_range_arg)
    sp.add_argument("--dump-components", action="store_true")
    sp.add_argument("--replay", metavar="MANIFEST", help="rerun with the config stored in a manifest")
    sp.set_defaults(func=cmd_pipeline)

    sp = sub.add_parser("synth", help="write a synthetic benchmark CSV")
    common(sp)
    sp.add_argument("--patterns", type=int, default=4)
    sp.add_argument("--areas-per-pattern", type=int, default=8)
    sp.add_argument("--hours", type=int, default=8760)
    sp.add_argument("--noise", type=float, default=0.02)
    sp.add_argument("--spike-fraction", type=float, default=0.005)
    sp.add_argument("--spike-amplitude", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth)
    return p


def _exit_code(exc) -> int:
    if isinstance(exc, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(exc, LoadClusterError):
        return EXIT_DATA
    if isinstance(exc, (ValueError, FileNotFoundError)):
        return EXIT_CONFIG
    return 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    out = Outputs(args.out)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            args.func(args, out)
    except StageError as exc:
        out.rollback()
        code = _exit_code(exc.cause)
        print(f"error in stage '{exc.stage}': {exc.cause}", file=sys.stderr)
        print(f"hint: {HINTS.get(exc.stage, 'see --help')}", file=sys.stderr)
        return code
    except (LoadClusterError, ValueError, FileNotFoundError) as exc:
        out.rollback()
        print(f"error: {exc}", file=sys.stderr)
        return _exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
