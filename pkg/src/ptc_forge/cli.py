"""Command-line interface: ``ptc-forge <command> ...``.

Exit status: 0 success, 2 usage or configuration error, 3 infeasible
constraints, 4 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .cost import Constraints, cost_report
from .errors import IllegalGene, InfeasibleConstraints, InvalidArgument, InvalidPdk, MissingPdkEntry, PtcError
from .evolution import ALL_OPS
from .pdk import load_pdk, pdk_from_dict, tomllib
from .proxy import ProxyConfig, accuracy_score, calibrate_weights
from .search import SearchConfig, SearchResult, run_search
from .topology import (
    BASELINE_STYLES,
    Gene,
    decode,
    gene_from_json,
    gene_from_text,
    gene_to_dict,
    make_baseline,
)

log = logging.getLogger("ptc_forge")

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_INTERNAL = 0, 2, 3, 4
SWEEP_AXES = ("pop_size", "iters", "p_mu0", "scheduler", "operator-ablation")
SEED_ENV = "PTC_FORGE_SEED"


class ConfigError(PtcError):
    pass


# -- file helpers -----------------------------------------------------------

def load_mapping(path: str | Path) -> dict:
    """Read a TOML or JSON object from ``path``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    text = path.read_text()
    try:
        data = json.loads(text) if path.suffix.lower() == ".json" else tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    return data


def load_gene(path: str | Path) -> Gene:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"gene file not found: {path}")
    text = path.read_text().strip()
    if text.startswith("{"):
        return gene_from_json(text)
    return gene_from_text(text)


def dumps(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def resolve_seed(seed: int | None) -> int:
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return 0 if seed is None else seed


def load_constraints(path: str | None) -> Constraints | None:
    if path is None:
        return None
    try:
        return Constraints.from_dict(load_mapping(path))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"constraints: {exc}") from None


# -- search -----------------------------------------------------------------

def build_search_config(args, **overrides) -> SearchConfig:
    base: dict = {}
    if getattr(args, "config", None):
        base = load_mapping(args.config)
    flag_map = {
        "k": "k", "pop": "pop_size", "iters": "max_iters", "p_mu0": "p_mu0",
        "p_co": "p_co", "phase2": "phase2_iters", "jobs": "jobs",
    }
    for flag, name in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            base[name] = value
    constraints = load_constraints(getattr(args, "constraints", None))
    if constraints is not None:
        base["constraints"] = constraints.to_dict()
    base["seed"] = resolve_seed(getattr(args, "seed", None))
    base.update(overrides)
    try:
        return SearchConfig.from_dict(base)
    except TypeError as exc:
        raise ConfigError(f"search config: {exc}") from None


def front_payload(result: SearchResult) -> list[dict]:
    return [ind.to_dict() for ind in result.front]


def history_text(result: SearchResult) -> str:
    return "".join(json.dumps(row, sort_keys=True) + "\n" for row in result.history)


def _run_and_write(cfg: SearchConfig, pdk, out_dir: Path, out=None) -> SearchResult:
    out = out or sys.stdout
    t0 = time.perf_counter()
    result = run_search(cfg, pdk)
    elapsed = time.perf_counter() - t0
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {"front": out_dir / "front.json", "history": out_dir / "history.jsonl"}
    write_atomic(paths["front"], dumps(front_payload(result)))
    write_atomic(paths["history"], history_text(result))
    manifest = {
        "tool": "ptc-forge",
        "version": __version__,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "constraints": result.constraints.to_dict(),
        "pdk": pdk.to_dict(),
        "duration_s": round(elapsed, 3),
        "evaluations": result.n_evaluations,
        "outputs": {k: str(p) for k, p in paths.items()},
    }
    write_atomic(out_dir / "manifest.json", dumps(manifest))
    for i, ind in enumerate(result.front):
        print(ind.cost.table_row(f"[{i}] score {ind.objectives[0]:.3f} B={ind.gene.active_blocks} "), file=out)
    print(f"{len(result.front)} front members, {result.n_evaluations} evaluations, {elapsed:.1f} s", file=out)
    return result


def cmd_search(args) -> int:
    if args.replay:
        manifest = load_mapping(args.replay)
        try:
            cfg = SearchConfig.from_dict(manifest["config"])
            pdk = pdk_from_dict(manifest["pdk"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"manifest: {exc!r}") from None
    else:
        cfg = build_search_config(args)
        pdk = load_pdk(args.pdk)
    _run_and_write(cfg, pdk, Path(args.out_dir))
    return EXIT_OK


# -- single-gene commands ---------------------------------------------------

def cmd_cost(args) -> int:
    gene = load_gene(args.gene)
    rep = cost_report(decode(gene), load_pdk(args.pdk))
    print(rep.table_row())
    if args.json:
        print(dumps(rep.to_dict()), end="")
    return EXIT_OK


def cmd_score(args) -> int:
    gene = load_gene(args.gene)
    cfg = ProxyConfig.from_dict(load_mapping(args.proxy)) if args.proxy else ProxyConfig()
    bundle = accuracy_score(decode(gene), rng=resolve_seed(args.seed), config=cfg)
    print(dumps(bundle.to_dict()), end="")
    return EXIT_OK


def cmd_baseline(args) -> int:
    gene = make_baseline(args.style, args.k)
    text = dumps(gene_to_dict(gene))
    if args.out:
        write_atomic(Path(args.out), text)
    else:
        print(text, end="")
    return EXIT_OK


# -- sweep ------------------------------------------------------------------

def _parse_values(axis: str, raw: str | None) -> list:
    if axis == "operator-ablation":
        values = raw.split(",") if raw else ["none", *ALL_OPS]
        bad = [v for v in values if v != "none" and v not in ALL_OPS]
        if bad:
            raise ConfigError(f"unknown operators {bad}")
        return values
    if axis == "scheduler":
        return raw.split(",") if raw else ["constant", "two-stage"]
    if not raw:
        raise ConfigError(f"--values is required for axis {axis}")
    cast = float if axis == "p_mu0" else int
    try:
        return [cast(v) for v in raw.split(",")]
    except ValueError:
        raise ConfigError(f"bad value list {raw!r} for {axis}") from None


def _sweep_override(axis: str, value, base: SearchConfig) -> dict:
    if axis == "pop_size":
        return {"pop_size": value}
    if axis == "iters":
        return {"max_iters": value, "phase2_iters": value // 4}
    if axis == "p_mu0":
        return {"p_mu0": value}
    if axis == "scheduler":
        return {"scheduler": value}
    return {"disabled_ops": [] if value == "none" else [value]}


SWEEP_FIELDS = ("axis", "value", "seed", "front_size", "p_avg", "best_score", "best_cd", "best_ee", "evaluations")


def cmd_sweep(args) -> int:
    if args.axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {args.axis!r}; choose from {SWEEP_AXES}")
    values = _parse_values(args.axis, args.values)
    base = build_search_config(args)
    pdk = load_pdk(args.pdk)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_FIELDS)
    for value in values:
        data = base.to_dict()
        data.update(_sweep_override(args.axis, value, base))
        cfg = SearchConfig.from_dict(data)
        result = run_search(cfg, pdk)
        last = result.history[-1]
        writer.writerow([args.axis, value, cfg.seed, len(result.front), repr(last["p_avg"]),
                         repr(last["best"]["score"]), repr(last["best"]["cd"]), repr(last["best"]["ee"]),
                         result.n_evaluations])
        log.info("sweep %s=%s done", args.axis, value)
    if args.out:
        write_atomic(Path(args.out), buf.getvalue())
    else:
        print(buf.getvalue(), end="")
    return EXIT_OK


# -- calibrate --------------------------------------------------------------

def cmd_calibrate(args) -> int:
    """Fit blend weights from a CSV of (zico, param, sparsity, accuracy) or (gene, accuracy) rows."""
    path = Path(args.data)
    if not path.is_file():
        raise ConfigError(f"data file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError("calibration data is empty")
    seed = resolve_seed(args.seed)
    subs, acc = [], []
    try:
        for row in rows:
            acc.append(float(row["accuracy"]))
            if "gene" in row:
                b = accuracy_score(decode(gene_from_text(row["gene"])), rng=seed)
                subs.append((b.s_zico, b.s_param, b.s_sparsity))
            else:
                subs.append((float(row["zico"]), float(row["param"]), float(row["sparsity"])))
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"calibration data: {exc!r}") from None
    weights, rho = calibrate_weights(subs, acc, steps=args.steps)
    print(dumps({"weights": weights.__dict__, "spearman": rho}), end="")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, help="matrix size K (default 16)")
    p.add_argument("--pdk", default="gf", help="preset name (gf, custom) or .toml/.json file")
    p.add_argument("--constraints", help="TOML/JSON file with area/power/latency [min, max]")
    p.add_argument("--config", help="TOML/JSON search config; flags override it")
    p.add_argument("--seed", type=int, help=f"RNG seed ({SEED_ENV} overrides)")
    p.add_argument("--jobs", type=int, help="parallel evaluation workers")
    p.add_argument("--pop", type=int, help="population size")
    p.add_argument("--iters", type=int, help="maximum iterations")
    p.add_argument("--p-mu0", dest="p_mu0", type=float, help="initial mutation rate")
    p.add_argument("--p-co", dest="p_co", type=float, help="crossover rate")
    p.add_argument("--phase2", type=int, help="iterations in the fine-tuning phase")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptc-forge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("search", help="run the evolutionary search")
    _search_flags(p)
    p.add_argument("--out-dir", default="runs", help="directory for front/history/manifest")
    p.add_argument("--replay", help="rerun exactly from a manifest.json")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("cost", help="area/power/latency/CD/EE of a gene")
    p.add_argument("gene", help="gene file (JSON or text form)")
    p.add_argument("--pdk", default="gf")
    p.add_argument("--json", action="store_true", help="also print the full report as JSON")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("score", help="zero-shot accuracy proxy of a gene")
    p.add_argument("gene")
    p.add_argument("--seed", type=int)
    p.add_argument("--proxy", help="TOML/JSON proxy config")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("baseline", help="emit a manual design as a gene file")
    p.add_argument("style", choices=BASELINE_STYLES)
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--out", help="output path (stdout when omitted)")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("sweep", help="one search per hyperparameter value, CSV out")
    p.add_argument("--axis", required=True, help=f"one of {', '.join(SWEEP_AXES)}")
    p.add_argument("--values", help="comma-separated grid")
    _search_flags(p)
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="fit proxy blend weights against accuracies")
    p.add_argument("data", help="CSV with accuracy plus zico,param,sparsity or gene columns")
    p.add_argument("--steps", type=int, default=21)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InfeasibleConstraints as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, InvalidArgument, InvalidPdk, MissingPdkEntry, IllegalGene, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
