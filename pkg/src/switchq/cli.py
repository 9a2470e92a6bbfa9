"""Command-line front end.

    switchq <command> --config FILE [--out DIR] [--format csv|json] [--seed N]

Commands: steady, transient, fpt, diffusion, simulate, compare. The config
is a YAML document with the sections ``model`` (queue rates), ``diffusion``
(limit-process parameters), ``grids``, ``fpt``, ``sim`` and ``output``; see
README.md for the full schema.

Exit status is 0 on success, 1 for invalid input and 2 when a quantity is
undefined in the given regime.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import fpt_discrete, simulator, steady_state, transient
from .diffusion import compare as dcompare
from .diffusion import one_way, steady as dsteady
from .errors import RegimeError, SpecError, SwitchqError
from .model import DiffusionSpec, QueueSpec, classify

COMMANDS = ("steady", "transient", "fpt", "diffusion", "simulate", "compare")
FORMATS = ("csv", "json")
WORKERS_ENV = "SWITCHQ_WORKERS"

_QUEUE_KEYS = ("lambda1", "mu1", "lambda2", "mu2", "eta1", "eta2", "init_state", "init_env_prob")
_DIFFUSION_KEYS = ("lambda1s", "mu1s", "lambda2s", "mu2s", "omega1_sq", "omega2_sq",
                   "eta1", "eta2", "init_position", "init_env_prob")
_SIM_KEYS = ("replications", "horizon", "burn_in", "seed", "worker_hint")
_TARGETS = ("steady", "transient", "absorbed", "emptying", "diffusion_steady", "diffusion_fpt")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grids:
    n_max: int = 40
    t: tuple = ()
    x: tuple = ()
    s: tuple = ()
    epsilon: tuple = (0.01, 0.05)
    levels: tuple | None = None


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: QueueSpec | None = None
    diffusion: DiffusionSpec | None = None
    grids: Grids = field(default_factory=Grids)
    fpt_mean: bool = True
    sim: simulator.SimConfig | None = None
    targets: tuple = ()
    escape_level: int | None = None
    out: Path | None = None
    fmt: str = "csv"


def _section(doc: dict, name: str, keys) -> dict | None:
    block = doc.get(name)
    if block is None:
        return None
    if not isinstance(block, dict):
        raise SpecError(f"section '{name}' must be a mapping")
    unknown = sorted(set(block) - set(keys))
    if unknown:
        raise SpecError(f"unknown key(s) in '{name}': {', '.join(unknown)}")
    return block


def _grid(raw, name: str, integer: bool = False) -> tuple:
    """A grid is a list or ``{start, stop, num}``; it must be nonempty and sorted."""
    if raw is None:
        return ()
    if isinstance(raw, dict):
        try:
            values = np.linspace(float(raw["start"]), float(raw["stop"]), int(raw["num"]))
        except KeyError as exc:
            raise SpecError(f"grid '{name}' needs start, stop and num") from exc
        values = values.tolist()
    elif isinstance(raw, (list, tuple)):
        values = list(raw)
    else:
        values = [raw]
    if not values:
        raise SpecError(f"grid '{name}' is empty")
    try:
        values = [int(v) if integer else float(v) for v in values]
    except (TypeError, ValueError) as exc:
        raise SpecError(f"grid '{name}' has a non-numeric entry") from exc
    if any(b < a for a, b in zip(values, values[1:])):
        raise SpecError(f"grid '{name}' is not sorted")
    return tuple(values)


def _build(cls, block: dict, name: str):
    try:
        return cls(**block)
    except TypeError as exc:
        raise SpecError(f"section '{name}': {exc}") from exc


def parse_config(doc: dict, command: str) -> RunConfig:
    """Turn a loaded YAML document into a validated ``RunConfig``."""
    if command not in COMMANDS:
        raise SpecError(f"unknown command {command!r}")
    if not isinstance(doc, dict):
        raise SpecError("config must be a mapping")
    unknown = sorted(set(doc) - {"model", "diffusion", "grids", "fpt", "sim", "output"})
    if unknown:
        raise SpecError(f"unknown section(s): {', '.join(unknown)}")

    model = _section(doc, "model", _QUEUE_KEYS)
    model = _build(QueueSpec, model, "model") if model is not None else None
    diff = _section(doc, "diffusion", _DIFFUSION_KEYS)
    diff = _build(DiffusionSpec, diff, "diffusion") if diff is not None else None

    g = _section(doc, "grids", ("n_max", "t", "x", "s", "epsilon", "levels")) or {}
    n_max = g.get("n_max", 40)
    if isinstance(n_max, bool) or not isinstance(n_max, int) or n_max < 0:
        raise SpecError("grids.n_max must be a nonnegative integer")
    grids = Grids(
        n_max=n_max,
        t=_grid(g.get("t"), "t"),
        x=_grid(g.get("x"), "x"),
        s=_grid(g.get("s"), "s"),
        epsilon=_grid(g.get("epsilon", [0.01, 0.05]), "epsilon"),
        levels=_grid(g["levels"], "levels", integer=True) if "levels" in g else None,
    )
    if any(v < 0 for v in grids.t + grids.x + grids.s):
        raise SpecError("t, x and s grids must be nonnegative")

    f = _section(doc, "fpt", ("mean",)) or {}
    fpt_mean = bool(f.get("mean", True))

    s = _section(doc, "sim", _SIM_KEYS + ("targets", "escape_level"))
    sim, targets, escape = None, (), None
    if s is not None:
        targets = tuple(s.get("targets", ("steady",)))
        bad = [t for t in targets if t not in _TARGETS]
        if bad:
            raise SpecError(f"unknown sim target(s): {', '.join(map(str, bad))}")
        escape = s.get("escape_level")
        sim = _build(simulator.SimConfig, {k: s[k] for k in _SIM_KEYS if k in s}, "sim")

    o = _section(doc, "output", ("dir", "format")) or {}
    fmt = o.get("format", "csv")
    if fmt not in FORMATS:
        raise SpecError(f"output.format must be one of {FORMATS}")
    out = Path(o["dir"]) if o.get("dir") else None

    cfg = RunConfig(command, model, diff, grids, fpt_mean, sim, targets, escape, out, fmt)
    _require_blocks(cfg)
    return cfg


def _require_blocks(cfg: RunConfig):
    need_model = cfg.command in ("steady", "transient", "fpt") or (
        cfg.command == "simulate" and any(not t.startswith("diffusion") for t in cfg.targets))
    need_diff = cfg.command in ("diffusion", "compare") or (
        cfg.command == "simulate" and any(t.startswith("diffusion") for t in cfg.targets))
    if need_model and cfg.model is None:
        raise SpecError(f"command '{cfg.command}' needs a 'model' section")
    if need_diff and cfg.diffusion is None:
        raise SpecError(f"command '{cfg.command}' needs a 'diffusion' section")
    if cfg.command == "transient" and not cfg.grids.t:
        raise SpecError("command 'transient' needs grids.t")
    if cfg.command == "simulate" and cfg.sim is None:
        raise SpecError("command 'simulate' needs a 'sim' section")
    if cfg.command == "simulate" and {"transient", "absorbed"} & set(cfg.targets) and not cfg.grids.t:
        raise SpecError("transient and absorbed targets need grids.t")
    if cfg.command == "simulate" and "diffusion_steady" in cfg.targets and len(cfg.grids.x) < 2:
        raise SpecError("target 'diffusion_steady' needs at least two grids.x edges")


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

@dataclass
class Report:
    command: str
    tables: dict = field(default_factory=dict)       # name -> (columns, rows)
    scalars: dict = field(default_factory=dict)      # name -> value

    def table(self, name: str, columns, rows):
        self.tables[name] = (tuple(columns), [tuple(r) for r in rows])


def _steady(cfg: RunConfig) -> Report:
    rep = Report("steady")
    sol = steady_state.solve_steady(cfg.model)
    n = np.arange(cfg.grids.n_max + 1)
    q1, q2 = steady_state.joint_pmf(sol, n, 1), steady_state.joint_pmf(sol, n, 2)
    h = steady_state.entropy_env_given_n(sol, n)
    rep.table("pmf", ("n", "q_n1", "q_n2", "q_n", "H_E_given_n"),
              zip(n.tolist(), q1, q2, q1 + q2, h))
    sc = rep.scalars
    sc["case"] = sol.case.name
    sc["P_E1"], sc["P_E2"] = sol.env_probs
    sc["mean_N"] = steady_state.mean(sol)
    for i in (1, 2):
        if sol.env_mixtures[i - 1] is not None:
            sc[f"mean_N_given_E{i}"] = steady_state.conditional_mean(sol, i)
            sc[f"H_N_given_E{i}"] = steady_state.entropy_N_given_env(sol, i)
    sc["H_N"] = steady_state.entropy_N(sol)
    sc["H_E"] = steady_state.entropy_env(sol)
    sc["H_inf"] = steady_state.entropy_env_limit(sol)
    if sol.roots is not None:
        sc["z1"], sc["z2"], sc["z3"] = sol.roots.as_tuple()
    return rep


def _transient(cfg: RunConfig) -> Report:
    rep = Report("transient")
    spec = cfg.model
    swap = spec.eta2 != 0 and spec.eta1 == 0
    grid = transient.transient_grid(spec.swapped() if swap else spec, cfg.grids.t, cfg.grids.n_max)
    if swap:
        grid = grid[..., ::-1]
    rows = []
    for t, block in zip(cfg.grids.t, grid):
        for n in range(block.shape[0]):
            rows.append((t, n, block[n, 0], block[n, 1]))
    rep.table("pmf", ("t", "n", "p_n1", "p_n2"), rows)
    return rep


def _fpt(cfg: RunConfig) -> Report:
    rep = Report("fpt")
    spec = cfg.model
    if cfg.grids.t:
        rep.table("density", ("t", "b"), ((t, fpt_discrete.fpt_density(spec, t)) for t in cfg.grids.t))
    if cfg.grids.s:
        rep.table("laplace", ("s", "B"), ((s, fpt_discrete.fpt_laplace(spec, s)) for s in cfg.grids.s))
    rep.scalars["j"] = spec.init_state
    rep.scalars["absorption_probability"] = fpt_discrete.absorption_probability(spec)
    if cfg.fpt_mean:
        rep.scalars["mean"] = fpt_discrete.fpt_mean(spec)
    return rep


def _diffusion(cfg: RunConfig) -> Report:
    rep = Report("diffusion")
    d = cfg.diffusion
    if classify(d).has_steady_state:
        sol = dsteady.solve_steady_density(d)
        if cfg.grids.x:
            x = np.array(cfg.grids.x)
            w1, w2 = dsteady.steady_density(sol, x, 1), dsteady.steady_density(sol, x, 2)
            rep.table("density", ("x", "W1", "W2", "W"), zip(x, w1, w2, w1 + w2))
        rep.scalars["case"] = sol.case.name
        rep.scalars["mean_X"] = dsteady.mean(sol)
        if sol.roots is not None:
            rep.scalars["xi1"], rep.scalars["xi2"], rep.scalars["xi3"] = sol.roots.as_tuple()
    if d.eta2 == 0 and d.init_position > 0:
        if cfg.grids.t:
            rep.table("fpt_density", ("t", "k"),
                      ((t, one_way.fpt_density(d, t)) for t in cfg.grids.t))
        if cfg.grids.s:
            rep.table("laplace", ("s", "K"), ((s, one_way.fpt_laplace(d, s)) for s in cfg.grids.s))
        rep.scalars["absorption_probability"] = one_way.absorption_probability(d)
        if cfg.fpt_mean:
            rep.scalars["fpt_mean"] = one_way.fpt_mean(d)
    return rep


def _compare(cfg: RunConfig) -> Report:
    rep = Report("compare")
    levels = None if cfg.grids.levels is None else np.array(cfg.grids.levels)
    sups = []
    for eps in cfg.grids.epsilon:
        c = dcompare.compare_scaled(cfg.diffusion, eps, levels)
        rows = [(int(r[0]),) + tuple(r[1:]) for r in c.table]
        rep.table(f"eps_{eps:g}", dcompare.COLUMNS, rows)
        sups.append((eps, c.sup_marginal, c.sup_joint))
    rep.table("sup_norm", ("epsilon", "sup_marginal", "sup_joint"), sups)
    return rep


def _estimate_rows(table: dict, prefix=()):
    for key in sorted(table):
        est = table[key]
        yield prefix + tuple(key) + (est.value, est.std_error, est.count)


def _simulate(cfg: RunConfig) -> Report:
    rep = Report("simulate")
    sim = cfg.sim.with_workers_from_env(WORKERS_ENV)
    cols = ("value", "std_error", "count")
    for target in cfg.targets:
        if target == "steady":
            est = simulator.estimate_steady_pmf(cfg.model, sim)
            rep.table("steady", ("n", "i") + cols, _estimate_rows(est))
        elif target in ("transient", "absorbed"):
            fn = (simulator.estimate_transient_pmf if target == "transient"
                  else simulator.estimate_absorbed_pmf)
            rows = []
            for t in cfg.grids.t:
                rows.extend(_estimate_rows(fn(cfg.model, t, sim), (t,)))
            rep.table(target, ("t", "n", "i") + cols, rows)
        elif target == "emptying":
            s = simulator.sample_first_emptying(cfg.model, sim, cfg.escape_level)
            _first_passage_scalars(rep, "emptying", s)
        elif target == "diffusion_steady":
            h = simulator.estimate_diffusion_steady_density(cfg.diffusion, sim, cfg.grids.x)
            e = h.edges
            rows = [(e[b], e[b + 1], i) + (est.value, est.std_error, est.count)
                    for (b, i), est in sorted(h.joint.items())]
            rep.table("diffusion_steady", ("x_lo", "x_hi", "i") + cols, rows)
        elif target == "diffusion_fpt":
            s = simulator.sample_diffusion_first_passage(cfg.diffusion, sim)
            _first_passage_scalars(rep, "diffusion_fpt", s)
    return rep


def _first_passage_scalars(rep: Report, name: str, s: simulator.FirstPassageSample):
    c, m = s.completion(), s.mean_time()
    rep.scalars[f"{name}_completion"] = c.value
    rep.scalars[f"{name}_completion_se"] = c.std_error
    rep.scalars[f"{name}_mean"] = m.value
    rep.scalars[f"{name}_mean_se"] = m.std_error
    rep.scalars[f"{name}_censored_fraction"] = s.censored_fraction


_DISPATCH = {"steady": _steady, "transient": _transient, "fpt": _fpt,
             "diffusion": _diffusion, "simulate": _simulate, "compare": _compare}


def run(cfg: RunConfig) -> Report:
    return _DISPATCH[cfg.command](cfg)


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def _json_number(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "Infinity" if v > 0 else "-Infinity"
    text = format(v, ".17g")
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def _json_value(v) -> str:
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return _json_number(v)


def to_json(rep: Report) -> str:
    """Deterministic JSON: fixed key order, floats at 17 significant digits."""
    lines = ["{", f'  "command": {_json_value(rep.command)},', '  "scalars": {']
    items = [f"    {_json_value(k)}: {_json_value(v)}" for k, v in rep.scalars.items()]
    lines.append(",\n".join(items))
    lines.append("  },")
    lines.append('  "tables": {')
    blocks = []
    for name, (cols, rows) in rep.tables.items():
        head = ", ".join(_json_value(c) for c in cols)
        body = ",\n".join("        [" + ", ".join(_json_value(v) for v in r) + "]" for r in rows)
        blocks.append(f'    {_json_value(name)}: {{\n      "columns": [{head}],\n'
                      f'      "rows": [\n{body}\n      ]\n    }}')
    lines.append(",\n".join(blocks))
    lines.append("  }")
    lines.append("}")
    return "\n".join(line for line in lines if line) + "\n"


def _csv_cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".10g")


def to_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_csv_cell(v) for v in r])
    return buf.getvalue()


def write_report(rep: Report, out: Path | None, fmt: str, stream=None) -> list[Path]:
    """Write to ``out`` (one JSON file, or one CSV per table), or to ``stream``."""
    stream = stream or sys.stdout
    if fmt == "json":
        text = to_json(rep)
        if out is None:
            stream.write(text)
            return []
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"{rep.command}.json"
        path.write_text(text, encoding="utf-8")
        return [path]
    docs = {name: to_csv(cols, rows) for name, (cols, rows) in rep.tables.items()}
    if rep.scalars:
        docs["scalars"] = to_csv(("name", "value"), rep.scalars.items())
    if out is None:
        for name, text in docs.items():
            stream.write(f"# {name}\n{text}")
        return []
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, text in docs.items():
        path = out / f"{rep.command}_{name}.csv"
        path.write_text(text, encoding="utf-8")
        paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="switchq", description=__doc__.split("\n\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, type=Path, help="YAML config file")
    p.add_argument("--out", type=Path, help="output directory (default: stdout)")
    p.add_argument("--format", choices=FORMATS, help="output format (default: config or csv)")
    p.add_argument("--seed", type=int, help="override sim.seed (ignored without a sim section)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        try:
            doc = yaml.safe_load(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise SpecError(f"cannot read config: {exc}") from exc
        except yaml.YAMLError as exc:
            raise SpecError(f"config is not valid YAML: {exc}") from exc
        if args.seed is not None and isinstance(doc, dict) and isinstance(doc.get("sim"), dict):
            doc = {**doc, "sim": {**doc["sim"], "seed": args.seed}}
        cfg = parse_config(doc, args.command)
        rep = run(cfg)
        write_report(rep, args.out or cfg.out, args.format or cfg.fmt)
    except RegimeError as exc:
        print(f"switchq: {exc}", file=sys.stderr)
        return 2
    except (SwitchqError, ValueError) as exc:
        print(f"switchq: invalid input: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
