"""Command line front end.

    entrolab <task> --config <path> [--seed N] [--out <dir>] [--threads N] [--emit-plotdata]

Each run writes ``result.json`` (deterministic), ``table.csv``, ``timing.json``,
a PNG figure and, with ``--emit-plotdata``, ``plotdata.tsv``.  Exit codes: 0 on
success, 2 when the zero-entropy certificate is unavailable, 1 on any error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import numpy as np

from . import __version__, caps
from .errors import CertificationUnavailable, EntrolabError
from .group import FiniteSubset, GroupSpec, ball, interval
from .measure_entropy import (
    BernoulliMeasure,
    amplified_entropy_check,
    coarse_partition,
    letter_partition,
    markov_cylinder_measure,
    naive_measure_entropy_estimate,
    product_system_entropy,
)
from .rng import BAD_VERTICES, stream
from .separation import FiniteMetricSpace, sep_number, span_number
from .sofic import (
    SoficMap,
    build_sofic_graph,
    decompose,
    is_greedy_maximal,
    quality,
    sofic_entropy_estimate,
    sofic_sequence,
    theorem1_parameters,
)
from .topological_entropy import (
    Subshift,
    ball_schedule,
    entropy_via_separation,
    interval_schedule,
    naive_topological_entropy_estimate,
    parse_group,
    sep_symbolic,
)

TASKS = (
    "measure-entropy",
    "topological-entropy",
    "sep-span",
    "sofic-gen",
    "sofic-quality",
    "sofic-entropy",
    "decompose",
    "certify-theorem1",
)
RANDOMIZED = {"sofic-gen", "sofic-quality", "sofic-entropy", "decompose"}
ENTROPY_COLUMNS = ["F_label", "|F|", "value_nats", "value_bits", "bound_kind"]

EXIT_OK, EXIT_ERROR, EXIT_UNCERTIFIED = 0, 1, 2

_SUBSET = {
    "type": "object",
    "oneOf": [
        {"required": ["ball"], "properties": {"ball": {"type": "integer", "minimum": 0}}},
        {"required": ["interval"], "properties": {"interval": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}}},
        {"required": ["elements"], "properties": {"elements": {"type": "array", "minItems": 1}}},
    ],
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "task": {"enum": list(TASKS)},
        "system": {"type": "string"},
        "group": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0},
        "schedule": {
            "type": "object",
            "oneOf": [
                {"required": ["balls"], "properties": {"balls": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1}}},
                {"required": ["intervals"], "properties": {"intervals": {
                    "type": "object", "required": ["max"], "additionalProperties": False,
                    "properties": {"max": {"type": "integer", "minimum": 0}, "min": {"type": "integer", "minimum": 0}}}}},
                {"required": ["sets"], "properties": {"sets": {"type": "array", "minItems": 1, "items": {
                    "type": "object", "required": ["elements"],
                    "properties": {"label": {"type": "string"}, "elements": {"type": "array", "minItems": 1}}}}}},
            ],
        },
        "measure": {
            "type": "object",
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["bernoulli", "markov"]},
                "probs": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
                "alphabet": {"type": "array", "items": {"type": "string"}},
                "stationary": {"type": "array", "items": {"type": "number", "minimum": 0}},
                "transition": {"type": "array", "items": {"type": "array", "items": {"type": "number", "minimum": 0}}},
                "length": {"type": "integer", "minimum": 1},
            },
        },
        "partition": {"type": "object", "additionalProperties": {"type": "array", "items": {"type": "string"}}},
        "amplify": _SUBSET,
        "product": {"type": "object", "required": ["probs"], "properties": {"probs": {"type": "array", "items": {"type": "number", "minimum": 0}}}},
        "eps": {"oneOf": [{"type": "number", "exclusiveMinimum": 0},
                          {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}]},
        "delta": {"type": "number", "minimum": 0},
        "kappa": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "k": {"type": "integer", "minimum": 1},
        "F": _SUBSET,
        "S_test": _SUBSET,
        "sofic": {
            "type": "object",
            "properties": {
                "model": {"enum": ["random_permutation", "cyclic"]},
                "sizes": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                "maps_file": {"type": "string"},
            },
        },
        "microstates": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": ["exhaustive", "sample"]},
                "budget": {"type": "integer", "minimum": 1},
                "radius": {"type": "integer", "minimum": 0},
                "n_floor": {"type": "integer", "minimum": 1},
            },
        },
        "separation_probe": {
            "type": "object",
            "required": ["eps"],
            "additionalProperties": False,
            "properties": {
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "sample_budget": {"type": "integer", "minimum": 1},
                "exhaustive": {"type": "boolean"},
                "radius": {"type": "integer", "minimum": 0},
            },
        },
        "theta": {
            "type": "object",
            "oneOf": [
                {"required": ["bad_fraction"], "properties": {"bad_fraction": {"type": "number", "minimum": 0, "maximum": 1}}},
                {"required": ["bad"], "properties": {"bad": {"type": "array", "items": {"type": "integer", "minimum": 1}}}},
            ],
        },
        "caps": {"type": "object", "additionalProperties": False, "properties": {"cells": {"type": "integer", "minimum": 1}}},
        "output": {"type": "string"},
    },
}

_TASK_REQUIRED = {
    "measure-entropy": ["measure", "schedule"],
    "topological-entropy": ["system", "schedule"],
    "sep-span": ["system", "eps"],
    "sofic-gen": ["sofic"],
    "sofic-quality": ["sofic", "S_test"],
    "sofic-entropy": ["system", "sofic", "eps", "delta", "F"],
    "decompose": ["sofic", "F", "k"],
    "certify-theorem1": ["system", "kappa", "eps", "schedule"],
}


class ConfigError(EntrolabError):
    pass


@dataclass
class Outcome:
    result: dict
    columns: list[str]
    rows: list[dict]
    series: list[tuple] = field(default_factory=list)  # (x, y) for plot data
    running: list[tuple] | None = None
    figure: tuple | None = None  # (plotting function name, kwargs)
    status: str = "ok"
    extra_files: dict = field(default_factory=dict)


# -- config handling ---------------------------------------------------------------


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path) if path else "/"


def validate_config(cfg, task: str) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as e:
        best = jsonschema.exceptions.best_match([e]) or e
        raise ConfigError(f"config field {_pointer(best.absolute_path)}: {best.message}") from None
    if cfg.get("task", task) != task:
        raise ConfigError(f"config field /task: {cfg['task']!r} does not match requested task {task!r}")
    for key in _TASK_REQUIRED[task]:
        if key not in cfg:
            raise ConfigError(f"config field /{key}: required for task {task}")
    if task == "sofic-gen" and "sizes" not in cfg["sofic"]:
        raise ConfigError("config field /sofic/sizes: required for task sofic-gen")
    if task in RANDOMIZED and cfg["sofic"].get("model", "random_permutation") == "random_permutation" \
            and "maps_file" not in cfg["sofic"] and "seed" not in cfg:
        raise ConfigError("config field /seed: required for randomized tasks")
    if task == "decompose" and cfg.get("theta", {}).get("bad_fraction") and "seed" not in cfg:
        raise ConfigError("config field /seed: required when theta.bad_fraction is set")
    if task == "topological-entropy" and "separation_probe" in cfg and "seed" not in cfg \
            and not cfg["separation_probe"].get("exhaustive", False):
        raise ConfigError("config field /seed: required for sampled separation probes")
    if task == "sofic-entropy" and cfg.get("microstates", {}).get("mode") == "sample" and "seed" not in cfg:
        raise ConfigError("config field /seed: required for sampled microstates")


def _bundled(kind: str, name: str) -> str | None:
    ref = resources.files("entrolab") / "data" / kind / name
    return str(ref) if ref.is_file() else None


def resolve(name: str, base_dir: str, kind: str = "systems") -> str:
    cand = name if os.path.isabs(name) else os.path.join(base_dir, name)
    if os.path.isfile(cand):
        return cand
    bundled = _bundled(kind, name) or _bundled(kind, name + ".json")
    if bundled:
        return bundled
    raise ConfigError(f"file not found: {name}")


def _read_json(path: str):
    with open(path, encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{os.path.basename(path)}: invalid JSON ({e})") from None


def _canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()


# -- builders ----------------------------------------------------------------------


def _subset(obj, spec: GroupSpec) -> FiniteSubset:
    if "ball" in obj:
        return ball(spec, obj["ball"])
    if "interval" in obj:
        lo, hi = obj["interval"]
        return interval(spec, lo, hi)
    return FiniteSubset(spec, [spec.element(x) for x in obj["elements"]])


def _schedule(obj, spec: GroupSpec):
    if "balls" in obj:
        return ball_schedule(spec, obj["balls"])
    if "intervals" in obj:
        if spec != GroupSpec.lattice(1):
            raise ConfigError("config field /schedule/intervals: intervals need the group Z")
        return interval_schedule(obj["intervals"]["max"], obj["intervals"].get("min", 0))
    return [(s.get("label", f"F{i}"), FiniteSubset(spec, [spec.element(x) for x in s["elements"]]))
            for i, s in enumerate(obj["sets"])]


def _group(cfg, system) -> GroupSpec:
    if system is not None and isinstance(system, Subshift):
        return system.group
    if "group" in cfg:
        return parse_group(cfg["group"])
    raise ConfigError("config field /group: needed when no subshift system is given")


def _load_system(cfg, base_dir):
    if "system" not in cfg:
        return None, None
    path = resolve(cfg["system"], base_dir)
    data = _read_json(path)
    digest = hashlib.sha256(_canonical(data)).hexdigest()
    if data.get("kind", "subshift") == "metric":
        if "distances" in data:
            return FiniteMetricSpace(range(len(data["distances"])), data["distances"]), digest
        return FiniteMetricSpace.from_points(data["points"]), digest
    body = {k: v for k, v in data.items() if k not in ("kind", "name", "description")}
    return Subshift.from_json(body), digest


def _maps(cfg, spec: GroupSpec, base_dir: str, seed) -> list[SoficMap]:
    sc = cfg["sofic"]
    if "maps_file" in sc:
        data = _read_json(resolve(sc["maps_file"], base_dir, "configs"))
        return [SoficMap.from_json(m, spec) for m in data["maps"]]
    if "sizes" not in sc:
        raise ConfigError("config field /sofic: give sizes or maps_file")
    return sofic_sequence(spec, sc["sizes"], sc.get("model", "random_permutation"), seed)


def _entropy_rows(report) -> list[dict]:
    out = []
    for r in report.rows:
        d = r.to_dict()
        out.append({
            "F_label": r.label, "|F|": r.size, "value_nats": d["value_nats"], "value_bits": d["value_bits"],
            "bound_kind": r.bound_kind, "running_min_nats": r.running_min,
        })
    return out


def _entropy_outcome(report, xlabel="|F|", reference=None, ref_label="", title=None) -> Outcome:
    rows = _entropy_rows(report)
    has_running = any(r["running_min_nats"] is not None for r in rows)
    cols = ENTROPY_COLUMNS + (["running_min_nats"] if has_running else [])
    if not has_running:
        for r in rows:
            r.pop("running_min_nats")
    series = [(r.size, r.value) for r in report.rows]
    running = [(r.size, r.running_min) for r in report.rows] if has_running else None
    fig = ("series_figure", {
        "x": [x for x, _ in series], "y": [y for _, y in series],
        "running": [y for _, y in running] if running else None,
        "title": title or report.quantity, "xlabel": xlabel, "reference": reference, "ref_label": ref_label,
    })
    return Outcome(report.to_dict(), cols, rows, series, running, fig)


# -- tasks -------------------------------------------------------------------------


def task_measure_entropy(cfg, ctx) -> Outcome:
    system = ctx["system"]
    spec = _group(cfg, system)
    mc = cfg["measure"]
    alphabet = mc.get("alphabet") or (list(system.alphabet) if isinstance(system, Subshift) else None)
    if mc["kind"] == "bernoulli":
        if "probs" not in mc:
            raise ConfigError("config field /measure/probs: required for bernoulli measures")
        m = BernoulliMeasure.of(spec, mc["probs"], alphabet)
    else:
        for key in ("stationary", "transition", "length"):
            if key not in mc:
                raise ConfigError(f"config field /measure/{key}: required for markov measures")
        alphabet = alphabet or [str(i) for i in range(len(mc["stationary"]))]
        m = markov_cylinder_measure(spec, alphabet, mc["stationary"], mc["transition"], mc["length"])
    alpha = coarse_partition(m, cfg["partition"]) if "partition" in cfg else letter_partition(m)
    sched = _schedule(cfg["schedule"], spec)
    cap = ctx["cap"]
    if "amplify" in cfg:
        report = amplified_entropy_check(m, alpha, _subset(cfg["amplify"], spec), sched, cap)
    elif "product" in cfg:
        m2 = BernoulliMeasure.of(spec, cfg["product"]["probs"])
        report = product_system_entropy(m, alpha, m2, letter_partition(m2), sched, cap)
    else:
        report = naive_measure_entropy_estimate(m, alpha, sched, cap)
    out = _entropy_outcome(report, reference=alpha.entropy(), ref_label="H(alpha)")
    out.result["partition_entropy_nats"] = alpha.entropy()
    return out


def task_topological_entropy(cfg, ctx) -> Outcome:
    s = ctx["system"]
    if not isinstance(s, Subshift):
        raise ConfigError("config field /system: topological-entropy needs a subshift")
    sched = _schedule(cfg["schedule"], s.group)
    report = naive_topological_entropy_estimate(s, sched, ctx["cap"])
    out = _entropy_outcome(report)
    if "separation_probe" in cfg:
        sp = cfg["separation_probe"]
        probe = entropy_via_separation(s, sp["eps"], sched, sp.get("sample_budget", 64), ctx["seed"] or 0,
                                       sp.get("radius"), sp.get("exhaustive", False), ctx["cap"])
        out.result["separation_probe"] = probe.to_dict()
    return out


def task_sep_span(cfg, ctx) -> Outcome:
    M = ctx["system"]
    if not isinstance(M, FiniteMetricSpace):
        raise ConfigError("config field /system: sep-span needs a metric space system")
    grid = cfg["eps"] if isinstance(cfg["eps"], list) else [cfg["eps"]]
    rows, sep_c, spn_c = [], [], []
    for e in sorted(grid):
        sep = sep_number(M, e)
        spn = span_number(M, e)
        sep_c.append(sep.count)
        spn_c.append(spn.count)
        for name, cert in (("sep", sep), ("spn", spn)):
            rows.append({
                "F_label": f"{name}@eps={e!r}", "|F|": 1, "value_nats": math.log(cert.count),
                "value_bits": math.log2(cert.count), "bound_kind": cert.kind, "eps": e, "count": cert.count,
                "witness": " ".join(str(i + 1) for i in cert.witness), "chain_ok": spn.count <= sep.count,
            })
    result = {
        "quantity": "sep-span",
        "points": len(M),
        "eps": sorted(grid),
        "sep": sep_c,
        "spn": spn_c,
        "chain_violations": sum(a < b for a, b in zip(sep_c, spn_c)),
        "rows": rows,
    }
    cols = ENTROPY_COLUMNS + ["eps", "count", "witness", "chain_ok"]
    series = [(e, c) for e, c in zip(sorted(grid), sep_c)]
    fig = ("sep_span_figure", {"eps": sorted(grid), "sep": sep_c, "spn": spn_c, "title": "sep / spn"})
    return Outcome(result, cols, rows, series, None, fig)


def task_sofic_gen(cfg, ctx) -> Outcome:
    spec = _group(cfg, ctx["system"])
    maps = _maps(cfg, spec, ctx["base_dir"], ctx["seed"])
    payload = {"maps": [m.to_json() for m in maps]}
    rows = []
    for i, m in enumerate(maps):
        digest = hashlib.sha256(_canonical(m.to_json())).hexdigest()
        rows.append({"map": f"sigma{i}", "n": m.n, "model": m.model, "sha256": digest, "bound_kind": "exact"})
    result = {"quantity": "sofic-maps", "maps": [{k: r[k] for k in ("map", "n", "model", "sha256")} for r in rows],
              "maps_file": "sofic_maps.json"}
    series = [(m.n, i) for i, m in enumerate(maps)]
    fig = ("bar_figure", {"labels": [r["map"] for r in rows], "values": [m.n for m in maps],
                          "title": "sofic map sizes", "ylabel": "n"})
    return Outcome(result, ["map", "n", "model", "sha256", "bound_kind"], rows, series, None, fig,
                   extra_files={"sofic_maps.json": payload})


def task_sofic_quality(cfg, ctx) -> Outcome:
    spec = _group(cfg, ctx["system"])
    maps = _maps(cfg, spec, ctx["base_dir"], ctx["seed"])
    S = _subset(cfg["S_test"], spec)
    reports = [quality(m, S) for m in maps]
    rows = [{
        "map": f"sigma{i}", "n": q.n, "min_multiplicativity": q.min_multiplicativity,
        "min_freeness": q.min_freeness, "q_fraction": q.q_fraction, "bound_kind": "exact",
    } for i, q in enumerate(reports)]
    result = {"quantity": "sofic-quality", "S_test": S.to_json(), "reports": [q.to_dict() for q in reports]}
    series = [(q.n, q.min_freeness) for q in reports]
    fig = ("series_figure", {"x": [q.n for q in reports], "y": [q.min_freeness for q in reports],
                             "title": "min freeness fraction", "xlabel": "n", "ylabel": "fraction"})
    return Outcome(result, list(rows[0]), rows, series, None, fig)


def task_sofic_entropy(cfg, ctx) -> Outcome:
    s = ctx["system"]
    if not isinstance(s, Subshift):
        raise ConfigError("config field /system: sofic-entropy needs a subshift")
    maps = _maps(cfg, s.group, ctx["base_dir"], ctx["seed"])
    mc = cfg.get("microstates", {})
    eps = cfg["eps"] if not isinstance(cfg["eps"], list) else cfg["eps"][0]
    report = sofic_entropy_estimate(
        maps, s, eps, _subset(cfg["F"], s.group), cfg["delta"], mc.get("mode", "exhaustive"),
        mc.get("n_floor", 1), mc.get("budget", 256), ctx["seed"], mc.get("radius"), ctx["cap"], ctx["threads"],
    )
    out = _entropy_outcome(report, xlabel="n", title="sofic entropy per map")
    return out


def _theta(cfg, n: int, seed, index: int):
    tc = cfg.get("theta")
    if tc is None:
        return None
    mask = np.ones(n, dtype=bool)
    if "bad" in tc:
        bad = [b - 1 for b in tc["bad"] if b <= n]
        mask[bad] = False
    else:
        mask &= stream(seed, BAD_VERTICES, index).random(n) >= tc["bad_fraction"]
    return mask


def task_decompose(cfg, ctx) -> Outcome:
    spec = _group(cfg, ctx["system"])
    maps = _maps(cfg, spec, ctx["base_dir"], ctx["seed"])
    F = _subset(cfg["F"], spec)
    S = _subset(cfg["S_test"], spec) if "S_test" in cfg else None
    k = cfg["k"]
    rows, details = [], []
    for i, m in enumerate(maps):
        g = build_sofic_graph(m, F, S, _theta(cfg, m.n, ctx["seed"], i))
        dec = decompose(g, F, k)
        d = dec.to_dict()
        d["graph"] = g.to_dict()
        d["greedy_maximal"] = is_greedy_maximal(g, F, k, dec)
        details.append(d)
        rows.append({
            "map": f"sigma{i}", "n": m.n, "k": k, "blocks": len(dec.blocks), "W": d["W_size"],
            "P": d["P_size"], "J": d["J_size"], "I": g.to_dict()["I_count"], "I_minus_W": dec.I_minus_W,
            "greedy_maximal": d["greedy_maximal"], "bound_kind": "exact",
        })
    result = {"quantity": "decomposition", "F": F.to_json(), "k": k, "decompositions": details}
    series = [(r["n"], r["P"]) for r in rows]
    fig = ("bar_figure", {"labels": [r["map"] for r in rows], "values": [r["P"] / r["n"] for r in rows],
                          "title": "leftover fraction |P|/n", "ylabel": "fraction"})
    return Outcome(result, list(rows[0]), rows, series, None, fig)


def task_certify(cfg, ctx) -> Outcome:
    s = ctx["system"]
    if not isinstance(s, Subshift):
        raise ConfigError("config field /system: certify-theorem1 needs a subshift")
    eps = cfg["eps"] if not isinstance(cfg["eps"], list) else cfg["eps"][0]
    kappa = cfg["kappa"]
    half = sep_symbolic(s, eps / 2, cap=ctx["cap"])
    sched = []
    rows = []
    for label, F in _schedule(cfg["schedule"], s.group):
        q = sep_symbolic(s, eps / 4, F, ctx["cap"])
        sched.append((label, F, q.count))
        rows.append({
            "F_label": label, "|F|": len(F), "value_nats": math.log(q.count) / len(F),
            "value_bits": math.log2(q.count) / len(F), "bound_kind": "exact" if q.exact else "upper",
            "sep_quarter": q.count,
        })
    maps = _maps(cfg, s.group, ctx["base_dir"], ctx["seed"]) if "sofic" in cfg else ()
    cols = ENTROPY_COLUMNS + ["sep_quarter"]
    series = [(r["|F|"], r["value_nats"]) for r in rows]
    base = {"quantity": "theorem1-parameters", "sep_half": half.count, "sep_half_exact": half.exact,
            "kappa": kappa, "eps": eps, "schedule": rows}
    fig = ("series_figure", {"x": [x for x, _ in series], "y": [y for _, y in series],
                             "title": "log sep(X, eps/4, d_F) / |F|"})
    try:
        params = theorem1_parameters(kappa, eps, half.count, sched, maps)
    except CertificationUnavailable as e:
        base["status"] = "certification-unavailable"
        base["diagnosis"] = str(e)
        return Outcome(base, cols, rows, series, None, fig, status="certification-unavailable")
    base["parameters"] = params.to_dict()
    if not (half.exact and all(r["bound_kind"] == "exact" for r in rows)):
        base["note"] = "some sep values are upper bounds from local admissibility; the choice stays valid but conservative"
    fig[1]["reference"] = kappa / (4 * params.k)
    fig[1]["ref_label"] = "kappa/(4k)"
    return Outcome(base, cols, rows, series, None, fig)


DISPATCH = {
    "measure-entropy": task_measure_entropy,
    "topological-entropy": task_topological_entropy,
    "sep-span": task_sep_span,
    "sofic-gen": task_sofic_gen,
    "sofic-quality": task_sofic_quality,
    "sofic-entropy": task_sofic_entropy,
    "decompose": task_decompose,
    "certify-theorem1": task_certify,
}


# -- output ------------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return _jsonable(float(obj))
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def plotdata_text(series) -> str:
    if not series:
        raise EntrolabError("empty series: nothing to emit as plot data")
    lines = ["x\ty"] + [f"{x!r}\t{y!r}" for x, y in series]
    return "\n".join(lines) + "\n"


def run(task: str, config_path: str, seed: int | None = None, out: str | None = None, threads: int = 1,
        emit_plotdata: bool = False) -> int:
    t0 = time.perf_counter()
    # a bare name like "bernoulli_f2" falls back to the bundled configs
    config_path = resolve(config_path, os.getcwd(), "configs")
    cfg = _read_json(config_path)
    if seed is not None and isinstance(cfg, dict):
        cfg = dict(cfg, seed=seed)
    validate_config(cfg, task)
    base_dir = os.path.dirname(os.path.abspath(config_path))
    system, system_digest = _load_system(cfg, base_dir)
    ctx = {
        "system": system,
        "seed": cfg.get("seed"),
        "base_dir": base_dir,
        "cap": caps.cap_cells(cfg.get("caps", {}).get("cells")),
        "threads": max(1, threads),
    }
    outcome = DISPATCH[task](cfg, ctx)

    out_dir = out or cfg.get("output") or os.path.join("entrolab-out", task)
    os.makedirs(out_dir, exist_ok=True)
    record = {
        "toolkit": "entrolab",
        "version": __version__,
        "task": task,
        "config_sha256": hashlib.sha256(_canonical(cfg)).hexdigest(),
        "system_sha256": system_digest,
        "seed": cfg.get("seed"),
        "status": outcome.status,
        "result": outcome.result,
    }
    atomic_write(os.path.join(out_dir, "result.json"), dumps(record))
    atomic_write(os.path.join(out_dir, "table.csv"), _csv_text(outcome.columns, outcome.rows))
    for name, payload in outcome.extra_files.items():
        atomic_write(os.path.join(out_dir, name), dumps(payload))
    if emit_plotdata:
        atomic_write(os.path.join(out_dir, "plotdata.tsv"), plotdata_text(outcome.series))
        if outcome.running:
            atomic_write(os.path.join(out_dir, "plotdata_running_min.tsv"), plotdata_text(outcome.running))
    if outcome.figure:
        from . import plotting

        name, kwargs = outcome.figure
        getattr(plotting, name)(os.path.join(out_dir, "figure.png"), **kwargs)
    atomic_write(os.path.join(out_dir, "timing.json"), dumps({"wall_seconds": time.perf_counter() - t0}))
    return EXIT_UNCERTIFIED if outcome.status == "certification-unavailable" else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="entrolab", description="Naive and sofic entropy experiments.")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", help="output directory")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--emit-plotdata", action="store_true", help="also write plotdata.tsv")
    p.add_argument("--version", action="version", version=f"entrolab {__version__}")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args.task, args.config, args.seed, args.out, args.threads, args.emit_plotdata)
    except (EntrolabError, OSError, KeyError) as e:
        print(f"entrolab: error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
