"""Command-line driver: ``rydlink <subcommand> [--config run.json] [--set a.b=value] ...``.

Configuration precedence, lowest to highest: built-in defaults, the JSON
config file, ``--set`` overrides (dotted path, JSON-parsed value), then the
dedicated flags (``--n-sites``, ``--boundary``, ``--variant``, ``--seed``,
``--out``).  The resolved config is hashed (SHA-256 of its canonical JSON,
output directory excluded) and the hash goes into every sidecar.

Exit codes: 0 ok, 2 config or argument error, 3 resource cap, 4 numerical
failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from .errors import InvalidArgumentError, NumericalError, ResourceError, RydlinkError

SUBCOMMANDS = ("basis", "evolve", "idsf", "liouville", "wigner", "entangle", "analyze", "report")

DEFAULTS = {
    "model": {"variant": "PXP", "n_sites": 12, "boundary": "PBC", "params": {}},
    "seed": 0,
    "out": "out",
    "initial": "zero",
    "times": {"t_max": 10.0, "dt": 0.25, "unit": "natural"},
    "probes": ["Z"],
    "k_index": None,
    "tolerances": {"krylov_tol": 1e-10, "krylov_dim": 30, "gram_tol": 1e-10},
    "basis": {"export": False},
    "evolve": {"field_mapping": True, "store_states": False},
    "idsf": {"variant": "idsf", "sigma": 0.05, "omega_max": None, "n_omega": None,
             "beta": None, "probe_b": None, "momentum": True},
    "liouville": {"mode": "ost", "max_len": 9, "gamma": 3.0, "k_over_pi": [0.5, 1.0],
                  "omega_max": 4.0, "n_omega": 801, "variants": ["A", "B", "C", "D"]},
    "wigner": {"q_over_pi": 0.25, "alpha_max": 12.0, "n_points": 64, "kernel": "fejer",
               "bloch": False, "n_angles": 24},
    "entangle": {"size": 3, "distances": None},
    "analyze": {"input": None, "shots": 1000, "window": 5, "tasks": ["front", "band", "clusters"],
                "q_over_pi": [0.2, 0.4], "m_max": 5, "bootstrap": 200, "boundary": None},
    "report": {"criteria": None, "inputs": []},
}

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_opt_num = {"type": ["number", "null"]}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object", "additionalProperties": False,
            "required": ["variant", "n_sites"],
            "properties": {
                "variant": {"enum": ["PXP", "RydbergLongRange", "SchwingerSpin", "MixedFieldIsing",
                                     "TransverseFieldIsing", "XXZ"]},
                "n_sites": {"type": "integer", "minimum": 1},
                "boundary": {"enum": ["PBC", "OBC", "pbc", "obc"]},
                "params": {"type": "object", "additionalProperties": _num},
            },
        },
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "initial": {"type": "string"},
        "times": {"type": "object", "additionalProperties": False,
                  "properties": {"t_max": {"type": "number", "minimum": 0}, "dt": _pos,
                                 "unit": {"enum": ["natural", "cycles"]}}},
        "probes": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "k_index": {"type": ["array", "null"], "items": {"type": "integer"}},
        "tolerances": {"type": "object", "additionalProperties": False,
                       "properties": {"krylov_tol": _pos, "krylov_dim": {"type": "integer", "minimum": 2},
                                      "gram_tol": _pos}},
        "basis": {"type": "object", "additionalProperties": False,
                  "properties": {"export": {"type": "boolean"}}},
        "evolve": {"type": "object", "additionalProperties": False,
                   "properties": {"field_mapping": {"type": "boolean"}, "store_states": {"type": "boolean"}}},
        "idsf": {"type": "object", "additionalProperties": False,
                 "properties": {"variant": {"enum": ["idsf", "state_weighted", "finite_T", "cross", "connected_FT"]},
                                "sigma": _pos, "omega_max": _opt_num,
                                "n_omega": {"type": ["integer", "null"], "minimum": 3},
                                "beta": _opt_num, "probe_b": {"type": ["string", "null"]},
                                "momentum": {"type": "boolean"}}},
        "liouville": {"type": "object", "additionalProperties": False,
                      "properties": {"mode": {"enum": ["graph", "ost", "meanfield"]},
                                     "max_len": {"type": "integer", "minimum": 1, "maximum": 11},
                                     "gamma": {"type": "number", "minimum": 0},
                                     "k_over_pi": {"type": "array", "items": _num, "minItems": 1},
                                     "omega_max": _pos, "n_omega": {"type": "integer", "minimum": 3},
                                     "variants": {"type": "array", "items": {"enum": ["A", "B", "C", "D"]}}}},
        "wigner": {"type": "object", "additionalProperties": False,
                   "properties": {"q_over_pi": _num, "alpha_max": _pos,
                                  "n_points": {"type": "integer", "minimum": 2},
                                  "kernel": {"enum": ["fejer", "fourier"]}, "bloch": {"type": "boolean"},
                                  "n_angles": {"type": "integer", "minimum": 2}}},
        "entangle": {"type": "object", "additionalProperties": False,
                     "properties": {"size": {"type": "integer", "minimum": 1},
                                    "distances": {"type": ["array", "null"], "items": {"type": "integer"}}}},
        "analyze": {"type": "object", "additionalProperties": False,
                    "properties": {"input": {"type": ["string", "null"]},
                                   "shots": {"type": "integer", "minimum": 1},
                                   "window": {"type": "integer", "minimum": 1},
                                   "tasks": {"type": "array", "items": {"enum": ["front", "band", "clusters"]}},
                                   "q_over_pi": {"type": "array", "items": _num},
                                   "m_max": {"type": "integer", "minimum": 1, "maximum": 6},
                                   "bootstrap": {"type": "integer", "minimum": 0},
                                   "boundary": {"type": ["string", "null"]}}},
        "report": {"type": "object", "additionalProperties": False,
                   "properties": {"criteria": {"type": ["array", "null"], "items": {"type": "integer"}},
                                  "inputs": {"type": "array", "items": {"type": "string"}}}},
    },
}


# ---------------------------------------------------------------------------
# configuration


def _merge(base, extra, path=""):
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict) and key != "params":
            _merge(base[key], val, f"{path}{key}.")
        else:
            base[key] = copy.deepcopy(val)
    return base


def _set_path(cfg, dotted, raw):
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    keys = dotted.split(".")
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


def resolve_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgumentError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise InvalidArgumentError("config must be a JSON object")
        _merge(cfg, doc)
    for item in args.set or []:
        if "=" not in item:
            raise InvalidArgumentError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        _set_path(cfg, k.strip(), v)
    for flag, path in (("n_sites", "model.n_sites"), ("boundary", "model.boundary"),
                       ("variant", "model.variant"), ("seed", "seed"), ("out", "out")):
        val = getattr(args, flag, None)
        if val is not None:
            _set_path(cfg, path, json.dumps(val))
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    v = jsonschema.Draft7Validator(SCHEMA)
    errors = sorted(v.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = ".".join(str(p) for p in e.absolute_path) or "<root>"
        raise InvalidArgumentError(f"config error at {where}: {e.message}")


def config_hash(cfg) -> str:
    body = {k: v for k, v in cfg.items() if k != "out"}
    return hashlib.sha256(json.dumps(body, sort_keys=True).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# helpers


class Run:
    def __init__(self, sub, cfg):
        self.sub = sub
        self.cfg = cfg
        self.hash = config_hash(cfg)
        self.out = Path(cfg["out"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.artifacts = []

    def path(self, name):
        p = self.out / name
        self.artifacts.append(p.name)
        return p

    def sidecar(self, name, payload):
        body = {"subcommand": self.sub, "config_hash": self.hash, "config": self.cfg}
        body.update(payload)
        p = self.path(name)
        p.write_text(json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")
        return p

    def table(self, name, header, rows):
        p = self.path(name)
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(x) for x in r])
        return p


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return x


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


def _spec(cfg):
    from .models import ModelSpec

    return ModelSpec.from_dict(cfg["model"])


def _hamiltonian(cfg):
    from .models import build_model

    return build_model(_spec(cfg))


def _initial_state(basis, name):
    from .hilbert import parse_bitstring

    n = basis.n_sites
    if name == "zero":
        cfg = 0
    elif name == "Z2":
        cfg = sum(1 << j for j in range(0, n - 1 if basis.boundary.value == "PBC" and n % 2 else n, 2))
    elif name == "Z4":
        cfg = sum(1 << j for j in range(0, n - 1, 4))
    else:
        if len(name) != n:
            raise InvalidArgumentError(f"initial bitstring has length {len(name)}, need {n}")
        cfg = parse_bitstring(name)
    return basis.product_state(cfg)


def _times(cfg):
    t = cfg["times"]
    n = int(round(t["t_max"] / t["dt"]))
    grid = np.arange(n + 1) * t["dt"]
    return grid * math.pi if t["unit"] == "cycles" else grid


def _k_values(cfg, n):
    idx = cfg["k_index"]
    return None if idx is None else [2 * math.pi * j / n for j in idx]


# ---------------------------------------------------------------------------
# subcommands


def cmd_basis(run: Run):
    from .hilbert import Boundary, dimension, enumerate_basis, sector_dimensions

    spec = run.cfg["model"]
    n = spec["n_sites"]
    bc = Boundary.parse(spec["boundary"])
    dim = dimension(n, bc)
    sectors = {}
    if n <= 24:
        B = enumerate_basis(n, bc)
        if B.dim != dim:
            raise NumericalError(f"enumeration gives {B.dim}, recurrence {dim}")
        if bc is Boundary.PBC:
            sectors = sector_dimensions(B)
            run.table("sectors.csv", ["j", "k", "dim"],
                      [(j, 2 * math.pi * j / n, d) for j, d in sectors.items()])
        if run.cfg["basis"]["export"]:
            B.export(run.path("basis.txt"))
    run.sidecar("basis.json", {"n_sites": n, "boundary": bc.value, "dimension": dim,
                               "sector_dimensions": sectors})
    print(f"N={n} {bc.value}: dimension {dim}")


def cmd_evolve(run: Run):
    from . import evolve as ev

    cfg = run.cfg
    H = _hamiltonian(cfg)
    psi0 = _initial_state(H.basis, cfg["initial"])
    t = _times(cfg)
    tol = cfg["tolerances"]
    traj = ev.evolve_trajectory(H, psi0, t, tol["krylov_dim"], tol["krylov_tol"])
    cs = ev.connected_correlator_series(traj, cfg["evolve"]["field_mapping"])
    E = ev.energy_series(H, traj)
    norms = np.linalg.norm(traj.states, axis=1)
    run.table("correlators.csv", ["t", "d", "C"],
              [(tt, int(d), cs.values[i, a]) for i, tt in enumerate(t) for a, d in enumerate(cs.distances)])
    run.table("observables.csv", ["t", "energy", "norm"], zip(t, E, norms))
    if cfg["evolve"]["store_states"]:
        np.save(run.path("states.npy"), traj.states)
    run.sidecar("evolve.json", {"n_times": len(t), "time_unit": "natural",
                                "energy_drift": float(np.abs(E - E[0]).max()),
                                "norm_error": float(np.abs(norms - 1).max())})
    print(f"evolved {len(t)} times, energy drift {np.abs(E - E[0]).max():.2e}")


def cmd_idsf(run: Run):
    from . import spectral as S

    cfg = run.cfg
    spec = _spec(cfg)
    o = cfg["idsf"]
    eig = S.diagonalize_model(spec, momentum=o["momentum"] and o["variant"] in ("idsf", "cross", "finite_T"))
    ks = _k_values(cfg, spec.n_sites)
    omega = None
    if o["omega_max"] is not None:
        omega = S.uniform_grid(o["omega_max"], o["n_omega"] or 2001)
    psi = None
    if o["variant"] in ("state_weighted", "connected_FT"):
        psi = _initial_state(_hamiltonian(cfg).basis, cfg["initial"])
    summary = {}
    for probe in cfg["probes"]:
        if o["variant"] == "idsf":
            g = S.idsf(eig, probe, o["sigma"], ks, omega)
        else:
            g = S.dsf_variant(eig, probe, o["variant"], psi=psi, beta=o["beta"], probe_b=o["probe_b"],
                              sigma=o["sigma"], k_list=ks, omega=omega)
        name = f"{o['variant']}_{probe}"
        csv_path = run.path(f"{name}.csv")
        resid = None
        if "weight" in g.meta and o["variant"] != "cross":
            raw = np.asarray(g.meta["weight"], dtype=float)
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.abs(np.real(g.weights()) - raw) / np.where(raw > 0, raw, 1.0)
            resid = float(r.max())
        g.meta.update({"config_hash": run.hash, "sum_rule_residual": resid})
        g.to_csv(csv_path, run.path(f"{name}.json"))
        summary[probe] = {"sum_rule_residual": resid, "peaks": g.peak_frequencies().tolist()}
        print(f"{probe}: sum-rule residual {resid}")
    run.sidecar("idsf.json", {"probes": summary})


def cmd_liouville(run: Run):
    from . import liouville as lv

    o = run.cfg["liouville"]
    ks = [math.pi * x for x in o["k_over_pi"]]
    if o["mode"] == "graph":
        basis = lv.operator_basis(o["max_len"])
        for k, x in zip(ks, o["k_over_pi"]):
            for comp, g in lv.build_liouvillian(basis, k).items():
                run.path(f"graph_k{x:g}pi_{comp}.json").write_text(g.to_json() + "\n")
        run.sidecar("liouville.json", {"mode": "graph", "n_vertices": basis.n_vertices,
                                       "report": basis.report})
    elif o["mode"] == "ost":
        w = np.linspace(-o["omega_max"], o["omega_max"], o["n_omega"])
        for probe in run.cfg["probes"]:
            g = lv.ost_spectral_function(lv.OSTSpec(o["max_len"], o["gamma"], probe), ks, w)
            g.meta["config_hash"] = run.hash
            g.to_csv(run.path(f"ost_{probe}.csv"), run.path(f"ost_{probe}.json"))
        run.sidecar("liouville.json", {"mode": "ost"})
    else:
        k = np.linspace(0, 2 * math.pi, o["n_omega"])
        rows = []
        for v in o["variants"]:
            w = lv.mean_field_dispersion(v, k)[-1]
            rows += [(v, kk, ww) for kk, ww in zip(k, w)]
        run.table("meanfield.csv", ["variant", "k", "omega"], rows)
        run.sidecar("liouville.json", {"mode": "meanfield",
                                       "mean_group_velocity_A": lv.mean_group_velocity("A")})
    print(f"liouville {o['mode']} done")


def cmd_wigner(run: Run):
    from . import evolve as ev
    from . import wigner as wg

    cfg = run.cfg
    o = cfg["wigner"]
    H = _hamiltonian(cfg)
    B = H.basis
    pair = wg.quadrature_pair(B, math.pi * o["q_over_pi"] + math.pi)
    psi0 = _initial_state(B, cfg["initial"])
    t = _times(cfg)
    traj = ev.evolve_trajectory(H, psi0, t, cfg["tolerances"]["krylov_dim"], cfg["tolerances"]["krylov_tol"])
    summary = []
    for i, tt in enumerate(t):
        psi = traj.states[i]
        g = wg.wigner_distribution(psi, pair, alpha_max=o["alpha_max"], beta_max=o["alpha_max"],
                                   n_points=o["n_points"], kernel=o["kernel"], time=float(tt))
        g.to_csv(run.path(f"wigner_t{i:03d}.csv"))
        reps = wg.marginals(g, psi, pair)
        run.table(f"marginals_t{i:03d}.csv", ["axis", "x", "marginal", "reference"],
                  [(r.axis, x, m, ref) for r in reps for x, m, ref in zip(r.grid, r.marginal, r.reference)])
        meta = g.meta()
        meta.update({"tv": [r.tv_distance for r in reps], "tv_raw_binned": [r.tv_raw_binned for r in reps],
                     "max_negative": g.max_negative()})
        summary.append(meta)
    payload = {"grids": summary}
    if o["bloch"]:
        n = o["n_angles"]
        bb = wg.bloch_boundary(pair, H, np.linspace(-math.pi / 2, math.pi / 2, n), np.linspace(0, 2 * math.pi, 2 * n))
        run.table("bloch.csv", ["H", "J", "E"], bb.points.reshape(-1, 3))
        payload["bloch_degenerate"] = int(np.sum(bb.degenerate))
    run.sidecar("wigner.json", payload)
    print(f"wrote {len(t)} Wigner grids")


def cmd_entangle(run: Run):
    from . import entangle as en
    from . import evolve as ev

    cfg = run.cfg
    o = cfg["entangle"]
    H = _hamiltonian(cfg)
    n = H.basis.n_sites
    size = o["size"]
    ds = o["distances"] or list(range(size, (n // 2 if H.basis.boundary.value == "PBC" else n - size) + 1))
    traj = ev.evolve_trajectory(H, _initial_state(H.basis, cfg["initial"]), _times(cfg),
                                cfg["tolerances"]["krylov_dim"], cfg["tolerances"]["krylov_tol"])
    m = en.entanglement_map(traj, size, ds)
    run.table("entanglement.csv", ["t", "d", "mutual_information", "negativity"],
              [(t, int(d), m.mutual_information[i, a], m.negativity[i, a])
               for i, t in enumerate(m.times) for a, d in enumerate(m.distances)])
    run.sidecar("entangle.json", {"size": size, "distances": m.distances, "band_position": m.band_position()})
    print(f"entanglement map {m.negativity.shape}")


def cmd_analyze(run: Run):
    from . import analyze as an
    from . import evolve as ev
    from .hilbert import Boundary

    cfg = run.cfg
    o = cfg["analyze"]
    if o["input"]:
        bc = Boundary.parse(o["boundary"] or "OBC")
        ds = an.ingest(o["input"], bc)
    else:
        H = _hamiltonian(cfg)
        bc = Boundary.parse(o["boundary"] or H.basis.boundary)
        traj = ev.evolve_trajectory(H, _initial_state(H.basis, cfg["initial"]), _times(cfg))
        traj.meta["model"] = cfg["model"]["variant"]
        ds = an.sample_synthetic(traj, o["shots"], cfg["seed"])
        ds.write(run.path("synthetic_shots.txt"))
    payload = {"n_sites": ds.n_sites, "n_times": len(ds.times), "retention": ds.retention(),
               "flags": ds.flags, "provenance": ds.provenance}
    if "front" in o["tasks"]:
        cs = an.dataset_correlators(ds, bc)
        f = an.correlation_front(cs, window=o["window"], dataset=ds if o["bootstrap"] else None,
                                 boundary=bc, n_resamples=max(o["bootstrap"], 2), seed=cfg["seed"])
        run.table("front.csv", ["t_cycles", "mean_distance", "rms_distance", "amplitude"],
                  zip(f.times, f.mean_distance, f.rms_distance, f.amplitude))
        payload["front"] = {"velocity": f.velocity, "velocity_err": f.velocity_err, "decay": f.decay,
                            "decay_err": f.decay_err, "window": o["window"]}
    if "band" in o["tasks"]:
        qs = [math.pi * x for x in o["q_over_pi"]]
        g = an.band_reconstruction(np.asarray(ds.times) * math.pi, an.variance_series(ds, qs), qs)
        g.meta["config_hash"] = run.hash
        g.to_csv(run.path("band.csv"), run.path("band_grid.json"))
        payload["band"] = {"q": qs, "dominant_frequency": an.dominant_frequency(g)}
    if "clusters" in o["tasks"]:
        st = an.cluster_stats(ds, o["m_max"], periodic=bc is Boundary.PBC, n_resamples=o["bootstrap"],
                              seed=cfg["seed"])
        run.table("clusters.csv", ["m", "probability", "reference", "excess", "error"],
                  zip(st.m, st.probability, st.reference, st.excess, st.error))
        payload["clusters"] = {"excess": st.excess}
    run.sidecar("analyze.json", payload)
    print(f"analyzed {len(ds.times)} time blocks")


def cmd_report(run: Run):
    from . import acceptance as acc

    hashes = {}
    for p in run.cfg["report"]["inputs"]:
        for f in sorted(Path(p).glob("*.json")) if Path(p).is_dir() else [Path(p)]:
            try:
                h = json.loads(f.read_text()).get("config_hash")
            except (OSError, json.JSONDecodeError, AttributeError):
                continue
            if h:
                hashes.setdefault(h, []).append(str(f))
    if len(hashes) > 1:
        raise InvalidArgumentError(f"inputs carry {len(hashes)} different config hashes: {sorted(hashes)}")
    ids = run.cfg["report"]["criteria"] or list(acc.CRITERIA)
    unknown = [i for i in ids if i not in acc.CRITERIA]
    if unknown:
        raise InvalidArgumentError(f"unknown criteria {unknown}")
    results = []
    for i in ids:
        r = acc.run_criterion(i)
        print(r.line(), flush=True)
        results.append(r)
    rows = [(r.id, r.title, "PASS" if r.passed else "FAIL", r.detail) for r in results]
    run.table("acceptance.csv", ["id", "criterion", "status", "detail"], rows)
    run.sidecar("report.json", {"input_hashes": sorted(hashes),
                                "results": [{k: v for k, v in r.to_dict().items() if k != "seconds"}
                                            for r in results]})
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria pass")
    return 1 if run.strict and n_pass < len(results) else 0


COMMANDS = {"basis": cmd_basis, "evolve": cmd_evolve, "idsf": cmd_idsf, "liouville": cmd_liouville,
            "wigner": cmd_wigner, "entangle": cmd_entangle, "analyze": cmd_analyze, "report": cmd_report}


def build_parser():
    p = argparse.ArgumentParser(prog="rydlink", description=__doc__.split("\n\n")[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config field by dotted path (value parsed as JSON)")
    p.add_argument("--n-sites", type=int, dest="n_sites")
    p.add_argument("--boundary", choices=["PBC", "OBC", "pbc", "obc"])
    p.add_argument("--variant")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--strict", action="store_true", help="report: exit 1 when a criterion fails")
    p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.print_config:
            print(json.dumps(cfg, indent=2, sort_keys=True))
            print(f"config hash {config_hash(cfg)}")
            return 0
        run = Run(args.subcommand, cfg)
        run.strict = args.strict
        rc = COMMANDS[args.subcommand](run)
        return int(rc or 0)
    except RydlinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except MemoryError:
        print("error: out of memory", file=sys.stderr)
        return ResourceError.exit_code


if __name__ == "__main__":
    sys.exit(main())
