"""Command-line front end.

Commands: ``count``, ``check``, ``abstract``, ``synthesize``, ``simulate``,
``bisim-check``.  Every command prints one JSON document on stdout; errors go
to stderr with a distinct exit code per error class:

====  ==========================================
code  meaning
====  ==========================================
0     success (``check``: verdict PASS)
1     ``check`` verdict FAIL, or other library error
2     invalid input or configuration
3     numeric-domain error (non-finite state)
4     synthesis failure (initial state losing)
5     refinement error during simulation
6     size cap exceeded
====  ==========================================
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import resource
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from .abstraction import ParameterVector, build_model, check_params, model_counts, suggest_params
from .altbisim import FiniteTS, is_aea_bisim, largest_aea_bisim
from .errors import InvalidInputError, ParseError, SymctlError
from .flow import FlowConfig
from .lyapunov import (
    LyapunovCert,
    cert_from_dict,
    check_condition_i,
    check_condition_ii,
    gamma_sup,
    pendulum_cert,
    pendulum_contraction_cert,
)
from .synthesis import SpecMonitor, pendulum_spec, simulate_closed_loop, synthesize, verify_closed_loop
from .system import PRESETS, DisturbanceSignal, SystemDef, constant_disturbance, cosine_disturbance, system_from_dict

DEFAULT_SEED = 20110101
PUBLISHED_PARAMS = {"tau": 1.0, "mu_x": "pi/2000", "mu_u": 0.001, "mu_d": 1.43e-4, "N": 0, "theta_d": 0.007}
DISTURBANCE_NOTE = (
    "disturbance count uses lattice spacing 2*mu_d with closed membership; "
    "the published figure for these parameters (6366) is not reproduced by this convention"
)


@dataclass
class RunConfig:
    """Everything a command needs, after validation."""

    system: SystemDef
    params: ParameterVector
    cert: LyapunovCert
    epsilon: float
    spec: SpecMonitor
    disturbance: str = "cosine"
    steps: int = 20
    substeps: int = 64
    name: str = "custom"
    echo: dict = field(default_factory=dict)

    def flow(self) -> FlowConfig:
        return FlowConfig(self.params.tau, self.substeps)

    def signal(self) -> DisturbanceSignal:
        if self.disturbance == "cosine":
            return cosine_disturbance(self.system)
        if self.disturbance == "zero":
            return constant_disturbance(np.zeros(self.system.l))
        raise InvalidInputError(f"unknown disturbance {self.disturbance!r} (expected 'cosine' or 'zero')")


def preset_config(name: str) -> RunConfig:
    """``pendulum``: the published data.  ``pendulum-coarse``: desk-scale parameters with a sound certificate."""
    sys_ = PRESETS["pendulum"]()
    if name == "pendulum":
        P = ParameterVector.from_dict(PUBLISHED_PARAMS)
        return RunConfig(sys_, P, pendulum_cert(), 0.125, pendulum_spec(P.tau), name=name, echo={"params": PUBLISHED_PARAMS})
    if name == "pendulum-coarse":
        cert = pendulum_contraction_cert()
        P = suggest_params(cert, sys_, 1.5, 1.0)
        return RunConfig(sys_, P, cert, 1.5, pendulum_spec(P.tau), name=name, echo={"params": P.to_dict()})
    raise InvalidInputError(f"unknown preset {name!r} (available: pendulum, pendulum-coarse)")


def config_from_dict(doc: dict) -> RunConfig:
    """JSON run configuration.

    Keys: ``system`` (object, or ``"preset": name``), ``params`` (or
    ``"suggest": true`` with ``epsilon`` and ``tau``), ``certificate`` (object
    or one of ``"published"``, ``"contraction"``), ``epsilon``, ``spec``,
    ``disturbance`` (``"cosine"`` or ``"zero"``), ``steps``, ``substeps``.
    """
    if "preset" in doc and "system" not in doc:
        base = preset_config(doc["preset"])
        sys_ = base.system
    else:
        if "system" not in doc:
            raise InvalidInputError("config needs 'system' or 'preset'")
        sys_ = PRESETS[doc["system"]]() if isinstance(doc["system"], str) else system_from_dict(doc["system"])
        base = None
    c = doc.get("certificate", "contraction" if base is None else None)
    if c is None:
        cert = base.cert
    elif c == "published":
        cert = pendulum_cert()
    elif c == "contraction":
        cert = pendulum_contraction_cert()
    elif isinstance(c, dict):
        cert = cert_from_dict(c)
    else:
        raise InvalidInputError(f"unknown certificate {c!r}")
    eps = float(doc.get("epsilon", base.epsilon if base else 0.0))
    if not eps > 0:
        raise InvalidInputError("config needs a positive 'epsilon'")
    if doc.get("suggest"):
        P = suggest_params(cert, sys_, eps, float(doc.get("tau", 1.0)))
    elif "params" in doc:
        P = ParameterVector.from_dict(doc["params"])
    elif base is not None:
        P = base.params
    else:
        raise InvalidInputError("config needs 'params' or 'suggest': true")
    P.validate(sys_)
    if "spec" in doc:
        spec = SpecMonitor.from_dict(doc["spec"], P.tau)
    else:
        spec = pendulum_spec(P.tau) if base is not None or sys_.name == "pendulum" else None
        if spec is None:
            raise InvalidInputError("config needs a 'spec' for non-pendulum systems")
    return RunConfig(
        sys_, P, cert, eps, spec,
        str(doc.get("disturbance", "cosine")), int(doc.get("steps", 20)), int(doc.get("substeps", 64)),
        str(doc.get("name", "custom")), {"params": doc.get("params", P.to_dict())},
    )


def load_config(args) -> RunConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise InvalidInputError(f"cannot read config: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as err:
            raise ParseError(f"invalid JSON: {err.msg}", offset=err.pos, line=err.lineno, column=err.colno) from err
        return config_from_dict(doc)
    return preset_config(args.preset)


def _stats(t0: float) -> dict:
    return {"wall_seconds": round(time.perf_counter() - t0, 3), "max_rss_mb": round(resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024, 1)}


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_count(cfg: RunConfig, args) -> dict:
    counts = model_counts(cfg.system, cfg.params, cap=1e12)
    out = {"states": counts.states, "controls": counts.controls, "disturbances": counts.disturbances, "params": cfg.echo.get("params")}
    if cfg.name == "pendulum":
        out["note"] = DISTURBANCE_NOTE
    return out


def cmd_check(cfg: RunConfig, args) -> dict:
    rep = check_params(cfg.params, cfg.cert, cfg.system, cfg.epsilon)
    out = {"epsilon": cfg.epsilon, "params": cfg.echo.get("params"), "certificate": cfg.cert.name, **rep.to_dict()}
    if cfg.cert.gamma is None:
        alt = check_params(cfg.params, cfg.cert, cfg.system, cfg.epsilon, gamma_norm="inf")
        out["precision_lhs_inf_gamma"] = alt.lhs
        out["gamma_slope_inf"] = alt.gamma_slope
    ci = check_condition_i(cfg.cert, cfg.system.state_box, seed=args.seed)
    cii = check_condition_ii(cfg.cert, cfg.system, seed=args.seed)
    out["certificate_checks"] = {"condition_i": ci.to_dict(), "condition_ii": cii.to_dict()}
    if not cii.passed:
        out["notes"].append("the certificate's dissipation inequality fails on sampled points; the precision margin is not meaningful")
    return out


def _build(cfg: RunConfig, args):
    return build_model(cfg.system, cfg.params, cfg.flow(), args.mode, args.threads)


def cmd_abstract(cfg: RunConfig, args) -> dict:
    t0 = time.perf_counter()
    model = _build(cfg, args)
    out = {"model": model.summary(), "digest": model.digest()}
    if args.out:
        path = os.path.join(_outdir(args), "model.bin")
        model.save(path)
        out["file"] = path
    out["stats"] = _stats(t0)
    return out


def cmd_synthesize(cfg: RunConfig, args) -> dict:
    t0 = time.perf_counter()
    model = _build(cfg, args)
    graph = model.to_game()
    res = synthesize(model, cfg.spec, graph=graph)
    ver = verify_closed_loop(graph, res, 8)
    out = {
        "model": model.summary(),
        "model_digest": model.digest(),
        "controller_digest": res.controller.digest(),
        "winning_product_states": int(res.controller.winning.sum()),
        "initial": {"state": int(res.q0), "monitor": cfg.spec.describe(res.m0)},
        "verification": {"horizon": ver.horizon, "ok": ver.ok, "layer_sizes": ver.layer_sizes, "failure": ver.failure},
    }
    if args.out:
        path = os.path.join(_outdir(args), "controller.bin")
        res.controller.save(path)
        out["file"] = path
    out["stats"] = _stats(t0)
    return out


def cmd_simulate(cfg: RunConfig, args) -> dict:
    t0 = time.perf_counter()
    model = _build(cfg, args)
    graph = model.to_game()
    res = synthesize(model, cfg.spec, graph=graph)
    x0 = cfg.spec.x0 if cfg.spec.x0 is not None else np.zeros(cfg.system.n)
    tr = simulate_closed_loop(model, res, cfg.cert, cfg.signal(), x0, cfg.steps, cfg.spec)
    buf = io.StringIO()
    tr.to_csv(buf)
    out = {
        "steps": len(tr.times) - 1,
        "modes": tr.modes,
        "satisfied": tr.satisfied,
        "reached_final_mode": tr.reached_final,
        "max_distance": float(tr.distance.max()),
        "epsilon": cfg.epsilon,
        "within_epsilon": bool(np.all(tr.distance <= cfg.epsilon)),
    }
    if args.out:
        path = os.path.join(_outdir(args), "trace.csv")
        with open(path, "w") as fh:
            fh.write(buf.getvalue())
        cpath = os.path.join(args.out, "controller.bin")
        res.controller.save(cpath)
        out["files"] = [cpath, path]
    out["stats"] = _stats(t0)
    return out


def cmd_bisim_check(args) -> dict:
    """``--config`` JSON: ``{"T1": ts, "T2": ts, "epsilon": e, "relation": [[q1, q2], ...] (optional)}``."""
    if not args.config:
        raise InvalidInputError("bisim-check needs --config")
    with open(args.config) as fh:
        doc = json.load(fh)
    T1 = FiniteTS.from_dict(doc["T1"])
    T2 = FiniteTS.from_dict(doc["T2"])
    eps = float(doc.get("epsilon", 0.0))
    out = {"epsilon": eps}
    if "relation" in doc:
        v = is_aea_bisim(T1, T2, [tuple(p) for p in doc["relation"]], eps)
        out["relation_valid"] = v.holds
        out["counterexample"] = v.counterexample
    big = largest_aea_bisim(T1, T2, eps)
    out["largest_relation"] = big.pairs()
    out["bisimilar"] = big.bisimilar
    return out


COMMANDS = {
    "count": cmd_count,
    "check": cmd_check,
    "abstract": cmd_abstract,
    "synthesize": cmd_synthesize,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symctl", description="Symbolic models and controller synthesis for disturbed control systems.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in list(COMMANDS) + ["bisim-check"]:
        s = sub.add_parser(name)
        s.add_argument("--config", help="JSON run configuration")
        s.add_argument("--preset", default="pendulum-coarse", help="pendulum | pendulum-coarse (default)")
        s.add_argument("--threads", type=int, default=1)
        s.add_argument("--seed", type=int, default=DEFAULT_SEED)
        s.add_argument("--out", help="output directory for files")
        s.add_argument("--mode", choices=["materialized", "onthefly"], default="materialized")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise InvalidInputError("--threads must be at least 1")
        if args.command == "bisim-check":
            out = cmd_bisim_check(args)
            code = 0
        else:
            cfg = load_config(args)
            out = COMMANDS[args.command](cfg, args)
            code = 0 if args.command != "check" or out["verdict"] == "PASS" else 1
            if code:
                print(f"check: violated inequalities {out['violated']}", file=sys.stderr)
    except SymctlError as err:
        print(f"error ({type(err).__name__}): {err}", file=sys.stderr)
        return err.exit_code
    except (OSError, KeyError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return InvalidInputError.exit_code
    json.dump(out, sys.stdout, indent=2, sort_keys=True, default=_json_default)
    sys.stdout.write("\n")
    return code


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)}")
