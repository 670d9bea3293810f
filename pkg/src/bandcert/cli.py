"""Command-line entry point and report serialization.

Report layout: a header, ``key: value`` lines, one ``bound.<name>:`` line per
certified value, free-form ``note:`` lines and a final line ``C <= x pi``
for the constant-producing commands.  Field names are documented in the README.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import __version__
from .certify import CertificationError, CertifiedValue
from .chains import (EVEN, ODD, GeometryParams, PscParams, even_chain, odd_chain,
                     psc_vanishing_details)
from .envelope import ENVELOPES, certified_sup
from .kernels import grid_values, kernel_by_name, kernel_eval
from .optimizer import family_from_spec, minimize_constant, recertify

log = logging.getLogger("bandcert")

CONFIG_ENV = "BANDCERT_CONFIG"
COMMANDS = ("kernel-eval", "envelope", "even-constant", "odd-constant", "psc-scale",
            "optimize", "verify-oracle")
FORMATS = ("report", "grid")

# flag name -> (type, default)
PARAMETERS = {
    "kernel": (str, None),
    "epsilon": (float, 0.04),
    "cap-n": (float, 7.0),
    "dim": (int, 3),
    "sigma": (float, 1.0),
    "width": (float, 1.0),
    "degree": (int, 17),
    "tol": (float, 1e-4),
    "seed": (int, 0),
    "iters": (int, 50),
    "s": (float, 0.7888),
    "t": (float, 0.0),
    "envelope": (str, "b"),
    "parity": (str, None),
    "trials": (int, 100),
    "grid-max": (float, 8.0),
    "grid-step": (float, 1.0 / 16),
    "out": (str, None),
    "format": (str, "report"),
}


class ConfigError(ValueError):
    """A configuration field failed validation; the message names the field."""


@dataclass
class RunConfig:
    command: str
    parameters: Dict[str, object] = field(default_factory=dict)
    sources: Dict[str, str] = field(default_factory=dict)

    def __getitem__(self, key):
        return self.parameters[key]

    @property
    def out(self) -> Optional[str]:
        return self.parameters.get("out")

    @property
    def fmt(self) -> str:
        return self.parameters.get("format", "report")

    def validate(self) -> "RunConfig":
        p = self.parameters
        if self.command not in COMMANDS:
            raise ConfigError(f"command: unknown command {self.command!r}")
        if p["format"] not in FORMATS:
            raise ConfigError(f"format: must be one of {FORMATS}, got {p['format']!r}")
        if p["format"] == "grid" and self.command not in ("kernel-eval", "envelope"):
            raise ConfigError(f"format: grid output is only available for kernel-eval and envelope")
        if not (0 < p["epsilon"] < 0.05):
            raise ConfigError(f"epsilon: must lie in (0, 1/20), got {p['epsilon']!r}")
        if not p["cap-n"] >= 7:
            raise ConfigError(f"cap-n: must be >= 7, got {p['cap-n']!r}")
        if not p["dim"] >= 2:
            raise ConfigError(f"dim: must be >= 2, got {p['dim']!r}")
        if not p["sigma"] > 0:
            raise ConfigError(f"sigma: must be positive, got {p['sigma']!r}")
        if not p["width"] > 0:
            raise ConfigError(f"width: must be positive, got {p['width']!r}")
        if not p["degree"] >= 1:
            raise ConfigError(f"degree: must be a positive integer, got {p['degree']!r}")
        if not p["tol"] > 0:
            raise ConfigError(f"tol: must be positive, got {p['tol']!r}")
        if not p["iters"] >= 1:
            raise ConfigError(f"iters: must be a positive integer, got {p['iters']!r}")
        if not p["trials"] >= 1:
            raise ConfigError(f"trials: must be a positive integer, got {p['trials']!r}")
        if not (p["s"] >= 0 and math.isfinite(p["s"])):
            raise ConfigError(f"s: must be finite and >= 0, got {p['s']!r}")
        if math.isnan(p["t"]):
            raise ConfigError("t: must not be NaN")
        if p["envelope"] not in ENVELOPES:
            raise ConfigError(f"envelope: must be one of {sorted(ENVELOPES)}, got {p['envelope']!r}")
        if p["parity"] not in (None, EVEN, ODD):
            raise ConfigError(f"parity: must be even or odd, got {p['parity']!r}")
        if not (p["grid-max"] > 0 and p["grid-step"] > 0):
            raise ConfigError("grid-step: grid-max and grid-step must be positive")
        k = p["kernel"]
        if k is not None:
            try:
                if k.startswith("family:"):
                    family_from_spec(k[len("family:"):])
                else:
                    kernel_by_name(k)
            except ValueError as exc:
                raise ConfigError(f"kernel: {exc}") from None
        return self

    def geometry(self) -> GeometryParams:
        return GeometryParams(self["dim"], self["sigma"], self["width"])


def read_config_file(path: str) -> Dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"config line {lineno}: expected key = value")
            key, value = (x.strip() for x in line.split("=", 1))
            key = key.replace("_", "-")
            if key not in PARAMETERS:
                raise ConfigError(f"{key}: unknown key in config file {path}")
            out[key] = value
    return out


def _convert(key: str, value) -> object:
    typ = PARAMETERS[key][0]
    if value is None:
        return None
    try:
        return typ(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r} as {typ.__name__}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bandcert",
                                 description="Certified constants for band-width index vanishing.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help=f"config file (default: ${CONFIG_ENV})")
    ap.add_argument("-v", "--verbose", action="store_true")
    for key in PARAMETERS:
        ap.add_argument(f"--{key}", dest=key.replace("-", "_"), default=None)
    return ap


def make_config(argv: Optional[List[str]] = None, environ=None) -> RunConfig:
    """Merge defaults < config file < flags and record where each value came from."""
    environ = os.environ if environ is None else environ
    args = build_parser().parse_args(argv)
    params = {k: d for k, (_, d) in PARAMETERS.items()}
    sources = {k: "default" for k in PARAMETERS}
    path = args.config or environ.get(CONFIG_ENV)
    if path:
        for k, v in read_config_file(path).items():
            params[k] = _convert(k, v)
            sources[k] = f"file:{path}"
    for k in PARAMETERS:
        v = getattr(args, k.replace("-", "_"))
        if v is not None:
            params[k] = _convert(k, v)
            sources[k] = "flag"
    cfg = RunConfig(args.command, params, sources)
    cfg.verbose = args.verbose
    return cfg


# report serialization -----------------------------------------------------------

@dataclass
class Report:
    command: str
    fields: Dict[str, str] = field(default_factory=dict)
    bounds: Dict[str, CertifiedValue] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    final: Optional[str] = None

    def dumps(self) -> str:
        lines = [f"# bandcert report", f"command: {self.command}"]
        lines += [f"{k}: {v}" for k, v in self.fields.items()]
        for k, b in self.bounds.items():
            lines.append(f"bound.{k}: value={b.value!r} radius={b.radius!r} side={b.side} "
                         f"anchor={json.dumps(b.anchor)}")
        lines += [f"note: {n}" for n in self.notes]
        if self.final is not None:
            lines.append(self.final)
        return "\n".join(lines) + "\n"


def parse_report(text: str) -> Report:
    rep = None
    for line in text.splitlines():
        if not line or line.startswith("#"):
            continue
        key, sep, rest = line.partition(": ")
        if not sep:
            if rep is None:
                raise ValueError(f"unparsable report line {line!r}")
            rep.final = line
            continue
        if key == "command":
            rep = Report(rest)
        elif rep is None:
            raise ValueError("report must start with a command line")
        elif key.startswith("bound."):
            head, _, anchor = rest.partition(" anchor=")
            parts = dict(x.split("=", 1) for x in head.split())
            rep.bounds[key[len("bound."):]] = CertifiedValue(
                float(parts["value"]), float(parts["radius"]), parts["side"], json.loads(anchor))
        elif key == "note":
            rep.notes.append(rest)
        else:
            rep.fields[key] = rest
    if rep is None:
        raise ValueError("empty report")
    return rep


def _final_line(c: CertifiedValue) -> str:
    return f"C <= {c.value:.6g} pi"


def _chain_report(cfg: RunConfig, chain, rep: Report) -> None:
    rep.fields["parity"] = chain.parity
    rep.fields["kernel"] = chain.kernel.label
    for k, v in chain.budget.to_dict().items():
        rep.fields[f"budget.{k}"] = str(v)
    for claim, bound in chain.propagation_budget:
        rep.fields[f"propagation.{claim}"] = bound
    for k, v in chain.diagnostics.items():
        rep.fields[f"diagnostic.{k}"] = repr(v)
    rep.bounds.update(chain.intermediate_bounds)
    rep.bounds["C_over_pi"] = chain.final_constant
    rep.notes += chain.notes
    geom = cfg.geometry()
    rep.fields["admissible_width"] = repr(chain.admissible_width(geom))
    rep.fields["verdict"] = "index vanishes" if chain.verdict(geom) else "inconclusive"
    rep.final = _final_line(chain.final_constant)


def _kernel(cfg: RunConfig, default: str):
    name = cfg["kernel"] or default
    if name.startswith("family:"):
        raise ConfigError("kernel: a family spec is only valid for optimize")
    return kernel_by_name(name)


def _parity(cfg: RunConfig) -> str:
    if cfg["parity"]:
        return cfg["parity"]
    return ODD if (cfg["kernel"] or "h1").lower() == "h2" else EVEN


def _grid(cfg: RunConfig) -> np.ndarray:
    return np.arange(0.0, cfg["grid-max"] + cfg["grid-step"] / 2, cfg["grid-step"])


def execute(cfg: RunConfig):
    """Run the command; returns a Report or, for grid output, an array of rows."""
    cmd = cfg.command
    rep = Report(cmd)
    if cmd == "kernel-eval":
        k = _kernel(cfg, "h1")
        if cfg.fmt == "grid":
            return grid_values(k, _grid(cfg))
        rep.fields["kernel"] = k.label
        rep.fields["t"] = repr(cfg["t"])
        rep.bounds["h(t)"] = kernel_eval(k, cfg["t"])
    elif cmd == "envelope":
        k = _kernel(cfg, "h1")
        env = ENVELOPES[cfg["envelope"]]
        if cfg.fmt == "grid":
            rows = []
            for s in _grid(cfg):
                v = certified_sup(k, env, float(s))
                rows.append((s, v.value, v.radius))
            return np.array(rows)
        rep.fields["kernel"] = k.label
        rep.fields["envelope"] = env.name
        rep.fields["s"] = repr(cfg["s"])
        rep.bounds[f"sup_{env.name}"] = certified_sup(k, env, cfg["s"])
    elif cmd == "even-constant":
        chain = even_chain(cfg.geometry(), _kernel(cfg, "h1"), s_tol=cfg["tol"])
        _chain_report(cfg, chain, rep)
    elif cmd == "odd-constant":
        chain = odd_chain(cfg.geometry(), _kernel(cfg, "h2"), cfg["degree"], N=cfg["cap-n"],
                          s_tol=cfg["tol"])
        _chain_report(cfg, chain, rep)
    elif cmd == "psc-scale":
        parity = _parity(cfg)
        k = _kernel(cfg, "h1" if parity == EVEN else "h2")
        pr = psc_vanishing_details(PscParams(cfg["epsilon"], cfg["cap-n"], k, parity))
        rep.fields.update(parity=parity, kernel=k.label, target=repr(pr.target),
                          degree_factor=str(pr.degree_factor), m=str(pr.m))
        rep.bounds["u0"] = pr.u0
        rep.bounds["omega0"] = pr.omega0
        for c in (0.5, 1.0, 2.0):
            chk = pr.check(c)
            rep.fields[f"check.c={c}"] = (f"sup={chk['sup']!r} threshold={chk['threshold']!r} "
                                          f"holds={chk['holds']} propagation={chk['propagation']!r}")
            if not chk["holds"]:
                raise CertificationError(f"psc check failed at c={c}: {chk}")
    elif cmd == "optimize":
        parity = _parity(cfg)
        spec = cfg["kernel"] or "family:sinc-power"
        if not spec.startswith("family:"):
            raise ConfigError("kernel: optimize needs family:<spec>, e.g. family:sinc-power")
        fam = family_from_spec(spec[len("family:"):])
        res = minimize_constant(fam, parity, cfg["iters"], seed=cfg["seed"])
        re = recertify(res, fam, parity)
        rep.fields.update(parity=parity, family=fam.describe(),
                          best_kernel=res.best.kernel.label,
                          best_params=repr(tuple(res.best_params)),
                          trace_length=str(len(res.trace)))
        for k, v in res.best_budget.to_dict().items():
            rep.fields[f"budget.{k}"] = str(v)
        if res.baseline is not None:
            rep.bounds["baseline_C_over_pi"] = res.baseline.final_constant
        rep.bounds["recertified_C_over_pi"] = re.final_constant
        rep.bounds["C_over_pi"] = res.best.final_constant
        if cfg.out:
            res.write_trace(cfg.out + ".trace.jsonl")
        rep.final = _final_line(res.best.final_constant)
    elif cmd == "verify-oracle":
        _verify_oracle(cfg, rep)
    return rep


def _verify_oracle(cfg: RunConfig, rep: Report) -> None:
    from . import oracle as o
    rng = np.random.default_rng(cfg["seed"])
    eps, N, n = cfg["epsilon"], cfg["cap-n"], cfg["trials"]
    holo = perturb = gap = 0
    worst_idem = worst_gap = 0.0
    for _ in range(n):
        e = o.random_quasi_idempotent(rng, eps=eps, N=N)
        h = o.check_holo(e)
        worst_idem = max(worst_idem, h.idempotence)
        holo += not (h.ok and h.idempotence <= 1e-10)
        for q in (e, o.random_quasi_invertible(rng, eps=eps, N=N)):
            v = o.perturb_check(q, o.random_perturbation(rng, q))
            perturb += not (v.same_class and v.path_ok)
        m = o.random_gapped_model(rng)
        deg = int(rng.integers(1, 7))
        region = [i for i in m.gap_region if m.distance_to_complement([i]) > deg * m.band]
        lhs, rhs = o.gap_norm_estimate(m, rng.standard_normal(deg + 1), region)
        worst_gap = max(worst_gap, lhs - rhs)
        gap += not lhs <= rhs + 1e-9
    seq, _ = o.vanishing_sequence()
    decreasing = bool(np.all(np.diff(seq) < 0))
    rep.fields.update(trials=str(n), holo_violations=str(holo), worst_idempotence=repr(worst_idem),
                      perturbation_violations=str(perturb), gap_violations=str(gap),
                      worst_gap_excess=repr(worst_gap),
                      vanishing_sequence=" ".join(repr(float(x)) for x in seq),
                      vanishing_decreasing=str(decreasing))
    failed = holo + perturb + gap
    if failed or not decreasing:
        raise CertificationError(f"oracle violations: holo={holo} perturbation={perturb} "
                                 f"gap={gap} decreasing={decreasing}")


def run(cfg: RunConfig, stream=None) -> int:
    stream = sys.stdout if stream is None else stream
    t0 = time.perf_counter()
    try:
        cfg.validate()
        result = execute(cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CertificationError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if isinstance(result, np.ndarray):
        text = "t,value,radius\n" + "\n".join(",".join(repr(float(x)) for x in row)
                                             for row in result) + "\n"
    else:
        result.fields = {"version": __version__,
                         "wall_clock_s": f"{time.perf_counter() - t0:.3f}",
                         **{f"config.{k}": f"{cfg.parameters[k]!r} ({cfg.sources[k]})"
                            for k in PARAMETERS},
                         **result.fields}
        text = result.dumps()
    if cfg.out:
        with open(cfg.out, "w") as fh:
            fh.write(text)
    stream.write(text)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    try:
        cfg = make_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO if getattr(cfg, "verbose", False) else logging.WARNING,
                        format="%(name)s: %(message)s")
    for k in PARAMETERS:
        log.info("%s = %r (%s)", k, cfg.parameters[k], cfg.sources[k])
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
