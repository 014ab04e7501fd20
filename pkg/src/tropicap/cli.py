"""Command-line front end and the JSON documents it reads and writes.

Every number is written as a decimal string ("3", "-7/2"); binary floats never
appear. Each document carries ``digest`` = sha256 of its canonical form
(sorted keys, compact separators, the digest field itself left out), and
derived documents list the digests of their parents.

Exit codes: 0 ok, 1 a balancing or certificate check failed, 2 retry budget
exhausted, 3 parse or configuration error, 4 internal invariant breach
(including digest mismatches).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

from tropicap import convexity, ratlin
from tropicap.construction import (
    CoverEdge,
    CoverGraph,
    DimensionBound,
    InvalidInstance,
    InvariantBreach,
    LinkGraph,
    RetriesExhausted,
    build_counterexample,
    witness_pair,
)
from tropicap.tropical import WeightedFan, check_balancing, product_with_lineality

FAN_FORMAT = "tropicap.fan/1"
PIPELINE_FORMAT = "tropicap.pipeline/1"
CERTIFICATE_FORMAT = "tropicap.certificate/1"

EXIT_OK = 0
EXIT_CHECK = 1
EXIT_RETRIES = 2
EXIT_CONFIG = 3
EXIT_BREACH = 4


class ParseError(ValueError):
    pass


class ConfigError(ValueError):
    pass


class DigestMismatch(InvariantBreach):
    pass


# ---------------------------------------------------------------------------
# numbers and digests


def num(x) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def parse_num(s) -> Fraction:
    if not isinstance(s, str):
        raise ParseError(f"expected a decimal string, got {s!r}")
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ParseError(f"bad number {s!r}") from exc


def parse_int(s) -> int:
    x = parse_num(s)
    if x.denominator != 1:
        raise ParseError(f"expected an integer, got {s!r}")
    return x.numerator


def _ints(xs) -> list[str]:
    return [num(x) for x in xs]


def canonical(doc: dict) -> bytes:
    body = {k: v for k, v in doc.items() if k != "digest"}
    return json.dumps(body, sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()


def digest_of(doc: dict) -> str:
    return hashlib.sha256(canonical(doc)).hexdigest()


def seal(doc: dict) -> dict:
    doc = dict(doc)
    doc["digest"] = digest_of(doc)
    return doc


def check_digest(doc: dict, what: str) -> None:
    if not isinstance(doc.get("digest"), str):
        raise ParseError(f"{what}: no digest")
    if doc["digest"] != digest_of(doc):
        raise DigestMismatch(f"{what}: stored digest does not match contents")


def dump(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=True) + "\n"


def write(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump(doc))


def load(path: Path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: top level must be an object")
    return doc


# ---------------------------------------------------------------------------
# documents


@dataclass
class FanDocument:
    ambient_dim: int
    dim: int
    rays: list
    lineality: list
    cones: list  # (sorted ray indices, weight)
    provenance: dict = field(default_factory=dict)
    version: str = FAN_FORMAT

    @classmethod
    def from_fan(cls, f: WeightedFan, provenance: dict | None = None) -> "FanDocument":
        cones = sorted((sorted(c), w) for c, w in f.cones.items())
        return cls(f.ambient_dim, f.dim, list(f.rays), list(f.lineality), cones, dict(provenance or {}))

    def to_fan(self) -> WeightedFan:
        return WeightedFan(
            self.ambient_dim, self.dim, self.rays, {frozenset(c): w for c, w in self.cones}, self.lineality
        )

    def to_json(self) -> dict:
        return seal(
            {
                "format": self.version,
                "kind": "fan",
                "ambient_dim": num(self.ambient_dim),
                "dim": num(self.dim),
                "rays": [_ints(r) for r in self.rays],
                "lineality": [_ints(v) for v in self.lineality],
                "cones": [{"rays": _ints(c), "weight": num(w)} for c, w in self.cones],
                "provenance": self.provenance,
            }
        )

    @classmethod
    def from_json(cls, doc: dict) -> "FanDocument":
        if doc.get("format") != FAN_FORMAT or doc.get("kind") != "fan":
            raise ParseError(f"not a fan document: {doc.get('format')!r}")
        try:
            n = parse_int(doc["ambient_dim"])
            rays = [tuple(parse_int(x) for x in r) for r in doc["rays"]]
            lin = [tuple(parse_int(x) for x in v) for v in doc["lineality"]]
            cones = [([parse_int(i) for i in c["rays"]], parse_num(c["weight"])) for c in doc["cones"]]
            out = cls(n, parse_int(doc["dim"]), rays, lin, cones, doc.get("provenance", {}))
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed fan document: {exc}") from exc
        if any(len(r) != n for r in rays + lin):
            raise ParseError("vector length differs from ambient_dim")
        if any(i < 0 or i >= len(rays) for c, _ in cones for i in c):
            raise ParseError("cone refers to a missing ray")
        return out


def fan_json(f: WeightedFan, provenance: dict | None = None) -> dict:
    return FanDocument.from_fan(f, provenance).to_json()


def read_fan(doc: dict, what: str = "fan") -> WeightedFan:
    check_digest(doc, what)
    return FanDocument.from_json(doc).to_fan()


@dataclass
class RunConfig:
    k: int = 2
    n: int = 4
    seed: int = 0
    base_budget: int = 64
    perturb_budget: int = 16
    denom: int = 64
    trials: int = 10_000
    out: Path = Path(".")

    def validate(self) -> None:
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if self.n - self.k < 2:
            raise DimensionBound(
                f"codimension {self.n - self.k} < 2: the 2-dimensional factor cannot be embedded in R^{self.n - self.k + 2}"
            )
        if not 0 <= self.seed < 1 << 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if min(self.base_budget, self.perturb_budget, self.denom, self.trials) < 1:
            raise ConfigError("budgets, denominator bound and trials must be positive")

    def recipe(self) -> dict:
        """The part of the config that determines the output bytes."""
        return {
            "k": num(self.k),
            "n": num(self.n),
            "seed": num(self.seed),
            "base_budget": num(self.base_budget),
            "perturb_budget": num(self.perturb_budget),
            "denom": num(self.denom),
        }


def _jsonable(x) -> Any:
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, (int, Fraction)):
        return num(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in sorted(x.items(), key=lambda kv: str(kv[0]))}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    raise TypeError(f"cannot serialize {type(x).__name__}")


def pipeline_json(state, config: RunConfig, fan_digest: str) -> dict:
    cover = state.cover
    v, v_prime, psi = witness_pair(state)
    factor = fan_json(state.F2, {"command": "build", "seed": num(config.seed), "parents": [], "role": "factor"})
    return seal(
        {
            "format": PIPELINE_FORMAT,
            "kind": "pipeline",
            "config": config.recipe(),
            "base": {
                "flags": {"l_normal": _ints(state.flags.l_normal), "i_normal": _ints(state.flags.i_normal)},
                "circuit": _jsonable(state.circuit),
                "polygons": _jsonable(state.polygons),
                "crossing": _jsonable(state.crossing),
                "psi_zero": _jsonable(state.psi_zero),
                "zero_weight_cones": _jsonable(state.zero_weight_cones),
            },
            "cover": {
                "base_vertices": _jsonable(cover.base.vertices),
                "base_edges": _jsonable(cover.base.edges),
                "edges": [[num(e.u), num(e.v), e.crossing, num(e.origin)] for e in cover.edges],
                "sheet_swap": _jsonable(cover.sheet_swap),
            },
            "witness": {
                "V": _ints(v),
                "V_prime": _ints(v_prime),
                "psi": [num(x) for x in psi],
            },
            "retries": _jsonable(state.retries),
            "perturbation": _jsonable(state.perturbation),
            "checks": _jsonable(state.checks),
            "factor": factor,
            "fan_digest": fan_digest,
            "provenance": {"command": "build", "seed": num(config.seed), "parents": [fan_digest, factor["digest"]]},
        }
    )


def read_cover(doc: dict) -> CoverGraph:
    try:
        verts = [parse_int(x) for x in doc["base_vertices"]]
        base_edges = [tuple(parse_int(x) for x in e) for e in doc["base_edges"]]
        edges = [CoverEdge(parse_int(u), parse_int(v), bool(c), parse_int(o)) for u, v, c, o in doc["edges"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed cover: {exc}") from exc
    return CoverGraph(LinkGraph(verts, base_edges), edges)


def certificate_json(cert: convexity.Certificate, provenance: dict) -> dict:
    d = lambda x: None if x is None else num(x)
    return seal(
        {
            "format": CERTIFICATE_FORMAT,
            "kind": "certificate",
            "status": cert.status,
            "valid": cert.valid,
            "balanced": cert.balanced,
            "cover_connected": cert.cover_connected,
            "cut_components": num(cert.cut_components),
            "non_convexity": cert.non_convexity,
            "weight_space_dim": num(cert.weight_space_dim),
            "positive": cert.positive,
            "inertia": {"n_plus": num(cert.inertia.n_plus), "n_zero": num(cert.inertia.n_zero), "n_minus": num(cert.inertia.n_minus)},
            "hodge_violation": cert.hodge_violation,
            "degrees": {"omega_sq": d(cert.deg_omega_sq), "omega_prime_sq": d(cert.deg_omega_prime_sq), "mixed": d(cert.deg_mixed)},
            "omega": _jsonable(cert.omega),
            "omega_prime": _jsonable(cert.omega_prime),
            "meta": {"k": num(cert.k), "n": num(cert.n), "seed": num(cert.seed), "ambient_dim": num(cert.ambient_dim)},
            "digests": cert.digests,
            "provenance": provenance,
        }
    )


# ---------------------------------------------------------------------------
# commands
#
# Each returns an exit code; expected failures raise and are mapped in main().


def cmd_build(config: RunConfig) -> int:
    config.validate()
    state, fk = build_counterexample(
        config.k, config.n, config.seed, config.base_budget, config.perturb_budget, config.denom
    )
    fan = fan_json(fk, {"command": "build", "seed": num(config.seed), "parents": [], "config": config.recipe()})
    pipe = pipeline_json(state, config, fan["digest"])
    write(config.out / "fan.json", fan)
    write(config.out / "pipeline.json", pipe)
    print(json.dumps({"fan": str(config.out / "fan.json"), "pipeline": str(config.out / "pipeline.json"),
                      "fan_digest": fan["digest"], "pipeline_digest": pipe["digest"]}, sort_keys=True))
    return EXIT_OK


def cmd_verify(path: Path) -> int:
    f = read_fan(load(path), str(path))
    report = check_balancing(f)
    out = {
        "balanced": report.passed,
        "faces": num(len(report.entries)),
        "failures": [{"face": _ints(sorted(e.face)), "defect": _ints(e.defect)} for e in report.failures()],
    }
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK if report.passed else EXIT_CHECK


def _certify_pipeline(doc: dict, fan_path: Path | None) -> tuple[convexity.Certificate, dict]:
    check_digest(doc, "pipeline")
    f2 = read_fan(doc["factor"], "factor")
    cfg = doc["config"]
    k, n, seed = parse_int(cfg["k"]), parse_int(cfg["n"]), parse_int(cfg["seed"])
    if fan_path is None:
        raise ParseError("pipeline certification needs the fan document")
    fan_doc = load(fan_path)
    check_digest(fan_doc, str(fan_path))
    if fan_doc["digest"] != doc["fan_digest"]:
        raise DigestMismatch("fan document is not the one this pipeline produced")
    fk = read_fan(fan_doc)
    if fk.cones != product_with_lineality(f2, k - 2).cones:
        raise InvariantBreach("fan is not R^(k-2) times the stored factor")
    w = doc["witness"]
    cert = convexity.certify(
        f2,
        read_cover(doc["cover"]),
        [parse_int(x) for x in w["V"]],
        [parse_int(x) for x in w["V_prime"]],
        [parse_num(x) for x in w["psi"]],
        product=fk,
        k=k,
        n=n,
        seed=seed,
    )
    cert.digests = {"pipeline": doc["digest"], "fan": fan_doc["digest"], "factor": doc["factor"]["digest"]}
    return cert, {"command": "certify", "seed": num(seed), "parents": [doc["digest"], fan_doc["digest"]]}


def cmd_certify(path: Path, out: Path | None = None, fan_path: Path | None = None) -> int:
    """Certify a pipeline (with its sibling fan.json) or a bare fan document."""
    doc = load(path)
    if doc.get("kind") == "pipeline":
        if doc.get("format") != PIPELINE_FORMAT:
            raise ParseError(f"unknown pipeline format {doc.get('format')!r}")
        cert, prov = _certify_pipeline(doc, fan_path or Path(path).with_name("fan.json"))
    else:
        f = read_fan(doc, str(path))
        lin = len(f.lineality)
        cert = convexity.certify(f, k=f.dim, n=f.ambient_dim, seed=0)
        cert.digests = {"fan": doc["digest"]}
        prov = {"command": "certify", "seed": "0", "parents": [doc["digest"]], "lineality": num(lin)}
    res = certificate_json(cert, prov)
    text = dump(res)
    if out is not None:
        write(out, res)
    sys.stdout.write(text)
    return EXIT_OK if cert.valid else EXIT_CHECK


def cmd_caps(path: Path, dim: int | None = None, trials: int = 10_000, seed: int = 0) -> int:
    f = read_fan(load(path), str(path))
    if dim is None:
        dim = f.ambient_dim - f.dim
    if dim < 1 or trials < 1:
        raise ConfigError("--dim and --trials must be positive")
    cap = convexity.find_supporting_cap(f, dim, trials, seed)
    if cap is None:
        print(f"none found in {trials} trials")
        return EXIT_OK
    print(json.dumps({"cap": {
        "center": _ints(cap.center), "basis": [_ints(b) for b in cap.basis], "radius": num(cap.radius),
        "escape": _ints(cap.escape), "epsilon": num(cap.epsilon), "witness": _jsonable(cap.witness),
    }}, sort_keys=True))
    return EXIT_OK


def cmd_inertia(path: Path) -> int:
    f = read_fan(load(path), str(path))
    m = convexity.intersection_matrix(f)
    t = ratlin.inertia(m)
    print(json.dumps({"n_plus": num(t.n_plus), "n_zero": num(t.n_zero), "n_minus": num(t.n_minus),
                      "rays": num(len(m))}, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tropicap", description="Exact balanced fans with non-convex complements.")
    sub = p.add_subparsers(dest="command", required=True)
    b = sub.add_parser("build", help="run the pipeline and write pipeline.json and fan.json")
    b.add_argument("--k", type=int, default=2)
    b.add_argument("--n", type=int, default=4)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--base-budget", type=int, default=64)
    b.add_argument("--perturb-budget", type=int, default=16)
    b.add_argument("--denom", type=int, default=64)
    b.add_argument("--out", type=Path, default=Path("."))
    v = sub.add_parser("verify", help="check balancing of a fan document")
    v.add_argument("fan", type=Path)
    c = sub.add_parser("certify", help="certify a pipeline (or a bare fan)")
    c.add_argument("pipeline", type=Path)
    c.add_argument("--fan", type=Path, default=None, help="defaults to fan.json next to the pipeline")
    c.add_argument("--out", type=Path, default=None)
    cp = sub.add_parser("caps", help="search for a supporting cap")
    cp.add_argument("fan", type=Path)
    cp.add_argument("--dim", type=int, default=None, help="defaults to the codimension")
    cp.add_argument("--trials", type=int, default=10_000)
    cp.add_argument("--seed", type=int, default=0)
    i = sub.add_parser("inertia", help="inertia of the intersection matrix of a 2-fan")
    i.add_argument("fan", type=Path)
    return p


def _fail(code: int, exc: BaseException) -> int:
    print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit": code}, sort_keys=True), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        threads = os.environ.get("TROPICAP_THREADS", "1")
        if not threads.isdigit() or int(threads) < 1:
            raise ConfigError(f"TROPICAP_THREADS must be a positive integer, got {threads!r}")
        if args.command == "build":
            cfg = RunConfig(args.k, args.n, args.seed, args.base_budget, args.perturb_budget, args.denom, out=args.out)
            return cmd_build(cfg)
        if args.command == "verify":
            return cmd_verify(args.fan)
        if args.command == "certify":
            return cmd_certify(args.pipeline, args.out, args.fan)
        if args.command == "caps":
            return cmd_caps(args.fan, args.dim, args.trials, args.seed)
        return cmd_inertia(args.fan)
    except RetriesExhausted as exc:
        return _fail(EXIT_RETRIES, exc)
    except InvariantBreach as exc:
        return _fail(EXIT_BREACH, exc)
    except (ParseError, ConfigError, DimensionBound, InvalidInstance, KeyError, ValueError, TypeError) as exc:
        return _fail(EXIT_CONFIG, exc)


if __name__ == "__main__":
    sys.exit(main())
