"""Command-line batch tool: ``bergman-spectra <command> --config <path>``.

A job is one JSON document::

    {
      "n": 2, "m": 3,
      "group": [1, 1],                      # or "torus" / "unitary"; default: the symbol's own group
      "symbol": {"family": "coordinate_weight", "parameters": {"i": 1}},
      "method": {"quadrature": {"order": 64}},          # or {"monte_carlo": {"count": 1000000, "seed": 7}}
      "tolerances": {"closed_form": 1e-8, "sigma": 4.0},
      "output": {"path": "out.json", "format": "json"}
    }

``verify`` also reads an optional ``"partner"`` symbol, ``average`` an
``"average"`` block and ``decompose`` an optional ``"commutant"`` block.

Exit status: 0 on success, 1 on an invalid config (diagnostics are printed
to stderr as JSON), 2 when a numerical method does not converge, 3 when
``verify`` ran but a check failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .bergman import SpaceParams
from .quadrature import ConvergenceError, QuadratureSpec
from .representation import average_operator, commutant_analysis, isotypic_decomposition
from .symbols import CATALOGUE, BlockPartition, Symbol, radialize_block, radialize_torus, symbol_from_spec
from .toeplitz import (
    SIGMA,
    MonteCarlo,
    block_radial_spectrum,
    spectrum_vs_matrix,
    toeplitz_matrix,
)

COMMANDS = ("spectrum", "matrix", "decompose", "verify", "average")
FORMATS = ("json", "csv")
DEFAULT_ORDER = 64
DEFAULT_MC_COUNT = 1_000_000
DEFAULT_TOLERANCE = 1e-8

EXIT_OK, EXIT_INVALID, EXIT_NONCONVERGENCE, EXIT_CHECK_FAILED = 0, 1, 2, 3


@dataclass(frozen=True)
class Diagnostic:
    field: str
    message: str

    def to_dict(self) -> dict:
        return {"field": self.field, "message": self.message}


@dataclass(frozen=True)
class JobConfig:
    """A validated job with defaults applied."""

    command: str | None
    params: SpaceParams
    partition: BlockPartition
    symbol: Symbol | None
    symbol_spec: Mapping | None
    quadrature: QuadratureSpec
    monte_carlo: MonteCarlo | None
    sigma: float = SIGMA
    output_path: str | None = None
    output_format: str = "json"
    partner: Symbol | None = None
    average: Mapping = field(default_factory=dict)
    commutant: Mapping | None = None


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _parse_group(raw, n: int, diags: list) -> BlockPartition | None:
    if raw == "torus":
        return BlockPartition.torus(n)
    if raw == "unitary":
        return BlockPartition.unitary(n)
    if isinstance(raw, Mapping):
        raw = raw.get("partition")
    if not isinstance(raw, list) or not raw or not all(_is_int(k) for k in raw):
        diags.append(Diagnostic("group", "group must be \"torus\", \"unitary\" or a list of positive integers"))
        return None
    if any(k < 1 for k in raw):
        diags.append(Diagnostic("group", f"partition {raw} has a non-positive block"))
        return None
    if sum(raw) != n:
        diags.append(Diagnostic("group", f"partition sums to {sum(raw)} ≠ n={n}"))
        return None
    return BlockPartition(tuple(raw))


def _parse_symbol(raw, n: int, partition: BlockPartition | None, where: str, diags: list) -> Symbol | None:
    if not isinstance(raw, Mapping):
        diags.append(Diagnostic(where, "symbol must be an object with a \"family\""))
        return None
    family = raw.get("family")
    if family not in CATALOGUE:
        diags.append(Diagnostic(f"{where}.family", f"unknown symbol family {family!r}; catalogue: {', '.join(CATALOGUE)}"))
        return None
    params = raw.get("parameters") or {}
    if not isinstance(params, Mapping) or not all(_is_number(v) for v in params.values()):
        diags.append(Diagnostic(f"{where}.parameters", "parameters must map names to finite numbers"))
        return None
    spec = dict(raw)
    if family == "block_weight" and spec.get("partition") is None:
        if partition is None:
            diags.append(Diagnostic(f"{where}.partition", "block_weight needs a partition (or a group)"))
            return None
        spec["partition"] = list(partition.blocks)
    try:
        return symbol_from_spec(spec, n=n)
    except (ValueError, TypeError) as exc:
        diags.append(Diagnostic(where, str(exc)))
        return None


def _parse_method(raw, command: str | None, diags: list):
    quad, mc = QuadratureSpec(order=DEFAULT_ORDER), None
    if raw is None:
        raw = {}
    if not isinstance(raw, Mapping):
        diags.append(Diagnostic("method", "method must be an object"))
        return quad, mc
    unknown = set(raw) - {"quadrature", "monte_carlo"}
    if unknown:
        diags.append(Diagnostic("method", f"unknown method block(s) {sorted(unknown)}; use quadrature or monte_carlo"))
    if command == "matrix" and "quadrature" in raw and "monte_carlo" in raw:
        diags.append(Diagnostic("method", "matrix jobs take exactly one method block"))
    q = raw.get("quadrature")
    if q is not None:
        order = q.get("order", DEFAULT_ORDER) if isinstance(q, Mapping) else None
        if not _is_int(order) or order < 2:
            diags.append(Diagnostic("method.quadrature.order", f"order must be an integer >= 2, got {order!r}"))
        else:
            quad = QuadratureSpec(order=order)
    m = raw.get("monte_carlo")
    if m is not None:
        if not isinstance(m, Mapping):
            diags.append(Diagnostic("method.monte_carlo", "monte_carlo must be an object"))
            return quad, mc
        count = m.get("count", DEFAULT_MC_COUNT)
        seed = m.get("seed")
        ok = True
        if not _is_int(count) or count < 2:
            diags.append(Diagnostic("method.monte_carlo.count", f"count must be an integer >= 2, got {count!r}"))
            ok = False
        if seed is None:
            diags.append(Diagnostic("method.monte_carlo.seed", "a seed is required for Monte Carlo"))
            ok = False
        elif not _is_int(seed) or seed < 0:
            diags.append(Diagnostic("method.monte_carlo.seed", f"seed must be a non-negative integer, got {seed!r}"))
            ok = False
        if ok:
            mc = MonteCarlo(count=count, seed=seed)
    return quad, mc


def validate_config(text: str, command: str | None = None) -> tuple[JobConfig | None, list[Diagnostic]]:
    """Parse and validate a JSON job document.

    Never raises: returns ``(config, [])`` on success and ``(None, diagnostics)``
    otherwise.  ``command`` enables command-specific requirements.
    """
    diags: list[Diagnostic] = []
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        return None, [Diagnostic("$", f"not valid JSON: {exc}")]
    if not isinstance(doc, Mapping):
        return None, [Diagnostic("$", "config must be a JSON object")]
    if command is not None and command not in COMMANDS:
        return None, [Diagnostic("command", f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}")]
    try:
        return _validate(doc, command, diags)
    except Exception as exc:  # diagnostics are data; nothing escapes
        diags.append(Diagnostic("$", f"invalid config: {exc}"))
        return None, diags


def _validate(doc: Mapping, command: str | None, diags: list) -> tuple[JobConfig | None, list[Diagnostic]]:
    n, m = doc.get("n"), doc.get("m")
    if not _is_int(n) or n < 1:
        diags.append(Diagnostic("n", f"n must be an integer >= 1, got {n!r}"))
    if not _is_int(m) or m < 0:
        diags.append(Diagnostic("m", f"m must be an integer >= 0, got {m!r}"))
    if diags:
        return None, diags
    params = SpaceParams(n, m)

    partition = None
    if "group" in doc:
        partition = _parse_group(doc["group"], n, diags)

    symbol, symbol_spec = None, doc.get("symbol")
    needs_symbol = command in ("spectrum", "matrix", "verify", "average")
    if symbol_spec is not None:
        symbol = _parse_symbol(symbol_spec, n, partition, "symbol", diags)
    elif needs_symbol:
        diags.append(Diagnostic("symbol", "this command needs a symbol"))

    if partition is None and "group" not in doc:
        if symbol is not None:
            own = symbol.invariance_partition(n)
            partition = own if own is not None else BlockPartition.torus(n)
        elif command in ("decompose", None):
            diags.append(Diagnostic("group", "group is required"))

    quad, mc = _parse_method(doc.get("method"), command, diags)

    tol = doc.get("tolerances") or {}
    sigma = SIGMA
    if not isinstance(tol, Mapping):
        diags.append(Diagnostic("tolerances", "tolerances must be an object"))
        tol = {}
    closed = tol.get("closed_form", DEFAULT_TOLERANCE)
    if not _is_number(closed) or closed <= 0:
        diags.append(Diagnostic("tolerances.closed_form", f"must be a positive number, got {closed!r}"))
    else:
        quad = QuadratureSpec(order=quad.order, tolerance=float(closed))
    sigma = tol.get("sigma", SIGMA)
    if not _is_number(sigma) or sigma <= 0:
        diags.append(Diagnostic("tolerances.sigma", f"must be a positive number, got {sigma!r}"))
        sigma = SIGMA

    out = doc.get("output") or {}
    out_path, out_format = None, "json"
    if not isinstance(out, Mapping):
        diags.append(Diagnostic("output", "output must be an object"))
    else:
        out_path = out.get("path")
        out_format = out.get("format", "json")
        if out_path is not None and not isinstance(out_path, str):
            diags.append(Diagnostic("output.path", "path must be a string"))
        if out_format not in FORMATS:
            diags.append(Diagnostic("output.format", f"format must be one of {', '.join(FORMATS)}"))

    partner = None
    if doc.get("partner") is not None:
        partner = _parse_symbol(doc["partner"], n, partition, "partner", diags)

    average = doc.get("average") or {}
    if not isinstance(average, Mapping):
        diags.append(Diagnostic("average", "average must be an object"))
        average = {}
    commutant = doc.get("commutant")
    if commutant is not None and not isinstance(commutant, Mapping):
        diags.append(Diagnostic("commutant", "commutant must be an object"))

    if not diags:
        _command_checks(command, symbol, partition, quad, mc, partner, average, commutant, diags)
    if diags:
        return None, diags
    return (
        JobConfig(
            command=command, params=params, partition=partition, symbol=symbol, symbol_spec=symbol_spec,
            quadrature=quad, monte_carlo=mc, sigma=float(sigma), output_path=out_path,
            output_format=out_format, partner=partner, average=dict(average),
            commutant=dict(commutant) if commutant is not None else None,
        ),
        [],
    )


def _command_checks(command, symbol, partition, quad, mc, partner, average, commutant, diags):
    if command in ("spectrum", "verify") and symbol is not None and partition is not None:
        if not symbol.is_invariant_under(partition):
            diags.append(Diagnostic(
                "symbol",
                f"symbol {symbol.family} ({symbol.invariance}) is not invariant under the group {list(partition.blocks)}",
            ))
    if command == "matrix" and mc is None and symbol is not None and symbol.invariance == "general":
        diags.append(Diagnostic("method", "a general symbol needs the monte_carlo method"))
    if command == "verify":
        if mc is None:
            diags.append(Diagnostic("method.monte_carlo", "verify needs a monte_carlo block with a seed"))
        if partner is not None and partition is not None and not partner.is_invariant_under(partition):
            diags.append(Diagnostic("partner", "partner symbol must be invariant under the group"))
    if command == "average":
        target = average.get("target", "operator")
        if target not in ("operator", "symbol"):
            diags.append(Diagnostic("average.target", "target must be \"operator\" or \"symbol\""))
            return
        torus = partition is not None and partition.is_torus()
        for key in ("samples", "phase_grid"):
            if key in average and (not _is_int(average[key]) or average[key] < 1):
                diags.append(Diagnostic(f"average.{key}", f"{key} must be a positive integer"))
        seed = average.get("seed")
        if not torus and seed is None:
            diags.append(Diagnostic("average.seed", "a seed is required for Haar averaging over a non-torus group"))
        elif seed is not None and (not _is_int(seed) or seed < 0):
            diags.append(Diagnostic("average.seed", "seed must be a non-negative integer"))
        if target == "operator" and mc is None and symbol is not None and symbol.invariance == "general":
            diags.append(Diagnostic("method", "a general symbol needs the monte_carlo method"))
        if target == "symbol":
            pts = average.get("points")
            if not _valid_points(pts, partition.n if partition else None):
                diags.append(Diagnostic(
                    "average.points", "points must be a non-empty list of points, each n coordinates given as numbers or [re, im]",
                ))
    if command == "decompose" and commutant is not None:
        for key in ("probes", "samples", "seed"):
            if key in commutant and (not _is_int(commutant[key]) or commutant[key] < (0 if key == "seed" else 1)):
                diags.append(Diagnostic(f"commutant.{key}", f"{key} must be a {'non-negative' if key == 'seed' else 'positive'} integer"))


def _coord(c) -> complex | None:
    if _is_number(c):
        return complex(c)
    if isinstance(c, list) and len(c) == 2 and all(_is_number(x) for x in c):
        return complex(c[0], c[1])
    return None


def _valid_points(pts, n) -> bool:
    if not isinstance(pts, list) or not pts:
        return False
    for p in pts:
        if not isinstance(p, list) or len(p) != n or any(_coord(c) is None for c in p):
            return False
    return True


# ---------------------------------------------------------------------------
# serialization


def _num(x):
    x = float(x)
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")


def _scalar(v):
    v = complex(v)
    return _num(v.real) if v.imag == 0 else [_num(v.real), _num(v.imag)]


def _pair(v) -> list:
    v = complex(v)
    return [_num(v.real), _num(v.imag)]


def _matrix_payload(cfg: JobConfig, T) -> dict:
    return {
        "n": cfg.params.n,
        "m": cfg.params.m,
        "basis": [list(p) for p in T.order],
        "entries": [[_pair(v) for v in row] for row in T.entries],
        "provenance": T.provenance,
        "error_estimate": _num(T.error_estimate),
        "asymmetry": _num(T.asymmetry),
    }


def _matrix_rows(payload) -> list[list]:
    basis = ["-".join(map(str, p)) for p in payload["basis"]]
    rows = [["row", "column", "re", "im"]]
    for i, row in enumerate(payload["entries"]):
        for j, (re, im) in enumerate(row):
            rows.append([basis[i], basis[j], re, im])
    return rows


def _csv(rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to a temporary file next to ``path`` and rename it into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# commands


def _spectrum(cfg: JobConfig):
    table = block_radial_spectrum(cfg.params, cfg.partition, cfg.symbol, cfg.quadrature)
    payload = {
        "n": cfg.params.n,
        "m": cfg.params.m,
        "partition": list(cfg.partition.blocks),
        "entries": [
            {"degrees": list(d), "eigenvalue": _scalar(v), "dimension": table.dimensions[d]}
            for d, v in table.entries.items()
        ],
        "per_index": [{"p": list(p), "eigenvalue": _scalar(v)} for p, v in table.per_index_view.items()],
        "method": table.method,
        "error_estimate": _num(table.error_estimate),
    }
    rows = [["degrees", "eigenvalue"]]
    for e in payload["entries"]:
        v = e["eigenvalue"]
        rows.append(["-".join(map(str, e["degrees"])), v if not isinstance(v, list) else repr(complex(*v))])
    return payload, rows, EXIT_OK


def _matrix(cfg: JobConfig):
    method = cfg.monte_carlo if cfg.monte_carlo is not None else cfg.quadrature
    T = toeplitz_matrix(cfg.params, cfg.symbol, method)
    payload = _matrix_payload(cfg, T)
    return payload, _matrix_rows(payload), EXIT_OK


def _decompose(cfg: JobConfig):
    dec = isotypic_decomposition(cfg.params, cfg.partition)
    payload = {
        "n": cfg.params.n,
        "m": cfg.params.m,
        "partition": list(cfg.partition.blocks),
        "dimension": cfg.params.space_dimension(),
        "components": [
            {"degrees": list(c.degrees), "dimension": c.dimension, "multiplicity": c.multiplicity,
             "basis_positions": list(c.basis_positions)}
            for c in dec
        ],
    }
    if cfg.commutant is not None:
        probes = cfg.commutant.get("probes", len(dec) + 4)
        rep = commutant_analysis(
            cfg.params, cfg.partition, probes=probes,
            samples=cfg.commutant.get("samples", 16), seed=cfg.commutant.get("seed", 0),
        )
        payload["commutant"] = {
            "dimension": rep.dimension,
            "component_count": len(dec),
            "multiplicity_free": rep.dimension == len(dec),
            "rank_margin": _num(rep.margin),
        }
    rows = [["degrees", "dimension", "basis_positions"]]
    for c in payload["components"]:
        rows.append(["-".join(map(str, c["degrees"])), c["dimension"], " ".join(map(str, c["basis_positions"]))])
    return payload, rows, EXIT_OK


def _verify(cfg: JobConfig):
    report = spectrum_vs_matrix(
        cfg.params, cfg.partition, cfg.symbol, cfg.quadrature, cfg.monte_carlo,
        partner=cfg.partner, sigma=cfg.sigma,
    )
    payload = report.to_dict()
    payload["checks"] = [{k: (_num(v) if isinstance(v, float) else v) for k, v in c.items()} for c in payload["checks"]]
    rows = [["name", "value", "tolerance", "passed"]]
    for c in payload["checks"]:
        rows.append([c["name"], c["value"], c["tolerance"], c["passed"]])
    return payload, rows, EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _average(cfg: JobConfig):
    avg = cfg.average
    target = avg.get("target", "operator")
    seed = avg.get("seed", 0)
    kappa = cfg.partition
    if target == "symbol":
        if kappa.is_torus():
            sym = radialize_torus(cfg.symbol, avg.get("phase_grid", 16), cfg.params.n)
        else:
            sym = radialize_block(cfg.symbol, kappa, avg.get("samples", 1000), seed)
        z = np.array([[_coord(c) for c in p] for p in avg["points"]], dtype=complex)
        vals = np.asarray(sym.evaluator(z))
        errs = np.asarray(sym.stderr(z)) if sym.stderr is not None else np.zeros(len(z))
        payload = {
            "n": cfg.params.n,
            "partition": list(kappa.blocks),
            "family": sym.family,
            "invariance": sym.invariance,
            "values": [{"z": [_pair(c) for c in p], "value": _pair(v), "stderr": _num(e)} for p, v, e in zip(z, vals, errs)],
        }
        rows = [["point", "re", "im", "stderr"]]
        for i, e in enumerate(payload["values"]):
            rows.append([i, *e["value"], e["stderr"]])
        return payload, rows, EXIT_OK
    method = cfg.monte_carlo if cfg.monte_carlo is not None else cfg.quadrature
    T = toeplitz_matrix(cfg.params, cfg.symbol, method)
    A = average_operator(cfg.params, kappa, T, samples=avg.get("samples", 1000), seed=seed)
    payload = _matrix_payload(cfg, A)
    payload["partition"] = list(kappa.blocks)
    return payload, _matrix_rows(payload), EXIT_OK


HANDLERS = {
    "spectrum": _spectrum,
    "matrix": _matrix,
    "decompose": _decompose,
    "verify": _verify,
    "average": _average,
}


def run(command: str, cfg: JobConfig, out: str | None = None, fmt: str | None = None, stdout=None) -> int:
    """Execute a validated job and write its output; returns the exit status."""
    stdout = stdout or sys.stdout
    fmt = fmt or cfg.output_format
    out = out or cfg.output_path
    try:
        payload, rows, status = HANDLERS[command](cfg)
    except ConvergenceError as exc:
        _emit_error("nonconvergence", [Diagnostic("method", str(exc))])
        return EXIT_NONCONVERGENCE
    text = json.dumps(payload, indent=2, allow_nan=False) + "\n" if fmt == "json" else _csv(rows)
    if out:
        atomic_write(out, text)
    else:
        stdout.write(text)
    return status


def _emit_error(status: str, diags) -> None:
    json.dump({"status": status, "diagnostics": [d.to_dict() for d in diags]}, sys.stderr)
    sys.stderr.write("\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bergman-spectra",
        description="Spectra and matrices of Toeplitz operators on weighted Bergman spaces of polynomials.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON job document")
    parser.add_argument("--out", help="output path (default: config output.path, else stdout)")
    parser.add_argument("--format", choices=FORMATS, help="output format (default: config output.format, else json)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        _emit_error("invalid", [Diagnostic("config", f"cannot read config: {exc}")])
        return EXIT_INVALID
    cfg, diags = validate_config(text, args.command)
    if cfg is None:
        _emit_error("invalid", diags)
        return EXIT_INVALID
    return run(args.command, cfg, args.out, args.format)


if __name__ == "__main__":
    sys.exit(main())
