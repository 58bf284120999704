"""``facepriv`` command-line tool.

Every subcommand writes JSON (or a text summary with ``--format text``) that
starts with a provenance block ``{version, seed, parameters}``. Exit codes:
0 success, 1 input or validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .adversarial import AffineClassifier, PerturbationConfig, lp_norm, universal_perturbation
from .attacks import KnowledgeSource, reidentification_rate
from .attributes import (
    AttributeTable,
    build_table,
    dumps_table,
    load_table,
    marginal_distribution,
    parse_celeba_attrs,
    parse_identity_map,
)
from .emd import GroundDistance
from .errors import FacePrivError, FormatError, ParameterError
from .imaging import blur, mask, ms_ssim, pixelate, psnr, read_pnm, ssim, write_pnm
from .metrics import privacy_report
from .ppas import PpasConfig, ppas_apply_table
from .rng import RandomSource, fresh_seed

log = logging.getLogger("facepriv")

EXIT_OK, EXIT_INPUT, EXIT_IO = 0, 1, 2

HELP_T = "closeness threshold t: keep an attribute when EMD(S, S_E) <= t (t-closeness)"
HELP_EPS = "randomized-response budget epsilon per attribute; 'inf' disables perturbation"
HELP_XI = "radius xi of the Lp ball that bounds the universal perturbation, ||v||_p <= xi"
HELP_DELTA = "tolerated failure rate delta: stop once the fooling rate reaches 1 - delta"


class IOFailure(Exception):
    """File-system problem, reported with exit code 2."""


def provenance(seed: Optional[int], parameters: dict) -> dict:
    return {"version": __version__, "seed": seed, "parameters": parameters}


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _read_text(path: str, what: str) -> List[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.readlines()
    except FileNotFoundError:
        raise IOFailure(f"{what} not found: {path}") from None
    except OSError as exc:
        raise IOFailure(f"cannot read {what} {path}: {exc.strerror}") from None


def _read_json(path: str, what: str):
    text = "".join(_read_text(path, what))
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, line=exc.lineno, source=path) from None


def _load_table(path: str) -> AttributeTable:
    return AttributeTable.from_json(_read_json(path, "table"))


def _write(path: Optional[str], text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IOFailure(f"cannot write {path}: {exc.strerror}") from None


def _names(value: Optional[str]) -> List[str]:
    if not value:
        return []
    return [v.strip() for v in value.split(",") if v.strip()]


def _seed(arg: Optional[int], fallback: Optional[int] = None) -> int:
    if arg is not None:
        return arg
    if fallback is not None:
        return int(fallback)
    seed = fresh_seed()
    log.info("no seed given; using %d", seed)
    return seed


# --- subcommands -------------------------------------------------------------

def cmd_ingest(args) -> int:
    attr_lines = _read_text(args.attrs, "attribute file")
    id_lines = _read_text(args.identities, "identity map")
    schema, rows = parse_celeba_attrs(attr_lines, source=args.attrs)
    table = build_table(schema, rows, parse_identity_map(id_lines, source=args.identities))
    doc = table.to_json()
    doc["provenance"] = provenance(None, {"attrs": args.attrs, "identities": args.identities})
    _write(args.out, _json(doc))

    identities = len({r.identity_id for r in table.records})
    marginals = ({name: marginal_distribution(table, name)[1] for name in schema.names}
                 if len(table) else {})
    summary = {"records": len(table), "identities": identities, "attributes": len(schema),
               "positive_fraction": marginals}
    if args.format == "text":
        lines = [f"records: {len(table)}  identities: {identities}  attributes: {len(schema)}"]
        for name, p in sorted(marginals.items(), key=lambda kv: -kv[1]):
            lines.append(f"  {name:<24s} {p:6.3f} {'#' * int(round(40 * p))}")
        sys.stderr.write("\n".join(lines) + "\n")
    else:
        sys.stderr.write(_json(summary))
    return EXIT_OK


def _report_doc(table, quasi, sensitive, d, seed=None, extra=None) -> dict:
    report = privacy_report(table, quasi, sensitive, d)
    doc = report.to_json()
    params = {"quasi_ids": quasi, "sensitive": sensitive, "ground_distance": GroundDistance(d).value}
    params.update(extra or {})
    doc["provenance"] = provenance(seed, params)
    return doc, report


def cmd_report(args) -> int:
    table = _load_table(args.table)
    quasi = _names(args.quasi)
    if not quasi:
        raise ParameterError("--quasi needs at least one attribute")
    doc, report = _report_doc(table, quasi, _names(args.sensitive), args.ground_distance,
                              extra={"table": args.table})
    _write(args.out, report.to_text() + "\n" if args.format == "text" else _json(doc))
    return EXIT_OK


def cmd_anonymize(args) -> int:
    table = _load_table(args.table)
    raw = _read_json(args.config, "config")
    if not isinstance(raw, dict):
        raise FormatError("config must be a JSON object", source=args.config)
    config = PpasConfig.from_json(raw)
    seed = _seed(args.seed, raw.get("seed"))
    result = ppas_apply_table(table, config, RandomSource(seed))

    params = {"config": config.to_json(), "table": args.table}
    out_doc = result.table.to_json()
    out_doc["provenance"] = provenance(seed, params)
    _write(args.out, _json(out_doc))

    trace_path = args.trace or f"{args.out}.trace.jsonl"
    _write(trace_path, "".join(json.dumps(t.to_json(), sort_keys=True, allow_nan=False) + "\n"
                               for t in result.traces))

    quasi = _names(args.quasi)
    if quasi:
        sensitive = _names(args.sensitive)
        before, _ = _report_doc(table, quasi, sensitive, config.ground_distance)
        after, after_report = _report_doc(result.table, quasi, sensitive, config.ground_distance)
        for d in (before, after):
            d.pop("provenance")
        reports = {"before": before, "after": after,
                   "provenance": provenance(seed, dict(params, quasi_ids=quasi, sensitive=sensitive))}
        _write(args.reports or f"{args.out}.reports.json", _json(reports))
        if args.format == "text":
            sys.stderr.write(f"k-anonymity on {{{', '.join(quasi)}}}: {before['k']} -> {after['k']}\n")
    changed = int(np.sum(result.table.matrix != table.matrix))
    log.info("anonymized %d records, %d attribute values changed", len(table), changed)
    return EXIT_OK


def _adversary_subsets(spec: dict, table: AttributeTable, rng: RandomSource) -> List[List[str]]:
    if "subsets" in spec:
        subsets = spec["subsets"]
        if not isinstance(subsets, list) or not all(isinstance(s, list) for s in subsets):
            raise FormatError("'subsets' must be a list of attribute-name lists")
        return subsets
    size = int(spec.get("subset_size", 1))
    count = int(spec.get("n_subsets", 1))
    names = table.schema.names
    if not 1 <= size <= len(names):
        raise ParameterError(f"subset_size must lie in [1, {len(names)}]")
    gen = rng.child(10 ** 6).generator
    return [[names[i] for i in sorted(gen.choice(len(names), size=size, replace=False))]
            for _ in range(count)]


def cmd_attack(args) -> int:
    before = _load_table(args.before)
    after = _load_table(args.after)
    spec = _read_json(args.adversary, "adversary spec")
    if not isinstance(spec, dict):
        raise FormatError("adversary spec must be a JSON object", source=args.adversary)
    seed = _seed(args.seed, spec.get("seed"))
    rng = RandomSource(seed)
    subsets = _adversary_subsets(spec, before, rng)
    summary = reidentification_rate(before, after, subsets, rng,
                                    targets_per_subset=spec.get("targets_per_subset"),
                                    knowledge=spec.get("knowledge", KnowledgeSource.ORIGINAL.value))
    doc = summary.to_json()
    doc["provenance"] = provenance(seed, {"before": args.before, "after": args.after, "adversary": spec})
    _write(args.out, summary.to_text() + "\n" if args.format == "text" else _json(doc))
    return EXIT_OK


def _load_points(path: str) -> np.ndarray:
    rows = []
    for no, row in enumerate(csv.reader(_read_text(path, "points file")), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        try:
            rows.append([float(c) for c in row])
        except ValueError:
            if no == 1 and not rows:
                continue  # header
            raise FormatError("non-numeric value", line=no, source=path) from None
    if not rows:
        raise FormatError("no points", source=path)
    if len({len(r) for r in rows}) != 1:
        raise FormatError("rows have different lengths", source=path)
    return np.array(rows)


def cmd_perturb(args) -> int:
    clf = AffineClassifier.from_json(_read_json(args.classifier, "classifier"))
    points = _load_points(args.points)
    seed = _seed(args.seed)
    config = PerturbationConfig(xi=args.xi, delta=args.delta, p_norm=args.norm,
                                max_outer_iters=args.max_iters, overshoot=args.overshoot,
                                per_step_cap=args.step_cap)
    result = universal_perturbation(points, clf, config, RandomSource(seed))
    norm = lp_norm(result.v, config.p_norm)
    if norm > config.xi + 1e-9:
        raise FacePrivError(f"perturbation norm {norm} exceeds xi {config.xi}")
    doc = result.to_json()
    doc["norm"] = norm
    doc["provenance"] = provenance(seed, {
        "classifier": args.classifier, "points": args.points, "xi": config.xi, "delta": config.delta,
        "p_norm": "inf" if math.isinf(config.p_norm) else 2, "max_outer_iters": config.max_outer_iters,
        "overshoot": config.overshoot, "per_step_cap": config.per_step_cap,
    })
    if args.format == "text":
        text = (f"fooling rate {result.achieved_fooling_rate:.4f} after {result.iterations_used} passes; "
                f"||v|| = {norm:.6g} (xi = {config.xi})\n")
        if args.out:
            _write(args.out, _json(doc))
        sys.stdout.write(text)
    else:
        _write(args.out, _json(doc))
    return EXIT_OK


def _read_image(path: str) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            return read_pnm(fh)
    except FileNotFoundError:
        raise IOFailure(f"image not found: {path}") from None
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc.strerror}") from None


def _auto_levels(shape, window: int) -> int:
    levels = 1
    while levels < 5 and min(shape[:2]) >= window * 2 ** levels:
        levels += 1
    return levels


def cmd_img_obfuscate(args) -> int:
    img = _read_image(args.input)
    if args.method == "blur":
        out = blur(img, args.sigma, args.kernel_size)
    elif args.method == "pixelate":
        out = pixelate(img, args.block)
    else:
        if not args.rect:
            raise ParameterError("mask needs --rect x,y,w,h")
        rect = tuple(int(v) for v in args.rect.split(","))
        if len(rect) != 4:
            raise ParameterError("--rect takes x,y,w,h")
        color = [int(v) for v in args.color.split(",")]
        out = mask(img, rect, color if len(color) > 1 else color[0])
    try:
        with open(args.out, "wb") as fh:
            write_pnm(fh, out)
    except OSError as exc:
        raise IOFailure(f"cannot write {args.out}: {exc.strerror}") from None
    return EXIT_OK


def cmd_img_quality(args) -> int:
    ref = _read_image(args.ref)
    test = _read_image(args.test)
    levels = args.levels or _auto_levels(ref.shape, args.window)
    p = psnr(ref, test)
    doc = {
        "psnr": "identical" if math.isinf(p) else p,
        "ssim": ssim(ref, test, window=args.window),
        "ms_ssim": ms_ssim(ref, test, levels=levels, window=args.window),
        "provenance": provenance(None, {"ref": args.ref, "test": args.test, "window": args.window,
                                        "levels": levels}),
    }
    if args.format == "text":
        _write(args.out, f"PSNR {doc['psnr']}  SSIM {doc['ssim']:.6f}  MS-SSIM {doc['ms_ssim']:.6f}\n")
    else:
        _write(args.out, _json(doc))
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="facepriv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"facepriv {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help="output path (default: stdout)"):
        p.add_argument("--out", help=out_help)
        p.add_argument("--format", choices=("json", "text"), default="json")

    p = sub.add_parser("ingest", help="parse CelebA attribute + identity files into a table")
    p.add_argument("--attrs", required=True, help="list_attr_celeba.txt-style file")
    p.add_argument("--identities", required=True, help="identity_CelebA.txt-style file")
    common(p, "table JSON path (default: stdout); the summary goes to stderr")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("report", help="k-anonymity, entropy l-diversity and t-closeness of a table")
    p.add_argument("--table", required=True)
    p.add_argument("--quasi", required=True, help="comma-separated quasi-identifier attributes")
    p.add_argument("--sensitive", default="", help="comma-separated sensitive attributes")
    p.add_argument("--ground-distance", choices=[g.value for g in GroundDistance], default="binary",
                   help="EMD ground metric for t-closeness")
    common(p)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("anonymize", help="run PPAS attribute selection + randomized response",
                       description=f"Config JSON keys: t ({HELP_T}); epsilon ({HELP_EPS}); quasi_policy; "
                                   "quasi_ids; reference_dists; ground_distance; update; seed.")
    p.add_argument("--table", required=True)
    p.add_argument("--config", required=True, help="PPAS config JSON")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("--out", required=True, help="obfuscated table JSON")
    p.add_argument("--trace", help="per-record trace JSONL (default: OUT.trace.jsonl)")
    p.add_argument("--reports", help="before/after privacy reports (default: OUT.reports.json)")
    p.add_argument("--quasi", default="", help="quasi-identifiers for the before/after reports")
    p.add_argument("--sensitive", default="", help="sensitive attributes for the reports")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.set_defaults(func=cmd_anonymize)

    p = sub.add_parser("attack", help="simulate linkage attacks before and after obfuscation")
    p.add_argument("--before", required=True)
    p.add_argument("--after", required=True)
    p.add_argument("--adversary", required=True,
                   help="JSON: {subsets | subset_size + n_subsets, targets_per_subset?, knowledge?}")
    p.add_argument("--seed", type=int)
    common(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("perturb", help="universal adversarial perturbation for an affine classifier")
    p.add_argument("--classifier", required=True, help="JSON {labels, weights (K x d), biases (K)}")
    p.add_argument("--points", required=True, help="CSV, one point per row")
    p.add_argument("--xi", type=float, required=True, help=HELP_XI)
    p.add_argument("--delta", type=float, default=0.2, help=HELP_DELTA)
    p.add_argument("--norm", choices=("2", "inf"), default="2", help="p of the Lp ball")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", type=int, default=10, help="maximum passes over the points")
    p.add_argument("--overshoot", type=float, default=0.02, help="DeepFool overshoot eta")
    p.add_argument("--step-cap", type=float, help="cap on the L2 norm of each DeepFool update (epsilon_i)")
    common(p)
    p.set_defaults(func=cmd_perturb)

    img = sub.add_parser("img", help="image obfuscation and quality metrics")
    img_sub = img.add_subparsers(dest="img_command", required=True)
    p = img_sub.add_parser("obfuscate", help="blur, pixelate or mask a PGM/PPM image")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--method", choices=("blur", "pixelate", "mask"), required=True)
    p.add_argument("--sigma", type=float, default=2.0, help="blur: Gaussian sigma")
    p.add_argument("--kernel-size", type=int, default=7, help="blur: odd kernel size")
    p.add_argument("--block", type=int, default=8, help="pixelate: block size")
    p.add_argument("--rect", help="mask: x,y,w,h")
    p.add_argument("--color", default="0", help="mask: gray value or r,g,b")
    p.set_defaults(func=cmd_img_obfuscate)

    p = img_sub.add_parser("quality", help="PSNR, SSIM and MS-SSIM between two images")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--window", type=int, default=8)
    p.add_argument("--levels", type=int, help="MS-SSIM scales (default: as many as fit, up to 5)")
    common(p)
    p.set_defaults(func=cmd_img_quality)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except IOFailure as exc:
        sys.stderr.write(f"facepriv: {exc}\n")
        return EXIT_IO
    except FacePrivError as exc:
        sys.stderr.write(f"facepriv: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
