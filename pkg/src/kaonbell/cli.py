"""Command-line front end; a thin client of the HTTP service.

Subcommands: predict, scan, optimize, feasibility, simulate, serve.  Each
loads the JSON configuration (merged over the packaged defaults), builds a
request, dispatches it to the service (in process by default, remote with
--url) and renders the response.  Reports default to JSON, tables to CSV;
machine output keeps full float precision, human summaries round.

Exit codes: 0 success, 1 configuration or argument validation error,
2 runtime error (service failure, I/O).  The Monte Carlo seed can be
overridden with --seed or the KAONBELL_SEED environment variable (flag wins).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import httpx

from . import __version__
from .client import ServiceError, call_service
from .config import load_config
from .errors import ConfigError

SEED_ENV_VAR = "KAONBELL_SEED"

_REPORT_COLUMNS = (
    "variant", "p_bb", "p_sb", "p_bl", "p_sl", "p_s_star", "p_star_l",
    "B", "ratio", "violated_upper", "violated_lower", "se_B",
)


def _csv_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _csv_text(header: tuple[str, ...], rows: list[tuple]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_csv_cell(cell) for cell in row])
    return buffer.getvalue()


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _emit(text: str, out_path: str | None):
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _report_rows(payload: dict) -> list[tuple]:
    rows = []
    for variant_key in ("first", "second"):
        report = payload[variant_key]
        rows.append(tuple(report[col] for col in _REPORT_COLUMNS))
    return rows


def _resolve_seed(args) -> int | None:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            seed = int(env)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV_VAR} must be an integer, got {env!r}") from exc
        if not 0 <= seed < 2**64:
            raise ConfigError(f"{SEED_ENV_VAR} must fit in an unsigned 64-bit integer")
        return seed
    return None


def _config_payload(args) -> dict:
    cfg = load_config(getattr(args, "config", None))
    seed = _resolve_seed(args)
    if seed is not None:
        cfg = cfg.model_copy(
            update={"mc": cfg.mc.model_copy(update={"seed": seed})}
        )
    return cfg.model_dump()


def cmd_predict(args) -> int:
    payload = call_service("/predict", _config_payload(args), url=args.url)
    if args.format == "csv":
        text = _csv_text(_REPORT_COLUMNS, _report_rows(payload))
    else:
        text = _json_text(payload)
    _emit(text, args.out)
    if args.out is not None:
        best = max(payload["first"]["ratio"], payload["second"]["ratio"])
        print(f"predict: best ratio {best:.6f} "
              f"({'violated' if payload['violation_predicted'] else 'no violation'}); "
              f"wrote {args.out}")
    return 0


def cmd_scan(args) -> int:
    request = {
        "axis": args.axis,
        "start": args.start,
        "stop": args.stop,
        "steps": args.steps,
        "phase_deg": args.phase_deg,
        "config": _config_payload(args),
    }
    payload = call_service("/scan", request, url=args.url)
    if args.format == "json":
        text = _json_text(payload)
    else:
        rows = [
            (payload["axis"], row["value"], row["ratio_first"],
             row["ratio_second"], row["violated"])
            for row in payload["rows"]
        ]
        text = _csv_text(
            ("axis", "value", "ratio_first", "ratio_second", "violated"), rows
        )
    _emit(text, args.out)
    if args.out is not None:
        print(f"scan: {len(payload['rows'])} rows along {payload['axis']}; "
              f"wrote {args.out}")
    return 0


def cmd_optimize(args) -> int:
    request = {"domain": args.domain, "variant": args.variant, "bound": args.bound}
    payload = call_service("/optimize", request, url=args.url)
    if args.format == "csv":
        rows = [
            (r["variant"], r["domain"], r["R_star"][0], r["R_star"][1],
             r["ratio_star"])
            for r in payload["results"]
        ]
        text = _csv_text(
            ("variant", "domain", "R_star_re", "R_star_im", "ratio_star"), rows
        )
    else:
        text = _json_text(payload)
    _emit(text, args.out)
    if args.out is not None:
        best = max(payload["results"], key=lambda r: r["ratio_star"])
        print(f"optimize: ratio* = {best['ratio_star']:.6f} at "
              f"R* = {best['R_star'][0]:.6f}{best['R_star'][1]:+.6f}i "
              f"({best['variant']} variant); wrote {args.out}")
    return 0


def cmd_feasibility(args) -> int:
    payload = call_service("/feasibility", _config_payload(args), url=args.url)
    if args.format == "csv":
        flat = dict(payload)
        lifetime = flat.pop("lifetime_response")
        flat.update({f"lifetime_response.{k}": v for k, v in lifetime.items()})
        text = _csv_text(("key", "value"), sorted(flat.items()))
    else:
        text = _json_text(payload)
    _emit(text, args.out)
    if args.out is not None:
        print(f"feasibility: T_min = {payload['T_min_tau_s']:.4f} tau_S, "
              f"spacelike {'ok' if payload['spacelike_ok'] else 'NOT ok'}, "
              f"usable fraction {payload['surviving_fraction']:.3e}; "
              f"wrote {args.out}")
    return 0


def _significance_summary(payload: dict) -> str:
    parts = []
    for variant_key in ("first", "second"):
        report = payload[variant_key]
        sig = payload[f"significance_{variant_key}"]
        if report["violated_upper"] and sig is not None:
            parts.append(
                f"{variant_key} variant violates the upper CH bound at "
                f"{sig:.2f} sigma (ratio {report['ratio']:.4f} "
                f"+- {report['se_ratio']:.4f})"
            )
    if not parts:
        return "no CH violation observed"
    return "; ".join(parts)


def cmd_simulate(args) -> int:
    payload = call_service("/simulate", _config_payload(args), url=args.url)
    counts_path = f"{args.out}_counts.csv"
    report_path = f"{args.out}_report.json"
    count_rows = [
        (r["left_setting"], r["right_setting"], r["left_outcome"],
         r["right_outcome"], r["count"])
        for r in payload["counts"]
    ]
    _emit(
        _csv_text(
            ("left_setting", "right_setting", "left_outcome", "right_outcome",
             "count"),
            count_rows,
        ),
        counts_path,
    )
    report = {k: v for k, v in payload.items() if k != "counts"}
    _emit(_json_text(report), report_path)
    print(f"simulate: n = {payload['n_events']}, seed = {payload['seed']}; "
          f"{_significance_summary(payload)}")
    print(f"wrote {counts_path} and {report_path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("kaonbell.service:app", host=args.host, port=args.port)
    return 0


def _add_common(parser: argparse.ArgumentParser, default_format: str):
    parser.add_argument("--config", help="JSON config file merged over the defaults")
    parser.add_argument("--url", help="base URL of a running service; default is in process")
    parser.add_argument("--seed", type=int, help="override the Monte Carlo seed")
    parser.add_argument(
        "--format", choices=("csv", "json"), default=default_format,
        help=f"output format (default {default_format})",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kaonbell",
        description="Bell tests with entangled neutral-kaon pairs",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="Clauser-Horne report for the configured state")
    _add_common(p, "json")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("scan", help="ratio table along R, T or d")
    _add_common(p, "csv")
    p.add_argument("--axis", choices=("R", "T", "d"), required=True)
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument(
        "--phase-deg", type=float, default=0.0, dest="phase_deg",
        help="phase of R in degrees for the R axis (0 scans the real axis)",
    )
    p.add_argument("--out", help="write the table here instead of stdout")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("optimize", help="maximize the ratio over R")
    _add_common(p, "json")
    p.add_argument("--domain", choices=("real", "disc"), default="real")
    p.add_argument("--variant", choices=("first", "second", "both"), default="both")
    p.add_argument("--bound", type=float, default=2.0)
    p.add_argument("--out", help="write the result here instead of stdout")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("feasibility", help="spacelike bound and sample economics")
    _add_common(p, "json")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_feasibility)

    p = sub.add_parser("simulate", help="run a Monte Carlo pseudo-experiment")
    _add_common(p, "json")
    p.add_argument(
        "--out", default="simulation",
        help="output prefix; writes <prefix>_counts.csv and <prefix>_report.json",
    )
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the HTTP service with uvicorn")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version, 2 for bad arguments
        return 0 if exc.code == 0 else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ServiceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1 if exc.status_code == 422 else 2
    except (httpx.HTTPError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def app() -> None:
    """Console entry point."""
    sys.exit(main())
