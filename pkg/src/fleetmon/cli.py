"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import SIGMA_GRID, THR_CC_GRID, VariantConfig, load_config_file
from .errors import InvalidConfig, ParseError, RaggedColumns, RateMismatch
from .fleetsim import ScenarioConfig, generate_current, generate_vibration, write_scenario
from .ingest import load_data_dir
from .pipeline import result_to_json, run_baseline, run_thr_cc_sweep, run_variant

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

_DATA_ERRORS = (ParseError, RateMismatch, RaggedColumns, FileNotFoundError, OSError)


def _parse_grid(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise InvalidConfig(f"cannot parse grid {text!r}; expected comma-separated numbers") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fleetmon",
        description="Fleet-based anomaly detection for similar, similarly-operated machines.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-window warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic fleet scenario")
    sim.add_argument("--config", help="JSON config file with a 'scenario' section")
    sim.add_argument("--out", required=True, help="output directory for CSV + sidecar")
    sim.add_argument("--kind", choices=["current", "vibration"], default=None)
    sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")

    ana = sub.add_parser("analyze", help="run one variant over a data directory")
    ana.add_argument("--variant", choices=["waveform", "harmonic", "spectrogram",
                                           "vibration_features"], default=None)
    ana.add_argument("--data", required=True, help="directory holding the CSV + sidecar")
    ana.add_argument("--config", help="JSON config file with a 'variant' section")
    ana.add_argument("--out", required=True, help="output directory for results")
    ana.add_argument("--thr-cc", type=float, default=None)
    ana.add_argument("--thr-ad", type=float, default=None)
    ana.add_argument("--debounce-n", type=int, default=None)
    ana.add_argument("--window-s", type=float, default=None)
    ana.add_argument("--thr-cc-grid", default=None,
                     help="comma-separated thresholds; also writes a sweep table")
    ana.add_argument("--include-matrices", action="store_true",
                     help="embed per-window matrices in results.json")

    base = sub.add_parser("baseline", help="run the sigma-band benchmark")
    base.add_argument("--data", required=True)
    base.add_argument("--config", help="JSON config file")
    base.add_argument("--out", required=True)
    base.add_argument("--sigma-grid", default=None, help="comma-separated band widths")

    rep = sub.add_parser("report", help="emit the five-panel report for one window")
    rep.add_argument("--data", required=True)
    rep.add_argument("--config", help="JSON config file")
    rep.add_argument("--variant", choices=["waveform", "harmonic", "spectrogram",
                                           "vibration_features"], default=None)
    rep.add_argument("--window", type=int, required=True)
    rep.add_argument("--out", required=True, help="output SVG path or directory")
    return parser


def _variant_config(args, config_file: dict, kind: str) -> VariantConfig:
    section = config_file.get("variant", {})
    cfg = VariantConfig.from_dict(section) if section else VariantConfig(
        variant="vibration_features" if kind == "vibration" else "waveform"
    )
    overrides = {}
    for attr, key in (("variant", "variant"), ("thr_cc", "thr_cc"), ("thr_ad", "thr_ad"),
                      ("debounce_n", "debounce_n"), ("window_s", "window_s")):
        value = getattr(args, key, None)
        if value is not None:
            overrides[attr] = value
    return cfg.override(**overrides)


def _cmd_simulate(args) -> int:
    config_file = load_config_file(args.config)
    scenario = ScenarioConfig.from_dict(config_file.get("scenario", {}))
    if args.seed is not None:
        scenario = ScenarioConfig.from_dict({**scenario.to_dict(), "seed": args.seed})
    kind = args.kind or config_file.get("kind", "current")
    data = generate_current(scenario) if kind == "current" else generate_vibration(scenario)
    csv_path, sidecar_path = write_scenario(data, scenario, args.out, kind)
    print(f"wrote {csv_path} and {sidecar_path}")
    return EXIT_OK


def _cmd_analyze(args) -> int:
    config_file = load_config_file(args.config)
    data, _, kind = load_data_dir(args.data)
    cfg = _variant_config(args, config_file, kind)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.thr_cc_grid is not None or "thr_cc_grid" in config_file:
        grid = (
            _parse_grid(args.thr_cc_grid)
            if args.thr_cc_grid is not None
            else tuple(config_file["thr_cc_grid"])
        ) or THR_CC_GRID
        if data.ground_truth is None:
            raise InvalidConfig("a threshold sweep needs a scenario sidecar with ground truth")
        table, results = run_thr_cc_sweep(data, cfg, grid)
        (out_dir / "sweep.json").write_text(json.dumps(table.to_json_obj(), indent=2) + "\n")
        text = table.format_text(label=f"{cfg.variant} variant")
        (out_dir / "sweep.txt").write_text(text + "\n")
        print(text)
        best = table.best_f1()
        result = results[best.parameter]
    else:
        result = run_variant(data, cfg)
    (out_dir / "results.json").write_text(
        result_to_json(result, include_matrices=args.include_matrices) + "\n"
    )
    if result.metrics is not None:
        print(f"thr_cc={result.config.thr_cc:g} precision={result.metrics.precision:.3f} "
              f"recall={result.metrics.recall:.3f} f1={result.metrics.f1:.3f}")
    print(f"wrote {out_dir / 'results.json'}")
    return EXIT_OK


def _cmd_baseline(args) -> int:
    config_file = load_config_file(args.config)
    data, _, kind = load_data_dir(args.data)
    cfg = _variant_config(args, config_file, kind)
    if data.ground_truth is None:
        raise InvalidConfig("the baseline sweep needs a scenario sidecar with ground truth")
    grid = (
        _parse_grid(args.sigma_grid)
        if args.sigma_grid is not None
        else tuple(config_file.get("sigma_grid", SIGMA_GRID))
    )
    table, _ = run_baseline(data, cfg, grid)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "baseline.json").write_text(json.dumps(table.to_json_obj(), indent=2) + "\n")
    text = table.format_text(label="sigma-band baseline")
    (out_dir / "baseline.txt").write_text(text + "\n")
    print(text)
    print(f"wrote {out_dir / 'baseline.json'}")
    return EXIT_OK


def _cmd_report(args) -> int:
    from .report import emit_report

    config_file = load_config_file(args.config)
    data, _, kind = load_data_dir(args.data)
    cfg = _variant_config(args, config_file, kind)
    result = run_variant(data, cfg)
    out = Path(args.out)
    if out.suffix == ".svg":
        svg_path, json_path = emit_report(result, args.window, out.parent or Path("."), out.stem)
    else:
        svg_path, json_path = emit_report(result, args.window, out)
    print(f"wrote {svg_path} and {json_path}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "baseline": _cmd_baseline,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.verbose else logging.ERROR,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return _COMMANDS[args.command](args)
    except InvalidConfig as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
