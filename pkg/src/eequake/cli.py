"""Command-line entry point: ``eequake <command> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import emd, hht, pipeline, stationarity, svr
from .errors import EEQuakeError, PipelineError

COMMANDS = ("adf", "dns", "emd", "hht", "detect", "predict", "full")


def _schema(text: str | None) -> dict[str, str] | None:
    """Parse ``field=Header`` pairs separated by commas, or a JSON object."""
    if not text:
        return None
    text = text.strip()
    if text.startswith("{"):
        return {str(k): str(v) for k, v in json.loads(text).items()}
    out = {}
    for part in text.split(","):
        key, sep, value = part.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"schema entry {part!r} is not field=Header")
        out[key.strip()] = value.strip()
    return out


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", help="OHLC CSV file; omit to use the seeded synthetic series")
    common.add_argument("--schema", help="column map, e.g. 'date=Date,close=Adj Close' or a JSON object")
    common.add_argument("--config", help="JSON file with option defaults; command-line flags win")
    common.add_argument("--features", choices=("close", "ohlc"))
    common.add_argument("--horizon", type=int, choices=(1, 2))
    common.add_argument("--b", type=float, help="threshold multiplier (default 4)")
    common.add_argument("--train", type=int, dest="train_size")
    common.add_argument("--test", type=int, dest="test_size")
    common.add_argument("--out", help="artifact directory (default: current directory)")
    common.add_argument("--seed", type=int, help="seed for the synthetic series")
    common.add_argument("--deterministic", choices=("none", "constant", "constant+trend"))
    common.add_argument("--energy-mode", choices=hht.ENERGY_MODES, dest="energy_mode")
    common.add_argument("--ee-index", type=int, dest="ee_index", help="bar index of the event to score")
    common.add_argument("--c-grid", type=_floats, dest="c_grid")
    common.add_argument("--gamma-grid", type=_floats, dest="gamma_grid")
    common.add_argument("--epsilon", type=float)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="eequake", description="Extreme-event detection and forecasting for price series.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "adf": "unit-root test, writes stationarity.json",
        "dns": "degree of nonstationarity, writes dns.csv",
        "emd": "empirical mode decomposition, writes imfs.csv",
        "hht": "Hilbert spectrum and energy, writes spectrum.csv and energy.csv",
        "detect": "full detection stage, writes events.json and overlay.csv",
        "predict": "train, forecast the test span and score blocks",
        "full": "detect, predict and re-detect on the predicted series",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


_KEYS = (
    "input", "schema", "features", "horizon", "b", "train_size", "test_size", "out", "seed",
    "deterministic", "energy_mode", "ee_index", "c_grid", "gamma_grid", "epsilon",
)


def config_from_args(args: argparse.Namespace) -> pipeline.RunConfig:
    opts: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            opts.update(json.load(fh))
    for key in _KEYS:
        value = getattr(args, key, None)
        if value is not None:
            opts[key] = value
    unknown = set(opts) - set(_KEYS)
    if unknown:
        raise PipelineError("config", f"unknown option(s): {sorted(unknown)}")
    if isinstance(opts.get("schema"), str):
        opts["schema"] = _schema(opts["schema"])
    grid = svr.GridSpec()
    if "c_grid" in opts or "gamma_grid" in opts:
        grid = svr.GridSpec(tuple(opts.pop("c_grid", grid.c)), tuple(opts.pop("gamma_grid", grid.gamma)))
    opts.setdefault("out", ".")
    try:
        return pipeline.RunConfig(grid=grid, **opts)
    except (TypeError, ValueError) as exc:
        raise PipelineError("config", str(exc)) from exc


def _analysis_only(config: pipeline.RunConfig):
    series = pipeline.load_series(config)
    return series, pipeline.analyse(series.close, config, series.name)


def run(command: str, config: pipeline.RunConfig) -> dict:
    out = Path(config.out or ".")
    if command == "adf":
        series = pipeline.load_series(config)
        try:
            res = stationarity.adf_test(series.close, stationarity.AdfSpec(config.deterministic))
        except EEQuakeError as exc:
            raise PipelineError("adf", str(exc)) from exc
        pipeline.write_stationarity(out, {"adf": res.to_dict()})
        return {"t_statistic": res.t_statistic, "p_value": res.p_value, "reject_unit_root_at": res.reject_unit_root_at}
    if command == "dns":
        _, a = _analysis_only(config)
        try:
            curve = stationarity.dns(a.spectrum)
        except EEQuakeError as exc:
            raise PipelineError("dns", str(exc)) from exc
        pipeline.write_dns(out, curve)
        return {"flatness": curve.flatness, "populated_bins": int(len(curve.bins))}
    if command == "emd":
        series = pipeline.load_series(config)
        try:
            dec = emd.decompose(series.close, config.sift)
        except EEQuakeError as exc:
            raise PipelineError("emd", str(exc)) from exc
        pipeline.write_imfs(out, dec)
        return {"imfs": len(dec), "flagged": [imf.index for imf in dec.imfs if imf.flagged]}
    if command == "hht":
        _, a = _analysis_only(config)
        pipeline.write_spectrum(out, a.spectrum)
        pipeline.write_energy(out, a.energy)
        return {"imfs": len(a.decomposition), "energy_mean": a.energy.mean, "energy_stdev": a.energy.stdev}
    if command == "detect":
        res = pipeline.run_detect(config)
        return {"events": [e.to_dict() for e in res.report.events]}
    if command == "predict":
        res = pipeline.run_predict(config)
        return res.report.to_dict()
    if command == "full":
        res = pipeline.run_full(config)
        return {
            "events": [e.to_dict() for e in res.detect.report.events],
            "report": res.predict.report.to_dict(),
            "redetected": res.redetect.found,
        }
    raise PipelineError("config", f"unknown command {command!r}")


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        if config.out:
            Path(config.out).mkdir(parents=True, exist_ok=True)
        summary = run(args.command, config)
    except PipelineError as exc:
        print(f"eequake: error: {exc}", file=sys.stderr)
        return 1
    except (EEQuakeError, OSError, ValueError) as exc:
        print(f"eequake: error: [{args.command}] {exc}", file=sys.stderr)
        return 1
    json.dump(pipeline.jsonable(summary), sys.stdout, sort_keys=True, indent=2)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
