"""Command-line entry point: ``sgacs <subcommand> [--config FILE] [--set section.key=value ...]``.

Exit codes: 0 success, 1 configuration or validation failure, 2 numerical
failure (a ``diagnostics.txt`` is left in the output directory).  The last
line on standard output is always ``RESULT <subcommand> <pass|fail> <elapsed_ms>``.
"""

from __future__ import annotations

import argparse
import logging
import os
import shutil
import sys
import time
import traceback
from pathlib import Path

from . import scenarios
from .config import ScenarioConfig, apply_overrides, load, section_values, set_value
from .errors import CflError, ConfigError, ConvergenceError, NumericError, SgacsError, TruncationError
from .grid import format_value

log = logging.getLogger("sgacs")

OUTPUT_ROOT_ENV = "SGACS_OUTPUT_ROOT"
NUMERIC_ERRORS = (NumericError, ConvergenceError, CflError, TruncationError)
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2

STAGES = {
    "background": ("background",),
    "metric": ("background", "metric"),
    "evolve": ("background", "solver"),
    "run": ("background", "metric", "solver"),
}
NEEDS_CONFIG = ("background", "metric", "evolve", "validate", "run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgacs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "background": "build and validate the background, write its fields",
        "metric": "background plus acoustic-metric components and ergosurface",
        "evolve": "background plus the configured solver run",
        "fock": "Fock-space amplitudes and expectations from the states section",
        "figure1": "velocity field of the vortex/no-vortex superposition",
        "validate": "run the assumption checks only",
        "run": "the full scenario pipeline",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="scenario file (section.key = value lines)")
        p.add_argument("--out", type=Path, help=f"output directory (default: ${OUTPUT_ROOT_ENV}/<name>)")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one configuration value; repeatable")
        p.add_argument("--seed", type=int, help="shorthand for --set scenario.seed=N")
        p.add_argument("--force", action="store_true", help="empty an existing non-empty output directory")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def _raw_config(args) -> dict:
    if args.config is not None:
        raw = load(args.config)
    elif args.command in NEEDS_CONFIG:
        raise ConfigError(f"{args.command} needs --config", path="--config")
    else:
        raw = {}
    apply_overrides(raw, args.overrides)
    if args.seed is not None:
        set_value(raw, "scenario.seed", str(args.seed), where="--seed")
    return raw


def _default_name(args, raw: dict) -> str:
    name = raw.get("scenario", {}).get("name")
    if name:
        return name
    if args.command == "figure1":
        w = section_values(raw, "figure")["w"]
        return f"figure1_w{format_value(w if w is not None else 1.0)}"
    return args.command


def prepare_output(args, name: str) -> Path:
    out = args.out
    if out is None:
        out = Path(os.environ.get(OUTPUT_ROOT_ENV, "sgacs-out")) / name
    if out.exists():
        if not out.is_dir():
            raise ConfigError(f"output path {out} exists and is not a directory", path=str(out))
        if any(out.iterdir()):
            if not args.force:
                raise ConfigError(f"output directory {out} is not empty; use --force", path=str(out))
            for child in out.iterdir():
                shutil.rmtree(child) if child.is_dir() and not child.is_symlink() else child.unlink()
    out.mkdir(parents=True, exist_ok=True)
    return out


def _figure1(raw: dict, out: Path) -> bool:
    fig = section_values(raw, "figure")
    w = fig["w"] if fig["w"] is not None else 1.0
    result = scenarios.figure1(w, scenarios.figure_grid(fig["extent"], fig["points"]))
    bundle = scenarios.Bundle(out)
    scenarios.write_figure1(result, bundle, fig["quiver_stride"])
    bundle.write_manifest([f"figure.w={format_value(w)}"])
    m = result.metrics
    log.info("ergo area %.4g, quiet area %.4g, masks symmetric: %s", m["ergo_area"], m["quiet_area"],
             m["mask_symmetric"])
    return bool(m["mask_symmetric"]) and m["core_speed_max"] == 0.0 and m["display_max"] <= scenarios.FIGURE_CLIP


def _fock(raw: dict, out: Path) -> bool:
    st = section_values(raw, "states")
    if st["alpha"] is None:
        raise ConfigError("fock needs states.alpha", path="states.alpha")
    bundle = scenarios.Bundle(out)
    scenarios.write_fock(bundle, st["alpha"], st["w"], st["cutoff"], prefix="")
    bundle.write_manifest([f"states.alpha={format_value(st['alpha'])}"])
    return True


def _validate(cfg: ScenarioConfig, out: Path) -> bool:
    grid = scenarios.build_grid(cfg)
    bg = scenarios.build_background(cfg, grid).background
    report, waived = scenarios.validate_background(bg, cfg)
    bundle = scenarios.Bundle(out)
    bundle.text("validation.csv", scenarios.validation_csv(report, waived))
    bundle.summary["validation.passed"] = scenarios.validation_passed(report, waived)
    bundle.write_manifest([f"scenario={cfg.name}"])
    for c in report.checks:
        log.info("%-20s %-10.3g tol %-10.3g %s", c.name, c.value, c.tolerance,
                 "pass" if c.passed else ("waived" if c.name in waived else "FAIL"))
    return scenarios.validation_passed(report, waived)


def execute(args) -> bool:
    raw = _raw_config(args)
    cfg = None
    if args.command in NEEDS_CONFIG:
        cfg = ScenarioConfig.from_raw(raw)
    out = prepare_output(args, _default_name(args, raw))
    args.resolved_out = out
    log.info("writing to %s", out)
    if args.command == "figure1":
        return _figure1(raw, out)
    if args.command == "fock":
        return _fock(raw, out)
    if args.command == "validate":
        return _validate(cfg, out)
    result = scenarios.run(cfg, out, STAGES[args.command])
    if not result.passed:
        failed = [n for n in result.validation.failed() if n not in result.waived]
        log.error("assumption checks failed: %s", ", ".join(failed))
    return result.passed


def _write_diagnostics(out: Path | None, exc: BaseException):
    if out is None:
        return
    lines = [f"error: {type(exc).__name__}: {exc}"]
    for attr in ("residual", "iterations"):
        if getattr(exc, attr, None) is not None:
            lines.append(f"{attr}: {getattr(exc, attr)}")
    last = getattr(exc, "last_good", None)
    if last is not None:
        lines.append(f"last finite state at t = {last.t!r}")
    lines += ["", "".join(traceback.format_exception(exc)).rstrip()]
    (out / "diagnostics.txt").write_text("\n".join(lines) + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", force=True)
    args.resolved_out = None
    start = time.perf_counter()
    try:
        ok = execute(args)
        code = EXIT_OK if ok else EXIT_INVALID
    except NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        _write_diagnostics(args.resolved_out, exc)
        code = EXIT_NUMERIC
    except SgacsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_INVALID
    elapsed = int(round(1000 * (time.perf_counter() - start)))
    print(f"RESULT {args.command} {'pass' if code == EXIT_OK else 'fail'} {elapsed}")
    return code


if __name__ == "__main__":
    sys.exit(main())
