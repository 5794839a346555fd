"""Command-line front end: sweeps, optimisation and fidelity runs with CSV/JSON output.

Every run writes its artifacts plus one ``<command>.manifest.json`` that
records the resolved device, the arguments and a SHA-256 of each output.
``ripzz rerun MANIFEST`` repeats a run from its manifest.

Frequencies on the command line are in GHz, times in ns, phases in rad.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ripzz import __version__
from ripzz import config as cfg
from ripzz.device import ConfigError, DegenerateDetuningError, DeviceConfig, validate_regime
from ripzz.dynamics import (
    IntegrationError,
    amplitude_for_mean_photon,
    cz_amplitude,
    device_closed_form,
    drive_asymmetry_sweep,
    residual_photon_map,
    zz_sweep,
)
from ripzz.pulses import VARIANTS, EnvelopeError, EnvelopeSpec, rescale_envelope, sample_envelope

OUT_ENV = "RIPZZ_OUT_DIR"
DEFAULT_OUT = "ripzz-out"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

# flags that shape the device; a rerun replaces them with the stored snapshot
_DEVICE_FLAGS = {"--preset": 1, "--config": 1, "--amplitude": 1, "--detuning": 1, "--mean-photon": 1, "--out": 1}


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    config: dict | None
    code_version: str
    seed: int | None
    wall_time: float
    outputs: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


class _Run:
    """Collects artifacts for one command invocation."""

    def __init__(self, out: Path, command: str):
        self.out = out
        self.command = command
        self.files: list[Path] = []

    def _path(self, suffix: str) -> Path:
        stem = self.command.replace(" ", "-")
        return self.out / f"{stem}{suffix}"

    def write_text(self, suffix: str, text: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        p = self._path(suffix)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.files.append(p)
        return p

    def write_csv(self, rows: list[dict], suffix: str = ".csv") -> Path:
        buf = io.StringIO()
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: _fmt(v) for k, v in r.items()})
        return self.write_text(suffix, buf.getvalue())

    def write_json(self, data, suffix: str = ".json") -> Path:
        return self.write_text(suffix, json.dumps(_plain(data), indent=2, allow_nan=True) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# argument helpers
# ---------------------------------------------------------------------------


def _grid(text: str) -> list[float]:
    """``a:b:n`` (inclusive, n points) or a comma list."""
    try:
        if ":" in text:
            a, b, n = text.split(":")
            n = int(n)
            if n < 1:
                raise ValueError
            return [float(x) for x in np.linspace(float(a), float(b), n)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'start:stop:count' or a comma list, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of integers, got {text!r}")


def _levels(text: str) -> tuple[int, int]:
    try:
        q, r = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected Q,R (e.g. 3,7), got {text!r}")
    return q, r


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=cfg.PRESET_NAMES, help="built-in device (default fsr1400)")
    src.add_argument("--config", type=Path, help="YAML device file")
    p.add_argument("--out", type=Path, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    p.add_argument("--dt", type=float, help="integration step in ns")
    p.add_argument("--seed", type=int, default=0, help="RNG seed for stochastic commands")
    p.add_argument("--levels", type=_levels, default=(3, 7), help="qubit,resonator truncation (default 3,7)")
    p.add_argument("--parallel", type=int, default=1, help="worker threads for grid points")
    p.add_argument("--amplitude", type=float, help="override both drive amplitudes (GHz)")
    p.add_argument("--detuning", type=float, help="override the mean drive detuning (GHz)")
    p.add_argument("--mean-photon", type=float, help="set the amplitude for this steady |00> photon number")
    p.add_argument("--dry-run", action="store_true", help="print the resolved configuration and exit")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    top = argparse.ArgumentParser(prog="ripzz", description=__doc__.splitlines()[0])
    top.add_argument("--version", action="version", version=__version__)
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("presets", parents=[common], help="list or show built-in devices")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")

    sub.add_parser("validate", parents=[common], help="check the dispersive-regime ratios")

    p = sub.add_parser("pulse", parents=[common], help="envelope samples")
    p.add_argument("action", choices=("dump",))
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--gate-time", type=float)
    p.add_argument("--degree", type=int)
    p.add_argument("--platform-ratio", type=float)
    p.add_argument("--coefficients", type=_grid)

    p = sub.add_parser("zz-sweep", parents=[common], help="steady-state ZZ rate against detuning")
    p.add_argument("--detunings", type=_grid, default=_grid("0.06:0.14:21"))
    p.add_argument("--modes", type=int, default=1, help="retained long-resonator modes (1 = single mode)")

    p = sub.add_parser("residual-map", parents=[common], help="residual photons over gate time and detuning")
    p.add_argument("--gate-times", type=_grid, default=_grid("60:240:10"))
    p.add_argument("--detunings", type=_grid, default=_grid("0.04:0.14:11"))

    p = sub.add_parser("asymmetry-sweep", parents=[common], help="phase against drive phase and coupling ratio")
    p.add_argument("--phases", type=_grid, default=_grid(f"0:{2 * math.pi}:13"))
    p.add_argument("--angles", type=_grid, default=_grid(f"0.3927:1.1781:5"))

    p = sub.add_parser("zz-vs-fsr", parents=[common], help="ZZ rate against free spectral range")
    p.add_argument("--fsrs", type=_grid, default=_grid("0.1,0.2,0.3,0.5,0.8,1.4,3.0"))
    p.add_argument("--modes", type=int, default=5)
    p.add_argument("--numeric", action="store_true", help="time-domain runs instead of the fixed point")

    p = sub.add_parser("mode-convergence", parents=[common], help="ZZ change as modes are added")
    p.add_argument("--modes", type=_ints, default=[1, 3, 5, 7, 9])
    p.add_argument("--ratio", type=float, default=13.0)

    p = sub.add_parser("optimize", parents=[common], help="differential evolution over Slepian coefficients")
    p.add_argument("--gate-time", type=float, default=100.0)
    p.add_argument("--dimension", type=int, default=7)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--population-factor", type=int, default=15)
    p.add_argument("--mutation", type=float, default=0.7)
    p.add_argument("--crossover", type=float, default=0.9)
    p.add_argument("--constraint-mode", choices=("penalty", "projection", "none"), default="none")
    p.add_argument("--theta-mode", choices=("rescale", "penalty"), default="rescale")
    p.add_argument("--theta-weight", type=float, default=10.0)
    p.add_argument("--modes", type=int, help="retained long-resonator modes (default from the device)")
    p.add_argument("--shootout", action="store_true", help="compare envelope families instead of optimising")
    p.add_argument("--gate-times", type=_grid, default=_grid("60,80,100,120,160,200,250"))

    for name, helptext in (("calibrate", "Ramsey controlled-phase calibration"), ("qpt", "process tomography")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--gate-time", type=float, help="rescale the device envelope to this duration")
        p.add_argument("--cz", action="store_true", help="scale the drive so the coherent phase is pi")

    p = sub.add_parser("rerun", help="repeat a run from its manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path)
    return top


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------


def _resolve_device(args) -> DeviceConfig:
    if args.config is not None:
        try:
            dev = cfg.load(args.config)
        except OSError as exc:
            raise ConfigError(f"{args.config}: {exc.strerror or exc}") from exc
    else:
        dev = cfg.preset(args.preset or "fsr1400")
    if args.amplitude is not None:
        dev = dev.with_drive(amplitude=args.amplitude)
    if args.detuning is not None:
        dev = dev.with_detuning(args.detuning)
    if args.mean_photon is not None:
        dev = amplitude_for_mean_photon(dev, args.mean_photon)
    return dev


def _dt(args, default: float) -> float:
    return default if args.dt is None else args.dt


def _ladder(dev: DeviceConfig, modes: int | None):
    from ripzz.multimode import mode_ladder

    if modes is None:
        modes = dev.long_resonator.mode_count
    return None if modes <= 1 else mode_ladder(dev, modes)


def cmd_presets(args, run: _Run, dev):
    if args.action == "list":
        rows = []
        for name in cfg.PRESET_NAMES:
            d = cfg.preset(name)
            chi_l, chi_r = d.dispersive_shifts()
            rows.append(
                {
                    "name": name,
                    "fsr_ghz": d.long_resonator.fsr,
                    "mode_index": d.long_resonator.selected_mode_index,
                    "detuning_ghz": round(float(np.mean(d.detunings()[::2])), 9),
                    "amplitude_ghz": d.left_drive.amplitude,
                    "chi_left_mhz": chi_l * 1e3,
                    "chi_right_mhz": chi_r * 1e3,
                    "degree": d.left_drive.envelope.degree,
                    "gate_time_ns": cfg.preset_gate_time(name),
                }
            )
        for r in rows:
            print("  ".join(f"{k}={_fmt(v)}" for k, v in r.items()))
        run.write_csv(rows)
        return None
    if not args.name:
        raise ConfigError("presets show needs a preset name")
    text = cfg.dumps(cfg.preset(args.name))
    print(text, end="")
    run.write_text(".yaml", text)
    return None


def cmd_validate(args, run: _Run, dev):
    rep = validate_regime(dev)
    for c in rep.checks:
        print(f"{c.status:5s} {c.name}: ratio {c.ratio:.3f}")
    print("ok" if rep.ok else "regime check failed")
    run.write_json(rep.to_dict())
    return None


def cmd_pulse(args, run: _Run, dev):
    env = dev.left_drive.envelope
    changes = {}
    if args.variant:
        changes["variant"] = args.variant
    if args.degree is not None:
        changes["degree"] = args.degree
    if args.platform_ratio is not None:
        changes["platform_ratio"] = args.platform_ratio
    if args.coefficients is not None:
        changes["coefficients"] = tuple(args.coefficients)
    if changes:
        d = env.to_dict()
        d.update(changes)
        env = EnvelopeSpec.from_dict(d)
    if args.gate_time is not None:
        env = rescale_envelope(env, args.gate_time)
    s = sample_envelope(env, _dt(args, 0.1))
    run.write_csv([{"t_ns": t, "envelope": v} for t, v in zip(s.times, s.samples)])
    run.write_json({"envelope": env.to_dict(), "dt": s.dt, "samples": int(s.samples.size)})
    return None


def cmd_zz_sweep(args, run: _Run, dev):
    res = zz_sweep(dev, args.detunings, dt=_dt(args, 0.02), ladder=_ladder(dev, args.modes), parallel=args.parallel)
    rows = [r.to_row() for r in res]
    run.write_csv(rows)
    run.write_json({"results": rows, "closed_form_at_device": list(device_closed_form(dev))})
    return None


def cmd_residual_map(args, run: _Run, dev):
    m = residual_photon_map(dev, args.gate_times, args.detunings, dt=_dt(args, 0.02))
    rows = [
        {"gate_time_ns": T, "detuning_ghz": d, "residual_photons": float(m[i, j])}
        for i, T in enumerate(args.gate_times)
        for j, d in enumerate(args.detunings)
    ]
    run.write_csv(rows)
    return None


def cmd_asymmetry(args, run: _Run, dev):
    pts = drive_asymmetry_sweep(dev, args.phases, args.angles, dt=_dt(args, 0.02))
    run.write_csv([asdict(p) for p in pts])
    return None


def cmd_zz_vs_fsr(args, run: _Run, dev):
    from ripzz.multimode import zz_vs_fsr

    pts = zz_vs_fsr(dev, args.fsrs, args.modes, numeric=args.numeric, dt=_dt(args, 0.02))
    run.write_csv([asdict(p) for p in pts])
    return None


def cmd_mode_convergence(args, run: _Run, dev):
    from ripzz.multimode import convergence_check

    rep = convergence_check(dev, args.modes, ratio=args.ratio)
    run.write_csv([asdict(r) for r in rep.rows])
    run.write_json({"ok": rep.ok, "ratio": rep.ratio, "tolerance": rep.tolerance})
    return None


def cmd_optimize(args, run: _Run, dev):
    from ripzz.optimizer import DEConfig, OptimizationProblem, envelope_shootout, optimize

    problem = OptimizationProblem(
        dev,
        gate_time=args.gate_time,
        dimension=args.dimension,
        constraint_mode=args.constraint_mode,
        theta_mode=args.theta_mode,
        theta_weight=args.theta_weight,
        ladder=_ladder(dev, args.modes),
    )
    if args.shootout:
        rows = envelope_shootout(problem, gate_times=args.gate_times, dt=_dt(args, 0.05))
        run.write_csv([asdict(r) for r in rows])
        return None
    de = DEConfig(args.population_factor, args.mutation, args.crossover, args.generations, args.seed)
    res = optimize(problem, de, search_dt=_dt(args, 0.05), parallel=args.parallel)
    run.write_json(res.to_dict())
    run.write_csv([{"generation": i + 1, "best_objective": v} for i, v in enumerate(res.trace)], "-trace.csv")
    print(f"residual photons {res.residual_photons:.3e}, theta {res.theta:.6f} rad")
    return args.seed


def _quantum_device(args, dev):
    if args.gate_time is not None:
        dev = dev.with_envelope(rescale_envelope(dev.left_drive.envelope, args.gate_time))
    if args.cz:
        dev = cz_amplitude(dev, dt=0.01)
    return dev


def cmd_calibrate(args, run: _Run, dev):
    from ripzz.quantum import HilbertSpec, calibrate_controlled_phase

    q, r = args.levels
    dev = _quantum_device(args, dev)
    cal = calibrate_controlled_phase(dev, HilbertSpec.uniform(r, q), dt=_dt(args, 0.005))
    out = cal.to_dict() | {"amplitude_ghz": dev.left_drive.amplitude, "gate_time_ns": dev.left_drive.envelope.duration}
    run.write_json(out)
    run.write_csv(
        [
            {"t_ns": t, "controlled_phase": p, "target_plus_control0": a, "target_plus_control1": b}
            for t, p, a, b in zip(cal.times, cal.phase_trace, cal.target_plus_control0, cal.target_plus_control1)
        ]
    )
    run.write_csv(
        [
            {"analysis_phase": f, "control0": a, "control1": b}
            for f, a, b in zip(cal.analysis_phases, cal.fringe_control0, cal.fringe_control1)
        ],
        "-fringe.csv",
    )
    print(f"controlled phase {cal.phase:.6f} rad, leakage {cal.leakage:.3e}")
    return None


def cmd_qpt(args, run: _Run, dev):
    from ripzz.quantum import HilbertSpec, qpt_fidelity

    q, r = args.levels
    dev = _quantum_device(args, dev)
    rep = qpt_fidelity(dev, HilbertSpec.uniform(r, q), dt=_dt(args, 0.005))
    out = rep.to_dict() | {"amplitude_ghz": dev.left_drive.amplitude}
    run.write_json(out)
    print(f"process fidelity {rep.process_fidelity:.6f}, leakage {rep.leakage:.3e}")
    return None


COMMANDS = {
    "presets": cmd_presets,
    "validate": cmd_validate,
    "pulse": cmd_pulse,
    "zz-sweep": cmd_zz_sweep,
    "residual-map": cmd_residual_map,
    "asymmetry-sweep": cmd_asymmetry,
    "zz-vs-fsr": cmd_zz_vs_fsr,
    "mode-convergence": cmd_mode_convergence,
    "optimize": cmd_optimize,
    "calibrate": cmd_calibrate,
    "qpt": cmd_qpt,
}


def _strip_device_flags(argv: list[str]) -> list[str]:
    out, skip = [], 0
    for a in argv:
        if skip:
            skip -= 1
            continue
        key = a.split("=", 1)[0]
        if key in _DEVICE_FLAGS:
            skip = _DEVICE_FLAGS[key] if "=" not in a else 0
            continue
        out.append(a)
    return out


def _rerun(args) -> int:
    try:
        man = json.loads(args.manifest.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read manifest {args.manifest}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    argv = _strip_device_flags(man["argv"])
    out = args.out or Path(man.get("out_dir", "."))
    with tempfile.TemporaryDirectory() as tmp:
        extra = []
        if man.get("config") is not None:
            path = Path(tmp) / "config.yaml"
            path.write_text(cfg.dumps(DeviceConfig.from_dict(man["config"])), encoding="utf-8")
            extra = ["--config", str(path)]
        return main(argv + extra + ["--out", str(out)])


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "rerun":
        return _rerun(args)

    out = args.out or Path(os.environ.get(OUT_ENV, DEFAULT_OUT))
    command = args.command + (f" {args.action}" if args.command in ("presets", "pulse") else "")
    t0 = time.perf_counter()
    try:
        dev = _resolve_device(args)
        if args.dry_run:
            print(f"# {command}")
            print(cfg.dumps(dev), end="")
            params = {k: v for k, v in vars(args).items() if k not in ("config", "out", "dry_run")}
            print("# arguments: " + json.dumps(_plain({k: str(v) if isinstance(v, Path) else v for k, v in params.items()})))
            return EXIT_OK
        run = _Run(out, command)
        seed = COMMANDS[args.command](args, run, dev)
    except (ConfigError, EnvelopeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, DegenerateDetuningError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # dimension caps and bad parameter combinations
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    snapshot = None if args.command == "presets" else cfg.device_to_dict(dev)
    man = RunManifest(
        command=command,
        argv=argv,
        config=snapshot,
        code_version=__version__,
        seed=seed,
        wall_time=time.perf_counter() - t0,
        outputs=[{"path": p.name, "sha256": _sha256(p)} for p in run.files],
    )
    data = asdict(man) | {"out_dir": str(out)}
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{command.replace(' ', '-')}.manifest.json").write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")
    for p in run.files:
        print(p)
    return EXIT_OK


def entry() -> None:  # console script
    sys.exit(main())
