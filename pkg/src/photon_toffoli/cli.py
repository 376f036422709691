"""Command-line entry point: one scenario per invocation, deterministic output.

Exit codes: 0 success, 1 scientific failure (diagnostic JSON on stdout),
2 usage error.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .experiment import (
    CONTROL_STATES,
    DEFAULT_DURATION,
    NoiseModel,
    resolve_channel,
    cnot_crosstalk,
    records_to_csv,
    truth_table,
)
from .hilbert import DensityMatrix, dumps, logical_to_physical
from .network import (
    CalibrationError,
    build_toffoli_elements,
    calibrate,
    calibrated_toffoli,
    perturb,
    random_offsets,
    verify_blocks,
)
from .tomography import (
    BELL_STATES,
    BELL_INPUTS,
    bell_scenarios,
    fidelity_grid,
    measure_settings,
    settings_for,
    tomography_report,
)

SCENARIOS = ("truth-table", "cnot-crosstalk", "bell", "fidelity-grid", "tomography", "calibrate", "verify")
CSV_SCENARIOS = ("truth-table", "cnot-crosstalk", "tomography")
TOMOGRAPHY_TARGETS = {"Phi-": "(|0>-|1>)/sqrt2 x |0>", "Psi-": "(|0>-|1>)/sqrt2 x |1>"}


class ScientificFailure(Exception):
    def __init__(self, payload: dict):
        super().__init__("scientific failure")
        self.payload = payload


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="photon-toffoli", description="Single-photon SAM/OAM Toffoli gate simulator.")
    p.add_argument("scenario", choices=SCENARIOS)
    p.add_argument("--noise", default=None, help="noise config file (bare names resolve to the shipped configs)")
    p.add_argument("--duration", type=float, default=DEFAULT_DURATION, help="seconds per measurement setting")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--mc-samples", type=int, default=100, help="Poisson resamples for tomography error bars")
    p.add_argument("--target", choices=sorted(TOMOGRAPHY_TARGETS), default="Phi-", help="Bell output for `tomography`")
    p.add_argument("--perturb", action="store_true", help="`calibrate`: start from random drifts drawn from --seed")
    return p


def _truth_table(args, noise):
    m = truth_table(noise=noise, duration=args.duration, seed=args.seed)
    return m.to_json(), m.records


def _cnot(args, noise):
    out, records = {}, []
    for k, control in enumerate(CONTROL_STATES):
        m = cnot_crosstalk(control=control, noise=noise, duration=args.duration, seed=args.seed + k)
        out[control] = m.to_json()
        records.extend(m.records)
    return out, records


def _tomography(args, noise):
    label = TOMOGRAPHY_TARGETS[args.target]
    tail, bell = BELL_INPUTS[label]
    channel = resolve_channel(None, noise, args.seed)
    settings = settings_for(2)
    state = logical_to_physical(np.kron([0, 1], tail))
    records = measure_settings(channel, state, settings, noise, args.duration, args.seed, label)
    expected = DensityMatrix.from_pure(BELL_STATES[bell])
    report = tomography_report(records, settings, expected, args.mc_samples, args.seed)
    return {"input": label, "expected": bell, **report}, records


def _calibrate(args, noise):
    circuit = build_toffoli_elements()
    if args.perturb:
        circuit = perturb(circuit, random_offsets(circuit, args.seed))
    try:
        report = calibrate(circuit)
    except CalibrationError as e:
        raise ScientificFailure({"error": "calibration below threshold", **e.report.to_json()}) from e
    return report.to_json(), None


def _verify(args, noise):
    result = verify_blocks()
    # element-level: calibrated circuit and one perturb-and-recover run
    _, report = calibrated_toffoli()
    circuit = build_toffoli_elements()
    try:
        drift = calibrate(perturb(circuit, random_offsets(circuit, args.seed)))
        drift_f = drift.process_fidelity
    except CalibrationError as e:
        drift_f = e.report.process_fidelity
    result["checks"]["elements_calibrated"] = bool(report.process_fidelity >= 0.999)
    result["checks"]["perturb_and_recover"] = bool(drift_f >= 0.999)
    result["element_fidelity"] = float(report.process_fidelity)
    result["recovered_fidelity"] = float(drift_f)
    result["ok"] = all(result["checks"].values())
    if not result["ok"]:
        raise ScientificFailure(result)
    return result, None


def run(args, noise: NoiseModel) -> str:
    if args.scenario == "bell":
        payload, records = bell_scenarios(noise, args.duration, args.seed, args.mc_samples), None
    elif args.scenario == "fidelity-grid":
        payload, records = fidelity_grid(noise, args.duration, args.seed, args.mc_samples), None
    else:
        handler = {
            "truth-table": _truth_table,
            "cnot-crosstalk": _cnot,
            "tomography": _tomography,
            "calibrate": _calibrate,
            "verify": _verify,
        }[args.scenario]
        payload, records = handler(args, noise)
    if args.format == "csv":
        return records_to_csv(records)
    return dumps(payload) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format == "csv" and args.scenario not in CSV_SCENARIOS:
        parser.error(f"--format csv is only available for {', '.join(CSV_SCENARIOS)}")
    if args.duration <= 0:
        parser.error("--duration must be positive")
    if args.mc_samples < 0 or args.mc_samples == 1:
        parser.error("--mc-samples must be 0 (off) or at least 2")
    try:
        noise = NoiseModel.load(args.noise) if args.noise else NoiseModel()
    except (OSError, ValueError) as e:
        parser.error(f"--noise: {e}")
    try:
        text = run(args, noise)
    except ScientificFailure as e:
        _emit(dumps(e.payload) + "\n", args.out)
        return 1
    _emit(text, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
