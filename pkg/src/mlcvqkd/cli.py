"""Command-line pipeline driver.

Subcommands: simulate | learn | predict | evaluate | keyrate | optimize |
attack-demo. Every run takes a JSON config (--config), an optional master
seed override (--seed), an output directory (--out), and a format flag.
The effective configuration, defaults merged in, is written next to the
results so a run can be reproduced exactly by re-ingesting that file.

Determinism: the master seed is split through numpy's SeedSequence spawn
tree into one child stream per pipeline stage (simulate, learn, predict,
evaluate), so changing one stage's workload never perturbs another
stage's draws.

Exit codes: 0 success, 2 configuration error, 3 numerical-domain error,
4 learning rejected by the AUC gate.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import classifier as qmlc
from .channel import ChannelParams, RandomSource, transmit_batch
from .errors import InvalidInputError, LearningRejectedError, MlcvqkdError
from .keyrate import KeyRateParams, Protocol, optimize_vm, rate_asymptotic, rate_finite
from .protocol import (
    SessionConfig,
    format_attack_table,
    intercept_resend_demo,
    state_learning,
    state_prediction,
)
from .statespace import ModulationKind, build_scheme

# stage index of each subcommand in the master seed's spawn order
_STAGE = {"simulate": 0, "learn": 1, "predict": 2, "evaluate": 3}
_N_STAGES = 4

DEFAULT_CONFIG = {
    "seed": 20240901,
    "scheme": {"kind": "8psk", "vm": 50.0},
    "channel": {
        "distance_km": 20.0,
        "loss_db_per_km": 0.2,
        "excess_noise": 0.01,
        "phase_drift_rad": 0.0,
        "shot_noise": 1.0,
    },
    "classifier": {"k": 9, "s": 1.0, "t": 1.0},
    "session": {
        "training_size": 5000,
        "testing_size": 10_000,
        "prediction_block": 10_000,
        "rule_id": "rule2",
        "auc_threshold": 0.9,
        "filter_quantile": 0.995,
        "filter_threshold": None,
    },
    "simulate": {"population": 10_000},
    "keyrate": {
        "protocol": "eight-state",
        "vm": 0.35,
        "distances_km": [0, 5, 10, 20, 40, 60, 80, 100],
        "excess_noise": 0.01,
        "eta": 0.6,
        "v_el": 0.05,
        "beta": 0.98,
        "lam": 0.927,
        "finite": False,
        "N": 1_000_000,
        "n_fraction": 0.5,
        "eps_bar": 1e-10,
        "eps_pe": 1e-10,
        "eps_pa": 1e-10,
        "ml_eve_term": 0.0,
    },
    "optimize": {
        "protocol": "eight-state",
        "distances_km": [20, 40, 60, 80, 100],
        "v_lo": 0.05,
        "v_hi": 20.0,
    },
    "evaluate": {
        "vm_grid": [30.0, 50.0],
        "distance_grid": [10.0, 20.0],
    },
}


def _merge(defaults, override, path=""):
    """Recursive dict merge; scalar overrides replace, unknown keys rejected."""
    if not isinstance(override, dict):
        raise InvalidInputError(f"config section {path or '<root>'} must be an object")
    merged = dict(defaults)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in defaults:
            raise InvalidInputError(f"unknown config key: {here}")
        if isinstance(defaults[key], dict):
            merged[key] = _merge(defaults[key], value, here)
        else:
            merged[key] = value
    return merged


def load_config(path: str | None, seed_override: int | None) -> dict:
    config = DEFAULT_CONFIG
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except FileNotFoundError:
            raise InvalidInputError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"config file {path} is not valid JSON: {exc}") from None
        config = _merge(DEFAULT_CONFIG, user)
    else:
        config = json.loads(json.dumps(DEFAULT_CONFIG))
    if seed_override is not None:
        config["seed"] = seed_override
    return config


def _stage_rng(config: dict, stage: str) -> RandomSource:
    master = RandomSource(int(config["seed"]))
    return master.split(_N_STAGES)[_STAGE[stage]]


def _session_config(config: dict) -> SessionConfig:
    ch = config["channel"]
    return SessionConfig(
        kind=ModulationKind(config["scheme"]["kind"]),
        vm=float(config["scheme"]["vm"]),
        channel=ChannelParams(
            distance_km=float(ch["distance_km"]),
            loss_db_per_km=float(ch["loss_db_per_km"]),
            excess_noise=float(ch["excess_noise"]),
            phase_drift=float(ch["phase_drift_rad"]),
            shot_noise=float(ch["shot_noise"]),
        ),
        qmlc=qmlc.QmlcParams(
            k=int(config["classifier"]["k"]),
            s=float(config["classifier"]["s"]),
            t=float(config["classifier"]["t"]),
        ),
        training_size=int(config["session"]["training_size"]),
        testing_size=int(config["session"]["testing_size"]),
        prediction_block=int(config["session"]["prediction_block"]),
        rule_id=config["session"]["rule_id"],
        auc_threshold=float(config["session"]["auc_threshold"]),
        filter_quantile=config["session"]["filter_quantile"],
        filter_threshold=config["session"]["filter_threshold"],
    )


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in row])


def _write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _emit_effective_config(config: dict, out_dir: Path) -> None:
    _write_json(out_dir / "effective_config.json", config)


def cmd_simulate(config: dict, out_dir: Path, fmt: str) -> int:
    scheme = build_scheme(config["scheme"]["kind"], float(config["scheme"]["vm"]))
    session = _session_config(config)
    population = int(config["simulate"]["population"])
    rng_states, rng_channel = _stage_rng(config, "simulate").split(2)

    drawn = rng_states.integers(0, scheme.n_states, population)
    points = np.array([[s.point.q, s.point.p] for s in scheme.states])[drawn]
    received = transmit_batch(points, session.channel, rng_channel)

    rows = [
        [int(k + 1), float(q), float(p), float(q2), float(p2)]
        for k, (q, p), (q2, p2) in zip(drawn, points, received)
    ]
    _write_csv(out_dir / "samples.csv", ["true_state", "q_in", "p_in", "q_out", "p_out"], rows)
    _emit_effective_config(config, out_dir)
    print(f"simulate: wrote {population} rows to {out_dir / 'samples.csv'}")
    return 0


def cmd_learn(config: dict, out_dir: Path, fmt: str) -> int:
    session = _session_config(config)
    outcome = state_learning(session, _stage_rng(config, "learn"))
    _write_json(out_dir / "classifier.json", outcome.classifier.to_json_dict())
    report = outcome.report.to_json_dict()
    report["filter_threshold"] = outcome.filter_threshold
    report["discard_rate"] = outcome.discard_rate
    _write_json(out_dir / "evaluation.json", report)
    _emit_effective_config(config, out_dir)
    print(
        f"learn: average AUC {outcome.report.average_auc:.4f}, "
        f"macro precision {outcome.report.macro_precision:.4f}, "
        f"macro recall {outcome.report.macro_recall:.4f}"
    )
    return 0


def cmd_predict(config: dict, out_dir: Path, fmt: str, classifier_path: str | None) -> int:
    if classifier_path is None:
        raise InvalidInputError("predict needs --classifier <classifier.json> from a learn run")
    try:
        with open(classifier_path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        print(f"error: classifier file not found: {classifier_path}", file=sys.stderr)
        return 1
    clf = qmlc.TrainedClassifier.from_json_dict(doc)
    session = _session_config(config)
    transcript = state_prediction(clf, session, _stage_rng(config, "predict"))
    _write_json(out_dir / "transcript.json", transcript.to_json_dict())
    _emit_effective_config(config, out_dir)
    print(
        f"predict: {transcript.n_sent} symbols, {transcript.n_erased} erased, "
        f"agreement rate {transcript.agreement_rate:.4f}"
    )
    return 0


def cmd_evaluate(config: dict, out_dir: Path, fmt: str) -> int:
    rows = []
    grid_rngs_parent = _stage_rng(config, "evaluate")
    vm_grid = list(config["evaluate"]["vm_grid"])
    distance_grid = list(config["evaluate"]["distance_grid"])
    cells = [(vm, d) for vm in vm_grid for d in distance_grid]
    rngs = grid_rngs_parent.split(len(cells))
    for (vm, distance), rng in zip(cells, rngs):
        cell_config = json.loads(json.dumps(config))
        cell_config["scheme"]["vm"] = float(vm)
        cell_config["channel"]["distance_km"] = float(distance)
        session = _session_config(cell_config)
        try:
            outcome = state_learning(session, rng)
            report = outcome.report
        except LearningRejectedError as exc:
            report = exc.report
        rows.append([
            float(vm), float(distance),
            report.macro_precision, report.macro_recall, report.macro_fpr,
            report.average_precision, report.average_auc, report.erasure_rate,
        ])
    _write_csv(
        out_dir / "metric_sweep.csv",
        ["vm", "distance_km", "macro_precision", "macro_recall", "macro_fpr",
         "average_precision", "average_auc", "erasure_rate"],
        rows,
    )
    _emit_effective_config(config, out_dir)
    print(f"evaluate: wrote {len(rows)} grid cells to {out_dir / 'metric_sweep.csv'}")
    return 0


def _keyrate_params(section: dict, vm: float, transmittance: float, protocol: Protocol) -> KeyRateParams:
    finite = bool(section["finite"])
    big_n = int(section["N"]) if finite else None
    n = int(round(section["n_fraction"] * big_n)) if finite else None
    return KeyRateParams(
        vm=vm,
        transmittance=transmittance,
        excess_noise=float(section["excess_noise"]),
        eta=float(section["eta"]),
        v_el=float(section["v_el"]),
        beta=float(section["beta"]),
        lam=float(section["lam"]),
        protocol=protocol,
        n=n,
        big_n=big_n,
        eps_bar=float(section["eps_bar"]),
        eps_pe=float(section["eps_pe"]),
        eps_pa=float(section["eps_pa"]),
        ml_eve_term=float(section["ml_eve_term"]),
    )


def cmd_keyrate(config: dict, out_dir: Path, fmt: str) -> int:
    from .channel import transmittance_from_distance

    section = config["keyrate"]
    protocol = Protocol(section["protocol"])
    finite = bool(section["finite"])
    rows = []
    for distance in section["distances_km"]:
        t = transmittance_from_distance(float(distance))
        params = _keyrate_params(section, float(section["vm"]), t, protocol)
        result = rate_finite(params) if finite else rate_asymptotic(params)
        rows.append([
            float(distance), t, params.vm, result.mutual_information,
            result.holevo_term, result.delta_n if result.delta_n is not None else 0.0,
            result.key_rate, protocol.value,
        ])
    _write_csv(
        out_dir / "keyrate.csv",
        ["distance_km", "transmittance", "vm", "mutual_information", "holevo_term",
         "delta_n", "key_rate", "protocol"],
        rows,
    )
    _emit_effective_config(config, out_dir)
    print(f"keyrate: wrote {len(rows)} distances to {out_dir / 'keyrate.csv'}")
    return 0


def cmd_optimize(config: dict, out_dir: Path, fmt: str) -> int:
    section = config["optimize"]
    protocol = Protocol(section["protocol"])
    krs = config["keyrate"]
    base = _keyrate_params(krs, vm=1.0, transmittance=0.5, protocol=protocol)
    results = optimize_vm(
        protocol,
        [float(d) for d in section["distances_km"]],
        base,
        v_lo=float(section["v_lo"]),
        v_hi=float(section["v_hi"]),
    )
    rows = [
        [r.distance_km, r.vm, r.key_rate, int(r.no_positive_rate)]
        for r in results
    ]
    _write_csv(
        out_dir / "optimal_vm.csv",
        ["distance_km", "optimal_vm", "key_rate", "no_positive_rate"],
        rows,
    )
    _emit_effective_config(config, out_dir)
    print(f"optimize: wrote {len(rows)} distances to {out_dir / 'optimal_vm.csv'}")
    return 0


def cmd_attack_demo() -> int:
    print(format_attack_table(intercept_resend_demo()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mlcvqkd",
        description="Multi-label-learning CVQKD pipeline: simulation, classification, key rates.",
    )
    parser.add_argument("--config", help="JSON config file; defaults cover every key")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--out", default=".", help="output directory (created if missing)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv", help="tabular output format")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "learn", "evaluate", "keyrate", "optimize", "attack-demo"):
        sub.add_parser(name)
    predict = sub.add_parser("predict")
    predict.add_argument("--classifier", help="classifier.json produced by the learn subcommand")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "attack-demo":
            return cmd_attack_demo()
        config = load_config(args.config, args.seed)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "simulate":
            return cmd_simulate(config, out_dir, args.format)
        if args.command == "learn":
            return cmd_learn(config, out_dir, args.format)
        if args.command == "predict":
            return cmd_predict(config, out_dir, args.format, args.classifier)
        if args.command == "evaluate":
            return cmd_evaluate(config, out_dir, args.format)
        if args.command == "keyrate":
            return cmd_keyrate(config, out_dir, args.format)
        if args.command == "optimize":
            return cmd_optimize(config, out_dir, args.format)
        raise AssertionError(f"unhandled command {args.command}")
    except MlcvqkdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
