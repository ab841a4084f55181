"""Execute experiment configs and persist their results.

Output files (all deterministic for a given config):

``result.json``  config echo, per-point records with per-run values, fits
                 and kind-specific summaries; keys sorted, two-space indent
``points.csv``   header ``m,mean,stderr``, one row per grid point, numbers
                 written with 12 significant digits
``points_reference.csv``  (irb only) the non-interleaved reference decay

Wall-clock time is reported on standard error, not stored, so reruns are
byte-identical.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from zerofid import __version__
from zerofid.channel import Channel, twirl_estimate, unitary_channel
from zerofid.circuit import Circuit, NoiseModel, evolve
from zerofid.errors import FitDegenerateError
from zerofid.fidelity import zero_fidelity, zero_fidelity_shot_estimate
from zerofid.harness.config import ExperimentConfig
from zerofid.parallel import ordered_map
from zerofid.rbfold.fit import DecayFit, DecayPoint, fit_decay, interleaved_gate_fidelity, summarize_point
from zerofid.rbfold.folding import folding_experiment_from_seed
from zerofid.rbfold.rb import rb_experiment_from_seed
from zerofid.seeding import child_seed, derive_rng

NUMBER_FORMAT = "{:.12g}"


@dataclass
class ExperimentResult:
    config: dict
    points: list[DecayPoint]
    fit: DecayFit | None = None
    extra: dict[str, Any] = field(default_factory=dict)
    reference_points: list[DecayPoint] | None = None

    def to_dict(self) -> dict:
        d = {
            "toolkit_version": __version__,
            "config": self.config,
            "points": [_point_dict(p) for p in self.points],
            "fit": None if self.fit is None else self.fit.to_dict(),
        }
        if self.reference_points is not None:
            d["reference_points"] = [_point_dict(p) for p in self.reference_points]
        d.update(self.extra)
        return d


def _point_dict(p: DecayPoint) -> dict:
    return {"m": p.m, "mean": p.mean, "stderr": p.stderr, "values": list(p.values)}


def points_csv(points: Sequence[DecayPoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["m", "mean", "stderr"])
    for p in points:
        w.writerow([p.m, NUMBER_FORMAT.format(p.mean), NUMBER_FORMAT.format(p.stderr)])
    return buf.getvalue()


def result_json(result: ExperimentResult) -> str:
    return json.dumps(result.to_dict(), indent=2, sort_keys=True) + "\n"


def noisy_circuit_channel(circuit: Circuit, noise: NoiseModel | None) -> Channel:
    """Superoperator of a circuit with per-gate depolarizing noise."""
    d = 2**circuit.n_qubits
    units = np.zeros((d * d, d, d), dtype=complex)
    for k in range(d * d):
        # column-stacked basis element k is |k mod d><k div d|
        units[k, k % d, k // d] = 1
    images = evolve(units, circuit, noise)
    return Channel.from_superoperator(np.stack([im.reshape(-1, order="F") for im in images], axis=1))


def _try_fit(points: Sequence[DecayPoint], n: int) -> tuple[DecayFit | None, str | None]:
    try:
        return fit_decay(points, n), None
    except FitDegenerateError as exc:
        return None, str(exc)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    runner = {
        "single_zero_fidelity": _run_single,
        "rb": _run_rb,
        "irb": _run_irb,
        "folding": _run_folding,
        "twirl_check": _run_twirl,
    }[cfg.kind]
    return runner(cfg, workers)


def _run_single(cfg: ExperimentConfig, workers: int) -> ExperimentResult:
    target = cfg.target
    ideal = unitary_channel(target.unitary())

    def one(run: int) -> float:
        rng = derive_rng(cfg.master_seed, "single", run)
        return zero_fidelity_shot_estimate(ideal, target, cfg.noise, cfg.shots, rng).normalized

    values = ordered_map(one, range(cfg.runs), workers)
    gate_only = zero_fidelity(ideal, noisy_circuit_channel(target, cfg.noise)).normalized
    extra = {"exact_gate_noise_zero_fidelity": gate_only}
    return ExperimentResult(cfg.to_dict(), [summarize_point(0, values)], None, extra)


def _run_rb(cfg: ExperimentConfig, workers: int) -> ExperimentResult:
    base = child_seed(derive_rng(cfg.master_seed, "rb"))
    points = rb_experiment_from_seed(cfg.n_qubits, cfg.m_grid, cfg.L_sequences, cfg.noise,
                                     cfg.shots, base, workers=workers)
    fit, why = _try_fit(points, cfg.n_qubits)
    extra = {} if why is None else {"fit_error": why}
    return ExperimentResult(cfg.to_dict(), points, fit, extra)


def _run_irb(cfg: ExperimentConfig, workers: int) -> ExperimentResult:
    # reference and interleaved runs share the sequence, preparation and shot streams
    base = child_seed(derive_rng(cfg.master_seed, "rb"))
    ref = rb_experiment_from_seed(cfg.n_qubits, cfg.m_grid, cfg.L_sequences, cfg.noise,
                                  cfg.shots, base, workers=workers)
    inter = rb_experiment_from_seed(cfg.n_qubits, cfg.m_grid, cfg.L_sequences, cfg.noise,
                                    cfg.shots, base, interleave_target=cfg.target, workers=workers)
    fit_ref, why_ref = _try_fit(ref, cfg.n_qubits)
    fit_int, why_int = _try_fit(inter, cfg.n_qubits)
    extra: dict[str, Any] = {"reference_fit": None if fit_ref is None else fit_ref.to_dict()}
    if fit_ref is not None and fit_int is not None and fit_ref.p > 0:
        extra["interleaved_gate_fidelity"] = interleaved_gate_fidelity(fit_ref, fit_int, cfg.n_qubits)
    ideal = unitary_channel(cfg.target.unitary())
    extra["exact_gate_noise_zero_fidelity"] = zero_fidelity(
        ideal, noisy_circuit_channel(cfg.target, cfg.noise)).normalized
    errors = [w for w in (why_ref, why_int) if w]
    if errors:
        extra["fit_error"] = "; ".join(errors)
    return ExperimentResult(cfg.to_dict(), inter, fit_int, extra, reference_points=ref)


def _run_folding(cfg: ExperimentConfig, workers: int) -> ExperimentResult:
    base = child_seed(derive_rng(cfg.master_seed, "folding"))
    points = folding_experiment_from_seed(cfg.target, cfg.m_grid, cfg.noise, cfg.shots,
                                          cfg.runs, base, workers=workers)
    fit, why = _try_fit(points, cfg.n_qubits)
    ideal = unitary_channel(cfg.target.unitary())
    extra: dict[str, Any] = {"exact_gate_noise_zero_fidelity": zero_fidelity(
        ideal, noisy_circuit_channel(cfg.target, cfg.noise)).normalized}
    if why is not None:
        extra["fit_error"] = why
    return ExperimentResult(cfg.to_dict(), points, fit, extra)


def _run_twirl(cfg: ExperimentConfig, workers: int) -> ExperimentResult:
    channel = noisy_circuit_channel(cfg.target, cfg.noise)
    report = twirl_estimate(channel, cfg.twirl_samples, derive_rng(cfg.master_seed, "twirl"),
                            ensemble=cfg.twirl_ensemble)
    point = DecayPoint(0, report.p_empirical, report.p_empirical_stderr, ())
    extra = {"twirl": {
        "p_empirical": report.p_empirical,
        "p_empirical_stderr": report.p_empirical_stderr,
        "p_formula": report.p_formula,
        "max_deviation_from_depolarizing": report.max_deviation_from_depolarizing,
        "n_samples": report.n_samples,
    }}
    return ExperimentResult(cfg.to_dict(), [point], None, extra)


def write_result(result: ExperimentResult, output_dir: Path) -> list[Path]:
    output_dir.mkdir(parents=True, exist_ok=True)
    files = {"result.json": result_json(result), "points.csv": points_csv(result.points)}
    if result.reference_points is not None:
        files["points_reference.csv"] = points_csv(result.reference_points)
    written = []
    for name, text in files.items():
        path = output_dir / name
        path.write_text(text)
        written.append(path)
    return written


def read_points_csv(path: Path) -> list[tuple[float, float]]:
    """``(m, mean)`` pairs from a points CSV; raises ``ValueError`` if malformed."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"m", "mean"} <= set(reader.fieldnames):
            raise ValueError("expected a header with columns 'm' and 'mean'")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            try:
                rows.append((float(row["m"]), float(row["mean"])))
            except (TypeError, ValueError):
                raise ValueError(f"line {lineno}: non-numeric m or mean") from None
    if len(rows) < 3:
        raise ValueError(f"need at least 3 data rows, got {len(rows)}")
    return rows

