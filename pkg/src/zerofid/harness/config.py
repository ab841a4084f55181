"""Experiment configuration files.

A config is a TOML document. Top-level keys:

``kind``            one of ``single_zero_fidelity``, ``rb``, ``irb``, ``folding``, ``twirl_check``
``n_qubits``        register size
``master_seed``     non-negative integer; the only source of randomness
``shots``           shots per (state, Pauli) setting; ``exact = true`` uses exact expectations
``runs``            repetitions (single_zero_fidelity, folding)
``L_sequences``     random sequences per length (rb, irb)
``m_grid``          sequence lengths or fold counts
``target_circuit``  ``"cz_layer"`` or a circuit file path, relative to the config file
``target_circuit_text``  inline circuit text (alternative to ``target_circuit``)
``output_dir``      where results are written, relative to the config file
``twirl_samples``, ``twirl_ensemble``  twirl_check only

and a ``[noise]`` table with ``spam`` (``none``/``weak``/``strong`` preset),
``gate_depolarizing`` (table from gate arity to strength, default
``{2 = 0.01}``), and optional ``readout`` / ``prep_rotation_sigma``
overrides of the preset.
"""
from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from zerofid.circuit import SPAM_LEVELS, Circuit, NoiseModel, cz_layer, spam_noise
from zerofid.errors import InvalidArgumentError, ZeroFidError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

KINDS = ("single_zero_fidelity", "rb", "irb", "folding", "twirl_check")
DEFAULT_GATE_NOISE = {2: 0.01}
DEFAULTS: dict[str, dict[str, Any]] = {
    "single_zero_fidelity": {"runs": 10, "shots": 1024},
    "rb": {"m_grid": list(range(1, 21)), "L_sequences": 30, "shots": 1024},
    "irb": {"m_grid": list(range(1, 21)), "L_sequences": 30, "shots": 1024},
    "folding": {"m_grid": list(range(0, 21, 2)), "runs": 10, "shots": 1024},
    "twirl_check": {"twirl_samples": 2000, "twirl_ensemble": "clifford"},
}
_TOP_KEYS = {"kind", "n_qubits", "master_seed", "shots", "exact", "runs", "L_sequences", "m_grid",
             "target_circuit", "target_circuit_text", "output_dir", "twirl_samples",
             "twirl_ensemble", "noise"}
_NOISE_KEYS = {"spam", "gate_depolarizing", "readout", "prep_rotation_sigma"}


class ConfigError(ZeroFidError, ValueError):
    """A configuration file is malformed or fails validation."""

    def __init__(self, message: str, field_name: str | None = None, source: str | None = None):
        where = f"{source}: " if source else ""
        what = f"field '{field_name}': " if field_name else ""
        super().__init__(f"{where}{what}{message}")
        self.field_name = field_name


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    n_qubits: int
    master_seed: int
    noise: NoiseModel
    spam: str = "custom"
    shots: int | None = 1024
    runs: int = 1
    L_sequences: int = 1
    m_grid: tuple[int, ...] = ()
    target_spec: str = "cz_layer"
    target_text: str | None = None
    output_dir: Path | None = None
    twirl_samples: int = 2000
    twirl_ensemble: str = "clifford"
    target: Circuit | None = field(default=None, compare=False)

    def to_dict(self) -> dict:
        """Self-contained echo: rerunning it reproduces the same outputs."""
        d: dict[str, Any] = {"kind": self.kind, "n_qubits": self.n_qubits,
                             "master_seed": self.master_seed}
        if self.kind in ("rb", "irb", "folding", "single_zero_fidelity"):
            if self.shots is None:
                d["exact"] = True
            else:
                d["shots"] = self.shots
        if self.kind in ("single_zero_fidelity", "folding"):
            d["runs"] = self.runs
        if self.kind in ("rb", "irb"):
            d["L_sequences"] = self.L_sequences
        if self.kind in ("rb", "irb", "folding"):
            d["m_grid"] = list(self.m_grid)
        if self.kind != "rb":
            if self.target_spec == "cz_layer":
                d["target_circuit"] = "cz_layer"
            else:
                d["target_circuit_text"] = self.target_text
        if self.kind == "twirl_check":
            d["twirl_samples"] = self.twirl_samples
            d["twirl_ensemble"] = self.twirl_ensemble
        noise = self.noise.to_dict()
        noise["spam"] = self.spam
        d["noise"] = noise
        return d


def _get_int(d: Mapping, key: str, default=None, minimum: int = 0) -> int:
    if key not in d:
        if default is None:
            raise ConfigError("required field is missing", key)
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"expected an integer, got {v!r}", key)
    if v < minimum:
        raise ConfigError(f"must be >= {minimum}, got {v}", key)
    return v


def _parse_noise(raw: Any) -> tuple[NoiseModel, str]:
    if raw is None:
        raw = {}
    if not isinstance(raw, Mapping):
        raise ConfigError("expected a table", "noise")
    unknown = set(raw) - _NOISE_KEYS
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}", "noise")
    spam = raw.get("spam", "none")
    if spam not in SPAM_LEVELS + ("custom",):
        raise ConfigError(f"expected one of {SPAM_LEVELS}, got {spam!r}", "noise.spam")
    gd_raw = raw.get("gate_depolarizing", DEFAULT_GATE_NOISE)
    if not isinstance(gd_raw, Mapping):
        raise ConfigError("expected a table from gate arity to strength", "noise.gate_depolarizing")
    try:
        gd = {int(k): float(v) for k, v in gd_raw.items()}
        base = spam_noise("none" if spam == "custom" else spam, gd)
        readout = raw.get("readout", base.readout)
        sigma = float(raw.get("prep_rotation_sigma", base.prep_rotation_sigma))
        noise = NoiseModel(gd, readout, sigma)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "noise") from None
    if ("readout" in raw or "prep_rotation_sigma" in raw) and spam != "none":
        preset = spam_noise(spam, gd)
        if noise.to_dict() != preset.to_dict():
            spam = "custom"
    elif spam == "none" and noise.has_spam:
        spam = "custom"
    return noise, spam


def parse_config(data: Mapping, base_dir: Path | None = None, source: str | None = None) -> ExperimentConfig:
    """Validate a config mapping (already decoded from TOML or JSON)."""
    try:
        return _parse(data, base_dir or Path("."))
    except ConfigError as exc:
        if source:
            raise ConfigError(str(exc), None, source) from None
        raise


def _parse(data: Mapping, base_dir: Path) -> ExperimentConfig:
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {sorted(unknown)}")
    kind = data.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"expected one of {KINDS}, got {kind!r}", "kind")
    defaults = DEFAULTS[kind]
    n = _get_int(data, "n_qubits", minimum=1)
    if kind in ("rb", "irb") and n > 3:
        raise ConfigError("randomized benchmarking supports at most 3 qubits", "n_qubits")
    if kind == "twirl_check" and n > 3:
        raise ConfigError("twirl_check supports at most 3 qubits", "n_qubits")
    if n > 8:
        raise ConfigError("at most 8 qubits are supported", "n_qubits")
    seed = _get_int(data, "master_seed")

    exact = data.get("exact", False)
    if not isinstance(exact, bool):
        raise ConfigError("expected true or false", "exact")
    shots = None if exact else _get_int(data, "shots", defaults.get("shots", 1024), minimum=1)
    runs = _get_int(data, "runs", defaults.get("runs", 1), minimum=1)
    L = _get_int(data, "L_sequences", defaults.get("L_sequences", 1), minimum=1)

    m_raw = data.get("m_grid", defaults.get("m_grid", []))
    if not isinstance(m_raw, list) or not all(isinstance(m, int) and not isinstance(m, bool) for m in m_raw):
        raise ConfigError("expected a list of integers", "m_grid")
    m_grid = tuple(sorted(set(m_raw)))
    if kind in ("rb", "irb", "folding"):
        if len(m_grid) == 0:
            raise ConfigError("must not be empty", "m_grid")
        lo = 1 if kind in ("rb", "irb") else 0
        if m_grid[0] < lo:
            raise ConfigError(f"values must be >= {lo}", "m_grid")

    noise, spam = _parse_noise(data.get("noise"))

    target_spec, target_text, target = "cz_layer", None, None
    if kind != "rb":
        if "target_circuit_text" in data:
            target_spec = "text"
            target_text = str(data["target_circuit_text"])
        else:
            spec = data.get("target_circuit", "cz_layer")
            if not isinstance(spec, str):
                raise ConfigError("expected \"cz_layer\" or a file path", "target_circuit")
            if spec != "cz_layer":
                path = (base_dir / spec)
                try:
                    target_text = path.read_text()
                except OSError as exc:
                    raise ConfigError(f"cannot read circuit file: {exc}", "target_circuit") from None
                target_spec = "text"
        try:
            target = (cz_layer(n) if target_spec == "cz_layer"
                      else Circuit.from_text(target_text, n_qubits=n))
        except InvalidArgumentError as exc:
            field_name = "target_circuit_text" if "target_circuit_text" in data else "target_circuit"
            raise ConfigError(str(exc), field_name) from None
        if kind == "irb":
            from zerofid.rbfold.clifford import is_clifford_circuit

            if not is_clifford_circuit(target):
                raise ConfigError("interleaved target must contain only Clifford gates", "target_circuit")

    out = data.get("output_dir")
    if out is not None and not isinstance(out, str):
        raise ConfigError("expected a path string", "output_dir")
    output_dir = (base_dir / out) if out else None

    samples = _get_int(data, "twirl_samples", defaults.get("twirl_samples", 2000), minimum=1)
    ensemble = data.get("twirl_ensemble", defaults.get("twirl_ensemble", "clifford"))
    if ensemble not in ("clifford", "haar"):
        raise ConfigError("expected \"clifford\" or \"haar\"", "twirl_ensemble")

    return ExperimentConfig(kind=kind, n_qubits=n, master_seed=seed, noise=noise, spam=spam,
                            shots=shots, runs=runs, L_sequences=L, m_grid=m_grid,
                            target_spec=target_spec, target_text=target_text,
                            output_dir=output_dir, twirl_samples=samples,
                            twirl_ensemble=ensemble, target=target)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a TOML config, or the ``config`` echo inside a previous ``result.json``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if path.suffix == ".json":
        import json

        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}",
                              None, str(path)) from None
        data = data.get("config", data) if isinstance(data, dict) else data
        if not isinstance(data, dict):
            raise ConfigError("expected a JSON object", None, str(path))
    else:
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}", None, str(path)) from None
    return parse_config(data, path.parent, str(path))
