"""Clifford tableaux, randomized benchmarking, identity folding and decay fits."""

from zerofid.rbfold.clifford import (
    CliffordElement,
    clifford_to_circuit,
    clifford_to_unitary,
    compose,
    inverse,
    random_clifford,
)
from zerofid.rbfold.fit import DecayFit, DecayPoint, fit_decay, interleaved_gate_fidelity
from zerofid.rbfold.folding import fold_circuit, folding_experiment
from zerofid.rbfold.rb import RBSequence, rb_experiment, rb_sequence, sequence_zero_fidelity

__all__ = [
    "CliffordElement", "DecayFit", "DecayPoint", "RBSequence", "clifford_to_circuit",
    "clifford_to_unitary", "compose", "fit_decay", "fold_circuit", "folding_experiment",
    "interleaved_gate_fidelity", "inverse", "random_clifford", "rb_experiment", "rb_sequence",
    "sequence_zero_fidelity",
]
