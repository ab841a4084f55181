"""Stabilizer tableaux for the 1-3 qubit Clifford group.

A :class:`CliffordElement` stores the conjugation action ``C P C^dagger`` on
the generators: row ``i < n`` is the image of ``X_i`` and row ``n + i`` the
image of ``Z_i``, each a Hermitian Pauli ``(-1)**r i**(x.z) X**x Z**z``.
Global phase is not represented.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import prod

import numpy as np

from zerofid.circuit import Circuit, Gate
from zerofid.errors import InvalidArgumentError, UnsupportedError

MAX_CLIFFORD_QUBITS = 3
CLIFFORD_GATES = ("H", "S", "Sdg", "X", "Y", "Z", "CNOT", "CZ")


def clifford_group_order(n_qubits: int) -> int:
    """Order of the n-qubit Clifford group modulo global phase."""
    sp = 2 ** (n_qubits**2) * prod(4**j - 1 for j in range(1, n_qubits + 1))
    return sp * 4**n_qubits


def _check_n(n_qubits: int) -> None:
    if not 1 <= n_qubits <= MAX_CLIFFORD_QUBITS:
        raise UnsupportedError(
            f"Clifford machinery supports 1 to {MAX_CLIFFORD_QUBITS} qubits, got {n_qubits}")


def _symplectic(a: np.ndarray, b: np.ndarray, n: int) -> int:
    return int((a[:n] @ b[n:] + a[n:] @ b[:n]) % 2)


@dataclass(frozen=True, eq=False)
class CliffordElement:
    n_qubits: int
    x: np.ndarray  # (2n, n) uint8
    z: np.ndarray  # (2n, n) uint8
    r: np.ndarray  # (2n,) uint8

    def __post_init__(self):
        for a in (self.x, self.z, self.r):
            a.setflags(write=False)

    @classmethod
    def identity(cls, n_qubits: int) -> "CliffordElement":
        _check_n(n_qubits)
        eye = np.eye(n_qubits, dtype=np.uint8)
        zero = np.zeros((n_qubits, n_qubits), dtype=np.uint8)
        return cls(n_qubits, np.vstack([eye, zero]), np.vstack([zero, eye]),
                   np.zeros(2 * n_qubits, dtype=np.uint8))

    @classmethod
    def from_circuit(cls, circuit: Circuit) -> "CliffordElement":
        _check_n(circuit.n_qubits)
        t = _Tableau.from_element(cls.identity(circuit.n_qubits))
        for g in circuit.gates:
            t.apply(g)
        return t.freeze()

    @property
    def symplectic_matrix(self) -> np.ndarray:
        """``(2n, 2n)`` GF(2) matrix whose rows are ``(x | z)`` of the generator images."""
        return np.hstack([self.x, self.z])

    def is_symplectic(self) -> bool:
        m = self.symplectic_matrix.astype(int)
        n = self.n_qubits
        omega = np.block([[np.zeros((n, n), int), np.eye(n, dtype=int)],
                          [np.eye(n, dtype=int), np.zeros((n, n), int)]])
        return bool(np.array_equal((m @ omega @ m.T) % 2, omega))

    def key(self) -> bytes:
        return self.x.tobytes() + self.z.tobytes() + self.r.tobytes()

    def __eq__(self, other) -> bool:
        return (isinstance(other, CliffordElement) and other.n_qubits == self.n_qubits
                and other.key() == self.key())

    def __hash__(self) -> int:
        return hash((self.n_qubits, self.key()))

    def image(self, label: str) -> tuple[int, str]:
        """``C P C^dagger`` for a Pauli label ``P``, as ``(sign, label)``."""
        if len(label) != self.n_qubits:
            raise InvalidArgumentError("Pauli label length does not match the qubit count")
        n = self.n_qubits
        px = np.array([c in "XY" for c in label], dtype=np.uint8)
        pz = np.array([c in "ZY" for c in label], dtype=np.uint8)
        e, x, z = _image(self, int(px @ pz), px, pz)
        sign = _sign_of(e, x, z)
        letters = "".join("IXZY"[int(x[k]) + 2 * int(z[k])] for k in range(n))
        return sign, letters


# Pauli products in the form i**e X**x Z**z (all factors of X before Z)

def _mul(e1, x1, z1, e2, x2, z2):
    return (e1 + e2 + 2 * int(z1 @ x2)) % 4, x1 ^ x2, z1 ^ z2


def _row_form(c: CliffordElement, i: int):
    x, z = c.x[i], c.z[i]
    return (2 * int(c.r[i]) + int(x @ z)) % 4, x, z


def _image(c: CliffordElement, e: int, px: np.ndarray, pz: np.ndarray):
    """Image under ``c`` of ``i**e X**px Z**pz``."""
    n = c.n_qubits
    acc = (e % 4, np.zeros(n, dtype=np.uint8), np.zeros(n, dtype=np.uint8))
    for k in range(n):
        if px[k]:
            acc = _mul(*acc, *_row_form(c, k))
    for k in range(n):
        if pz[k]:
            acc = _mul(*acc, *_row_form(c, n + k))
    return acc


def _sign_of(e: int, x: np.ndarray, z: np.ndarray) -> int:
    d = (e - int(x @ z)) % 4
    if d % 2:
        raise AssertionError("non-Hermitian Pauli image")
    return -1 if d == 2 else 1


def compose(a: CliffordElement, b: CliffordElement) -> CliffordElement:
    """``a`` after ``b``, so that its unitary is ``U_a U_b``."""
    if a.n_qubits != b.n_qubits:
        raise InvalidArgumentError("qubit count mismatch")
    n = a.n_qubits
    xs, zs, rs = [], [], []
    for i in range(2 * n):
        e, x, z = _image(a, *_row_form(b, i))
        xs.append(x)
        zs.append(z)
        rs.append(0 if _sign_of(e, x, z) == 1 else 1)
    return CliffordElement(n, np.array(xs, dtype=np.uint8), np.array(zs, dtype=np.uint8),
                           np.array(rs, dtype=np.uint8))


def inverse(c: CliffordElement) -> CliffordElement:
    return CliffordElement.from_circuit(clifford_to_circuit(c).adjoint())


class _Tableau:
    """Mutable working copy used for gate updates and synthesis."""

    def __init__(self, n: int, x: np.ndarray, z: np.ndarray, r: np.ndarray):
        self.n, self.x, self.z, self.r = n, x, z, r

    @classmethod
    def from_element(cls, c: CliffordElement) -> "_Tableau":
        return cls(c.n_qubits, c.x.copy(), c.z.copy(), c.r.copy())

    def freeze(self) -> CliffordElement:
        return CliffordElement(self.n, self.x.copy(), self.z.copy(), self.r.copy())

    def h(self, q):
        x, z = self.x[:, q].copy(), self.z[:, q].copy()
        self.r ^= x & z
        self.x[:, q], self.z[:, q] = z, x

    def s(self, q):
        self.r ^= self.x[:, q] & self.z[:, q]
        self.z[:, q] ^= self.x[:, q]

    def cnot(self, a, b):
        xa, xb, za, zb = self.x[:, a], self.x[:, b], self.z[:, a], self.z[:, b]
        self.r ^= xa & zb & (xb ^ za ^ 1)
        self.x[:, b] ^= xa
        self.z[:, a] ^= zb

    def apply(self, g: Gate) -> None:
        if g.kind not in CLIFFORD_GATES:
            raise UnsupportedError(f"gate {g.kind} is not a Clifford gate")
        t = g.targets
        q = t[0]
        if g.kind == "H":
            self.h(q)
        elif g.kind == "S":
            self.s(q)
        elif g.kind == "Sdg":
            self.s(q)
            self.r ^= self.x[:, q]
        elif g.kind == "X":
            self.r ^= self.z[:, q]
        elif g.kind == "Z":
            self.r ^= self.x[:, q]
        elif g.kind == "Y":
            self.r ^= self.x[:, q] ^ self.z[:, q]
        elif g.kind == "CNOT":
            self.cnot(t[0], t[1])
        else:  # CZ
            self.h(t[1])
            self.cnot(t[0], t[1])
            self.h(t[1])


@lru_cache(maxsize=8192)
def clifford_to_circuit(c: CliffordElement) -> Circuit:
    """Gate sequence over {H, S, CNOT} and Paulis realizing ``c`` up to global phase.

    The tableau is reduced to the identity one qubit at a time by applying
    gates ``G_1 .. G_k``; ``c`` is then ``G_1^dagger .. G_k^dagger`` in
    matrix order, i.e. the adjoints in reverse time order. ``S^dagger`` is
    emitted as ``S`` followed by ``Z``.
    """
    n = c.n_qubits
    t = _Tableau.from_element(c)
    ops: list[Gate] = []

    def do(kind, *targets):
        g = Gate(kind, targets)
        t.apply(g)
        ops.append(g)

    for q in range(n):
        # image of X_q -> X_q
        row = q
        for k in range(q, n):
            if t.z[row, k]:
                do("S" if t.x[row, k] else "H", k)
        if not t.x[row, q]:
            k = next(k for k in range(q + 1, n) if t.x[row, k])
            do("CNOT", k, q)
        for k in range(q + 1, n):
            if t.x[row, k]:
                do("CNOT", q, k)
        # image of Z_q -> Z_q
        row = n + q
        for k in range(q + 1, n):
            if t.x[row, k]:
                if t.z[row, k]:
                    do("S", k)
                do("H", k)
            if t.z[row, k]:
                do("CNOT", k, q)
        if t.x[row, q]:
            do("H", q)
            do("S", q)
            do("H", q)
        if t.r[q]:
            do("Z", q)
        if t.r[n + q]:
            do("X", q)

    if not (np.array_equal(t.x, np.vstack([np.eye(n), np.zeros((n, n))]))
            and np.array_equal(t.z, np.vstack([np.zeros((n, n)), np.eye(n)])) and not t.r.any()):
        raise AssertionError("tableau synthesis did not reach the identity")

    out: list[Gate] = []
    for g in reversed(ops):
        if g.kind == "S":
            out += [Gate("S", g.targets), Gate("Z", g.targets)]
        else:
            out.append(g)  # H, CNOT and Paulis are self-inverse
    return Circuit(n, tuple(out))


def clifford_to_unitary(c: CliffordElement) -> np.ndarray:
    return clifford_to_circuit(c).unitary()


def random_clifford(n_qubits: int, rng: np.random.Generator) -> CliffordElement:
    """Exactly uniform Clifford element.

    Builds a random symplectic basis pair by pair: ``v`` uniform over the
    nonzero vectors of the current symplectic complement, ``w`` uniform over
    the vectors there with ``<v, w> = 1``; the remaining basis is projected
    onto the complement of ``span(v, w)``. Each symplectic matrix arises
    from exactly one such sequence, and the ``2n`` sign bits are uniform.
    """
    _check_n(n_qubits)
    n = n_qubits
    basis = [row for row in np.eye(2 * n, dtype=np.uint8)]
    vs, ws = [], []
    for _ in range(n):
        k = len(basis)
        mat = np.array(basis, dtype=np.uint8)
        while True:
            cv = rng.integers(0, 2, size=k, dtype=np.uint8)
            if cv.any():
                break
        v = (cv @ mat) % 2
        while True:
            cw = rng.integers(0, 2, size=k, dtype=np.uint8)
            w = (cw @ mat) % 2
            if _symplectic(v, w, n):
                break
        projected = [(u + _symplectic(u, w, n) * v + _symplectic(u, v, n) * w) % 2 for u in basis]
        basis = _gf2_row_basis(projected)
        vs.append(v.astype(np.uint8))
        ws.append(w.astype(np.uint8))
    rows = np.array(vs + ws, dtype=np.uint8)
    signs = rng.integers(0, 2, size=2 * n, dtype=np.uint8)
    return CliffordElement(n, rows[:, :n].copy(), rows[:, n:].copy(), signs)


def _gf2_row_basis(vectors: list[np.ndarray]) -> list[np.ndarray]:
    m = np.array(vectors, dtype=np.uint8) % 2
    rows, cols = m.shape
    rank = 0
    for col in range(cols):
        pivot = next((i for i in range(rank, rows) if m[i, col]), None)
        if pivot is None:
            continue
        m[[rank, pivot]] = m[[pivot, rank]]
        for i in range(rows):
            if i != rank and m[i, col]:
                m[i] ^= m[rank]
        rank += 1
    return [m[i].copy() for i in range(rank)]


def is_clifford_circuit(circuit: Circuit) -> bool:
    return all(g.kind in CLIFFORD_GATES for g in circuit.gates)


def enumerate_clifford_group(n_qubits: int, limit: int = 20000) -> set[CliffordElement]:
    """Closure of the identity under {H, S, CNOT} by breadth-first search."""
    _check_n(n_qubits)
    gens = [Gate("H", (q,)) for q in range(n_qubits)] + [Gate("S", (q,)) for q in range(n_qubits)]
    gens += [Gate("CNOT", (a, b)) for a in range(n_qubits) for b in range(n_qubits) if a != b]
    start = CliffordElement.identity(n_qubits)
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for c in frontier:
            for g in gens:
                t = _Tableau.from_element(c)
                t.apply(g)
                d = t.freeze()
                if d not in seen:
                    seen.add(d)
                    nxt.append(d)
                    if len(seen) > limit:
                        raise InvalidArgumentError(f"group larger than limit {limit}")
        frontier = nxt
    return seen
