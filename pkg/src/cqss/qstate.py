"""Dense state-vector and density-matrix algebra for small qubit/qudit systems.

Tensor convention: subsystem 0 is the slowest-varying index of the flat
amplitude vector, so ``|i>|j>`` with dims ``(dA, dB)`` lives at ``i * dB + j``.
Every module that builds multi-subsystem states relies on this ordering.

Besides the single-state API (``PureState``, ``apply``, ``measure`` ...) the
module exposes two batched kernels, :func:`apply_batch` and
:func:`measure_batch`, which act on a stack of flat state vectors with one
operator (or one basis) per row. The protocol engines use them to run many
rounds at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

CONSTRUCTION_TOL = 1e-12
ALGEBRA_TOL = 1e-10
EIGEN_FLOOR = -1e-10

_SQRT_HALF = 1.0 / np.sqrt(2.0)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=complex, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized state vector over a tensor product of subsystems."""

    dims: tuple[int, ...]
    amplitudes: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or any(d < 2 for d in dims):
            raise ValueError(f"subsystem dimensions must be >= 2, got {dims}")
        amps = _frozen(np.ravel(self.amplitudes))
        if amps.size != int(np.prod(dims)):
            raise ValueError(f"{amps.size} amplitudes do not fit dims {dims}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > CONSTRUCTION_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def inner(self, other: PureState) -> complex:
        """<self|other>."""
        if self.dims != other.dims:
            raise ValueError("inner product of states with different dims")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __neg__(self) -> PureState:
        return PureState(self.dims, -self.amplitudes)

    def to_json(self) -> dict:
        """Serializable form; complex amplitudes become ``[re, im]`` pairs."""
        return {
            "dims": list(self.dims),
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_json(cls, obj: dict) -> PureState:
        amps = np.array([complex(re, im) for re, im in obj["amplitudes"]])
        return cls(tuple(obj["dims"]), amps)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    dims: tuple[int, ...]
    matrix: np.ndarray

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        mat = _frozen(self.matrix)
        n = int(np.prod(dims))
        if mat.shape != (n, n):
            raise ValueError(f"matrix shape {mat.shape} does not fit dims {dims}")
        if np.max(np.abs(mat - mat.conj().T)) > CONSTRUCTION_TOL:
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(mat) - 1.0) > CONSTRUCTION_TOL:
            raise ValueError(f"density matrix trace is {np.trace(mat)!r}")
        if np.min(np.linalg.eigvalsh(mat)) < EIGEN_FLOOR:
            raise ValueError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues with floating-point negatives clamped to 0."""
        vals = np.linalg.eigvalsh(self.matrix)
        return np.where(vals < 0.0, 0.0, vals)


@dataclass(frozen=True, eq=False)
class UnitaryOp:
    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        mat = _frozen(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"operator must be square, got shape {mat.shape}")
        if np.max(np.abs(mat @ mat.conj().T - np.eye(mat.shape[0]))) > CONSTRUCTION_TOL:
            raise ValueError(f"operator {self.name or '<unnamed>'} is not unitary")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __matmul__(self, other: UnitaryOp) -> UnitaryOp:
        return UnitaryOp(self.matrix @ other.matrix)

    def dag(self) -> UnitaryOp:
        return UnitaryOp(self.matrix.conj().T, f"{self.name}^dag" if self.name else "")


@dataclass(frozen=True, eq=False)
class MeasBasis:
    """Orthonormal measurement basis; column k of ``vectors`` is outcome k."""

    label: str
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        vecs = _frozen(self.vectors)
        if vecs.ndim != 2 or vecs.shape[0] != vecs.shape[1]:
            raise ValueError("basis must be a square matrix of column vectors")
        gram = vecs.conj().T @ vecs
        if np.max(np.abs(gram - np.eye(vecs.shape[0]))) > CONSTRUCTION_TOL:
            raise ValueError(f"basis {self.label!r} is not orthonormal")
        object.__setattr__(self, "vectors", vecs)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @classmethod
    def from_states(cls, states: Sequence[PureState], label: str = "custom") -> MeasBasis:
        return cls(label, np.column_stack([s.amplitudes for s in states]))

    def state(self, k: int) -> PureState:
        return PureState((self.dim,), self.vectors[:, k])


Z_BASIS = MeasBasis("Z", np.eye(2))
X_BASIS = MeasBasis("X", np.array([[1, 1], [1, -1]]) * _SQRT_HALF)


def computational_basis(d: int) -> MeasBasis:
    return Z_BASIS if d == 2 else MeasBasis("Z", np.eye(d))


def fourier_basis(d: int) -> MeasBasis:
    """Conjugate basis |k~> = sum_j w^(jk) |j> / sqrt(d); equals X for d = 2."""
    if d == 2:
        return X_BASIS
    j = np.arange(d)
    return MeasBasis("F", np.exp(2j * np.pi * np.outer(j, j) / d) / np.sqrt(d))


_NAMED_QUBIT_KETS = {
    "+z": np.array([1.0, 0.0]),
    "-z": np.array([0.0, 1.0]),
    "+x": np.array([1.0, 1.0]) * _SQRT_HALF,
    "-x": np.array([1.0, -1.0]) * _SQRT_HALF,
}


def ket(label: str | int, dim: int = 2) -> PureState:
    """Named qubit state (``"+z"``, ``"-z"``, ``"+x"``, ``"-x"``) or basis ket |j>."""
    if isinstance(label, str):
        key = label.replace("−", "-").strip().lower()
        if key not in _NAMED_QUBIT_KETS:
            raise ValueError(f"unknown state label {label!r}")
        if dim != 2:
            raise ValueError(f"named label {label!r} only exists for qubits")
        return PureState((2,), _NAMED_QUBIT_KETS[key])
    j = int(label)
    if dim < 2:
        raise ValueError("dimension must be >= 2")
    if not 0 <= j < dim:
        raise ValueError(f"basis index {j} out of range for dimension {dim}")
    amps = np.zeros(dim)
    amps[j] = 1.0
    return PureState((dim,), amps)


def identity(dim: int) -> UnitaryOp:
    return UnitaryOp(np.eye(dim), "I")


def tensor(a, b):
    """Kronecker product of two states, two operators or two density matrices."""
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(a.dims + b.dims, np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, UnitaryOp) and isinstance(b, UnitaryOp):
        name = f"{a.name}(x){b.name}" if a.name and b.name else ""
        return UnitaryOp(np.kron(a.matrix, b.matrix), name)
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(a.dims + b.dims, np.kron(a.matrix, b.matrix))
    raise TypeError(f"cannot tensor {type(a).__name__} with {type(b).__name__}")


def _check_targets(dims: Sequence[int], targets: Sequence[int], op_dim: int | None = None):
    targets = [int(t) for t in targets]
    if not targets:
        raise ValueError("at least one target subsystem is required")
    if len(set(targets)) != len(targets):
        raise ValueError(f"repeated target in {targets}")
    if any(t < 0 or t >= len(dims) for t in targets):
        raise ValueError(f"targets {targets} out of range for {len(dims)} subsystems")
    if op_dim is not None:
        k = int(np.prod([dims[t] for t in targets]))
        if k != op_dim:
            raise ValueError(f"operator of dim {op_dim} does not match targets of dim {k}")
    return targets


def _to_front(states: np.ndarray, dims: Sequence[int], targets: Sequence[int]):
    """Reshape (B, prod dims) into (B, k, rest) with the target axes first."""
    b = states.shape[0]
    t = np.reshape(states, (b, *dims))
    src = [1 + i for i in targets]
    t = np.moveaxis(t, src, list(range(1, 1 + len(targets))))
    shape = t.shape
    k = int(np.prod([dims[i] for i in targets]))
    return t.reshape(b, k, -1), shape, src


def _from_front(t: np.ndarray, shape, src) -> np.ndarray:
    t = t.reshape(shape)
    t = np.moveaxis(t, list(range(1, 1 + len(src))), src)
    return t.reshape(shape[0], -1)


def apply_batch(ops: np.ndarray, states: np.ndarray, dims: Sequence[int],
                targets: Sequence[int]) -> np.ndarray:
    """Apply ``ops`` to ``targets`` of every row of ``states``.

    ``ops`` is either one (k, k) matrix shared by all rows or a (B, k, k)
    stack with one operator per row. Returns a new (B, prod(dims)) array.
    """
    states = np.asarray(states, dtype=complex)
    if states.shape[0] == 0:
        return states.copy()
    ops = np.asarray(ops, dtype=complex)
    targets = _check_targets(dims, targets, ops.shape[-1])
    front, shape, src = _to_front(states, dims, targets)
    if ops.ndim == 2:
        out = np.einsum("ij,bjr->bir", ops, front)
    else:
        out = np.einsum("bij,bjr->bir", ops, front)
    return _from_front(out, shape, src)


def measure_batch(states: np.ndarray, dims: Sequence[int], targets: Sequence[int],
                  bases: np.ndarray, uniforms: np.ndarray):
    """Projective measurement of ``targets`` on every row.

    ``bases`` holds basis vectors as columns, either one (k, k) matrix or a
    (B, k, k) stack. ``uniforms`` supplies one U(0,1) draw per row, which
    selects the outcome by inverse-CDF over the Born probabilities. Returns
    ``(outcomes, post_states)`` with renormalized post-measurement states.
    """
    states = np.asarray(states, dtype=complex)
    b = states.shape[0]
    if b == 0:
        return np.zeros(0, dtype=np.int64), states.copy()
    bases = np.asarray(bases, dtype=complex)
    targets = _check_targets(dims, targets, bases.shape[-1])
    front, shape, src = _to_front(states, dims, targets)
    if bases.ndim == 2:
        coeffs = np.einsum("ji,bjr->bir", bases.conj(), front)
    else:
        coeffs = np.einsum("bji,bjr->bir", bases.conj(), front)
    probs = np.sum(np.abs(coeffs) ** 2, axis=2)
    cdf = np.cumsum(probs, axis=1)
    u = np.asarray(uniforms, dtype=float).reshape(b, 1) * cdf[:, -1:]
    outcomes = np.minimum(np.sum(cdf <= u, axis=1), probs.shape[1] - 1)
    # a zero-probability outcome can only be hit through rounding; step back
    rows = np.arange(b)
    bad = probs[rows, outcomes] <= 0.0
    while np.any(bad):
        outcomes[bad] -= 1
        bad = probs[rows, outcomes] <= 0.0
    kept = coeffs[rows, outcomes, :] / np.sqrt(probs[rows, outcomes])[:, None]
    vec = bases[:, outcomes].T if bases.ndim == 2 else bases[rows, :, outcomes]
    post = vec[:, :, None] * kept[:, None, :]
    return outcomes, _from_front(post, shape, src)


def apply(op: UnitaryOp, state: PureState, targets: Sequence[int]) -> PureState:
    """Apply ``op`` on the listed subsystems, identity elsewhere."""
    out = apply_batch(op.matrix, state.amplitudes[None, :], state.dims, targets)
    return PureState(state.dims, out[0])


def measure(state: PureState, basis: MeasBasis, target: int | Sequence[int],
            rng: np.random.Generator) -> tuple[int, PureState]:
    """Born-rule measurement of one subsystem (or a group of subsystems)."""
    targets = [target] if np.isscalar(target) else list(target)
    outcomes, post = measure_batch(state.amplitudes[None, :], state.dims, targets,
                                   basis.vectors, np.array([rng.random()]))
    return int(outcomes[0]), PureState(state.dims, post[0])


def outcome_probabilities(state: PureState, basis: MeasBasis,
                          target: int | Sequence[int]) -> np.ndarray:
    targets = [target] if np.isscalar(target) else list(target)
    targets = _check_targets(state.dims, targets, basis.dim)
    front, _, _ = _to_front(state.amplitudes[None, :], state.dims, targets)
    coeffs = np.einsum("ji,bjr->bir", basis.vectors.conj(), front)
    return np.sum(np.abs(coeffs[0]) ** 2, axis=1)


def density_from_pure(state: PureState) -> DensityMatrix:
    a = state.amplitudes
    return DensityMatrix(state.dims, np.outer(a, a.conj()))


def mix(entries: Iterable[tuple[float, DensityMatrix | PureState]]) -> DensityMatrix:
    """Convex combination of density matrices (pure states are promoted)."""
    entries = [(float(w), density_from_pure(r) if isinstance(r, PureState) else r)
               for w, r in entries]
    if not entries:
        raise ValueError("nothing to mix")
    weights = np.array([w for w, _ in entries])
    if np.any(weights < 0):
        raise ValueError("mixture weights must be non-negative")
    if abs(weights.sum() - 1.0) > CONSTRUCTION_TOL:
        raise ValueError(f"mixture weights sum to {weights.sum()!r}, not 1")
    dims = entries[0][1].dims
    if any(r.dims != dims for _, r in entries):
        raise ValueError("cannot mix density matrices with different dims")
    mat = sum(w * r.matrix for w, r in entries)
    return DensityMatrix(dims, mat)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    """Reduced state on ``keep``; kept subsystems stay in ascending order."""
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("keep list must not be empty")
    n = len(rho.dims)
    if any(k < 0 or k >= n for k in keep):
        raise ValueError(f"keep {keep} out of range for {n} subsystems")
    t = rho.matrix.reshape(rho.dims + rho.dims)
    # trace from the highest index down so earlier axis numbers stay valid
    for ax in reversed(range(n)):
        if ax in keep:
            continue
        cur = t.ndim // 2
        t = np.trace(t, axis1=ax, axis2=ax + cur)
    kept_dims = tuple(rho.dims[k] for k in keep)
    side = int(np.prod(kept_dims))
    return DensityMatrix(kept_dims, t.reshape(side, side))


def entropy_of_probabilities(p) -> float:
    """Shannon entropy in bits with 0 log 0 := 0."""
    p = np.asarray(p, dtype=float)
    p = p[p > 0.0]
    return float(-np.sum(p * np.log2(p))) + 0.0


def von_neumann_entropy(rho: DensityMatrix) -> float:
    return entropy_of_probabilities(rho.eigenvalues())


def states_equal_up_to_phase(a: PureState, b: PureState, tol: float = ALGEBRA_TOL) -> bool:
    if a.dims != b.dims:
        raise ValueError("states have different dims")
    return abs(a.inner(b)) > 1.0 - tol


def random_state(dims: Sequence[int], rng: np.random.Generator) -> PureState:
    n = int(np.prod(dims))
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return PureState(tuple(dims), v / np.linalg.norm(v))


def random_unitary(dim: int, rng: np.random.Generator) -> UnitaryOp:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return UnitaryOp(q * (d / np.abs(d)))
