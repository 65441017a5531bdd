"""Dissipative long-range Ising chain and its Liouvillian superoperator."""
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import ConfigError, DimensionMismatch
from .operators import dagger, pauli_on_site


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the chain.

    ``H = h_x sum_i X_i + J sum_{i<j} Z_i Z_j / |i-j|**alpha`` with open
    boundaries, and one decay channel ``sqrt(gamma) sigma^-_i`` per site.
    """

    N: int = 5
    h_x: float = 1.0
    J: float = 1.25
    alpha: float = 1.0
    gamma: float = 1.0
    # "standard": sigma^- = (X - iY)/2; "literal": (X - Y)/2, kept for comparison
    lowering: str = "standard"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"N must be a positive integer, got {self.N}")
        if self.gamma < 0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.lowering not in ("standard", "literal"):
            raise ConfigError(f"lowering must be 'standard' or 'literal', got {self.lowering!r}")

    @property
    def dim(self):
        return 2**self.N

    @classmethod
    def from_mapping(cls, data):
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in data.items():
            if key not in known:
                continue
            if key == "N":
                kwargs[key] = int(value)
            elif key == "lowering":
                kwargs[key] = str(value)
            else:
                kwargs[key] = float(value)
        return cls(**kwargs)

    def to_dict(self):
        return asdict(self)


def coupling(i, j, J, alpha):
    return J / abs(i - j) ** alpha


def build_hamiltonian(p):
    n = p.N
    h = np.zeros((p.dim, p.dim), dtype=complex)
    for i in range(1, n + 1):
        h += p.h_x * pauli_on_site("x", i, n)
    if p.J != 0:
        z = [pauli_on_site("z", i, n) for i in range(1, n + 1)]
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                h += coupling(i, j, p.J, p.alpha) * (z[i - 1] @ z[j - 1])
    return h


def build_jumps(p):
    axis = "minus" if p.lowering == "standard" else "minus_literal"
    rate = np.sqrt(p.gamma)
    return [rate * pauli_on_site(axis, i, p.N) for i in range(1, p.N + 1)]


def _check_dims(h, jumps, rho=None):
    h = np.asarray(h)
    d = h.shape[0]
    if h.shape != (d, d):
        raise DimensionMismatch(f"Hamiltonian must be square, got {h.shape}")
    for op in jumps:
        if np.shape(op) != (d, d):
            raise DimensionMismatch(f"jump operator shape {np.shape(op)} does not match {h.shape}")
    if rho is not None and np.shape(rho) != (d, d):
        raise DimensionMismatch(f"state shape {np.shape(rho)} does not match {h.shape}")
    return d


def vectorize_liouvillian(h, jumps):
    """Matrix of the GKSL generator acting on column-stacked operators.

    ``M = -i(I (x) H - H^T (x) I) + sum_i [conj(L_i) (x) L_i
    - 1/2 I (x) L_i^dag L_i - 1/2 (L_i^dag L_i)^T (x) I]``
    """
    d = _check_dims(h, jumps)
    h = np.asarray(h, dtype=complex)
    eye = np.eye(d)
    m = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for op in jumps:
        op = np.asarray(op, dtype=complex)
        ll = dagger(op) @ op
        m += np.kron(op.conj(), op) - 0.5 * np.kron(eye, ll) - 0.5 * np.kron(ll.T, eye)
    return m


def apply_generator(h, jumps, rho):
    """Evaluate ``L[rho]`` directly with matrix products."""
    _check_dims(h, jumps, rho)
    out = -1j * (h @ rho - rho @ h)
    for op in jumps:
        opd = dagger(op)
        ll = opd @ op
        out = out + op @ rho @ opd - 0.5 * (ll @ rho + rho @ ll)
    return out


def build_liouvillian(p):
    return vectorize_liouvillian(build_hamiltonian(p), build_jumps(p))
