"""Pointwise state jets: field values plus spatial derivative slots.

Symmetric derivative tensors are stored packed (upper-triangular for Hessians,
sorted index triples for third derivatives), so a stored jet is symmetric by
construction. Every array may carry leading batch axes; a jet of batch shape
``(n,)`` is ``n`` independent points evaluated together.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass
from typing import Mapping

import numpy as np

SYM_TOL = 1e-12

PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))
TRIPLES = tuple(itertools.combinations_with_replacement(range(3), 3))

_PAIR_INDEX = np.zeros((3, 3), dtype=int)
for _n, (_i, _j) in enumerate(PAIRS):
    _PAIR_INDEX[_i, _j] = _PAIR_INDEX[_j, _i] = _n
_TRIPLE_INDEX = np.zeros((3, 3, 3), dtype=int)
for _n, _t in enumerate(TRIPLES):
    for _p in itertools.permutations(_t):
        _TRIPLE_INDEX[_p] = _n


class InvalidJetError(ValueError):
    pass


def pack_sym2(full) -> np.ndarray:
    full = np.asarray(full, dtype=float)
    return np.stack([full[..., i, j] for i, j in PAIRS], axis=-1)


def unpack_sym2(packed) -> np.ndarray:
    return np.asarray(packed, dtype=float)[..., _PAIR_INDEX]


def pack_sym3(full) -> np.ndarray:
    full = np.asarray(full, dtype=float)
    return np.stack([full[..., i, j, k] for i, j, k in TRIPLES], axis=-1)


def unpack_sym3(packed) -> np.ndarray:
    return np.asarray(packed, dtype=float)[..., _TRIPLE_INDEX]


# (name, packed trailing shape) in serialization order
FIELD_LAYOUT = (
    ("rho", ()), ("rho_g", (3,)), ("rho_h", (6,)), ("rho_t3", (10,)),
    ("c", ()), ("c_g", (3,)), ("c_h", (6,)), ("c_t3", (10,)),
    ("eps", ()), ("eps_g", (3,)), ("eps_h", (6,)),
    ("v", (3,)), ("v_g", (3, 3)), ("v_h", (3, 6)),
)
RECORD_SIZE = sum(int(np.prod(s)) for _, s in FIELD_LAYOUT)


@dataclass(frozen=True, eq=False)
class StateJet:
    """Field values and spatial derivatives at one or more points.

    ``v_g[..., i, j]`` is the full velocity gradient ``v_{i,j}``;
    ``v_h[..., i, :]`` packs ``v_{i,jk}`` over the symmetric pair ``(j, k)``.
    """

    rho: np.ndarray
    rho_g: np.ndarray
    rho_h: np.ndarray
    rho_t3: np.ndarray
    c: np.ndarray
    c_g: np.ndarray
    c_h: np.ndarray
    c_t3: np.ndarray
    eps: np.ndarray
    eps_g: np.ndarray
    eps_h: np.ndarray
    v: np.ndarray
    v_g: np.ndarray
    v_h: np.ndarray

    def __post_init__(self):
        batch = np.shape(self.rho)
        for name, tail in FIELD_LAYOUT:
            arr = np.asarray(getattr(self, name), dtype=float)
            arr = np.broadcast_to(arr, batch + tail) if arr.shape != batch + tail else arr
            arr = np.array(arr)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def equilibrium(cls, rho, c, eps, v=(0.0, 0.0, 0.0)) -> "StateJet":
        """Uniform state: every derivative slot zero."""
        rho = np.asarray(rho, dtype=float)
        batch = rho.shape
        fields = {name: np.zeros(batch + tail) for name, tail in FIELD_LAYOUT}
        fields["rho"] = rho
        fields["c"] = np.broadcast_to(np.asarray(c, dtype=float), batch)
        fields["eps"] = np.broadcast_to(np.asarray(eps, dtype=float), batch)
        fields["v"] = np.broadcast_to(np.asarray(v, dtype=float), batch + (3,))
        return cls(**fields)

    @classmethod
    def from_full(cls, check: bool = True, **fields) -> "StateJet":
        """Build from full (unpacked) derivative tensors.

        Missing slots are zero. With ``check`` the raw tensors are validated
        first, so an asymmetric Hessian raises instead of being silently
        folded onto its upper triangle.
        """
        if check:
            problems = validate_jet(fields)
            if problems:
                raise InvalidJetError("; ".join(problems))
        rho = np.asarray(fields["rho"], dtype=float)
        batch = rho.shape
        packed = {}
        for name, tail in FIELD_LAYOUT:
            if name not in fields:
                packed[name] = np.zeros(batch + tail)
                continue
            val = np.asarray(fields[name], dtype=float)
            if name in ("rho_h", "c_h", "eps_h"):
                val = pack_sym2(val)
            elif name in ("rho_t3", "c_t3"):
                val = pack_sym3(val)
            elif name == "v_h":
                val = pack_sym2(val)
            packed[name] = val
        return cls(**packed)

    # -- derived accessors -------------------------------------------------

    @property
    def batch_shape(self):
        return self.rho.shape

    @property
    def rho_hess(self):
        return unpack_sym2(self.rho_h)

    @property
    def c_hess(self):
        return unpack_sym2(self.c_h)

    @property
    def eps_hess(self):
        return unpack_sym2(self.eps_h)

    @property
    def rho_third(self):
        return unpack_sym3(self.rho_t3)

    @property
    def c_third(self):
        return unpack_sym3(self.c_t3)

    @property
    def v_hess(self):
        """``v_{i,jk}`` with shape (..., 3, 3, 3)."""
        return unpack_sym2(self.v_h)

    @property
    def strain(self):
        """Symmetric velocity gradient L_ij."""
        return 0.5 * (self.v_g + np.swapaxes(self.v_g, -1, -2))

    @property
    def div_v(self):
        return np.trace(self.v_g, axis1=-2, axis2=-1)

    def replace(self, **changes) -> "StateJet":
        return dataclasses.replace(self, **changes)

    def __getitem__(self, idx) -> "StateJet":
        return StateJet(**{name: getattr(self, name)[idx] for name, _ in FIELD_LAYOUT})

    def __len__(self):
        return self.batch_shape[0]

    # -- serialization -------------------------------------------------------

    def to_record(self) -> np.ndarray:
        """Flat numeric record(s) in ``FIELD_LAYOUT`` order."""
        batch = self.batch_shape
        parts = [getattr(self, name).reshape(batch + (-1,)) for name, _ in FIELD_LAYOUT]
        return np.concatenate(parts, axis=-1)

    @classmethod
    def from_record(cls, record) -> "StateJet":
        record = np.asarray(record, dtype=float)
        if record.shape[-1] != RECORD_SIZE:
            raise InvalidJetError(f"record length {record.shape[-1]} != {RECORD_SIZE}")
        batch = record.shape[:-1]
        fields, pos = {}, 0
        for name, tail in FIELD_LAYOUT:
            size = int(np.prod(tail))
            fields[name] = record[..., pos:pos + size].reshape(batch + tail)
            pos += size
        return cls(**fields)


def stack_jets(jets) -> StateJet:
    jets = list(jets)
    return StateJet(**{name: np.stack([getattr(j, name) for j in jets])
                       for name, _ in FIELD_LAYOUT})


def _max_asym3(val):
    base = val.ndim - 3
    worst = 0.0
    for perm in itertools.permutations(range(3)):
        axes = tuple(range(base)) + tuple(base + p for p in perm)
        worst = max(worst, float(np.max(np.abs(val - val.transpose(axes)), initial=0.0)))
    return worst


def validate_jet(jet: StateJet | Mapping) -> list[str]:
    """Return the violated invariants; an empty list means the jet is valid.

    Accepts a stored :class:`StateJet` or a raw mapping of full tensors (as
    read from an input record). Symmetry checks only bite on raw input since
    packed storage cannot be asymmetric.
    """
    problems = []
    get = (lambda k: getattr(jet, k)) if isinstance(jet, StateJet) else jet.get

    def finite(name):
        val = get(name)
        if val is not None and not np.all(np.isfinite(val)):
            problems.append(f"{name}: non-finite entries")

    for name, _ in FIELD_LAYOUT:
        finite(name)

    rho, c, eps = (np.asarray(get(k), dtype=float) for k in ("rho", "c", "eps"))
    if np.any(rho <= 0):
        problems.append("rho must be positive")
    if np.any((c < 0) | (c > 1)):
        problems.append("concentration out of range [0, 1]")
    if np.any(eps <= 0):
        problems.append("eps must be positive")

    if isinstance(jet, StateJet):
        return problems

    for name in ("rho_h", "c_h", "eps_h"):
        val = get(name)
        if val is not None:
            val = np.asarray(val, dtype=float)
            if np.max(np.abs(val - np.swapaxes(val, -1, -2)), initial=0.0) > SYM_TOL:
                problems.append(f"{name}: Hessian asymmetry")
    for name in ("rho_t3", "c_t3"):
        val = get(name)
        if val is not None and _max_asym3(np.asarray(val, dtype=float)) > SYM_TOL:
            problems.append(f"{name}: third-derivative asymmetry")
    val = get("v_h")
    if val is not None:
        val = np.asarray(val, dtype=float)
        if np.max(np.abs(val - np.swapaxes(val, -1, -2)), initial=0.0) > SYM_TOL:
            problems.append("v_h: asymmetry in derivative indices")
    return problems


def project_to_state_space(jet: StateJet) -> StateJet:
    """Zero the slots outside the constitutive state space.

    Keeps rho, c, eps, v and their gradients plus the rho and c Hessians;
    drops third derivatives and the eps and v second derivatives.
    """
    return jet.replace(
        rho_t3=np.zeros_like(jet.rho_t3),
        c_t3=np.zeros_like(jet.c_t3),
        eps_h=np.zeros_like(jet.eps_h),
        v_h=np.zeros_like(jet.v_h),
    )
