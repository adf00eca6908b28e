"""State representation for the linearized problem, one Fourier mode at a time.

A state bundles six modal scalars: the potential and stream function (phi,
psi) of the tangent field xi = grad(phi) + grad_perp(psi), the same pair
(phi', psi') for the scaled radial derivative xi', the radial velocity
component (here "radial"), and the modified radial derivative
radial_star = radial' - q.  The pressure trace q is never stored; it is
recovered from the constraint div xi + radial + radial_star + q = 0.

Structurally absent slots (degrees k < |m|, the k = 0 potential gauge slot,
and the k = 0 mean of radial when m = 0) are excluded from the flat indexing
used by the eigensolves.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .sphbasis import ModalField, zero_field

COMPONENTS = ("phi", "psi", "phi_prime", "psi_prime", "radial", "radial_star")

# Sobolev weight exponents of the X inner product, slot by slot: the pairing
# of degree-k coefficients carries (k(k+1))^s with
#   potentials       s = 3   (Laplacian of the potential, measured in H^1)
#   primed potentials s = 2  (Laplacian measured in L^2)
#   radial           s = 2   (H^2)
#   radial_star      s = 1   (H^1), k = 0 slot weighted 1
_X_EXPONENT = {"phi": 3, "psi": 3, "phi_prime": 2, "psi_prime": 2,
               "radial": 2, "radial_star": 1}


def component_k_min(name, m):
    """Lowest admissible degree of a component at mode m."""
    am = abs(m)
    if name in ("phi", "psi", "phi_prime", "psi_prime"):
        return max(am, 1)
    if name == "radial":
        return max(am, 1) if m == 0 else am
    if name == "radial_star":
        return am
    raise ValueError(f"unknown component {name!r}")


@dataclass(frozen=True)
class StateIndexMap:
    """Bijection between (component, degree) slots and flat vector indices."""

    m: int
    k_max: int

    def __post_init__(self):
        if self.k_max < max(abs(self.m), 1):
            raise ValueError(f"k_max = {self.k_max} too small for m = {self.m}")

    def k_lo(self, name):
        return component_k_min(name, self.m)

    def count(self, name):
        return self.k_max - self.k_lo(name) + 1

    def offset(self, name):
        off = 0
        for c in COMPONENTS:
            if c == name:
                return off
            off += self.count(c)
        raise ValueError(f"unknown component {name!r}")

    @property
    def dim(self):
        return sum(self.count(c) for c in COMPONENTS)

    def index(self, name, k):
        if not self.k_lo(name) <= k <= self.k_max:
            raise ValueError(f"degree {k} not admissible for {name} at m={self.m}")
        return self.offset(name) + k - self.k_lo(name)

    def degrees(self, name):
        return np.arange(self.k_lo(name), self.k_max + 1)

    def sl(self, name):
        off = self.offset(name)
        return slice(off, off + self.count(name))

    def describe(self):
        return {c: [int(self.k_lo(c)), int(self.k_max)] for c in COMPONENTS}


@dataclass
class StateVector:
    """Six modal components sharing one mode m and truncation k_max."""

    m: int
    phi: ModalField
    psi: ModalField
    phi_prime: ModalField
    psi_prime: ModalField
    radial: ModalField
    radial_star: ModalField

    def __post_init__(self):
        fields = self.components()
        k_max = fields["phi"].k_max
        for name, f in fields.items():
            if f.m != self.m or f.k_max != k_max:
                raise ValueError(f"component {name} disagrees on (m, k_max)")
        # Structurally absent slots must be zero.
        scale = 1.0 + max(np.max(np.abs(f.coeffs)) for f in fields.values())
        for name, f in fields.items():
            lo = component_k_min(name, self.m)
            head = f.coeffs[: lo - f.k_min]
            if head.size and np.max(np.abs(head)) > 1e-13 * scale:
                raise ValueError(
                    f"component {name} has mass below its admissible degree {lo}"
                )
            f.coeffs[: lo - f.k_min] = 0.0

    def components(self):
        return {"phi": self.phi, "psi": self.psi,
                "phi_prime": self.phi_prime, "psi_prime": self.psi_prime,
                "radial": self.radial, "radial_star": self.radial_star}

    @property
    def k_max(self):
        return self.phi.k_max

    @property
    def index_map(self):
        return StateIndexMap(self.m, self.k_max)

    def to_flat(self):
        imap = self.index_map
        out = np.zeros(imap.dim, dtype=complex)
        for name, f in self.components().items():
            lo = imap.k_lo(name)
            out[imap.sl(name)] = f.coeffs[lo - f.k_min:]
        return out

    def copy(self):
        return StateVector(self.m, *(self.components()[c].copy()
                                     for c in COMPONENTS))


def zero_state(m, k_max):
    return StateVector(m, *(zero_field(m, k_max) for _ in COMPONENTS))


def state_from_flat(m, k_max, vec):
    imap = StateIndexMap(m, k_max)
    vec = np.asarray(vec, dtype=complex)
    if vec.size != imap.dim:
        raise ValueError(f"flat vector length {vec.size}, expected {imap.dim}")
    st = zero_state(m, k_max)
    for name, f in st.components().items():
        lo = imap.k_lo(name)
        f.coeffs[lo - f.k_min:] = vec[imap.sl(name)]
    return st


def pressure_of(state):
    """Derived pressure trace: q_k = k(k+1) phi_k - radial_k - radial_star_k."""
    ks = np.arange(abs(state.m), state.k_max + 1)
    q = (ks * (ks + 1.0)) * state.phi.coeffs \
        - state.radial.coeffs - state.radial_star.coeffs
    return ModalField(state.m, q)


def x_weights(imap):
    """Diagonal of the X inner product in flat indexing."""
    w = np.zeros(imap.dim)
    for name in COMPONENTS:
        ks = imap.degrees(name).astype(float)
        kk = ks * (ks + 1.0)
        kk[kk == 0.0] = 1.0
        w[imap.sl(name)] = kk ** _X_EXPONENT[name]
    return w


def x_inner(a, b):
    """The X inner product, linear in a, conjugate-linear in b."""
    if a.m != b.m or a.k_max != b.k_max:
        raise ValueError("states live on different (m, k_max)")
    w = x_weights(a.index_map)
    return complex(np.sum(w * a.to_flat() * np.conj(b.to_flat())))


def x_norm(a):
    return float(np.sqrt(x_inner(a, a).real))


def separation_gamma(vectors):
    """Lower frame bound of a vector set: the smallest singular value of the
    X-normalized column frame.  1 for a single unit direction, 0 for a
    linearly dependent set."""
    if not vectors:
        raise ValueError("need at least one vector")
    w = x_weights(vectors[0].index_map)
    sqw = np.sqrt(w)
    cols = []
    for v in vectors:
        col = sqw * v.to_flat()
        nrm = np.linalg.norm(col)
        if nrm == 0.0:
            raise ValueError("zero vector has no separation")
        cols.append(col / nrm)
    sv = np.linalg.svd(np.column_stack(cols), compute_uv=False)
    return float(sv[-1])


def state_to_json_dict(state):
    return {
        "m": int(state.m),
        "k_max": int(state.k_max),
        "components": {
            name: [[float(c.real), float(c.imag)] for c in f.coeffs]
            for name, f in state.components().items()
        },
    }


def state_from_json_dict(doc):
    m = int(doc["m"])
    k_max = int(doc["k_max"])
    st = zero_state(m, k_max)
    for name, f in st.components().items():
        pairs = doc["components"][name]
        if len(pairs) != f.coeffs.size:
            raise ValueError(f"component {name} has wrong length")
        f.coeffs[:] = [complex(re, im) for re, im in pairs]
    return StateVector(m, *(st.components()[c] for c in COMPONENTS))


def save_state_json(state, path):
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(state_to_json_dict(state), fh, indent=1)
    os.replace(tmp, path)


def load_state_json(path):
    with open(path) as fh:
        return state_from_json_dict(json.load(fh))
