"""Saturating cutoff and the four reaction terms of the augmented system.

The cutoff sigma is the identity on [-M/2, M/2] and saturates smoothly
toward +/-M outside it (C^2 tanh profile, |sigma| < M, 0 <= sigma' <= 1,
odd).  Composing the raw growth/uptake terms with sigma makes the
coefficient vector field globally Lipschitz; on trajectories whose sup
norm stays below M/2 the composition is the raw model, so nothing is
altered where the smallness thresholds hold.

Reaction terms (primed quantities are sigma'):

    P1(u, w)       = s(u)^2 s(w) (1 - b s(u))          plant growth
    P2(u, w)       = a - s(u)^2 s(w)                   rainfall - uptake
    Q1(u, w, v, z) = s(u) s'(u) s(w) (2 - 3 b s(u)) v
                     + s(u)^2 s'(w) (1 - b s(u)) z     d/dx of P1
    Q2(u, w, v, z) = -2 s(u) s'(u) s(w) v - s(u)^2 s'(w) z

Q1 and Q2 equal the exact x-derivatives of P1 and P2 whenever (v, z)
are the pointwise derivatives of (u, w).
"""

from dataclasses import dataclass

import numpy as np

from .basis import project


@dataclass(frozen=True)
class CutoffSpec:
    """Saturation bound M > 0 for the cutoff."""

    M: float

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("cutoff bound M must be positive")


@dataclass(frozen=True)
class ReactionParams:
    a: float
    b: float
    cutoff: CutoffSpec


def sigma(x, spec):
    """Cutoff value: identity on [-M/2, M/2], tanh saturation toward +/-M outside."""
    x = np.asarray(x, dtype=float)
    half = 0.5 * spec.M
    ax = np.abs(x)
    sat = np.sign(x) * half * (1.0 + np.tanh((ax - half) / half))
    out = np.where(ax <= half, x, sat)
    return out if out.ndim else float(out)


def sigma_prime(x, spec):
    """Exact derivative of the cutoff; equals 1 on the identity region."""
    x = np.asarray(x, dtype=float)
    half = 0.5 * spec.M
    ax = np.abs(x)
    t = np.where(ax <= half, 0.0, (ax - half) / half)
    # sech^2 written overflow-free: exp(-2t) underflows harmlessly
    e = np.exp(-2.0 * t)
    out = np.where(ax <= half, 1.0, 4.0 * e / (1.0 + e) ** 2)
    return out if out.ndim else float(out)


def P1(u, w, params):
    s = params.cutoff
    su, sw = sigma(u, s), sigma(w, s)
    return su**2 * sw * (1.0 - params.b * su)


def P2(u, w, params):
    s = params.cutoff
    return params.a - sigma(u, s) ** 2 * sigma(w, s)


def Q1(u, w, v, z, params):
    s = params.cutoff
    su, sw = sigma(u, s), sigma(w, s)
    spu, spw = sigma_prime(u, s), sigma_prime(w, s)
    return su * spu * sw * (2.0 - 3.0 * params.b * su) * v + su**2 * spw * (1.0 - params.b * su) * z


def Q2(u, w, v, z, params):
    s = params.cutoff
    su, sw = sigma(u, s), sigma(w, s)
    spu, spw = sigma_prime(u, s), sigma_prime(w, s)
    return -2.0 * su * spu * sw * v - su**2 * spw * z


_TERMS = {"P1": P1, "P2": P2, "Q1": Q1, "Q2": Q2}


def project_nonlinear(which, fields, target, quad, params):
    """Quadrature projection of one reaction term onto a basis span.

    ``fields`` maps names 'u', 'w' (and 'v', 'z' for the Q terms) to
    samples at the quadrature nodes.  Targets: P1, Q1 on the plant span;
    P2 on the water span; Q2 on the derivative span.
    """
    try:
        fn = _TERMS[which]
    except KeyError:
        raise ValueError(f"unknown reaction term {which!r}") from None
    n = quad.nodes.shape
    for name, vals in fields.items():
        if np.shape(vals) != n:
            raise ValueError(f"field {name!r} not aligned with quadrature nodes")
    if which in ("P1", "P2"):
        values = fn(fields["u"], fields["w"], params)
    else:
        values = fn(fields["u"], fields["w"], fields["v"], fields["z"], params)
    values = np.broadcast_to(np.asarray(values, dtype=float), quad.nodes.shape)
    return project(values, target, quad)
