"""Propagator atoms, form-factor pairings and truncated S-matrix amplitudes.

Per leg label the off-shell propagator splits into on-shell delta atoms and
a principal-value atom; the label 'loc' keeps the PV kernel, 'in'/'out'
replace it by -/+ i pi times the shell-measure difference. Fully on-shell
amplitudes carry the density 2 pi i M_n on conservation-constrained phase
space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import gauss_legendre
from .structure import (
    SpectralDensity,
    StructureEvaluator,
    _adapted_u_grid,
    eval_Ghat_2,
    pv_leg_term,
    reduced_integrand,
    two_body_solutions,
)
from .transfer import TransferFamily, validate_condition41

IN, LOC, OUT = "in", "loc", "out"
LABELS = (IN, LOC, OUT)


def _check_label(a: str) -> str:
    if a not in LABELS:
        raise ValueError(f"unknown leg label {a!r}")
    return a


@dataclass(frozen=True)
class PropagatorAtom:
    """One additive piece of the leg propagator.

    kind 'onshell' with sign +/-1 means coefficient times the forward or
    backward shell measure; kind 'pv' means the principal-value kernel.
    """

    kind: str  # "onshell" or "pv"
    coefficient: complex
    sign: int = 0

    def __post_init__(self):
        if self.kind not in ("onshell", "pv"):
            raise ValueError("kind must be 'onshell' or 'pv'")
        if self.kind == "onshell" and self.sign not in (1, -1):
            raise ValueError("onshell atom needs sign +/-1")
        if self.coefficient == 0:
            raise ValueError("atom coefficient must be nonzero")


def delta_hat_atoms(a: str):
    """Atom decomposition of the leg-label propagator."""
    _check_label(a)
    if a == LOC:
        return [PropagatorAtom("pv", 1.0)]
    s = -1.0 if a == IN else 1.0
    return [
        PropagatorAtom("onshell", s * 1j * np.pi, sign=1),
        PropagatorAtom("onshell", -s * 1j * np.pi, sign=-1),
    ]


def _onshell_leg_term(j, sign, packets, ev, weight=None, leg_factors=None) -> complex:
    """Leg j pinned to the sign-shell, other legs reduced by g_j."""
    n = len(packets)
    pk = packets[j]
    g = reduced_integrand(j, packets, ev, weight=weight, leg_factors=leg_factors)
    lo1, hi1 = pk.support_interval(1)
    k1n, k1w = gauss_legendre(lo1, hi1, ev.quad.outer_nodes)
    m = ev.params.m
    w = np.sqrt(k1n * k1n + m * m)
    k0 = sign * w
    if n == 3:
        vals = g(k0, k1n)
        kj = np.stack([k0, k1n], axis=-1)
        fj = pk(kj)
        if leg_factors is not None and leg_factors[j] is not None:
            fj = fj * leg_factors[j](kj)
        return complex(np.sum(k1w * vals * fj / (2.0 * w)))
    total = 0.0 + 0.0j
    for i in range(len(k1n)):
        ugrid = _adapted_u_grid(j, packets, ev, g, float(k0[i]), float(k1n[i]))
        v = g(np.array(k0[i]), np.array(k1n[i]), ugrid)
        kj = np.array([k0[i], k1n[i]])
        fj = pk(kj)
        if leg_factors is not None and leg_factors[j] is not None:
            fj = fj * leg_factors[j](kj)
        total += k1w[i] * complex(v) * complex(fj) / (2.0 * w[i])
    return total


def _discrete_two_point(packets, ev, leg_factors=None) -> complex:
    """Backward-shell two-point pairing without the continuum."""
    ev0 = StructureEvaluator(ev.params, SpectralDensity.zero(ev.params), ev.quad, ev.cutoff)
    return eval_Ghat_2(packets, ev0, leg_factors=leg_factors)


def eval_FG_n(labels, packets, ev: StructureEvaluator, weight=None,
              leg_factors=None) -> complex:
    """Form-factor pairing: like the structure pairing, but the PV leg's
    kernel is replaced per its label by the atom decomposition."""
    labels = [_check_label(a) for a in labels]
    n = len(packets)
    if len(labels) != n:
        raise ValueError("one label per leg required")
    if n < 2:
        raise ValueError("need at least two legs")
    if n == 2:
        if labels == [LOC, LOC]:
            return eval_Ghat_2(packets, ev, leg_factors=leg_factors)
        return _discrete_two_point(packets, ev, leg_factors=leg_factors)
    total = 0.0 + 0.0j
    for j in range(n):
        for atom in delta_hat_atoms(labels[j]):
            if atom.kind == "pv":
                pv_mult = leg_factors[j] if leg_factors is not None else None
                total += atom.coefficient * pv_leg_term(
                    j, packets, ev, weight=weight, leg_factors=leg_factors,
                    pv_multiplier=pv_mult,
                )
            else:
                total += atom.coefficient * _onshell_leg_term(
                    j, atom.sign, packets, ev, weight=weight, leg_factors=leg_factors
                )
    return total


def eval_F_n(labels, packets, ev: StructureEvaluator, fam: TransferFamily,
             leg_factors=None) -> complex:
    """Transfer-weighted form factor: the order-n integrand multiplied by M_n."""
    if fam is None:
        raise ValueError("transfer family required")
    report = validate_condition41(fam)
    if not report["passed"]:
        raise ValueError(f"invalid transfer family: {report['violations']}")
    n = len(packets)
    if n == 2:
        # M_2 = 1: the weight drops out
        return eval_FG_n(labels, packets, ev, leg_factors=leg_factors)
    return eval_FG_n(labels, packets, ev, weight=fam.eval, leg_factors=leg_factors)


@dataclass(frozen=True)
class AmplitudeRequest:
    """r incoming legs (backward shells) against n-r outgoing (forward)."""

    r: int
    in_packets: tuple
    out_packets: tuple

    def __post_init__(self):
        object.__setattr__(self, "in_packets", tuple(self.in_packets))
        object.__setattr__(self, "out_packets", tuple(self.out_packets))
        n = self.n
        if not (n >= 3 and 1 <= self.r <= n - 1):
            raise ValueError("need n >= 3 and 1 <= r <= n-1")
        if len(self.in_packets) != self.r:
            raise ValueError("in_packets count must equal r")
        for p in self.in_packets:
            if p.center[0] >= 0:
                raise ValueError("incoming packet centers must have negative energy")
        for p in self.out_packets:
            if p.center[0] <= 0:
                raise ValueError("outgoing packet centers must have positive energy")

    @property
    def n(self) -> int:
        return len(self.in_packets) + len(self.out_packets)

    @property
    def packets(self) -> tuple:
        return self.in_packets + self.out_packets

    def sign(self, l: int) -> int:
        return -1 if l < self.r else 1


def smatrix_density(r: int, momenta, ev: StructureEvaluator,
                    fam: TransferFamily | None = None,
                    cons_tol: float = 1e-8) -> complex:
    """Density of the truncated S-matrix component relative to the product
    of shell measures and the conservation delta: 2 pi i M_n."""
    ks = np.asarray(
        [m.four_vector() if hasattr(m, "four_vector") else np.asarray(m, float)
         for m in momenta]
    )
    n = ks.shape[0]
    if not 1 <= r <= n - 1:
        raise ValueError("invalid leg split")
    for l in range(n):
        if (l < r and ks[l, 0] >= 0) or (l >= r and ks[l, 0] <= 0):
            raise ValueError(f"leg {l} violates the energy sign pattern")
    total = ks.sum(axis=0)
    scale = np.abs(ks).max()
    if np.max(np.abs(total)) > cons_tol * max(scale, 1.0):
        raise ValueError("momentum conservation violated")
    mval = 1.0 if fam is None else complex(fam.eval(ks))
    return 2j * np.pi * mval


def smatrix_amplitude(req: AmplitudeRequest, ev: StructureEvaluator,
                      fam: TransferFamily | None = None) -> complex:
    """Packet-integrated truncated S-matrix component.

    The first n-2 legs' spatial momenta are quadrature variables; the last
    two legs are solved from energy-momentum conservation with the Jacobian
    of the constraint, each leg carrying its 1/(2 omega) shell density.
    """
    packets = req.packets
    n = req.n
    m = ev.params.m
    free = list(range(n - 2))
    la, lb = n - 2, n - 1
    sa, sb = req.sign(la), req.sign(lb)

    axes_nodes, axes_wts = [], []
    for l in free:
        lo, hi = packets[l].support_interval(1)
        xn, xw = gauss_legendre(lo, hi, ev.quad.outer_nodes)
        axes_nodes.append(xn)
        axes_wts.append(xw)
    grids = np.meshgrid(*axes_nodes, indexing="ij") if free else []
    wgrids = np.meshgrid(*axes_wts, indexing="ij") if free else []

    shape = grids[0].shape if free else ()
    E = np.zeros(shape)
    P = np.zeros(shape)
    weight = np.ones(shape)
    vals = np.ones(shape, dtype=complex)
    kfree = []
    for i, l in enumerate(free):
        p = grids[i]
        w = np.sqrt(p * p + m * m)
        s = req.sign(l)
        E -= s * w
        P -= p
        weight = weight * wgrids[i]
        kl = np.stack([s * w, p], axis=-1)
        kfree.append(kl)
        vals = vals * packets[l](kl) / (2.0 * w)

    pa, pb, wa, wb, jac, valid = two_body_solutions(E, P, sa, sb, m)
    ka = np.stack([sa * wa, pa], axis=-1)
    kb = np.stack([sb * wb, pb], axis=-1)
    fvals = vals[..., None] * packets[la](ka) * packets[lb](kb)
    if fam is not None:
        report = validate_condition41(fam)
        if not report["passed"]:
            raise ValueError(f"invalid transfer family: {report['violations']}")
        ks = np.zeros(ka.shape[:-1] + (n, 2))
        for i, l in enumerate(free):
            ks[..., l, :] = kfree[i][..., None, :]
        ks[..., la, :] = ka
        ks[..., lb, :] = kb
        fvals = fvals * fam.member(n)(ks)
    dens = 4.0 * wa * wb * np.abs(jac)
    contrib = np.where(valid, fvals / np.where(valid, dens, 1.0), 0.0).sum(axis=-1)
    total = np.sum(weight * contrib)
    return complex(2j * np.pi * total)
