"""Bounded-energy phase-space sampling and invariant polynomial fitting.

Samples on-shell, momentum-conserving n-point configurations with the
outgoing energy capped, maps them to pairwise Minkowski invariants, and
fits real polynomials by least squares with degree escalation against a
held-out validation sample.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .kinematics import _multi_indices, invariant_map
from .polymath import Poly
from .structure import two_body_solutions
from .transfer import TransferFamily, TransferPolynomial, symmetrize_realify, validate_condition41


@dataclass(frozen=True)
class FitConfig:
    e_max: float
    epsilon: float = 1e-3
    max_degree: int = 10
    train_count: int = 2000
    validate_count: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.epsilon <= 0 or self.train_count <= 0 or self.validate_count <= 0:
            raise ValueError("epsilon and sample counts must be positive")


@dataclass
class PhaseSpaceSample:
    n: int
    r: int
    points: np.ndarray  # (N, n, 2)
    e_max: float
    acceptance_rate: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def empty(self) -> bool:
        return self.points.shape[0] == 0


def recheck_constraints(points, n, r, e_max, m, tol: float = 1e-10) -> np.ndarray:
    """Independent validation of every sampled configuration: on-shell,
    conserving, sign pattern, outgoing energy cap. Returns a boolean mask."""
    ks = np.asarray(points, dtype=float)
    sq = ks[..., 0] ** 2 - ks[..., 1] ** 2
    on_shell = np.all(np.abs(sq - m * m) < tol * (1.0 + np.abs(sq)), axis=-1)
    total = ks.sum(axis=1)
    scale = 1.0 + np.abs(ks).max(axis=(1, 2))
    conserving = np.all(np.abs(total) < tol * scale[:, None], axis=-1)
    signs_in = np.all(ks[:, :r, 0] < 0, axis=-1)
    signs_out = np.all(ks[:, r:, 0] > 0, axis=-1)
    cap = ks[:, r:, 0].sum(axis=-1) <= e_max * (1.0 + 1e-12)
    return on_shell & conserving & signs_in & signs_out & cap


def sample_Qn(n: int, r: int, cfg: FitConfig, params, count: int | None = None,
              max_draws: int = 2_000_000) -> PhaseSpaceSample:
    """Rejection sampling of the bounded-energy on-shell region.

    Draws n-2 spatial momenta uniformly, solves the final two legs from
    energy-momentum conservation (random branch), and accepts when the
    sign pattern and the outgoing-energy cap hold. Deterministic per seed.
    """
    if not (n >= 3 and 1 <= r <= n - 1):
        raise ValueError("need n >= 3 and 1 <= r <= n-1")
    m = params.m
    target = count if count is not None else cfg.train_count + cfg.validate_count
    if n > cfg.e_max / m:
        return PhaseSpaceSample(n, r, np.zeros((0, n, 2)), cfg.e_max, 0.0,
                                {"reason": "empty: n exceeds e_max/m"})
    rng = np.random.default_rng(cfg.seed)
    pmax = math.sqrt(max(cfg.e_max**2 - m * m, 0.0))
    la, lb = n - 2, n - 1
    sa = -1 if la < r else 1
    sb = -1 if lb < r else 1
    accepted = []
    drawn = 0
    batch = 8192
    while sum(a.shape[0] for a in accepted) < target and drawn < max_draws:
        ps = rng.uniform(-pmax, pmax, size=(batch, n - 2))
        branch = rng.integers(0, 2, size=batch)
        drawn += batch
        ws = np.sqrt(ps * ps + m * m)
        signs = np.array([-1.0 if l < r else 1.0 for l in range(n - 2)])
        E = -(signs * ws).sum(axis=-1)
        P = -ps.sum(axis=-1)
        pa, pb, wa, wb, jac, valid = two_body_solutions(E, P, sa, sb, m)
        rows = np.arange(batch)
        ok = valid[rows, branch]
        ks = np.zeros((batch, n, 2))
        ks[:, : n - 2, 0] = signs * ws
        ks[:, : n - 2, 1] = ps
        ks[:, la, 0] = sa * wa[rows, branch]
        ks[:, la, 1] = pa[rows, branch]
        ks[:, lb, 0] = sb * wb[rows, branch]
        ks[:, lb, 1] = pb[rows, branch]
        cap = ks[:, r:, 0].sum(axis=-1) <= cfg.e_max
        keep = ok & cap
        if keep.any():
            accepted.append(ks[keep])
    points = np.concatenate(accepted)[:target] if accepted else np.zeros((0, n, 2))
    rate = points.shape[0] / drawn if drawn else 0.0
    diagnostics = {"drawn": drawn}
    if points.shape[0] < target:
        diagnostics["reason"] = (
            f"acceptance rate {rate:.2e} too low: {points.shape[0]}/{target} accepted"
        )
        if rate < 1e-6:
            points = points[:0]
    if points.shape[0]:
        mask = recheck_constraints(points, n, r, cfg.e_max, m)
        if not mask.all():
            raise RuntimeError("sampled point failed independent constraint recheck")
    return PhaseSpaceSample(n, r, points, cfg.e_max, rate, diagnostics)


@dataclass
class FitReport:
    polynomial: TransferPolynomial  # symmetrized, real
    raw_polynomial: TransferPolynomial
    achieved_sup_error: float  # raw fit on validation points
    symmetrized_sup_error: float
    degree_used: int
    train_count: int
    validate_count: int
    epsilon: float
    passed: bool
    symmetric_input: bool = True  # whether R passed the permutation probe
    history: list = field(default_factory=list)


def _basis_matrix(qs, exps_list):
    A = np.empty((qs.shape[0], len(exps_list)))
    for c, exps in enumerate(exps_list):
        col = np.ones(qs.shape[0])
        for i, e in enumerate(exps):
            if e:
                col = col * qs[:, i] ** e
        A[:, c] = col
    return A


def _assemble_polynomial(n, coeffs, exps_list, vary_idx, centers, scales):
    """Expand the fitted coefficients over centered-scaled coordinates into
    a polynomial in the raw invariant coordinates."""
    ncoords = n * (n + 1) // 2
    shifted = []
    for i, ci, si in zip(vary_idx, centers, scales):
        shifted.append(
            Poly.variable(ncoords, i, 1.0 / si) + Poly.constant(ncoords, -ci / si)
        )
    total = Poly(ncoords)
    for coeff, exps in zip(coeffs, exps_list):
        if coeff == 0:
            continue
        term = Poly.constant(ncoords, coeff)
        for p, e in zip(shifted, exps):
            for _ in range(e):
                term = term * p
        total = total + term
    return TransferPolynomial(n, total)


def fit_polynomial(R, sample: PhaseSpaceSample, cfg: FitConfig) -> FitReport:
    """Least-squares fit of R in the invariant-monomial basis, escalating
    the total degree until the validation sup error beats epsilon.

    R must be real-valued, Lorentz invariant and permutation symmetric,
    callable on (N, n, 2) momentum arrays. The sample covers one sign-pattern
    chamber of the permutation-invariant region, so training data is
    augmented with leg-permuted copies; the later symmetrization of the fit
    then stays accurate on the sampled chamber. Returns a FAIL report
    (passed=False) when max_degree is reached; no exception."""
    n = sample.n
    need = cfg.train_count + cfg.validate_count
    if sample.points.shape[0] < need:
        raise ValueError("sample too small for the requested train/validate split")
    pts_tr = sample.points[: cfg.train_count]
    pts_va = sample.points[cfg.train_count : need]
    # one representative permutation per sign-pattern coset: permutations
    # inside a chamber only reshuffle already-covered configurations
    r = sample.r
    perms = []
    for S in itertools.combinations(range(n), r):
        sigma = np.empty(n, dtype=int)
        sigma[list(S)] = np.arange(r)
        sigma[[l for l in range(n) if l not in S]] = np.arange(r, n)
        perms.append(sigma)
    # augmenting with permuted copies is sound only when R itself is
    # permutation symmetric; probe empirically
    probe = pts_tr[: min(64, pts_tr.shape[0])]
    y0 = np.asarray(R(probe), dtype=float)
    pscale = 1.0 + np.abs(y0).max()
    symmetric_input = all(
        np.abs(np.asarray(R(probe[:, sigma, :]), dtype=float) - y0).max() <= 1e-9 * pscale
        for sigma in perms[1:]
    )
    if symmetric_input:
        pts_tr = np.concatenate([pts_tr[:, sigma, :] for sigma in perms])
    q_tr = invariant_map([pts_tr[:, l, :] for l in range(n)])
    q_va = invariant_map([pts_va[:, l, :] for l in range(n)])
    y_tr = np.asarray(R(pts_tr), dtype=float)
    y_va = np.asarray(R(pts_va), dtype=float)

    # coordinates constant on the shell surface carry no information
    spread = q_tr.max(axis=0) - q_tr.min(axis=0)
    vary_idx = [i for i in range(q_tr.shape[1])
                if spread[i] > 1e-9 * (1.0 + np.abs(q_tr[:, i]).max())]
    centers = q_tr[:, vary_idx].mean(axis=0)
    scales = np.maximum(np.abs(q_tr[:, vary_idx] - centers).max(axis=0), 1e-30)
    x_tr = (q_tr[:, vary_idx] - centers) / scales
    x_va = (q_va[:, vary_idx] - centers) / scales

    history = []
    best = None
    for deg in range(cfg.max_degree + 1):
        exps_list = list(_multi_indices(len(vary_idx), deg))
        A = _basis_matrix(x_tr, exps_list)
        col_scale = np.maximum(np.abs(A).max(axis=0), 1e-30)
        coeffs, *_ = np.linalg.lstsq(A / col_scale, y_tr, rcond=None)
        coeffs = coeffs / col_scale
        val_pred = _basis_matrix(x_va, exps_list) @ coeffs
        sup_err = float(np.max(np.abs(val_pred - y_va)))
        history.append({"degree": deg, "sup_error": sup_err, "basis_size": len(exps_list)})
        if best is None or sup_err < best[0]:
            best = (sup_err, deg, coeffs, exps_list)
        if sup_err < cfg.epsilon:
            break
    sup_err, deg, coeffs, exps_list = best
    raw = _assemble_polynomial(n, coeffs, exps_list, vary_idx, centers, scales)
    sym = symmetrize_realify(raw)
    sym_pred = np.real(sym(pts_va))
    sym_err = float(np.max(np.abs(sym_pred - y_va)))
    return FitReport(
        polynomial=sym, raw_polynomial=raw, achieved_sup_error=sup_err,
        symmetrized_sup_error=sym_err, degree_used=deg,
        train_count=cfg.train_count, validate_count=cfg.validate_count,
        epsilon=cfg.epsilon, passed=sup_err < cfg.epsilon,
        symmetric_input=symmetric_input, history=history,
    )


def build_family(fits: dict, l_max: int) -> TransferFamily:
    """Assemble a transfer family from fit reports: the fixed constant at
    order 2, fitted members elsewhere, absent orders defaulting to 1."""
    members = {2: TransferPolynomial.constant(2, 1.0)}
    for n, report in fits.items():
        if n == 2:
            raise ValueError("order 2 is fixed to the constant 1")
        if not report.passed:
            raise ValueError(f"order-{n} fit did not reach its target error")
        p = report.polynomial
        if max(p.per_argument_degrees(), default=0) > l_max:
            raise ValueError(f"order-{n} member exceeds the degree bound {l_max}")
        members[n] = p
    fam = TransferFamily(members, l_max)
    check = validate_condition41(fam)
    if not check["passed"]:
        raise ValueError(f"assembled family fails validation: {check['violations']}")
    return fam


def reference_registry(params):
    """Built-in real Lorentz-invariant reference functions for the CLI."""
    m2 = params.m**2

    def exp_q12(points):
        ks = np.asarray(points, dtype=float)
        q12 = ks[:, 0, 0] * ks[:, 1, 0] - ks[:, 0, 1] * ks[:, 1, 1]
        return np.exp(-q12 / m2)

    def constant(points):
        return np.full(np.asarray(points).shape[0], 0.75)

    return {"exp_q12": exp_q12, "constant": constant}
