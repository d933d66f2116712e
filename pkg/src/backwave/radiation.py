"""Radiation fields at null infinity and their wave-zone approximants.

A radiation field F0 prescribes, mode by spherical-harmonic mode, the
leading 1/r profile of a wave along outgoing null directions.  From it the
module derives:

* the second-order correction F1, fixed per mode by
      F1_lm(q) = -(l(l+1)/2) int_0^q F0_lm,        F1_lm(0) = 0,
  which is the unique choice cancelling the leading interior error of the
  two-term expansion;
* the wave-zone approximants

      psi0  = F0(r-t)/r chi(<t-r>/r)
      psi01 = (F0(r-t)/r + F1(r-t)/r^2) chi(<t-r>/r)
      psi_e = M chi_e(r-t)/r                  (exact solution for r > 0)

  together with the derivative approximants psi0' = -F0' chi / r,
  psi1' = -F1' chi / r^2, psi_e' = -M chi_e'(r-t)/r, and the exact time
  derivatives of psi01 and psi_e;
* the analytic residual of the wave operator applied to psi01, whose only
  surviving terms are supported on the cutoff transition ring plus the
  angular term -l(l+1) F1/r^4 inside the wave zone;
* the weighted data norms: the square-integral norm with radial weight
  <q>^(2 w) and spectral angular weights (1 + l(l+1))^j, and the sup norm
  with weight <q>^gamma.

Angular derivatives are realized spectrally throughout: |d_omega^alpha|
of order j enters as the diagonal weight (1 + l(l+1))^(j/2), an equivalent
norm in the harmonic representation.  The sup norm synthesizes fields with
mean-normalized harmonics (sqrt(4 pi) Y_lm, so the l = 0 basis function is
1), making a pure l = 0 field's sup norm equal to its profile's sup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy import integrate

from backwave.angular import angular_grid, eigenvalue_array, mode_count, mode_index
from backwave.cutoffs import chi_exterior, chi_wave_zone
from backwave.profiles import AntiderivativeProfile, Profile, qbracket

SQRT4PI = math.sqrt(4.0 * math.pi)

APPROXIMANTS = ("psi0", "psi01", "psi_e", "dt_psi0", "dt_psi1", "dt_psi_e")


class RadiationDataError(ValueError):
    """Inadmissible radiation field or norm request."""


@dataclass(frozen=True)
class MassTerm:
    """Exterior mass coefficient; psi_e = M chi_e(r-t)/r solves the wave equation for r > 0."""

    M: float = 0.0

    def __post_init__(self):
        if self.M < 0 or not np.isfinite(self.M):
            raise RadiationDataError("mass coefficient must be finite and >= 0")


class RadiationField:
    """Band-limited map from (l, m) to a q-profile, with decay class gamma.

    Real harmonics are used internally, so the reality (conjugate-symmetry)
    constraint of a physical field holds identically; coefficients are real.
    """

    def __init__(self, modes: Dict[Tuple[int, int], Profile], l_max: int, gamma: float):
        if not 0.5 < gamma < 1.0:
            raise RadiationDataError(f"gamma must lie in (1/2, 1), got {gamma}")
        for (l, m) in modes:
            if l < 0 or l > l_max or abs(m) > l:
                raise RadiationDataError(f"mode ({l},{m}) outside band limit {l_max}")
        for lm, prof in modes.items():
            p = getattr(prof, "decay_exponent", None)
            if p is not None and p <= gamma:
                raise RadiationDataError(
                    f"mode {lm}: poly-tail exponent {p} must exceed gamma={gamma}"
                )
        self.modes = dict(sorted(modes.items()))
        self.l_max = int(l_max)
        self.gamma = float(gamma)

    def mode_items(self):
        return self.modes.items()

    def is_zero(self) -> bool:
        return not self.modes

    def max_ell(self) -> int:
        return max((l for (l, _m) in self.modes), default=0)

    def support_radius(self, tol: float = 1e-16) -> float:
        return max((abs(p.center) + p.support_radius(tol) for p in self.modes.values()),
                   default=1.0)

    def scaled(self, factor: float) -> "RadiationField":
        out = {lm: _ScaledProfile(prof, factor) for lm, prof in self.modes.items()}
        return RadiationField(out, self.l_max, self.gamma)


class _ScaledProfile(Profile):
    """Constant multiple of a base profile (linearity tests, field scaling)."""

    kind = "scaled"

    def __init__(self, base: Profile, factor: float):
        self._base = base
        self._factor = float(factor)
        self.max_derivative_order = base.max_derivative_order
        self._center = base.center
        self._amplitude = abs(factor) * base.amplitude_scale()

    def _value(self, q):
        return self._factor * self._base.value(q)

    def _derivative(self, q, order):
        return self._factor * self._base.derivative(q, order)

    def support_radius(self, tol: float = 1e-16) -> float:
        return self._base.support_radius(tol)


def derive_F1(f0: RadiationField, q_max: float = None) -> RadiationField:
    """Second-order correction field: F1_lm = -(l(l+1)/2) int_0^q F0_lm.

    The l = 0 modes drop out (the angular Laplacian annihilates them).  Each
    integral is cached as a dense antiderivative profile whose derivatives
    delegate exactly to F0's.  Profiles whose tail integral does not
    converge are rejected.
    """
    out = {}
    for (l, m), prof in f0.mode_items():
        if l == 0:
            continue
        p = getattr(prof, "decay_exponent", None)
        if p is not None and p <= 0.5:
            # the second-order field would fail its own weighted norm bound
            raise RadiationDataError(
                f"mode ({l},{m}): poly-tail exponent {p} <= 1/2 makes the "
                "second-order field's weighted norm diverge"
            )
        out[(l, m)] = AntiderivativeProfile(prof, -0.5 * l * (l + 1.0), q_max=q_max)
    return RadiationField(out, f0.l_max, f0.gamma)


# ---------------------------------------------------------------------------
# weighted data norms
# ---------------------------------------------------------------------------

def _compactified_quad(fn, epsabs=1e-13, epsrel=1e-10):
    """int_R fn(q) dq via q = tan(theta); dq = (1+q^2) dtheta.

    The substitution maps the real line onto a finite interval exactly, so
    no tail truncation or tail model is needed; endpoint behavior is an
    integrable algebraic singularity at worst for admissible profiles.
    """
    huge = 1e12

    def g(theta):
        q = math.tan(theta)
        if abs(q) > huge:
            return 0.0
        val = fn(q)
        return val * (1.0 + q * q)

    val, _err = integrate.quad(g, -0.5 * math.pi, 0.5 * math.pi,
                               limit=400, epsabs=epsabs, epsrel=epsrel)
    return val


def norm_data_L2(field: RadiationField, n_derivs: int, weight_exponent: float) -> float:
    """Equivalent weighted square norm of the data,

        sum_{k+j<=N} sum_lm (1+l(l+1))^j int |(<q> d_q)^k F_lm|^2 <q>^(2 w) dq,

    computed mode by mode by adaptive quadrature on the compactified line.
    """
    total = 0.0
    for (l, m), prof in field.mode_items():
        if prof.max_derivative_order < n_derivs:
            raise RadiationDataError(
                f"mode ({l},{m}) profile supports {prof.max_derivative_order} "
                f"derivatives, norm needs {n_derivs}"
            )
        ev = l * (l + 1.0)
        for k in range(n_derivs + 1):
            for j in range(n_derivs + 1 - k):
                w_ang = (1.0 + ev) ** j

                def fn(q, _k=k):
                    d = float(prof.scaled_derivative(np.asarray([q]), _k)[0])
                    return d * d * float(qbracket(q)) ** (2.0 * weight_exponent)

                piece = _compactified_quad(fn)
                if not np.isfinite(piece):
                    raise RadiationDataError(
                        f"weighted norm integral diverges on mode ({l},{m}) "
                        f"at derivative order {k}"
                    )
                total += w_ang * piece
    return total


def _sample_q_line(n: int = 2001, q_cap: float = 1e8) -> np.ndarray:
    theta = np.linspace(-0.5 * math.pi, 0.5 * math.pi, n + 2)[1:-1]
    q = np.tan(theta)
    return q[np.abs(q) <= q_cap]


def norm_data_sup(field: RadiationField, n_derivs: int, gamma: float,
                  n_q: int = 4001) -> float:
    """Weighted sup norm sup <q>^gamma |(<q> d_q)^k d_omega^alpha F| over a
    dense q-sample and the angular collocation grid.

    Angular derivatives are spectral weights; synthesis uses mean-normalized
    harmonics (sqrt(4 pi) Y), so an l = 0 field's norm is its profile's
    weighted sup.  Monotone nondecreasing in the derivative count.
    """
    if field.is_zero():
        return 0.0
    l_tab = field.max_ell()
    grid = angular_grid(max(l_tab, 1))
    qs = _sample_q_line(n_q)
    wq = qbracket(qs) ** gamma
    ev = eigenvalue_array(l_tab)
    best = 0.0
    for k in range(n_derivs + 1):
        # coefficients of (<q> d_q)^k F per mode, stacked over q
        block = np.zeros((mode_count(l_tab), qs.size))
        for (l, m), prof in field.mode_items():
            block[mode_index(l, m)] = prof.scaled_derivative(qs, k)
        for j in range(n_derivs + 1 - k):
            scaled = block * ((1.0 + ev) ** (0.5 * j))[:, None] * SQRT4PI
            n_modes = scaled.shape[0]
            vals = np.tensordot(grid.ylm[:n_modes], scaled, axes=(0, 0))
            best = max(best, float(np.max(np.abs(vals) * wq[None, None, :])))
    return best


# ---------------------------------------------------------------------------
# approximants and the analytic wave-operator residual
# ---------------------------------------------------------------------------

def _chi_terms(t, r):
    q = r - t
    br = qbracket(q)
    sigma = br / r
    c = chi_wave_zone.value(sigma)
    cp = chi_wave_zone.derivative(sigma, 1)
    cpp = chi_wave_zone.derivative(sigma, 2)
    return q, br, sigma, c, cp, cpp


def eval_approximant(f0: RadiationField, f1: RadiationField, mass: MassTerm,
                     which: str, t: float, r) -> Dict[Tuple[int, int], np.ndarray]:
    """Per-mode coefficients of the requested wave-zone approximant at (t, r).

    ``r`` may be an array of positive radii.  The mass term contributes only
    to the (0, 0) slot, with coefficient M chi_e(r-t)/r sqrt(4 pi) (so the
    physical value is M chi_e/r).
    """
    if which not in APPROXIMANTS:
        raise RadiationDataError(f"unknown approximant {which!r}; expected one of {APPROXIMANTS}")
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise RadiationDataError("approximants are wave-zone objects; require r > 0")
    q = r - t
    out: Dict[Tuple[int, int], np.ndarray] = {}
    if which == "psi_e":
        out[(0, 0)] = mass.M * chi_exterior.value(q) / r * SQRT4PI
        return out
    if which == "dt_psi_e":
        out[(0, 0)] = -mass.M * chi_exterior.derivative(q, 1) / r * SQRT4PI
        return out
    c = chi_wave_zone.value(qbracket(q) / r)
    for lm, prof in f0.mode_items():
        if which == "psi0":
            out[lm] = prof.value(q) / r * c
        elif which == "dt_psi0":
            out[lm] = -prof.derivative(q, 1) / r * c
        elif which == "psi01":
            val = prof.value(q) / r
            g = f1.modes.get(lm)
            if g is not None:
                val = val + g.value(q) / r**2
            out[lm] = val * c
    if which == "dt_psi1":
        for lm, g in f1.mode_items():
            out[lm] = -g.derivative(q, 1) / r**2 * c
    return out


def eval_dt_psi01_exact(f0: RadiationField, f1: RadiationField,
                        t: float, r) -> Dict[Tuple[int, int], np.ndarray]:
    """Exact d/dt of psi01 (cutoff differentiated as well), per mode.

    d_t psi01 = (-F0'/r - F1'/r^2) chi + (F0/r + F1/r^2) chi'(<q>/r) (t-r)/(<q> r).
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise RadiationDataError("require r > 0")
    q, br, sigma, c, cp, _ = _chi_terms(t, r)
    out = {}
    for lm, prof in f0.mode_items():
        g = f1.modes.get(lm)
        main = -prof.derivative(q, 1) / r
        amp = prof.value(q) / r
        if g is not None:
            main = main - g.derivative(q, 1) / r**2
            amp = amp + g.value(q) / r**2
        out[lm] = main * c + amp * cp * (-q) / (br * r)
    return out


def residual_box_psi01(f0: RadiationField, f1: RadiationField,
                       t: float, r) -> Dict[Tuple[int, int], np.ndarray]:
    """Analytic wave-operator residual of psi01 per mode (box = -d_t^2 + Lap).

    With q = r - t, sigma = <q>/r, D = (d_r - d_t):

      box psi01 = -(2 F0'/r) chi'(sigma) <q>/r^2
                  - (F0/r) D[chi'(sigma) <q>/r^2]
                  - l(l+1) F1/r^4 chi(sigma)
                  - (2 F1'/r) chi'(sigma) <q>/r^3
                  - (F1/r) D[chi'(sigma) <q>/r^3 + chi(sigma)/r^2].

    Identically zero wherever the cutoff is constant and F1 vanishes; in the
    wave-zone interior only the -l(l+1) F1/r^4 term survives.  The formula
    already carries the cancellation 2 F1' = Lap_omega F0, so ``f1`` must be
    the field produced by :func:`derive_F1` from ``f0``.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise RadiationDataError("require r > 0")
    for lm in f0.modes:
        if lm[0] > 0 and lm not in f1.modes:
            raise RadiationDataError(
                f"residual formula needs the derived second-order mode for {lm}; "
                "pass the field returned by derive_F1"
            )
    q, br, sigma, c, cp, cpp = _chi_terms(t, r)
    # D q = 2, D <q> = 2q/<q>, D sigma = 2q/(<q> r) - <q>/r^2, D r = 1
    dsigma = 2.0 * q / (br * r) - br / r**2
    # D[chi'(sigma) <q>/r^2] and D[chi'(sigma) <q>/r^3]
    d_cp_br_r2 = cpp * dsigma * br / r**2 + cp * (2.0 * q / (br * r**2) - 2.0 * br / r**3)
    d_cp_br_r3 = cpp * dsigma * br / r**3 + cp * (2.0 * q / (br * r**3) - 3.0 * br / r**4)
    d_c_r2 = cp * dsigma / r**2 - 2.0 * c / r**3
    out = {}
    for lm, prof in f0.mode_items():
        l = lm[0]
        f0v = prof.value(q)
        f0p = prof.derivative(q, 1)
        res = -(2.0 * f0p / r) * cp * br / r**2 - (f0v / r) * d_cp_br_r2
        g = f1.modes.get(lm)
        if g is not None:
            gv = g.value(q)
            gp = g.derivative(q, 1)
            res = res - l * (l + 1.0) * gv / r**4 * c
            res = res - (2.0 * gp / r) * cp * br / r**3
            res = res - (gv / r) * (d_cp_br_r3 + d_c_r2)
        out[lm] = res
    return out


def source_norm_weighted(f0: RadiationField, f1: RadiationField, t: float,
                         r: np.ndarray, s: float) -> float:
    """|| <t+r>^s box psi01(t, .) ||_L2 assembled on a radial grid (trapezoid)."""
    res = residual_box_psi01(f0, f1, t, r)
    w = (1.0 + (t + r) ** 2) ** s * r**2
    total = 0.0
    for _lm, vals in res.items():
        total += np.trapezoid(vals * vals * w, r)
    return math.sqrt(total)
