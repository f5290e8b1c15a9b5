"""Classical stochastic laser fields with a stable amplitude and a fluctuating phase.

The field envelope is ``eps(t) = eps0 * exp(-i Phi(t))``. Two phase models are
supported, plus an arbitrary user supplied spectrum:

* PDM: ``Phi`` is a Wiener process, ``dPhi = sqrt(2b) dW``; Lorentzian spectrum.
* OU frequency noise: the instantaneous frequency ``phi = dPhi/dt`` obeys
  ``dphi = -beta*phi dt + sqrt(2b)*beta dW``, giving a spectrum that is
  Lorentzian for ``|Omega| << beta`` and falls off like ``Omega**-4`` beyond.
* Tabulated: a sampled spectrum, linearly interpolated.

All quantities are in atomic units (energy == angular frequency).
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.integrate import trapezoid


class NoiseKind(str, enum.Enum):
    PDM = "pdm"
    OU = "ou"
    TABULATED = "tabulated"


class QuadratureError(RuntimeError):
    """Raised when an adaptive quadrature does not reach its tolerance."""


@dataclass(frozen=True)
class NoiseModel:
    """Parameters of a fluctuating laser field.

    ``amplitude_sq`` is ``|eps0|**2``; ``bandwidth`` is ``b`` and ``cutoff`` is
    the frequency correlation rate ``beta`` (``inf`` for the PDM). For tabulated
    spectra ``amplitude_sq`` is the integral of the table and ``bandwidth`` the
    effective bandwidth; both are filled in by :meth:`tabulated`.
    """

    amplitude_sq: float
    bandwidth: float
    cutoff: float = math.inf
    kind: NoiseKind = NoiseKind.PDM
    table_omega: np.ndarray | None = field(default=None, repr=False, compare=False)
    table_s: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        errors = []
        if not self.amplitude_sq > 0:
            errors.append("amplitude_sq must be > 0")
        if not self.bandwidth > 0:
            errors.append("bandwidth must be > 0")
        if not self.cutoff > 0:
            errors.append("cutoff must be > 0 or inf")
        if math.isinf(self.cutoff) and self.kind is NoiseKind.OU:
            errors.append("an infinite cutoff is the PDM; use NoiseKind.PDM")
        if self.kind is NoiseKind.TABULATED:
            if self.table_omega is None or self.table_s is None:
                errors.append("tabulated model needs table_omega and table_s")
            else:
                om, s = self.table_omega, self.table_s
                if om.shape != s.shape or om.ndim != 1 or om.size < 2:
                    errors.append("table arrays must be 1-d, equal length >= 2")
                elif np.any(np.diff(om) <= 0):
                    errors.append("table omega must be strictly increasing")
                if np.any(s < 0) or not np.all(np.isfinite(s)):
                    errors.append("tabulated spectrum must be finite and >= 0")
        if errors:
            raise ValueError("; ".join(errors))

    @classmethod
    def pdm(cls, bandwidth: float, amplitude_sq: float = 1.0) -> "NoiseModel":
        return cls(amplitude_sq, bandwidth, math.inf, NoiseKind.PDM)

    @classmethod
    def ou(cls, bandwidth: float, cutoff: float, amplitude_sq: float = 1.0) -> "NoiseModel":
        if math.isinf(cutoff):
            return cls.pdm(bandwidth, amplitude_sq)
        return cls(amplitude_sq, bandwidth, cutoff, NoiseKind.OU)

    @classmethod
    def tabulated(cls, omega, s_omega) -> "NoiseModel":
        om = np.asarray(omega, dtype=float)
        s = np.asarray(s_omega, dtype=float)
        total = float(trapezoid(s, om)) if om.size >= 2 else 0.0
        s_mid = float(np.interp(0.0, om, s, left=0.0, right=0.0))
        bw = total / (math.pi * s_mid) if s_mid > 0 else math.nan
        return cls(total, bw if bw > 0 else 1.0, math.inf, NoiseKind.TABULATED, om, s)

    @classmethod
    def from_csv(cls, path) -> "NoiseModel":
        """Read a two-column ``omega,s_omega`` CSV (header optional)."""
        rows = []
        with open(path, newline="") as fh:
            for rec in csv.reader(fh):
                if not rec or rec[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(rec[0]), float(rec[1])))
                except ValueError:
                    continue  # header line
        arr = np.array(rows, dtype=float)
        return cls.tabulated(arr[:, 0], arr[:, 1])

    @property
    def mean_intensity(self) -> float:
        """``<|eps|^2>``; equal to ``|eps0|^2`` for pure phase noise."""
        return self.amplitude_sq

    @property
    def is_pdm(self) -> bool:
        return self.kind is NoiseKind.PDM


# Counts tabulated-spectrum queries that fell outside the table range.
out_of_range_queries = 0


# ---------------------------------------------------------------------------
# correlation function


def correlation(model: NoiseModel, tau):
    """Two-time field correlation ``K(tau) = <eps(t+tau) eps*(t)>``."""
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0):
        raise ValueError("correlation() requires tau >= 0")
    b, beta, a2 = model.bandwidth, model.cutoff, model.amplitude_sq
    if model.kind is NoiseKind.PDM:
        out = a2 * np.exp(-b * tau_arr)
    elif model.kind is NoiseKind.OU:
        out = a2 * np.exp(-b * tau_arr + (b / beta) * (-np.expm1(-beta * tau_arr)))
    else:
        om, s = model.table_omega, model.table_s
        phase = np.exp(1j * np.multiply.outer(tau_arr, om))
        return trapezoid(phase * s, om, axis=-1)
    return out.astype(complex)


def _ou_log_corr_derivs(b: float, beta: float, order: int) -> np.ndarray:
    """Derivatives at tau=0 of K/|eps0|^2 = exp(g(tau)), orders 0..order."""
    g = np.zeros(order + 2)
    g[1] = 0.0  # g'(0) = -b + b
    for j in range(2, order + 2):
        g[j] = -(b / beta) * (-beta) ** j
    k = np.zeros(order + 1)
    k[0] = 1.0
    # K^(n+1) = sum_j C(n, j) g^(j+1) K^(n-j)
    for n in range(order):
        k[n + 1] = sum(math.comb(n, j) * g[j + 1] * k[n - j] for j in range(n + 1))
    return k


_ASYMPTOTIC_TERMS = 7


def _ou_spectrum(model: NoiseModel, omega: np.ndarray) -> np.ndarray:
    b, beta, a2 = model.bandwidth, model.cutoff, model.amplitude_sq
    x = b / beta
    omega = np.asarray(omega, dtype=float)
    out = np.empty_like(omega)
    switch = 30.0 * (b + beta)
    far = np.abs(omega) > switch
    near = ~far
    if np.any(near):
        # Laplace transform of exp(g) via u = exp(-beta tau):
        # (1/beta) sum_n x^n / prod_{k<=n} (a + k),  a = (b + i Omega)/beta
        a = (b + 1j * omega[near]) / beta
        term = 1.0 / a
        total = term.copy()
        n = 0
        while True:
            n += 1
            term = term * x / (a + n)
            total += term
            if n > x and np.all(np.abs(term) <= 1e-17 * np.abs(total)):
                break
            if n > 10_000:
                raise QuadratureError("OU spectral series did not converge")
        out[near] = a2 / math.pi * total.real / beta
    if np.any(far):
        # Re int_0^inf K e^{-i Omega tau} = sum_{j odd} K^(j)(0) (-1)^{(j+1)/2} / Omega^{j+1}
        kd = _ou_log_corr_derivs(b, beta, 2 * _ASYMPTOTIC_TERMS + 1)
        w = omega[far]
        acc = np.zeros_like(w)
        for j in range(3, 2 * _ASYMPTOTIC_TERMS + 2, 2):
            acc += kd[j] * (-1) ** ((j + 1) // 2) / w ** (j + 1)
        out[far] = a2 / math.pi * acc
    return out


def spectrum(model: NoiseModel, omega):
    """Laser spectrum ``S(Omega) = (1/pi) Re int_0^inf K(tau) exp(-i Omega tau) dtau``.

    PDM gives the exact Lorentzian. For OU noise the transform is evaluated from
    the convergent series of the Laplace transform of ``K`` (an incomplete gamma
    expansion) and, far in the wings, from the asymptotic expansion in
    ``1/Omega**2`` with exact derivatives of ``K`` at the origin; see
    :func:`spectrum_quadrature` for the direct numerical transform.
    """
    global out_of_range_queries
    om = np.asarray(omega, dtype=float)
    scalar = om.ndim == 0
    om = np.atleast_1d(om)
    if model.kind is NoiseKind.PDM:
        b = model.bandwidth
        out = model.amplitude_sq / math.pi * b / (b * b + om * om)
    elif model.kind is NoiseKind.OU:
        out = _ou_spectrum(model, om)
    else:
        tab_om, tab_s = model.table_omega, model.table_s
        outside = (om < tab_om[0]) | (om > tab_om[-1])
        if np.any(outside):
            out_of_range_queries += int(np.count_nonzero(outside))
        out = np.interp(om, tab_om, tab_s, left=0.0, right=0.0)
    out = np.maximum(out, 0.0)
    return float(out[0]) if scalar else out


def spectrum_quadrature(model: NoiseModel, omega: float, tau_max_factor: float = 40.0) -> float:
    """Direct half-line cosine transform of ``K(tau)``.

    The integral is truncated at ``tau_max = 40/b``; for ``|Omega| > b`` it is
    split into panels of width ``pi/|Omega|`` so each panel sees half an
    oscillation.
    """
    if model.kind is NoiseKind.TABULATED:
        return spectrum(model, omega)
    b = model.bandwidth
    tau_max = tau_max_factor / b

    def k(t):
        return correlation(model, t).real

    w = abs(float(omega))
    if w <= b:
        val, err = integrate.quad(lambda t: k(t) * math.cos(w * t), 0.0, tau_max,
                                  limit=400, epsabs=0.0, epsrel=1e-11)
        if not err <= 1e-8 * max(abs(val), 1e-300) + 1e-300:
            raise QuadratureError(f"spectrum quadrature: err={err:g}, val={val:g}")
        return val / math.pi
    panel = math.pi / w
    n_panels = int(math.ceil(tau_max / panel))
    # Gauss-Legendre per panel, vectorised
    xg, wg = np.polynomial.legendre.leggauss(16)
    edges = np.arange(n_panels + 1) * panel
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * panel
    t = (mid[:, None] + half * xg[None, :]).ravel()
    vals = k(t) * np.cos(w * t)
    return float(np.sum(vals.reshape(n_panels, -1) @ wg) * half / math.pi)


def spectrum_product_approx(model: NoiseModel, omega):
    """Large-``beta`` product form: Lorentzian times ``1/(1 + (Omega/beta)^2)``."""
    om = np.asarray(omega, dtype=float)
    b, beta = model.bandwidth, model.cutoff
    lor = model.amplitude_sq / math.pi * b / (b * b + om * om)
    if math.isinf(beta):
        return lor
    return lor / (1.0 + (om / beta) ** 2)


def effective_bandwidth(model: NoiseModel) -> float:
    """``B = <|eps|^2> / (pi S(0))``; equals ``b`` for the PDM."""
    if model.kind is NoiseKind.PDM:
        return model.bandwidth
    s0 = spectrum(model, 0.0)
    if s0 <= 0:
        raise ValueError("degenerate spectrum: S(0) = 0")
    return model.mean_intensity / (math.pi * s0)


def spectrum_integral(model: NoiseModel, lower=-math.inf, upper=math.inf) -> float:
    """``int S(Omega) dOmega`` over ``[lower, upper]``."""
    if model.kind is NoiseKind.PDM:
        b = model.bandwidth
        hi = 0.5 if math.isinf(upper) and upper > 0 else math.atan(upper / b) / math.pi
        lo = -0.5 if math.isinf(lower) and lower < 0 else math.atan(lower / b) / math.pi
        return model.amplitude_sq * (hi - lo)
    if model.kind is NoiseKind.TABULATED:
        om, s = model.table_omega, model.table_s
        lo, hi = max(lower, om[0]), min(upper, om[-1])
        if hi <= lo:
            return 0.0
        inside = (om > lo) & (om < hi)
        grid = np.concatenate(([lo], om[inside], [hi]))
        return float(trapezoid(np.interp(grid, om, s), grid))
    scale = model.bandwidth + model.cutoff
    # substitute Omega = scale * tan(theta) to compactify
    th_lo = math.atan(lower / scale) if math.isfinite(lower) else -math.pi / 2
    th_hi = math.atan(upper / scale) if math.isfinite(upper) else math.pi / 2

    def f(th):
        c = math.cos(th)
        if c == 0.0:
            return 0.0
        return spectrum(model, scale * math.tan(th)) * scale / (c * c)

    pts = [p for p in (math.atan(model.bandwidth / scale), 0.0, -math.atan(model.bandwidth / scale))
           if th_lo < p < th_hi]
    val, _ = integrate.quad(f, th_lo, th_hi, points=pts or None, limit=400,
                            epsabs=0.0, epsrel=1e-12)
    return val


# ---------------------------------------------------------------------------
# sample paths


@dataclass(frozen=True)
class PhasePath:
    dt: float
    phases: np.ndarray
    seed: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if self.phases.ndim != 1 or self.phases.size < 2:
            raise ValueError("a phase path needs at least two samples")
        if self.phases[0] != 0.0:
            raise ValueError("phases[0] must be 0")

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.phases.size)


class StepSizeError(ValueError):
    pass


def check_step(model: NoiseModel, dt: float) -> None:
    if not dt > 0:
        raise StepSizeError("dt must be > 0")
    if model.kind is NoiseKind.OU and dt > 0.1 / model.cutoff:
        raise StepSizeError(f"dt={dt:g} exceeds 0.1/beta={0.1 / model.cutoff:g}")


def phase_increments(model: NoiseModel, dt: float, n_steps: int, rng: np.random.Generator,
                     n_paths: int = 1, scheme: str = "euler") -> tuple[np.ndarray, np.ndarray]:
    """Draw ``(Phi, phi)`` on ``n_steps + 1`` points for ``n_paths`` paths.

    ``Phi`` starts at 0. ``phi`` (the instantaneous frequency) is returned for
    OU noise and is ``None``-like zeros for the PDM. ``scheme`` selects the
    Euler-Maruyama update (``"euler"``) or the exact OU transition (``"exact"``).
    """
    check_step(model, dt)
    if model.kind is NoiseKind.TABULATED:
        raise ValueError("no sample-path model for a tabulated spectrum")
    b = model.bandwidth
    Phi = np.zeros((n_paths, n_steps + 1))
    if model.kind is NoiseKind.PDM:
        dphi = rng.standard_normal((n_paths, n_steps)) * math.sqrt(2.0 * b * dt)
        np.cumsum(dphi, axis=1, out=Phi[:, 1:])
        return Phi, np.zeros_like(Phi)
    beta = model.cutoff
    phi = np.empty((n_paths, n_steps + 1))
    phi[:, 0] = rng.standard_normal(n_paths) * math.sqrt(beta * b)
    xi = rng.standard_normal((n_paths, n_steps))
    if scheme == "euler":
        decay = 1.0 - beta * dt
        kick = math.sqrt(2.0 * b) * beta * math.sqrt(dt)
    elif scheme == "exact":
        decay = math.exp(-beta * dt)
        kick = math.sqrt(beta * b * (1.0 - decay * decay))
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    for k in range(n_steps):
        phi[:, k + 1] = decay * phi[:, k] + kick * xi[:, k]
    np.cumsum(0.5 * dt * (phi[:, 1:] + phi[:, :-1]), axis=1, out=Phi[:, 1:])
    return Phi, phi


def sample_phase_path(model: NoiseModel, dt: float, n_steps: int, seed: int,
                      scheme: str = "euler") -> PhasePath:
    """One seeded realisation of the phase ``Phi(t_k)``, ``t_k = k dt``."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    rng = np.random.default_rng(seed)
    Phi, _ = phase_increments(model, dt, n_steps, rng, 1, scheme)
    return PhasePath(dt, Phi[0], seed)


def mc_correlation(model: NoiseModel, lags: np.ndarray, dt: float, n_paths: int, seed: int,
                   scheme: str = "euler", t0_steps: int = 0):
    """Monte-Carlo estimate of ``K(tau)`` at integer multiples ``lags`` of ``dt``.

    Returns ``(mean, stderr)`` (complex mean, real standard error of the real part).
    """
    lags = np.asarray(lags, dtype=int)
    rng = np.random.default_rng(seed)
    Phi, _ = phase_increments(model, dt, int(t0_steps + lags.max()), rng, n_paths, scheme)
    base = Phi[:, t0_steps][:, None]
    samples = model.amplitude_sq * np.exp(-1j * (Phi[:, t0_steps + lags] - base))
    mean = samples.mean(axis=0)
    err = samples.real.std(axis=0, ddof=1) / math.sqrt(n_paths)
    return mean, err


# ---------------------------------------------------------------------------
# Lambda_Sp


def lambda_sp_pdm(bandwidth: float, mean_energy: float) -> float:
    """Closed form of the spectral moment for a Lorentzian spectrum."""
    b = bandwidth
    r = mean_energy / b
    return math.sqrt(b / (2 * math.pi ** 2)) * ((1 - 2j * r) * np.sqrt(complex(r, -1.0))).real


def lambda_sp(model: NoiseModel, mean_energy: float, epsrel: float = 1e-12) -> float:
    """``(1/<|eps|^2>^2) int_0^inf S(mean+e)^2 (2e)^{3/2} de`` by adaptive quadrature."""
    scale = model.bandwidth
    a2 = model.mean_intensity
    peak = max(-mean_energy, 0.0)

    def f(u):
        e = u * scale
        return spectrum(model, mean_energy + e) ** 2 * (2 * e) ** 1.5 * scale

    split = peak / scale + 50.0
    pts = [peak / scale] if peak > 0 else None
    v1, e1 = integrate.quad(f, 0.0, split, points=pts, limit=500, epsabs=0.0, epsrel=epsrel)
    v2, e2 = integrate.quad(f, split, math.inf, limit=500, epsabs=0.0, epsrel=epsrel)
    val = (v1 + v2) / a2 ** 2
    if not math.isfinite(val):
        raise QuadratureError("Lambda_Sp integral diverged")
    if e1 + e2 > 1e-6 * abs(v1 + v2):
        raise QuadratureError(f"Lambda_Sp quadrature error {e1 + e2:g}")
    return val


def write_spectrum_csv(path, omega, s_omega) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["omega", "s_omega"])
        for o, s in zip(np.asarray(omega), np.asarray(s_omega)):
            w.writerow([repr(float(o)), repr(float(s))])
