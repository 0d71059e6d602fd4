"""Numerical check that the closed-form price solves the two-asset pricing PDE

    r_bar*C = C_t + r_bar*(S*C_S + Z*C_Z)
              + (sigma**2 S**2 C_SS + 2 sigma sigma~ S Z C_SZ + sigma~**2 Z**2 C_ZZ) / 2.

The partial derivatives of ``d = -y*`` follow by implicit differentiation of the
strike equation; the option partials are assembled from them.  Both are checked
against central finite differences of the pricer itself.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace

from .closed_form import LrClosedFormInputs, RootResult, lr_call_price, normal_cdf, normal_pdf, solve_y_star
from .errors import MaturityDegenerate

MATURITY_EPS = 1e-10


@dataclass(frozen=True)
class PartialsFrame:
    """Terms of the rearranged strike equation ``F1 + F2 = F3`` and the density weights ``G``."""

    F1: float
    F2: float
    F3: float
    D: float
    F1_hat: float
    F2_hat: float
    G1: float
    G2: float
    G3: float
    d: float

    @property
    def G(self) -> float:
        return self.G1 + self.G2 + self.G3

    def identity_errors(self, w: float, w_tilde: float) -> dict[str, float]:
        """Relative violations of the three algebraic identities."""
        f_scale = max(abs(self.F1), abs(self.F2), abs(self.F3)) or 1.0
        g_scale = max(abs(self.G1), abs(self.G2), abs(self.G3)) or 1.0
        return {
            "F1+F2=F3": abs(self.F1 + self.F2 - self.F3) / f_scale,
            "w*F1_hat+w~*F2_hat=1": abs(w * self.F1_hat + w_tilde * self.F2_hat - 1.0),
            "G1+G2+G3=0": abs(self.G) / g_scale,
        }


@dataclass(frozen=True)
class PartialSet:
    """Partials of ``d`` and ``C``, each scaled by its natural price powers (``S*C_S`` etc.)."""

    d_t: float
    S_dS: float
    Z_dZ: float
    S2_dSS: float
    SZ_dSZ: float
    Z2_dZZ: float
    C_t: float
    S_CS: float
    Z_CZ: float
    S2_CSS: float
    SZ_CSZ: float
    Z2_CZZ: float

    FIRST_ORDER = ("d_t", "S_dS", "Z_dZ", "C_t", "S_CS", "Z_CZ")
    SECOND_ORDER = ("S2_dSS", "SZ_dSZ", "Z2_dZZ", "S2_CSS", "SZ_CSZ", "Z2_CZZ")


PARTIAL_FIELDS = tuple(f.name for f in fields(PartialSet))


def partials_frame(inp: LrClosedFormInputs, root: RootResult | None = None) -> PartialsFrame:
    root = solve_y_star(inp) if root is None else root
    eta, K = inp.spec.eta, inp.spec.strike
    S, Z = inp.S, inp.Z
    w, wt, dw, m = inp.w, inp.w_tilde, inp.dw, inp.m
    d = root.d
    F1 = eta * S
    F2 = (1 - eta) * Z * math.exp(-0.5 * dw * dw + dw * d)
    F3 = K * math.exp(-m) * math.exp(-0.5 * w * w + w * d)
    D = w * F1 + wt * F2
    G1 = eta * S * normal_pdf(d)
    # carries the Z factor; without it neither the option partials nor G = 0 hold
    G2 = (1 - eta) * Z * normal_pdf(d - dw)
    G3 = -K * math.exp(-m) * normal_pdf(d - w)
    return PartialsFrame(F1, F2, F3, D, F1 / D, F2 / D, float(G1), float(G2), float(G3), d)


def analytic_partials(inp: LrClosedFormInputs, frame: PartialsFrame | None = None,
                      fault: str | None = None) -> PartialSet:
    """Closed-form partials of ``d`` and ``C``.

    ``fault`` names a field whose sign is flipped; it exists only to let the
    verifier demonstrate that it catches a wrong partial.
    """
    tau = inp.tau
    if tau < MATURITY_EPS:
        raise MaturityDegenerate("time to maturity too small for analytic partials")
    frame = partials_frame(inp) if frame is None else frame
    eta, K, S, Z = inp.spec.eta, inp.spec.strike, inp.S, inp.Z
    w, wt, dw, m, r = inp.w, inp.w_tilde, inp.dw, inp.m, inp.r_bar
    d, f1, f2 = frame.d, frame.F1_hat, frame.F2_hat
    f3 = f1 + f2

    d_t = -r * f3 + (d - w) / (2 * tau) - dw * wt * f2 / (2 * tau)
    s_ds = f1
    z_dz = f2
    s2_dss = f1 * f1 * (dw * dw * f2 - w * w * f3)
    sz_dsz = -w * wt * f1 * f2 * f3
    z2_dzz = f2 * f2 * (dw * dw * f1 - wt * wt * f3)

    G1, G2, G3 = frame.G1, frame.G2, frame.G3
    G = G1 + G2 + G3
    disc = K * math.exp(-m)
    curv = dw * G2 + w * G3 - d * G

    c_t = -disc * normal_cdf(d - w) * r + G * d_t + (dw * G2 + w * G3) / (2 * tau)
    s_cs = eta * S * normal_cdf(d) + G * s_ds
    z_cz = (1 - eta) * Z * normal_cdf(d - dw) + G * z_dz
    s2_css = G * s2_dss + curv * s_ds * s_ds + 2 * G1 * s_ds
    sz_csz = G * sz_dsz + curv * s_ds * z_dz + G1 * z_dz + G2 * s_ds
    z2_czz = G * z2_dzz + curv * z_dz * z_dz + 2 * G2 * z_dz

    values = dict(d_t=d_t, S_dS=s_ds, Z_dZ=z_dz, S2_dSS=s2_dss, SZ_dSZ=sz_dsz, Z2_dZZ=z2_dzz,
                  C_t=float(c_t), S_CS=float(s_cs), Z_CZ=float(z_cz), S2_CSS=float(s2_css),
                  SZ_CSZ=float(sz_csz), Z2_CZZ=float(z2_czz))
    if fault is not None:
        if fault not in values:
            raise ValueError(f"unknown partial {fault!r}")
        values[fault] = -values[fault]
    return PartialSet(**values)


def pde_residual_from(inp: LrClosedFormInputs, price: float, partials: PartialSet) -> float:
    _, sigma, _, sigma_t = inp.params.at(inp.t)
    r = inp.r_bar
    p = partials
    diffusion = 0.5 * (sigma * sigma * p.S2_CSS + 2 * sigma * sigma_t * p.SZ_CSZ
                       + sigma_t * sigma_t * p.Z2_CZZ)
    return r * price - p.C_t - r * (p.S_CS + p.Z_CZ) - diffusion


def lr_pde_residual(inp: LrClosedFormInputs, fault: str | None = None) -> float:
    """PDE residual of the closed-form price using analytic partials."""
    root = solve_y_star(inp)
    frame = partials_frame(inp, root)
    return pde_residual_from(inp, lr_call_price(inp, root), analytic_partials(inp, frame, fault))


# relative central-difference steps; second derivatives use a wider step to
# keep cancellation error well under truncation error
FD_STEP_FIRST = 1e-5
FD_STEP_SECOND = 1e-3


def _d_of(inp: LrClosedFormInputs) -> float:
    return solve_y_star(inp).d


def finite_difference_partials(inp: LrClosedFormInputs, h1: float = FD_STEP_FIRST,
                               h2: float = FD_STEP_SECOND) -> PartialSet:
    """Five-point (four-point for the cross term) central differences of ``d`` and ``C``."""
    tau = inp.tau
    if tau <= 4 * h1 * tau or tau < MATURITY_EPS:
        raise MaturityDegenerate("time to maturity too small for finite differences")

    def shifted(t=0.0, s=0.0, z=0.0):
        return replace(inp, t=inp.t + t, S=inp.S + s, Z=inp.Z + z)

    def first(fn, attr, h):
        def at(k):
            return fn(shifted(**{attr: k * h}))
        return (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * h)

    def second(fn, attr, h):
        def at(k):
            return fn(shifted(**{attr: k * h}))
        return (-at(2) + 16 * at(1) - 30 * fn(inp) + 16 * at(-1) - at(-2)) / (12 * h * h)

    def cross(fn, hs, hz):
        pp = fn(shifted(s=hs, z=hz))
        pm = fn(shifted(s=hs, z=-hz))
        mp = fn(shifted(s=-hs, z=hz))
        mm = fn(shifted(s=-hs, z=-hz))
        return (pp - pm - mp + mm) / (4 * hs * hz)

    S, Z = inp.S, inp.Z
    out = {}
    for name, fn in (("d", _d_of), ("C", lr_call_price)):
        out[f"{name}_t"] = first(fn, "t", h1 * tau)
        out[f"S_{name}S"] = S * first(fn, "s", h1 * S)
        out[f"Z_{name}Z"] = Z * first(fn, "z", h1 * Z)
        out[f"S2_{name}SS"] = S * S * second(fn, "s", h2 * S)
        out[f"SZ_{name}SZ"] = S * Z * cross(fn, h2 * S, h2 * Z)
        out[f"Z2_{name}ZZ"] = Z * Z * second(fn, "z", h2 * Z)
    return PartialSet(**out)


def partial_scales(inp: LrClosedFormInputs) -> dict[str, float]:
    """Magnitude floors for relative comparisons, one per partial.

    ``d``-partials are dimensionless (``d_t`` scaled by ``1/tau``); ``C``-partials
    are measured against the portfolio value.
    """
    value = inp.spec.portfolio(inp.S, inp.Z) + inp.spec.strike
    scales = {}
    for name in PARTIAL_FIELDS:
        base = value if "C" in name else 1.0
        if name.endswith("_t"):
            base /= inp.tau
        scales[name] = base
    return scales


def compare_partials(inp: LrClosedFormInputs, analytic: PartialSet, numeric: PartialSet,
                     floor: float = 1e-5) -> dict[str, float]:
    """Relative disagreement per field, relative to ``max(|analytic|, floor*scale)``."""
    scales = partial_scales(inp)
    a, n = asdict(analytic), asdict(numeric)
    return {k: abs(a[k] - n[k]) / max(abs(a[k]), floor * scales[k]) for k in PARTIAL_FIELDS}


@dataclass(frozen=True)
class VerificationReport:
    price: float
    residual: float
    residual_fd: float
    identity_errors: dict[str, float]
    fd_vs_analytic: dict[str, float]

    def failures(self, residual_tol: float = 1e-8, identity_tol: float = 1e-10,
                 first_tol: float = 1e-5, second_tol: float = 1e-3) -> list[str]:
        bad = []
        if abs(self.residual) > residual_tol * max(1.0, self.price):
            bad.append("pde_residual")
        bad += [k for k, v in self.identity_errors.items() if v > identity_tol]
        for k, v in self.fd_vs_analytic.items():
            tol = first_tol if k in PartialSet.FIRST_ORDER else second_tol
            if v > tol:
                bad.append(f"partial:{k}")
        return bad


def verify_instance(inp: LrClosedFormInputs, fault: str | None = None) -> VerificationReport:
    root = solve_y_star(inp)
    frame = partials_frame(inp, root)
    price = lr_call_price(inp, root)
    analytic = analytic_partials(inp, frame, fault)
    numeric = finite_difference_partials(inp)
    return VerificationReport(
        price=price,
        residual=pde_residual_from(inp, price, analytic),
        residual_fd=pde_residual_from(inp, price, numeric),
        identity_errors=frame.identity_errors(inp.w, inp.w_tilde),
        fd_vs_analytic=compare_partials(inp, analytic, numeric),
    )


def random_instances(n: int, seed: int = 20240829, min_spread: float = 0.05,
                     r_range: tuple[float, float] = (-0.02, 0.10)) -> list[LrClosedFormInputs]:
    """Randomised constant-coefficient instances for residual and identity sweeps.

    Volatilities in ``[0.05, 0.8]`` with ``|sigma~ - sigma| >= min_spread``,
    ``eta`` in ``[0, 1]``, moneyness ``S/K`` and ``Z/K`` in ``[0.5, 2]``,
    time to maturity in ``[0.05, 5]``.  The shadow rate is drawn directly and
    the drifts are set to be Sharpe-consistent with it.
    """
    import numpy as np

    from .market import DualAssetParams, OptionSpec

    rng = np.random.default_rng(seed)
    out = []
    K = 100.0
    while len(out) < n:
        sigma, sigma_t = rng.uniform(0.05, 0.8, size=2)
        if abs(sigma_t - sigma) < min_spread:
            continue
        r_bar = rng.uniform(*r_range)
        mu = r_bar + rng.uniform(-0.1, 0.2) * sigma
        params = DualAssetParams.from_shadow_rate(r_bar, sigma, sigma_t, mu=mu)
        tau = rng.uniform(0.05, 5.0)
        eta = rng.uniform(0.0, 1.0)
        s_k, z_k = rng.uniform(0.5, 2.0, size=2)
        spec = OptionSpec(K, tau, float(eta))
        out.append(LrClosedFormInputs(float(s_k * K), float(z_k * K), params, spec, 0.0))
    return out
