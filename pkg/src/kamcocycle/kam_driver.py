"""Driving loop of the KAM scheme and its schedule bookkeeping.

The schedule fixes, once and for all, the contraction constant a, the loss
constant c0, the error ladder eps_n = (1-a)^{n/2} eps_0 and the truncation
orders N_n (the largest integer with (G g)(N_n)^2 <= (1-a)^2 kappa^2 / (4
eps_n)).  The driver then alternates non-resonant and resonant steps, checks
the per-step certified inequalities, accumulates the conjugation Z and emits
a trace plus a reducibility certificate.

Most bookkeeping runs in the log domain: the ladder reaches values far below
1e-300 well before float underflow would corrupt comparisons.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .arithmetics import (
    ApproxFn,
    DivergentIntegral,
    ProductFn,
    check_nr_rho,
    ratio_bounded,
    scan_min_weighted_distance,
    tail_integral,
)
from .kam_step import (
    ResonanceReport,
    StepContext,
    conjugation_residual,
    find_resonance,
    step_nonresonant,
    step_resonant,
)
from .sl2_algebra import eigen
from .torus_fourier import DEFAULT_MODE_CAP, TorusMap

LOG_EPS_FLOOR = math.log(1e-300)


class ScheduleViolation(Exception):
    """A measured quantity broke the schedule's certified inequality."""


class NoFeasibleEpsilon(Exception):
    """No representable eps_0 satisfies the smallness conditions."""


@dataclass
class KamSchedule:
    kappa: float
    G: ApproxFn
    g: ApproxFn
    r0: float
    n0: int
    a: float
    a_bar: float
    c0: float
    eps0: float
    C_prime: float = 10.0
    kappa_prime: float | None = None
    flags: dict = field(default_factory=dict)

    @property
    def Gg(self) -> ProductFn:
        return ProductFn(self.G, self.g)

    def log_eps(self, n: int) -> float:
        return math.log(self.eps0) + 0.5 * n * math.log1p(-self.a)

    def eps_n(self, n: int) -> float:
        le = self.log_eps(n)
        return math.exp(le) if le > -745.0 else 0.0

    def log_n_bound(self, n: int) -> float:
        """log of (1-a)^2 kappa^2 / (4 eps_n), the bound on (G g)(N_n)^2."""
        return 2.0 * (math.log1p(-self.a) + math.log(self.kappa) - math.log(2.0)) \
            - self.log_eps(n)


def _c0_of(G: ApproxFn, g: ApproxFn, r0: float, n0: int) -> float:
    sup = 0.0
    if n0 >= 1:
        ts = np.linspace(1.0, float(n0), 4097) if n0 > 1 else np.array([1.0])
        Gg = ProductFn(G, g)
        sup = float(np.max(np.asarray(Gg.log_value(ts + 1.0)) / ts))
    return r0 / (4.0 ** (n0 + 3) * (sup + 1.0))


def check_condepsilon(G: ApproxFn, g: ApproxFn, kappa: float, r0: float,
                      n0: int, a: float, eps0: float) -> tuple[bool, float, float]:
    """Evaluate the integral smallness condition for eps0.

    The lower endpoint is (G g)^{-1}(kappa / (2 (1-a)^{(n0-5)/4} sqrt(eps0)));
    the tail integral of log(G g)(t)/t^2 from there must not exceed
    r0 / 4^{n0+2}.  Returns (ok, integral, budget).
    """
    Gg = ProductFn(G, g)
    log_arg = (math.log(kappa) - math.log(2.0)
               - 0.25 * (n0 - 5) * math.log1p(-a) - 0.5 * math.log(eps0))
    lower = Gg.log_inverse(log_arg) if log_arg > float(Gg.log_value(1.0)) else 1.0
    integral = tail_integral(Gg, max(lower, 1.0), 2.0)
    budget = r0 / 4.0 ** (n0 + 2)
    return integral <= budget, integral, budget


def check_condepsilon2(C_prime: float, kappa: float, a: float, c0: float,
                       eps0: float) -> tuple[bool, float, float]:
    """e C' eps0^{c0/4} <= (1-a)^2 kappa^2, evaluated in the log domain."""
    log_lhs = 1.0 + math.log(C_prime) + 0.25 * c0 * math.log(eps0)
    log_rhs = 2.0 * (math.log1p(-a) + math.log(kappa))
    return log_lhs <= log_rhs, log_lhs, log_rhs


def make_schedule(kappa: float, kappa_prime: float | None, G: ApproxFn,
                  g: ApproxFn, r0: float, n0: int, eps0_hint: float,
                  a: float | None = None, C_prime: float = 10.0,
                  require_feasible: bool = True) -> KamSchedule:
    """Fix the iteration constants and validate eps0.

    With require_feasible the hint is halved until both smallness conditions
    pass (NoFeasibleEpsilon below 1e-300); otherwise the hint is adopted
    as-is and the condition verdicts are recorded in schedule.flags.
    """
    if min(kappa, r0, eps0_hint) <= 0:
        raise ValueError("kappa, r0 and eps0 must be positive")
    Gg = ProductFn(G, g)
    a_bar = min(1.0 / 14.0 ** 2, 1.0 / float(Gg.value(2.0)) ** 2)
    if a is None:
        a = 1.0 - a_bar
    if not 1.0 - a_bar <= a < 1.0:
        raise ValueError(f"a = {a} outside [1 - a_bar, 1) with a_bar = {a_bar:.3e}")
    c0 = _c0_of(G, g, r0, n0)

    def verdicts(eps0):
        ok1, integral, budget = check_condepsilon(G, g, kappa, r0, n0, a, eps0)
        ok2, lhs2, rhs2 = check_condepsilon2(C_prime, kappa, a, c0, eps0)
        return ok1, ok2, {"condepsilon_ok": ok1, "condepsilon_integral": integral,
                          "condepsilon_budget": budget, "condepsilon2_ok": ok2,
                          "condepsilon2_log_lhs": lhs2, "condepsilon2_log_rhs": rhs2}

    eps0 = float(eps0_hint)
    if require_feasible:
        while True:
            try:
                ok1, ok2, flags = verdicts(eps0)
            except DivergentIntegral as exc:
                raise NoFeasibleEpsilon(str(exc)) from exc
            if ok1 and ok2:
                break
            eps0 *= 0.5
            if eps0 < 1e-300:
                raise NoFeasibleEpsilon(
                    "no eps0 above 1e-300 satisfies the smallness conditions")
    else:
        try:
            ok1, ok2, flags = verdicts(eps0)
        except DivergentIntegral as exc:
            ok2, lhs2, rhs2 = check_condepsilon2(C_prime, kappa, a, c0, eps0)
            flags = {"condepsilon_ok": False, "condepsilon_divergent": str(exc),
                     "condepsilon2_ok": ok2, "condepsilon2_log_lhs": lhs2,
                     "condepsilon2_log_rhs": rhs2}
    return KamSchedule(kappa=kappa, G=G, g=g, r0=r0, n0=n0, a=a, a_bar=a_bar,
                       c0=c0, eps0=eps0, C_prime=C_prime,
                       kappa_prime=kappa_prime, flags=flags)


def sequence_N(schedule: KamSchedule, n: int) -> int:
    """Largest integer N with (G g)(N)^2 <= (1-a)^2 kappa^2 / (4 eps_n)."""
    log_bound = schedule.log_n_bound(n)
    Gg = schedule.Gg
    if 2.0 * float(Gg.log_value(1.0)) + 1.0 > log_bound:
        raise ScheduleViolation(
            f"eps_{n} too large for any truncation order to exist")
    N = int(Gg.log_inverse(0.5 * log_bound))
    if N > 2 ** 52:
        raise ScheduleViolation("truncation order exceeds the exact integer range")
    while 2.0 * float(Gg.log_value(N + 1.0)) <= log_bound:
        N += 1
    while N > 1 and 2.0 * float(Gg.log_value(float(N))) > log_bound:
        N -= 1
    return N


class _IncrementalResonanceScan:
    """Amortized per-run resonance detection.

    The full scan over 0 < |m| <= N_n costs O(N_n) at d = 2 and the orders
    grow geometrically, so rescanning from scratch every step is the
    dominant cost of a run.  Between steps the eigenvalue moves by at most
    |delta alpha| while every previously scanned score moves by at most
    |delta alpha| * g(|m|); a conservative decayed minimum therefore
    certifies non-resonance without touching the old ball, and only the
    annulus of new orders is scanned.  Any uncertain verdict falls back to
    the exact scan in kam_step.find_resonance.
    """

    def __init__(self, ctx: StepContext):
        self.ctx = ctx
        self.alpha_ref = None
        self.n_done = 0
        self.lower_bound = math.inf

    def find(self, alpha: complex, N: int):
        ctx = self.ctx
        thr = ctx.kappa / (4.0 * float(ctx.G.value(N)))
        if self.alpha_ref is not None and N >= self.n_done:
            drift = abs(alpha - self.alpha_ref)
            decayed = self.lower_bound - drift * float(ctx.g.value(max(self.n_done, 1)))
            if N > self.n_done:
                annulus, _, _ = scan_min_weighted_distance(
                    ctx.omega, N, ctx.g.value, target=alpha.imag, scale=math.pi,
                    re_off=alpha.real, thr=thr, N_lo=self.n_done)
                decayed = min(decayed, annulus)
            if decayed >= thr:
                # certified non-resonant; keep the conservative state
                self.lower_bound = decayed
                self.n_done = N
                self.alpha_ref = alpha
                return ResonanceReport(m=None, alpha_shifted=alpha, margin=decayed)
        rep = find_resonance(alpha, ctx.omega, ctx.kappa, ctx.G, ctx.g, N)
        self.alpha_ref = alpha
        self.n_done = N
        self.lower_bound = rep.margin
        return rep


@dataclass
class StepRecord:
    n: int
    r_n: float
    N_n: int
    eps_bound: float
    f_norm: float
    resonant: bool
    m: tuple
    alpha: complex
    residual: float
    contraction: float
    r_next: float = 0.0
    x_norm: float = 0.0
    global_residual: float = 0.0
    debt: float = 0.0
    item2_ok: bool | None = None
    item6_ok: bool | None = None
    margin: float = 0.0
    preconditions: dict = field(default_factory=dict)

    CSV_FIELDS = ["n", "r_n", "N_n", "eps_bound", "F_norm", "resonant", "m",
                  "alpha_re", "alpha_im", "residual", "contraction"]

    def csv_row(self) -> list:
        return [self.n, repr(float(self.r_n)), self.N_n,
                repr(float(self.eps_bound)), repr(float(self.f_norm)),
                int(self.resonant), ";".join(str(int(v)) for v in self.m),
                repr(float(self.alpha.real)), repr(float(self.alpha.imag)),
                repr(float(self.residual)), repr(float(self.contraction))]

    @classmethod
    def from_csv_row(cls, row: dict) -> "StepRecord":
        return cls(
            n=int(row["n"]), r_n=float(row["r_n"]), N_n=int(row["N_n"]),
            eps_bound=float(row["eps_bound"]), f_norm=float(row["F_norm"]),
            resonant=bool(int(row["resonant"])),
            m=tuple(int(v) for v in row["m"].split(";")),
            alpha=complex(float(row["alpha_re"]), float(row["alpha_im"])),
            residual=float(row["residual"]),
            contraction=float(row["contraction"]))


@dataclass
class RunTrace:
    records: list
    omega: np.ndarray
    resonance_count_after_n0: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(StepRecord.CSV_FIELDS)
            for rec in self.records:
                w.writerow(rec.csv_row())

    @classmethod
    def from_csv(cls, path, omega=None) -> "RunTrace":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        recs = [StepRecord.from_csv_row(r) for r in rows]
        return cls(records=recs, omega=omega)


@dataclass
class Certificate:
    status: str
    status_detail: str
    B: np.ndarray
    Z: TorusMap
    r_final: float
    residual: float
    rotation_sum: float
    steps: int
    resonances_after_n0: int
    f_final_norm: float
    residual_budget: float
    cert_tol: float
    truncation_debt: float

    def to_json_obj(self) -> dict:
        return {
            "status": self.status,
            "status_detail": self.status_detail,
            "B": np.asarray(self.B).tolist(),
            "Z": self.Z.to_json_obj(),
            "r_final": self.r_final,
            "residual": self.residual,
            "rotation_sum": self.rotation_sum,
            "steps": self.steps,
            "resonances_after_n0": self.resonances_after_n0,
            "f_final_norm": self.f_final_norm,
            "residual_budget": self.residual_budget,
            "cert_tol": self.cert_tol,
            "truncation_debt": self.truncation_debt,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_obj(), sort_keys=True)


def run(A, F: TorusMap, omega, schedule: KamSchedule, max_steps: int = 200,
        cert_tol: float | None = None, step_residual_tol: float = 1e-10,
        mode_cap: int = DEFAULT_MODE_CAP) -> tuple[RunTrace, Certificate]:
    """Iterate KAM steps until the perturbation falls below cert_tol.

    Raises ScheduleViolation when a measured |F_n| exceeds its ladder bound
    eps_n.  The conjugation Z_n is accumulated on the double torus and the
    global residual against the original system is measured every step.
    """
    omega = np.asarray(omega, dtype=float)
    A = np.asarray(A, dtype=float)
    if cert_tol is None:
        cert_tol = max(1e-14 * schedule.eps0, 1e-250)
    ctx = StepContext(omega=omega, kappa=schedule.kappa, G=schedule.G,
                      g=schedule.g, C_prime=schedule.C_prime, mode_cap=mode_cap)
    d = F.d
    Z = TorusMap.identity(d)
    A_n, F_n, r_n = A, F, schedule.r0
    alpha_n = eigen(A_n).alpha
    f0_norm = F.weighted_norm(schedule.r0)
    records: list[StepRecord] = []
    scanner = _IncrementalResonanceScan(ctx)
    resonances_after_n0 = 0
    rotation_sum = 0.0
    prev_shifted_alpha = None
    prev_log_eps = None
    global_residual = 0.0
    terminated = None

    for n in range(max_steps):
        f_norm = F_n.weighted_norm(r_n)
        eps_n = schedule.eps_n(n)
        if f_norm > eps_n * (1.0 + 1e-9):
            raise ScheduleViolation(
                f"step {n}: |F|_r = {f_norm:.6e} exceeds eps_n = {eps_n:.6e}")
        if f_norm <= cert_tol:
            terminated = "converged"
            break
        N_n = sequence_N(schedule, n)
        rep = scanner.find(alpha_n, N_n)
        item2_ok = None
        if rep.m is None:
            r_next = r_n - schedule.c0 * abs(math.log1p(-schedule.a)) \
                / (2.0 * math.pi * N_n)
            if r_next <= 0:
                raise ScheduleViolation(f"step {n}: strip width exhausted")
            out = step_nonresonant(A_n, F_n, r_n, r_next, N_n, schedule.a, ctx,
                                   resonance=rep, strict=False)
        else:
            if n >= schedule.n0:
                resonances_after_n0 += 1
            out = step_resonant(A_n, F_n, r_n, N_n, schedule.a, schedule.c0,
                                ctx, resonance=rep, strict=False)
            rotation_sum += math.pi * float(np.dot(rep.m, omega))
            thr2 = schedule.kappa / (4.0 * float(schedule.G.value(N_n)))
            item2_ok = bool(abs(alpha_n - 1j * math.pi * float(np.dot(rep.m, omega)))
                            <= thr2 * (1.0 + 1e-9))
        item6_ok = None
        if prev_shifted_alpha is not None:
            item6_ok = bool(abs(prev_shifted_alpha - alpha_n)
                            <= math.exp(0.5 * prev_log_eps) * (1.0 + 1e-9))
        Z = Z.mul(out.Z_step).cap_support(mode_cap, out.r_next)
        global_residual = conjugation_residual(A, F, Z, out.A_next, out.F_next,
                                               omega, out.r_next)
        records.append(StepRecord(
            n=n, r_n=r_n, N_n=N_n, eps_bound=eps_n, f_norm=f_norm,
            resonant=out.resonant, m=out.m if out.m is not None else (0,) * d,
            alpha=alpha_n, residual=out.residual_norm,
            contraction=out.contraction_observed, r_next=out.r_next,
            x_norm=out.x_norm, global_residual=global_residual,
            debt=Z.truncation_debt + out.F_next.truncation_debt,
            item2_ok=item2_ok, item6_ok=item6_ok, margin=out.info.get("margin", 0.0),
            preconditions=out.preconditions))
        prev_shifted_alpha = alpha_n - (
            1j * math.pi * float(np.dot(out.m, omega)) if out.m is not None else 0.0)
        prev_log_eps = schedule.log_eps(n)
        A_n, F_n, r_n, alpha_n = out.A_next, out.F_next, out.r_next, out.alpha_next

    f_final = F_n.weighted_norm(r_n)
    debt = Z.truncation_debt + F_n.truncation_debt
    budget = len(records) * step_residual_tol * (1.0 + f0_norm) + debt
    residual = global_residual + f_final
    r_floor = schedule.r0 / 4.0 ** (schedule.n0 + 1)
    if terminated == "converged" or f_final <= cert_tol:
        if global_residual <= budget and r_n >= r_floor * (1.0 - 1e-12):
            status, detail = "Reduced", ""
        elif global_residual > budget:
            status, detail = "Stalled", "residual-budget-exceeded"
        else:
            status, detail = "Stalled", "strip-width-below-floor"
    else:
        status, detail = "Stalled", "max-steps"
    trace = RunTrace(records=records, omega=omega,
                     resonance_count_after_n0=resonances_after_n0)
    cert = Certificate(
        status=status, status_detail=detail, B=A_n, Z=Z, r_final=r_n,
        residual=residual, rotation_sum=rotation_sum, steps=len(records),
        resonances_after_n0=resonances_after_n0, f_final_norm=f_final,
        residual_budget=budget, cert_tol=cert_tol, truncation_debt=debt)
    return trace, cert


def rn_lower_bound(schedule: KamSchedule) -> float:
    """Certified lower bound on lim r_n when no late resonances occur.

    Evaluates r0/4^{n0} + log((G g)(N_{n0}))/(pi N_{n0})
    - (1/pi) * integral_{N_{n0}}^inf log(G g)(t)/t^2 dt and checks it clears
    the floor r0 / 4^{n0+1}.  Raises DivergentIntegral when the product
    G*g is not of Brjuno-Russmann type.
    """
    N0 = sequence_N(schedule, schedule.n0)
    Gg = schedule.Gg
    integral = tail_integral(Gg, float(max(N0, 1)), 2.0)
    bound = schedule.r0 / 4.0 ** schedule.n0 \
        + float(Gg.log_value(float(max(N0, 1)))) / (math.pi * N0) \
        - integral / math.pi
    return bound


def smallness_explicit(case: tuple, kappa: float, r0: float, n0: int,
                       a: float) -> float:
    """Closed-form admissible eps0 for the three standard function classes.

    case is ("dioph", mu_plus_mu_prime), ("exp", alpha, alpha_prime) with
    both exponents below 1, or ("explog", delta, alpha).  The explog value
    routinely underflows to 0.0 for small r0; callers should treat that as
    "no representable eps0".
    """
    kind = case[0]
    if kind == "dioph":
        musum = float(case[1])
        if musum <= 2:
            raise ValueError("mu + mu' must exceed 2")
        return (r0 / (4.0 ** (n0 + 3) * musum)) ** (4.0 * musum) * kappa
    if kind == "exp":
        alpha = max(float(case[1]), float(case[2]))
        if alpha >= 1:
            raise ValueError("exponents must be below 1")
        q = 2.0 * 4.0 ** (n0 + 2) / (r0 * (1.0 - alpha))
        log_eps = math.log(kappa / 4.0) - 2.0 * q ** (alpha / (1.0 - alpha))
        return math.exp(log_eps) if log_eps > -745.0 else 0.0
    if kind == "explog":
        delta, alpha = float(case[1]), float(case[2])
        if delta <= 1 or alpha >= 1:
            raise ValueError("need delta > 1 and alpha < 1")
        q = (4.0 ** (n0 + 3) / (r0 * (delta - 1.0) * (1.0 - alpha))) \
            ** (1.0 / ((delta - 1.0) * (1.0 - alpha)))
        if q > 700.0:
            return 0.0
        T = math.exp(q)
        log_gg = T / max(math.log(T), delta) ** delta + T ** alpha
        log_eps = math.log(kappa / 4.0) - 2.0 * log_gg
        return math.exp(log_eps) if log_eps > -745.0 else 0.0
    raise ValueError(f"unknown smallness case {case!r}")


def brjuno_sum_threshold(kappa: float, r0: float, n0: int, a: float,
                         G: ApproxFn, g: ApproxFn) -> float:
    """eps0 from the Brjuno-sum expression.

    exp(-r0/4^{n0} - |log(kappa/(2(1-a)^{n0}))| - 2 * integral of
    log(g G)(t)/t^2 over [1, inf)).  Raises DivergentIntegral when the sum
    is infinite.  The value is a convenience threshold; whether it actually
    passes the integral smallness condition is parameter-dependent and
    should be checked with check_condepsilon.
    """
    integral = tail_integral(ProductFn(G, g), 1.0, 2.0)
    exponent = -r0 / 4.0 ** n0 \
        - abs(math.log(kappa / 2.0) - n0 * math.log1p(-a)) - 2.0 * integral
    return math.exp(exponent) if exponent > -745.0 else 0.0


def resonance_budget_check(trace: RunTrace, schedule: KamSchedule,
                           rho_target: float | None = None) -> dict:
    """Post-hoc audit of the resonance bookkeeping along a trace.

    Verifies the cumulative bound sum_{j<=n} |m_j| <= N_n^2, the closeness
    inequality at every resonant step, the eigenvalue drift inequality, the
    strict growth of truncation orders between resonances, and (when
    kappa' and a measured rotation number are supplied) the hypothesis
    kappa' > kappa * sup g(t^2)/G(t) together with its consequence that no
    resonance occurs past n0.
    """
    recs = trace.records
    cum = 0
    sum_ok = True
    item2_ok = True
    item6_ok = True
    resonant_orders = []
    late_resonances = 0
    for rec in recs:
        mod = sum(abs(v) for v in rec.m)
        cum += mod
        if cum > rec.N_n ** 2:
            sum_ok = False
        if rec.resonant:
            resonant_orders.append(rec.N_n)
            if rec.n >= schedule.n0:
                late_resonances += 1
            if rec.item2_ok is False:
                item2_ok = False
        if rec.item6_ok is False:
            item6_ok = False
    interlacing_ok = all(b > a for a, b in zip(resonant_orders, resonant_orders[1:]))
    bounded, sup_est = ratio_bounded(schedule.g, schedule.G,
                                     t_min=max(schedule.n0, 1.0), t_max=1e6)
    report = {
        "cumulative_m_ok": sum_ok,
        "item2_ok": item2_ok,
        "item6_ok": item6_ok,
        "interlacing_ok": interlacing_ok,
        "resonances_after_n0": late_resonances,
        "ratio_bounded": bounded,
        "ratio_sup_estimate": sup_est,
        "kappa_prime_condition": None,
        "kappa_prime_consistent": None,
        "rho_hypothesis": None,
    }
    if schedule.kappa_prime is not None and bounded and math.isfinite(sup_est):
        cond = schedule.kappa_prime > schedule.kappa * sup_est
        report["kappa_prime_condition"] = cond
        report["kappa_prime_consistent"] = (not cond) or late_resonances == 0
    if rho_target is not None and schedule.kappa_prime is not None and recs:
        N_scan = min(max(r.N_n for r in recs), 10 ** 7)
        rep = check_nr_rho(rho_target, trace.omega, schedule.kappa_prime,
                           schedule.g, N_scan)
        report["rho_hypothesis"] = bool(rep.ok)
        report["rho_worst_offender"] = rep.m
    return report
