"""Stage handlers: one per subcommand, each writing ``<stage>.csv`` and ``<stage>.json``."""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from carleman_lab.models.grids import (
    CarlemanReport,
    ConjugationCoefficients,
    PhaseWeightProfile,
    SmoothedPotential,
)
from carleman_lab.models.test_functions import make_test_functions, support_ok
from carleman_lab.results_sink import ResultsSink
from carleman_lab.schemas.construction import ConstructionParams
from carleman_lab.schemas.experiment import ExperimentConfig
from carleman_lab.schemas.potential import ClassCertificate
from carleman_lab.schemas.reports import IntegratedCarlemanReport, ProfileBoundReport, ResolventRun
from carleman_lab.services.artifact_publisher import ArtifactPublisher
from carleman_lab.services.carleman_construct import (
    CarlemanConstructionService,
    line_grid,
    radial_grid,
    sigma_rho,
    tau0_reference,
)
from carleman_lab.services.certificate import CertificateService
from carleman_lab.services.mollifier import MollifierService
from carleman_lab.services.potential_classes import (
    HypothesisViolationError,
    PotentialClassService,
    check_grid,
    y_scan_grid,
)
from carleman_lab.services.resolvent_lab import ResolventLabService, centrifugal_coefficient

logger = logging.getLogger(__name__)

STAGE_ORDER = [
    "check-potential", "mollify", "construct", "certify", "carleman", "resolvent-sweep", "fit",
]
CERTIFICATE_CHAIN = STAGE_ORDER[:5]
RESOLVENT_CHAIN = STAGE_ORDER[5:]


def stages_for(requested: str) -> List[str]:
    """Requested stage together with its prerequisites, in execution order."""
    if requested == "all":
        return list(STAGE_ORDER)
    for chain in (CERTIFICATE_CHAIN, RESOLVENT_CHAIN):
        if requested in chain:
            return chain[: chain.index(requested) + 1]
    raise ValueError(f"Unknown stage: {requested}")


@dataclass
class StageOutcome:
    stage: str
    passed: bool
    artifacts: List[Path] = field(default_factory=list)
    message: str = ""


@dataclass
class StageContext:
    """Services, configuration and the results carried from one stage to the next."""
    config: ExperimentConfig
    publisher: ArtifactPublisher
    sink: ResultsSink
    threads: int = 1
    classes: PotentialClassService = field(default_factory=PotentialClassService)
    mollifier: MollifierService = field(default_factory=MollifierService)
    certificates: CertificateService = field(default_factory=CertificateService)
    construction: CarlemanConstructionService = field(default_factory=CarlemanConstructionService)
    resolvent: ResolventLabService = field(default_factory=ResolventLabService)
    certificate: Optional[ClassCertificate] = None
    params: Optional[ConstructionParams] = None
    profiles: Dict[float, PhaseWeightProfile] = field(default_factory=dict)
    smoothed: Dict[float, SmoothedPotential] = field(default_factory=dict)
    reports: Dict[float, CarlemanReport] = field(default_factory=dict)
    runs: List[ResolventRun] = field(default_factory=list)

    @property
    def case(self) -> str:
        return self.config.experiment.case

    def admissible_h(self) -> List[float]:
        """h values for which the mollification scale respects delta_V."""
        values = self.config.grid.h
        if self.certificate is None or self.case == "linfty":
            return list(values)
        if self.case == "holder_1d":
            limit = self.certificate.delta_V
        else:
            _, rho = sigma_rho(self.certificate.alpha)
            limit = self.certificate.delta_V ** (1.0 / rho)
        kept = [h for h in values if h <= limit]
        if len(kept) < len(values):
            logger.warning(f"Skipping h values above {limit:.6g}: {[h for h in values if h > limit]}")
        return kept

    def smoothed_on(self, params: ConstructionParams, grid: np.ndarray) -> SmoothedPotential:
        n_mollify = self.config.grid.n_mollify
        if self.case == "holder_1d":
            base = line_grid(float(np.max(np.abs(grid))), n_mollify)
        else:
            base, _ = radial_grid(params.a, n_mollify, r_max=max(float(grid.max()), 4.0 * params.a, 8.0))
        smoothed = self.mollifier.build_smoothed(
            self.config.potential, self.case, params.h, params.mollifier_rho, base, self.certificate,
        )
        return smoothed.resample(grid)


def run_check_potential(ctx: StageContext) -> StageOutcome:
    config = ctx.config
    y_grid = y_scan_grid(config.grid.y_min, config.grid.y_max, config.grid.n_y)
    ctx.certificate = ctx.classes.classify(
        config.potential,
        ctx.case,
        config.envelope,
        config.constants.E,
        config.constants.E_infty,
        alpha=config.constants.alpha,
        r_max=config.grid.r_max,
        n_check=config.grid.n_check,
        y_grid=y_grid,
        c0_floor=config.constants.c0,
    )
    row = ctx.certificate.model_dump()
    row["tail_window"] = f"{row['tail_window'][0]}:{row['tail_window'][1]}"
    ctx.sink.append("check-potential", {"family": config.potential.family, **row})
    artifacts = [
        ctx.publisher.write_csv("check-potential", ctx.sink.frame("check-potential")),
        ctx.publisher.write_json("check-potential", ctx.certificate),
    ]
    return StageOutcome("check-potential", True, artifacts)


def run_mollify(ctx: StageContext) -> StageOutcome:
    config = ctx.config
    grid = check_grid(config.potential, min(config.grid.r_max, 100.0), config.grid.n_mollify)
    rho = 1.0 if ctx.case == "linfty" else sigma_rho(ctx.certificate.alpha)[1]
    frames, reports = [], []
    for h in ctx.admissible_h():
        smoothed = ctx.mollifier.build_smoothed(config.potential, ctx.case, h, rho, grid, ctx.certificate)
        report = ctx.mollifier.verify_mollifier_bounds(smoothed, ctx.certificate, config.envelope)
        frame = smoothed.to_frame()
        frame.insert(0, "h", h)
        frames.append(frame)
        reports.append({"h": h, **report.model_dump()})
    passed = bool(reports) and all(report["passes"] for report in reports)
    artifacts = [
        ctx.publisher.write_csv("mollify", pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()),
        ctx.publisher.write_json("mollify", {"reports": reports}),
    ]
    return StageOutcome("mollify", passed, artifacts)


def _construction_params(ctx: StageContext, h_values: List[float]) -> ConstructionParams:
    config = ctx.config
    constants = config.constants
    alpha = constants.alpha if ctx.case == "holder_radial" else 0.0
    declared = constants.tau0 is not None and (ctx.case != "holder_1d" or constants.delta is not None)
    if declared:
        return ConstructionParams(
            case=ctx.case, alpha=alpha, eta=constants.eta_value, tau0=constants.tau0,
            a0=constants.a0 or 1.0, K=constants.K, h=h_values[0], E=constants.E,
            E_infty=constants.E_infty, delta=constants.delta if ctx.case == "holder_1d" else None,
            tau0_reference=tau0_reference(ctx.certificate),
        )
    return ctx.construction.search_constants(
        ctx.case, config.potential, config.envelope, ctx.certificate, h_values,
        eta=constants.eta_value, K=constants.K,
        n_profile=config.grid.n_profile, n_mollify=config.grid.n_mollify,
    )


def run_construct(ctx: StageContext) -> StageOutcome:
    config = ctx.config
    h_values = ctx.admissible_h()
    if not h_values:
        raise HypothesisViolationError("no h value in the grid is admissible for this potential")
    ctx.params = _construction_params(ctx, h_values)
    frames, bounds = [], []
    lemma = None
    for h in h_values:
        params = ctx.params.at(h)
        profile = ctx.construction.build_profile(
            params, config.envelope, R_E=ctx.certificate.R_EV, n=config.grid.n_profile, cross_check=True,
        )
        ctx.profiles[h] = profile
        report: ProfileBoundReport = ctx.construction.verify_profile_bounds(profile)
        bounds.append(report)
        if ctx.case != "holder_1d" and lemma is None:
            lemma = ctx.construction.lemma_phi_check(profile.Phi1, profile.grid)
        frame = profile.to_frame()
        frame.insert(0, "h", h)
        frames.append(frame)
    stability = ctx.construction.constant_stability(bounds)
    phi_growth = None
    if ctx.case != "holder_1d" and len(ctx.profiles) >= 3:
        phi_growth = ctx.construction.phi_growth_check(list(ctx.profiles.values()))
    passed = all(report.passes for report in bounds) and (lemma is None or lemma.passes)
    summary = {
        "params": ctx.params,
        "bounds": bounds,
        "stability": stability,
        "lemma_phi": lemma,
        "phi_growth": phi_growth,
        "tau0_reference": ctx.params.tau0_reference,
        "max_cross_check_error": max(profile.xcheck_max_error for profile in ctx.profiles.values()),
    }
    artifacts = [
        ctx.publisher.write_csv("construct", pd.concat(frames, ignore_index=True)),
        ctx.publisher.write_json("construct", summary),
    ]
    logger.info(f"Constructed {len(frames)} profiles with tau0={ctx.params.tau0}, a0={ctx.params.a0}")
    return StageOutcome("construct", passed, artifacts)


def run_certify(ctx: StageContext) -> StageOutcome:
    constants = ctx.config.constants
    frames, summaries = [], []
    for h, profile in ctx.profiles.items():
        smoothed = ctx.smoothed_on(profile.params, profile.grid)
        ctx.smoothed[h] = smoothed
        report = ctx.certificates.key_margin(profile, smoothed, constants.E, constants.E_infty, constants.K)
        ctx.reports[h] = report
        frame = report.to_frame()
        frame.insert(0, "h", h)
        frames.append(frame)
        summaries.append(report.summary())
    passed = all(s.passes and s.chain_algebra_holds and s.bracket_ge_target for s in summaries)
    artifacts = [
        ctx.publisher.write_csv("certify", pd.concat(frames, ignore_index=True)),
        ctx.publisher.write_json("certify", {"summaries": summaries}),
    ]
    worst = min(summaries, key=lambda s: s.min_margin)
    logger.info(f"Certified {len(summaries)} profiles; worst margin {worst.min_margin:.4e} at h={worst.h}")
    return StageOutcome("certify", passed, artifacts)


def _uniform_grid(ctx: StageContext, params: ConstructionParams) -> np.ndarray:
    n_points = ctx.config.test_functions.n_points
    if ctx.case == "holder_1d":
        return line_grid(max(2.0 * (ctx.certificate.R_EV + 2.0), 10.0), n_points)
    R = max(2.0 * params.a, 8.0)
    return np.linspace(R / n_points, R, n_points)


def run_carleman(ctx: StageContext) -> StageOutcome:
    config = ctx.config
    constants = config.constants
    tf_config = config.test_functions
    if ctx.case == "holder_1d":
        modes = {0: 0.0}
    else:
        n = max(config.resolvent.n, 3)
        modes = {l: centrifugal_coefficient(l, n) for l in sorted(set(config.resolvent.modes))}

    rows, reports = [], []
    for h in sorted(ctx.profiles, reverse=True):
        params = ctx.params.at(h)
        grid = _uniform_grid(ctx, params)
        profile = ctx.construction.build_profile(
            params, config.envelope, R_E=ctx.certificate.R_EV, grid=grid, cross_check=False,
        )
        smoothed = ctx.smoothed_on(params, grid)
        samples = make_test_functions(tf_config.family, grid, tf_config.count, seed=config.experiment.seed)
        precondition = ctx.reports[h].passes if h in ctx.reports else False
        coefficients = ConjugationCoefficients.from_profile(profile)
        by_parts = [ctx.certificates.int_by_parts_residual(u, coefficients) for u in samples]
        for l, mode_lambda in modes.items():
            for sign in config.resolvent.signs:
                report: IntegratedCarlemanReport = ctx.certificates.integrated_carleman_check(
                    samples, profile, smoothed, constants.E, tf_config.eps, sign,
                    mode_lambda=mode_lambda, precondition_met=precondition,
                )
                reports.append((l, report))
                for index, u in enumerate(samples):
                    rows.append({
                        "h": h,
                        "l": l,
                        "sign": sign,
                        "sample": index,
                        "lhs": report.lhs[index],
                        "rhs": report.rhs[index],
                        "multiplier": report.multipliers[index],
                        "identity_residual": ctx.certificates.wF_derivative_identity(
                            u, profile, smoothed, constants.E, tf_config.eps, sign, mode_lambda,
                        ),
                        "int_by_parts_residual": by_parts[index],
                        "support_ok": support_ok(u),
                    })
    stability = {
        f"l={l},sign={sign}": ctx.certificates.multiplier_stability(
            [r for mode, r in reports if mode == l and r.sign == sign]
        )
        for l in modes
        for sign in config.resolvent.signs
    }
    passed = all(all(s.stable.values()) for s in stability.values()) and all(r.precondition_met for _, r in reports)
    artifacts = [
        ctx.publisher.write_csv("carleman", rows),
        ctx.publisher.write_json("carleman", {
            "reports": [{"l": l, **r.model_dump(mode="json")} for l, r in reports],
            "stability": stability,
        }),
    ]
    return StageOutcome("carleman", passed, artifacts)


def run_resolvent_sweep(ctx: StageContext) -> StageOutcome:
    config = ctx.config
    resolvent = config.resolvent
    ctx.runs = ctx.resolvent.h_sweep(
        config.potential,
        config.constants.E,
        config.constants.s,
        resolvent.eps_rule,
        config.grid.h,
        n=resolvent.n,
        modes=resolvent.modes,
        signs=resolvent.signs,
        L=resolvent.L,
        N=resolvent.N,
        threads=ctx.threads,
        sink=ctx.sink,
    )
    columns = ["h", "eps", "E", "s", "l", "n", "L", "N", "g_value", "converged", "sign", "iterations"]
    frame = ctx.sink.frame("resolvent-sweep", sort_by=["h", "l", "sign"])[columns].rename(columns={"g_value": "g"})
    trivial_bound = all(run.g_value <= 1.0 / run.eps * (1.0 + 1e-9) for run in ctx.runs)
    trusted_eps = None
    if resolvent.eps_ladder:
        h_min = min(config.grid.h)
        trusted_eps = {
            "h": h_min,
            "eps": ctx.resolvent.smallest_trustworthy_eps(
                config.potential, h_min, config.constants.E, config.constants.s, resolvent.eps_ladder,
                L=resolvent.L, N=resolvent.N, n=resolvent.n, l=resolvent.modes[0] if resolvent.n >= 3 else 0,
            ),
        }
    summary = {
        "runs": ctx.sink.get_row_count("resolvent-sweep"),
        "converged": sum(run.converged for run in ctx.runs),
        "trivial_bound_holds": trivial_bound,
        "smallest_trustworthy_eps": trusted_eps,
    }
    artifacts = [
        ctx.publisher.write_csv("resolvent-sweep", frame),
        ctx.publisher.write_json("resolvent-sweep", summary),
    ]
    return StageOutcome("resolvent-sweep", trivial_bound, artifacts)


def run_fit(ctx: StageContext) -> StageOutcome:
    if ctx.case == "holder_1d":
        sigma = 0.0
    else:
        sigma, _ = sigma_rho(ctx.config.constants.alpha)
    fit = ctx.resolvent.fit_exponent(ctx.runs, sigma)
    rows = [
        {"h": h, "residual_inverse_h": a, "residual_theorem_shape": b}
        for h, a, b in zip(
            sorted({run.h for run in ctx.runs if run.converged}),
            fit.inverse_h.residuals,
            fit.theorem_shape.residuals,
        )
    ]
    artifacts = [ctx.publisher.write_csv("fit", rows), ctx.publisher.write_json("fit", fit)]
    logger.info(f"Exponent fit: slope in 1/h {fit.inverse_h.slope:.4g}, preferred {fit.preferred_model}")
    return StageOutcome("fit", True, artifacts)


STAGE_HANDLERS: Dict[str, Callable[[StageContext], StageOutcome]] = {
    "check-potential": run_check_potential,
    "mollify": run_mollify,
    "construct": run_construct,
    "certify": run_certify,
    "carleman": run_carleman,
    "resolvent-sweep": run_resolvent_sweep,
    "fit": run_fit,
}
