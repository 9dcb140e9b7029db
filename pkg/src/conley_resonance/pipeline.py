"""End-to-end experiment: hypotheses, sign conditions, indices, criterion, orbit search."""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .conditions import (
    SearchSpec,
    build_isolating_neighborhood,
    check_landesman_lazer,
    check_strong_resonance,
    neighborhood_box,
)
from .config import ExperimentConfig
from .conley import (
    assembled_index,
    connecting_orbit_criterion,
    index_of_bounded_invariant_set,
    lift_to_G,
    linear_index_check,
    verify_isolating_block,
)
from .errors import (
    BlockVerificationFailed,
    BlowUpDetected,
    ConditionNotVerified,
    ConfigError,
    HypothesisViolated,
    InsufficientMetadata,
    InvalidArgument,
    NonhyperbolicOrigin,
    ResonanceError,
)
from .homotopy import equal
from .nonlinearity import (
    SampleSpec,
    estimate_linearization,
    from_table,
    make_nonlinearity,
    niemytzki_coefficients,
    realization,
    verify_bound,
)
from .orbits import (
    forward_attraction_search,
    kernel_drift_slope,
    shoot_from_origin,
    unstable_directions,
)
from .quadrature import default_grid
from .report import emit, to_plain
from .semiflow import IntegratorConfig, integrate
from .spectral import ConstantsBundle, SpectralState, build_laplacian_1d, decompose

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_NUMERIC = 4

DRIFT_TOLERANCE = 1e-6
MAX_WITNESS_CSVS = 3

ADMISSIBILITY_NOTE = "admissibility of the semiflow is an infinite-dimensional property and is not tested"


class NumericalCheckFailed(ResonanceError):
    kind = "numerical-check-failed"


@dataclass(frozen=True)
class Problem:
    es: object
    d: object
    grid: object
    cb: ConstantsBundle
    model: object
    lam: float


def build_problem(cfg: ExperimentConfig) -> Problem:
    op = cfg.section("operator")
    es = build_laplacian_1d(op["n_modes"], op["length"])
    d = decompose(es, op["k"])
    cons = cfg.section("constants")
    cb = ConstantsBundle.for_decomposition(d, cons["alpha"], cons["delta"])
    nl = cfg.section("nonlinearity")
    try:
        model = from_table(nl["table"]) if nl["table"] else make_nonlinearity(nl["name"], tuple(nl["params"]), op["length"])
    except (InvalidArgument, OSError) as e:
        raise ConfigError(f"[nonlinearity] {e}") from None
    return Problem(es, d, default_grid(op["length"], op["n_modes"]), cb, model, d.lam)


def _verdict_record(v) -> dict:
    return {
        "condition": v.condition,
        "holds": v.holds,
        "margin": v.margin,
        "radius_R": v.radius_R,
        "ball_radius": v.ball_radius,
        "tolerance": v.tolerance,
        "sample_count": v.sample_count,
        "witnesses": [{"point": p, "value": val} for p, val in v.witnesses],
        "notes": list(v.notes),
    }


def _integrator(cfg: ExperimentConfig, step: float | None = None, t_end: float | None = None, stride=None):
    it = cfg.section("integration")
    return IntegratorConfig(
        step_h=step or it["step"],
        scheme=it["scheme"],
        t_end=t_end or it["t_end"],
        save_stride=stride or it["save_stride"],
    )


class _Artifacts:
    def __init__(self):
        self.trajectories: dict[str, object] = {}

    def add(self, name: str, traj):
        self.trajectories[name] = traj


def check_hypotheses(prob: Problem, cfg: ExperimentConfig, report: dict, require_linearization: bool) -> float | None:
    """Boundedness of f (always required) and a scalar linearization at 0."""
    hyp = report.setdefault("hypotheses", {})
    bound = verify_bound(prob.model, SampleSpec(length=prob.es.length))
    hyp["E2"] = {"passed": bound.passed, "bound_m": bound.bound_m, "max_abs_f": bound.max_abs, "witness": bound.witness}
    if not bound.passed:
        raise HypothesisViolated(
            "E2",
            f"{prob.model.label}: |f| reaches {bound.witness['f']:.6g} > declared bound {bound.bound_m:g}",
            bound.witness,
        )
    try:
        nu, lin = estimate_linearization(prob.model, prob.grid)
        hyp["E4"] = {"passed": True, "nu_estimated": nu, "nu_declared": prob.model.nu, "max_deviation": lin.max_deviation}
    except HypothesisViolated as e:
        hyp["E4"] = {"passed": False, "message": str(e), "witness": e.witness}
        if require_linearization:
            raise
        return None
    return prob.model.nu if prob.model.nu is not None else nu


def _conditions_stage(prob: Problem, cfg: ExperimentConfig, report: dict):
    es, d, grid, cb, model = prob.es, prob.d, prob.grid, prob.cb, prob.model
    ck = cfg.section("checks")
    verdicts = report.setdefault("verdicts", {})
    lifted = None
    for family, fn in (
        ("LL", lambda: check_landesman_lazer(model, es, d.k, grid, ck["sphere_samples"], ck["tolerance"], ck["seed"])),
        ("SR", lambda: check_strong_resonance(model, es, grid, tolerance=ck["tolerance"])),
    ):
        try:
            v = fn()
        except InsufficientMetadata as e:
            verdicts[family] = {"applicable": False, "reason": str(e)}
            continue
        verdicts[family] = {"applicable": True, **_verdict_record(v)}
        if v.holds and lifted is None:
            lifted = v
    spec = SearchSpec(
        r_start=ck["r_start"], r_cap=ck["r_cap"], n_ball=ck["ball_samples"], rng_seed=ck["seed"],
        tolerance=ck["tolerance"], confirm_seeds=ck["confirm_seeds"],
    )
    N = build_isolating_neighborhood(model, es, d, cb, grid, spec)
    verdicts["G"] = _verdict_record(N.verdict)
    if lifted is not None and lift_to_G(lifted).condition != N.condition:
        raise NumericalCheckFailed(
            f"{lifted.condition} holds but the direct check found {N.condition}"
        )
    report["neighborhood"] = {"R1": N.R1, "R_Q": N.R_Q, "R_P": N.R_P, "alpha": cb.alpha, "c": cb.c}
    return N, lifted


def _criterion_stage(prob: Problem, cfg: ExperimentConfig, report: dict, nu: float) -> object:
    es, d, grid, cb, model = prob.es, prob.d, prob.grid, prob.cb, prob.model
    ck = cfg.section("checks")
    N, lifted = _conditions_stage(prob, cfg, report)
    block = verify_isolating_block(
        model, es, d, ck["s_values"], N.R_P, ck["block_samples"], grid,
        R_Q=N.R_Q, expected=N.condition, cb=cb, rng_seed=ck["seed"], tolerance=ck["tolerance"],
    )
    report["block"] = block
    h_K = index_of_bounded_invariant_set(d, N.verdict)
    lin_index, lin = linear_index_check(es, d, prob.lam, 1.0)
    assembled = assembled_index(es, d, N.condition)
    report["indices"] = {
        "h_K": h_K,
        "linear_Q_index": lin_index,
        "linear_check": lin,
        "assembled": assembled,
        "assembly_identity": equal(h_K, assembled),
    }
    if not lin.consistent or not equal(h_K, assembled):
        raise NumericalCheckFailed("index assembly identity failed")
    try:
        decision = connecting_orbit_criterion(es, d.k, nu, lifted if lifted is not None else N.verdict)
        report["criterion"] = decision
        top = {"h_0": decision.h_0, "case": decision.case, "existence": decision.existence}
    except NonhyperbolicOrigin as e:
        report["criterion"] = {"existence": "INCONCLUSIVE", "failed_hypothesis": "hyperbolic origin", "message": str(e)}
        top = {"h_0": None, "case": None, "existence": "INCONCLUSIVE"}
    report.update(
        condition=N.condition, holds=True, R1=N.R1, R_Q=N.R_Q, R_P=N.R_P, h_K=h_K, **top,
    )
    return N


def _orbit_stage(prob: Problem, cfg: ExperimentConfig, report: dict, N, nu: float | None, art: _Artifacts):
    es, d, grid, model = prob.es, prob.d, prob.grid, prob.model
    ob = cfg.section("orbit")
    seed = cfg["checks", "seed"]
    orbit: dict = {"shots": [], "attraction": None}
    witnesses = []
    directions = []
    if nu is not None:
        try:
            directions = unstable_directions(es, prob.lam, nu)
        except NonhyperbolicOrigin as e:
            orbit["shooting_skipped"] = str(e)
    if not directions:
        orbit.setdefault("shooting_skipped", "no unstable directions at the origin; forward attraction only")
    cfg_shot = _integrator(cfg)
    for j in directions:
        rep = shoot_from_origin(model, es, d, prob.lam, SpectralState.mode(es.n_modes, j), ob["epsilon"], cfg_shot, N, grid, nu)
        rec = {
            "mode": j + 1,
            "classifications": list(rep.classifications),
            "exit_times": [s.exit_time for s in rep.shots],
            "halving_consistent": rep.halving_consistent,
            "time_shift": list(rep.time_shift),
            "predicted_shift": rep.predicted_shift,
        }
        orbit["shots"].append(rec)
        for shot in rep.shots:
            tag = "plus" if shot.sign > 0 else "minus"
            art.add(f"shot_mode{j + 1}_{tag}", shot.trajectory)
            if shot.classification in ("BOUNDED_IN_N", "NONZERO_EQUILIBRIUM"):
                witnesses.append({"source": "shot", "mode": j + 1, "sign": shot.sign, "class": shot.classification})
    cfg_att = _integrator(cfg, step=ob["attraction_step"], stride=1)
    att = forward_attraction_search(model, es, d, prob.lam, N, ob["n_starts"], cfg_att, grid, seed)
    orbit["attraction"] = {
        "n_starts": att.n_starts,
        "converged_to_zero": int(att.converged.sum()),
        "long_resident": int(att.resident.sum()),
        "exited": int(np.isfinite(att.exit_times).sum()),
        "witnesses": list(att.witnesses),
        "near_returns": list(att.near_returns),
        "tracking_converged": bool(att.tracking_converged.all()),
        "max_unstable_correction": float(np.max(np.abs(att.corrections))) if att.corrections.size else 0.0,
    }
    for i in att.witnesses:
        witnesses.append({"source": "attraction", "start": i, "start_norm": float(att.start_norms[i])})
    for i in att.witnesses[:MAX_WITNESS_CSVS]:
        art.add(f"attraction_witness_{i}", att.trajectory(i, es, d, N))
    report["orbit"] = orbit
    report["orbit_witnesses"] = witnesses
    return att


def _counterexample(prob: Problem, cfg: ExperimentConfig, report: dict, art: _Artifacts, mode: str):
    es, d, grid, cb, model = prob.es, prob.d, prob.grid, prob.cb, prob.model
    ob = cfg.section("orbit")
    if mode in ("run", "check"):
        try:
            _conditions_stage(prob, cfg, report)
            report["g_condition_note"] = "a G-condition passed on the counterexample"
        except ConditionNotVerified as e:
            report.setdefault("verdicts", {})["G"] = {"holds": False, "reason": str(e)}
    N = neighborhood_box(model, es, d, cb, ob["box_radius"])
    report["neighborhood"] = {"R1": N.R1, "R_Q": N.R_Q, "R_P": N.R_P, "alpha": cb.alpha, "c": cb.c}
    report.update(condition=None, holds=False, R1=N.R1, R_Q=N.R_Q, R_P=N.R_P, h_K=None, h_0=None, case=None)
    if mode == "check":
        report["existence"] = "NOT-EVALUATED"
        return
    k0 = d.idx0[0]
    drift_cfg = IntegratorConfig(ob["drift_step"], cfg["integration", "scheme"], ob["drift_t_end"], save_stride=max(1, int(round(0.1 / ob["drift_step"]))))
    traj = integrate(model, es, d, prob.lam, 1.0, SpectralState.zeros(es.n_modes), drift_cfg, grid, cb)
    art.add("drift", traj)
    predicted = float(niemytzki_coefficients(model, np.zeros(es.n_modes), realization(es, grid))[k0])
    slope = kernel_drift_slope(traj, k0)
    att = forward_attraction_search(model, es, d, prob.lam, N, ob["n_starts"], _integrator(cfg, step=ob["attraction_step"], stride=1), grid, cfg["checks", "seed"])
    all_exit = bool(np.all(np.isfinite(att.exit_times)))
    report["drift"] = {"slope": slope, "predicted": predicted, "t_end": ob["drift_t_end"], "step": ob["drift_step"]}
    report["orbit"] = {
        "attraction": {
            "n_starts": att.n_starts,
            "exited": int(np.isfinite(att.exit_times).sum()),
            "long_resident": int(att.resident.sum()),
            "max_exit_time": float(np.nanmax(att.exit_times)) if np.any(np.isfinite(att.exit_times)) else None,
        }
    }
    report["orbit_witnesses"] = []
    report["drift_slope"] = slope
    if abs(slope - predicted) > DRIFT_TOLERANCE:
        raise NumericalCheckFailed(f"kernel drift slope {slope:.10g} differs from {predicted:.10g}")
    if not all_exit:
        raise NumericalCheckFailed("a start stayed in the bounded set: no obstruction observed")
    report["existence"] = "NO-ORBIT"


def run_experiment(
    cfg: ExperimentConfig, out_dir: str | Path | None = None, mode: str = "run", timestamp: bool = True
) -> tuple[int, dict]:
    """Run the pipeline; returns the exit code and the report as JSON-native data.

    The report is also written under ``out_dir`` when one is given.
    """
    if mode not in ("run", "check", "orbit"):
        raise InvalidArgument(f"unknown mode {mode!r}")
    report: dict = {
        "experiment": cfg.name,
        "kind": cfg.kind,
        "mode": mode,
        "version": __version__,
        "config": cfg.as_dict(),
        "notes": [ADMISSIBILITY_NOTE],
    }
    if timestamp:
        report["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    art = _Artifacts()
    code = EXIT_OK
    try:
        prob = build_problem(cfg)
        report["model"] = prob.model.label
        report["lambda"] = prob.lam
        if cfg.kind == "counterexample":
            check_hypotheses(prob, cfg, report, require_linearization=False)
            _counterexample(prob, cfg, report, art, mode)
        else:
            nu = check_hypotheses(prob, cfg, report, require_linearization=True)
            report["nu"] = nu
            if mode == "orbit":
                N, _ = _conditions_stage(prob, cfg, report)
            else:
                N = _criterion_stage(prob, cfg, report, nu)
            if mode in ("run", "orbit"):
                _orbit_stage(prob, cfg, report, N, nu, art)
        report["status"] = "ok"
    except ConfigError as e:
        code = EXIT_CONFIG
        report.update(status=e.kind, error=str(e))
    except HypothesisViolated as e:
        code = EXIT_HYPOTHESIS
        report.update(status=e.tag, error=str(e), witness=e.witness)
    except BlockVerificationFailed as e:
        code = EXIT_NUMERIC
        report.update(status=e.kind, error=str(e), witnesses=e.witnesses)
    except (ConditionNotVerified, NumericalCheckFailed, BlowUpDetected) as e:
        code = EXIT_NUMERIC
        report.update(status=e.kind, error=str(e))
    report = to_plain(report)
    if out_dir is not None:
        write_artifacts(Path(out_dir), report, art)
    return code, report


PLOT_SCRIPT = '''"""Plot the trajectory CSVs in this directory (needs matplotlib)."""
import csv
import glob
import os

import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))
KERNEL_MODES = {kernel_modes!r}


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], [[float(v) for v in r] for r in rows[1:]]
    return header, data


fig, (ax_k, ax_h) = plt.subplots(2, 1, figsize=(8, 7), sharex=True)
for path in sorted(glob.glob(os.path.join(HERE, "*.csv"))):
    header, data = load(path)
    name = os.path.splitext(os.path.basename(path))[0]
    t = [r[0] for r in data]
    coeff_cols = [i for i, h in enumerate(header) if h.startswith("c_")]
    for j in KERNEL_MODES:
        col = header.index("c_%d" % j)
        ax_k.plot(t, [r[col] for r in data], label="%s c_%d" % (name, j))
    ax_h.semilogy(t, [max(1e-300, sum(r[i] ** 2 for i in coeff_cols) ** 0.5) for r in data], label=name)
ax_k.set_ylabel("kernel coordinate")
ax_h.set_ylabel("H-norm")
ax_h.set_xlabel("t")
ax_k.legend(fontsize="small")
ax_h.legend(fontsize="small")
fig.tight_layout()
fig.savefig(os.path.join(HERE, "{name}.png"), dpi=120)
'''


def write_artifacts(out: Path, report: dict, art: _Artifacts) -> None:
    out.mkdir(parents=True, exist_ok=True)
    for name, traj in sorted(art.trajectories.items()):
        traj.to_csv(out / f"{name}.csv")
    report["artifacts"] = sorted(f"{n}.csv" for n in art.trajectories)
    k = report.get("config", {}).get("operator", {}).get("k", 1)
    (out / "plot.py").write_text(PLOT_SCRIPT.format(kernel_modes=[k], name=report.get("experiment", "plot")))
    (out / "report.json").write_text(emit(report))
