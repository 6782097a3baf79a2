"""Command-line front end: the synthesize / certify / simulate pipeline.

Verbs:

    equilibrium   operating point and linearized matrices for a config
    synth         run the selected synthesis route, certify, report
    analyze       certify a supplied (or open-loop) gain without synthesis
    simulate      integrate a scenario under a gain, write traces/figures
    reproduce     regenerate the benchmark tables and figures end to end

Every command reads one INI config (see the config module) and writes a
flat ResultRecord plus, where applicable, CSV traces and rendered
figures under the output directory.  Exit statuses are part of the
contract: 0 success, 2 configuration error, 3 modeling error (operating
point infeasible), 4 no certificate found, 5 stability oracle
inconclusive.

Records are deterministic for a fixed config and seed: the solver has
no random state, the seed is only recorded, and nothing time- or
host-dependent is written.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .model import (
    LinearModel,
    ModelError,
    NetworkParams,
    Polytope,
    build_polytope,
    equilibrium,
    linearize,
)
from .report import ResultRecord, config_digest, render_queue_figure
from .sim import (
    CrossTraffic,
    DelayStep,
    PiController,
    Scenario,
    StateFeedback,
    compute_metrics,
    simulate_nonlinear,
)
from .stability import OracleInconclusive, char_spectrum, is_stable
from .synthesis import (
    Gain,
    RelaxOptions,
    SynthesisError,
    _iod_synthesis_solution,
    dd_certify_vertices,
    dd_max_delay,
    dd_max_delay_vertices,
    dd_relaxation,
    iod_analysis,
    iod_analytic_gain,
    iod_certify_vertices,
    iod_synthesize,
    iod_synthesize_robust,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_NOCERT = 4
EXIT_ORACLE = 5

# Published benchmark gains used by `reproduce` (and only there): the
# delay-independent rows with their round-trip intervals, and the
# delay-dependent rows as (r, interval, reported delay bound, gain).
BENCH_IOD_ROWS = (
    ((0.10, 0.40), (-0.3709e-3, 0.0062e-3)),
    ((0.15, 0.83), (-0.4729e-4, 0.0079e-4)),
)
BENCH_DD_ROWS = (
    (1, (0.10, 0.45), 0.56, (-0.589e-3, 0.0244e-3)),
    (1, (0.10, 0.50), 0.48, (-0.321e-3, 0.0204e-3)),
    (2, (0.10, 0.45), 0.62, (-0.575e-3, 0.0240e-3)),
    (2, (0.10, 0.50), 0.52, (-0.272e-3, 0.0193e-3)),
)
# Reference gain for the perturbation scenarios.  The steady queue
# offset under a persistent delay shift scales inversely with the queue
# coefficient k2, so the benchmark gains (k2 around 2e-5) park the queue
# 16+ packets off after a +20 ms step.  This gain keeps their window
# coefficient but raises k2 to 3e-5, which meets the 15-packet offset
# budget while still certifying (per vertex, r=1) at delay 0.56 on the
# [0.1, 0.45] box.  It is re-certified at runtime before every use.
PERTURBATION_GAIN = (-0.589e-3, 3.0e-5)
PERTURBATION_GAIN_H = 0.56

_SCENARIO_PRESET_HORIZON = {"nominal": 60.0, "fig1": 60.0, "fig2": 80.0, "fig3": 70.0}


def _scenario_for(cfg: RunConfig) -> Scenario:
    horizon = cfg.horizon or _SCENARIO_PRESET_HORIZON[cfg.scenario]
    if cfg.scenario == "fig2":
        return Scenario(horizon, (DelayStep(0.020, 40.0),), note="+20ms delay step")
    if cfg.scenario == "fig3":
        return Scenario(
            horizon,
            (CrossTraffic(0.5 * cfg.params.C, 40.0, 45.0),),
            note=(
                "unresponsive burst; the published description is ambiguous about "
                "the aggregate rate, reproduced here at half the link capacity"
            ),
        )
    return Scenario(horizon)


def _oracle_entry(rec: ResultRecord, tag: str, model: LinearModel, K, h: float) -> bool:
    """Record abscissa + verdict of the closed loop at delay h."""
    if K is None:
        Adt = model.Ad
    else:
        Km = K.K if isinstance(K, Gain) else np.atleast_2d(K)
        Adt = model.closed_loop_delayed(Km)
    stable = is_stable(model.A, Adt, h)
    absc = char_spectrum(model.A, Adt, h, 128).abscissa
    rec.add(f"oracle.{tag}.h", h)
    rec.add(f"oracle.{tag}.abscissa", absc)
    rec.add(f"oracle.{tag}.stable", stable)
    return stable


def _oracle_sampled(rec: ResultRecord, params: NetworkParams, lo: float, hi: float, K) -> bool:
    """Oracle verdicts at the interval ends and midpoint, delay = RTT."""
    ok = True
    for i, R0s in enumerate((lo, 0.5 * (lo + hi), hi)):
        lm = linearize(params, R0s)
        ok = _oracle_entry(rec, f"R0_{i}", lm, K, R0s) and ok
    return ok


def _provenance(rec: ResultRecord, config_path: str, seed: int) -> None:
    rec.add("provenance.toolkit_version", __version__)
    rec.add("provenance.config_sha256", config_digest(config_path))
    rec.add("provenance.seed", seed)


def _write_record(rec: ResultRecord, out_dir: str, name: str, echo: bool = True) -> None:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    rec.write(path)
    if echo:
        sys.stdout.write(rec.render())
    print(f"record written: {path}")


def cmd_equilibrium(cfg: RunConfig, args) -> int:
    eq = equilibrium(cfg.params)
    lm = linearize(cfg.params, eq)
    rec = ResultRecord()
    rec.add("equilibrium.W0_pkts", eq.W0)
    rec.add("equilibrium.p0", eq.p0)
    rec.add("equilibrium.R0_s", eq.R0)
    for name, M in (("A", lm.A), ("Ad", lm.Ad), ("B", lm.B)):
        for i in range(M.shape[0]):
            for j in range(M.shape[1]):
                rec.add(f"model.{name}{i + 1}{j + 1}", M[i, j])
    rec.add("model.h_s", lm.h)
    _provenance(rec, args.config, args.seed)
    _write_record(rec, args.out or cfg.out_dir, "equilibrium.txt")
    return EXIT_OK


def _synth_iod(cfg: RunConfig, rec: ResultRecord) -> Gain | None:
    eq = equilibrium(cfg.params)
    lm = linearize(cfg.params, eq)
    res = iod_synthesize(lm)
    if res is None:
        sol = _iod_synthesis_solution([lm])
        rec.add("certificate.best_margin", sol.margin)
        return None
    gain, cert = res
    rec.add("gain.k1", gain.k1)
    rec.add("gain.k2", gain.k2)
    rec.add("certificate.kind", "iod")
    rec.add("certificate.margin", cert.margin)
    _oracle_entry(rec, "nominal", lm, gain, eq.R0)
    return gain


def _synth_iod_robust(cfg: RunConfig, rec: ResultRecord) -> Gain | None:
    lo, hi = cfg.require_uncertainty()
    poly = build_polytope(cfg.params, lo, hi)
    res = iod_synthesize_robust(poly)
    if res is None:
        sol = _iod_synthesis_solution(list(poly.vertices))
        rec.add("certificate.best_margin", sol.margin)
        return None
    gain, certs = res
    rec.add("gain.k1", gain.k1)
    rec.add("gain.k2", gain.k2)
    rec.add("certificate.kind", "iod-robust")
    rec.add("certificate.vertices", len(certs))
    rec.add("certificate.worst_margin", min(c.margin for c in certs))
    _oracle_sampled(rec, cfg.params, lo, hi, gain)
    return gain


def _synth_dd(cfg: RunConfig, rec: ResultRecord, r: int) -> Gain | None:
    lo, hi = cfg.require_uncertainty()
    poly = build_polytope(cfg.params, lo, hi)
    opts = RelaxOptions(h_tol=cfg.h_tol, max_iters=cfg.max_iters)
    try:
        report = dd_relaxation(poly, r, opts)
    except SynthesisError as exc:
        rec.add("certificate.error", str(exc))
        return None
    gain = report.gain
    rec.add("gain.k1", gain.k1)
    rec.add("gain.k2", gain.k2)
    rec.add("certificate.kind", "dd")
    rec.add("certificate.r", r)
    rec.add("certificate.h_m_s", report.h_m)
    rec.add("certificate.margin", report.certificate.margin if report.certificate else None)
    rec.add("certificate.iterations", len(report.iterations))
    rec.add("certificate.converged", report.converged)
    for i, (hs, ha, _) in enumerate(report.iterations):
        rec.add(f"certificate.iter{i}.h_synthesis", hs)
        rec.add(f"certificate.iter{i}.h_analysis", ha)
    _oracle_sampled(rec, cfg.params, lo, hi, gain)
    return gain


def cmd_synth(cfg: RunConfig, args) -> int:
    method = args.method or cfg.method
    r = args.r or cfg.r
    rec = ResultRecord()
    rec.add("synthesis.method", method)
    if method == "iod":
        gain = _synth_iod(cfg, rec)
    elif method == "iod-robust":
        gain = _synth_iod_robust(cfg, rec)
    elif method == "dd":
        gain = _synth_dd(cfg, rec, r)
    else:
        raise ConfigError(f"invalid configuration: unknown method {method}")
    _provenance(rec, args.config, args.seed)
    if gain is None:
        print(f"no certificate found (method {method})", file=sys.stderr)
        for key in rec.keys():
            if key.startswith("certificate."):
                print(f"  {key} = {rec.get(key)}", file=sys.stderr)
        return EXIT_NOCERT
    _write_record(rec, args.out or cfg.out_dir, "synth.txt")
    return EXIT_OK


def cmd_analyze(cfg: RunConfig, args) -> int:
    """Certify a supplied gain (or the open loop when none is given)."""
    eq = equilibrium(cfg.params)
    lm = linearize(cfg.params, eq)
    rec = ResultRecord()
    r = args.r or cfg.r
    found = False
    if cfg.gain is None:
        rec.add("analyze.gain", "open-loop")
        cert = iod_analysis(lm, None)
        rec.add("certificate.iod.margin", cert.margin if cert else None)
        found = cert is not None
        _oracle_entry(rec, "nominal", lm, None, eq.R0)
    else:
        K = Gain(K=np.array([list(cfg.gain)]))
        rec.add("gain.k1", K.k1)
        rec.add("gain.k2", K.k2)
        if cfg.R0_min is not None:
            lo, hi = cfg.require_uncertainty()
            poly = build_polytope(cfg.params, lo, hi)
            iod_certs = iod_certify_vertices(poly, K)
            rec.add(
                "certificate.iod.worst_margin",
                min(c.margin for c in iod_certs) if iod_certs else None,
            )
            h_max = dd_max_delay_vertices(poly, K, r)
            rec.add("certificate.dd.r", r)
            rec.add("certificate.dd.h_max_s", h_max)
            found = iod_certs is not None or h_max is not None
            _oracle_sampled(rec, cfg.params, lo, hi, K)
        else:
            cert = iod_analysis(lm, K)
            rec.add("certificate.iod.margin", cert.margin if cert else None)
            h_max = dd_max_delay(lm, K, r)
            rec.add("certificate.dd.r", r)
            rec.add("certificate.dd.h_max_s", h_max)
            found = cert is not None or h_max is not None
            _oracle_entry(rec, "nominal", lm, K, eq.R0)
    _provenance(rec, args.config, args.seed)
    if not found:
        print("no certificate found for the supplied gain", file=sys.stderr)
        return EXIT_NOCERT
    _write_record(rec, args.out or cfg.out_dir, "analyze.txt")
    return EXIT_OK


def _gain_for_simulation(cfg: RunConfig, rec: ResultRecord, args) -> Gain | None:
    """Configured gain if present (certified first), else synthesized."""
    if cfg.gain is not None:
        K = Gain(K=np.array([list(cfg.gain)]))
        rec.add("gain.k1", K.k1)
        rec.add("gain.k2", K.k2)
        rec.add("gain.source", "config")
        if cfg.R0_min is not None:
            lo, hi = cfg.require_uncertainty()
            poly = build_polytope(cfg.params, lo, hi)
            certs = dd_certify_vertices(poly, K, cfg.r, hi)
            if certs is None:
                rec.add("certificate.dd.worst_margin", None)
                return None
            rec.add("certificate.dd.r", cfg.r)
            rec.add("certificate.dd.h_s", hi)
            rec.add("certificate.dd.worst_margin", min(c.margin for c in certs))
            if not _oracle_sampled(rec, cfg.params, lo, hi, K):
                return None
        else:
            eq = equilibrium(cfg.params)
            lm = linearize(cfg.params, eq)
            h_max = dd_max_delay(lm, K, cfg.r)
            if h_max is None or h_max < eq.R0:
                rec.add("certificate.dd.h_max_s", h_max)
                return None
            rec.add("certificate.dd.r", cfg.r)
            rec.add("certificate.dd.h_max_s", h_max)
            if not _oracle_entry(rec, "nominal", lm, K, eq.R0):
                return None
        return K
    method = args.method or cfg.method
    rec.add("gain.source", f"synthesized ({method})")
    if method == "iod":
        return _synth_iod(cfg, rec)
    if method == "iod-robust":
        return _synth_iod_robust(cfg, rec)
    return _synth_dd(cfg, rec, args.r or cfg.r)


def cmd_simulate(cfg: RunConfig, args) -> int:
    eq = equilibrium(cfg.params)
    scenario = _scenario_for(cfg)
    out_dir = args.out or cfg.out_dir
    rec = ResultRecord()
    rec.add("simulate.scenario", cfg.scenario)
    rec.add("simulate.horizon_s", scenario.horizon)
    rec.add("simulate.dt_s", cfg.dt)
    if scenario.note:
        rec.add("simulate.note", scenario.note)
    gain = _gain_for_simulation(cfg, rec, args)
    _provenance(rec, args.config, args.seed)
    if gain is None:
        print("no certified gain available for simulation", file=sys.stderr)
        return EXIT_NOCERT

    os.makedirs(out_dir, exist_ok=True)
    ctl = StateFeedback(gain.K, eq.W0, cfg.params.q0, eq.p0)
    startup = (1.0, 0.0, None) if cfg.scenario == "fig1" else None
    trace = simulate_nonlinear(cfg.params, ctl, scenario, cfg.dt, initial=startup)
    m = compute_metrics(trace, cfg.params.q0)
    rec.extend(
        "metrics.state_feedback",
        {"overshoot_pkts": m.overshoot, "settling_s": m.settling,
         "sse_pkts": m.sse, "recovery_s": m.recovery},
    )
    csv_path = os.path.join(out_dir, f"{cfg.scenario}_state_feedback.csv")
    trace.to_csv(csv_path)
    traces = [("state feedback", trace)]

    if cfg.scenario == "fig1":
        pi = PiController(1.822e-5, 1.816e-5, 160.0, cfg.params.q0)
        trace_pi = simulate_nonlinear(cfg.params, pi, scenario, cfg.dt, initial=startup)
        mp = compute_metrics(trace_pi, cfg.params.q0)
        rec.extend(
            "metrics.pi",
            {"overshoot_pkts": mp.overshoot, "settling_s": mp.settling,
             "sse_pkts": mp.sse, "recovery_s": mp.recovery},
        )
        trace_pi.to_csv(os.path.join(out_dir, f"{cfg.scenario}_pi.csv"))
        traces.append(("PI", trace_pi))

    fig_path = os.path.join(out_dir, f"{cfg.scenario}.png")
    render_queue_figure(
        fig_path, traces, cfg.params.q0, f"queue regulation ({cfg.scenario})"
    )
    if args.format == "csv":
        with open(csv_path) as fh:
            sys.stdout.write(fh.read())
        rec.write(os.path.join(out_dir, "simulate.txt"))
        print(f"record written: {os.path.join(out_dir, 'simulate.txt')}", file=sys.stderr)
    else:
        _write_record(rec, out_dir, "simulate.txt")
    print(f"trace written: {csv_path}")
    print(f"figure written: {fig_path}")
    return EXIT_OK


def _reproduce_table_iod(cfg: RunConfig, args, out_dir: str) -> int:
    rec = ResultRecord()
    rec.add("reproduce.target", "table-iod")
    status = EXIT_OK
    for idx, ((lo, hi), krow) in enumerate(BENCH_IOD_ROWS, start=1):
        tag = f"row{idx}"
        poly = build_polytope(cfg.params, lo, hi)
        K_pub = Gain(K=np.array([list(krow)]))
        rec.add(f"{tag}.interval_lo_s", lo)
        rec.add(f"{tag}.interval_hi_s", hi)
        rec.add(f"{tag}.published.k1", K_pub.k1)
        rec.add(f"{tag}.published.k2", K_pub.k2)
        certs = iod_certify_vertices(poly, K_pub)
        rec.add(
            f"{tag}.published.certificate.worst_margin",
            min(c.margin for c in certs) if certs else None,
        )
        _oracle_sampled_tagged(rec, cfg.params, lo, hi, K_pub, f"{tag}.published")
        res = iod_synthesize_robust(poly)
        if res is None:
            rec.add(f"{tag}.synthesized.certificate", None)
            status = EXIT_NOCERT
            continue
        gain, vcerts = res
        rec.add(f"{tag}.synthesized.k1", gain.k1)
        rec.add(f"{tag}.synthesized.k2", gain.k2)
        rec.add(f"{tag}.synthesized.certificate.worst_margin", min(c.margin for c in vcerts))
        _oracle_sampled_tagged(rec, cfg.params, lo, hi, gain, f"{tag}.synthesized")
    _provenance(rec, args.config, args.seed)
    _write_record(rec, out_dir, "table_iod.txt")
    return status


def _oracle_sampled_tagged(rec, params, lo, hi, K, prefix) -> bool:
    ok = True
    for i, R0s in enumerate((lo, 0.5 * (lo + hi), hi)):
        lm = linearize(params, R0s)
        Km = K.K if isinstance(K, Gain) else np.atleast_2d(K)
        Adt = lm.closed_loop_delayed(Km)
        stable = is_stable(lm.A, Adt, R0s)
        rec.add(f"{prefix}.oracle.R0_{i}.stable", stable)
        ok = ok and stable
    return ok


def _reproduce_table_dd(cfg: RunConfig, args, out_dir: str) -> int:
    rec = ResultRecord()
    rec.add("reproduce.target", "table-dd")
    status = EXIT_OK
    for idx, (r, (lo, hi), h_pub, krow) in enumerate(BENCH_DD_ROWS, start=1):
        tag = f"row{idx}"
        poly = build_polytope(cfg.params, lo, hi)
        K_pub = Gain(K=np.array([list(krow)]))
        rec.add(f"{tag}.r", r)
        rec.add(f"{tag}.interval_lo_s", lo)
        rec.add(f"{tag}.interval_hi_s", hi)
        rec.add(f"{tag}.published.k1", K_pub.k1)
        rec.add(f"{tag}.published.k2", K_pub.k2)
        rec.add(f"{tag}.published.h_m_s", h_pub)
        certs = dd_certify_vertices(poly, K_pub, r, h_pub)
        rec.add(
            f"{tag}.published.certificate.worst_margin",
            min(c.margin for c in certs) if certs else None,
        )
        h_max = dd_max_delay_vertices(poly, K_pub, r)
        rec.add(f"{tag}.published.certificate.h_max_s", h_max)
        _oracle_sampled_tagged(rec, cfg.params, lo, hi, K_pub, f"{tag}.published")
        report = dd_relaxation(poly, r, RelaxOptions(h_tol=cfg.h_tol, max_iters=cfg.max_iters))
        rec.add(f"{tag}.synthesized.k1", report.gain.k1)
        rec.add(f"{tag}.synthesized.k2", report.gain.k2)
        rec.add(f"{tag}.synthesized.certificate.h_m_s", report.h_m)
        rec.add(
            f"{tag}.synthesized.certificate.margin",
            report.certificate.margin if report.certificate else None,
        )
        _oracle_sampled_tagged(rec, cfg.params, lo, hi, report.gain, f"{tag}.synthesized")
        if certs is None:
            status = EXIT_NOCERT
    _provenance(rec, args.config, args.seed)
    _write_record(rec, out_dir, "table_dd.txt")
    return status


def _certify_perturbation_gain(cfg: RunConfig, rec: ResultRecord, tag: str) -> Gain | None:
    """Re-certify the reference perturbation gain before using it."""
    K = Gain(K=np.array([list(PERTURBATION_GAIN)]))
    poly = build_polytope(cfg.params, 0.10, 0.45)
    certs = dd_certify_vertices(poly, K, 1, PERTURBATION_GAIN_H)
    if certs is None:
        return None
    rec.add(f"{tag}.k1", K.k1)
    rec.add(f"{tag}.k2", K.k2)
    rec.add(f"{tag}.certificate.r", 1)
    rec.add(f"{tag}.certificate.h_s", PERTURBATION_GAIN_H)
    rec.add(f"{tag}.certificate.worst_margin", min(c.margin for c in certs))
    if not _oracle_sampled_tagged(rec, cfg.params, 0.10, 0.45, K, tag):
        return None
    return K


def _reproduce_fig(cfg: RunConfig, args, out_dir: str, which: str) -> int:
    eq = equilibrium(cfg.params)
    q0 = cfg.params.q0
    rec = ResultRecord()
    rec.add("reproduce.target", which)
    os.makedirs(out_dir, exist_ok=True)

    if which == "fig1":
        r, (lo, hi), h_pub, krow = BENCH_DD_ROWS[0]
        K = Gain(K=np.array([list(krow)]))
        rec.add("gain.k1", K.k1)
        rec.add("gain.k2", K.k2)
        rec.add("gain.source", "benchmark table, first delay-dependent row")
        poly = build_polytope(cfg.params, lo, hi)
        certs = dd_certify_vertices(poly, K, r, h_pub)
        if certs is None:
            print("benchmark gain failed re-certification", file=sys.stderr)
            return EXIT_NOCERT
        rec.add("certificate.worst_margin", min(c.margin for c in certs))
        _oracle_sampled_tagged(rec, cfg.params, lo, hi, K, "gain")
        scenario = Scenario(60.0)
        ctl = StateFeedback(K.K, eq.W0, q0, eq.p0)
        tr_k = simulate_nonlinear(cfg.params, ctl, scenario, cfg.dt, initial=(1.0, 0.0, None))
        pi = PiController(1.822e-5, 1.816e-5, 160.0, q0)
        tr_pi = simulate_nonlinear(cfg.params, pi, scenario, cfg.dt, initial=(1.0, 0.0, None))
        mk, mp = compute_metrics(tr_k, q0), compute_metrics(tr_pi, q0)
        rec.extend("metrics.state_feedback", {
            "overshoot_pkts": mk.overshoot, "settling_s": mk.settling, "sse_pkts": mk.sse})
        rec.extend("metrics.pi", {
            "overshoot_pkts": mp.overshoot, "settling_s": mp.settling, "sse_pkts": mp.sse})
        tr_k.to_csv(os.path.join(out_dir, "fig1_state_feedback.csv"))
        tr_pi.to_csv(os.path.join(out_dir, "fig1_pi.csv"))
        render_queue_figure(
            os.path.join(out_dir, "fig1.png"),
            [("state feedback", tr_k), ("PI", tr_pi)],
            q0,
            "startup regulation: state feedback vs PI",
        )
    else:
        K = _certify_perturbation_gain(cfg, rec, "gain")
        if K is None:
            print("perturbation gain failed re-certification", file=sys.stderr)
            return EXIT_NOCERT
        ctl = StateFeedback(K.K, eq.W0, q0, eq.p0)
        if which == "fig2":
            scenario = Scenario(80.0, (DelayStep(0.020, 40.0),), note="+20ms delay step")
        else:
            scenario = Scenario(
                70.0,
                (CrossTraffic(0.5 * cfg.params.C, 40.0, 45.0),),
                note=(
                    "unresponsive burst; the published description is ambiguous "
                    "about the aggregate rate, reproduced here at half the link capacity"
                ),
            )
        rec.add("scenario.note", scenario.note)
        trace = simulate_nonlinear(cfg.params, ctl, scenario, cfg.dt)
        m = compute_metrics(trace, q0)
        rec.extend("metrics.state_feedback", {
            "overshoot_pkts": m.overshoot, "settling_s": m.settling,
            "sse_pkts": m.sse, "recovery_s": m.recovery})
        if which == "fig2":
            tail = trace.t >= trace.t[-1] - 10.0
            rec.add("metrics.state_feedback.tail_offset_pkts",
                    float(np.abs(trace.q[tail] - q0).mean()))
        trace.to_csv(os.path.join(out_dir, f"{which}_state_feedback.csv"))
        title = ("queue under +20 ms delay step" if which == "fig2"
                 else "queue under cross-traffic burst")
        render_queue_figure(
            os.path.join(out_dir, f"{which}.png"), [("state feedback", trace)], q0, title
        )
    _provenance(rec, args.config, args.seed)
    _write_record(rec, out_dir, f"{which}.txt")
    return EXIT_OK


def cmd_reproduce(cfg: RunConfig, args) -> int:
    out_dir = args.out or cfg.out_dir
    if args.target == "table1":
        return _reproduce_table_iod(cfg, args, out_dir)
    if args.target == "table2":
        return _reproduce_table_dd(cfg, args, out_dir)
    return _reproduce_fig(cfg, args, out_dir, args.target)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="aqmsyn",
        description="certified AQM state-feedback synthesis for the TCP fluid model",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="INI run configuration")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=0, help="recorded in provenance")
        p.add_argument("--format", choices=("csv", "summary"), default="summary")
        p.add_argument("--method", choices=("iod", "iod-robust", "dd"), default=None)
        p.add_argument("--r", type=int, default=None, help="discretization steps")

    for name, help_text in (
        ("equilibrium", "operating point and linearized model"),
        ("synth", "synthesize and certify a gain"),
        ("analyze", "certify a configured gain (or the open loop)"),
        ("simulate", "integrate the configured scenario"),
    ):
        common(sub.add_parser(name, help=help_text))
    rep = sub.add_parser("reproduce", help="regenerate benchmark tables/figures")
    rep.add_argument("target", choices=("table1", "table2", "fig1", "fig2", "fig3"))
    common(rep)
    return ap


_COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "synth": cmd_synth,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "reproduce": cmd_reproduce,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.r is not None and args.r < 1:
            raise ConfigError("invalid configuration: r must be >= 1")
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ModelError as exc:
        print(f"{exc}", file=sys.stderr)
        return EXIT_MODEL
    except OracleInconclusive as exc:
        print(f"oracle inconclusive: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except SynthesisError as exc:
        print(f"no certificate: {exc}", file=sys.stderr)
        return EXIT_NOCERT


if __name__ == "__main__":
    sys.exit(main())
