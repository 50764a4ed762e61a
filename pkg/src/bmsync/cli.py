"""Command-line surface: generate, solve, certify, sweep, kuramoto, selftest.

Exit codes: 0 on success (certified / synchronized / all checks pass),
1 for a run that completed without certifying (or synchronizing, or with
battery violations), 2 for usage and validation errors.

Every command is deterministic given its full flag set; wall-clock fields
are the only exception and are excluded from reproducibility comparisons.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from ._rng import derive_seed
from .blockmat import read_matrix, write_matrix
from .errors import FlowStepError, ParseError, ThresholdUndefinedError, ValidationError
from .kuramoto import FlowConfig, flow, lift_coupling, order_parameter
from .manifold import embed_reference, read_point_text
from .models import (
    MODEL_NAMES,
    apply_adversary,
    corollary_thresholds,
    gen_adversary,
    generate,
    read_sidecar,
    write_sidecar,
)
from .objective import build_certificate, certify_global
from .solver import SolverConfig, alignment_error, solve

SWEEP_COLUMNS = (
    "model,n,d,p,axis1,axis2,trial,seed,status,iterations,energy,grad_norm,"
    "certified,aligned,alignment_error,lambda_kth,lambda_max,p_min_benign,wall_ms"
)

_ALIGNED_RTOL = 1e-6


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _model_params(args) -> dict:
    params = {}
    for key in ("sigma", "theta", "m", "d"):
        val = getattr(args, key, None)
        if val is not None:
            params[key] = val
    if getattr(args, "p_in", None) is not None:
        params["p_in"] = args.p_in
    if getattr(args, "p_out", None) is not None:
        params["p_out"] = args.p_out
    return params


def _generate_instance(model: str, n: int, seed: int, params: dict,
                       adv_density: float, adv_magnitude: float):
    inst = generate(model, n, seed, **params)
    if adv_density > 0:
        adv_seed = derive_seed("adversary", seed)
        adv = gen_adversary(inst.truth, inst.n, adv_density, adv_magnitude, adv_seed)
        inst = apply_adversary(inst, adv)
        inst.meta.update(
            adversary_density=float(adv_density),
            adversary_magnitude=float(adv_magnitude),
            adversary_seed=int(adv_seed),
        )
    return inst


def cmd_generate(args) -> int:
    inst = _generate_instance(
        args.model, args.n, args.seed, _model_params(args),
        args.adversary_density, args.adversary_magnitude,
    )
    write_matrix(inst.A, args.out)
    write_sidecar(inst, str(args.out) + ".meta")
    print(f"model={inst.meta['model']} n={inst.n} d={inst.d} seed={args.seed}")
    print(f"wrote {args.out} and {args.out}.meta")
    return 0


def _load_truth(matrix_path, n: int, d: int):
    try:
        meta = read_sidecar(str(matrix_path) + ".meta", n=n, d=d)
    except FileNotFoundError:
        return None
    truth = meta.get("truth")
    return truth if isinstance(truth, np.ndarray) else None


def _print_certificate(cert, certified: bool, reason: str) -> None:
    print(f"certified={'true' if certified else 'false'}")
    print(f"reason={reason}")
    print(f"grad_residual={_fmt(cert.grad_residual)}")
    print(f"min_eig={_fmt(cert.spectrum.min_eig)}")
    print(f"lambda_kth={_fmt(cert.kth_gap)}")
    print(f"lambda_max={_fmt(cert.lambda_max)}")
    print(f"p_min_benign={cert.p_min_benign if cert.p_min_benign is not None else 'undefined'}")


def cmd_solve(args) -> int:
    A = read_matrix(args.matrix)
    truth = _load_truth(args.matrix, A.n, A.d)
    cfg = SolverConfig(
        p=args.p, max_iters=args.max_iters, grad_tol=args.grad_tol,
        escape_probes=args.probes, seed=args.seed,
    )
    report = solve(A, args.d, cfg, truth=truth)
    print(f"status={report.status}")
    print(f"iterations={report.iterations}")
    print(f"energy={_fmt(report.energy_trace[-1])}")
    print(f"grad_norm={_fmt(report.grad_norm_trace[-1])}")
    _print_certificate(report.certificate, report.certified, report.certify_reason)
    if args.trace:
        with open(args.trace, "w") as fh:
            for i, e in enumerate(report.energy_trace):
                rec = {"iter": i, "energy": e}
                if i < len(report.grad_norm_trace):
                    rec["grad_norm"] = report.grad_norm_trace[i]
                fh.write(json.dumps(rec) + "\n")
    return 0 if report.certified else 1


def cmd_certify(args) -> int:
    A = read_matrix(args.matrix)
    S = read_point_text(args.candidate)
    if S.n != A.n or S.d != args.d or A.d != args.d:
        raise ValidationError(
            f"candidate blocks ({S.n}, {S.d}) do not match matrix ({A.n}, {A.d}) at d={args.d}"
        )
    cert = build_certificate(A, S)
    verdict = certify_global(cert)
    _print_certificate(cert, verdict.certified, verdict.reason)
    return 0 if verdict.certified else 1


def cmd_kuramoto(args) -> int:
    if args.matrix:
        A = read_matrix(args.matrix)
        if args.d > 1 and A.d == 1:
            A = lift_coupling(A.entries, args.d)
        d = args.d if args.d > 1 else A.d
    else:
        if args.model is None:
            raise ValidationError("kuramoto needs --matrix or --model")
        inst = _generate_instance(args.model, args.n, args.seed, _model_params(args),
                                  args.adversary_density, args.adversary_magnitude)
        if inst.d != 1:
            raise ValidationError("CLI kuramoto flows use d = 1 couplings (lift via --d)")
        A = inst.A if args.d == 1 else lift_coupling(inst.A.entries, args.d)
        d = args.d
    start = read_point_text(args.start) if args.start else None
    cfg = FlowConfig(p=args.p, dt=args.dt, t_max=args.t_max, seed=args.seed)
    trace = flow(A, d, cfg, start=start)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("t,energy,order_param\n")
            for t, e, r in zip(trace.times, trace.energies, trace.order_params):
                fh.write(f"{_fmt(t)},{_fmt(e)},{_fmt(r)}\n")
    print(f"synchronized={'true' if trace.synchronized else 'false'}")
    print(f"order_param={_fmt(order_parameter(trace.final_state))}")
    print(f"energy={_fmt(trace.energies[-1])}")
    return 0 if trace.synchronized else 1


from dataclasses import dataclass, field


@dataclass(frozen=True)
class SweepSpec:
    """A phase-diagram sweep: fixed model parameters plus two swept axes.

    ``p`` is the embedding width or "auto" (resolved from the certificate at
    the planted truth of a reference instance). Per-cell seeds are stable
    hashes of (base_seed, cell indices, trial), so results are independent of
    execution order and parallelism.
    """

    model: str
    fixed: dict
    axis1: tuple[str, tuple[float, ...]]
    axis2: tuple[str, tuple[float, ...]]
    trials: int
    base_seed: int
    p: int | str
    out: str
    jobs: int = 1
    max_iters: int = 5000
    grad_tol: float = 1e-9
    probes: int = 30

    def __post_init__(self):
        if not self.axis1[1] or not self.axis2[1]:
            raise ValidationError("sweep axes must be nonempty")
        if self.trials < 1:
            raise ValidationError("need trials >= 1")
        if self.p != "auto" and int(self.p) < 1:
            raise ValidationError("p must be positive or 'auto'")


def _parse_axis(text: str) -> tuple[str, tuple[float, ...]]:
    if "=" not in text:
        raise ValidationError(f"axis must look like name=v1,v2,... got {text!r}")
    name, _, values = text.partition("=")
    name = name.strip().replace("-", "_")
    vals = tuple(float(v) for v in values.split(",") if v.strip())
    if not vals:
        raise ValidationError(f"axis {name!r} has no values")
    return name, vals


_INT_PARAMS = {"n", "p", "m", "d"}


def _sweep_cell(payload: dict) -> list[str]:
    """Run all trials of one sweep cell and return formatted CSV rows."""
    model = payload["model"]
    rows = []
    for trial in range(payload["trials"]):
        seed = derive_seed("sweep-inst", payload["base_seed"], payload["i1"], payload["i2"], trial)
        params = dict(payload["params"])
        adv_density = params.pop("adversary_density", 0.0)
        adv_magnitude = params.pop("adversary_magnitude", 0.5)
        p = int(params.pop("p"))
        n = int(params.pop("n"))
        inst = _generate_instance(model, n, seed, params, adv_density, adv_magnitude)
        cfg = SolverConfig(
            p=p, max_iters=payload["max_iters"], grad_tol=payload["grad_tol"],
            escape_probes=payload["probes"],
            seed=derive_seed("sweep-solve", payload["base_seed"], payload["i1"], payload["i2"], trial),
        )
        t0 = time.perf_counter()
        report = solve(inst.A, inst.d, cfg, truth=inst.truth)
        wall_ms = int(round((time.perf_counter() - t0) * 1000.0))
        err = alignment_error(report.final_point, inst.truth)
        aligned = err <= _ALIGNED_RTOL * inst.n * inst.d
        cert = report.certificate
        p_min = cert.p_min_benign if cert.p_min_benign is not None else "undefined"
        rows.append(",".join([
            model, str(inst.n), str(inst.d), str(p),
            _fmt(payload["v1"]), _fmt(payload["v2"]), str(trial), str(seed),
            report.status, str(report.iterations),
            _fmt(report.energy_trace[-1]), _fmt(report.grad_norm_trace[-1]),
            "true" if report.certified else "false",
            "true" if aligned else "false", _fmt(err),
            _fmt(cert.kth_gap), _fmt(cert.lambda_max), str(p_min), str(wall_ms),
        ]))
    return rows


def cmd_sweep(args) -> int:
    spec = SweepSpec(
        model=args.model,
        fixed=_sweep_fixed_params(args),
        axis1=_parse_axis(args.axis1),
        axis2=_parse_axis(args.axis2),
        trials=args.trials,
        base_seed=args.seed,
        p=args.p if args.p == "auto" else int(args.p),
        out=args.out,
        jobs=args.jobs,
        max_iters=args.max_iters,
        grad_tol=args.grad_tol,
        probes=args.probes,
    )
    return run_sweep(spec, gamma=args.gamma)


def _sweep_fixed_params(args) -> dict:
    fixed = _model_params(args)
    fixed["n"] = args.n
    if args.adversary_density > 0:
        fixed["adversary_density"] = args.adversary_density
        fixed["adversary_magnitude"] = args.adversary_magnitude
    return fixed


def _resolve_auto_p(spec: SweepSpec) -> int:
    ref_params = dict(spec.fixed)
    for name, vals in (spec.axis1, spec.axis2):
        if name != "p":
            ref_params[name] = vals[0]
    ref_density = ref_params.pop("adversary_density", 0.0)
    ref_magnitude = ref_params.pop("adversary_magnitude", 0.5)
    n_ref = int(ref_params.pop("n"))
    ref_seed = derive_seed("sweep-inst", spec.base_seed, 0, 0, 0)
    ref = _generate_instance(spec.model, n_ref, ref_seed, ref_params, ref_density, ref_magnitude)
    cert = build_certificate(ref.A, embed_reference(ref.truth, ref.n, ref.d, ref.d + 1))
    if cert.p_min_benign is None:
        raise ValidationError("p=auto failed: reference certificate has no positive gap")
    return cert.p_min_benign


def run_sweep(spec: SweepSpec, gamma: float = 1.0) -> int:
    """Execute a sweep and write its CSV; rows are emitted in cell order no
    matter how the worker pool schedules them."""
    axis1_name, axis1_vals = spec.axis1
    axis2_name, axis2_vals = spec.axis2
    if spec.p == "auto":
        p_value = _resolve_auto_p(spec)
        print(f"p=auto resolved to {p_value}")
    else:
        p_value = int(spec.p)

    cells = []
    for i1, v1 in enumerate(axis1_vals):
        for i2, v2 in enumerate(axis2_vals):
            params = dict(spec.fixed)
            params["p"] = p_value
            for name, val in ((axis1_name, v1), (axis2_name, v2)):
                params[name] = int(val) if name in _INT_PARAMS else val
            cells.append({
                "model": spec.model, "params": params, "trials": spec.trials,
                "base_seed": spec.base_seed, "i1": i1, "i2": i2, "v1": v1, "v2": v2,
                "max_iters": spec.max_iters, "grad_tol": spec.grad_tol, "probes": spec.probes,
            })

    print(f"sweep: model={spec.model} axis1={axis1_name} axis2={axis2_name} "
          f"cells={len(cells)} trials={spec.trials} jobs={spec.jobs}")
    if spec.model in ("z2", "kuramoto", "sbm"):
        try:
            ref = corollary_thresholds(spec.model, n=spec.fixed.get("n"), p=p_value, gamma=gamma)
            flag = " (constant unspecified)" if ref.constant_unspecified else ""
            print(f"reference threshold: {ref.description} = {_fmt(ref.bound)}{flag}")
        except ThresholdUndefinedError:
            pass
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            results = list(pool.map(_sweep_cell, cells))
    else:
        results = [_sweep_cell(c) for c in cells]

    with open(spec.out, "w") as fh:
        fh.write(SWEEP_COLUMNS + "\n")
        for rows in results:
            for row in rows:
                fh.write(row + "\n")
    print(f"wrote {spec.out} ({sum(len(rows) for rows in results)} rows)")
    return 0


def cmd_selftest(args) -> int:
    from .objective import proof_lemma_checks

    report = proof_lemma_checks(trials=args.trials, seed=args.seed)
    for line in report.summary_lines():
        print(line)
    print(f"selftest={'pass' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


def _add_model_flags(parser, require_model: bool) -> None:
    parser.add_argument("--model", choices=MODEL_NAMES, required=require_model)
    parser.add_argument("--n", type=int, default=100)
    parser.add_argument("--d", type=int, default=None)
    parser.add_argument("--sigma", type=float, default=None)
    parser.add_argument("--theta", type=float, default=None)
    parser.add_argument("--p-in", dest="p_in", type=float, default=None)
    parser.add_argument("--p-out", dest="p_out", type=float, default=None)
    parser.add_argument("--m", type=int, default=None)
    parser.add_argument("--adversary-density", type=float, default=0.0)
    parser.add_argument("--adversary-magnitude", type=float, default=0.5)


def _add_solver_flags(parser) -> None:
    parser.add_argument("--max-iters", type=int, default=5000)
    parser.add_argument("--grad-tol", type=float, default=1e-9)
    parser.add_argument("--probes", type=int, default=30)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bmsync",
        description="Low-rank factorization for group synchronization: generate "
                    "instances, solve and certify, sweep phase diagrams, run "
                    "coupled-oscillator flows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate an instance and write matrix + metadata")
    _add_model_flags(g, require_model=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="solve a matrix file and certify the result")
    s.add_argument("matrix")
    s.add_argument("--d", type=int, default=1)
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trace", default=None, help="JSON-lines iteration trace")
    _add_solver_flags(s)
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("certify", help="certify a candidate point for a matrix")
    c.add_argument("matrix")
    c.add_argument("candidate")
    c.add_argument("--d", type=int, default=1)
    c.set_defaults(func=cmd_certify)

    w = sub.add_parser("sweep", help="phase-diagram sweep to CSV")
    _add_model_flags(w, require_model=True)
    w.add_argument("--p", default="auto", help="embedding width, or 'auto'")
    w.add_argument("--axis1", required=True, help="name=v1,v2,...")
    w.add_argument("--axis2", required=True, help="name=v1,v2,...")
    w.add_argument("--trials", type=int, default=1)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--gamma", type=float, default=1.0,
                   help="confidence exponent echoed in threshold reference output")
    w.add_argument("--jobs", type=int, default=1)
    w.add_argument("--out", required=True)
    _add_solver_flags(w)
    w.set_defaults(func=cmd_sweep)

    k = sub.add_parser("kuramoto", help="run the gradient flow")
    k.add_argument("--matrix", default=None)
    _add_model_flags(k, require_model=False)
    k.add_argument("--p", type=int, required=True)
    k.add_argument("--dt", type=float, default=None)
    k.add_argument("--t-max", dest="t_max", type=float, default=100.0)
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--start", default=None, help="initial point file (candidate-point format)")
    k.add_argument("--out", default=None, help="trajectory CSV")
    k.set_defaults(func=cmd_kuramoto)

    t = sub.add_parser("selftest", help="run the randomized lemma battery")
    t.add_argument("--trials", type=int, default=1000)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "d", None) is None:
        args.d = 1
    try:
        return args.func(args)
    except (ValidationError, ParseError, ThresholdUndefinedError, FlowStepError,
            FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
