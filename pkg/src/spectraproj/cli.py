"""Command-line front end: solve, reduce, diagnose, generate, benchmark.

Every artifact embeds the resolved configuration, the seed and the library
version.  For a fixed configuration the JSON and trace-CSV artifacts are
byte-identical across runs; experiment tables additionally carry a wall-clock
column, which is the one documented exception to bitwise reproducibility.

Exit codes: 0 success, 1 solver or linear-algebra failure, 2 usage error,
3 facial reduction collapsed the face to {0}, 4 infeasible linear manifold.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .degeneracy import is_nondegenerate, jacobian_degeneracy_crosscheck
from .facialred import (
    FaceCollapsedError,
    certificate_from_stall,
    fr_loop,
    fr_report,
    fr_step,
    solve_aux_gauss_newton,
)
from .instances import (
    FAMILIES,
    NOSLATER_SUITE,
    GeneratorSpec,
    generate,
    noslater_suite_instance,
)
from .model import (
    BapInstance,
    InfeasibleManifoldError,
    dumps_json,
    instance_to_dict,
    kkt_residuals,
    load_instance,
    preprocess_surjective,
    primal_objective,
    save_instance,
)
from .ssnewton import (
    NewtonOptions,
    NewtonStatus,
    NewtonTrace,
    newton_solve,
    trace_to_csv,
)
from .symcore import smat, svec

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_FACE_ZERO = 3
EXIT_INFEASIBLE = 4


def _default_seed() -> int:
    return int(os.environ.get("SPECTRA_SEED", "0"))


def _parse_emit(text: str) -> set[str]:
    parts = {p.strip() for p in text.split(",") if p.strip()}
    bad = parts - {"trace", "report", "table"}
    if bad:
        raise argparse.ArgumentTypeError(f"unknown emit flags: {sorted(bad)}")
    return parts


def _options_from_args(args: argparse.Namespace) -> NewtonOptions:
    return NewtonOptions(
        eps_final=args.eps,
        cond_budget=args.cond_budget,
        max_iter=args.max_iter,
    )


def _resolve_instance(args: argparse.Namespace) -> BapInstance:
    if args.instance is not None:
        inst = load_instance(args.instance)
        # instance files are untrusted: drop dependent rows up front so the
        # solver sees a surjective map, and reject inconsistent systems here
        red_map, red_b, removed = preprocess_surjective(inst.map, inst.b)
        if removed:
            meta = dict(inst.meta)
            meta["rows_dropped"] = removed
            inst = BapInstance(map=red_map, b=red_b, W=inst.W, meta=meta)
        return inst
    if args.gen is None:
        raise SystemExit("either --instance PATH or --gen FAMILY is required")
    extras: dict[str, Any] = {}
    if args.sd is not None:
        extras["sd"] = args.sd
    if args.iips is not None:
        extras["iips"] = args.iips
    if args.support is not None:
        extras["support"] = args.support
    spec = GeneratorSpec(
        family=args.gen,
        n=args.n,
        m=args.m,
        seed=args.seed,
        w_mode=args.w_mode,
        extras=extras,
    )
    return generate(spec)


def _config_echo(args: argparse.Namespace) -> dict[str, Any]:
    """Fully resolved run configuration, embedded in every artifact."""
    cfg: dict[str, Any] = {
        "command": args.command,
        "version": __version__,
        "seed": args.seed,
        "options": {
            "eps_final": args.eps,
            "cond_budget": args.cond_budget,
            "max_iter": args.max_iter,
        },
    }
    if getattr(args, "instance", None) is not None:
        cfg["instance"] = args.instance
    elif getattr(args, "gen", None) is not None:
        cfg["generator"] = {
            "family": args.gen, "n": args.n, "m": args.m,
            "w_mode": args.w_mode, "sd": args.sd, "iips": args.iips,
            "support": args.support,
        }
    return cfg


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_json(path: Path, payload: dict[str, Any]) -> None:
    _write_text(path, dumps_json(payload) + "\n")


def _solve_summary(inst: BapInstance, trace: NewtonTrace) -> dict[str, Any]:
    res = kkt_residuals(inst, trace.triple)
    return {
        "status": trace.status.value,
        "iterations": trace.k_final,
        "relres": trace.relres_final,
        "cond": trace.cond_final,
        "kkt": res,
        "p_star": primal_objective(inst, trace.triple.X),
    }


def cmd_solve(args: argparse.Namespace) -> int:
    inst = _resolve_instance(args)
    trace = newton_solve(inst, opts=_options_from_args(args))
    out = Path(args.out)
    if "trace" in args.emit:
        _write_text(out / "trace.csv", trace_to_csv(trace))
    if "report" in args.emit:
        report = {"config": _config_echo(args), **_solve_summary(inst, trace)}
        _write_json(out / "report.json", report)
    print(
        f"status={trace.status.value} k={trace.k_final} "
        f"relres={trace.relres_final:.3e} cond={trace.cond_final:.3e}"
    )
    return EXIT_OK


def cmd_fr(args: argparse.Namespace) -> int:
    inst = _resolve_instance(args)
    chain, final = fr_loop(inst)
    out = Path(args.out)
    report = {"config": _config_echo(args), **fr_report(chain, final)}
    if "report" in args.emit:
        _write_json(out / "fr_report.json", report)
        save_instance(final, str(out / "reduced_instance.json"))
    print(
        f"sd_hat={chain.sd_hat} iips_hat={chain.iips_hat} "
        f"final_n={final.n} final_m={final.m}"
    )
    return EXIT_OK


def cmd_pipeline(args: argparse.Namespace) -> int:
    """Solve; on a stall, extract a certificate, restrict the face, repeat.

    The final iterate of the last round is lifted back to the original
    coordinates through the composed facial range matrix, and the primal-side
    quantities are reported against the original instance.
    """
    inst = _resolve_instance(args)
    opts = _options_from_args(args)
    out = Path(args.out)
    current = inst
    V = np.eye(inst.n)
    rounds: list[dict[str, Any]] = []
    trace: NewtonTrace | None = None
    for rnd in range(inst.n + 1):
        trace = newton_solve(current, opts=opts)
        if "trace" in args.emit:
            _write_text(out / f"round_{rnd}_trace.csv", trace_to_csv(trace))
        entry: dict[str, Any] = {
            "round": rnd,
            "n": current.n,
            "m": current.m,
            "status": trace.status.value,
            "iterations": trace.k_final,
            "relres": trace.relres_final,
            "cond": trace.cond_final,
        }
        if trace.status == NewtonStatus.SOLVED:
            rounds.append(entry)
            break
        lam0 = certificate_from_stall(trace, current)
        cert = solve_aux_gauss_newton(current, lam0=lam0)
        if cert is None:
            entry["certificate"] = None
            rounds.append(entry)
            break
        reduced, Q, removed = fr_step(current, cert)
        entry["certificate"] = cert.lam
        entry["rows_removed"] = removed
        rounds.append(entry)
        V = V @ Q
        current = reduced
    assert trace is not None
    X_lift = V @ trace.triple.X @ V.T
    pf = np.linalg.norm(inst.map.apply(X_lift) - inst.b) / (1.0 + np.linalg.norm(inst.b))
    report: dict[str, Any] = {
        "config": _config_echo(args),
        "rounds": rounds,
        "fr_rounds": len(rounds) - 1,
        "status": trace.status.value,
        "X_star": svec(X_lift),
        "pf": float(pf),
        "p_star": primal_objective(inst, X_lift),
        "reduced": _solve_summary(current, trace),
    }
    if pf <= 1e-6:
        report["degeneracy"] = is_nondegenerate(inst, X_lift).to_dict()
    if "report" in args.emit:
        _write_json(out / "report.json", report)
    print(
        f"rounds={len(rounds)} status={trace.status.value} "
        f"p_star={report['p_star']:.12g} pf={pf:.3e}"
    )
    return EXIT_OK


def cmd_diagnose(args: argparse.Namespace) -> int:
    inst = _resolve_instance(args)
    out = Path(args.out)
    report: dict[str, Any] = {"config": _config_echo(args)}
    X: np.ndarray | None = None
    if args.x_json is not None:
        payload = np.array(
            __import__("json").loads(Path(args.x_json).read_text())["X"], dtype=float
        )
        X = payload if payload.ndim == 2 else smat(payload)
    elif args.at_planted:
        planted = inst.meta.get("planted", {})
        for key in ("xhat", "x_star", "vertex"):
            if key in planted:
                X = smat(np.asarray(planted[key], dtype=float))
                break
        if X is None:
            raise SystemExit("instance metadata has no planted point")
    if X is not None:
        try:
            report["degeneracy"] = is_nondegenerate(inst, X).to_dict()
        except ValueError as exc:
            # infeasible point: report the residuals, refuse a verdict
            pf = np.linalg.norm(inst.map.apply(X) - inst.b)
            report["degeneracy"] = None
            report["infeasible"] = {
                "reason": str(exc),
                "pf_abs": float(pf),
                "min_eig": float(np.linalg.eigvalsh(X).min()),
            }
    else:
        trace = newton_solve(inst, opts=_options_from_args(args))
        cc = jacobian_degeneracy_crosscheck(inst, trace)
        report["solve"] = _solve_summary(inst, trace)
        report["crosscheck"] = cc.to_dict()
        report["jacobian_spectrum"] = trace.iterates[-1].eig_J
    if "report" in args.emit:
        _write_json(out / "diagnose.json", report)
    verdict = None
    if report.get("degeneracy"):
        verdict = report["degeneracy"]["verdict"]
    elif "crosscheck" in report:
        verdict = report["crosscheck"]["verdict"]
    print(f"verdict={verdict}")
    return EXIT_OK


def cmd_gen(args: argparse.Namespace) -> int:
    inst = _resolve_instance(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "instance.json"
    save_instance(inst, str(path))
    print(path)
    return EXIT_OK


# ---------------------------------------------------------------------------
# experiment suites
# ---------------------------------------------------------------------------


def _run_one(inst: BapInstance, opts: NewtonOptions) -> dict[str, Any]:
    t0 = time.perf_counter()
    trace = newton_solve(inst, opts=opts)
    elapsed = time.perf_counter() - t0
    res = kkt_residuals(inst, trace.triple)
    history = trace.relres_history()
    return {
        "status": trace.status.value,
        "k": trace.k_final,
        "relres": trace.relres_final,
        "cond": trace.cond_final,
        "pf": res["pf"],
        "df": res["df_lin"],
        "cs": res["cs"],
        "time": elapsed,
        "reach8": bool((history <= 1e-8).any()),
        "reach13": bool((history <= 1e-13).any()),
    }


def _aggregate(rows: list[dict[str, Any]]) -> dict[str, Any]:
    def mean(key: str) -> float:
        return float(np.mean([r[key] for r in rows]))

    return {
        "runs": len(rows),
        "pf": mean("pf"),
        "df": mean("df"),
        "cs": mean("cs"),
        "k": mean("k"),
        "time": float(np.median([r["time"] for r in rows])),
        "cond": mean("cond"),
        "pct_1e-8": 100.0 * sum(r["reach8"] for r in rows) / len(rows),
        "pct_1e-13": 100.0 * sum(r["reach13"] for r in rows) / len(rows),
    }


def _cells_to_tables(cells: list[dict[str, Any]]) -> tuple[str, str, str, str]:
    """Markdown and CSV renderings of a suite: main table and percentages."""
    cols = ["cell", "runs", "pf", "df", "cs", "k", "time", "cond"]
    md = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    csv = [",".join(cols)]
    for c in cells:
        agg = c["agg"]
        fmt = [
            c["cell"], str(agg["runs"]),
            f"{agg['pf']:.2e}", f"{agg['df']:.2e}", f"{agg['cs']:.2e}",
            f"{agg['k']:.1f}", f"{agg['time']:.4f}", f"{agg['cond']:.2e}",
        ]
        md.append("| " + " | ".join(fmt) + " |")
        csv.append(",".join(fmt))
    pcols = ["cell", "pct_1e-8", "pct_1e-13"]
    pmd = ["| " + " | ".join(pcols) + " |", "|" + "---|" * len(pcols)]
    pcsv = [",".join(pcols)]
    for c in cells:
        agg = c["agg"]
        fmt = [c["cell"], f"{agg['pct_1e-8']:.0f}", f"{agg['pct_1e-13']:.0f}"]
        pmd.append("| " + " | ".join(fmt) + " |")
        pcsv.append(",".join(fmt))
    return (
        "\n".join(md) + "\n",
        "\n".join(csv) + "\n",
        "\n".join(pmd) + "\n",
        "\n".join(pcsv) + "\n",
    )


def _suite_cells(suite: str, seeds: int, base_seed: int) -> list[dict[str, Any]]:
    """Cell definitions: a label plus the list of instance thunks to run."""
    cells: list[dict[str, Any]] = []

    def cell(label: str, makers: list[Callable[[], BapInstance]]) -> None:
        cells.append({"cell": label, "makers": makers})

    if suite == "slater_table":
        from .instances import gen_random_slater

        for n in (10, 20, 50, 100):
            cell(
                f"slater_n{n}",
                [
                    (lambda n=n, s=s: gen_random_slater(n, 2 * n, seed=base_seed + s))
                    for s in range(seeds)
                ],
            )
    elif suite == "noslater_table":
        for n in sorted(NOSLATER_SUITE):
            cell(
                f"noslater_n{n}",
                [
                    (lambda n=n, s=s: noslater_suite_instance(n, base_seed + s))
                    for s in range(seeds)
                ],
            )
    elif suite == "ellip_vontope_table":
        from .instances import gen_elliptope, gen_vontope

        cell(
            "elliptope_n10_random",
            [
                (lambda s=s: gen_elliptope(10, seed=base_seed + s, w_mode="random"))
                for s in range(seeds)
            ],
        )
        cell(
            "vontope_n3_rank1",
            [
                (lambda s=s: gen_vontope(3, seed=base_seed + s, post_fr=True, w_mode="rank1"))
                for s in range(seeds)
            ],
        )
        cell(
            "vontope_n4_random",
            [
                (lambda s=s: gen_vontope(4, seed=base_seed + s, post_fr=True, w_mode="random"))
                for s in range(seeds)
            ],
        )
    else:
        raise SystemExit(f"unknown suite {suite!r}")
    return cells


def _run_singularity_demo(args: argparse.Namespace) -> int:
    """The stall-then-repair walk: one planted instance, before/after rows."""
    from .instances import gen_planted_noslater

    out = Path(args.out)
    opts = _options_from_args(args)
    inst = gen_planted_noslater(
        15, 7, sd_target=1, iips_target=1, support_size=5, seed=args.seed
    )
    before = newton_solve(inst, opts=opts)
    lam0 = certificate_from_stall(before, inst)
    cert = solve_aux_gauss_newton(inst, lam0=lam0)
    if cert is None:
        print("no certificate found; nothing to repair", file=sys.stderr)
        return EXIT_FAILURE
    reduced, Q, removed = fr_step(inst, cert)
    after = newton_solve(reduced, opts=opts)
    if "trace" in args.emit:
        _write_text(out / "before_trace.csv", trace_to_csv(before))
        _write_text(out / "after_trace.csv", trace_to_csv(after))
    rows = [
        ("before", before, inst),
        ("after", after, reduced),
    ]
    cols = ["phase", "n", "m", "status", "k", "relres", "cond"]
    md = ["| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    csv = [",".join(cols)]
    for label, tr, ins in rows:
        fmt = [
            label, str(ins.n), str(ins.m), tr.status.value,
            str(tr.k_final), f"{tr.relres_final:.4e}", f"{tr.cond_final:.4e}",
        ]
        md.append("| " + " | ".join(fmt) + " |")
        csv.append(",".join(fmt))
    if "table" in args.emit:
        _write_text(out / "singularity_demo.md", "\n".join(md) + "\n")
        _write_text(out / "singularity_demo.csv", "\n".join(csv) + "\n")
    if "report" in args.emit:
        _write_json(
            out / "singularity_demo.json",
            {
                "config": _config_echo(args),
                "rows_removed": removed,
                "before": {"status": before.status.value, "k": before.k_final,
                           "relres": before.relres_final, "cond": before.cond_final},
                "after": {"status": after.status.value, "k": after.k_final,
                          "relres": after.relres_final, "cond": after.cond_final},
            },
        )
    print("\n".join(md))
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    if args.suite == "singularity_demo":
        return _run_singularity_demo(args)
    out = Path(args.out)
    opts = _options_from_args(args)
    cells = _suite_cells(args.suite, args.seeds, args.seed)
    for c in cells:
        makers = c.pop("makers")
        if args.workers > 1:
            with ThreadPoolExecutor(max_workers=args.workers) as pool:
                futures = [pool.submit(lambda mk=mk: _run_one(mk(), opts)) for mk in makers]
                c["rows"] = [f.result() for f in futures]
        else:
            c["rows"] = [_run_one(mk(), opts) for mk in makers]
        c["agg"] = _aggregate(c["rows"])
    md, csv, pmd, pcsv = _cells_to_tables(cells)
    if "table" in args.emit:
        _write_text(out / f"{args.suite}.md", md)
        _write_text(out / f"{args.suite}.csv", csv)
        _write_text(out / f"{args.suite}_pct.md", pmd)
        _write_text(out / f"{args.suite}_pct.csv", pcsv)
    if "report" in args.emit:
        payload = {
            "config": _config_echo(args),
            "suite": args.suite,
            "cells": [
                {
                    "cell": c["cell"],
                    # per-run records without the wall-clock field so the
                    # JSON artifact stays bitwise reproducible
                    "rows": [
                        {k: v for k, v in row.items() if k != "time"}
                        for row in c["rows"]
                    ],
                }
                for c in cells
            ],
        }
        _write_json(out / f"{args.suite}.json", payload)
    print(md)
    print(pmd)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument surface
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectraproj",
        description="Nearest-point projection onto spectrahedra, with "
        "stall detection, facial reduction and degeneracy diagnostics.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    src = argparse.ArgumentParser(add_help=False)
    src.add_argument("--instance", help="path to an instance JSON file")
    src.add_argument("--gen", choices=FAMILIES, help="generate an instance instead")
    src.add_argument("--n", type=int, default=10)
    src.add_argument("--m", type=int, default=None)
    src.add_argument("--seed", type=int, default=_default_seed())
    src.add_argument("--sd", type=int, default=None, help="planted singularity degree")
    src.add_argument("--iips", type=int, default=None, help="planted redundant rows")
    src.add_argument("--support", type=int, default=None, help="certificate support size")
    src.add_argument(
        "--w-mode", default="random", choices=("random", "rank1", "feasible")
    )

    knobs = argparse.ArgumentParser(add_help=False)
    knobs.add_argument("--eps", type=float, default=1e-13)
    knobs.add_argument("--cond-budget", type=float, default=16.0)
    knobs.add_argument("--max-iter", type=int, default=2000)
    knobs.add_argument("--out", default="out")
    knobs.add_argument(
        "--emit", type=_parse_emit, default={"trace", "report", "table"},
        help="comma-separated subset of trace,report,table",
    )

    sub.add_parser("solve", parents=[src, knobs]).set_defaults(func=cmd_solve)
    sub.add_parser("fr", parents=[src, knobs]).set_defaults(func=cmd_fr)
    sub.add_parser("pipeline", parents=[src, knobs]).set_defaults(func=cmd_pipeline)

    diag = sub.add_parser("diagnose", parents=[src, knobs])
    diag.add_argument("--x-json", help="JSON file with an explicit point under key 'X'")
    diag.add_argument(
        "--at-planted", action="store_true",
        help="diagnose at the generator's planted point",
    )
    diag.set_defaults(func=cmd_diagnose)

    sub.add_parser("gen", parents=[src, knobs]).set_defaults(func=cmd_gen)

    exp = sub.add_parser("experiment", parents=[src, knobs])
    exp.add_argument(
        "suite",
        choices=("slater_table", "noslater_table", "singularity_demo", "ellip_vontope_table"),
    )
    exp.add_argument("--seeds", type=int, default=20, help="instances per cell")
    exp.add_argument("--workers", type=int, default=1)
    exp.set_defaults(func=cmd_experiment)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FaceCollapsedError as exc:
        print(f"face collapsed to the origin: {exc}", file=sys.stderr)
        return EXIT_FACE_ZERO
    except InfeasibleManifoldError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except np.linalg.LinAlgError as exc:
        print(f"linear algebra failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
