"""neokit command line.

stdout carries data (CSV tables, PASS/FAIL lines); diagnostics go to stderr.
Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from threadpoolctl import threadpool_limits

from . import bundle
from .eigensolvers import Spectrum, smallest_eigenpairs_dense, smallest_eigenpairs_lobpcg
from .laplacian import TriangleMesh, build_cotan_laplacian, build_knn_laplacian
from .meshio import ParseError, read_obj, read_points

log = logging.getLogger("neokit")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


def _operators_to_entries(L: sp.csr_matrix, mass, points) -> dict:
    L = sp.csr_matrix(L)
    return {
        "L.rowptr": L.indptr.astype(np.int64),
        "L.colidx": L.indices.astype(np.int64),
        "L.values": L.data.astype(np.float64),
        "M.weights": np.asarray(mass, dtype=np.float64),
        "points": np.asarray(points, dtype=np.float64),
    }


def _operators_from_entries(d: dict):
    try:
        w = d["M.weights"]
        L = sp.csr_matrix((d["L.values"], d["L.colidx"], d["L.rowptr"]), shape=(w.size, w.size))
    except KeyError as exc:
        raise UsageError(f"bundle lacks operator entry {exc.args[0]}") from None
    return L, w


def _load(path) -> dict:
    try:
        return bundle.load(path)
    except (OSError, bundle.BundleError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _need(d: dict, *names):
    missing = [n for n in names if n not in d]
    if missing:
        raise UsageError(f"bundle lacks entries: {', '.join(missing)}")
    return [d[n] for n in names]


def _spectrum_from(d: dict) -> Spectrum:
    evals, evecs = _need(d, "evals", "evecs")
    return Spectrum(np.asarray(evals, dtype=np.float64), np.asarray(evecs, dtype=np.float64))


def cmd_build(args) -> int:
    try:
        if args.mesh:
            P, F = read_obj(args.input)
            ops = build_cotan_laplacian(TriangleMesh(P, F))
        else:
            P = read_points(args.input)
            ops = build_knn_laplacian(P, args.knn)
    except ParseError as exc:
        raise UsageError(str(exc)) from None
    if ops.n_components > 1:
        log.warning("operator has %d connected components", ops.n_components)
    bundle.save(args.out, _operators_to_entries(ops.L, ops.mass, P))
    log.info("wrote %s (N=%d, nnz=%d)", args.out, ops.mass.size, ops.L.nnz)
    return EXIT_OK


def cmd_eigs(args) -> int:
    d = _load(args.bundle)
    L, w = _operators_from_entries(d)
    N = w.size
    if not 1 <= args.k <= N:
        raise UsageError(f"k={args.k} must lie in [1, N={N}]")
    if args.solver == "dense":
        spectrum = smallest_eigenpairs_dense(L, w, args.k)
    else:
        if 4 * args.k > N:
            raise UsageError(f"lobpcg needs k <= N/4 (k={args.k}, N={N})")
        spectrum = smallest_eigenpairs_lobpcg(L, w, args.k, tol=args.tol, precond=args.precond,
                                          max_iter=args.max_iter, seed=args.seed)
        if spectrum.converged < args.k:
            raise NumericalFailure(f"lobpcg converged {spectrum.converged} of {args.k} pairs "
                                   f"in {spectrum.iterations} iterations")
    out = dict(d)
    out.update({"evals": spectrum.values, "evecs": spectrum.vectors})
    bundle.save(args.out, out)
    sys.stdout.write("index,eigenvalue\n")
    for i, lam in enumerate(spectrum.values):
        sys.stdout.write(f"{i},{float(lam)!r}\n")
    return EXIT_OK


def cmd_refine(args) -> int:
    from .subspace import recover_eigenpairs

    d = _load(args.bundle)
    L, w = _operators_from_entries(d)
    (F,) = _need(d, "F")
    if F.ndim != 2 or F.shape[0] != w.size:
        raise UsageError(f"F has shape {F.shape}, expected ({w.size}, m)")
    if args.k > F.shape[1]:
        raise UsageError(f"k={args.k} exceeds the number of fields m={F.shape[1]}")
    res = recover_eigenpairs(F, L, w, args.k)
    if res.k < args.k:
        raise NumericalFailure("rank-deficient fields leave fewer than k Ritz pairs")
    bundle.save(args.out, {"evals": res.values, "evecs": res.vectors, "Y": res.basis,
                           "residuals": res.residuals, "M.weights": w})
    timings = Path(args.timings) if args.timings else Path(str(args.out) + ".timings.csv")
    timings.write_text(res.timings_csv())
    sys.stdout.write("index,ritz_value,residual\n")
    for i, (lam, r) in enumerate(zip(res.values, res.residuals)):
        sys.stdout.write(f"{i},{float(lam)!r},{float(r)!r}\n")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .losses import evaluate
    from .subspace import RitzResult, weighted_orthonormalize

    pred, truth = _load(args.predicted), _load(args.truth)
    pred_modes, true_modes = _spectrum_from(pred), _spectrum_from(truth)
    w = truth.get("M.weights", pred.get("M.weights"))
    if w is None:
        raise UsageError("neither bundle carries M.weights")
    if pred_modes.k != true_modes.k:
        raise UsageError(f"mode count mismatch: predicted k={pred_modes.k}, truth k={true_modes.k}")
    if pred_modes.vectors.shape[0] != w.size or true_modes.vectors.shape[0] != w.size:
        raise UsageError("eigenvector lengths do not match the mass vector")
    Y = pred["Y"] if "Y" in pred else weighted_orthonormalize(pred_modes.vectors, w).Y
    res = RitzResult(pred_modes.values, pred_modes.vectors, Y, np.zeros(pred_modes.k))
    text = evaluate(res, true_modes, w).to_json(indent=2)
    if args.json:
        Path(args.json).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return EXIT_OK


def _parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(float(s)) for s in text.replace(" ", "").split(",") if s]
    except ValueError:
        raise UsageError(f"bad --sizes {text!r}") from None
    if not sizes or min(sizes) < 16:
        raise UsageError("--sizes needs at least one entry, each >= 16")
    return sizes


def _config_arg(text: str | None, default):
    from .neural.config import NEO_BASE, NERF_PE, TINY, load_config

    presets = {"base": NEO_BASE, "nerf": NERF_PE, "tiny": TINY}
    if text is None:
        return default
    if text in presets:
        return presets[text]
    try:
        return load_config(text)
    except (OSError, ValueError) as exc:
        raise UsageError(f"config {text!r}: {exc}") from None


def cmd_bench_scaling(args) -> int:
    from . import bench

    sizes = _parse_sizes(args.sizes)
    factory = None
    if args.weights:
        from .laplacian import normalize_cloud
        from .neural.backbone import check_weights, neo_forward
        from .neural.config import NEO_BASE

        cfg = _config_arg(args.config, NEO_BASE)
        weights = _load(args.weights)
        try:
            check_weights(cfg, weights)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if cfg.output_fields != args.m:
            raise UsageError(f"config output_fields={cfg.output_fields} differs from --m {args.m}")

        def factory(points, mass):
            Xn = normalize_cloud(points)
            return lambda: neo_forward(Xn, mass, cfg, weights, check=False)

    rows = bench.bench_scaling(sizes, m=args.m, repeat=args.repeat, k_neighbors=args.knn,
                               seed=args.seed, forward_factory=factory)
    text = bench.rows_csv(rows)
    if args.csv:
        Path(args.csv).write_text(text)
    else:
        sys.stdout.write(text)
    for stage, slope in bench.fit_slopes(rows).items():
        sys.stderr.write(f"slope {stage}: {slope:.3f}\n")
    return EXIT_OK


def cmd_demo_geodesic(args) -> int:
    from .geodesic import DisconnectedMeshError, heat_geodesic

    try:
        P, F = read_obj(args.mesh)
    except ParseError as exc:
        raise UsageError(str(exc)) from None
    mesh = TriangleMesh(P, F)
    if not 0 <= args.source < mesh.n:
        raise UsageError(f"source {args.source} outside [0, {mesh.n})")
    out = Path(args.out)
    try:
        plain = heat_geodesic(mesh, args.source, t_factor=args.t_factor, tol=args.tol)
        reports = {"icpcg": plain}
        if args.deflate:
            (Y,) = _need(_load(args.deflate), "evecs")
            if Y.shape[0] != mesh.n:
                raise UsageError(f"deflation basis has {Y.shape[0]} rows, mesh has {mesh.n} vertices")
            reports["deflated"] = heat_geodesic(mesh, args.source, t_factor=args.t_factor,
                                                solver="deflated", Y=Y, tol=args.tol)
    except DisconnectedMeshError as exc:
        raise UsageError(str(exc)) from None
    final = reports.get("deflated", plain)
    np.savetxt(out, final.distances, fmt="%.17g")
    if args.deflate:
        for name, res in reports.items():
            Path(f"{out}.{name}.csv").write_text(res.poisson.history_csv())
    sys.stdout.write("solver,iterations,converged\n")
    for name, res in reports.items():
        sys.stdout.write(f"{name},{res.poisson.iterations},{int(res.poisson.converged)}\n")
    if not all(r.poisson.converged for r in reports.values()):
        raise NumericalFailure("Poisson solve did not converge")
    return EXIT_OK


def cmd_attention_check(args) -> int:
    from .neural.checks import CHECK_CONFIG, run_checks

    cfg = _config_arg(args.config, CHECK_CONFIG)
    if args.mass_injection is not None:
        cfg = cfg.replace(mass_injection=args.mass_injection == "on")
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    results = run_checks(seed=args.seed, n=args.n, config=cfg)
    expected = set(args.expect_fail or [])
    unknown = expected - {r.name for r in results}
    if unknown:
        raise UsageError(f"unknown check names: {sorted(unknown)}")
    ok = True
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        note = ""
        if r.name in expected:
            note = " (expected FAIL)" if not r.passed else " (expected FAIL, but passed)"
            ok &= not r.passed
        else:
            ok &= r.passed
        sys.stdout.write(f"{status} {r.name} deviation={r.deviation:.3e} tol={r.tol:.0e}{note}\n")
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="neokit", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=None, help="BLAS thread count (1 = reproducible)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")
    # the same options after the subcommand override the global ones
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build", parents=[common], help="assemble L and M from a point file or OBJ mesh")
    s.add_argument("input")
    g = s.add_mutually_exclusive_group()
    g.add_argument("--knn", type=int, default=12, help="neighbours for the point-cloud Laplacian")
    g.add_argument("--mesh", action="store_true", help="treat input as an OBJ mesh (cotangent L)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("eigs", parents=[common], help="smallest eigenpairs of an operator bundle")
    s.add_argument("bundle")
    s.add_argument("-k", type=int, default=96)
    s.add_argument("--solver", choices=("dense", "lobpcg"), default="dense")
    s.add_argument("--precond", choices=("none", "ic0"), default="ic0")
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--max-iter", type=int, default=1000)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_eigs)

    s = sub.add_parser("refine", parents=[common], help="Rayleigh-Ritz on fields F stored in the bundle")
    s.add_argument("bundle")
    s.add_argument("-k", type=int, default=96)
    s.add_argument("--out", required=True)
    s.add_argument("--timings", help="stage timings CSV (default: OUT.timings.csv)")
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("eval", parents=[common], help="span, eigenvector and eigenvalue errors as JSON")
    s.add_argument("predicted")
    s.add_argument("truth")
    s.add_argument("--json", help="output path (default stdout)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("bench-scaling", parents=[common], help="time QR, projection and dense eig over sizes")
    s.add_argument("--sizes", default="8000,16000,32000,64000,128000")
    s.add_argument("--m", type=int, default=192)
    s.add_argument("--repeat", type=int, default=5)
    s.add_argument("--knn", type=int, default=12)
    s.add_argument("--weights", help="weights bundle; adds a forward-pass stage")
    s.add_argument("--config", help="backbone preset (base, nerf, tiny) or key=value file")
    s.add_argument("--csv", help="output path (default stdout)")
    s.set_defaults(func=cmd_bench_scaling)

    s = sub.add_parser("demo-geodesic", parents=[common], help="heat-method distances from one vertex")
    s.add_argument("mesh")
    s.add_argument("--source", type=int, default=0)
    s.add_argument("--deflate", help="bundle whose evecs deflate the Poisson solve")
    s.add_argument("--t-factor", type=float, default=1.0)
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_demo_geodesic)

    s = sub.add_parser("attention-check", parents=[common], help="mass-attention identities, PASS/FAIL per property")
    s.add_argument("--n", type=int, default=64)
    s.add_argument("--config", help="backbone preset (base, nerf, tiny) or key=value file")
    s.add_argument("--mass-injection", choices=("on", "off"))
    s.add_argument("--expect-fail", action="append", metavar="CHECK",
                   help="check expected to fail; may repeat")
    s.set_defaults(func=cmd_attention_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        with threadpool_limits(limits=args.threads):
            return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (NumericalFailure, np.linalg.LinAlgError, ArithmeticError, RuntimeError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
