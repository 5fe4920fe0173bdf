"""Command-line interface: batch experiments plus single-shot tools for
spike detection, coefficient estimation, benchmarks and metrics."""

import argparse
import sys

from . import fileio
from .benchmarks import BenchmarkReport
from .harness import all_ok, load_config, make_estimator, run_experiment
from .metrics import err_frobenius, err_nmse, power_efficiency
from .spikes import detect_spikes


def _add_estimator_io(parser):
    parser.add_argument("batch", help="snapshot batch file (CMX1 + metadata line)")
    parser.add_argument("--G", type=int, default=None,
                        help="dictionary size (default 2M)")
    parser.add_argument("--f-ul", type=float, default=1.9, dest="f_ul",
                        help="uplink carrier (GHz)")
    parser.add_argument("--f-dl", type=float, default=2.1, dest="f_dl",
                        help="downlink carrier (GHz)")
    parser.add_argument("--output-prefix", default=None,
                        help="write <prefix>.report, <prefix>_ul.cmx and, when "
                             "supported, <prefix>_dl.cmx")


def _run_estimator(args, method, dictionary="dirac", music=True):
    from .covariance import ParametricCovariance  # local: heavy sklearn import

    batch = fileio.read_batch(args.batch)
    M = batch.n_antennas
    G = args.G if args.G is not None else 2 * M

    if method in ("nnls", "qp", "em"):
        est = ParametricCovariance(
            noise_power=batch.noise_power, method=method, dictionary=dictionary,
            n_atoms=G, music=music,
        )
    else:
        from .harness import ExperimentConfig

        cfg = ExperimentConfig(
            M=M, N_list=[batch.n_snapshots], snr_db=0.0, dictionary="dirac",
            G_list=[G], methods=[method], trials_asf=1, trials_realization=1,
            seed=0, f_ul_ghz=args.f_ul, f_dl_ghz=args.f_dl,
        )
        est = make_estimator(method, batch.noise_power, cfg, G)
    est.fit(batch)

    nu_dl = args.f_dl / args.f_ul
    report = est.report_ if hasattr(est, "report_") else BenchmarkReport(
        method=method, covariance=est.covariance_, iterations=0,
        final_residual=0.0, converged=True,
    )
    print(fileio.dump_report(report), end="")
    if args.output_prefix:
        fileio.write_report(args.output_prefix + ".report", report)
        fileio.write_cmx(args.output_prefix + "_ul.cmx", est.covariance_)
        if est.supports_extrapolation:
            fileio.write_cmx(args.output_prefix + "_dl.cmx", est.extrapolate(nu_dl))
    return 0


def cmd_run(args):
    config = load_config(args.config)
    rows = run_experiment(config, output_path=args.output)
    n_bad = sum(1 for row in rows if row[9] != "ok")
    print(f"{len(rows)} result rows, {n_bad} failures")
    return 0 if n_bad == 0 and all_ok(rows) else 1


def cmd_spikes(args):
    sigma_y = fileio.read_cmx(args.covariance)
    est = detect_spikes(
        sigma_y, args.samples, grid_size=args.grid_size,
        refine=not args.no_refine, keep_spectrum=args.dump_spectrum is not None,
    )
    print(f"order,{est.order}")
    for loc in est.locations:
        print(f"location,{float(loc)!r}")
    if args.dump_spectrum:
        grid, eta = est.pseudo_spectrum
        with open(args.dump_spectrum, "w", encoding="utf-8") as fh:
            for x, v in zip(grid, eta):
                fh.write(f"{float(x)!r},{float(v)!r}\n")
    return 0


def cmd_estimate(args):
    return _run_estimator(args, args.method, dictionary=args.dict,
                          music=not args.no_music)


def cmd_benchmark(args):
    return _run_estimator(args, args.method)


def cmd_metrics(args):
    truth = fileio.read_cmx(args.truth)
    estimate = fileio.read_cmx(args.estimate)
    print(f"E_NF,{float(err_frobenius(truth, estimate))!r}")
    if args.noise_power is not None:
        print(f"E_NMSE,{float(err_nmse(truth, estimate, args.noise_power))!r}")
    p = args.subspace_dim or max(1, truth.shape[0] // 4)
    print(f"E_PE,{float(power_efficiency(truth, estimate, p))!r}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="asfcov",
        description="Spatial covariance estimation from noisy array snapshots",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured Monte Carlo sweep")
    p_run.add_argument("config", help="TOML experiment configuration")
    p_run.add_argument("--output", default=None, help="override the CSV output path")
    p_run.set_defaults(func=cmd_run)

    p_spk = sub.add_parser("spikes", help="detect spikes in a sample covariance")
    p_spk.add_argument("covariance", help="CMX1 file holding the sample covariance")
    p_spk.add_argument("--samples", type=int, required=True,
                       help="number of snapshots behind the covariance")
    p_spk.add_argument("--grid-size", type=int, default=4096)
    p_spk.add_argument("--no-refine", action="store_true")
    p_spk.add_argument("--dump-spectrum", default=None,
                       help="write the (angle, pseudo-spectrum) pairs to this path")
    p_spk.set_defaults(func=cmd_spikes)

    p_est = sub.add_parser("estimate", help="fit a parametric covariance model")
    p_est.add_argument("--method", choices=("nnls", "qp", "em"), required=True)
    p_est.add_argument("--dict", choices=("dirac", "gauss"), default="dirac")
    p_est.add_argument("--no-music", action="store_true",
                       help="skip spike detection")
    _add_estimator_io(p_est)
    p_est.set_defaults(func=cmd_estimate)

    p_bench = sub.add_parser("benchmark", help="run a competitor estimator")
    p_bench.add_argument("--method", choices=("toeplitz-psd", "spice", "projection"),
                         required=True)
    _add_estimator_io(p_bench)
    p_bench.set_defaults(func=cmd_benchmark)

    p_met = sub.add_parser("metrics", help="compare two covariance files")
    p_met.add_argument("truth", help="CMX1 ground-truth covariance")
    p_met.add_argument("estimate", help="CMX1 estimated covariance")
    p_met.add_argument("--noise-power", type=float, default=None)
    p_met.add_argument("--subspace-dim", type=int, default=None)
    p_met.set_defaults(func=cmd_metrics)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
