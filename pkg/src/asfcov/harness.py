"""Batch experiment orchestration: seeded Monte Carlo over random scattering
scenes and channel realizations, full detect/fit/extrapolate/score pipelines,
deterministic CSV output."""

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channel import asf_covariance, draw_samples, noise_power_for_snr, random_mixed_asf
from .covariance import (
    ParametricCovariance,
    ProjectionCovariance,
    SampleCovariance,
    SpiceCovariance,
    ToeplitzPsdCovariance,
)
from .fileio import load_toml
from .metrics import err_frobenius, err_nmse, power_efficiency

METHODS = (
    "sample", "nnls", "qp", "em", "nnls-no-music", "em-no-music",
    "toeplitz-psd", "spice", "projection",
)
NO_DL_METHODS = frozenset({"sample", "toeplitz-psd"})
CSV_HEADER = "asf_seed,realization_seed,method,M,N,G,nu,metric,value,status"

_TOP_KEYS = {
    "M", "N", "N_over_M", "snr_db", "dictionary", "methods", "trials_asf",
    "trials_realization", "seed", "f_ul_ghz", "f_dl_ghz", "output",
    "music", "asf", "metrics",
}
_MUSIC_KEYS = {"grid_size", "refine"}
_ASF_KEYS = {"max_spikes", "max_clusters", "mass_split", "min_separation"}
_METRIC_KEYS = {"pe_dim"}
_DICT_KEYS = {"kind", "G", "G_over_M"}


@dataclass
class ExperimentConfig:
    M: int
    N_list: list
    snr_db: float
    dictionary: str
    G_list: list
    methods: list
    trials_asf: int
    trials_realization: int
    seed: int
    f_ul_ghz: float = 1.9
    f_dl_ghz: float = 2.1
    music_grid: int = 4096
    music_refine: bool = True
    asf_params: dict = field(default_factory=dict)
    pe_dim: int | None = None
    output: str | None = None

    def __post_init__(self):
        if self.M < 2:
            raise ValueError("M must be >= 2")
        if not self.N_list or any(n < 1 for n in self.N_list):
            raise ValueError("snapshot counts must be >= 1")
        if min(self.trials_asf, self.trials_realization) < 1:
            raise ValueError("trial counts must be >= 1")
        if self.f_ul_ghz <= 0 or self.f_dl_ghz <= 0:
            raise ValueError("carrier frequencies must be positive")
        if self.dictionary not in ("dirac", "gauss"):
            raise ValueError(f"unknown dictionary kind {self.dictionary!r}")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")

    @property
    def nu_dl(self):
        return self.f_dl_ghz / self.f_ul_ghz


def _require_keys(table, allowed, where):
    unknown = set(table) - allowed
    if unknown:
        raise ValueError(f"unknown config keys in {where}: {sorted(unknown)}")


def config_from_dict(data):
    """Build a validated config from parsed TOML; unknown keys are errors."""
    _require_keys(data, _TOP_KEYS, "top level")
    if ("N" in data) == ("N_over_M" in data):
        raise ValueError("specify exactly one of N or N_over_M")
    M = int(data["M"])
    if "N" in data:
        n_raw = data["N"]
        N_list = [int(n) for n in (n_raw if isinstance(n_raw, list) else [n_raw])]
    else:
        ratios = data["N_over_M"]
        ratios = ratios if isinstance(ratios, list) else [ratios]
        N_list = [max(1, round(float(r) * M)) for r in ratios]
    dic = data.get("dictionary", {"kind": "dirac"})
    if isinstance(dic, str):
        dic = {"kind": dic}
    _require_keys(dic, _DICT_KEYS, "dictionary")
    if ("G" in dic) and ("G_over_M" in dic):
        raise ValueError("specify at most one of dictionary.G and dictionary.G_over_M")
    if "G" in dic:
        g_raw = dic["G"]
        G_list = [int(g) for g in (g_raw if isinstance(g_raw, list) else [g_raw])]
    elif "G_over_M" in dic:
        ratios = dic["G_over_M"]
        ratios = ratios if isinstance(ratios, list) else [ratios]
        G_list = [max(1, round(float(r) * M)) for r in ratios]
    else:
        G_list = [2 * M]
    music = data.get("music", {})
    _require_keys(music, _MUSIC_KEYS, "music")
    asf = dict(data.get("asf", {}))
    _require_keys(asf, _ASF_KEYS, "asf")
    met = data.get("metrics", {})
    _require_keys(met, _METRIC_KEYS, "metrics")
    return ExperimentConfig(
        M=M,
        N_list=N_list,
        snr_db=float(data.get("snr_db", 10.0)),
        dictionary=dic.get("kind", "dirac"),
        G_list=G_list,
        methods=list(data.get("methods", ["sample", "nnls", "em"])),
        trials_asf=int(data.get("trials_asf", 1)),
        trials_realization=int(data.get("trials_realization", 1)),
        seed=int(data.get("seed", 0)),
        f_ul_ghz=float(data.get("f_ul_ghz", 1.9)),
        f_dl_ghz=float(data.get("f_dl_ghz", 2.1)),
        music_grid=int(music.get("grid_size", 4096)),
        music_refine=bool(music.get("refine", True)),
        asf_params=asf,
        pe_dim=int(met["pe_dim"]) if "pe_dim" in met else None,
        output=data.get("output"),
    )


def load_config(path):
    return config_from_dict(load_toml(path))


def make_estimator(method, noise_power, config, G):
    """Instantiate the estimator object behind a pipeline method name."""
    if method == "sample":
        return SampleCovariance(noise_power=noise_power)
    if method == "toeplitz-psd":
        return ToeplitzPsdCovariance(noise_power=noise_power)
    if method == "spice":
        return SpiceCovariance(noise_power=noise_power, n_atoms=G)
    if method == "projection":
        return ProjectionCovariance(noise_power=noise_power)
    base = method.removesuffix("-no-music")
    if base not in ("nnls", "qp", "em"):
        raise ValueError(f"unknown method {method!r}")
    return ParametricCovariance(
        noise_power=noise_power,
        method=base,
        dictionary=config.dictionary,
        n_atoms=G,
        music=not method.endswith("-no-music"),
        music_grid=config.music_grid,
        music_refine=config.music_refine,
    )


def pipeline(batch, config, method, G=None):
    """Run one method on one batch: fit, reconstruct UL, extrapolate DL.

    Returns ``(cov_ul, cov_dl_or_None, estimator)``; methods without an
    angle-domain model return ``None`` for the downlink covariance.
    """
    if G is None:
        G = config.G_list[0]
    est = make_estimator(method, batch.noise_power, config, G)
    est.fit(batch)
    cov_dl = est.extrapolate(config.nu_dl) if est.supports_extrapolation else None
    return est.covariance_, cov_dl, est


def _derive_seed(master, *stream):
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(stream))
    return int(ss.generate_state(1, np.uint64)[0] % (2**63))


def _trial_rows(config, asf_seed, realization_seed):
    """All CSV rows for one (scene, realization) pair."""
    asf = random_mixed_asf(seed=asf_seed, **config.asf_params)
    M = config.M
    nu_dl = config.nu_dl
    sigma_ul = asf_covariance(asf, M, 1.0)
    sigma_dl = asf_covariance(asf, M, nu_dl)
    noise_power = noise_power_for_snr(config.snr_db, asf.mass())
    pe_dim = config.pe_dim if config.pe_dim is not None else max(1, M // 4)

    rows = []
    for N in config.N_list:
        batch = draw_samples(sigma_ul, noise_power, N, seed=(realization_seed, N))
        for G in config.G_list:
            for method in config.methods:
                def add(nu, metric, value, status="ok"):
                    rows.append((
                        asf_seed, realization_seed, method, M, N, G, nu,
                        metric, value, status,
                    ))

                try:
                    cov_ul, cov_dl, _ = pipeline(batch, config, method, G)
                except Exception as exc:  # recorded, run continues
                    status = f"error:{type(exc).__name__}"
                    for nu in (1.0, nu_dl):
                        for metric in ("E_NF", "E_NMSE", "E_PE"):
                            add(nu, metric, None, status)
                    continue
                add(1.0, "E_NF", err_frobenius(sigma_ul, cov_ul))
                add(1.0, "E_NMSE", err_nmse(sigma_ul, cov_ul, noise_power))
                add(1.0, "E_PE", power_efficiency(sigma_ul, cov_ul, pe_dim))
                if cov_dl is None:
                    for metric in ("E_NF", "E_NMSE", "E_PE"):
                        add(nu_dl, metric, None)
                else:
                    add(nu_dl, "E_NF", err_frobenius(sigma_dl, cov_dl))
                    add(nu_dl, "E_NMSE", err_nmse(sigma_dl, cov_dl, noise_power))
                    add(nu_dl, "E_PE", power_efficiency(sigma_dl, cov_dl, pe_dim))
    return rows


def _worker(args):
    return _trial_rows(*args)


def _max_workers():
    env = os.environ.get("ASFCOV_THREADS")
    if env:
        return max(1, int(env))
    return min(os.cpu_count() or 1, 8)


def format_row(row):
    asf_seed, realization_seed, method, M, N, G, nu, metric, value, status = row
    value_str = "NA" if value is None else repr(float(value))
    return (
        f"{asf_seed},{realization_seed},{method},{M},{N},{G},"
        f"{repr(float(nu))},{metric},{value_str},{status}"
    )


def run_experiment(config, output_path=None):
    """Run the configured Monte Carlo sweep.

    Returns the list of result rows (tuples matching ``CSV_HEADER``);
    writes them as CSV when an output path is configured.  Deterministic
    for a given config and seed, regardless of worker scheduling.
    """
    tasks = []
    for a in range(config.trials_asf):
        asf_seed = _derive_seed(config.seed, 0, a)
        for r in range(config.trials_realization):
            realization_seed = _derive_seed(config.seed, 1, a, r)
            tasks.append((config, asf_seed, realization_seed))

    workers = _max_workers()
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_worker, tasks))
    else:
        chunks = [_worker(t) for t in tasks]

    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[4], r[5], r[6], r[7]))

    path = output_path or config.output
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in rows:
                fh.write(format_row(row) + "\n")
    return rows


def all_ok(rows):
    return all(row[9] == "ok" for row in rows)
