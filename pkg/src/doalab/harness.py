"""Seeded Monte Carlo experiment runner.

Each experiment produces one benchmark curve as CSV: detector
ROCs, RMSE versus SNR, RMSE versus FD proportion, quantization loss versus
bits, and the neural detector training pipeline.  Outputs are
deterministic for a given master seed and identical across worker counts:
every trial draws from its own counter-based stream keyed by
(seed, trial index), and aggregation is ordered by trial index.
"""

import csv
import hashlib
import math
import os
from concurrent.futures import ProcessPoolExecutor
from configparser import ConfigParser
from dataclasses import dataclass

import numpy as np

from .arrays import (
    CONSTANT_MODULUS,
    GAUSSIAN,
    ArrayConfig,
    EmitterScenario,
    synthesize_snapshots,
)
from .crlb import RAD2_TO_DEG2, crlb_fd, crlb_had, crlb_tlhad
from .detect import glrt_statistic, maxmin_statistic, roc_points
from .doa import (
    METHOD_CLASSIC,
    METHOD_FHAD,
    METHOD_TLHAD,
    broadside_gain_ok,
    fhad_root_music,
    had_root_music_classic,
    tlhad_estimate,
)
from .errors import ConfigError
from .mlnn import (
    Hyper,
    TrainingSet,
    decision_threshold,
    eig_features,
    forward,
    load_model,
    save_model,
    select_architecture,
)
from .quantize import QuantizerConfig, performance_loss_db, quantize
from .rng import trial_rng
from .spectral import root_music, sample_covariance

EXPERIMENTS = ("roc", "rmse-snr", "rmse-eta", "loss-bits", "train-mlnn")

# flat sectioned key=value schema; every key has a default, unknown keys
# are rejected at parse time
SCHEMA = {
    "run": {
        "seed": "20240901",
        "trials": "",  # empty = per-experiment default
        "out": "out",
        "workers": "1",
    },
    "array": {
        "n_total": "64",
        "m_sub": "4",
        "fd_proportion": "0.25",
        "spacing": "0.5",
    },
    "scenario": {
        "snr_db": "-20",
        "snr_db_list": "0,5,10,15",
        "theta_deg": "15",
        "n_snapshots": "200",
        "t_snapshots": "1",
        "signal_model": CONSTANT_MODULUS,
    },
    "detect": {
        "target_fap": "0.1",
        # sphericity reproduces the published detector ordering; the
        # max-over-mean form is available here as well
        "glrt_form": "sphericity",
    },
    "rmse": {
        "eta_grid": "0.0625,0.25,0.5,0.75,1.0",
        "eta_snr_db_list": "-10,0,10",
    },
    "quant": {
        "bits": "1,2,3,4,5,6,7,8",
        "n_antennas": "32",
        "n_snapshots": "50",
        "snr_db_list": "-10,0,10",
        "empirical_trials": "500",
    },
    "mlnn": {
        "activations": "sigmoid,tanh,relu",
        "shapes": "16|32|64|16,16|32,32|64,64|16,16,16|32,32,32|64,64,64",
        "search_size": "8000",
        "final_ratio": "6",
        "learning_rate": "0.3",
        "batch_size": "64",
        "epochs": "40",
        "snr_jitter_db": "0",
    },
}

DEFAULT_TRIALS = {
    "roc": 10_000,
    "rmse-snr": 2_000,
    "rmse-eta": 2_000,
    "loss-bits": 500,
    "train-mlnn": 10_000,  # validation trials for threshold calibration
}


@dataclass
class ExperimentConfig:
    """Parsed, validated experiment settings."""

    experiment: str
    values: dict
    seed: int
    trials: int
    out_dir: str
    workers: int

    def __getitem__(self, key):
        return self.values[key]

    @property
    def digest(self) -> str:
        # out and workers are execution environment, not experiment identity
        skip = ("run.out", "run.workers")
        text = self.experiment + "".join(
            f"|{k}={self.values[k]}" for k in sorted(self.values) if k not in skip)
        return hashlib.sha256(text.encode()).hexdigest()[:12]

    def array_config(self) -> ArrayConfig:
        return ArrayConfig.two_layer(
            int(self["array.n_total"]), int(self["array.m_sub"]),
            float(self["array.fd_proportion"]), float(self["array.spacing"]))


def _parse_list(text, conv=float):
    return tuple(conv(x.strip()) for x in str(text).split(",") if x.strip())


def load_config(experiment: str, path=None, seed=None, out=None,
                workers=None) -> ExperimentConfig:
    """Read a sectioned key=value file, apply defaults, reject unknowns."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    values = {f"{sec}.{key}": val for sec, keys in SCHEMA.items()
              for key, val in keys.items()}
    if path is not None:
        parser = ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"cannot read config file {path}")
        for sec in parser.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown config section [{sec}]")
            for key, val in parser.items(sec):
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key {key!r} in section [{sec}]")
                values[f"{sec}.{key}"] = val
    if seed is not None:
        values["run.seed"] = str(seed)
    if out is not None:
        values["run.out"] = str(out)
    if workers is not None:
        values["run.workers"] = str(workers)
    try:
        seed_val = int(values["run.seed"])
        trials = int(values["run.trials"] or DEFAULT_TRIALS[experiment])
        workers_val = int(values["run.workers"])
    except ValueError as exc:
        raise ConfigError(f"bad numeric value in [run]: {exc}") from None
    if trials < 100:
        raise ConfigError("trial count must be at least 100")
    if workers_val < 1:
        raise ConfigError("workers must be at least 1")
    if values["scenario.signal_model"] not in (CONSTANT_MODULUS, GAUSSIAN):
        raise ConfigError(f"unknown signal model {values['scenario.signal_model']!r}")
    values["run.trials"] = str(trials)
    return ExperimentConfig(experiment, values, seed_val, trials,
                            values["run.out"], workers_val)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path


def _map_chunks(fn, args_list, workers):
    """Apply ``fn`` over chunk argument tuples, order preserved."""
    if workers <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args_list))


def _chunk_ranges(n, n_chunks):
    bounds = np.linspace(0, n, n_chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


# --- shared eigenvalue Monte Carlo -----------------------------------------

def _eig_batch(cfg: ArrayConfig, scen_for, seed: int, start: int, stop: int,
               batch: int = 128):
    """Sorted-descending eigenvalues for trials [start, stop).

    ``scen_for(rng)`` builds the scenario for one trial (it may draw, e.g.,
    a random direction, from the trial's own stream before synthesis).
    """
    out = np.empty((stop - start, cfg.n_total))
    for lo in range(start, stop, batch):
        hi = min(lo + batch, stop)
        xs = []
        for i in range(lo, hi):
            rng = trial_rng(seed, i)
            scen = scen_for(rng)
            xs.append(synthesize_snapshots(cfg, scen, rng).samples)
        xs = np.stack(xs)
        covs = xs @ xs.conj().transpose(0, 2, 1) / xs.shape[2]
        out[lo - start:hi - start] = np.linalg.eigvalsh(covs)[:, ::-1]
    return out


def _detection_eigs_chunk(args):
    (n_total, l_snapshots, snr_db, jitter_db, hypothesis, seed, start, stop) = args
    cfg = ArrayConfig.fully_digital(n_total)

    def scen_for(rng):
        if hypothesis == 0:
            return EmitterScenario.noise_only(l_snapshots)
        theta = rng.uniform(-90.0, 90.0)
        # keep strictly inside the open interval
        theta = min(max(theta, -89.999), 89.999)
        snr = snr_db + (rng.uniform(-jitter_db, jitter_db) if jitter_db else 0.0)
        return EmitterScenario.single_emitter(theta, snr, l_snapshots)

    return _eig_batch(cfg, scen_for, seed, start, stop)


def detection_eigs(n_total, l_snapshots, snr_db, hypothesis, n_trials, seed,
                   workers=1, jitter_db=0.0, offset=0):
    """Eigenvalue matrix for H0 or H1 detection trials (one stream each)."""
    chunks = _chunk_ranges(n_trials, max(workers, 1) * 4)
    args = [(n_total, l_snapshots, snr_db, jitter_db, hypothesis, seed,
             offset + a, offset + b) for a, b in chunks]
    return np.concatenate(_map_chunks(_detection_eigs_chunk, args, workers))


def make_detection_dataset_factory(n_total, l_snapshots, snr_db,
                                   jitter_db=0.0, workers=1):
    """Factory(n, seed) -> balanced TrainingSet of normalized eig features."""

    def factory(n_examples, seed):
        n_h1 = n_examples // 2
        n_h0 = n_examples - n_h1
        e0 = detection_eigs(n_total, l_snapshots, snr_db, 0, n_h0, seed,
                            workers, jitter_db)
        e1 = detection_eigs(n_total, l_snapshots, snr_db, 1, n_h1, seed,
                            workers, jitter_db, offset=n_h0)
        feats = np.vstack([e0, e1])
        feats /= feats.sum(axis=1, keepdims=True)
        labels = np.concatenate([np.zeros(n_h0), np.ones(n_h1)])
        return TrainingSet(feats, labels, dict(
            n_total=n_total, l_snapshots=l_snapshots, snr_db=snr_db,
            jitter_db=jitter_db, seed=seed))

    return factory


# --- roc -------------------------------------------------------------------

def train_mlnn_model(config: ExperimentConfig, workers=None):
    """Three-stage selection + final training per the [mlnn] settings."""
    n_total = int(config["array.n_total"])
    l_snap = int(config["scenario.n_snapshots"])
    snr_db = float(config["scenario.snr_db"])
    jitter = float(config["mlnn.snr_jitter_db"])
    factory = make_detection_dataset_factory(
        n_total, l_snap, snr_db, jitter, workers or config.workers)
    shapes = tuple(
        tuple(int(w) for w in shape.split(","))
        for shape in config["mlnn.shapes"].split("|") if shape.strip())
    hyper = Hyper(float(config["mlnn.learning_rate"]),
                  int(config["mlnn.batch_size"]),
                  int(config["mlnn.epochs"]), config.seed)
    model, report = select_architecture(
        _parse_list(config["mlnn.activations"], str), shapes, factory,
        config.seed, hyper, int(config["mlnn.search_size"]),
        float(config["mlnn.final_ratio"]))
    model.metadata = dict(model.metadata, operating_point=dict(
        n_total=n_total, l_snapshots=l_snap, snr_db=snr_db))
    return model, report


def run_roc(config: ExperimentConfig, model=None):
    """ROC CSV for GLRT, R-MaxEV-MinEV, and the MLNN on paired realizations."""
    n_total = int(config["array.n_total"])
    l_snap = int(config["scenario.n_snapshots"])
    snr_db = float(config["scenario.snr_db"])
    trials = config.trials
    if model is None:
        model, _ = train_mlnn_model(config)
    e0 = detection_eigs(n_total, l_snap, snr_db, 0, trials, config.seed,
                        config.workers)
    e1 = detection_eigs(n_total, l_snap, snr_db, 1, trials, config.seed,
                        config.workers, offset=trials)
    glrt_form = config["detect.glrt_form"]
    scores = {}
    for tag, eigs in (("h0", e0), ("h1", e1)):
        feats = eigs / eigs.sum(axis=1, keepdims=True)
        scores[tag] = {
            "glrt": np.array([glrt_statistic(e, glrt_form) for e in eigs]),
            "r-maxev-minev": np.array([maxmin_statistic(e) for e in eigs]),
            "mlnn": forward(model, feats),
        }
    rows = []
    for detector in ("glrt", "r-maxev-minev", "mlnn"):
        pts = roc_points(scores["h0"][detector], scores["h1"][detector])
        for fap, pd in pts:
            rows.append((fap, pd, detector, snr_db, n_total, l_snap,
                         trials, config.seed))
    path = os.path.join(config.out_dir, "roc.csv")
    _write_csv(path, ["fap", "pd", "detector", "snr_db", "n", "l",
                      "trials", "seed"], rows)
    return path, scores


# --- rmse ------------------------------------------------------------------

def _rmse_chunk(args):
    """Paired DOA errors (degrees) for one trial range, one SNR point.

    The classic and fast eliminators run on the HAD subsystem of the
    configured array; the two-layer estimator sees the full array.  All
    methods share the trial stream, so snapshot realizations are paired.
    """
    (cfg_tuple, theta_deg, snr_db, t_snap, signal_model, methods,
     seed, start, stop) = args
    cfg = ArrayConfig(*cfg_tuple)
    cfg_had = (ArrayConfig.pure_had(cfg.n_had, cfg.m_sub, cfg.spacing)
               if cfg.k_sub >= 1 else None)
    runners = {
        METHOD_CLASSIC: (had_root_music_classic, cfg_had, 1),
        METHOD_FHAD: (fhad_root_music, cfg_had, 1),
        METHOD_TLHAD: (tlhad_estimate, cfg, t_snap),
    }
    errors = {m: np.empty(stop - start) for m in methods}
    for i in range(start, stop):
        for m in methods:
            fn, mcfg, t = runners[m]
            scen = EmitterScenario.single_emitter(theta_deg, snr_db, t,
                                                  signal_model=signal_model)
            est = fn(mcfg, scen, trial_rng(seed, i))
            errors[m][i - start] = est.angle_deg - theta_deg
    return errors


def _run_rmse_point(config, cfg, theta_deg, snr_db, methods, seed):
    chunks = _chunk_ranges(config.trials, max(config.workers, 1) * 4)
    cfg_tuple = (cfg.n_total, cfg.m_sub, cfg.k_sub, cfg.n_fd, cfg.spacing)
    args = [(cfg_tuple, theta_deg, snr_db, int(config["scenario.t_snapshots"]),
             config["scenario.signal_model"], methods, seed, a, b)
            for a, b in chunks]
    parts = _map_chunks(_rmse_chunk, args, config.workers)
    return {m: float(np.sqrt(np.mean(np.concatenate([p[m] for p in parts]) ** 2)))
            for m in methods}


def run_rmse_snr(config: ExperimentConfig):
    """RMSE versus SNR for the three estimators, with CRLB benchmark columns."""
    cfg = config.array_config()
    theta = float(config["scenario.theta_deg"])
    t_snap = int(config["scenario.t_snapshots"])
    if not broadside_gain_ok(cfg, math.sin(math.radians(theta))):
        raise ConfigError(
            f"theta={theta} sits in a broadside analog null; pick another angle")
    cfg_had = ArrayConfig.pure_had(cfg.n_had, cfg.m_sub, cfg.spacing)
    methods = (METHOD_CLASSIC, METHOD_FHAD, METHOD_TLHAD)
    rows = []
    for snr_db in _parse_list(config["scenario.snr_db_list"]):
        rmse = _run_rmse_point(config, cfg, theta, snr_db, methods, config.seed)
        sqrt_crlb = {
            METHOD_CLASSIC: math.sqrt(
                crlb_had(cfg_had, theta, snr_db, 1) * RAD2_TO_DEG2),
            METHOD_FHAD: math.sqrt(
                crlb_had(cfg_had, theta, snr_db, 1) * RAD2_TO_DEG2),
            METHOD_TLHAD: math.sqrt(
                crlb_tlhad(cfg, theta, snr_db, t_snap) * RAD2_TO_DEG2),
        }
        for m in methods:
            rows.append((snr_db, m, rmse[m], sqrt_crlb[m], config.trials,
                         config.seed, config.digest))
    path = os.path.join(config.out_dir, "rmse_snr.csv")
    _write_csv(path, ["snr_db", "method", "rmse_deg", "sqrt_crlb_deg",
                      "trials", "seed", "digest"], rows)
    return path, rows


def run_rmse_eta(config: ExperimentConfig):
    """Two-layer RMSE and bound versus FD proportion, per SNR."""
    n_total = int(config["array.n_total"])
    m_sub = int(config["array.m_sub"])
    spacing = float(config["array.spacing"])
    theta = float(config["scenario.theta_deg"])
    t_snap = int(config["scenario.t_snapshots"])
    rows = []
    for eta in _parse_list(config["rmse.eta_grid"]):
        if not 0.0 < eta <= 1.0:
            raise ConfigError("eta grid values must lie in (0, 1]")
        cfg = ArrayConfig.two_layer(n_total, m_sub, eta, spacing)
        if abs(cfg.fd_proportion - eta) > 1e-9:
            print(f"warning: eta={eta} rounded down to {cfg.fd_proportion}")
        for snr_db in _parse_list(config["rmse.eta_snr_db_list"]):
            rmse = _run_rmse_point(config, cfg, theta, snr_db,
                                   (METHOD_TLHAD,), config.seed)
            bound = math.sqrt(crlb_tlhad(cfg, theta, snr_db, t_snap)
                              * RAD2_TO_DEG2)
            rows.append((cfg.fd_proportion, snr_db, rmse[METHOD_TLHAD], bound,
                         config.trials, config.seed, config.digest))
    path = os.path.join(config.out_dir, "rmse_eta.csv")
    _write_csv(path, ["eta", "snr_db", "rmse_deg", "sqrt_crlb_deg", "trials",
                      "seed", "digest"], rows)
    return path, rows


# --- quantization ----------------------------------------------------------

def _quant_rmse_chunk(args):
    (n_antennas, l_snap, theta_deg, snr_db, bits, seed, start, stop) = args
    cfg = ArrayConfig.fully_digital(n_antennas)
    q = QuantizerConfig.from_bits(bits) if bits != math.inf else None
    err_q = np.empty(stop - start)
    err_u = np.empty(stop - start)
    for i in range(start, stop):
        scen = EmitterScenario.single_emitter(theta_deg, snr_db, l_snap)
        batch = synthesize_snapshots(cfg, scen, trial_rng(seed, i))
        u_true = math.sin(math.radians(theta_deg))
        u_hat = root_music(sample_covariance(batch.samples), 1, cfg.spacing)[0]
        err_u[i - start] = u_hat - u_true
        qb = quantize(batch, q).samples if q is not None else batch.samples
        uq = root_music(sample_covariance(qb), 1, cfg.spacing)[0]
        err_q[i - start] = uq - u_true
    return err_q, err_u


def run_loss_bits(config: ExperimentConfig):
    """AQNM loss formula versus bits, with an empirical Root-MUSIC column."""
    bits_grid = [int(b) for b in _parse_list(config["quant.bits"], int)]
    n_ant = int(config["quant.n_antennas"])
    l_snap = int(config["quant.n_snapshots"])
    theta = float(config["scenario.theta_deg"])
    emp_trials = int(config["quant.empirical_trials"])
    rows = []
    for snr_db in _parse_list(config["quant.snr_db_list"]):
        for bits in [*bits_grid, math.inf]:
            loss_db = performance_loss_db(bits, snr_db)
            chunks = _chunk_ranges(emp_trials, max(config.workers, 1) * 2)
            args = [(n_ant, l_snap, theta, snr_db, bits, config.seed, a, b)
                    for a, b in chunks]
            parts = _map_chunks(_quant_rmse_chunk, args, config.workers)
            err_q = np.concatenate([p[0] for p in parts])
            err_u = np.concatenate([p[1] for p in parts])
            rmse_q = float(np.sqrt(np.mean(err_q ** 2)))
            rmse_u = float(np.sqrt(np.mean(err_u ** 2)))
            empirical_db = 20.0 * math.log10(rmse_q / rmse_u) if rmse_u > 0 else 0.0
            rows.append(("inf" if bits == math.inf else bits, snr_db, loss_db,
                         empirical_db, emp_trials, config.seed, config.digest))
    path = os.path.join(config.out_dir, "loss_bits.csv")
    _write_csv(path, ["bits", "snr_db", "loss_db_formula", "loss_db_empirical",
                      "trials", "seed", "digest"], rows)
    return path, rows


# --- mlnn training ---------------------------------------------------------

def run_train_mlnn(config: ExperimentConfig):
    """Architecture selection, final training, and threshold calibration."""
    model, report = train_mlnn_model(config)
    n_total = int(config["array.n_total"])
    l_snap = int(config["scenario.n_snapshots"])
    # threshold calibration on fresh H0 validation scores
    e0 = detection_eigs(n_total, l_snap, float(config["scenario.snr_db"]), 0,
                        config.trials, config.seed + 7, config.workers)
    feats = e0 / e0.sum(axis=1, keepdims=True)
    thresholds = {
        fap: decision_threshold(model, feats, fap) for fap in (0.01, 0.1)
    }
    model.metadata = dict(model.metadata, thresholds={
        str(fap): tau for fap, tau in thresholds.items()})
    os.makedirs(config.out_dir, exist_ok=True)
    model_path = os.path.join(config.out_dir, "mlnn_model.json")
    save_model(model, model_path)
    rows = [(r["stage"], r["activation"], ",".join(map(str, r["shape"])),
             r["val_loss"], r.get("dataset_size", ""), r.get("n_weights", ""),
             r.get("dataset_ratio", ""), config.seed, config.digest)
            for r in report]
    report_path = os.path.join(config.out_dir, "mlnn_report.csv")
    _write_csv(report_path, ["stage", "activation", "shape", "val_loss",
                             "dataset_size", "n_weights", "dataset_ratio",
                             "seed", "digest"], rows)
    return model_path, report_path, model


def run_experiment(config: ExperimentConfig, model_path=None):
    """Dispatch one experiment; returns the primary output path."""
    if config.experiment == "roc":
        model = load_model(model_path) if model_path else None
        return run_roc(config, model)[0]
    if config.experiment == "rmse-snr":
        return run_rmse_snr(config)[0]
    if config.experiment == "rmse-eta":
        return run_rmse_eta(config)[0]
    if config.experiment == "loss-bits":
        return run_loss_bits(config)[0]
    if config.experiment == "train-mlnn":
        return run_train_mlnn(config)[0]
    raise ConfigError(f"unknown experiment {config.experiment!r}")
