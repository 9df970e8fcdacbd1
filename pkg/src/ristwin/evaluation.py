"""Evaluation metrics, random baseline, size sweeps, stability curves.

Top-1/top-3 accuracy compare recommended codeword indices against the
oracle ranking; recovered achievable rate is the achieved-over-optimal rate
ratio averaged over test locations.  The random baseline draws codewords
uniformly, which bounds the gain any recommender must beat.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import streams
from .codebook import Codebook
from .dataset import Dataset, SampleSet, flatten, split
from .network import ModelConfig
from .surrogate import SurrogateModel, recommend_batch, train

# External benchmark trajectory (ray-traced study, N=256 codebook):
# recovered achievable rate vs training-location count.  Our synthetic
# channels are not numerically comparable; this is a qualitative reference
# reported alongside sweep results.
REFERENCE_TRAJECTORY = {100: 0.80, 200: 0.82, 500: 0.87, 1000: 0.88}


def _check_aligned(pred_indices, ds: Dataset):
    pred = np.asarray(pred_indices, dtype=np.int64)
    if pred.shape != (len(ds),):
        raise ValueError(f"got {pred.shape[0]} predictions for {len(ds)} records")
    return pred


def top1(pred_indices, ds: Dataset) -> float:
    """Fraction of locations whose recommendation equals the oracle optimum."""
    pred = _check_aligned(pred_indices, ds)
    return float(np.mean(pred == ds.opt))


def top3(pred_indices, ds: Dataset) -> float:
    """Fraction of locations whose recommendation lands in the oracle top 3."""
    pred = _check_aligned(pred_indices, ds)
    if ds.n_codewords < 3:
        warnings.warn(
            f"only {ds.n_codewords} codewords; top3 degrades to top-{ds.n_codewords}",
            stacklevel=2,
        )
    return float(np.mean(np.any(ds.top3 == pred[:, None], axis=1)))


def recovered_rate(pred_indices, ds: Dataset) -> float:
    value, _ = recovered_rate_detail(pred_indices, ds)
    return value


def recovered_rate_detail(pred_indices, ds: Dataset) -> tuple[float, int]:
    """Mean achieved/optimal rate ratio and the count of excluded dead zones.

    A location whose optimal rate is exactly zero has no meaningful ratio;
    such locations are dropped from the mean and counted.
    """
    pred = _check_aligned(pred_indices, ds)
    rows = np.arange(len(ds))
    achieved = ds.rates[rows, pred]
    optimal = ds.rates[rows, ds.opt]
    alive = optimal > 0
    excluded = int(np.sum(~alive))
    if excluded:
        warnings.warn(f"excluded {excluded} dead-zone locations (zero optimal rate)", stacklevel=2)
    if not np.any(alive):
        raise ValueError("every location is a dead zone; recovered rate undefined")
    return float(np.mean(achieved[alive] / optimal[alive])), excluded


def random_baseline(ds: Dataset, seed: int, trials: int = 100) -> dict:
    """Recovered rate of uniformly random codeword choices, averaged over trials."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng([seed, streams.BASELINE])
    rows = np.arange(len(ds))
    optimal = ds.rates[rows, ds.opt]
    alive = optimal > 0
    per_trial = np.empty(trials)
    for t in range(trials):
        idx = rng.integers(0, ds.n_codewords, size=len(ds))
        ratios = ds.rates[rows, idx][alive] / optimal[alive]
        per_trial[t] = ratios.mean()
    return {
        "recov_ar_avg": float(per_trial.mean()),
        "trials": trials,
        "spread": float(per_trial.max() - per_trial.min()),
    }


@dataclass(frozen=True)
class EvalReport:
    u_test: int
    top1_acc: float
    top3_acc: float
    recov_ar_avg: float
    mean_chosen_rate: float  # true rate under the recommended codeword
    mean_opt_rate: float
    baseline_recov: float
    excluded_dead_zones: int
    seeds: tuple[int, ...]

    def __post_init__(self):
        if not (0 <= self.top1_acc <= self.top3_acc <= 1):
            raise ValueError("accuracy bounds violated (top1 <= top3 required)")
        if not 0 <= self.recov_ar_avg <= 1 + 1e-12:
            raise ValueError("recovered rate must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "u_test": self.u_test,
            "top1_acc": self.top1_acc,
            "top3_acc": self.top3_acc,
            "recov_ar_avg": self.recov_ar_avg,
            "mean_chosen_rate": self.mean_chosen_rate,
            "mean_opt_rate": self.mean_opt_rate,
            "baseline_recov": self.baseline_recov,
            "excluded_dead_zones": self.excluded_dead_zones,
            "seeds": list(self.seeds),
        }


def evaluate(
    model: SurrogateModel,
    ds_test: Dataset,
    cb: Codebook,
    baseline_seed: int = 0,
    baseline_trials: int = 100,
) -> EvalReport:
    """Run the recommender over a test split and score it against the oracle."""
    pred = recommend_batch(model, ds_test.xy, ds_test.dvec, cb)
    recov, excluded = recovered_rate_detail(pred, ds_test)
    rows = np.arange(len(ds_test))
    baseline = random_baseline(ds_test, baseline_seed, baseline_trials)
    return EvalReport(
        u_test=len(ds_test),
        top1_acc=top1(pred, ds_test),
        top3_acc=top3(pred, ds_test),
        recov_ar_avg=recov,
        mean_chosen_rate=float(ds_test.rates[rows, pred].mean()),
        mean_opt_rate=float(ds_test.rates[rows, ds_test.opt].mean()),
        baseline_recov=baseline["recov_ar_avg"],
        excluded_dead_zones=excluded,
        seeds=(model.cfg.seed,),
    )


def _val_split_counts(size: int, val_frac: float) -> tuple[int, int]:
    n_val = max(1, round(size * val_frac))
    n_train = size - n_val
    if n_train < 1:
        raise ValueError(f"training budget {size} too small for a {val_frac:.0%} val split")
    return n_train, n_val


@dataclass
class SweepResult:
    sizes: list[int]
    seeds: list[int]
    rows: list[dict]

    def aggregate(self) -> dict:
        out = {}
        for size in self.sizes:
            recovs = [r["recov"] for r in self.rows if r["size"] == size]
            out[size] = {
                "recov_mean": float(np.mean(recovs)),
                "recov_min": float(np.min(recovs)),
                "recov_max": float(np.max(recovs)),
                "top1_mean": float(np.mean([r["top1"] for r in self.rows if r["size"] == size])),
                "top3_mean": float(np.mean([r["top3"] for r in self.rows if r["size"] == size])),
                "baseline_mean": float(
                    np.mean([r["baseline"] for r in self.rows if r["size"] == size])
                ),
            }
        return out

    def to_dict(self) -> dict:
        return {
            "sizes": self.sizes,
            "seeds": self.seeds,
            "rows": self.rows,
            "aggregate": {str(k): v for k, v in self.aggregate().items()},
            "reference_trajectory": {str(k): v for k, v in REFERENCE_TRAJECTORY.items()},
        }

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["size", "seed", "top1", "top3", "recov", "baseline"])
            for r in self.rows:
                w.writerow(
                    [
                        r["size"],
                        r["seed"],
                        repr(r["top1"]),
                        repr(r["top3"]),
                        repr(r["recov"]),
                        repr(r["baseline"]),
                    ]
                )


def sweep(
    ds: Dataset,
    cb: Codebook,
    sizes,
    seeds,
    cfg: ModelConfig,
    val_frac: float = 0.1,
    baseline_trials: int = 100,
    log=None,
) -> SweepResult:
    """Train/evaluate at each (training size, seed) on location-level splits.

    Each point trains from scratch on `size` locations (10% of the budget
    held out for early stopping) and evaluates on every remaining location.
    Rows come out sorted by (size, seed), so reruns are byte-comparable.
    """
    rows = []
    for size in sorted(sizes):
        n_train, n_val = _val_split_counts(size, val_frac)
        for seed in seeds:
            ds_train, ds_val, ds_test = split(ds, n_train, n_val, seed)
            if len(ds_test) == 0:
                raise ValueError(f"size {size} leaves no test locations")
            run_cfg = ModelConfig.from_dict({**cfg.to_dict(), "seed": seed})
            model, report = train(flatten(ds_train, cb), flatten(ds_val, cb), run_cfg)
            ev = evaluate(model, ds_test, cb, baseline_seed=seed, baseline_trials=baseline_trials)
            row = {
                "size": size,
                "seed": seed,
                "top1": ev.top1_acc,
                "top3": ev.top3_acc,
                "recov": ev.recov_ar_avg,
                "baseline": ev.baseline_recov,
                "mean_chosen_rate": ev.mean_chosen_rate,
                "mean_opt_rate": ev.mean_opt_rate,
                "u_test": ev.u_test,
                "stopping_epoch": report.stopping_epoch,
                "best_epoch": report.best_epoch,
            }
            rows.append(row)
            if log is not None:
                log(row)
    return SweepResult(sizes=sorted(sizes), seeds=list(seeds), rows=rows)


def stability_curve(
    model: SurrogateModel,
    ds_test: Dataset,
    cb: Codebook,
    fractions=(0.25, 0.5, 0.75, 1.0),
    seed: int = 0,
) -> dict:
    """Recovered rate over nested test subsets of one trained model.

    Subsets are prefixes of a single shuffled order, so each smaller subset
    is contained in every larger one; the spread across fractions measures
    how stable the metric is in test-set size.
    """
    pred = recommend_batch(model, ds_test.xy, ds_test.dvec, cb)
    order = np.random.default_rng([seed, streams.STABILITY]).permutation(len(ds_test))
    rows = []
    for f in fractions:
        if not 0 < f <= 1:
            raise ValueError("fractions must lie in (0, 1]")
        take = order[: max(1, int(np.ceil(f * len(ds_test))))]
        sub = ds_test.take(np.sort(take), f"subset_{f}")
        rows.append(
            {"fraction": f, "n": len(sub), "recov": recovered_rate(pred[np.sort(take)], sub)}
        )
    recovs = [r["recov"] for r in rows]
    return {"rows": rows, "spread": float(max(recovs) - min(recovs))}
