"""Command-line pipeline driver.

Subcommands: scenario, dataset, train, eval, sweep, report, verify.  One
JSON config document defines a run; flags and RISTWIN_* environment
variables override individual keys.  Artifacts land in the output
directory with a manifest of content hashes, and reruns with the same
config are byte-identical, so `verify` can prove an output tree is intact.

Thread control happens before numpy loads, which is why the heavyweight
imports hide inside the command functions.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

ENV_PREFIX = "RISTWIN_"

ARTIFACT_PATTERNS = ("*.json", "*.bin", "*.csv", "*.md")


class CliError(Exception):
    """User-facing failure; maps to exit code 2."""


def _parse_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw  # bare strings allowed without quotes


def _set_dotted(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            node[k] = {}
        node = node[k]
    node[keys[-1]] = value


def _env_overrides(cfg: dict, environ) -> None:
    # RISTWIN_MODEL__MAX_EPOCHS=50 sets model.max_epochs; values parse as JSON
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        dotted = name[len(ENV_PREFIX) :].lower().replace("__", ".")
        _set_dotted(cfg, dotted, _parse_value(raw))


def load_config(args) -> dict:
    from .defaults import default_config

    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise CliError(f"config file not found: {path}")
        with open(path) as f:
            try:
                cfg = json.load(f)
            except json.JSONDecodeError as e:
                raise CliError(f"config is not valid JSON: {e}") from None
    else:
        cfg = default_config()
    _env_overrides(cfg, os.environ)
    for item in args.set or []:
        if "=" not in item:
            raise CliError(f"--set expects key.path=value, got '{item}'")
        dotted, raw = item.split("=", 1)
        _set_dotted(cfg, dotted, _parse_value(raw))
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out is not None:
        cfg["out_dir"] = args.out
    if args.threads is not None:
        cfg["threads"] = args.threads
    for key in ("seed", "out_dir", "scenario", "model"):
        if key not in cfg:
            raise CliError(f"config missing required field '{key}'")
    return cfg


def config_digest(cfg: dict) -> str:
    # out_dir and threads change where/how a run executes, not what it
    # computes, so the digest ignores them: relocated reruns stay comparable
    from .artifacts import sha256_bytes

    core = {k: v for k, v in cfg.items() if k not in ("out_dir", "threads")}
    return sha256_bytes(json.dumps(core, sort_keys=True, separators=(",", ":")).encode())


def _scenario_from(cfg: dict):
    from .geometry import SCENARIO_SCHEMA_VERSION, Scenario

    block = dict(cfg["scenario"])
    block.setdefault("schema_version", SCENARIO_SCHEMA_VERSION)
    block.setdefault("seed", cfg["seed"])
    try:
        return Scenario.from_dict(block)
    except (ValueError, TypeError) as e:
        raise CliError(f"invalid scenario config: {e}") from None


def _channel_params(cfg: dict, scenario):
    from .channel import ChannelParams

    ch = cfg.get("channel", {})
    return ChannelParams.for_scenario(
        scenario,
        m_clusters=ch.get("m_clusters", 5),
        n_taps=ch.get("n_taps"),
        path_loss=ch.get("path_loss", 1.0),
    )


def _codebook_from(cfg: dict, scenario):
    from .codebook import dft_codebook, quantize_phases

    cb = dft_codebook(scenario.ris.n1, scenario.ris.n2)
    bits = cfg.get("codebook", {}).get("quant_bits")
    return quantize_phases(cb, bits) if bits else cb


def _model_config(cfg: dict, seed=None):
    from .network import ModelConfig

    block = dict(cfg["model"])
    block["seed"] = cfg["seed"] if seed is None else seed
    try:
        return ModelConfig.from_dict(block)
    except (ValueError, TypeError) as e:
        raise CliError(f"invalid model config: {e}") from None


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(out: Path, cfg: dict) -> None:
    from .artifacts import write_json

    write_json(out / "run_meta.json", {"config_hash": config_digest(cfg), "seed": cfg["seed"]})


def _refresh_manifest(out: Path) -> None:
    from .artifacts import manifest_for_dir, write_manifest

    write_manifest(out, manifest_for_dir(out, ARTIFACT_PATTERNS))


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise CliError(f"missing {path.name} in {path.parent} ({hint})")
    return path


def cmd_scenario(cfg: dict) -> None:
    from .artifacts import RunLock, write_json

    scenario = _scenario_from(cfg)
    out = _out_dir(cfg)
    with RunLock(out):
        write_json(out / "scenario.json", scenario.to_dict())
        _write_meta(out, cfg)
        _refresh_manifest(out)
    print(f"scenario written: {out / 'scenario.json'} (hash {scenario.hash()[:12]})")


def cmd_dataset(cfg: dict) -> None:
    from .artifacts import RunLock
    from .dataset import build

    scenario = _scenario_from(cfg)
    params = _channel_params(cfg, scenario)
    cb = _codebook_from(cfg, scenario)
    out = _out_dir(cfg)
    with RunLock(out):
        ds = build(
            scenario,
            params,
            cb,
            n_scatterers=cfg.get("channel", {}).get("n_scatterers", 32),
            feature_mode=cfg.get("features", {}).get("mode", "per_element"),
            config_hash=config_digest(cfg),
        )
        ds.save(out / "dataset.bin")
        _write_meta(out, cfg)
        _refresh_manifest(out)
    print(f"dataset written: {out / 'dataset.bin'} ({len(ds)} locations, N={ds.n_codewords})")


def _load_dataset(out: Path):
    from .dataset import Dataset

    return Dataset.load(_require(out / "dataset.bin", "run the dataset command first"))


def _train_split(cfg: dict, ds):
    from .dataset import split

    tr_cfg = cfg.get("train", {})
    size = tr_cfg.get("size", 500)
    val_frac = tr_cfg.get("val_frac", 0.1)
    n_val = max(1, round(size * val_frac))
    n_train = size - n_val
    if n_train < 1:
        raise CliError(f"train.size {size} too small for val_frac {val_frac}")
    return split(ds, n_train, n_val, tr_cfg.get("split_seed", cfg["seed"]))


def cmd_train(cfg: dict) -> None:
    from .artifacts import RunLock, write_json
    from .dataset import flatten
    from .surrogate import save_model, train

    out = _out_dir(cfg)
    ds = _load_dataset(out)
    scenario = _scenario_from(cfg)
    cb = _codebook_from(cfg, scenario)
    ds_train, ds_val, _ = _train_split(cfg, ds)
    with RunLock(out):
        model, report = train(flatten(ds_train, cb), flatten(ds_val, cb), _model_config(cfg))
        save_model(model, out / "model.bin")
        write_json(
            out / "train_report.json",
            {
                "config_hash": config_digest(cfg),
                "seed": cfg["seed"],
                "n_train_locations": len(ds_train),
                "n_val_locations": len(ds_val),
                **report.to_dict(),
            },
        )
        _write_meta(out, cfg)
        _refresh_manifest(out)
    print(
        f"model written: {out / 'model.bin'} "
        f"(stopped epoch {report.stopping_epoch}, best val MSE {report.best_val_mse:.6g})"
    )


def cmd_eval(cfg: dict) -> None:
    from .artifacts import RunLock, write_json
    from .evaluation import evaluate, stability_curve
    from .surrogate import load_model

    out = _out_dir(cfg)
    ds = _load_dataset(out)
    model = load_model(_require(out / "model.bin", "run the train command first"))
    scenario = _scenario_from(cfg)
    cb = _codebook_from(cfg, scenario)
    _, _, ds_test = _train_split(cfg, ds)
    if len(ds_test) == 0:
        raise CliError("train split leaves no test locations to evaluate")
    ev_cfg = cfg.get("eval", {})
    report = evaluate(
        model,
        ds_test,
        cb,
        baseline_seed=cfg["seed"],
        baseline_trials=ev_cfg.get("baseline_trials", 100),
    )
    stability = stability_curve(
        model,
        ds_test,
        cb,
        fractions=tuple(ev_cfg.get("stability_fractions", (0.25, 0.5, 0.75, 1.0))),
        seed=cfg["seed"],
    )
    with RunLock(out):
        write_json(
            out / "eval_report.json",
            {
                "config_hash": config_digest(cfg),
                "seed": cfg["seed"],
                **report.to_dict(),
                "stability": stability,
            },
        )
        _write_meta(out, cfg)
        _refresh_manifest(out)
    print(
        f"eval written: {out / 'eval_report.json'} "
        f"(recov {report.recov_ar_avg:.4f}, top1 {report.top1_acc:.4f}, "
        f"baseline {report.baseline_recov:.4f})"
    )


def cmd_sweep(cfg: dict) -> None:
    from .artifacts import RunLock, write_json
    from .evaluation import sweep

    out = _out_dir(cfg)
    ds = _load_dataset(out)
    scenario = _scenario_from(cfg)
    cb = _codebook_from(cfg, scenario)
    sw = cfg.get("sweep", {})
    result = sweep(
        ds,
        cb,
        sizes=sw.get("sizes", [50, 100, 250, 500]),
        seeds=sw.get("seeds", [0, 1, 2]),
        cfg=_model_config(cfg),
        val_frac=sw.get("val_frac", 0.1),
        baseline_trials=cfg.get("eval", {}).get("baseline_trials", 100),
        log=lambda row: print(
            f"  size={row['size']} seed={row['seed']} "
            f"recov={row['recov']:.4f} baseline={row['baseline']:.4f}"
        ),
    )
    with RunLock(out):
        write_json(
            out / "sweep.json",
            {"config_hash": config_digest(cfg), "seed": cfg["seed"], **result.to_dict()},
        )
        result.to_csv(out / "sweep.csv")
        _write_meta(out, cfg)
        _refresh_manifest(out)
    print(f"sweep written: {out / 'sweep.json'}")


def cmd_report(cfg: dict) -> None:
    from .artifacts import RunLock, atomic_write_text

    out = _out_dir(cfg)
    # identify the run by its config digest, not its directory: relocated
    # reruns of one config must produce byte-identical reports
    lines = [f"# Run report ({config_digest(cfg)[:12]})", ""]
    scenario_path = out / "scenario.json"
    if scenario_path.exists():
        with open(scenario_path) as f:
            sc = json.load(f)
        ris = sc["ris"]
        lines += [
            "## Scenario",
            f"- panel {ris['n1']}x{ris['n2']}, spacing {ris['spacing_wavelengths']} wavelengths",
            f"- grid {sc['rx_grid']['rows']}x{sc['rx_grid']['cols']} at {sc['rx_grid']['pitch_m']} m pitch",
            f"- carrier {sc['carrier_freq_hz']:.3g} Hz, {sc['n_subcarriers']} subcarriers",
            f"- seed {sc['seed']}",
            "",
        ]
    for name, title in [
        ("train_report.json", "Training"),
        ("eval_report.json", "Evaluation"),
        ("sweep.json", "Sweep"),
    ]:
        path = out / name
        if not path.exists():
            continue
        with open(path) as f:
            data = json.load(f)
        lines.append(f"## {title}")
        if name == "train_report.json":
            lines += [
                f"- stopped at epoch {data['stopping_epoch']} (best epoch {data['best_epoch']})",
                f"- best val MSE {data['best_val_mse']:.6g}",
            ]
        elif name == "eval_report.json":
            lines += [
                f"- test locations: {data['u_test']}",
                f"- top1 {data['top1_acc']:.4f}, top3 {data['top3_acc']:.4f}",
                f"- recovered rate {data['recov_ar_avg']:.4f} vs random baseline {data['baseline_recov']:.4f}",
                f"- stability spread {data['stability']['spread']:.4f}",
            ]
        else:
            lines.append("| size | recov (mean) | baseline | reference |")
            lines.append("| --- | --- | --- | --- |")
            ref = data.get("reference_trajectory", {})
            for size, agg in sorted(data["aggregate"].items(), key=lambda kv: int(kv[0])):
                lines.append(
                    f"| {size} | {agg['recov_mean']:.4f} | {agg['baseline_mean']:.4f} "
                    f"| {ref.get(size, 'n/a')} |"
                )
        lines.append("")
    text = "\n".join(lines)
    with RunLock(out):
        atomic_write_text(out / "report.md", text)
        _refresh_manifest(out)
    print(text)


def cmd_verify(cfg: dict) -> int:
    from .artifacts import read_json, sha256_file

    out = Path(cfg["out_dir"])
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise CliError(f"no manifest.json in {out}")
    entries = read_json(manifest_path)["files"]
    bad = []
    for name, digest in sorted(entries.items()):
        path = out / name
        if not path.exists():
            bad.append(f"{name}: missing")
        elif sha256_file(path) != digest:
            bad.append(f"{name}: hash mismatch")
    if bad:
        for line in bad:
            print(f"verify FAIL {line}", file=sys.stderr)
        return 1
    print(f"verify OK: {len(entries)} artifacts match their manifest hashes")
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (defaults to the built-in desk scenario)")
    common.add_argument("--seed", type=int, help="override the global seed")
    common.add_argument("--out", help="override the output directory")
    common.add_argument(
        "--threads", type=int, help="BLAS thread cap (default 1; reruns are stable per thread count)"
    )
    common.add_argument(
        "--set",
        action="append",
        metavar="KEY.PATH=VALUE",
        help="override one config key (JSON value), repeatable",
    )
    parser = argparse.ArgumentParser(
        prog="ristwin",
        description="Reflection-codeword recommendation pipeline: simulate, label, train, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, doc in [
        ("scenario", cmd_scenario, "validate the scenario and write scenario.json"),
        ("dataset", cmd_dataset, "label every grid location with oracle rates"),
        ("train", cmd_train, "train the surrogate on the configured split"),
        ("eval", cmd_eval, "score the trained model on held-out locations"),
        ("sweep", cmd_sweep, "training-set size sweep over multiple seeds"),
        ("report", cmd_report, "summarize artifacts into report.md"),
        ("verify", cmd_verify, "re-check manifest hashes of an output tree"),
    ]:
        p = sub.add_parser(name, parents=[common], help=doc)
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads if args.threads is not None else 1
    for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(threads)
    try:
        cfg = load_config(args)
        rc = args.fn(cfg)
        return int(rc or 0)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: missing file: {e.filename}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
