"""Command-line front end.

Options come from three layers, later ones winning: built-in defaults, an
optional ``--config`` file of flat ``key=value`` lines (keys are flag names
without the leading dashes), and the command-line flags themselves.
"""

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .aggregation import AGGREGATORS, AggregatorConfig
from .errors import ConfigError, FliowaError
from .federation import (
    DataConfig,
    FederationConfig,
    RoundMetrics,
    ScenarioResult,
    prepare_data,
    run_scenario,
)


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    adversarial_fraction: float
    client_options: tuple = (20, 50)


PRESETS = {
    "ad": ScenarioPreset("AD", 0.10),
    "non-ad": ScenarioPreset("NON-AD", 0.0),
    "high-ad": ScenarioPreset("HIGH-AD", 0.30),
}

CSV_COLUMNS = (
    "run",
    "round",
    "aggregator",
    "global_accuracy",
    "c_used",
    "n_discarded",
    "adversarial_discarded",
    "benign_discarded",
    "weights_json",
)

DEFAULTS = {
    "scenario": "ad",
    "clients": 20,
    "rounds": 10,
    "epochs": 5,
    "runs": 10,
    "aggregator": ["iowa-dq"],
    "yb": 0.75,
    "a": 0.0,
    "b": 0.2,
    "c": None,
    "wfedavg_mode": "normalized",
    "poison_mode": "shuffle",
    "adversarial_fraction": None,
    "dataset": "synthetic",
    "idx_images": None,
    "idx_labels": None,
    "labels_per_client": FederationConfig.labels_per_client,
    "seed": 0,
    "output": None,
    "format": "csv",
    "learning_rate": FederationConfig.learning_rate,
    "batch_size": FederationConfig.batch_size,
    "hidden": "",
    "dim": DataConfig.dim,
    "num_classes": DataConfig.num_classes,
    "samples_per_class": DataConfig.samples_per_class,
    "spread": DataConfig.spread,
    "workers": 1,
    "verbose": False,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _fraction(text):
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} outside [0, 1]")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return value


def _non_negative(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"{text} must be >= 0")
    return value


def build_parser():
    p = _Parser(prog="fliowa", description="Simulate federated learning with IOWA-based aggregation.")
    # SUPPRESS keeps unset flags out of the namespace so layering works
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="flat key=value file mirroring flag names")
    p.add_argument("--scenario", choices=sorted(PRESETS), default=S)
    p.add_argument("--clients", type=_positive, default=S)
    p.add_argument("--rounds", type=_positive, default=S)
    p.add_argument("--epochs", type=_positive, default=S)
    p.add_argument("--runs", type=_positive, default=S)
    p.add_argument("--aggregator", choices=AGGREGATORS, action="append", default=S,
                   help="repeat to compare several operators in one file")
    p.add_argument("--yb", type=_fraction, default=S)
    p.add_argument("--a", type=_fraction, default=S)
    p.add_argument("--b", type=_fraction, default=S)
    p.add_argument("--c", type=_fraction, default=S, help="static IOWA-SQ only")
    p.add_argument("--wfedavg-mode", choices=("as-written", "normalized"), default=S)
    p.add_argument("--poison-mode", choices=("shuffle", "class-map"), default=S)
    p.add_argument("--adversarial-fraction", type=_fraction, default=S)
    p.add_argument("--dataset", choices=("synthetic", "idx"), default=S)
    p.add_argument("--idx-images", default=S)
    p.add_argument("--idx-labels", default=S)
    p.add_argument("--labels-per-client", type=_positive, default=S)
    p.add_argument("--seed", type=_non_negative, default=S)
    p.add_argument("--output", default=S)
    p.add_argument("--format", choices=("csv", "json"), default=S)
    p.add_argument("--learning-rate", type=float, default=S)
    p.add_argument("--batch-size", type=_positive, default=S)
    p.add_argument("--hidden", default=S, help="comma-separated hidden layer widths; empty for softmax regression")
    p.add_argument("--dim", type=_positive, default=S)
    p.add_argument("--num-classes", type=_positive, default=S)
    p.add_argument("--samples-per-class", type=_positive, default=S)
    p.add_argument("--spread", type=float, default=S)
    p.add_argument("--workers", type=_positive, default=S)
    p.add_argument("--verbose", action="store_true", default=S)
    return p


def read_config_file(path, parser=None):
    """Turn a ``key=value`` file into an argv list for ``parser``."""
    parser = parser or build_parser()
    known = {a.dest: a for a in parser._actions if a.dest not in ("help", "config")}
    argv = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        dest = key.lstrip("-").replace("-", "_")
        if dest not in known:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        flag = "--" + dest.replace("_", "-")
        action = known[dest]
        if isinstance(action, argparse._StoreTrueAction):
            if value.lower() in ("1", "true", "yes", "on"):
                argv.append(flag)
            elif value.lower() not in ("0", "false", "no", "off"):
                raise ConfigError(f"{path}:{lineno}: {key} expects a boolean, got {value!r}")
        elif isinstance(action, argparse._AppendAction):
            for item in value.split(","):
                argv += [flag, item.strip()]
        else:
            argv += [flag, value]
    return argv


def parse_options(argv=None):
    """Merge defaults, config file and flags into one dict."""
    parser = build_parser()
    flags = vars(parser.parse_args(argv))
    merged = dict(DEFAULTS)
    if "config" in flags:
        merged.update(vars(parser.parse_args(read_config_file(flags.pop("config"), parser))))
    merged.update(flags)
    return merged


def _hidden_dims(text):
    text = str(text or "").strip()
    if not text:
        return ()
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise ConfigError(f"bad --hidden value {text!r}") from exc


def build_configs(opts):
    """One FederationConfig per requested aggregator."""
    preset = PRESETS[opts["scenario"]]
    fraction = preset.adversarial_fraction if opts["adversarial_fraction"] is None else opts["adversarial_fraction"]
    names = list(dict.fromkeys(opts["aggregator"]))
    if opts["c"] is not None and "iowa-sq" not in names:
        raise ConfigError("--c only applies to the static iowa-sq aggregator")
    if opts["dataset"] == "idx" and not (opts["idx_images"] and opts["idx_labels"]):
        raise ConfigError("--dataset idx requires --idx-images and --idx-labels")
    data = DataConfig(
        source=opts["dataset"],
        num_classes=opts["num_classes"],
        dim=opts["dim"],
        samples_per_class=opts["samples_per_class"],
        spread=opts["spread"],
        idx_images=opts["idx_images"],
        idx_labels=opts["idx_labels"],
        poison_mode=opts["poison_mode"],
    )
    out = []
    for name in names:
        agg = AggregatorConfig(
            name=name,
            a=opts["a"],
            b=opts["b"],
            c=0.8 if opts["c"] is None else opts["c"],
            y_b=opts["yb"],
            wfedavg_mode=opts["wfedavg_mode"],
        )
        out.append(
            FederationConfig(
                n_clients=opts["clients"],
                rounds=opts["rounds"],
                epochs_per_round=opts["epochs"],
                adversarial_fraction=fraction,
                aggregator=agg,
                hidden_dims=_hidden_dims(opts["hidden"]),
                batch_size=opts["batch_size"],
                learning_rate=opts["learning_rate"],
                labels_per_client=opts["labels_per_client"],
                master_seed=opts["seed"],
                data=data,
                workers=opts["workers"],
            )
        )
    return out


def parse_config(argv=None):
    """Resolve flags (and an optional config file) into FederationConfigs.

    Returns ``(configs, options)``; ``configs`` holds one entry per
    ``--aggregator``.
    """
    opts = parse_options(argv)
    try:
        configs = build_configs(opts)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return configs, opts


def format_options(opts):
    """Effective options in config-file syntax (re-loadable with --config)."""
    lines = []
    for key in sorted(opts):
        value = opts[key]
        if value is None or key in ("output",):
            continue
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key.replace('_', '-')}={value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# metrics persistence
# ---------------------------------------------------------------------------


def _num(x):
    return "" if x is None else repr(float(x))


def metrics_to_csv(results):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for res in results:
        for run, series in enumerate(res.series):
            for m in series:
                writer.writerow([
                    run,
                    m.round_index,
                    res.label,
                    _num(m.global_accuracy),
                    _num(m.c_used),
                    len(m.discarded_ids),
                    m.adversarial_discarded,
                    m.benign_discarded,
                    json.dumps([float(w) for w in m.weights]),
                ])
    for res in results:
        final_round = res.series[0][-1].round_index if res.series else ""
        writer.writerow(["mean", final_round, res.label, _num(np.mean(res.final_accuracies)), "", "", "", "", ""])
    return buf.getvalue()


def _metrics_dict(m):
    return {
        "round_index": m.round_index,
        "global_accuracy": m.global_accuracy,
        "per_client_accuracy": [float(a) for a in m.per_client_accuracy],
        "c_used": m.c_used,
        "b_effective": m.b_effective,
        "weights": [float(w) for w in m.weights],
        "discarded_ids": sorted(int(i) for i in m.discarded_ids),
        "adversarial_discarded": m.adversarial_discarded,
        "benign_discarded": m.benign_discarded,
    }


def metrics_to_json(results):
    payload = {
        "results": [
            {
                "aggregator": res.label,
                "adversarial_ids": [sorted(int(i) for i in adv) for adv in res.adversarial_ids],
                "mean_accuracy": [float(a) for a in res.mean_accuracy],
                "series": [[_metrics_dict(m) for m in series] for series in res.series],
            }
            for res in results
        ]
    }
    return json.dumps(payload, indent=1) + "\n"


def metrics_from_json(text):
    payload = json.loads(text)
    out = []
    for item in payload["results"]:
        series = [
            [
                RoundMetrics(
                    round_index=d["round_index"],
                    global_accuracy=d["global_accuracy"],
                    per_client_accuracy=d["per_client_accuracy"],
                    c_used=d["c_used"],
                    weights=d["weights"],
                    discarded_ids=frozenset(d["discarded_ids"]),
                    adversarial_discarded=d["adversarial_discarded"],
                    benign_discarded=d["benign_discarded"],
                    b_effective=d["b_effective"],
                )
                for d in run
            ]
            for run in item["series"]
        ]
        out.append(
            ScenarioResult(
                label=item["aggregator"],
                series=series,
                adversarial_ids=[frozenset(a) for a in item["adversarial_ids"]],
                mean_accuracy=np.array(item["mean_accuracy"]),
            )
        )
    return out


def emit_metrics(results, destination, fmt="csv"):
    """Write scenario results as CSV or JSON; ``destination`` None means stdout."""
    if fmt == "csv":
        text = metrics_to_csv(results)
    elif fmt == "json":
        text = metrics_to_json(results)
    else:
        raise ValueError(f"unknown metrics format {fmt!r}")
    if destination is None or str(destination) == "-":
        sys.stdout.write(text)
        return
    # newline="" so the file bytes do not depend on the platform
    with open(destination, "w", newline="") as fh:
        fh.write(text)


def load_metrics(path):
    return metrics_from_json(Path(path).read_text())


def main(argv=None):
    try:
        configs, opts = parse_config(argv)
        logging.basicConfig(level=logging.DEBUG if opts["verbose"] else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        to_stdout = opts["output"] in (None, "-")
        (sys.stderr if to_stdout else sys.stdout).write(format_options(opts))
        prepared = prepare_data(configs[0])
        results = [run_scenario(cfg, opts["runs"], prepared) for cfg in configs]
        emit_metrics(results, opts["output"], opts["format"])
    except (FliowaError, ValueError) as exc:
        print(f"fliowa: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"fliowa: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
