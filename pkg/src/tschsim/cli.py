"""Command line entry point: config parsing, experiment presets and CSV output."""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .engine import ConfigError, SimulationConfig, run_simulation
from .schedulers import POLICY_KINDS
from .topology import CatalogOverflow, TopologyError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_UNKNOWN_KEY = 4
EXIT_BAD_VALUE = 5
EXIT_CATALOG_OVERFLOW = 6

CSV_HEADER = ("experiment", "policy", "replication_count", "sweep_param", "sweep_value",
              "cycle", "overall_throughput", "avg_throughput", "cumulative_regret", "avg_regret")

SEED_ENV = "TSCHSIM_SEED"


class UnknownConfigKey(ConfigError):
    pass


def _area(text):
    parts = text.replace("x", ",").split(",")
    vals = [float(p) for p in parts if p.strip()]
    if len(vals) == 1:
        vals = vals * 2
    if len(vals) != 2:
        raise ValueError(f"area must be W or WxH, got {text!r}")
    return tuple(vals)


def _policies(text):
    text = text.strip()
    if text == "all":
        return POLICY_KINDS
    names = tuple(p.strip() for p in text.split(",") if p.strip())
    for p in names:
        if p not in POLICY_KINDS:
            raise ValueError(f"unknown policy {p!r}; choose from all, {', '.join(POLICY_KINDS)}")
    return names


def _optional_float(text):
    return None if text.strip().lower() in ("", "none", "default") else float(text)


# config key -> (SimulationConfig field, parser)
CONFIG_KEYS = {
    "nodes": ("n_nodes", int),
    "slots": ("n_slots", int),
    "channels": ("n_channels", int),
    "cycles": ("n_cycles", int),
    "replications": ("n_replications", int),
    "seed": ("seed", int),
    "policy": ("policies", _policies),
    "area": ("area", _area),
    "comm_range": ("comm_range", float),
    "interference_range": ("interference_range", float),
    "power": ("power_mw", float),
    "beta_n0": ("beta_n0", float),
    "packet_bits": ("packet_bits", float),
    "beta": ("beta", _optional_float),
    "slot_ms": ("slot_ms", float),
    "error_sigma": ("error_sigma", _optional_float),
    "exploration": ("exploration", _optional_float),
    "catalog_cap": ("catalog_cap", int),
    "topology": ("topology_path", str),
    "distributions": ("distributions_path", str),
}
RUN_KEYS = ("preset", "out")


def read_settings(path, overrides=None):
    """Raw ``key -> text`` settings from a key=value file, then ``overrides``."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    settings = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS and key not in RUN_KEYS:
            raise UnknownConfigKey(f"{path}:{lineno}: unknown key {key!r}")
        settings[key] = value
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in CONFIG_KEYS and key not in RUN_KEYS:
            raise UnknownConfigKey(f"unknown key {key!r}")
        settings[key] = str(value)
    return settings


def build_config(settings, base=None):
    changes = {}
    for key, text in settings.items():
        if key in RUN_KEYS:
            continue
        name, parse = CONFIG_KEYS[key]
        try:
            changes[name] = parse(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from None
    base = base or SimulationConfig()
    return base.with_(**changes)


def parse_config(path, overrides=None):
    """Validated :class:`SimulationConfig`: defaults, then the file, then ``overrides``."""
    return build_config(read_settings(path, overrides))


@dataclass
class ExperimentPreset:
    name: str
    sweep_param: str | None = None
    sweep_values: tuple = ()
    policies: tuple | None = None
    fixtures: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(b <= a for a, b in zip(self.sweep_values, self.sweep_values[1:])):
            raise ValueError("sweep values must be strictly increasing")


PRESETS = {
    "convergence": ExperimentPreset("convergence"),
    "regret": ExperimentPreset("regret", policies=("cmab_llr",)),
    "node_sweep": ExperimentPreset("node_sweep", "nodes", tuple(range(10, 101, 10))),
    "channel_sweep": ExperimentPreset("channel_sweep", "channels", (1, 2, 3, 4, 5),
                                      fixtures={"nodes": "35", "slots": "8"}),
    "slot_sweep": ExperimentPreset("slot_sweep", "slots", tuple(range(2, 11)),
                                   fixtures={"nodes": "10", "channels": "3"}),
    "fairness": ExperimentPreset("fairness", policies=("statistical", "cmab_llr"),
                                 fixtures={"nodes": "5", "area": "20x20"}),
}


def _fmt(x):
    return "" if x is None else repr(float(x))


def _series_rows(experiment, policy, reps, series, sweep_param="", sweep_value=None, last_only=False):
    a = series.arrays()
    idx = [len(series) - 1] if last_only else range(len(series))
    for i in idx:
        yield [experiment, policy, str(reps), sweep_param,
               "" if sweep_value is None else str(sweep_value), str(int(a["cycle"][i])),
               _fmt(a["overall_throughput"][i]), _fmt(a["avg_throughput"][i]),
               _fmt(a["cumulative_regret"][i]), _fmt(a["avg_regret"][i])]


def preset_rows(preset, config):
    """Yield CSV rows for ``preset`` run on ``config``."""
    R = config.n_replications
    if preset.sweep_param:
        field_name, parse = CONFIG_KEYS[preset.sweep_param]
        for value in preset.sweep_values:
            res = run_simulation(config.with_(**{field_name: parse(str(value))}))
            for policy, s in res.series.items():
                yield from _series_rows(preset.name, policy, R, s, preset.sweep_param, value,
                                        last_only=True)
    elif preset.name == "fairness":
        res = run_simulation(config)
        for policy, s in res.series.items():
            for link, rate in enumerate(s.link_throughput):
                yield [preset.name, policy, str(R), "link", str(link), str(config.n_cycles),
                       "", _fmt(rate), "", ""]
    else:
        res = run_simulation(config)
        for policy, s in res.series.items():
            yield from _series_rows(preset.name, policy, R, s)


def run_preset(preset, config, out):
    """Write the preset's CSV to ``out``; nothing is left behind on failure."""
    if isinstance(preset, str):
        preset = PRESETS[preset]
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{out.name}.", suffix=".part", dir=out.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for row in preset_rows(preset, config):
                w.writerow(row)
        os.replace(tmp, out)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return out


def read_csv(path):
    """Parse an emitted CSV back into dicts; numeric fields become floats, empty ones None."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for r in reader:
            out = {}
            for k, v in r.items():
                if k in ("experiment", "policy", "sweep_param"):
                    out[k] = v
                elif v == "":
                    out[k] = None
                elif k in ("replication_count", "cycle"):
                    out[k] = int(v)
                else:
                    out[k] = float(v)
            rows.append(out)
    return rows


def _parser():
    ap = argparse.ArgumentParser(prog="tschsim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="run an experiment preset and write CSV")
    sim.add_argument("--config", required=True, help="key=value config file (may be empty)")
    sim.add_argument("--preset", choices=sorted(PRESETS))
    sim.add_argument("--seed", type=int, help=f"master seed (fallback: ${SEED_ENV})")
    sim.add_argument("--out", help="output CSV path (default: <preset>.csv)")
    sim.add_argument("--nodes", type=int)
    sim.add_argument("--slots", type=int)
    sim.add_argument("--channels", type=int)
    sim.add_argument("--cycles", type=int)
    sim.add_argument("--replications", type=int)
    sim.add_argument("--policy", choices=("all",) + POLICY_KINDS)
    sim.add_argument("-v", "--verbose", action="store_true")
    return ap


def _simulate(args):
    flags = {k: getattr(args, k) for k in ("nodes", "slots", "channels", "cycles",
                                           "replications", "policy", "seed", "preset", "out")}
    settings = read_settings(args.config, flags)
    if "seed" not in settings and os.environ.get(SEED_ENV):
        settings["seed"] = os.environ[SEED_ENV]
    preset = PRESETS[settings.get("preset", "convergence")]
    layered = dict(preset.fixtures)
    if preset.policies and "policy" not in settings:
        layered["policy"] = ",".join(preset.policies)
    layered.update(settings)
    config = build_config(layered)
    out = settings.get("out") or f"{preset.name}.csv"
    path = run_preset(preset, config, out)
    logging.getLogger(__name__).info("wrote %s", path)
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _simulate(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except UnknownConfigKey as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN_KEY
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_VALUE
    except CatalogOverflow as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CATALOG_OVERFLOW
    except (TopologyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
