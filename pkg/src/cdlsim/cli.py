"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error, 64 usage error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import cluster, dataset, experiment, game
from ._validation import ConfigError, ContractViolation, ParseError, ShortageError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _player_key(key: str):
    return int(key) if key.lstrip("-").isdigit() else key


def _keyed(mapping) -> dict:
    if isinstance(mapping, list):
        return dict(enumerate(mapping))
    return {_player_key(str(k)): v for k, v in (mapping or {}).items()}


def _read_json(path, what: str):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{what} file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None


def load_losses(path) -> game.LossRecord:
    raw = _read_json(path, "losses")
    if not isinstance(raw, dict) or "theta" not in raw:
        raise ConfigError(f"{path}: losses file needs a 'theta' map")
    table = {}
    for entry in raw.get("phi_table") or []:
        table[frozenset(_player_key(str(p)) for p in entry["cooperators"])] = _keyed(entry["phi"])
    try:
        return game.LossRecord(_keyed(raw["theta"]), _keyed(raw.get("phi")),
                               _keyed(raw.get("tau")), gain=raw.get("gain"), phi_table=table)
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from None


def load_payoff(path) -> game.PayoffConfig:
    raw = _read_json(path, "payoff")
    try:
        return game.PayoffConfig(float(raw["B"]), game.CostModel(**raw.get("costs", {})))
    except (KeyError, TypeError, ContractViolation) as exc:
        raise ConfigError(f"{path}: bad payoff config ({exc})") from None


def cmd_simulate(args) -> int:
    cfg = experiment.ExperimentConfig.from_file(args.config)
    report = experiment.run_experiment(cfg)
    out = report.write(args.out)
    p = report.payload
    print(f"cooperation rate {p['cooperation_rate']:.2f} "
          f"({p['symbols']['C']} CP / {p['symbols']['N_minus_C']} DF); report in {out}")
    return EXIT_OK


def cmd_analyze_game(args) -> int:
    losses = load_losses(args.losses)
    pcfg = load_payoff(args.payoff)
    n = losses.num_players
    profiles = list(game.all_profiles(n)) if n <= args.examine_all_up_to else None
    print(json.dumps(game.game_report(losses, pcfg, profiles), indent=2))
    return EXIT_OK


def cmd_cluster(args) -> int:
    raw = _read_json(args.values, "values")
    values = _keyed(raw)
    if not values:
        raise ConfigError("no values to cluster")
    try:
        assignment = cluster.cluster_values(values, k=args.k, k_max=args.k_max)
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from None
    strategies = cluster.fair_strategy(assignment)
    out = assignment.to_dict()
    ids = sorted(values)
    if isinstance(raw, list):
        out["labels"] = [assignment.labels[i] for i in ids]
        out["values"] = [values[i] for i in ids]
        out["strategy_profile"] = [strategies[i] for i in ids]
    else:
        out["values"] = {str(i): values[i] for i in ids}
        out["strategy_profile"] = {str(i): strategies[i] for i in ids}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_ingest(args) -> int:
    logs = dataset.parse_aras_glob(args.aras)
    parts = [dataset.windowize(lg, args.window, args.resident) for lg in logs]
    data = dataset.LabeledDataset.concatenate(parts)
    dataset.save_csv(data, args.out)
    print(f"{len(logs)} file(s), {len(data)} windows -> {args.out}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.run) / "report.json"
    report = _read_json(path, "report")
    if args.format == "json":
        keys = ["schema_version", "symbols", "cluster", "strategy_profile", "outcome",
                "game", "cooperation_rate"]
        print(json.dumps({k: report[k] for k in keys if k in report}, indent=2))
        return EXIT_OK
    sym = report["symbols"]
    payoffs = report["outcome"]["payoffs"]
    rows = []
    for idx, strategy in enumerate(report["strategy_profile"]):
        key = str(idx)
        rows.append({"device": idx, "strategy": strategy, "theta": sym["theta"][key],
                     "phi": sym["phi"].get(key, ""), "tau": sym["tau"][key],
                     "payoff": payoffs[key]})
    experiment.write_summary_csv(rows, sys.stdout)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cdlsim", description="Collaborative deep learning game simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", help="run an experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze-game", help="payoffs and pure Nash equilibria for a loss table")
    p.add_argument("--losses", required=True)
    p.add_argument("--payoff", required=True)
    p.add_argument("--examine-all-up-to", type=int, default=4,
                   help="list every profile's payoffs when N is at most this")
    p.set_defaults(func=cmd_analyze_game)

    p = sub.add_parser("cluster", help="1-D k-means and the fair cooperation rule")
    p.add_argument("--values", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--k-max", type=int, default=None)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("ingest", help="window ARAS day files into a CSV dataset")
    p.add_argument("--aras", required=True, help="glob of ARAS day files")
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=60)
    p.add_argument("--resident", type=int, choices=(1, 2), default=1)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("report", help="print a finished run's report")
    p.add_argument("--run", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        print(parser.format_usage(), end="", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, ShortageError, FileNotFoundError, ContractViolation,
            game.MissingLossError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
