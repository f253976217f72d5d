"""
cli.py: subcommand front end over the pipeline stages.

Exit code 0 on success; on failure a single machine-parsable line
`error: <message>` goes to stderr and the exit code is nonzero.
"""
import argparse
import sys

from .config import ConfigError, load_config
from .harness import (HarnessError, cmd_compare_baselines, cmd_deploy,
                      cmd_evaluate, cmd_oracle, cmd_sweep_eta,
                      cmd_train_dnn, cmd_train_offline, cmd_train_online)


def build_parser():
    p = argparse.ArgumentParser(
        prog="hetnet-tuner",
        description="Two-tier HetNet antenna tuning: offline mean-field plus "
                    "online feature-based Q-learning")
    p.add_argument("--config", metavar="PATH", help="key = value config file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default="runs", metavar="DIR", help="artifact directory")
    p.add_argument("--preset", choices=("paper", "desk"), default="desk")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("deploy", "train-offline", "train-dnn", "train-online", "evaluate",
                 "oracle"):
        sub.add_parser(name)
    sweep = sub.add_parser("sweep-eta")
    sweep.add_argument("--eta", type=float, nargs="+", metavar="ETA",
                       default=[0.0, 1e-9, 1e-8], help="target eta grid")
    sweep.add_argument("--seeds", type=int, default=5, help="seeds per grid point")
    comp = sub.add_parser("compare-baselines")
    comp.add_argument("--seeds", type=int, default=20)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.preset, args.seed)
        out = args.out
        if args.command == "deploy":
            path = cmd_deploy(cfg, out)
            print(f"wrote {path}")
        elif args.command == "train-offline":
            policy, _ = cmd_train_offline(cfg, out)
            print(f"offline equilibrium actions: "
                  f"{ {k: int(v) for k, v in sorted(policy.eq_action.items())} } "
                  f"converged={policy.converged}")
        elif args.command == "train-dnn":
            res = cmd_train_dnn(cfg, out)
            print(f"cluster net trained: test_mse={res['losses']['test_mse']:.4f} "
                  f"dnn_acc={res['dnn_accuracy']:.3f} fp_acc={res['fp_accuracy']:.3f}")
        elif args.command == "train-online":
            linq, _, _ = cmd_train_online(cfg, out)
            print(f"online weights: {linq.weights.tolist()}")
        elif args.command == "evaluate":
            rep = cmd_evaluate(cfg, out)
            print(f"sinr_gain_db={rep.sinr_gain_db:.3f} "
                  f"normalized={rep.normalized_perf:.3f} eta={rep.eta:.3e} "
                  f"band_width={rep.compact_band_width}")
        elif args.command == "oracle":
            best, rate = cmd_oracle(cfg, out)
            print(f"oracle action {best} sum_rate={rate:.4f}")
        elif args.command == "sweep-eta":
            rows = cmd_sweep_eta(cfg, out, args.eta, args.seeds)
            for r in rows:
                print(f"eta={r['eta_measured']:.3e} mult={r['density_mult']:.2f} "
                      f"normalized={r['normalized_mean']:.3f} [{r['flag']}]")
        elif args.command == "compare-baselines":
            rows = cmd_compare_baselines(cfg, out, args.seeds)
            methods = sorted({r["method"] for r in rows})
            for m in methods:
                gains = [r["sinr_gain_db"] for r in rows if r["method"] == m]
                print(f"{m}: mean_gain_db={sum(gains) / len(gains):.3f}")
        return 0
    except (ConfigError, HarnessError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
