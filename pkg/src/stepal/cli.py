"""Command line entry point: ``stepal {generate,run,compare,inspect-manifest}``.

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

import argparse
import json
import logging
import sys

import numpy as np

from .exceptions import InvalidConfig, ManifestError, StepALError, UnknownStrategy
from .harness import compare_strategies, config_from_dict, load_config, write_outputs
from .manifest import read_header, read_manifest, write_manifest
from .strategies import strategy_names
from .synthgen import benchmark_suite, generate, preset_names

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

logger = logging.getLogger("stepal")

# CLI flag dest -> (section, config key)
_EXPERIMENT_FLAGS = {
    "manifest": (None, "manifest"),
    "cycles": (None, "cycles"),
    "initial_label_frac": (None, "initial_label_frac"),
    "budget_frac": (None, "budget_frac"),
    "seeds": (None, "seeds"),
    "eps": (None, "eps"),
    "workers": (None, "workers"),
    "restarts": (None, "restarts"),
    "output_dir": (None, "output_dir"),
    "learning_rate": ("train", "learning_rate"),
    "epochs": ("train", "epochs"),
    "batch_size": ("train", "batch_size"),
    "l2": ("train", "l2"),
    "train_seed": ("train", "seed"),
}


def _add_experiment_flags(p):
    p.add_argument("--config", help="YAML/JSON experiment file; flags override its values")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=preset_names(), help="synthetic benchmark preset (default: default)")
    src.add_argument("--manifest", help="binary dataset manifest to load instead of generating")
    p.add_argument("--cycles", type=int, help="active learning cycles R (default 4)")
    p.add_argument("--initial-label-frac", type=float, help="initially labelled fraction of train videos (0.10)")
    p.add_argument("--budget-frac", type=float, help="fraction of train videos annotated per cycle (0.10)")
    p.add_argument("--seeds", type=int, nargs="+", help="experiment seeds (each also seeds the generator)")
    p.add_argument("--eps", type=float, help="log/normalisation guard (1e-8)")
    p.add_argument("--workers", type=int, help="parallel worker processes (1)")
    p.add_argument("--restarts", type=int, help="k-means restarts (10)")
    p.add_argument("--output-dir", help="where CSV/SVG outputs go (results)")
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--train-seed", type=int)
    p.add_argument("--no-plot", action="store_true", help="skip the SVG learning curves")


def build_parser():
    parser = argparse.ArgumentParser(prog="stepal", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic pool to a manifest file")
    g.add_argument("--preset", default="default", choices=preset_names())
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n-videos", type=int)
    g.add_argument("--noise-sigma", type=float)
    g.add_argument("--skip-prob", type=float)
    g.add_argument("--out", required=True, help="output manifest path")

    r = sub.add_parser("run", help="run one strategy through the active learning loop")
    r.add_argument("--strategy", help=f"one of: {', '.join(strategy_names())}")
    _add_experiment_flags(r)

    c = sub.add_parser("compare", help="run several strategies on paired pools and seeds")
    c.add_argument("--strategies", nargs="+", help=f"subset of: {', '.join(strategy_names())}")
    _add_experiment_flags(c)

    i = sub.add_parser("inspect-manifest", help="summarise a manifest file")
    i.add_argument("path")
    i.add_argument("--videos", action="store_true", help="also list every video")
    return parser


def _experiment_dict(args):
    data = load_config(args.config) if args.config else {}
    data.setdefault("train", {})
    data["train"] = dict(data["train"])
    for dest, (section, key) in _EXPERIMENT_FLAGS.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        (data[section] if section else data)[key] = value
    if args.preset:
        data["gen"] = {"preset": args.preset}
        data.pop("manifest", None)
    if args.manifest:
        data.pop("gen", None)
    return data


def _cmd_generate(args):
    overrides = {"seed": args.seed}
    for dest, key in (("n_videos", "n_videos"), ("noise_sigma", "noise_sigma"), ("skip_prob", "skip_prob")):
        if getattr(args, dest) is not None:
            overrides[key] = getattr(args, dest)
    pool = generate(benchmark_suite(args.preset, **overrides))
    write_manifest(pool, args.out)
    print(f"wrote {len(pool)} videos (C={pool.step_count}, D={pool.feature_dim}) to {args.out}")
    return EXIT_OK


def _run_and_write(data, strategies, plot):
    cfg = config_from_dict(data)
    comparison = compare_strategies(cfg, strategies)
    paths = write_outputs(comparison, cfg.output_dir, plot=plot)
    last = max(r.cycle for r in comparison.reports) if comparison.reports else 0
    for s in comparison.strategies:
        accs = [comparison.mean_metric(s, c) for c in range(last + 1)]
        print(f"{s:>18s}  accuracy by cycle: " + "  ".join(f"{a:.4f}" for a in accs))
    for name, path in paths.items():
        print(f"{name}: {path}")
    return EXIT_RUNTIME if comparison.errors else EXIT_OK


def _cmd_run(args):
    data = _experiment_dict(args)
    strategy = args.strategy or data.get("strategy", "stepal")
    data["strategy"] = strategy
    return _run_and_write(data, [strategy], plot=not args.no_plot)


def _cmd_compare(args):
    data = _experiment_dict(args)
    strategies = args.strategies or data.get("strategies")
    if not strategies:
        raise InvalidConfig("compare needs --strategies or a 'strategies' list in the config")
    return _run_and_write(data, list(strategies), plot=not args.no_plot)


def _cmd_inspect(args):
    header = read_header(args.path)
    pool = read_manifest(args.path)
    labeled, unlabeled = pool.partition()
    clips = [v.n_clips for v in pool.iter_videos()]
    summary = dict(
        header,
        labeled=len(labeled),
        unlabeled=len(unlabeled),
        clips=int(sum(clips)),
        clips_per_video_min=int(min(clips)) if clips else 0,
        clips_per_video_max=int(max(clips)) if clips else 0,
        with_logits=sum(v.logits is not None for v in pool.iter_videos()),
    )
    if args.videos:
        summary["videos"] = [
            {
                "id": v.video_id,
                "clips": v.n_clips,
                "state": v.state.value,
                "steps_present": sorted(np.unique(v.true_steps).tolist()) if v.true_steps is not None else None,
            }
            for v in pool.iter_videos()
        ]
    print(json.dumps(summary, indent=2))
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "run": _cmd_run,
    "compare": _cmd_compare,
    "inspect-manifest": _cmd_inspect,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (InvalidConfig, UnknownStrategy) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ManifestError, StepALError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
