"""The `bench` command line: dataset generation, labeling, training, replay.

Exit codes: 0 success, 2 parse error, 3 backend failure, 4 config error.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .backends import (
    DEFAULT_BETA,
    BackendUnavailable,
    MockAlignmentScorer,
    MockBackend,
    ProtocolError,
    RemoteTimeout,
)
from .core import Tier, default_grid
from .embedding import DEFAULT_CLOUD_TEXT_DIM, DEFAULT_EDGE_TEXT_DIM, DEFAULT_IMAGE_DIM, hash_provider
from .labeling import BackendFailure, PairsParseError, build_label_dataset, read_labels, read_pairs
from .predictor import (
    TrainingConfig,
    TrainingExample,
    cloud_default_dims,
    edge_default_dims,
    edge_features,
    fuse_multimodal,
    init_params,
    load_weights,
    save_weights,
    train,
)
from .replay import (
    SCENARIO_CLOUD_ONLY,
    SCENARIO_DIFFUSIONX,
    SCENARIO_EDGE_ONLY,
    ReplayConfig,
    build_report,
    replay_dataset,
    write_report,
    write_session_logs,
)
from .netsim import render_text
from .synth import (
    DatasetParseError,
    generate_sessions,
    pairs_from_sessions,
    read_sessions,
    write_pairs,
    write_sessions,
)
from .util import derive_seed

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_BACKEND = 3
EXIT_CONFIG = 4

_SCENARIO_FLAGS = {
    "cloud-only": SCENARIO_CLOUD_ONLY,
    "edge-only": SCENARIO_EDGE_ONLY,
    "diffusionx": SCENARIO_DIFFUSIONX,
}


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _cmd_gen_dataset(args) -> int:
    sessions = generate_sessions(args.sessions, args.rounds, args.seed)
    write_sessions(args.out, sessions)
    if args.emit_pairs:
        write_pairs(args.emit_pairs, pairs_from_sessions(sessions))
    print(f"wrote {len(sessions)} sessions to {args.out}")
    return EXIT_OK


def _cmd_label(args) -> int:
    grid = default_grid()
    embedder = hash_provider(args.dim, seed=args.seed)
    backend = MockBackend(embedder, Tier.EDGE)
    scorer = MockAlignmentScorer(embedder, beta=args.beta)
    try:
        written = build_label_dataset(
            args.pairs,
            args.out,
            grid,
            backend,
            scorer,
            args.seed,
            base_steps=args.base_steps,
            resume=args.resume,
        )
    except FileNotFoundError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except PairsParseError as exc:
        return _fail(EXIT_PARSE, str(exc))
    except (BackendFailure, BackendUnavailable) as exc:
        return _fail(EXIT_BACKEND, str(exc))
    print(f"labeled {written} pairs -> {args.out}")
    return EXIT_OK


def _build_examples(pairs, labels, tier: str, seed: int, edge_dim: int, cloud_text_dim: int, image_dim: int):
    label_by_id = {pair_id: s_star for pair_id, s_star, _ in labels}
    edge_text = hash_provider(edge_dim, seed=seed)
    examples = []
    if tier == "edge":
        for pair_id, prompt_prev, prompt_curr in pairs:
            if pair_id not in label_by_id:
                continue
            h_prev = edge_text.embed_text(prompt_prev)
            h_curr = edge_text.embed_text(prompt_curr)
            examples.append(TrainingExample(edge_features(h_prev, h_curr), label_by_id[pair_id]))
        dims = edge_default_dims(edge_dim)
    else:
        cloud_text = hash_provider(cloud_text_dim, seed=seed)
        image_embedder = hash_provider(image_dim, seed=seed)
        backend = MockBackend(edge_text, Tier.EDGE)
        for pair_id, prompt_prev, prompt_curr in pairs:
            if pair_id not in label_by_id:
                continue
            draft = backend.txt2img(prompt_prev, 25, derive_seed(seed, pair_id))
            h_cloud = cloud_text.embed_text(prompt_curr)
            v_cloud = image_embedder.embed_image(draft)
            examples.append(TrainingExample(fuse_multimodal(h_cloud, v_cloud), label_by_id[pair_id]))
        dims = cloud_default_dims(cloud_text_dim, image_dim)
    return examples, dims


def _cmd_train(args) -> int:
    try:
        pairs = read_pairs(args.pairs)
        labels = read_labels(args.labels)
    except FileNotFoundError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except PairsParseError as exc:
        return _fail(EXIT_PARSE, str(exc))
    examples, dims = _build_examples(
        pairs, labels, args.tier, args.seed, args.edge_dim, args.cloud_text_dim, args.image_dim
    )
    if not examples:
        return _fail(EXIT_CONFIG, "no (pair, label) rows matched by id; nothing to train on")
    cfg = TrainingConfig(
        learning_rate=args.lr,
        epochs=args.epochs,
        batch_size=args.batch_size,
        lam=args.lam,
        seed=args.seed,
    )
    params = init_params(dims, seed=args.seed)
    trained, history = train(params, examples, cfg)
    save_weights(trained, args.out)
    print(
        f"trained {args.tier} predictor on {len(examples)} examples: "
        f"loss {history[0]:.5f} -> {history[-1]:.5f}; weights -> {args.out}"
    )
    return EXIT_OK


def _run_scenarios(sessions, args, scenarios) -> int:
    edge_params = cloud_params = None
    needs_predictor = any(on for _, on in scenarios)
    if needs_predictor:
        if not (args.edge_weights and args.cloud_weights):
            return _fail(EXIT_CONFIG, "--predictor on requires --edge-weights and --cloud-weights")
        edge_params = load_weights(args.edge_weights)
        cloud_params = load_weights(args.cloud_weights)
    results = []
    for scenario, predictor_on in scenarios:
        cfg = ReplayConfig(
            scenario=scenario,
            predictor_on=predictor_on,
            seed=args.seed,
            base_steps_edge=args.base_steps_edge,
            base_steps_cloud=args.base_steps_cloud,
            fixed_strength=args.fixed_strength,
        )
        results.append(replay_dataset(sessions, cfg, edge_params, cloud_params))
    report = build_report(results, baseline=results[0].scenario_tag)
    write_report(report, args.report)
    if args.log:
        write_session_logs(results, args.log)
    print(render_text(report))
    return EXIT_OK


def _cmd_replay(args) -> int:
    try:
        sessions = read_sessions(args.dataset)
    except FileNotFoundError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except DatasetParseError as exc:
        return _fail(EXIT_PARSE, str(exc))
    predictor_on = args.predictor == "on"
    if args.scenario == "all":
        scenarios = [
            (SCENARIO_CLOUD_ONLY, False),
            (SCENARIO_EDGE_ONLY, False),
            (SCENARIO_DIFFUSIONX, predictor_on),
        ]
    elif args.scenario == "ablation":
        scenarios = [(SCENARIO_DIFFUSIONX, False), (SCENARIO_DIFFUSIONX, True)]
    else:
        scenarios = [(_SCENARIO_FLAGS[args.scenario], predictor_on)]
    try:
        return _run_scenarios(sessions, args, scenarios)
    except FileNotFoundError as exc:
        return _fail(EXIT_CONFIG, str(exc))
    except (BackendUnavailable, ProtocolError, RemoteTimeout, BackendFailure) as exc:
        return _fail(EXIT_BACKEND, str(exc))
    except ValueError as exc:
        return _fail(EXIT_CONFIG, str(exc))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", help="generate a synthetic interactive-prompt dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--sessions", type=int, default=400)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--emit-pairs", help="also write consecutive-round prompt pairs to this path")
    p.set_defaults(func=_cmd_gen_dataset)

    p = sub.add_parser("label", help="build ground-truth strengths by exhaustive grid scan")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--base-steps", type=int, default=25)
    p.add_argument("--dim", type=int, default=DEFAULT_EDGE_TEXT_DIM)
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("train", help="train a strength predictor from labeled pairs")
    p.add_argument("--pairs", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--tier", choices=("edge", "cloud"), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=TrainingConfig().epochs)
    p.add_argument("--lr", type=float, default=TrainingConfig().learning_rate)
    p.add_argument("--batch-size", type=int, default=TrainingConfig().batch_size)
    p.add_argument("--lam", type=float, default=TrainingConfig().lam)
    p.add_argument("--edge-dim", type=int, default=DEFAULT_EDGE_TEXT_DIM)
    p.add_argument("--cloud-text-dim", type=int, default=DEFAULT_CLOUD_TEXT_DIM)
    p.add_argument("--image-dim", type=int, default=DEFAULT_IMAGE_DIM)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("replay", help="replay a dataset under simulated timing")
    p.add_argument("--dataset", required=True)
    p.add_argument(
        "--scenario",
        choices=(*_SCENARIO_FLAGS, "all", "ablation"),
        required=True,
    )
    p.add_argument("--predictor", choices=("on", "off"), default="off")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", required=True)
    p.add_argument("--log", help="also write per-session round logs (JSONL)")
    p.add_argument("--edge-weights")
    p.add_argument("--cloud-weights")
    p.add_argument("--base-steps-edge", type=int, default=25)
    p.add_argument("--base-steps-cloud", type=int, default=25)
    p.add_argument("--fixed-strength", type=float, default=0.90)
    p.set_defaults(func=_cmd_replay)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
