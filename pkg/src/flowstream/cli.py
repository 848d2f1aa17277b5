"""Command-line front door: corpus generation, training, sampling, streaming,
verification, ablations, and the streaming service."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, replace

import numpy as np

USAGE_EXIT = 2
FAILURE_EXIT = 1

MASK_FLAGS = {"bi": "bidirectional", "causal": "causal"}
SCHED_FLAGS = {"tri": "triangular", "random": "random"}
PRED_FLAGS = {"v": "velocity", "eps": "epsilon", "x0": "x0"}


def _load_json(path, what):
    if not os.path.exists(path):
        raise FileNotFoundError(f"{what} file not found: {path}")
    with open(path) as f:
        return json.load(f)


def _build_parser():
    p = argparse.ArgumentParser(prog="flowstream", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--ns", type=float, default=4.0, help="streaming slope (frames per unit time)")
        sp.add_argument("--K", type=int, default=8, help="sequence length in frames")

    g = sub.add_parser("gen-corpus", help="write a synthetic corpus file")
    common(g)
    g.add_argument("--out", required=True)
    g.add_argument("--preset", choices=["tree", "four-mode", "two-point", "sensitivity"], default="tree")
    g.add_argument("--D", type=int, default=2)
    g.add_argument("--segment-length", type=int, default=4)
    g.add_argument("--num-controls", type=int, default=3)
    g.add_argument("--depth", type=int, default=2)

    t = sub.add_parser("train", help="run the training loop from a config file")
    t.add_argument("--config", required=True, help="JSON file mirroring TrainConfig")
    t.add_argument("--corpus", required=True)
    t.add_argument("--out", required=True, help="checkpoint path (.npz)")
    t.add_argument("--log", default=None, help="training log path (.jsonl)")

    s = sub.add_parser("sample", help="generate bounded sequences to a file")
    common(s)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--count", type=int, default=16)
    s.add_argument("--steps-per-unit", type=int, default=32)
    s.add_argument("--cfg", type=float, default=1.0, help="classifier-free guidance scale")
    s.add_argument("--control-id", type=int, default=0)
    s.add_argument("--controls", default=None, help="comma-separated per-frame control ids")
    s.add_argument("--schedule", choices=sorted(SCHED_FLAGS), default="tri")
    s.add_argument("--sigma0", type=float, default=0.0)

    st = sub.add_parser("stream", help="console streaming demo with scripted control switches")
    common(st)
    st.add_argument("--checkpoint", required=True)
    st.add_argument("--steps-per-unit", type=int, default=32)
    st.add_argument("--cfg", type=float, default=1.0)
    st.add_argument("--control-id", type=int, default=0)
    st.add_argument("--switch", action="append", default=[],
                    help="frame:control_id, may repeat; takes effect at that frame's activation")

    v = sub.add_parser("verify", help="run the invariant suites; nonzero exit on failure")
    v.add_argument("--quick", action="store_true", help="smaller sweeps")

    a = sub.add_parser("ablate", help="train/evaluate a config grid")
    a.add_argument("--config", required=True, help="JSON file mirroring TrainConfig (base)")
    a.add_argument("--corpus", required=True)
    a.add_argument("--out", required=True, help="report path (.jsonl); table printed to stdout")
    a.add_argument("--mask", default=None, help="comma list from {bi,causal}")
    a.add_argument("--schedule", default=None, help="comma list from {tri,random}")
    a.add_argument("--cfg-grid", default=None, help="comma list of guidance scales")
    a.add_argument("--pred", default=None, help="comma list from {v,eps,x0}")
    a.add_argument("--samples", type=int, default=300)

    sv = sub.add_parser("serve", help="start the streaming service")
    sv.add_argument("--checkpoint", required=True)
    sv.add_argument("--ns", type=float, default=4.0)
    sv.add_argument("--bind", default=None, help="host:port (default $FLOWSTREAM_BIND or 127.0.0.1:8787)")
    sv.add_argument("--control-id", type=int, default=0)
    sv.add_argument("--steps-per-unit", type=int, default=32)
    sv.add_argument("--cfg", type=float, default=1.0)
    sv.add_argument("--throttle-ms", type=float, default=0.0)
    return p


def _cmd_gen_corpus(args) -> int:
    from . import corpus as corpus_mod

    if args.preset == "tree":
        spec = corpus_mod.CorpusSpec(
            K=args.segment_length * args.depth,
            D=args.D,
            segment_length=args.segment_length,
            num_controls=args.num_controls,
            branching_depth=args.depth,
            seed=args.seed,
        )
        corp = corpus_mod.generate_tree_corpus(spec)
    elif args.preset == "four-mode":
        corp = corpus_mod.four_mode_corpus(K=args.K, D=args.D, seed=args.seed)
    elif args.preset == "two-point":
        corp = corpus_mod.two_point_corpus()
    else:
        corp = corpus_mod.sensitivity_corpus(K=max(args.K, 8))
    corpus_mod.save_corpus(corp, args.out)
    print(f"wrote {corp.num_atoms} atoms (K={corp.K}, D={corp.D}, "
          f"num_controls={corp.num_controls}) to {args.out}")
    return 0


def _cmd_train(args) -> int:
    from . import corpus as corpus_mod
    from .trainer import TrainConfig, save_train_log, train_loop
    from .denoiser import save_params

    cfg = TrainConfig(**_load_json(args.config, "config"))
    corp = corpus_mod.load_corpus(args.corpus)
    params, records = train_loop(cfg, corp, progress=True)
    save_params(params, args.out)
    if args.log:
        save_train_log(records, args.log)
    print(f"trained {cfg.total_steps} steps; checkpoint -> {args.out}"
          + (f"; log -> {args.log}" if args.log else ""))
    return 0


def _parse_controls(args, K):
    if args.controls:
        track = np.array([int(v) for v in args.controls.split(",")], dtype=int)
        if track.size != K:
            raise ValueError(f"--controls must list exactly K={K} ids")
        return track
    return np.full(K, args.control_id, dtype=int)


def _cmd_sample(args) -> int:
    from . import schedule as schedule_mod
    from .denoiser import load_params
    from .sampler import SampleConfig, generate_full

    params = load_params(args.checkpoint)
    if args.schedule == "tri":
        sched = schedule_mod.make_triangular(args.ns, args.K)
    else:
        sched = schedule_mod.make_random_ablation(args.ns, args.K, seed=args.seed)
    track = _parse_controls(args, args.K)
    total = math.ceil(sched.T * args.steps_per_unit - 1e-9)
    effective = {
        "schedule": sched.kind, "n_s": args.ns, "K": args.K, "T": sched.T,
        "steps_per_unit": args.steps_per_unit, "total_solver_steps": total,
        "cfg_scale": args.cfg, "sigma0": args.sigma0, "seed": args.seed,
        "controls": track.tolist(),
    }
    print(json.dumps(effective))
    with open(args.out, "w") as f:
        for i in range(args.count):
            cfg = SampleConfig(steps_per_unit=args.steps_per_unit, cfg_scale=args.cfg,
                               sigma0=args.sigma0, seed=args.seed + i)
            x = generate_full(params, track, sched, cfg)
            f.write(json.dumps({"sample": i, "frames": x.tolist()}, separators=(",", ":")) + "\n")
    print(f"wrote {args.count} sequences to {args.out}")
    return 0


def _cmd_stream(args) -> int:
    from . import schedule as schedule_mod
    from .denoiser import load_params
    from .sampler import SampleConfig, open_stream

    params = load_params(args.checkpoint)
    sched = schedule_mod.make_triangular(args.ns, args.K)
    switches = {}
    for spec in args.switch:
        frame, _, ctrl = spec.partition(":")
        switches[int(frame)] = int(ctrl)
    current = {"id": args.control_id}

    def provider(k):
        if k in switches:
            current["id"] = switches[k]
        return current["id"]

    cfg = SampleConfig(steps_per_unit=args.steps_per_unit, cfg_scale=args.cfg, seed=args.seed)
    session = open_stream(params, provider, sched, cfg)
    while not session.done:
        for rec in session.step():
            print(json.dumps({
                "frame_index": rec.frame_index, "step_index": rec.step_index,
                "values": rec.values.tolist(), "alpha_snapshot": rec.alpha_snapshot,
                "control": session.state.controls.get(rec.frame_index, current["id"]),
            }, separators=(",", ":")))
    ws = session.window_state()
    print(json.dumps({"done": True, "t": ws["t"], "frames": session.state.emitted_count}))
    return 0


def _cmd_verify(args) -> int:
    from .verify import run_all

    ok = run_all(quick=args.quick)
    return 0 if ok else FAILURE_EXIT


def _cmd_ablate(args) -> int:
    from . import corpus as corpus_mod
    from .metrics import render_table, run_ablation, save_reports
    from .trainer import TrainConfig

    cfg = TrainConfig(**_load_json(args.config, "config"))
    corp = corpus_mod.load_corpus(args.corpus)
    grid = {}
    if args.mask:
        grid["mask_kind"] = [MASK_FLAGS[v] for v in args.mask.split(",")]
    if args.schedule:
        grid["schedule_kind"] = [SCHED_FLAGS[v] for v in args.schedule.split(",")]
    if args.cfg_grid:
        grid["cfg_scale"] = [float(v) for v in args.cfg_grid.split(",")]
    if args.pred:
        grid["prediction_kind"] = [PRED_FLAGS[v] for v in args.pred.split(",")]
    if not grid:
        print("ablate: empty grid; pass at least one of --mask/--schedule/--cfg-grid/--pred",
              file=sys.stderr)
        return USAGE_EXIT
    reports = run_ablation(grid, cfg, corp, sample_count=args.samples, progress=True)
    save_reports(reports, args.out)
    print(render_table(reports))
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .denoiser import load_params
    from .service import ServiceConfig, create_app

    bind = args.bind or os.environ.get("FLOWSTREAM_BIND", "127.0.0.1:8787")
    host, _, port = bind.rpartition(":")
    params = load_params(args.checkpoint)
    svc = ServiceConfig(
        n_s=args.ns,
        default_control=args.control_id,
        steps_per_unit=args.steps_per_unit,
        cfg_scale=args.cfg,
        throttle_ms=args.throttle_ms,
    )
    app = create_app(params, svc)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return 0


_COMMANDS = {
    "gen-corpus": _cmd_gen_corpus,
    "train": _cmd_train,
    "sample": _cmd_sample,
    "stream": _cmd_stream,
    "verify": _cmd_verify,
    "ablate": _cmd_ablate,
    "serve": _cmd_serve,
}


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return USAGE_EXIT if e.code not in (0, None) else 0
    try:
        return _COMMANDS[args.command](args)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_EXIT
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return USAGE_EXIT


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
