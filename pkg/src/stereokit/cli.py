"""``stereokit`` command-line interface.

Exit codes: 0 success, 1 domain error (bad shapes, solver failure, bad
files), 2 usage error. Numbers on stdout use 9 significant digits and tabs.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import load_config, render_defaults
from .dispvol import (
    extract_disparity,
    make_schedule,
    project_logits_to_right,
    softmax_volume,
    synthesize_right,
    warp_horizontal,
)
from .distill import (
    MANIFEST_NAME,
    generate_matted_dataset,
    read_manifest,
    write_manifest,
)
from .imgio import (
    GridError,
    load_floatmap,
    load_image,
    load_mask,
    load_stack,
    read_pfm,
    store_floatmap,
    store_image,
    store_mask,
    store_stack,
    write_pfm,
    atomic_write_bytes,
)
from .losses import (
    LossWeights,
    loss_deep_corr,
    loss_distilled_matting,
    loss_l1,
    loss_perceptual,
    loss_smoothness,
    random_features,
    stage1_total,
    stage2_total,
)
from .matting import MattingParams, SolverError, local_mean_scale
from .metrics import MetricReport, eval_depth
from .npe import NpeParams, PatchOrigin, npe_forward, npe_jacobian_check, params_to_header, parse_header
from .viz import emit_visualization

log = logging.getLogger("stereokit")


def fmt(x) -> str:
    return f"{x:.9g}"


def _pick(args, cfg, key, attr=None):
    value = getattr(args, attr or key, None)
    return cfg[key] if value is None else value


def _schedule(args, cfg):
    return make_schedule(_pick(args, cfg, "d_min"), _pick(args, cfg, "d_max"), _pick(args, cfg, "n"))


def _matting_params(args, cfg):
    return MattingParams(
        window_radius=cfg["window_radius"],
        eps=_pick(args, cfg, "eps"),
        lam=_pick(args, cfg, "lambda", "lam"),
        cg_tol=_pick(args, cfg, "cg_tol"),
        cg_max_iter=_pick(args, cfg, "cg_max_iter"),
    )


def _weights(args, cfg):
    return LossWeights(*(_pick(args, cfg, k) for k in ("alpha_p", "alpha_ds", "alpha_dm", "alpha_dc")))


def _load_grid(path):
    """PFM single-channel -> float map; anything else -> image."""
    path = Path(path)
    if path.suffix.lower() == ".pfm" and read_pfm(path).ndim == 2:
        return load_floatmap(path), True
    return load_image(path), False


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_quantize(args, cfg):
    sched = _schedule(args, cfg)
    for k, d in enumerate(sched.d):
        print(f"{k}\t{fmt(d)}")


def cmd_warp(args, cfg):
    src, is_map = _load_grid(args.src)
    out, valid = warp_horizontal(src, load_floatmap(args.disp), args.sign)
    if is_map:
        store_floatmap(out, args.out)
    else:
        store_image(out, args.out)
    if args.mask_out:
        store_mask(valid, args.mask_out)


def cmd_synth(args, cfg):
    sched = _schedule(args, cfg)
    probs = project_logits_to_right(load_stack(args.logits), sched)
    store_image(synthesize_right(load_image(args.left), probs, sched), args.out)


def cmd_extract(args, cfg):
    sched = _schedule(args, cfg)
    disp = extract_disparity(softmax_volume(load_stack(args.logits)), sched)
    store_floatmap(disp, args.out)


def cmd_mat(args, cfg):
    from .distill import matte_view

    params = _matting_params(args, cfg)
    guide = load_image(args.guide)
    disp = load_floatmap(args.disp)
    conf = load_floatmap(args.confidence) if args.confidence else np.ones_like(disp)
    matted = matte_view(guide, disp, conf, params)
    if args.mean_scale:
        matted = local_mean_scale(matted, disp)
    store_floatmap(matted, args.out)


def cmd_distill(args, cfg):
    entries = read_manifest(args.manifest)
    rows = generate_matted_dataset(
        entries, args.out, _matting_params(args, cfg), cfg["conf_floor"], _pick(args, cfg, "jobs")
    )
    print(f"{len(rows)}/{len(entries)} samples distilled into {args.out}")
    return rows, entries


def cmd_pipeline(args, cfg):
    rows, entries = cmd_distill(args, cfg)
    out = Path(args.out)
    index = {f"{i:05d}": e for i, e in enumerate(entries)}
    loss_rows = []
    for sid, ml, mr, kl, kr in rows:
        _, _, dl_path, dr_path = index[sid]
        for view, disp_path, m_path, k_path in (("left", dl_path, ml, kl), ("right", dr_path, mr, kr)):
            disp = load_floatmap(disp_path)
            matted = load_floatmap(out / m_path)
            mask = load_mask(out / k_path)
            loss_rows.append((sid, view, fmt(loss_distilled_matting(disp, matted, mask)),
                              fmt(float(mask.mean()))))
            if args.viz:
                emit_visualization(matted, out / f"{sid}_matted_{view}.png")
    write_manifest(out / "losses.tsv", loss_rows, ("sample_id", "view", "l_dm", "mask_fraction"))


def _features(stack_args, fallback_grid, seed):
    if stack_args:
        return [load_stack(p) for p in stack_args]
    return random_features(fallback_grid, seed)


def cmd_losses(args, cfg):
    weights = _weights(args, cfg)
    seed = cfg["feature_seed"]
    pred = load_image(args.pred)
    target = load_image(args.target)
    valid = load_mask(args.valid) if args.valid else None
    l1 = loss_l1(pred, target, valid)
    lp = loss_perceptual(_features(args.pred_feats, pred, seed), _features(args.target_feats, target, seed))

    lds = ldc = ldm = 0.0
    if args.disp:
        disp = load_floatmap(args.disp)
        guide = load_image(args.guide) if args.guide else target
        lds = loss_smoothness(disp, guide)
        k = _pick(args, cfg, "acorr_k")
        fd = load_stack(args.disp_feats) if args.disp_feats else random_features(disp, seed)[-1]
        fi = load_stack(args.img_feats) if args.img_feats else random_features(guide, seed)[-1]
        ldc = loss_deep_corr(fd, fi, k)
        if args.matted:
            mask = load_mask(args.mask) if args.mask else np.ones(disp.shape, bool)
            ldm = loss_distilled_matting(disp, load_floatmap(args.matted), mask)
    elif args.matted:
        raise GridError("--matted requires --disp")

    ls1 = stage1_total(l1, lp, lds, weights)
    ls2 = stage2_total(ls1, ldm, ldc, args.lm, weights)
    for name, value in (("l1", l1), ("lp", lp), ("lds", lds), ("ldc", ldc), ("ldm", ldm),
                        ("lm", args.lm), ("ls1", ls1), ("ls2", ls2)):
        print(f"{name}\t{fmt(value)}")


def _load_npe(args):
    if args.params:
        hidden, out = parse_header(Path(args.header or str(args.params) + ".txt").read_text())
        return NpeParams.from_flat(load_floatmap(args.params).ravel(), hidden, out)
    return NpeParams.random(args.hidden, args.out_channels, args.seed)


def cmd_npe(args, cfg):
    params = _load_npe(args)
    full_h = args.full_h if args.full_h is not None else args.patch_h
    full_w = args.full_w if args.full_w is not None else args.patch_w
    origin = PatchOrigin(args.x0, args.y0, args.patch_h, args.patch_w, full_h, full_w)
    if args.save_params:
        write_pfm(args.save_params, params.flat()[None, :].astype(np.float32))
        atomic_write_bytes(str(args.save_params) + ".txt", params_to_header(params).encode())
    if args.check:
        rep = npe_jacobian_check(params, origin, args.check)
        print(f"max_rel_error\t{fmt(rep.max_rel_error)}")
        print(f"max_abs_error\t{fmt(rep.max_abs_error)}")
    if args.out:
        store_stack(npe_forward(params, origin), args.out)


def cmd_metrics(args, cfg):
    rep = eval_depth(
        load_floatmap(args.pred), load_floatmap(args.gt),
        _pick(args, cfg, "cap"),
        bool(args.median_scale or cfg["median_scale"]),
    )
    if args.header:
        print("\t".join(MetricReport.names()))
    print("\t".join(str(v) if isinstance(v, int) else fmt(v) for v in rep.row()))


def cmd_viz(args, cfg):
    emit_visualization(load_floatmap(args.map), args.out)


def cmd_config(args, cfg):
    print(render_defaults(), end="")


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _add_schedule(p):
    p.add_argument("--d-min", dest="d_min", type=float)
    p.add_argument("--d-max", dest="d_max", type=float)
    p.add_argument("--n", type=int, help="number of plane intervals N")


def _add_matting(p):
    p.add_argument("--eps", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--cg-tol", dest="cg_tol", type=float)
    p.add_argument("--cg-max-iter", dest="cg_max_iter", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stereokit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--config", help="key=value config file (default: $STEREOKIT_CONFIG)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantize", help="print the exponential disparity planes")
    _add_schedule(p)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("warp", help="backward-warp an image or float map horizontally")
    p.add_argument("src")
    p.add_argument("disp")
    p.add_argument("--sign", choices=("left", "right"), default="left")
    p.add_argument("--out", required=True)
    p.add_argument("--mask-out")
    p.set_defaults(func=cmd_warp)

    p = sub.add_parser("synth", help="synthesise the right view from a logit volume stack")
    p.add_argument("left")
    p.add_argument("logits", help="stack prefix (<prefix>_000.pfm ...) or directory")
    p.add_argument("--out", required=True)
    _add_schedule(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="expected disparity of a logit volume stack")
    p.add_argument("logits")
    p.add_argument("--out", required=True)
    _add_schedule(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("mat", help="matte a disparity map against a guide image")
    p.add_argument("guide")
    p.add_argument("disp")
    p.add_argument("--out", required=True)
    p.add_argument("--confidence", help="confidence PFM (default: all ones)")
    p.add_argument("--mean-scale", action="store_true", help="apply 5x5 local mean scaling")
    _add_matting(p)
    p.set_defaults(func=cmd_mat)

    for name, func, helptext in (("distill", cmd_distill, "distil a manifest of stereo samples"),
                                 ("pipeline", cmd_pipeline, "distil a manifest and score it")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--manifest", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--jobs", type=int)
        _add_matting(p)
        if name == "pipeline":
            p.add_argument("--viz", action="store_true", help="also render matted maps as PNG")
        p.set_defaults(func=func)

    p = sub.add_parser("losses", help="evaluate every loss term on one sample")
    p.add_argument("--pred", required=True, help="synthesised view")
    p.add_argument("--target", required=True, help="real view")
    p.add_argument("--valid", help="validity mask PFM for l1")
    p.add_argument("--disp", help="predicted disparity PFM")
    p.add_argument("--guide", help="guide image for smoothness/autocorrelation (default: target)")
    p.add_argument("--matted", help="distilled matted disparity PFM")
    p.add_argument("--mask", help="distillation mask PFM")
    p.add_argument("--pred-feats", action="append", help="feature stack per level (repeat)")
    p.add_argument("--target-feats", action="append")
    p.add_argument("--disp-feats")
    p.add_argument("--img-feats")
    p.add_argument("--lm", type=float, default=0.0, help="externally computed mirror loss")
    p.add_argument("--acorr-k", dest="acorr_k", type=int)
    for key in ("alpha_p", "alpha_ds", "alpha_dm", "alpha_dc"):
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=float)
    p.set_defaults(func=cmd_losses)

    p = sub.add_parser("npe", help="positional feature map of a patch")
    p.add_argument("--params", help="flat parameter PFM (header in <params>.txt)")
    p.add_argument("--header")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--out-channels", type=int, default=16)
    p.add_argument("--x0", type=int, default=0)
    p.add_argument("--y0", type=int, default=0)
    p.add_argument("--patch-h", type=int, required=True)
    p.add_argument("--patch-w", type=int, required=True)
    p.add_argument("--full-h", type=int)
    p.add_argument("--full-w", type=int)
    p.add_argument("--out", help="output stack prefix")
    p.add_argument("--save-params")
    p.add_argument("--check", type=int, metavar="PROBES", help="run the Jacobian check")
    p.set_defaults(func=cmd_npe)

    p = sub.add_parser("metrics", help="depth metrics of a prediction against ground truth")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--cap", type=float)
    p.add_argument("--median-scale", action="store_true")
    p.add_argument("--header", action="store_true")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("viz", help="render a float map as a false-colour PNG")
    p.add_argument("map")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_viz)

    p = sub.add_parser("config", help="print every config key with its default")
    p.set_defaults(func=cmd_config)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:       # usage errors, --help, --version
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        args.func(args, cfg)
    except (GridError, SolverError, OSError) as exc:
        print(f"stereokit {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
