"""Command-line front end: ``llicti {encode,decode,train,eval,stats}``.

Errors are reported as one line on stderr, ``llicti: <kind>: <message>``,
with a nonzero exit status:

==  ============================================
1   any other failure
2   bad command-line usage
3   I/O error or unsupported image
4   malformed stream or weight file
5   corrupted stream
6   non-finite values during training/inference
==  ============================================
"""

import argparse
import os
import sys
import time

from . import codec, interpolator, trainer
from .errors import CorruptStreamError, FormatError
from .imagefile import UnsupportedImageError, read_image, write_image

EXIT_OTHER = 1
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_CORRUPT = 5
EXIT_NUMERIC = 6

# published reference values, keyed by (channels, layers, mixtures, shared)
PUBLISHED_PARAMS = {(88, 3, 3, True): "188K", (24, 3, 3, True): "34K"}
PUBLISHED_KMAC = {(88, 3, 3, True): "66"}


class CliError(Exception):
    def __init__(self, kind, message, code):
        super().__init__(message)
        self.kind = kind
        self.code = code


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("LLICTI_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError("usage", f"LLICTI_THREADS={env!r} is not an integer", EXIT_USAGE) from None
    return 1


def _load_weights(args):
    if args.flat:
        return None
    if not args.weights:
        raise CliError("usage", "pass --weights FILE or --flat", EXIT_USAGE)
    return interpolator.load_weights(args.weights)


def _model_args(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--weights", metavar="FILE", help="interpolator weight file (.lltw)")
    g.add_argument("--flat", action="store_true", help="use the uniform-PMF model instead of weights")


def _config_args(p):
    p.add_argument("--channels", type=int, default=88)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--mixtures", type=int, default=3)
    p.add_argument("--scales", type=int, default=5)
    p.add_argument("--per-scale", action="store_true", help="separate weights for every scale")
    p.add_argument("--per-mixture-alpha", action="store_true", help="one (a, b, c) triple per mixture component")


def _config_from(args):
    return interpolator.ICNNConfig(
        channels=args.channels,
        layers=args.layers,
        mixtures=args.mixtures,
        scales=args.scales,
        share_across_scales=not args.per_scale,
        per_mixture_alpha=args.per_mixture_alpha,
    )


def cmd_encode(args):
    weights = _load_weights(args)
    image = read_image(args.input)
    t0 = time.perf_counter()
    data = codec.encode(image, weights, scales=args.scales, threads=_threads(args))
    elapsed = time.perf_counter() - t0
    with open(args.output, "wb") as f:
        f.write(data)
    hdr = codec.Header.unpack(data)
    est = codec.estimate_bits(image, weights, scales=hdr.scales)
    pixels = image.shape[0] * image.shape[1]
    print(f"{args.input}: {image.shape[1]}x{image.shape[0]} -> {len(data)} bytes")
    print(f"bpsp {8 * len(data) / (3 * pixels):.4f}  bpp {8 * len(data) / pixels:.4f}")
    for i, bits in sorted(est.scale_bits.items()):
        print(f"scale {i}: {bits:.0f} bits ({bits / pixels:.4f} bpp)")
    print(f"x00 fixed: {est.fixed_bits} bits  header: {est.header_bits} bits")
    print(f"encode time {elapsed:.2f} s")
    return 0


def cmd_decode(args):
    weights = _load_weights(args)
    with open(args.input, "rb") as f:
        data = f.read()
    t0 = time.perf_counter()
    image = codec.decode(data, weights, threads=_threads(args))
    elapsed = time.perf_counter() - t0
    write_image(args.output, image)
    print(f"{args.input}: {image.shape[1]}x{image.shape[0]} decoded in {elapsed:.2f} s -> {args.output}")
    return 0


def cmd_train(args):
    config = trainer.TrainConfig(
        batch_size=args.batch_size,
        patch_size=args.patch_size,
        lr=args.lr,
        lr_decay=args.lr_decay,
        lr_min=args.lr_min,
        patience=args.patience,
        max_steps=args.steps,
        eval_every=args.eval_every,
        val_patches=args.val_patches,
        seed=args.seed,
    )
    corpus = trainer.Corpus.from_paths(args.images)
    val = trainer.Corpus.from_paths(args.val) if args.val else None
    init = interpolator.load_weights(args.init) if args.init else None
    icnn = init.config if init is not None else _config_from(args)

    def progress(step, lr, train_bpp, val_bpp):
        print(f"step {step:6d}  lr {lr:.3g}  train {train_bpp:.4f}  val {val_bpp:.4f}", flush=True)

    weights, _ = trainer.train(
        corpus, config, icnn, val_corpus=val, weights=init,
        log_path=args.log, checkpoint_dir=args.checkpoint_dir, progress=progress,
    )
    interpolator.save_weights(weights, args.output)
    print(f"weights -> {args.output} ({weights.num_parameters()} parameters)")
    return 0


def cmd_eval(args):
    weights = _load_weights(args)
    corpus = trainer.Corpus.from_paths(args.images)
    result = trainer.evaluate(corpus, weights)
    for name, bpp, flat in zip(result.names, result.total_bpp, result.flat_bpp):
        print(f"{name}: {bpp:.4f} bpp ({bpp / 3:.4f} bpsp), flat {flat:.4f} bpp")
    print(result.table())
    return 0


def cmd_stats(args):
    config = interpolator.load_weights(args.weights).config if args.weights else _config_from(args)
    key = (config.channels, config.layers, config.mixtures, config.share_across_scales)
    params = interpolator.count_params(config)
    kmac = interpolator.count_macs(config, args.height, args.width)
    ref_p = PUBLISHED_PARAMS.get(key) if not config.per_mixture_alpha else None
    ref_m = PUBLISHED_KMAC.get(key) if not config.per_mixture_alpha and (args.width, args.height) == (768, 576) else None
    print(f"config: {config}")
    print(f"params: {params} (~{params / 1000:.1f}K)" + (f" (published: {ref_p})" if ref_p else ""))
    print(f"KMAC/pix at {args.width}x{args.height}: {kmac:.3f}" + (f" (published: {ref_m})" if ref_m else ""))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="llicti", description="Learned lossless image codec.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="compress a PPM/PNG image")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--output", "-o", required=True)
    _model_args(p)
    p.add_argument("--scales", type=int, default=None, help="pyramid depth (flat model only)")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decompress to PPM (or PNG by extension)")
    p.add_argument("--input", "-i", required=True)
    p.add_argument("--output", "-o", required=True)
    _model_args(p)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("train", help="train interpolator weights on image patches")
    p.add_argument("images", nargs="+", help="training images")
    p.add_argument("--output", "-o", required=True, help="weight file to write")
    p.add_argument("--val", nargs="+", help="held-out images for the plateau schedule")
    p.add_argument("--init", help="start from this weight file")
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--patch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--lr-decay", type=float, default=0.5)
    p.add_argument("--lr-min", type=float, default=1e-5)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--eval-every", type=int, default=100)
    p.add_argument("--val-patches", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log", help="CSV training log")
    p.add_argument("--checkpoint-dir")
    _config_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="per-scale bpp table for a set of images")
    p.add_argument("images", nargs="+")
    _model_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", help="parameter and MAC counts of a model configuration")
    _config_args(p)
    p.add_argument("--weights", help="read the configuration from a weight file")
    p.add_argument("--height", type=int, default=576)
    p.add_argument("--width", type=int, default=768)
    p.set_defaults(func=cmd_stats)
    return parser


def _fail(kind, message, code):
    print(f"llicti: {kind}: {' '.join(str(message).split())}", file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except CliError as e:
        return _fail(e.kind, e, e.code)
    except CorruptStreamError as e:
        return _fail("corrupt-stream", e, EXIT_CORRUPT)
    except FormatError as e:
        return _fail("format-error", e, EXIT_FORMAT)
    except UnsupportedImageError as e:
        return _fail("unsupported-image", e, EXIT_IO)
    except OSError as e:
        where = f"{e.filename}: " if e.filename else ""
        return _fail("io-error", where + (e.strerror or str(e)), EXIT_IO)
    except FloatingPointError as e:
        return _fail("numeric-error", e, EXIT_NUMERIC)
    except ValueError as e:
        return _fail("invalid-input", e, EXIT_OTHER)


if __name__ == "__main__":
    sys.exit(main())
