"""Command-line entry point: experiment runners plus an encoder/decoder."""

from __future__ import annotations

import argparse
import sys

from . import experiments as ex
from .codec import DecodeError, decode_stream, encode
from .dictionary import DictConfig, Family, Window
from .pursuit import PursuitConfig, Variant, run
from .signal import Signal, WavError, load_wav, save_wav
from .subseq import SequenceKind, SequenceSpec


def _scales(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad scale list {text!r}") from None


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(s) for s in text.split(","))


def _common(p: argparse.ArgumentParser, trials: int | None = None, out: str | None = None) -> None:
    p.add_argument("--seed", type=int, default=0)
    if trials is not None:
        p.add_argument("--trials", type=int, default=trials)
    p.add_argument("--out", default=out, required=out is None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsspursuit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("toy-gabor", help="sparse Gabor decay: Coarse / RSS / Full MP")
    _common(p, trials=100, out="toy_gabor.csv")
    p.add_argument("--N", type=int, default=2048)
    p.add_argument("--m", type=int, default=60)
    p.add_argument("--scales", type=_scales, default=(32, 128, 512))
    p.add_argument("--window", choices=[w.name.lower() for w in Window], default="hann")
    p.add_argument("--full-scale", action="store_true", help="N=10000, m=300, 1000 trials")

    p = sub.add_parser("orderstats", help="order-statistic predictions vs Monte Carlo")
    _common(p, trials=100_000, out="orderstats.csv")
    p.add_argument("--dist", default="uniform", choices=["uniform", "halfnormal", "exponential"])
    p.add_argument("--M", type=int, default=100)
    p.add_argument("--iters", type=int, default=None)

    p = sub.add_parser("omp-random", help="MP/OMP on random 128x256 dictionaries")
    _common(p, trials=1000, out="omp_random.csv")

    p = sub.add_parser("coding", help="atoms, bits and SNR for Coarse MP, RSS MP and LoMP")
    _common(p, trials=20, out="coding.csv")
    p.add_argument("--wav", default=None, help="input file (default: synthetic audio)")
    p.add_argument("--N", type=int, default=32768, help="synthetic signal length")
    p.add_argument("--scales", type=_scales, default=ex.AUDIO_SCALES_8)
    p.add_argument("--srr", type=_floats, default=(10.0,), help="comma-separated SRR targets")
    p.add_argument("--bits-weight", type=int, default=12)

    p = sub.add_parser("tradeoff", help="frame subsampling: bits and run time")
    _common(p, out="tradeoff.csv")
    p.add_argument("--wav", default=None)
    p.add_argument("--N", type=int, default=262144)
    p.add_argument("--scales", type=_scales, default=ex.AUDIO_SCALES_3)
    p.add_argument("--factors", type=_scales, default=(1, 2, 4, 8, 16, 32))
    p.add_argument("--srr", type=float, default=10.0)
    p.add_argument("--bits-weight", type=int, default=12)
    p.add_argument("--repeats", type=int, default=1)

    p = sub.add_parser("encode", help="decompose a WAV file and write a bitstream")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--srr", type=float, default=10.0)
    p.add_argument("--max-atoms", type=int, default=None)
    p.add_argument("--bits-weight", type=int, default=12)
    p.add_argument("--seq", choices=[k.name.lower() for k in SequenceKind], default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scales", type=_scales, default=ex.AUDIO_SCALES_8)
    p.add_argument("--subsample", type=int, default=1)
    p.add_argument("--refresh", type=int, default=1)
    p.add_argument("--variant", choices=[v.value for v in Variant], default="mp")
    p.add_argument("--family", choices=[f.name.lower() for f in Family], default="mdct")
    p.add_argument("--window", choices=[w.name.lower() for w in Window], default=None)

    p = sub.add_parser("decode", help="decode a bitstream to WAV")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--format", choices=["pcm16", "float32"], default="float32")
    return parser


def _encode(args) -> int:
    sig = load_wav(args.input)
    family = Family[args.family.upper()]
    window = Window[args.window.upper()] if args.window else (
        Window.SINE if family == Family.MDCT else Window.HANN)
    dcfg = DictConfig(args.scales, sig.length, family, window)
    seq = SequenceSpec(SequenceKind[args.seq.upper()], args.seed, args.refresh, args.subsample)
    cfg = PursuitConfig(dcfg, seq, Variant(args.variant), target_srr=args.srr,
                        max_atoms=args.max_atoms)
    approx = run(sig, cfg)
    approx.sample_rate = sig.sample_rate
    bs = encode(approx, cfg, args.bits_weight)
    with open(args.output, "wb") as fh:
        fh.write(bs.data)
    print(f"atoms={bs.n_atoms} status={approx.status} bits={bs.total_bits} "
          f"header={bs.header_bits} index={bs.index_bits} shift={bs.shift_bits} "
          f"weight={bs.weight_bits} padding={bs.padding_bits} srr={approx.srr():.3f} "
          f"snr={bs.snr:.3f} clamped={bs.clamp_count}")
    return 0


def _decode(args) -> int:
    with open(args.input, "rb") as fh:
        dec = decode_stream(fh.read())
    save_wav(args.output, Signal(dec.signal.samples, dec.sample_rate), args.format)
    print(f"atoms={len(dec.params)} N={dec.config.dictionary.length} rate={dec.sample_rate}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "toy-gabor":
            if args.full_scale:
                args.N, args.m, args.trials = 10000, 300, 1000
            res = ex.exp_toy_gabor(args.seed, args.N, args.m, args.scales, args.trials,
                                   window=Window[args.window.upper()], out=args.out)
            n = args.m // 2
            print(" ".join(f"{k}={res.mean(k)[n]:.4g}" for k in res.eps) + f" at n={n}")
        elif args.command == "orderstats":
            res = ex.exp_orderstats(args.dist, args.M, args.trials, args.seed, args.iters,
                                    out=args.out)
            n = len(res.predicted["fixed"]) - 1
            print(" ".join(f"{s}: predicted={res.predicted[s][n]:.4g} "
                           f"simulated={res.simulated[s].mean[n]:.4g}" for s in res.predicted)
                  + f" at n={n}")
        elif args.command == "omp-random":
            res = ex.exp_omp_random(args.trials, args.seed, out=args.out)
            print(" ".join(f"{k}={res.mean(k)[-1]:.4g}" for k in res.eps))
        elif args.command == "coding":
            rows = ex.exp_coding(args.wav, range(args.seed, args.seed + args.trials), args.N,
                                 args.scales, args.srr, args.bits_weight, out=args.out)
            for alg in ex.CODING_ALGORITHMS:
                sel = [r for r in rows if r.algorithm == alg and r.target_srr == max(args.srr)]
                print(f"{alg}: atoms={sum(r.n_atoms for r in sel) / len(sel):.1f} "
                      f"bits={sum(r.bits for r in sel) / len(sel):.1f}")
        elif args.command == "tradeoff":
            rows = ex.exp_tradeoff(args.factors, args.wav, args.seed, args.N, args.scales,
                                   args.srr, args.bits_weight, args.repeats, out=args.out)
            for r in rows:
                print(f"d={r.subsample} atoms={r.n_atoms} bits={r.bits} "
                      f"time={r.seconds:.3f}s relative={r.relative_time:.3f}")
        elif args.command == "encode":
            return _encode(args)
        elif args.command == "decode":
            return _decode(args)
    except (WavError, DecodeError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
