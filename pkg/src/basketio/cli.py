"""Command-line entry point.

stdout carries data only; diagnostics go to stderr prefixed with an error
code (``E_USAGE:``, ``E_RANGE:``, ``E_IO:``, ``E_CORRUPT:`` ...). Exit status:
0 ok, 1 usage/range error, 2 I/O error, 3 corrupt data.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import bench, blockstore, codec, container, synthgen
from .codec import CodecSpec
from .errors import BasketIOError, IoFailure, UsageError
from .synthgen import Kind

MIB = 1 << 20


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _codec_arg(args) -> CodecSpec:
    return CodecSpec.parse(args.codec, args.level)


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _size(text: str) -> int:
    return bench._ints(text)[0]


def cmd_codecs(args, out) -> None:
    for info in codec.list_codecs():
        r = info.levels
        out.write(f"{int(info.template.algorithm)}\t{info.name}\t{r.start}..{r.stop - 1}\t"
                  f"{info.template.level}\t{'yes' if info.available else 'no'}\n")


def cmd_gen(args, out) -> None:
    if args.kind == "all":
        if args.corpus_mib is None:
            raise UsageError("gen --kind all needs --corpus-mib")
        specs = synthgen.corpus(int(args.corpus_mib * MIB), seed=args.seed)
    else:
        if args.count is None:
            raise UsageError("gen needs --count for a single kind")
        kind = Kind.parse(args.kind)
        specs = {kind: synthgen.GenSpec(kind, args.seed, args.count)}
    bench.write_corpus(args.out, specs, args.basket_size, codec.IDENTITY, False)
    for kind, g in specs.items():
        out.write(f"{kind.branch}\t{g.count}\t{g.raw_bytes}\n")


def cmd_write(args, out) -> None:
    spec = _codec_arg(args)
    raw = {}
    with container.open_reader(args.input, cache_entries=1, fetch_cache=False) as src:
        with container.open_writer(args.out, args.basket_size, spec, args.rac) as w:
            for name in src.branch_names:
                w.declare_branch(name)
                raw[name] = 0
                for event in src.scan(name):
                    w.append_event(name, event)
                    raw[name] += len(event)
            index = w.finalize()
    for b in index.branches:
        comp = sum(loc.record_size for loc in b.basket_locators)
        ratio = raw[b.branch_name] / comp if comp else 0.0
        out.write(f"{b.branch_name}\t{b.total_events}\t{len(b.basket_locators)}\t"
                  f"{raw[b.branch_name]}\t{comp}\t{ratio:.4f}\n")


def cmd_read(args, out) -> None:
    with container.open_reader(args.file) as reader:
        if args.index is not None:
            items = [(args.index, reader.read_event(args.branch, args.index))]
        else:
            total = reader.total_events(args.branch)
            items = zip(range(0, total, args.stride), reader.scan(args.branch, args.stride))
        for i, event in items:
            if args.format == "hex":
                out.write(f"{i}\t{event.hex()}\n")
            else:
                out.write(f"{i}\t{len(event)}\n")


def cmd_pack(args, out) -> None:
    index = blockstore.pack_file(args.input, args.out, args.block_size, _codec_arg(args))
    packed = index.packed_len
    ratio = index.original_len / packed if packed else 0.0
    out.write(f"{len(index.comp_lens)}\t{index.original_len}\t{packed}\t{ratio:.4f}\n")


def cmd_unpack(args, out) -> None:
    with blockstore.open_store(args.input, block_cache=0, fetch_cache=False) as store:
        idx = store.index
        if args.block_size is not None and args.block_size != idx.block_size:
            raise UsageError(f"file uses block size {idx.block_size}, not {args.block_size}")
        if args.codec is not None and _codec_arg(args) != idx.codec:
            raise UsageError(f"file uses codec {idx.codec}, not {_codec_arg(args)}")
        blockstore.unpack_file(store, args.out)
    out.write(f"{os.path.getsize(args.out)}\n")


def cmd_bench(args, out) -> None:
    cfg = bench.BenchConfig()
    if args.config:
        cfg = bench.load_config(args.config, cfg)
    overrides = {}
    if args.corpus_mib is not None:
        overrides["corpus_bytes"] = int(args.corpus_mib * MIB)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.reps is not None:
        overrides["repetitions"] = args.reps
    if args.codecs:
        overrides["codecs"] = [CodecSpec.parse(c) for c in args.codecs.split(",")]
    if args.sizes:
        overrides["sizes"] = [_size(s) for s in args.sizes.split(",")]
    if args.workloads is not None:
        overrides["workloads"] = [bench.WorkloadSpec.parse(w) for w in args.workloads.split(",") if w]
    if args.branches:
        overrides["branches"] = [Kind.parse(b) for b in args.branches.split(",")]
    if args.parallel:
        overrides["parallel"] = True
    if overrides:
        cfg = bench.BenchConfig(**{**cfg.__dict__, **overrides})
    report = bench.run(args.experiment, cfg)
    out.write(bench.emit_report(report, args.format))


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="basketio", description="Basket container, RAC and block compression tools")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("codecs", help="list available codecs and level ranges")
    s.set_defaults(func=cmd_codecs)

    s = sub.add_parser("gen", help="generate synthetic events into an uncompressed container")
    s.add_argument("--kind", required=True, choices=["tfloat", "tsmall", "tlarge", "all"])
    s.add_argument("--count", type=_positive, help="events to generate (single kind)")
    s.add_argument("--corpus-mib", type=float, help="total corpus size for --kind all")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--basket-size", type=_size, default=container.DEFAULT_BASKET_CAPACITY)
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("write", help="re-encode a container with another codec/basket size/RAC mode")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--basket-size", type=_size, default=container.DEFAULT_BASKET_CAPACITY)
    s.add_argument("--codec", default="deflate")
    s.add_argument("--level", type=int)
    s.add_argument("--rac", action="store_true", help="compress each event separately")
    s.set_defaults(func=cmd_write)

    s = sub.add_parser("read", help="read events from a container")
    s.add_argument("--file", required=True)
    s.add_argument("--branch", required=True)
    g = s.add_mutually_exclusive_group(required=True)
    g.add_argument("--index", type=int)
    g.add_argument("--stride", type=_positive)
    s.add_argument("--format", choices=["hex", "len"], default="hex")
    s.set_defaults(func=cmd_read)

    s = sub.add_parser("pack", help="block-compress any file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--block-size", type=_size, default=128 * 1024)
    s.add_argument("--codec", default="deflate")
    s.add_argument("--level", type=int)
    s.set_defaults(func=cmd_pack)

    s = sub.add_parser("unpack", help="restore a block-compressed file")
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--block-size", type=_size, help="optional check against the file header")
    s.add_argument("--codec", help="optional check against the file header")
    s.add_argument("--level", type=int)
    s.set_defaults(func=cmd_unpack)

    s = sub.add_parser("bench", help="run a benchmark experiment")
    s.add_argument("experiment", choices=["codecs", "rac", "blockstore"])
    s.add_argument("--corpus-mib", type=float)
    s.add_argument("--seed", type=int)
    s.add_argument("--format", choices=["csv", "table"], default="csv")
    s.add_argument("--reps", type=_positive)
    s.add_argument("--config", help="INI-style experiment config file")
    s.add_argument("--codecs", help="comma list, e.g. deflate-6,lz4,lzma-5")
    s.add_argument("--sizes", help="comma list of block/basket sizes, e.g. 4k,64k,1m")
    s.add_argument("--workloads", help="comma list: sequential, stride-N, random-N (empty = ratios only)")
    s.add_argument("--branches", help="comma list of tfloat,tsmall,tlarge")
    s.add_argument("--parallel", action="store_true", help="build ratio-sweep files concurrently")
    s.set_defaults(func=cmd_bench)
    return p


def run(argv: list[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.basicConfig(level=logging.INFO, stream=stderr, format="%(name)s: %(message)s")
        args.func(args, stdout)
    except BasketIOError as exc:
        stderr.write(f"{exc.code}: {exc}\n")
        return exc.exit_status
    except OSError as exc:
        stderr.write(f"{IoFailure.code}: {exc}\n")
        return IoFailure.exit_status
    except SystemExit as exc:
        # argparse --help
        return int(exc.code or 0)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
