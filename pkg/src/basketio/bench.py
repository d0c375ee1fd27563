"""Benchmark harness: codec matrix, RAC write/read study, blockstore sweeps.

Every experiment returns a :class:`BenchReport`; :func:`emit_report` renders
it as CSV (the hand-off format for plotting) or a readable table.

Timings are medians over ``repetitions`` runs, measured with a monotonic
wall clock around the process CPU clock. "Cold" and "hot" caches are the
explicit fetch layers of the container reader and the block store, not the
OS page cache.
"""

from __future__ import annotations

import configparser
import csv
import io
import logging
import os
import statistics
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from . import blockstore, codec, container, kernels, synthgen
from .codec import CodecSpec
from .errors import BasketIOError, UsageError
from .synthgen import Kind

log = logging.getLogger(__name__)

KIB = 1024
MIB = 1024 * KIB
DEFAULT_SIZES = (4 * KIB, 16 * KIB, 64 * KIB, 256 * KIB, MIB)
TABLE1_CODECS = ("identity", "deflate-1", "deflate-5", "deflate-6", "deflate-9", "lz4",
                 "lz4hc-5", "lz4hc-9", "lzma-1", "lzma-5", "lzma-9")

COLD = "cold"
HOT = "hot"


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str  # "sequential", "random" or "stride"
    n: int = 1

    def __post_init__(self):
        if self.kind not in ("sequential", "random", "stride"):
            raise UsageError(f"unknown workload kind {self.kind!r}")
        if self.n < 1:
            raise UsageError("workload parameter must be >= 1")

    @property
    def label(self) -> str:
        if self.kind == "sequential":
            return "sequential"
        return f"{self.kind}-{self.n}"

    @classmethod
    def parse(cls, text: str) -> "WorkloadSpec":
        text = text.strip().lower()
        if text in ("sequential", "all", "stride-1"):
            return cls("sequential")
        kind, _, n = text.partition("-")
        return cls(kind, int(n or 1))

    def indices(self, total: int, seed: int) -> np.ndarray:
        if self.kind == "sequential":
            return np.arange(total)
        if self.kind == "stride":
            return np.arange(0, total, self.n)
        rng = np.random.default_rng(seed)
        return rng.choice(total, size=min(self.n, total), replace=False)


SEQUENTIAL = WorkloadSpec("sequential")


@dataclass
class BenchConfig:
    corpus_bytes: int = 192 * MIB
    seed: int = 0
    codecs: list[CodecSpec] = field(default_factory=lambda: [CodecSpec.parse(c) for c in TABLE1_CODECS])
    sizes: list[int] = field(default_factory=lambda: list(DEFAULT_SIZES))
    # None picks each experiment's default workloads; [] runs ratios only
    workloads: list[WorkloadSpec] | None = None
    cache_modes: list[str] = field(default_factory=lambda: [COLD, HOT])
    repetitions: int = 3
    basket_size: int = 64 * KIB
    data_codec: CodecSpec = codec.DEFAULT
    branches: list[Kind] = field(default_factory=lambda: list(Kind))
    workdir: str | None = None
    parallel: bool = False

    def __post_init__(self):
        if self.repetitions < 1:
            raise UsageError("repetitions must be >= 1")
        for s in self.sizes:
            blockstore.check_block_size(s)
        for m in self.cache_modes:
            if m not in (COLD, HOT):
                raise UsageError(f"unknown cache mode {m!r}")

    def corpus(self) -> dict[Kind, synthgen.GenSpec]:
        specs = synthgen.corpus(self.corpus_bytes, seed=self.seed)
        return {k: s for k, s in specs.items() if k in self.branches}


@dataclass
class BenchRow:
    config_id: str
    codec: str
    size: int | None = None
    workload: str = ""
    cache_mode: str = ""
    real_time: float | None = None
    cpu_time: float | None = None
    raw_size: int | None = None
    compressed_size: int | None = None
    ratio: float | None = None
    bytes_fetched: int | None = None
    bytes_decompressed: int | None = None
    blocks_or_baskets_touched: int | None = None
    repetitions: int | None = None
    error: str = ""

    def __post_init__(self):
        if self.ratio is None and self.raw_size is not None and self.compressed_size:
            self.ratio = self.raw_size / self.compressed_size


COLUMNS = [f.name for f in fields(BenchRow)]
_INT_COLUMNS = {"size", "raw_size", "compressed_size", "bytes_fetched", "bytes_decompressed",
                "blocks_or_baskets_touched", "repetitions"}
_FLOAT_COLUMNS = {"real_time", "cpu_time", "ratio"}


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    meta: dict[str, str] = field(default_factory=dict)

    def select(self, **match) -> list[BenchRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]

    def one(self, **match) -> BenchRow:
        rows = self.select(**match)
        if len(rows) != 1:
            raise LookupError(f"{len(rows)} rows match {match}")
        return rows[0]

    def extend(self, other: "BenchReport") -> None:
        self.rows.extend(other.rows)
        self.meta.update(other.meta)


def _meta(config: BenchConfig) -> dict[str, str]:
    return {
        "seed": str(config.seed),
        "corpus_bytes": str(config.corpus_bytes),
        "rng": synthgen.RNG_ALGORITHM,
        "kernels": kernels.IMPLEMENTATION,
    }


def measure(fn: Callable[[], object], repetitions: int):
    """Run ``fn`` repeatedly; return (median real s, median cpu s, results)."""
    reals, cpus, results = [], [], []
    for _ in range(repetitions):
        r0 = time.perf_counter()
        c0 = time.process_time()
        results.append(fn())
        c1 = time.process_time()
        r1 = time.perf_counter()
        reals.append(r1 - r0)
        cpus.append(c1 - c0)
    return statistics.median(reals), statistics.median(cpus), results


def _same(values: list, what: str):
    if any(v != values[0] for v in values):
        raise AssertionError(f"{what} differs across repetitions: {values}")
    return values[0]


# -- codec matrix ------------------------------------------------------------

def corpus_bytes(config: BenchConfig) -> bytes:
    """Raw concatenation of every corpus branch."""
    parts = []
    for spec in config.corpus().values():
        parts.extend(b.tobytes() for b in synthgen.iter_batches(spec))
    return b"".join(parts)


def bench_codecs(config: BenchConfig, data: bytes | None = None) -> BenchReport:
    """Compress/decompress the corpus in basket-sized chunks with each codec.

    Two rows per codec: workload ``compress`` and ``decompress``, both
    carrying the compressed size and ratio.
    """
    if data is None:
        data = corpus_bytes(config)
    chunk = config.basket_size
    view = memoryview(data)
    chunks = [view[i:i + chunk] for i in range(0, len(data), chunk)]
    report = BenchReport(meta=_meta(config))
    for spec in config.codecs:
        log.info("codecs: %s", spec)
        try:
            real_c, cpu_c, out = measure(lambda: [codec.compress(spec, c) for c in chunks],
                                         config.repetitions)
            frames = out[-1]
            size = sum(map(len, frames))
            real_d, cpu_d, back = measure(
                lambda: [codec.decompress(spec, f, len(c)) for f, c in zip(frames, chunks)],
                config.repetitions)
            if b"".join(back[-1]) != data:
                raise AssertionError(f"{spec}: round trip mismatch")
        except BasketIOError as exc:
            report.rows.append(BenchRow("codecs/all/chunked", spec.name, chunk, "compress",
                                        error=f"{exc.code}: {exc}"))
            continue
        for wl, rt, ct in (("compress", real_c, cpu_c), ("decompress", real_d, cpu_d)):
            report.rows.append(BenchRow(
                "codecs/all/chunked", spec.name, chunk, wl, "", rt, ct, len(data), size,
                bytes_decompressed=len(data) if wl == "decompress" else None,
                blocks_or_baskets_touched=len(chunks), repetitions=config.repetitions))
        del out, back, frames
    return report


# -- container helpers -------------------------------------------------------

def write_corpus(path, specs: dict[Kind, synthgen.GenSpec], basket_size: int,
                 spec: CodecSpec, rac: bool) -> container.TreeIndex:
    w = container.open_writer(path, basket_size, spec, rac)
    with w:
        for kind, g in specs.items():
            w.declare_branch(kind.branch)
            for payload in synthgen.iter_payloads(g):
                w.append_event(kind.branch, payload)
        return w.finalize()


def branch_size(index: container.TreeIndex, branch: str) -> int:
    return sum(loc.record_size for loc in index.branch(branch).basket_locators)


def _read_container(reader: container.TreeReader, branch: str, wl: WorkloadSpec, seed: int) -> int:
    total = reader.total_events(branch)
    if wl.kind == "random":
        n = 0
        for i in wl.indices(total, seed).tolist():
            n += len(reader.read_event(branch, i))
        return n
    stride = 1 if wl.kind == "sequential" else wl.n
    return sum(len(e) for e in reader.scan(branch, stride))


def _container_run(reader: container.TreeReader, branch: str, wl: WorkloadSpec,
                   cache_mode: str, config: BenchConfig):
    """Time one workload; returns (real, cpu, fetched, decompressed, touched)."""
    if cache_mode == HOT:
        reader.warm()

    def once():
        if cache_mode == COLD:
            reader.drop_caches()
        else:
            reader.drop_decoded()
        reader.stats.reset()
        _read_container(reader, branch, wl, config.seed)
        s = reader.stats
        return s.bytes_fetched, s.bytes_decompressed, s.baskets_touched

    real, cpu, res = measure(once, config.repetitions)
    fetched, decompressed, touched = _same(res, "container accounting")
    return real, cpu, fetched, decompressed, touched


# -- RAC study ---------------------------------------------------------------

def bench_rac(config: BenchConfig) -> BenchReport:
    workloads = [WorkloadSpec("random", 1000), SEQUENTIAL] if config.workloads is None else config.workloads
    specs = config.corpus()
    report = BenchReport(meta=_meta(config))
    cname = config.data_codec.name
    with tempfile.TemporaryDirectory(dir=config.workdir) as tmp:
        paths = {}
        indexes = {}
        for rac in (False, True):
            mode = "rac" if rac else "plain"
            path = os.path.join(tmp, f"{mode}.rcf")
            log.info("rac: writing %s container", mode)
            real, cpu, idx = measure(
                lambda: write_corpus(path, specs, config.basket_size, config.data_codec, rac), 1)
            indexes[mode] = idx[-1]
            paths[mode] = path
            raw_total = sum(g.raw_bytes for g in specs.values())
            report.rows.append(BenchRow(f"rac/all/{mode}", cname, config.basket_size, "write", "",
                                        real, cpu, raw_total, os.path.getsize(path), repetitions=1))
            for kind, g in specs.items():
                report.rows.append(BenchRow(
                    f"rac/{kind.branch}/{mode}", cname, config.basket_size, "size",
                    raw_size=g.raw_bytes, compressed_size=branch_size(idx[-1], kind.branch),
                    blocks_or_baskets_touched=len(idx[-1].branch(kind.branch).basket_locators)))
        for mode, path in paths.items():
            with container.open_reader(path) as reader:
                for kind in specs:
                    for wl in workloads:
                        for cache_mode in config.cache_modes:
                            log.info("rac: %s %s %s %s", mode, kind.branch, wl.label, cache_mode)
                            real, cpu, fetched, dec, touched = _container_run(
                                reader, kind.branch, wl, cache_mode, config)
                            report.rows.append(BenchRow(
                                f"rac/{kind.branch}/{mode}", cname, config.basket_size, wl.label,
                                cache_mode, real, cpu, bytes_fetched=fetched,
                                bytes_decompressed=dec, blocks_or_baskets_touched=touched,
                                repetitions=config.repetitions))
    return report


# -- external (block) compression vs container --------------------------------

def _store_run(store: blockstore.BlockStore, offsets: np.ndarray, lengths: np.ndarray,
               cache_mode: str, config: BenchConfig):
    offs, lens = offsets.tolist(), lengths.tolist()

    def read_all():
        for o, n in zip(offs, lens):
            store.read_range(o, n)

    touched_blocks = set()
    bs = store.index.block_size
    for o, n in zip(offs, lens):
        touched_blocks.update(range(o // bs, (o + n - 1) // bs + 1))
    if cache_mode == HOT:
        store.block_cache = None
        store.drop_caches()
        read_all()

    def once():
        if cache_mode == COLD:
            store.drop_caches()
        store.stats.reset()
        read_all()
        s = store.stats
        return s.bytes_fetched_compressed, s.bytes_decompressed

    real, cpu, res = measure(once, config.repetitions)
    fetched, dec = _same(res, "blockstore accounting")
    return real, cpu, fetched, dec, len(touched_blocks)


def bench_blockstore(config: BenchConfig) -> BenchReport:
    """Blockstore-vs-container sweep over block/basket sizes.

    The blockstore input is the corpus written as an uncompressed container
    (64 KiB baskets); the containers at each basket size use
    ``config.data_codec``. Ratios on both sides divide the raw event bytes by
    the bytes on disk.
    """
    workloads = config.workloads
    if workloads is None:
        workloads = [SEQUENTIAL, WorkloadSpec("stride", 10), WorkloadSpec("stride", 100)]
    specs = config.corpus()
    raw_total = sum(g.raw_bytes for g in specs.values())
    cname = config.data_codec.name
    report = BenchReport(meta=_meta(config))
    with tempfile.TemporaryDirectory(dir=config.workdir) as tmp:
        raw_path = os.path.join(tmp, "raw.rcf")
        write_corpus(raw_path, specs, container.DEFAULT_BASKET_CAPACITY, codec.IDENTITY, False)
        raw_reader = container.open_reader(raw_path)
        extents = {k: raw_reader.event_extents(k.branch) for k in specs}
        raw_reader.close()

        def build(size):
            cpath = os.path.join(tmp, f"c{size}.rcf")
            ppath = os.path.join(tmp, f"p{size}.bpk")
            idx = write_corpus(cpath, specs, size, config.data_codec, False)
            bidx = blockstore.pack_file(raw_path, ppath, size, config.data_codec)
            return size, cpath, idx, ppath, bidx

        if config.parallel:
            with ThreadPoolExecutor() as pool:
                built = list(pool.map(build, config.sizes))
        else:
            built = [build(s) for s in config.sizes]

        for size, cpath, idx, ppath, bidx in built:
            log.info("blockstore: size %d", size)
            report.rows.append(BenchRow("blockstore/all/container", cname, size, "size",
                                        raw_size=raw_total, compressed_size=os.path.getsize(cpath)))
            report.rows.append(BenchRow("blockstore/all/packed", cname, size, "size",
                                        raw_size=raw_total, compressed_size=os.path.getsize(ppath),
                                        blocks_or_baskets_touched=len(bidx.comp_lens)))
            with container.open_reader(cpath) as reader, blockstore.open_store(ppath) as store:
                for kind in specs:
                    offsets, lengths = extents[kind]
                    for wl in workloads:
                        sel = wl.indices(len(offsets), config.seed)
                        for cache_mode in config.cache_modes:
                            real, cpu, fetched, dec, touched = _container_run(
                                reader, kind.branch, wl, cache_mode, config)
                            report.rows.append(BenchRow(
                                f"blockstore/{kind.branch}/container", cname, size, wl.label,
                                cache_mode, real, cpu, bytes_fetched=fetched,
                                bytes_decompressed=dec, blocks_or_baskets_touched=touched,
                                repetitions=config.repetitions))
                            real, cpu, fetched, dec, touched = _store_run(
                                store, offsets[sel], lengths[sel], cache_mode, config)
                            report.rows.append(BenchRow(
                                f"blockstore/{kind.branch}/packed", cname, size, wl.label,
                                cache_mode, real, cpu, bytes_fetched=fetched,
                                bytes_decompressed=dec, blocks_or_baskets_touched=touched,
                                repetitions=config.repetitions))
    return report


# -- reports -----------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(report: BenchReport, fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        for k, v in report.meta.items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in report.rows:
            w.writerow([_fmt(getattr(row, c)) for c in COLUMNS])
        return buf.getvalue()
    if fmt == "table":
        cells = [COLUMNS] + [[_table_cell(getattr(r, c)) for c in COLUMNS] for r in report.rows]
        widths = [max(len(row[i]) for row in cells) for i in range(len(COLUMNS))]
        lines = [f"{k}: {v}" for k, v in report.meta.items()]
        for n, row in enumerate(cells):
            lines.append("  ".join(c.rjust(w) if n else c.ljust(w) for c, w in zip(row, widths)).rstrip())
            if n == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"
    raise UsageError(f"unknown report format {fmt!r}")


def _table_cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.4g}"
    return str(value)


def parse_csv(text: str) -> BenchReport:
    meta = {}
    body = []
    for line in text.splitlines(keepends=True):
        if line.startswith("# ") and not body:
            k, _, v = line[2:].rstrip("\n").partition("=")
            meta[k] = v
        else:
            body.append(line)
    reader = csv.DictReader(io.StringIO("".join(body)))
    if reader.fieldnames != COLUMNS:
        raise ValueError(f"unexpected CSV columns {reader.fieldnames}")
    rows = []
    for rec in reader:
        kw = {}
        for c in COLUMNS:
            v = rec[c]
            if c in _INT_COLUMNS:
                kw[c] = int(v) if v else None
            elif c in _FLOAT_COLUMNS:
                kw[c] = float(v) if v else None
            else:
                kw[c] = v
        rows.append(BenchRow(**kw))
    return BenchReport(rows, meta)


# -- declarative config ------------------------------------------------------

def _ints(text: str) -> list[int]:
    out = []
    for part in text.replace(",", " ").split():
        part = part.lower()
        mult = 1
        if part.endswith("k"):
            part, mult = part[:-1], KIB
        elif part.endswith("m"):
            part, mult = part[:-1], MIB
        out.append(int(part) * mult)
    return out


def load_config(path_or_text: str, base: BenchConfig | None = None) -> BenchConfig:
    """Read ``key = value`` settings from INI-style sections.

    Recognised sections: ``[corpus]`` (mib, bytes, seed, branches),
    ``[codecs]`` (list), ``[sizes]`` (list), ``[workloads]`` (list),
    ``[timing]`` (repetitions, cache_modes, parallel), ``[data]``
    (codec, basket_size).
    """
    cp = configparser.ConfigParser()
    if os.path.exists(path_or_text):
        with open(path_or_text, encoding="utf-8") as fh:
            cp.read_file(fh)
    else:
        cp.read_string(path_or_text)
    cfg = base or BenchConfig()
    kw = {f.name: getattr(cfg, f.name) for f in fields(BenchConfig)}
    if cp.has_section("corpus"):
        s = cp["corpus"]
        if "mib" in s:
            kw["corpus_bytes"] = int(float(s["mib"]) * MIB)
        if "bytes" in s:
            kw["corpus_bytes"] = int(s["bytes"])
        if "seed" in s:
            kw["seed"] = int(s["seed"])
        if "branches" in s:
            kw["branches"] = [Kind.parse(b) for b in s["branches"].replace(",", " ").split()]
    if cp.has_option("codecs", "list"):
        kw["codecs"] = [CodecSpec.parse(c) for c in cp["codecs"]["list"].replace(",", " ").split()]
    if cp.has_option("sizes", "list"):
        kw["sizes"] = _ints(cp["sizes"]["list"])
    if cp.has_option("workloads", "list"):
        kw["workloads"] = [WorkloadSpec.parse(w) for w in cp["workloads"]["list"].replace(",", " ").split()]
    if cp.has_section("timing"):
        s = cp["timing"]
        if "repetitions" in s:
            kw["repetitions"] = int(s["repetitions"])
        if "cache_modes" in s:
            kw["cache_modes"] = s["cache_modes"].replace(",", " ").split()
        if "parallel" in s:
            kw["parallel"] = s.getboolean("parallel")
    if cp.has_section("data"):
        s = cp["data"]
        if "codec" in s:
            kw["data_codec"] = CodecSpec.parse(s["codec"])
        if "basket_size" in s:
            kw["basket_size"] = _ints(s["basket_size"])[0]
    return BenchConfig(**kw)


def run(experiment: str, config: BenchConfig) -> BenchReport:
    experiments: dict[str, Callable[[BenchConfig], BenchReport]] = {
        "codecs": bench_codecs,
        "rac": bench_rac,
        "blockstore": bench_blockstore,
    }
    try:
        fn = experiments[experiment]
    except KeyError:
        raise UsageError(f"unknown experiment {experiment!r}") from None
    return fn(config)

