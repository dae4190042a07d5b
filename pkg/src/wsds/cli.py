"""Command-line surface: build archives, query them, verify, and benchmark.

Exit codes: 0 ok, 1 usage, 2 query argument out of range, 3 corrupt or
unreadable archive, 4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import statistics
import sys
import time

import numpy as np

from . import archive, oracle, var, wt
from .bits import registry
from .errors import ArchiveFormatError, ContractViolation, OccurrenceRangeError
from .par import Pool

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RANGE = 2
EXIT_CORRUPT = 3
EXIT_VERIFY = 4

ALGOS = ("naive", "packed", "sorted", "domain")
VARIANTS = ("tree", "shaped", "multiary", "matrix")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read_symbols(path: str, width: int) -> np.ndarray:
    dtype = {8: "<u1", 16: "<u2", 32: "<u4"}[width]
    try:
        return np.fromfile(path, dtype=dtype).astype(np.int64)
    except OSError as exc:
        raise UsageError(f"cannot read input: {exc}")


def _build_structure(raw, variant: str, algo: str, tau, parts, degree, pool):
    codes, alphabet = wt.map_alphabet(raw)
    sigma = len(alphabet)
    if variant == "tree":
        if algo == "domain":
            return wt.build_domain_decomp(codes, sigma, parts, tau,
                                          alphabet=alphabet, pool=pool)
        builder = {"naive": wt.build_naive, "packed": wt.build_packed_serial,
                   "sorted": wt.build_parallel_sorted}[algo]
        return builder(codes, sigma, tau, alphabet=alphabet, pool=pool)
    if variant == "shaped":
        freqs = np.bincount(codes.unpack().astype(np.int64), minlength=sigma) \
            if sigma else []
        book = var.huffman_codebook(freqs) if sigma else var.Codebook({})
        return var.build_shaped(codes, book, tau, alphabet=alphabet, pool=pool)
    if variant == "multiary":
        return var.build_multiary(codes, sigma, degree, tau, alphabet=alphabet, pool=pool)
    return var.build_wavelet_matrix(codes, sigma, tau, alphabet=alphabet, pool=pool)


def cmd_build(args) -> int:
    if args.degree is not None and args.variant != "multiary":
        raise UsageError("--degree applies only to --variant multiary")
    if args.variant != "tree" and args.algo != "packed":
        raise UsageError("--algo selects tree construction; other variants have one builder")
    if args.parts != 1 and args.algo != "domain":
        raise UsageError("--parts applies only to --algo domain")
    width = 8 if args.text else args.width
    raw = _read_symbols(args.input, width)
    pool = Pool(args.threads)
    t0 = time.perf_counter()
    structure = _build_structure(raw, args.variant, args.algo, args.tau, args.parts,
                                 args.degree if args.degree is not None else 4, pool)
    wall_ms = (time.perf_counter() - t0) * 1e3
    nbytes = archive.save(structure, args.output)
    work = structure.build_meter.work + structure.rs_meter.work
    span = structure.build_meter.span + structure.rs_meter.span
    print(f"n={structure.n} sigma={structure.sigma} bytes={nbytes} "
          f"work={work} span={span} wall_ms={wall_ms:.1f}")
    return EXIT_OK


def _parse_symbol(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        if len(text) == 1:
            return ord(text)
        raise UsageError(f"symbol must be an integer or a single character: {text!r}")


def cmd_query(args) -> int:
    try:
        structure = archive.load(args.archive)
    except ArchiveFormatError as exc:
        print(f"corrupt archive: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except OSError as exc:
        print(f"cannot read archive: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    op = args.op
    rest = args.args
    try:
        if op == "access":
            if len(rest) != 1:
                raise UsageError("access takes one position")
            print(structure.access(int(rest[0])))
        elif op in ("rank", "rankle"):
            if len(rest) != 2:
                raise UsageError(f"{op} takes a symbol and a position")
            sym = _parse_symbol(rest[0])
            if op == "rankle" and not hasattr(structure, "rank_le"):
                raise UsageError("rankle is not defined for this variant")
            fn = structure.rank if op == "rank" else structure.rank_le
            print(fn(sym, int(rest[1])))
        elif op == "select":
            if len(rest) != 2:
                raise UsageError("select takes a symbol and an occurrence index")
            print(structure.select(_parse_symbol(rest[0]), int(rest[1])))
        else:
            raise UsageError(f"unknown op {op!r}")
    except OccurrenceRangeError:
        print("occurrence out of range", file=sys.stderr)
        return EXIT_RANGE
    except IndexError:
        print("index out of range", file=sys.stderr)
        return EXIT_RANGE
    return EXIT_OK


# -- verification sweep --------------------------------------------------------


def check_structure(structure, raw, rng=None, sample: int = 0) -> list[str]:
    """Compare every query against the scan references; returns failures.

    Exhaustive when sample == 0, otherwise `sample` probes per kind.
    """
    raw = list(raw)
    n = len(raw)
    fails = []
    alpha = sorted(set(raw))
    has_le = hasattr(structure, "rank_le")
    if sample and rng is None:
        rng = np.random.default_rng(0)
    positions = range(n) if not sample else [int(x) for x in rng.integers(0, max(n, 1), sample)]
    for i in positions:
        got = structure.access(i)
        if got != raw[i]:
            fails.append(f"access({i}) = {got}, expected {raw[i]}")
            break
    probes = ([(c, i) for c in alpha for i in range(n)] if not sample else
              [(alpha[int(rng.integers(0, len(alpha)))], int(rng.integers(0, n)))
               for _ in range(sample)])
    counts = {c: raw.count(c) for c in alpha}
    running = {c: 0 for c in alpha}
    if not sample:
        # one pass computes every exhaustive rank expectation
        expected = {}
        le_expected = {}
        run_le = [0] * (len(alpha) + 1)
        index_of = {c: k for k, c in enumerate(alpha)}
        for i, x in enumerate(raw):
            running[x] += 1
            for c in alpha:
                expected[(c, i)] = running[c]
        cum = [0] * len(alpha)
        for i, x in enumerate(raw):
            cum[index_of[x]] += 1
            acc = 0
            for k, c in enumerate(alpha):
                acc += cum[k]
                le_expected[(c, i)] = acc
    for c, i in probes:
        want = expected[(c, i)] if not sample else oracle.ref_rank(raw, c, i)
        got = structure.rank(c, i)
        if got != want:
            fails.append(f"rank({c}, {i}) = {got}, expected {want}")
            break
        if has_le:
            want_le = le_expected[(c, i)] if not sample else oracle.ref_rank_le(raw, c, i)
            got_le = structure.rank_le(c, i)
            if got_le != want_le:
                fails.append(f"rank_le({c}, {i}) = {got_le}, expected {want_le}")
                break
    sel_probes = ([(c, j) for c in alpha for j in range(1, counts[c] + 1)] if not sample
                  else [(c, int(rng.integers(1, counts[c] + 1)))
                        for c in (alpha[int(rng.integers(0, len(alpha)))]
                                  for _ in range(sample)) if counts[c]])
    occ_positions = {c: [] for c in alpha}
    for i, x in enumerate(raw):
        occ_positions[x].append(i)
    for c, j in sel_probes:
        got = structure.select(c, j)
        want = occ_positions[c][j - 1]
        if got != want:
            fails.append(f"select({c}, {j}) = {got}, expected {want}")
            break
    return fails


def cmd_verify(args) -> int:
    variants = VARIANTS if args.variant == "all" else (args.variant,)
    algos = tuple(a.strip() for a in args.algo_set.split(",") if a.strip())
    for a in algos:
        if a not in ALGOS:
            raise UsageError(f"unknown algorithm {a!r}")
    rng = np.random.default_rng(args.seed)
    failures = 0
    for trial in range(args.seeds):
        seed = int(rng.integers(0, 2 ** 31))
        trial_rng = np.random.default_rng(seed)
        n = int(trial_rng.integers(0, args.n + 1))
        sigma_raw = int(trial_rng.integers(1, args.sigma + 1))
        raw = trial_rng.integers(0, sigma_raw, n)
        codes, alphabet = wt.map_alphabet(raw)
        sigma = len(alphabet)
        tau = int(trial_rng.integers(1, 5))
        pool = Pool(args.threads)
        blobs = {}
        for algo in algos:
            tree = _build_structure(raw, "tree", algo, tau,
                                    int(trial_rng.integers(1, 9)), 4, pool)
            blobs[algo] = archive.serialize(tree)
        if len(set(blobs.values())) > 1:
            print(f"FAIL seed={seed}: builders disagree "
                  f"({', '.join(sorted(blobs))})", file=sys.stderr)
            failures += 1
            continue
        sample = 0 if n <= 4096 else 256
        for variant in variants:
            if variant == "multiary" and sigma < 2:
                continue
            structure = _build_structure(raw, variant, "packed", tau, 1, 4, pool)
            fails = check_structure(structure, raw, trial_rng, sample)
            if fails:
                print(f"FAIL seed={seed} variant={variant}: {fails[0]}", file=sys.stderr)
                failures += 1
    if failures:
        print(f"{failures} failing instance(s)", file=sys.stderr)
        return EXIT_VERIFY
    print(f"verify: {args.seeds} instance(s) ok "
          f"(n<={args.n}, sigma<={args.sigma}, variants={','.join(variants)})")
    return EXIT_OK


def _csv_ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_bench(args) -> int:
    algos = tuple(a.strip() for a in args.algos.split(",") if a.strip())
    for a in algos:
        if a not in ALGOS:
            raise UsageError(f"unknown algorithm {a!r}")
    rows = []
    for n in _csv_ints(args.sizes):
        for sigma in _csv_ints(args.sigma):
            raw = np.random.default_rng(hash((n, sigma)) & 0xFFFF).integers(0, sigma, n)
            for tau in _csv_ints(args.tau):
                for parts in _csv_ints(args.parts):
                    for threads in _csv_ints(args.threads):
                        pool = Pool(threads)
                        for algo in algos:
                            if algo != "domain" and parts != _csv_ints(args.parts)[0]:
                                continue  # parts only varies the domain algorithm
                            walls = []
                            structure = None
                            for _ in range(max(1, args.reps)):
                                t0 = time.perf_counter()
                                structure = _build_structure(
                                    raw, "tree", algo, tau, parts, 4, pool)
                                walls.append((time.perf_counter() - t0) * 1e3)
                            blob = archive.serialize(structure)
                            rows.append({
                                "algorithm": algo, "n": n, "sigma": sigma, "d": 0,
                                "tau": tau, "P": parts if algo == "domain" else 1,
                                "threads": threads,
                                "wall_ms": round(statistics.median(walls), 3),
                                "work_ops": structure.build_meter.work
                                + structure.rs_meter.work,
                                "span_ops": structure.build_meter.span
                                + structure.rs_meter.span,
                                "table_bytes": registry().table_bytes(),
                                "structure_bytes": len(blob),
                            })
                        pool.shutdown()
    fieldnames = ["algorithm", "n", "sigma", "d", "tau", "P", "threads", "wall_ms",
                  "work_ops", "span_ops", "table_bytes", "structure_bytes"]
    try:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)
    except OSError as exc:
        raise UsageError(f"cannot write CSV: {exc}")
    print(f"bench: {len(rows)} rows -> {args.csv}")
    return EXIT_OK


def _make_parser() -> _Parser:
    p = _Parser(prog="wsds", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a structure from raw fixed-width symbols")
    b.add_argument("input")
    b.add_argument("output")
    b.add_argument("--width", type=int, choices=(8, 16, 32), default=8)
    b.add_argument("--text", action="store_true", help="treat input as width-8 bytes")
    b.add_argument("--variant", choices=VARIANTS, default="tree")
    b.add_argument("--algo", choices=ALGOS, default="packed")
    b.add_argument("--tau", type=int, default=None, help="slice width override")
    b.add_argument("--parts", type=int, default=1)
    b.add_argument("--degree", type=int, default=None)
    b.add_argument("--threads", type=int, default=None)
    b.set_defaults(fn=cmd_build)

    q = sub.add_parser("query", help="answer one query against an archive")
    q.add_argument("archive")
    q.add_argument("op", choices=("access", "rank", "select", "rankle"))
    q.add_argument("args", nargs="*")
    q.set_defaults(fn=cmd_query)

    v = sub.add_parser("verify", help="random cross-checks against the references")
    v.add_argument("--n", type=int, default=4096)
    v.add_argument("--sigma", type=int, default=64)
    v.add_argument("--variant", choices=VARIANTS + ("all",), default="all")
    v.add_argument("--seeds", type=int, default=25)
    v.add_argument("--seed", type=int, default=0, help="master seed")
    v.add_argument("--algo-set", default="naive,packed,sorted,domain")
    v.add_argument("--threads", type=int, default=None)
    v.set_defaults(fn=cmd_verify)

    k = sub.add_parser("bench", help="construction benchmark grid, CSV output")
    k.add_argument("--sizes", default="65536,262144")
    k.add_argument("--sigma", default="256")
    k.add_argument("--tau", default="4")
    k.add_argument("--parts", default="1")
    k.add_argument("--threads", default="1")
    k.add_argument("--algos", default="naive,packed,sorted,domain")
    k.add_argument("--reps", type=int, default=3)
    k.add_argument("--csv", required=True)
    k.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ContractViolation as exc:
        print(f"invalid arguments: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
