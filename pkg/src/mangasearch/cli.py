"""Unified command-line entry point.

Exit codes: 0 success, 1 validation/usage error, 2 I/O or file-format error.
Most commands take --json for machine-readable output on stdout.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict
from pathlib import Path

from . import vector_index
from .annotations import load_pages, parse_book, save_pages
from .detection_eval import DetectionDataset, evaluate, load_detections
from .embeddings import EmbeddingProviderSpec
from .errors import (
    AnnotationParseError,
    FileFormatError,
    MangaSearchError,
    ProviderError,
    ValidationError,
)
from .queryset import build_dialog_queryset, load_queryset, save_queryset
from .reading_order import order_book
from .retrieval import RetrievalConfig, index_book, search
from .retrieval_eval import run_benchmark, save_report
from .service import load_service_config, serve


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_provider_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--provider",
        choices=["reference", "file", "remote"],
        default="reference",
        help="embedding provider kind (default: reference)",
    )
    parser.add_argument("--dim", type=int, default=384, help="embedding dimension")
    parser.add_argument("--embeddings", help="embedding file (file provider)")
    parser.add_argument("--endpoint", help="embedding service URL (remote provider)")
    parser.add_argument(
        "--lenient", action="store_true", help="renormalize near-unit vectors instead of failing"
    )


def _provider_spec(args: argparse.Namespace) -> EmbeddingProviderSpec:
    kind = {"reference": "reference_text", "file": "file", "remote": "remote"}[args.provider]
    return EmbeddingProviderSpec(
        kind=kind,
        dim=args.dim,
        path=args.embeddings,
        endpoint=args.endpoint,
        lenient=args.lenient,
    )


def _build_parser() -> _Parser:
    parser = _Parser(prog="mangasearch", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser("ingest", help="parse an annotation file into pages.json")
    ingest.add_argument("--book", required=True, help="annotation document path")
    ingest.add_argument("--book-id", help="book identifier (default: file stem)")
    ingest.add_argument("--out", required=True, help="output pages.json")
    ingest.add_argument("--json", action="store_true")

    transcript = commands.add_parser("transcript", help="emit reading-ordered transcripts")
    transcript.add_argument("--pages", required=True)
    transcript.add_argument("--out", required=True, help="output transcript.jsonl")
    transcript.add_argument("--json", action="store_true")

    index = commands.add_parser("index", help="build a search index from pages.json")
    index.add_argument("--pages", required=True)
    index.add_argument("--mode", choices=["dialog", "scene", "page"], default="dialog")
    index.add_argument("--out", required=True, help="output index file")
    index.add_argument("--json", action="store_true")
    _add_provider_arguments(index)

    search_cmd = commands.add_parser("search", help="query an index")
    search_cmd.add_argument("--index", required=True)
    search_cmd.add_argument("--q", required=True, help="query text")
    search_cmd.add_argument("--k", type=int, default=10)
    search_cmd.add_argument("--json", action="store_true")
    _add_provider_arguments(search_cmd)

    queryset = commands.add_parser("queryset", help="build or load evaluation query sets")
    queryset_commands = queryset.add_subparsers(dest="queryset_command", required=True)
    build = queryset_commands.add_parser("build", help="sample dedup-filtered transcript queries")
    build.add_argument("--pages", required=True)
    build.add_argument("--threshold", type=float, default=0.5)
    build.add_argument("--n", type=int, default=100)
    build.add_argument("--seed", type=int, default=0)
    build.add_argument("--out", required=True)
    build.add_argument("--json", action="store_true")
    _add_provider_arguments(build)
    load = queryset_commands.add_parser("load", help="validate a query-set file")
    load.add_argument("--file", required=True)
    load.add_argument("--json", action="store_true")

    eval_detect = commands.add_parser("eval-detect", help="score detections against ground truth")
    eval_detect.add_argument("--gt", required=True, help="pages.json with ground truth")
    eval_detect.add_argument("--pred", required=True, help="predictions jsonl")
    eval_detect.add_argument("--out", required=True, help="output report.json")
    eval_detect.add_argument("--json", action="store_true")

    eval_retrieval = commands.add_parser("eval-retrieval", help="score retrieval with MRR/Success")
    eval_retrieval.add_argument("--index", required=True)
    eval_retrieval.add_argument("--queryset", required=True)
    eval_retrieval.add_argument("--k", default="1,5,10,25", help="comma-separated cutoffs")
    eval_retrieval.add_argument("--label", default="Gold boxes and text", help="method row label")
    eval_retrieval.add_argument("--out", required=True)
    eval_retrieval.add_argument("--json", action="store_true")
    _add_provider_arguments(eval_retrieval)

    serve_cmd = commands.add_parser("serve", help="run the HTTP search service")
    serve_cmd.add_argument("--config", required=True, help="service config JSON")

    return parser


def _cmd_ingest(args) -> int:
    book_path = Path(args.book)
    book_id = args.book_id or book_path.stem
    pages = parse_book(book_path.read_text(encoding="utf-8"), book_id)
    save_pages(pages, args.out)
    if args.json:
        print(json.dumps({"book_id": book_id, "pages": len(pages), "out": args.out}))
    else:
        print(f"ingested {len(pages)} pages from {args.book} -> {args.out}")
    return 0


def _cmd_transcript(args) -> int:
    pages = load_pages(args.pages)
    entries = order_book(pages)
    with open(args.out, "w", encoding="utf-8") as handle:
        for entry in entries:
            handle.write(json.dumps(asdict(entry), ensure_ascii=False) + "\n")
    if args.json:
        print(json.dumps({"entries": len(entries), "out": args.out}))
    else:
        print(f"wrote {len(entries)} transcript entries -> {args.out}")
    return 0


def _cmd_index(args) -> int:
    pages = load_pages(args.pages)
    mode = {"dialog": "dialog", "scene": "scene", "page": "page_baseline"}[args.mode]
    cfg = RetrievalConfig(mode=mode, provider=_provider_spec(args))
    index = index_book(pages, cfg)
    vector_index.save(index, args.out)
    if args.json:
        print(json.dumps({"mode": args.mode, "entries": len(index), "dim": index.dim, "out": args.out}))
    else:
        print(f"built {args.mode} index with {len(index)} entries (dim {index.dim}) -> {args.out}")
    return 0


def _cmd_search(args) -> int:
    index = vector_index.load(args.index)
    cfg = RetrievalConfig(
        mode={"dialog": "dialog", "scene": "scene", "page": "page_baseline"}[index.kind.value],
        k=args.k,
        provider=_provider_spec(args),
    )
    result = search(index, args.q, cfg)
    payload = [
        {"page_index": p.page_index, "score": p.score, "box_id": p.box_id} for p in result.pages
    ]
    if args.json:
        print(json.dumps({"query": args.q, "k": args.k, "pages": payload}))
    else:
        for rank, page in enumerate(payload, start=1):
            print(f"{rank:3d}. page {page['page_index']:4d}  score {page['score']:.4f}  box {page['box_id']}")
    return 0


def _cmd_queryset(args) -> int:
    if args.queryset_command == "build":
        pages = load_pages(args.pages)
        transcripts = [(t.text, p.page_index) for p in pages for t in p.texts if t.text.strip()]
        from .embeddings import make_provider

        provider = make_provider(_provider_spec(args))
        records = build_dialog_queryset(
            transcripts, provider, threshold=args.threshold, n=args.n, seed=args.seed
        )
        save_queryset(records, args.out)
        if args.json:
            print(json.dumps({"queries": len(records), "out": args.out}))
        else:
            print(f"sampled {len(records)} queries -> {args.out}")
        return 0
    records = load_queryset(args.file)
    if args.json:
        print(json.dumps({"queries": len(records)}))
    else:
        print(f"{args.file}: {len(records)} valid queries")
    return 0


def _cmd_eval_detect(args) -> int:
    pages = load_pages(args.gt)
    detections = load_detections(args.pred)
    dataset = DetectionDataset.from_annotations(pages, detections)
    report = evaluate(dataset)
    Path(args.out).write_text(json.dumps(report.to_dict(), indent=1), encoding="utf-8")
    if args.json:
        print(json.dumps(report.to_dict()))
    else:
        print(report.render_table())
    return 0


def _cmd_eval_retrieval(args) -> int:
    index = vector_index.load(args.index)
    records = load_queryset(args.queryset, default_origin="exact")
    k_values = [int(part) for part in args.k.split(",") if part.strip()]
    spec = _provider_spec(args)
    from .embeddings import make_provider

    provider = make_provider(spec)
    mode = {"dialog": "dialog", "scene": "scene", "page": "page_baseline"}[index.kind.value]

    def searcher(query: str, k: int) -> list[int]:
        cfg = RetrievalConfig(mode=mode, k=k, provider=spec)
        result = search(index, query, cfg, provider=provider)
        return [p.page_index for p in result.pages]

    table = run_benchmark({args.label: searcher}, records, k_values=k_values)
    save_report(table, args.out)
    if args.json:
        print(table.to_json())
    else:
        print(table.render_text())
    return 0


def _cmd_serve(args) -> int:
    serve(load_service_config(args.config))
    return 0


_HANDLERS = {
    "ingest": _cmd_ingest,
    "transcript": _cmd_transcript,
    "index": _cmd_index,
    "search": _cmd_search,
    "queryset": _cmd_queryset,
    "eval-detect": _cmd_eval_detect,
    "eval-retrieval": _cmd_eval_retrieval,
    "serve": _cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _HANDLERS[args.command](args)
    except (ValidationError, AnnotationParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileFormatError, ProviderError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except MangaSearchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
