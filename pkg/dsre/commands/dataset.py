"""
Subcomandos de dados: build-gds, repartition, stats e synth.
Trabalham sobre os registros JSONL, sem codificar nada (os arquivos saem sem truncamento).
"""
import argparse
import logging

from dsre.commands.common import (
    DOCS_FILE,
    SEEDS_FILE,
    STATS_FILE,
    STATS_XLSX,
    add_global_flags,
    out_path,
    parse_ratios,
    recorded_run,
    seed_of,
    split_file,
    threads_of,
)
from dsre.core.rng import Rng
from dsre.corpus import RelationSchema, read_bag_records, write_bag_records
from dsre.gds import (
    build_gds,
    dataset_stats,
    format_stats,
    read_documents,
    read_seeds,
    split_dataset,
    write_jsonl,
    write_stats,
    write_stats_xlsx,
)
from dsre.gds_config import (
    DEFAULT_DEV_FRACTION,
    DEFAULT_MAX_SNIPPETS,
    DEFAULT_RATIOS,
    DEFAULT_WINDOW,
    GDS_RELATIONS,
    SPLIT_NAMES,
    SPLIT_UNITS,
)
from dsre.synthetic import gds_inputs, trigger_corpus
from dsre.training import repartition

logger = logging.getLogger(__name__)

RATIOS_TEXT = ",".join(str(r) for r in DEFAULT_RATIOS)


def register(sub) -> None:
    p = sub.add_parser("build-gds", help="monta treino/dev/teste a partir de sementes e documentos")
    p.add_argument("--seeds", required=True, help="fatos semente (JSONL)")
    p.add_argument("--corpus", required=True, help="documentos {doc_id, tokens} (JSONL)")
    p.add_argument("--ratios", default=RATIOS_TEXT, help="proporções treino,dev,teste (default: %(default)s)")
    p.add_argument("--unit", choices=SPLIT_UNITS, default="sentences", help="unidade das proporções (default: %(default)s)")
    p.add_argument("--window", type=int, default=DEFAULT_WINDOW, help="distância máxima entre as menções (default: %(default)s)")
    p.add_argument("--max-snippets", type=int, default=DEFAULT_MAX_SNIPPETS, help="trechos por par (default: %(default)s)")
    p.add_argument("--gds-relations", action="store_true", help="exige relações do conjunto GDS")
    add_global_flags(p)
    p.set_defaults(handler=run_build_gds)

    p = sub.add_parser("repartition", help="divide um treino em treino/dev por par de entidades")
    p.add_argument("--bags", required=True, help="bags de treino (JSONL)")
    p.add_argument("--dev-fraction", type=float, default=DEFAULT_DEV_FRACTION, help="fração dos pares em dev (default: %(default)s)")
    add_global_flags(p)
    p.set_defaults(handler=run_repartition)

    p = sub.add_parser("stats", help="sentenças e pares por relação")
    p.add_argument("--bags", required=True, help="bags (JSONL)")
    add_global_flags(p, out_required=False)
    p.set_defaults(handler=run_stats)

    p = sub.add_parser("synth", help="gera um corpus sintético com frases-gatilho")
    p.add_argument("--kind", choices=("bags", "gds"), default="bags", help="bags divididas ou sementes+documentos (default: %(default)s)")
    p.add_argument("--n", type=int, default=200, help="bags (ou pares) gerados (default: %(default)s)")
    p.add_argument("--na-fraction", type=float, default=0.3, help="fração de bags NA (default: %(default)s)")
    p.add_argument("--max-sentences", type=int, default=3, help="sentenças por bag (default: %(default)s)")
    p.add_argument("--ratios", default=RATIOS_TEXT, help="proporções treino,dev,teste (default: %(default)s)")
    add_global_flags(p)
    p.set_defaults(handler=run_synth)


def _write_splits(args: argparse.Namespace, splits) -> None:
    for name, records in zip(SPLIT_NAMES, splits):
        write_bag_records(out_path(args, split_file(name)), records)
    sheets = {name: dataset_stats(records) for name, records in zip(SPLIT_NAMES, splits)}
    write_stats(out_path(args, STATS_FILE), sheets)
    write_stats_xlsx(out_path(args, STATS_XLSX), sheets)


def run_build_gds(args: argparse.Namespace) -> None:
    ratios = parse_ratios(args.ratios)
    threads = threads_of(args)
    with recorded_run(args, [args.seeds, args.corpus]):
        seeds = read_seeds(args.seeds)
        documents = read_documents(args.corpus)
        schema = RelationSchema(GDS_RELATIONS) if args.gds_relations else None
        splits = build_gds(
            seeds, documents, Rng(seed_of(args)), schema=schema, ratios=ratios,
            window=args.window, max_snippets=args.max_snippets, unit=args.unit, threads=threads,
        )
        _write_splits(args, [splits[name] for name in SPLIT_NAMES])
        print(" ".join(f"{name}={len(splits[name])}" for name in SPLIT_NAMES))


def run_repartition(args: argparse.Namespace) -> None:
    with recorded_run(args, [args.bags]):
        records = read_bag_records(args.bags)
        train, dev = repartition(records, args.dev_fraction, Rng(seed_of(args)))
        write_bag_records(out_path(args, split_file("train")), train)
        write_bag_records(out_path(args, split_file("dev")), dev)
        print(f"train={len(train)} dev={len(dev)}")


def run_stats(args: argparse.Namespace) -> None:
    with recorded_run(args, [args.bags]):
        records = read_bag_records(args.bags)
        stats = dataset_stats(records)
        print(f"{len(records)} bags")
        print(format_stats(stats), end="")
        if args.out:
            write_stats(out_path(args, STATS_FILE), {"all": stats})
            write_stats_xlsx(out_path(args, STATS_XLSX), {"all": stats})


def run_synth(args: argparse.Namespace) -> None:
    with recorded_run(args, []):
        rng = Rng(seed_of(args))
        if args.kind == "gds":
            seeds, docs = gds_inputs(args.n, rng)
            write_jsonl(out_path(args, SEEDS_FILE), seeds)
            write_jsonl(out_path(args, DOCS_FILE), docs)
            print(f"seeds={len(seeds)} docs={len(docs)}")
            return
        bags = trigger_corpus(args.n, rng, max_sentences=args.max_sentences, na_fraction=args.na_fraction)
        splits = split_dataset(bags, parse_ratios(args.ratios), rng)
        _write_splits(args, splits)
        print(" ".join(f"{name}={len(part)}" for name, part in zip(SPLIT_NAMES, splits)))
