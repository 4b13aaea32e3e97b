"""
Subcomando train: lê bags de treino (e dev), monta o vocabulário, treina com parada antecipada
pela AUC de dev e grava o checkpoint da melhor época.
Sem --dev, o treino é repartido 80/20 por par de entidades.
"""
import argparse
import logging
from typing import List, Optional, Tuple

from dsre.checkpoint import save_checkpoint
from dsre.commands.common import (
    EPOCHS_FILE,
    MODEL_FILE,
    add_global_flags,
    out_path,
    recorded_run,
    threads_of,
)
from dsre.config import MODEL_KINDS, TrainConfig, resolve_config
from dsre.core.rng import Rng
from dsre.corpus import (
    InstanceBag,
    RelationSchema,
    Vocabulary,
    encode_bag,
    load_pretrained_embeddings,
    read_bag_records,
)
from dsre.gds_config import DEFAULT_DEV_FRACTION
from dsre.model import build_model
from dsre.training import fit, repartition

logger = logging.getLogger(__name__)

# flag -> (campo do TrainConfig, tipo)
CONFIG_FLAGS = {
    "--lr": ("lr", float),
    "--batch-size": ("batch_size", int),
    "--dropout": ("dropout", float),
    "--d-w": ("d_w", int),
    "--d-p": ("d_p", int),
    "--max-epochs": ("max_epochs", int),
    "--patience": ("patience", int),
    "--max-position": ("max_position", int),
    "--max-length": ("max_length", int),
    "--filters": ("c", int),
    "--window": ("w", int),
    "--hidden": ("h", int),
    "--init-scale": ("init_scale", float),
    "--auc-max-recall": ("auc_max_recall", float),
}


def _default(field: str):
    return TrainConfig.model_fields[field].default


def register(sub) -> None:
    parser = sub.add_parser("train", help="treina PCNN, BGWA ou EA")
    parser.add_argument("--model", choices=MODEL_KINDS, default=None,
                        help=f"codificador (default: {_default('model')})")
    parser.add_argument("--train", required=True, help="bags de treino (JSONL)")
    parser.add_argument("--dev", default=None, help="bags de dev (JSONL); sem ele, 20%% dos pares do treino")
    parser.add_argument("--embeddings", default=None, help="vetores pré-treinados em texto (palavra v1 ... v_dw)")
    for flag, (field, kind) in CONFIG_FLAGS.items():
        parser.add_argument(flag, dest=field, type=kind, default=None, help=f"(default: {_default(field)})")
    add_global_flags(parser)
    parser.set_defaults(handler=run)


def config_from_args(args: argparse.Namespace) -> TrainConfig:
    overrides = {field: getattr(args, field) for field, _ in CONFIG_FLAGS.values()}
    overrides["model"] = args.model
    overrides["seed"] = args.seed
    return resolve_config(args.config, overrides)


def load_training_data(
    train_path: str, dev_path: Optional[str], cfg: TrainConfig
) -> Tuple[List[InstanceBag], List[InstanceBag], RelationSchema, Vocabulary]:
    """Esquema = NA + relações na ordem do treino e depois do dev; o vocabulário vem só do treino."""
    train_records = read_bag_records(train_path)
    if dev_path:
        dev_records = read_bag_records(dev_path)
    else:
        train_records, dev_records = repartition(train_records, DEFAULT_DEV_FRACTION, Rng(cfg.seed))
    schema = RelationSchema.infer(r for rec in train_records + dev_records for r in rec.relations)
    vocab = Vocabulary(embedding_dim=cfg.d_w)
    train = [encode_bag(rec, vocab, schema, cfg.max_position, cfg.max_length) for rec in train_records]
    vocab.freeze()
    dev = [encode_bag(rec, vocab, schema, cfg.max_position, cfg.max_length) for rec in dev_records]
    logger.info("treino: %d bags, dev: %d bags, %d relações, vocabulário %d",
                len(train), len(dev), len(schema), len(vocab))
    return train, dev, schema, vocab


def run(args: argparse.Namespace) -> None:
    cfg = config_from_args(args)
    threads = threads_of(args)
    with recorded_run(args, [args.train, args.dev, args.config, args.embeddings], cfg):
        train, dev, schema, vocab = load_training_data(args.train, args.dev, cfg)
        rng = Rng(cfg.seed)
        model = build_model(cfg, schema, vocab, rng)
        if args.embeddings:
            load_pretrained_embeddings(args.embeddings, vocab, model.tables.word)
        best, state = fit(train, dev, model, cfg, rng, epoch_log=out_path(args, EPOCHS_FILE), threads=threads)
        save_checkpoint(model, out_path(args, MODEL_FILE), best)
        print(f"melhor época {state.best_epoch} com AUC dev {state.best_dev_auc:.4f} ({state.epoch} épocas)")
