"""
Subcomandos que usam checkpoints treinados: predict, eval, ensemble-fit, attn-export e compare.
"""
import argparse
import csv
import logging
from typing import Dict, List

from dsre.checkpoint import load_checkpoint
from dsre.commands.common import (
    ATTENTION_FILE,
    CONFIDENCE_FILE,
    PR_FILE,
    PREDICTIONS_FILE,
    REPORT_FILE,
    WEIGHTS_FILE,
    add_global_flags,
    out_path,
    recorded_run,
    seed_of,
    threads_of,
)
from dsre.core.rng import Rng
from dsre.corpus import NA, InstanceBag, RelationSchema, load_bags, read_bag_records
from dsre.ensemble import ROLES, collect_probs, ensemble_scorer, fit_weights, read_weights, write_weights
from dsre.errors import BagValidationError, CheckpointMismatchError, ConfigError, UsageError
from dsre.evaluation import (
    export_attention,
    p_at_n,
    pr_curve,
    rank,
    read_predictions,
    score_corpus,
    true_label_confidence,
    write_attention_csv,
    write_confidence_csv,
    write_pr_csv,
    write_predictions,
    write_report,
)
from dsre.fingerprint import file_sha256
from dsre.inference import bag_scorer
from dsre.model import RelationModel

logger = logging.getLogger(__name__)

DEFAULT_P_AT = (100, 200, 300)


def _add_role_flags(parser: argparse.ArgumentParser) -> None:
    for role in ROLES:
        parser.add_argument(f"--{role}", default=None, help=f"checkpoint {role.upper()}")
    parser.add_argument(
        "--models", nargs=len(ROLES), default=None, metavar="CKPT",
        help="os três checkpoints na ordem " + " ".join(ROLES) + " (alternativa a --pcnn --ea --bgwa)",
    )


def register(sub) -> None:
    p = sub.add_parser("predict", help="escreve o ranking de (bag, relação, score)")
    p.add_argument("--ckpt", default=None, help="checkpoint de um modelo")
    _add_role_flags(p)
    p.add_argument("--weights", "--ensemble", dest="weights", default=None,
                   help="arquivo de pesos do ensemble (com os três checkpoints)")
    p.add_argument("--bags", "--test", dest="bags", required=True, help="bags a pontuar (JSONL)")
    add_global_flags(p)
    p.set_defaults(handler=run_predict)

    p = sub.add_parser("eval", help="curva PR, AUC e P@N de um arquivo de predições")
    p.add_argument("--predictions", required=True, help="TSV bag_id, relação, score")
    p.add_argument("--gold", required=True, help="bags com os rótulos verdadeiros (JSONL)")
    p.add_argument("--max-recall", type=float, default=None, help="limite de revocação da AUC (default: curva toda)")
    p.add_argument("--p-at", type=int, nargs="+", default=list(DEFAULT_P_AT), help="valores de N (default: %(default)s)")
    add_global_flags(p)
    p.set_defaults(handler=run_eval)

    p = sub.add_parser("ensemble-fit", help="ajusta alpha, beta, gamma por mínimos quadrados no dev")
    _add_role_flags(p)
    p.add_argument("--dev", required=True, help="bags de dev (JSONL)")
    add_global_flags(p)
    p.set_defaults(handler=run_ensemble_fit)

    p = sub.add_parser("attn-export", help="exporta a atenção da instância vencedora de uma bag")
    p.add_argument("--ckpt", required=True, help="checkpoint BGWA ou EA")
    p.add_argument("--bags", required=True, help="bags (JSONL)")
    p.add_argument("--bag-id", required=True, help="bag a inspecionar")
    p.add_argument("--relation", required=True, help="nome da relação")
    add_global_flags(p)
    p.set_defaults(handler=run_attn_export)

    p = sub.add_parser("compare", help="confiança de cada modelo nos rótulos verdadeiros de bags sorteadas")
    _add_role_flags(p)
    p.add_argument("--bags", required=True, help="bags (JSONL)")
    p.add_argument("--n", type=int, default=50, help="bags sorteadas (default: %(default)s)")
    add_global_flags(p)
    p.set_defaults(handler=run_compare)


# ---------- Carregamento ----------
def _load_bags_for(model: RelationModel, path: str) -> List[InstanceBag]:
    bags, _ = load_bags(path, model.vocab, model.schema, model.cfg.max_position, model.cfg.max_length)
    return bags


def _apply_models_flag(args: argparse.Namespace, require_all: bool = False) -> None:
    """--models A B C equivale a --pcnn A --ea B --bgwa C."""
    if args.models:
        if any(getattr(args, r) for r in ROLES):
            raise UsageError("use --models ou --pcnn --ea --bgwa, não os dois")
        for role, path in zip(ROLES, args.models):
            setattr(args, role, path)
    if require_all and not all(getattr(args, r) for r in ROLES):
        raise UsageError(f"são necessários os três checkpoints: {['--' + r for r in ROLES]}")


def _load_roles(args: argparse.Namespace, required: bool = True) -> Dict[str, RelationModel]:
    paths = {role: getattr(args, role) for role in ROLES if getattr(args, role)}
    if required and len(paths) != len(ROLES):
        raise UsageError(f"são necessários os três checkpoints: {['--' + r for r in ROLES]}")
    if not paths:
        raise UsageError("informe ao menos um checkpoint (--pcnn, --ea ou --bgwa)")
    models = {}
    for role, path in paths.items():
        model = load_checkpoint(path)
        if model.kind != role:
            raise ConfigError(f"--{role} aponta para um checkpoint {model.kind}: {path}")
        models[role] = model
    first = next(iter(models.values()))
    for role, model in models.items():
        if model.vocab.hash() != first.vocab.hash():
            raise CheckpointMismatchError(f"checkpoint {role} usa outro vocabulário")
        if model.schema != first.schema:
            raise CheckpointMismatchError(f"checkpoint {role} usa outro esquema de relações")
    return models


# ---------- Handlers ----------
def run_predict(args: argparse.Namespace) -> None:
    _apply_models_flag(args)
    threads = threads_of(args)
    if args.ckpt and (args.weights or any(getattr(args, r) for r in ROLES)):
        raise UsageError("use --ckpt sozinho ou --pcnn --ea --bgwa --weights")
    if not args.ckpt and not args.weights:
        raise UsageError("informe --ckpt ou --weights com os três checkpoints")
    inputs = [args.bags, args.ckpt, args.weights] + [getattr(args, r) for r in ROLES]
    with recorded_run(args, inputs):
        if args.ckpt:
            model = load_checkpoint(args.ckpt)
            scorer = bag_scorer(model)
        else:
            models = _load_roles(args)
            weights = read_weights(args.weights, {r: file_sha256(getattr(args, r)) for r in ROLES})
            model = models["pcnn"]
            scorer = ensemble_scorer(models, weights)
        bags = _load_bags_for(model, args.bags)
        preds = rank(score_corpus(scorer, bags, threads=threads))
        write_predictions(out_path(args, PREDICTIONS_FILE), preds, model.schema)
        logger.info("%d predições para %d bags", len(preds), len(bags))


def _prediction_relations(path: str) -> List[str]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return [row[1] for row in csv.reader(fh, delimiter="\t") if len(row) >= 2]


def run_eval(args: argparse.Namespace) -> None:
    with recorded_run(args, [args.predictions, args.gold]):
        records = read_bag_records(args.gold)
        schema = RelationSchema.infer(
            [r for rec in records for r in rec.relations] + _prediction_relations(args.predictions)
        )
        gold = {(rec.bag_id, schema.id_of(r)) for rec in records for r in rec.relations if r != NA}
        preds = read_predictions(args.predictions, schema)
        curve = pr_curve(preds, gold, auc_max_recall=args.max_recall)
        precisions = [p_at_n(preds, gold, n) for n in args.p_at]
        write_pr_csv(out_path(args, PR_FILE), curve, args.max_recall)
        write_report(out_path(args, REPORT_FILE), curve, precisions)
        print(f"AUC {curve.auc:.4f} " + " ".join(f"P@{p.n} {p.precision:.4f}" for p in precisions))


def run_ensemble_fit(args: argparse.Namespace) -> None:
    _apply_models_flag(args, require_all=True)
    inputs = [args.dev] + [getattr(args, r) for r in ROLES]
    with recorded_run(args, inputs):
        models = _load_roles(args)
        bags = _load_bags_for(models["pcnn"], args.dev)
        weights = fit_weights(*collect_probs(models, bags))
        weights = weights.model_copy(update={"checkpoints": {r: file_sha256(getattr(args, r)) for r in ROLES}})
        write_weights(out_path(args, WEIGHTS_FILE), weights)
        print(f"alpha={weights.alpha:.6f} beta={weights.beta:.6f} gamma={weights.gamma:.6f}")


def _find_bag(bags: List[InstanceBag], bag_id: str) -> InstanceBag:
    for bag in bags:
        if bag.bag_id == bag_id:
            return bag
    raise BagValidationError(bag_id, "não encontrada no arquivo")


def run_attn_export(args: argparse.Namespace) -> None:
    with recorded_run(args, [args.ckpt, args.bags]):
        model = load_checkpoint(args.ckpt)
        if args.relation not in model.schema:
            raise ConfigError(f"relação '{args.relation}' fora do esquema {list(model.schema.names)}")
        bag = _find_bag(_load_bags_for(model, args.bags), args.bag_id)
        table = export_attention(model, bag, model.schema.id_of(args.relation))
        write_attention_csv(table, out_path(args, ATTENTION_FILE))
        logger.info("atenção da instância %d de %s (%d tokens)", table.instance_index, bag.bag_id, len(table.tokens))


def run_compare(args: argparse.Namespace) -> None:
    _apply_models_flag(args)
    inputs = [args.bags] + [getattr(args, r) for r in ROLES]
    with recorded_run(args, inputs):
        models = _load_roles(args, required=False)
        first = next(iter(models.values()))
        bags = _load_bags_for(first, args.bags)
        scorers = {role: bag_scorer(m) for role, m in models.items()}
        rows = true_label_confidence(scorers, bags, args.n, Rng(seed_of(args)))
        write_confidence_csv(rows, first.schema, out_path(args, CONFIDENCE_FILE))
        logger.info("%d linhas de confiança para %d modelos", len(rows), len(models))
