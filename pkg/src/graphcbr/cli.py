"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 runtime error. Every run prints the configuration fingerprint and seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Mapping, Sequence

from . import __version__, kernels
from .casebase import CaseBase, RetrievalMode, read_records
from .errors import CBRError, ConfigError
from .evaluation import PROTOCOLS, cross_validate_ranker, feature_baseline, growth_simulation, run_protocol
from .features import RankItem, extract_features_batch, read_dataset, select_features, write_dataset
from .graph import parse_graph
from .maintenance import Objective, hill_climb
from .ranker import RankerParams, feature_usage, save_model, train_ranker
from .similarity import SimilarityConfig, set_parallelism

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class EngineConfig:
    similarity: SimilarityConfig = field(default_factory=SimilarityConfig)
    k: int = 5
    objective: str = "overall"
    n_trees: int = 10
    max_splits: int = 40
    min_leaf: int = 5
    max_thresholds: int = 32
    seed: int = 0
    folds: int = 10
    features: str | None = None
    start_count: int = 1000
    step: int = 1000
    parallelism: int | None = None

    def __post_init__(self):
        if self.objective not in ("overall", "correct_only"):
            raise ConfigError(f"objective must be 'overall' or 'correct_only', got {self.objective!r}")
        for name in ("k", "n_trees", "min_leaf", "max_thresholds", "folds", "start_count", "step"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.max_splits < 0:
            raise ConfigError("max_splits must be >= 0")
        if self.parallelism is not None and self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        if self.features is not None:
            try:
                select_features([], self.features)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EngineConfig":
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(data) - set(known))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        kwargs: dict[str, Any] = {}
        for k, v in data.items():
            if k == "similarity":
                if not isinstance(v, Mapping):
                    raise ConfigError("config key 'similarity' must be an object")
                kwargs[k] = SimilarityConfig.from_dict(v)
            elif k in ("objective", "features"):
                if not (isinstance(v, str) or (v is None and k == "features")):
                    raise ConfigError(f"config key {k!r} must be a string")
                kwargs[k] = v
            else:
                if v is None and k == "parallelism":
                    kwargs[k] = None
                    continue
                if isinstance(v, bool) or not isinstance(v, int):
                    raise ConfigError(f"config key {k!r} must be an integer, got {v!r}")
                kwargs[k] = v
        return cls(**kwargs)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["similarity"] = self.similarity.to_dict()
        return d

    def fingerprint(self) -> str:
        """Hash of every setting that can change results (parallelism cannot)."""
        d = self.to_dict()
        d.pop("parallelism")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def ranker_params(self) -> RankerParams:
        return RankerParams(self.n_trees, self.max_splits, self.seed, self.min_leaf, self.max_thresholds)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# Flags that map onto EngineConfig / SimilarityConfig keys.
_ENGINE_FLAGS = ("k", "objective", "n_trees", "max_splits", "min_leaf", "max_thresholds", "seed", "folds",
                 "features", "start_count", "step", "parallelism")
_SIM_FLAGS = ("measure", "node_threshold", "edge_threshold", "concept_weight", "case_blend",
              "exact_size_limit", "time_budget")


def _common(p: argparse.ArgumentParser, *engine: str) -> None:
    p.add_argument("--config", help="JSON config file; flags override its keys")
    p.add_argument("--seed", type=int)
    p.add_argument("--parallelism", type=int, help="worker threads (default: one per core)")
    g = p.add_argument_group("similarity")
    g.add_argument("--measure", choices=("integrated", "lcs", "edit"))
    g.add_argument("--node-threshold", type=float)
    g.add_argument("--edge-threshold", type=float)
    g.add_argument("--concept-weight", type=float)
    g.add_argument("--case-blend", type=float)
    g.add_argument("--exact-size-limit", type=int)
    g.add_argument("--time-budget", type=float)
    for name in engine:
        flag = "--" + name.replace("_", "-")
        if name == "objective":
            p.add_argument(flag, choices=("overall", "correct_only"))
        elif name == "features":
            p.add_argument(flag, help="feature groups, e.g. DSC (D deep, S shallow, C case-based, I retrieval)")
        else:
            p.add_argument(flag, type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphcbr", description="Case-based answer validation over semantic graphs.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="COMMAND")

    p = sub.add_parser("ingest", help="build a case base from corpus files")
    p.add_argument("--input", action="append", required=True, help="corpus file (repeatable)")
    p.add_argument("--case-base", help="existing case base to extend (not modified)")
    p.add_argument("--output", required=True, help="case base file to write")
    p.add_argument("--report", help="write the ingest report as JSON")
    _common(p)

    for name, text in (("retrieve", "most similar cases for each query"),
                       ("classify", "nearest-neighbor lesson for each query")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--case-base", required=True)
        p.add_argument("--query", required=True, help="file of query records (question, answer)")
        p.add_argument("--mode", choices=("full", "exclude-question", "exclude-case"), default="full")
        p.add_argument("--exclude", help="id to exclude (default: the query record's own id)")
        p.add_argument("--output", help="write results as JSON lines")
        _common(p, *(("k",) if name == "retrieve" else ()))

    p = sub.add_parser("optimize", help="hill-climbing case deletion")
    p.add_argument("--case-base", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--log", help="write the optimization log as JSON")
    _common(p, "objective")

    p = sub.add_parser("extract-features", help="case-based features for (question, candidate) records")
    p.add_argument("--case-base", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--output", required=True)
    _common(p, "k")

    p = sub.add_parser("train", help="train the ranking ensemble")
    p.add_argument("--dataset", required=True)
    p.add_argument("--output", required=True, help="model file")
    p.add_argument("--report", help="cross-validation report (JSON lines) when --folds > 1")
    _common(p, "features", "n_trees", "max_splits", "min_leaf", "max_thresholds", "folds")

    p = sub.add_parser("evaluate", help="classification protocols or ranking cross-validation")
    p.add_argument("--protocol", help="1-8 or 'all' (with --case-base)")
    p.add_argument("--case-base")
    p.add_argument("--dataset", help="ranking dataset for cross-validation")
    p.add_argument("--baseline", default="ir_score", help="feature ranked on its own as baseline")
    p.add_argument("--output", help="write reports as JSON lines")
    _common(p, "features", "n_trees", "max_splits", "min_leaf", "max_thresholds", "folds")

    p = sub.add_parser("simulate-growth", help="grow a base by questions, optimizing each step")
    p.add_argument("--corpus", required=True, help="case base holding the full corpus")
    p.add_argument("--output", help="write the curve as JSON lines")
    _common(p, "objective", "start_count", "step")

    sub.add_parser("version", help="print version and kernel backend")

    p = sub.add_parser("gen-synthetic", help=argparse.SUPPRESS)
    p.add_argument("--kind", choices=("corpus", "ranking", "separable"), required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--questions", type=int)
    p.add_argument("--seed", type=int, default=0)
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "gen-synthetic"]
    return parser


def _load_config(args) -> EngineConfig:
    data: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    cfg = EngineConfig.from_dict(data)
    sim = {k: getattr(args, k) for k in _SIM_FLAGS if getattr(args, k, None) is not None}
    if sim:
        cfg = replace(cfg, similarity=SimilarityConfig.from_dict({**cfg.similarity.to_dict(), **sim}))
    eng = {k: getattr(args, k) for k in _ENGINE_FLAGS if getattr(args, k, None) is not None}
    return replace(cfg, **eng) if eng else cfg


def _write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n")


def _read_queries(path):
    out = []
    for index, line in enumerate(read_records(path)):
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CBRError(f"query record {index}: invalid JSON: {exc.msg}") from None
        if not isinstance(rec, dict) or "question" not in rec or "answer" not in rec:
            raise CBRError(f"query record {index}: needs 'question' and 'answer' graphs")
        out.append((rec, parse_graph(rec["question"]), parse_graph(rec["answer"])))
    return out


def _mode(args, rec) -> RetrievalMode:
    if args.mode == "full":
        return RetrievalMode.full()
    if args.mode == "exclude-question":
        target = args.exclude or rec.get("question_id")
        if not target:
            raise UsageError("--mode exclude-question needs --exclude or a question_id in the query")
        return RetrievalMode.exclude_question(target)
    target = args.exclude or rec.get("case_id")
    if not target:
        raise UsageError("--mode exclude-case needs --exclude or a case_id in the query")
    return RetrievalMode.exclude_case(target)


def _query_label(rec, i):
    return rec.get("case_id") or rec.get("candidate_id") or f"query{i}"


def cmd_ingest(args, cfg):
    cb = CaseBase.load(args.case_base) if args.case_base else CaseBase()

    def records():
        for path in args.input:
            yield from read_records(path)

    report = cb.ingest(records())
    cb.save(args.output)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")
    print(f"accepted {report.accepted}  duplicates_dropped {report.duplicates_dropped}  "
          f"parse_failures {len(report.parse_failures)}  conflicts {len(report.conflicts)}")
    for index, err in report.parse_failures:
        print(f"  failure: {err}")
    for a, b in report.conflicts:
        print(f"  conflict: {a} contradicts {b}")
    print(f"case base: {len(cb)} cases, {len(cb.question_index)} questions -> {args.output}")
    return EXIT_OK


def cmd_retrieve(args, cfg, classify=False):
    cb = CaseBase.load(args.case_base)
    out = []
    for i, (rec, q, a) in enumerate(_read_queries(args.query)):
        label = _query_label(rec, i)
        mode = _mode(args, rec)
        if classify:
            lesson, best = cb.classify(q, a, mode, cfg.similarity)
            print(f"{label}\t{'correct' if lesson else 'incorrect'}\t{best.case_id}\t{best.similarity:.6f}")
            out.append({"query": label, "lesson": lesson, "case_id": best.case_id,
                        "similarity": best.similarity, "exact": best.exact})
            continue
        matches = cb.retrieve(q, a, cfg.k, mode, cfg.similarity)
        print(f"{label}")
        for r, m in enumerate(matches, start=1):
            print(f"  {r:>3}  {m.case_id}\t{m.similarity:.6f}\t{'correct' if m.lesson else 'incorrect'}"
                  f"{'  exact' if m.exact else ''}")
            out.append({"query": label, "rank": r, "case_id": m.case_id, "similarity": m.similarity,
                        "lesson": m.lesson, "exact": m.exact})
    if args.output:
        _write_jsonl(args.output, out)
    return EXIT_OK


def cmd_optimize(args, cfg):
    cb = CaseBase.load(args.case_base)
    objective = Objective.parse(cfg.objective)
    optimized, log = hill_climb(cb, objective, cfg.similarity)
    optimized.save(args.output)
    if args.log:
        with open(args.log, "w", encoding="utf-8") as fh:
            json.dump({**log.to_dict(), "config_fingerprint": cfg.fingerprint()}, fh, sort_keys=True, indent=1)
            fh.write("\n")
    print(f"objective {objective.value}: {log.initial:.6f} -> {log.final:.6f}; "
          f"deleted {len(log.steps)} of {len(cb)} cases in {log.passes} passes")
    return EXIT_OK


def cmd_extract(args, cfg):
    cb = CaseBase.load(args.case_base)
    queries = _read_queries(args.queries)
    modes = []
    for rec, _, _ in queries:
        qid = rec.get("question_id")
        modes.append(RetrievalMode.exclude_question(qid) if qid in cb.question_index else RetrievalMode.full())
    vectors = extract_features_batch([(q, a) for _, q, a in queries], cb, modes, cfg.k, cfg.similarity)
    items = []
    for i, ((rec, _, _), vec) in enumerate(zip(queries, vectors)):
        extra = rec.get("features") or {}
        feats = {**{k: float(v) for k, v in extra.items()}, **vec.as_dict()}
        gold = rec.get("gold_label", rec.get("lesson"))
        qid = rec.get("question_id") or f"query{i}"
        items.append(RankItem(qid, _query_label(rec, i), feats, gold if isinstance(gold, bool) else None))
    write_dataset(items, args.output)
    flagged = sum(v.empty_base for v in vectors)
    print(f"features for {len(items)} candidates -> {args.output}" + (f" ({flagged} with empty base)" if flagged else ""))
    return EXIT_OK


def _feature_names(items, groups):
    names = select_features({n for it in items for n in it.features}, groups)
    if not names:
        raise ConfigError(f"no features match groups {groups!r}")
    return names


def cmd_train(args, cfg):
    items = read_dataset(args.dataset)
    names = _feature_names(items, cfg.features)
    model = train_ranker(items, cfg.ranker_params, names, parallelism=cfg.parallelism)
    model.metadata["config_fingerprint"] = cfg.fingerprint()
    model.metadata["feature_groups"] = cfg.features
    save_model(model, args.output)
    usage = feature_usage(model)
    cbr_share = sum(v for k, v in usage.items() if k.startswith("cbr_"))
    print(f"trained {model.n_trees} trees, {sum(t.n_splits for t in model.trees)} splits -> {args.output}")
    print(f"split share of case-based features: {cbr_share:.3f}")
    if cfg.folds > 1:
        report = cross_validate_ranker(items, cfg.folds, cfg.ranker_params, cfg.seed, names,
                                       label=cfg.features or "all", parallelism=cfg.parallelism)
        report.config_fingerprint = cfg.fingerprint()
        print(report.table(), end="")
        if args.report:
            with open(args.report, "w", encoding="utf-8") as fh:
                fh.write(report.to_jsonl())
    return EXIT_OK


def cmd_evaluate(args, cfg):
    reports = []
    if args.dataset:
        items = read_dataset(args.dataset)
        names = _feature_names(items, cfg.features)
        report = cross_validate_ranker(items, cfg.folds, cfg.ranker_params, cfg.seed, names,
                                       label=cfg.features or "all", parallelism=cfg.parallelism)
        report.config_fingerprint = cfg.fingerprint()
        reports.append(report)
        if args.baseline:
            base = feature_baseline(items, args.baseline)
            base.config_fingerprint = cfg.fingerprint()
            reports.append(base)
    elif args.case_base:
        if args.protocol is None:
            raise UsageError("evaluate needs --protocol with --case-base")
        if args.protocol == "all":
            protocols = sorted(PROTOCOLS)
        else:
            try:
                protocols = [int(args.protocol)]
            except ValueError:
                raise UsageError(f"--protocol must be 1-8 or 'all', got {args.protocol!r}") from None
            if protocols[0] not in PROTOCOLS:
                raise UsageError(f"--protocol must be 1-8 or 'all', got {args.protocol!r}")
        cb = CaseBase.load(args.case_base)
        table = cb.table(cfg.similarity)
        for p in protocols:
            reports.append(run_protocol(p, cb, cfg.similarity, cfg.seed, table))
    else:
        raise UsageError("evaluate needs --case-base or --dataset")
    for r in reports:
        print(r.table(), end="")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            for r in reports:
                fh.write(r.to_jsonl())
    return EXIT_OK


def cmd_growth(args, cfg):
    corpus = CaseBase.load(args.corpus)
    curve = growth_simulation(corpus, cfg.start_count, cfg.step, Objective.parse(cfg.objective),
                              cfg.similarity, cfg.seed)
    print(curve.table(), end="")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(curve.to_jsonl())
    return EXIT_OK


def cmd_gen(args):
    from . import synthetic

    if args.kind == "corpus":
        kw = {"n_questions": args.questions} if args.questions else {}
        synthetic.planted_corpus(args.seed, **kw).save(args.output)
    else:
        make = synthetic.planted_ranking_set if args.kind == "ranking" else synthetic.separable_ranking_set
        kw = {"n_questions": args.questions} if args.questions else {}
        write_dataset(make(args.seed, **kw), args.output)
    print(f"synthetic {args.kind} (seed {args.seed}) -> {args.output}")
    return EXIT_OK


_COMMANDS = {
    "ingest": cmd_ingest,
    "retrieve": cmd_retrieve,
    "classify": lambda a, c: cmd_retrieve(a, c, classify=True),
    "optimize": cmd_optimize,
    "extract-features": cmd_extract,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "simulate-growth": cmd_growth,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        if args.command == "version":
            print(f"graphcbr {__version__} (kernels: {kernels.BACKEND})")
            return EXIT_OK
        if args.command == "gen-synthetic":
            return cmd_gen(args)
        cfg = _load_config(args)
        set_parallelism(cfg.parallelism)
        print(f"config {cfg.fingerprint()} seed {cfg.seed}")
        return _COMMANDS[args.command](args, cfg)
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, CBRError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"data error: {msg}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - surfaced as a runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
