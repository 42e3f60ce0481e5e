#!/usr/bin/env python3
#
#  __main__.py
"""
The ``judicial-formalism`` command line.

Exit status is 0 on success, 1 when an input fails validation, 2 when a stage backend
violates the wire protocol, and 3 on a usage error.
"""
#
#  Copyright © 2025 The judicial_formalism developers
#
#  Distributed under the MIT License. See LICENSE for details.
#

# stdlib
import argparse
import dataclasses
import logging
import sys
from typing import Any, Callable, Dict, List, NoReturn, Optional, Sequence, Tuple

# 3rd party
from domdf_python_tools.paths import PathPlus

# this package
from judicial_formalism import __version__
from judicial_formalism.agreement import agreement_table
from judicial_formalism.analysis import write_report
from judicial_formalism.attribution import shap_summary
from judicial_formalism.baselines import (
		BASELINE_KINDS,
		RANDOM_MODES,
		holistic_baseline,
		predict_corpus,
		presence_baseline,
		types_baseline
		)
from judicial_formalism.config import MlpConfigParser, load_config
from judicial_formalism.corpus import (
		Corpus,
		HolisticLabel,
		Split,
		apply_split,
		argument_histogram,
		corpus_stats,
		load_corpus,
		load_split,
		save_corpus,
		save_split,
		stratified_split,
		token_histogram
		)
from judicial_formalism.features import extract_features, labeled_vectors
from judicial_formalism.metrics import ROUNDING_MODES, holistic_report, presence_report, types_report
from judicial_formalism.mlp import MlpConfig, TrainingDivergedError, load_model, predict, predict_label, save_model, train_mlp
from judicial_formalism.pipeline import (
		BackendProtocolError,
		PipelineConfig,
		evaluate_pipeline,
		load_results,
		run_pipeline,
		save_results
		)
from judicial_formalism.records import dumps_csv, dumps_record

__all__ = ["ArgumentParser", "UsageError", "build_parser", "dispatch", "main"]

logger = logging.getLogger("judicial_formalism")

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_BACKEND = 2
EXIT_USAGE = 3


class UsageError(Exception):
	"""
	Raised by :class:`~.ArgumentParser` instead of exiting, and by commands given a conflicting set of options.
	"""


class ArgumentParser(argparse.ArgumentParser):
	"""
	Argument parser which reports usage errors by raising :exc:`~.UsageError`.
	"""

	def error(self, message: str) -> NoReturn:  # noqa: D102
		self.print_usage(sys.stderr)
		raise UsageError(f"{self.prog}: error: {message}")


def _emit(text: str) -> None:
	sys.stdout.write(text if text.endswith('\n') else f"{text}\n")


def _output(args: argparse.Namespace, kind: str, rows: List[List[Any]], data: Dict[str, Any]) -> None:
	if args.format == "record":
		_emit(dumps_record(kind, data))
	else:
		_emit(dumps_csv(rows))


def _validate(args: argparse.Namespace) -> int:
	corpus = load_corpus(args.corpus)
	if args.require_labels:
		corpus.require_labels()

	stats = corpus_stats(corpus)
	_emit(
			f"{PathPlus(args.corpus).as_posix()}: OK, {stats.n_documents} documents, "
			f"{stats.n_paragraphs} paragraphs, {stats.n_arguments} arguments"
			)
	return EXIT_OK


def _stats(args: argparse.Namespace) -> int:
	corpus = load_corpus(args.corpus)
	stats = corpus_stats(corpus).as_dict()
	tokens = token_histogram(corpus, args.bin_width)
	arguments = argument_histogram(corpus)

	rows: List[List[Any]] = [["statistic", "value"], *([k, v] for k, v in stats.items())]
	rows.extend([f"token_histogram_{start}", count] for start, count in tokens.items())
	rows.extend([f"argument_histogram_{n}", count] for n, count in arguments.items())

	data = {
			"stats": stats,
			"token-histogram": {str(k): v for k, v in tokens.items()},
			"argument-histogram": {str(k): v for k, v in arguments.items()},
			}
	_output(args, "corpus-stats", rows, data)
	return EXIT_OK


def _split(args: argparse.Namespace) -> int:
	corpus = load_corpus(args.corpus)
	assignment = stratified_split(corpus, tuple(args.ratios), seed=args.seed)
	save_split(assignment, args.out)

	sizes = assignment.sizes()
	_emit(' '.join(f"{split.value}={sizes[split]}" for split in Split))
	return EXIT_OK


def _iaa(args: argparse.Namespace) -> int:
	rows = agreement_table(load_corpus(args.a), load_corpus(args.b))

	table: List[List[Any]] = [["metric", "category", "value", "n_units"]]
	table.extend([r.metric, r.category, repr(r.value), r.n_units] for r in rows)

	data = {"rows": [r._asdict() for r in rows]}
	_output(args, "agreement", table, data)
	return EXIT_OK


def _baseline(args: argparse.Namespace) -> int:
	train = load_corpus(args.train)
	corpus = load_corpus(args.corpus)

	factory: Callable[..., Any] = {1: presence_baseline, 2: types_baseline, 3: holistic_baseline}[args.task]
	predictor = factory(args.kind, train, mode=args.mode, seed=args.seed, lexicon=args.lexicon)
	save_corpus(predict_corpus(corpus, args.task, predictor), args.out)
	return EXIT_OK


def _evaluate(args: argparse.Namespace) -> int:
	gold = load_corpus(args.gold)
	pred = load_corpus(args.pred)

	if args.task == 1:
		report: Any = presence_report(gold, pred)
	elif args.task == 2:
		report = types_report(gold, pred)
	else:
		gold.require_labels()
		pred.require_labels()
		predicted = {d.doc_id: d.holistic_label for d in pred}
		missing = [d.doc_id for d in gold if d.doc_id not in predicted]
		if missing:
			raise ValueError(f"No prediction for {len(missing)} document(s), e.g. {missing[0]!r}")
		report = holistic_report([d.holistic_label for d in gold], [predicted[d.doc_id] for d in gold])  # type: ignore[misc]

	_output(args, "evaluation", report.rows(args.rounding), report.as_dict())
	return EXIT_OK


def _training_sets(args: argparse.Namespace) -> Tuple[Corpus, Corpus]:
	if args.corpus and args.split:
		if args.train or args.validation:
			raise UsageError("train-mlp: error: --train/--validation cannot be combined with --corpus/--split")
		partitions = apply_split(load_corpus(args.corpus), load_split(args.split))
		return partitions[Split.TRAIN], partitions[Split.VALIDATION]

	if args.train and args.validation and not (args.corpus or args.split):
		return load_corpus(args.train), load_corpus(args.validation)

	raise UsageError("train-mlp: error: give either --corpus and --split, or --train and --validation")


def _train_mlp(args: argparse.Namespace) -> int:
	train, validation = _training_sets(args)

	overrides: Dict[str, Any] = {}
	if args.config:
		config = load_config(args.config)
		overrides.update(MlpConfigParser().parse(config.get("mlp", {})))
	if args.seed is not None:
		overrides["seed"] = args.seed
	if args.loss is not None:
		overrides["loss"] = args.loss

	model = train_mlp(labeled_vectors(train), labeled_vectors(validation), MlpConfig(**overrides))
	save_model(model, args.out)

	best = model.history[model.best_epoch - 1]
	_emit(f"best epoch {best.epoch}: val_loss={best.val_loss!r} val_macro_f1={best.val_macro_f1!r}")
	return EXIT_OK


def _selected_documents(args: argparse.Namespace) -> Corpus:
	corpus = load_corpus(args.corpus)

	if args.split_file is None:
		if args.split is not None:
			raise UsageError(f"{args.command}: error: --split needs --split-file")
		return corpus

	return apply_split(corpus, load_split(args.split_file))[Split(args.split or Split.TEST)]


def _predict_mlp(args: argparse.Namespace) -> int:
	model = load_model(args.model)
	corpus = _selected_documents(args)

	rows: List[List[Any]] = [["doc_id", "holistic_label", "probability"]]
	documents = []
	for document in corpus:
		features = extract_features(document)
		label = predict_label(model, features)
		rows.append([document.doc_id, label.value, repr(predict(model, features))])
		documents.append(dataclasses.replace(document, holistic_label=label))

	if args.out:
		save_corpus(Corpus(tuple(documents), corpus.provenance), args.out)

	_output(args, "predictions", rows, {"predictions": [dict(zip(rows[0], row)) for row in rows[1:]]})
	return EXIT_OK


def _explain(args: argparse.Namespace) -> int:
	model = load_model(args.model)
	corpus = _selected_documents(args)
	summary = shap_summary(model, [extract_features(d) for d in corpus])

	data = {
			"ranking": summary.ranking,
			"attributions": {
					doc_id: {"base-value": a.base_value, "output": a.instance_output, "values": a.as_dict()}
					for doc_id, a in zip(corpus.doc_ids, summary.attributions)
					},
			}
	_output(args, "attribution-summary", summary.table(), data)
	return EXIT_OK


def _pipeline_run(args: argparse.Namespace) -> int:
	config = PipelineConfig.from_file(args.config)
	if args.no_filter:
		config = dataclasses.replace(config, filtering_enabled=False)

	results = run_pipeline(load_corpus(args.input), config, record=args.record)
	save_results(results, args.out)

	counts = {label: sum(r.label is label for r in results) for label in HolisticLabel}
	_emit(', '.join(f"{label.value}={count}" for label, count in counts.items()))
	return EXIT_OK


def _pipeline_evaluate(args: argparse.Namespace) -> int:
	evaluation = evaluate_pipeline(load_results(args.results), load_corpus(args.gold))

	rows: List[List[Any]] = [["task", "metric", "value"]]
	for task, report in (("holistic", evaluation.holistic), ("presence", evaluation.presence)):
		rows.extend([task, *row] for row in report.rows(args.rounding)[1:])
	rows.extend(["types", row[0], row[3]] for row in evaluation.types.rows(args.rounding)[1:])

	data = {
			"holistic": evaluation.holistic.as_dict(),
			"presence": evaluation.presence.as_dict(),
			"types": evaluation.types.as_dict(),
			}
	_output(args, "pipeline-evaluation", rows, data)
	return EXIT_OK


def _report(args: argparse.Namespace) -> int:
	written = write_report(
			load_corpus(args.corpus),
			args.out,
			date_from=args.date_from,
			date_to=args.date_to,
			bucket=args.bucket,
			rounding=args.rounding,
			)

	for path in written.values():
		_emit(path.as_posix())
	return EXIT_OK


def _add_format(parser: argparse.ArgumentParser) -> None:
	parser.add_argument(
			"--format",
			choices=("csv", "record"),
			default="csv",
			help="Write a CSV table (default) or a TOML record.",
			)


def _add_subset(parser: argparse.ArgumentParser) -> None:
	parser.add_argument("--split-file", help="A split file written by 'split'.")
	parser.add_argument(
			"--split",
			choices=[s.value for s in Split],
			help="Only use the documents of this partition of --split-file (default: test).",
			)


def _add_rounding(parser: argparse.ArgumentParser) -> None:
	parser.add_argument(
			"--rounding",
			choices=tuple(ROUNDING_MODES),
			default="down",
			help=(
					"How percentages are rounded to one decimal place. "
					"'down' (the default) truncates, which reproduces published F1 tables "
					"(a macro F1 of 36.96 is reported as 36.9); 'half-up' rounds halves away from zero."
					),
			)


def build_parser() -> ArgumentParser:
	"""
	Construct the parser of the ``judicial-formalism`` command.
	"""

	parser = ArgumentParser(prog="judicial-formalism", description="Legal argument mining and formalism analysis.")
	parser.add_argument("--version", action="version", version=__version__)
	parser.add_argument(
			"-v",
			"--verbose",
			action="count",
			default=0,
			help="Log progress (-v) or debugging detail (-vv) to standard error.",
			)

	subparsers = parser.add_subparsers(dest="command", metavar="command")
	subparsers.required = True

	validate = subparsers.add_parser("validate", help="Check a corpus file against the schema.")
	validate.add_argument("--corpus", required=True)
	validate.add_argument("--require-labels", action="store_true", help="Fail if a document has no holistic label.")
	validate.set_defaults(func=_validate)

	stats = subparsers.add_parser("stats", help="Print corpus statistics and histograms.")
	stats.add_argument("--corpus", required=True)
	stats.add_argument("--bin-width", type=int, default=1000, help="Token histogram bin width (default: 1000).")
	_add_format(stats)
	stats.set_defaults(func=_stats)

	split = subparsers.add_parser("split", help="Write a stratified train/validation/test split.")
	split.add_argument("--corpus", required=True)
	split.add_argument("--ratios", type=float, nargs=3, default=(0.7, 0.2, 0.1), metavar=("TRAIN", "VAL", "TEST"))
	split.add_argument("--seed", type=int, default=0)
	split.add_argument("--out", required=True)
	split.set_defaults(func=_split)

	iaa = subparsers.add_parser("iaa", help="Inter-annotator agreement between two annotations of a corpus.")
	iaa.add_argument("--a", required=True, help="The first annotator's corpus file.")
	iaa.add_argument("--b", required=True, help="The second annotator's corpus file.")
	_add_format(iaa)
	iaa.set_defaults(func=_iaa)

	baseline = subparsers.add_parser("baseline", help="Predict with a baseline and write the predictions as a corpus.")
	baseline.add_argument("--task", type=int, choices=(1, 2, 3), required=True)
	baseline.add_argument("--kind", choices=BASELINE_KINDS, required=True)
	baseline.add_argument("--train", required=True)
	baseline.add_argument("--corpus", required=True)
	baseline.add_argument("--out", required=True)
	baseline.add_argument("--mode", choices=RANDOM_MODES, default="uniform")
	baseline.add_argument("--seed", type=int, default=0)
	baseline.add_argument("--lexicon", default="en", help="A built-in lexicon name or a lexicon file (default: en).")
	baseline.set_defaults(func=_baseline)

	evaluate = subparsers.add_parser("eval", help="Score predictions against gold annotations.")
	evaluate.add_argument("--task", type=int, choices=(1, 2, 3), required=True)
	evaluate.add_argument("--gold", required=True)
	evaluate.add_argument("--pred", required=True)
	_add_rounding(evaluate)
	_add_format(evaluate)
	evaluate.set_defaults(func=_evaluate)

	train = subparsers.add_parser("train-mlp", help="Train the holistic classifier on gold features.")
	train.add_argument("--corpus", help="The annotated corpus to partition with --split.")
	train.add_argument(
			"--split",
			metavar="SPLIT_FILE",
			help="A split file written by 'split'. Trains on 'train' and selects the epoch on 'validation'.",
			)
	train.add_argument("--train", help="A corpus to train on, instead of --corpus and --split.")
	train.add_argument("--validation", help="A corpus to select the epoch on, instead of --corpus and --split.")
	train.add_argument("--config", help="A TOML file with an [mlp] table.")
	train.add_argument("--seed", type=int)
	train.add_argument("--loss", choices=("bce", "weighted_bce", "asymmetric"))
	train.add_argument("--out", required=True)
	train.set_defaults(func=_train_mlp)

	predict_parser = subparsers.add_parser("predict-mlp", help="Classify documents from their annotated arguments.")
	predict_parser.add_argument("--model", required=True)
	predict_parser.add_argument(
			"--features",
			"--corpus",
			dest="corpus",
			required=True,
			help="A corpus whose annotated arguments give each document's features.",
			)
	_add_subset(predict_parser)
	predict_parser.add_argument("--out", help="Also write the corpus with predicted holistic labels.")
	_add_format(predict_parser)
	predict_parser.set_defaults(func=_predict_mlp)

	explain = subparsers.add_parser("explain", help="Rank features by mean absolute Shapley value.")
	explain.add_argument("--model", required=True)
	explain.add_argument("--corpus", "--features", dest="corpus", required=True)
	_add_subset(explain)
	_add_format(explain)
	explain.set_defaults(func=_explain)

	pipeline = subparsers.add_parser("pipeline", help="Run or evaluate the three-stage pipeline.")
	pipeline_commands = pipeline.add_subparsers(dest="pipeline_command", metavar="action")
	pipeline_commands.required = True

	run = pipeline_commands.add_parser("run", help="Classify a corpus with the pipeline.")
	run.add_argument("--config", required=True)
	run.add_argument("--in", dest="input", required=True)
	run.add_argument("--out", required=True)
	run.add_argument("--no-filter", action="store_true", help="Skip stage 1 and type every paragraph.")
	run.add_argument("--record", help="Record every backend answer to this file, for replay.")
	run.set_defaults(func=_pipeline_run)

	pipeline_evaluate = pipeline_commands.add_parser("evaluate", help="Score pipeline results against gold.")
	pipeline_evaluate.add_argument("--results", required=True)
	pipeline_evaluate.add_argument("--gold", required=True)
	_add_rounding(pipeline_evaluate)
	_add_format(pipeline_evaluate)
	pipeline_evaluate.set_defaults(func=_pipeline_evaluate)

	report = subparsers.add_parser("report", help="Write the distribution, holistic, trend and share tables.")
	report.add_argument("--corpus", required=True)
	report.add_argument("--from", dest="date_from", type=int, metavar="YYYY")
	report.add_argument("--to", dest="date_to", type=int, metavar="YYYY")
	report.add_argument("--bucket", type=int, default=1, help="Trend bucket width in years (default: 1).")
	report.add_argument("--out", required=True)
	_add_rounding(report)
	report.set_defaults(func=_report)

	return parser


def _configure_logging(verbosity: int) -> None:
	level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
	logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
	logger.setLevel(level)


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
	"""
	Run the command line and return the exit status.

	:param argv: The arguments, excluding the program name. Defaults to :py:data:`sys.argv`.
	"""

	parser = build_parser()

	try:
		args = parser.parse_args(argv)
	except UsageError as e:
		sys.stderr.write(f"{e}\n")
		return EXIT_USAGE
	except SystemExit as e:
		# --help and --version
		return e.code if isinstance(e.code, int) else EXIT_OK

	_configure_logging(args.verbose)

	try:
		return args.func(args)
	except UsageError as e:
		sys.stderr.write(f"{e}\n")
		return EXIT_USAGE
	except BackendProtocolError as e:
		sys.stderr.write(f"Error: backend failure: {e}\n")
		return EXIT_BACKEND
	except (ValueError, TypeError, ArithmeticError, OSError) as e:
		if isinstance(e, TrainingDivergedError):
			sys.stderr.write(f"Error: training diverged: {e}\n")
		else:
			sys.stderr.write(f"Error: {e}\n")
		return EXIT_INVALID


def main() -> NoReturn:
	"""
	Entry point of the ``judicial-formalism`` console script.
	"""

	sys.exit(dispatch())


if __name__ == "__main__":
	main()
