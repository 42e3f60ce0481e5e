#!/usr/bin/env python3
#
#  metrics.py
"""
Evaluation metrics for the three classification tasks.

* Argument presence (paragraph level) and the holistic label (document level)
  are scored with binary macro precision, recall and F1 (:func:`~.binary_macro_prf`).
* Argument types (paragraph level, multilabel) are scored per label with the F1 of the
  positive and of the negative class, their mean, and the mean over the whole inventory
  (:func:`~.multilabel_report`).

Scores are kept at full precision; :func:`~.format_percent` rounds only for display.
"""
#
#  Copyright © 2025 The judicial_formalism developers
#
#  Distributed under the MIT License. See LICENSE for details.
#

# stdlib
import decimal
from dataclasses import dataclass
from typing import AbstractSet, Any, Dict, Hashable, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

# this package
from judicial_formalism.corpus import ARGUMENT_TYPES, Corpus, CorpusSchemaError, HolisticLabel

__all__ = [
		"BinaryCounts",
		"LabelMetrics",
		"EvaluationReport",
		"BinaryReport",
		"binary_macro_prf",
		"binary_report",
		"multilabel_report",
		"presence_report",
		"types_report",
		"holistic_report",
		"format_percent",
		"ROUNDING_MODES",
		]

#: Presentation rounding modes understood by :func:`~.format_percent`.
ROUNDING_MODES: Dict[str, str] = {
		"down": decimal.ROUND_DOWN,
		"half-up": decimal.ROUND_HALF_UP,
		}


def _ratio(numerator: int, denominator: int) -> float:
	# 0/0 is 0
	if denominator == 0:
		return 0.0
	return numerator / denominator


class BinaryCounts(NamedTuple):
	"""
	Confusion counts of a binary decision.
	"""

	tp: int = 0
	fp: int = 0
	fn: int = 0
	tn: int = 0

	@property
	def total(self) -> int:  # noqa: D102
		return self.tp + self.fp + self.fn + self.tn

	@property
	def precision(self) -> float:  # noqa: D102
		return _ratio(self.tp, self.tp + self.fp)

	@property
	def recall(self) -> float:  # noqa: D102
		return _ratio(self.tp, self.tp + self.fn)

	@property
	def f1_pos(self) -> float:
		"""
		The F1 score of the positive class, :math:`2tp / (2tp + fp + fn)`.
		"""

		return _ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn)

	@property
	def f1_neg(self) -> float:
		"""
		The F1 score of the negative class, :math:`2tn / (2tn + fp + fn)`.
		"""

		return _ratio(2 * self.tn, 2 * self.tn + self.fp + self.fn)


@dataclass(frozen=True)
class LabelMetrics:
	"""
	Positive, negative and macro F1 of one label.
	"""

	label: Hashable
	f1_pos: float
	f1_neg: float

	@property
	def macro_f1(self) -> float:  # noqa: D102
		return (self.f1_pos + self.f1_neg) / 2


@dataclass(frozen=True)
class EvaluationReport:
	"""
	Per-label metrics of a multilabel evaluation.
	"""

	per_label: Tuple[LabelMetrics, ...]
	counts: Mapping[Hashable, BinaryCounts]

	@property
	def macro_all(self) -> float:
		"""
		The mean of the per-label macro F1 over the whole inventory.
		"""

		if not self.per_label:
			return 0.0
		return sum(m.macro_f1 for m in self.per_label) / len(self.per_label)

	def __getitem__(self, label: Hashable) -> LabelMetrics:
		for metrics in self.per_label:
			if metrics.label == label:
				return metrics
		raise KeyError(label)

	def rows(self, rounding: str = "down") -> List[List[str]]:
		"""
		Returns the report as table rows: label, positive F1, negative F1, average; then the overall mean.

		:param rounding: See :func:`~.format_percent`.
		"""

		rows = [["label", "pos", "neg", "avg"]]
		for m in self.per_label:
			rows.append([
					_label_name(m.label),
					format_percent(m.f1_pos, rounding),
					format_percent(m.f1_neg, rounding),
					format_percent(m.macro_f1, rounding),
					])
		rows.append(["macro_all", '', '', format_percent(self.macro_all, rounding)])
		return rows

	def as_dict(self) -> Dict[str, Any]:  # noqa: D102
		return {
				"macro_all": self.macro_all,
				"labels": {
						_label_name(m.label): {
								"f1_pos": m.f1_pos,
								"f1_neg": m.f1_neg,
								"macro_f1": m.macro_f1,
								"counts": dict(self.counts[m.label]._asdict()),
								}
						for m in self.per_label
						},
				}


def _label_name(label: Hashable) -> str:
	return str(getattr(label, "value", label))


@dataclass(frozen=True)
class BinaryReport:
	"""
	Per-class and macro-averaged precision, recall and F1 of a binary task.
	"""

	#: Confusion counts with each class in turn taken as the positive class.
	per_class: Mapping[Hashable, BinaryCounts]

	@property
	def precision(self) -> float:  # noqa: D102
		return _mean(c.precision for c in self.per_class.values())

	@property
	def recall(self) -> float:  # noqa: D102
		return _mean(c.recall for c in self.per_class.values())

	@property
	def f1(self) -> float:  # noqa: D102
		return _mean(c.f1_pos for c in self.per_class.values())

	def as_tuple(self) -> Tuple[float, float, float]:  # noqa: D102
		return self.precision, self.recall, self.f1

	def rows(self, rounding: str = "down") -> List[List[str]]:
		"""
		Returns the report as table rows: metric and value.

		:param rounding: See :func:`~.format_percent`.
		"""

		return [
				["metric", "value"],
				["macro_precision", format_percent(self.precision, rounding)],
				["macro_recall", format_percent(self.recall, rounding)],
				["macro_f1", format_percent(self.f1, rounding)],
				]

	def as_dict(self) -> Dict[str, Any]:  # noqa: D102
		return {
				"macro_precision": self.precision,
				"macro_recall": self.recall,
				"macro_f1": self.f1,
				"classes": {_label_name(k): dict(v._asdict()) for k, v in self.per_class.items()},
				}


def _mean(values: Iterable[float]) -> float:
	values = list(values)
	if not values:
		return 0.0
	return sum(values) / len(values)


def binary_report(
		gold: Sequence[Hashable],
		pred: Sequence[Hashable],
		labels: Optional[Sequence[Hashable]] = None,
		) -> BinaryReport:
	"""
	Count the per-class confusion of a single-label classification.

	:param gold:
	:param pred:
	:param labels: The classes to average over. Defaults to the classes present in ``gold`` or ``pred``,
		in order of first appearance.
	"""

	if len(gold) != len(pred):
		raise ValueError(f"Length mismatch: {len(gold)} gold labels but {len(pred)} predictions")
	if not gold:
		raise ValueError("Cannot evaluate an empty set of instances")

	if labels is None:
		labels = list(dict.fromkeys([*gold, *pred]))

	per_class = {}
	for label in labels:
		tp = sum(1 for g, p in zip(gold, pred) if g == label and p == label)
		fp = sum(1 for g, p in zip(gold, pred) if g != label and p == label)
		fn = sum(1 for g, p in zip(gold, pred) if g == label and p != label)
		per_class[label] = BinaryCounts(tp, fp, fn, len(gold) - tp - fp - fn)

	return BinaryReport(per_class)


def binary_macro_prf(
		gold: Sequence[Hashable],
		pred: Sequence[Hashable],
		labels: Optional[Sequence[Hashable]] = None,
		) -> Tuple[float, float, float]:
	"""
	Macro-averaged precision, recall and F1 over the classes of a binary task.

	Precision, recall or F1 with a zero denominator count as zero.

	:param gold:
	:param pred:
	:param labels: The classes to average over. Defaults to the classes present in ``gold`` or ``pred``.

	:returns: ``(macro_precision, macro_recall, macro_f1)``, each in [0, 1].
	"""

	return binary_report(gold, pred, labels).as_tuple()


def multilabel_report(
		gold: Sequence[AbstractSet[Hashable]],
		pred: Sequence[AbstractSet[Hashable]],
		inventory: Sequence[Hashable] = ARGUMENT_TYPES,
		) -> EvaluationReport:
	"""
	Evaluate a multilabel classification as one binary problem per label.

	The overall score averages over every label of ``inventory``, including labels absent from ``gold``.

	:param gold: The gold label set of each instance.
	:param pred: The predicted label set of each instance.
	:param inventory: The declared labels.

	:raises ValueError: if the lengths differ or a label is not in ``inventory``.
	"""

	if len(gold) != len(pred):
		raise ValueError(f"Length mismatch: {len(gold)} gold instances but {len(pred)} predictions")

	declared = set(inventory)
	for idx, label_set in enumerate([*gold, *pred]):
		for label in label_set:
			if label not in declared:
				raise ValueError(f"Label {label!r} (instance {idx % max(len(gold), 1)}) is not in the inventory")

	per_label = []
	counts = {}
	for label in inventory:
		tp = fp = fn = tn = 0
		for gold_set, pred_set in zip(gold, pred):
			in_gold, in_pred = label in gold_set, label in pred_set
			if in_gold and in_pred:
				tp += 1
			elif in_pred:
				fp += 1
			elif in_gold:
				fn += 1
			else:
				tn += 1

		counts[label] = BinaryCounts(tp, fp, fn, tn)
		per_label.append(LabelMetrics(label, counts[label].f1_pos, counts[label].f1_neg))

	return EvaluationReport(tuple(per_label), counts)


def _aligned_paragraphs(gold_corpus: Corpus, pred_corpus: Corpus) -> List[Tuple[str, str]]:
	gold_keys = [(d.doc_id, p.para_id) for d in gold_corpus for p in d.paragraphs]
	pred_keys = {(d.doc_id, p.para_id) for d in pred_corpus for p in d.paragraphs}

	missing = [k for k in gold_keys if k not in pred_keys]
	if missing:
		raise CorpusSchemaError(f"no prediction for paragraph {missing[0][1]!r} of document {missing[0][0]!r}")

	return gold_keys


def _presence(corpus: Corpus) -> Dict[Tuple[str, str], bool]:
	extras = corpus.provenance.get("extra_paragraph_fields", {})
	presence = {}

	for document in corpus:
		for paragraph in document.paragraphs:
			explicit = extras.get(document.doc_id, {}).get(paragraph.para_id, {}).get("presence")
			if explicit is not None and not isinstance(explicit, bool):
				raise CorpusSchemaError(
						f"'presence' of paragraph {paragraph.para_id!r} in document {document.doc_id!r} "
						"must be true or false",
						)
			presence[document.doc_id, paragraph.para_id] = (
					paragraph.is_argumentative if explicit is None else explicit
					)

	return presence


def presence_report(gold_corpus: Corpus, pred_corpus: Corpus) -> BinaryReport:
	"""
	Evaluate argument presence per paragraph.

	A predicted paragraph is argumentative if it carries a boolean ``presence`` field,
	or otherwise if it has at least one predicted argument type.

	:param gold_corpus:
	:param pred_corpus: A corpus with the same paragraphs as ``gold_corpus``.
	"""

	keys = _aligned_paragraphs(gold_corpus, pred_corpus)
	gold = _presence(gold_corpus)
	pred = _presence(pred_corpus)
	return binary_report([gold[k] for k in keys], [pred[k] for k in keys], labels=[True, False])


def types_report(gold_corpus: Corpus, pred_corpus: Corpus) -> EvaluationReport:
	"""
	Evaluate paragraph argument types over the eight-type inventory.

	:param gold_corpus:
	:param pred_corpus: A corpus with the same paragraphs as ``gold_corpus``.
	"""

	keys = _aligned_paragraphs(gold_corpus, pred_corpus)
	gold = {(d.doc_id, p.para_id): p.argument_types for d in gold_corpus for p in d.paragraphs}
	pred = {(d.doc_id, p.para_id): p.argument_types for d in pred_corpus for p in d.paragraphs}
	return multilabel_report([gold[k] for k in keys], [pred[k] for k in keys])


def holistic_report(
		gold_labels: Sequence[HolisticLabel],
		pred_labels: Sequence[HolisticLabel],
		) -> BinaryReport:
	"""
	Evaluate holistic labels, averaging over the classes present.

	:param gold_labels:
	:param pred_labels:
	"""

	return binary_report(
			[HolisticLabel(label) for label in gold_labels],
			[HolisticLabel(label) for label in pred_labels],
			)


def format_percent(value: float, rounding: str = "down", places: int = 1) -> str:
	"""
	Format a score in [0, 1] as a percentage for display.

	The value is first brought to nine decimal places (so ``0.7333…`` and ``0.73330000000001``
	display alike), then rounded to ``places`` decimals.

	:param value:
	:param rounding: ``'down'`` truncates toward zero; ``'half-up'`` rounds halves away from zero.
	:param places:
	"""

	if rounding not in ROUNDING_MODES:
		raise ValueError(f"Unknown rounding mode {rounding!r}; choose from {', '.join(ROUNDING_MODES)}")

	percent = (decimal.Decimal(value) * 100).quantize(decimal.Decimal("1e-9"), rounding=decimal.ROUND_HALF_EVEN)
	return str(percent.quantize(decimal.Decimal(1).scaleb(-places), rounding=ROUNDING_MODES[rounding]))
