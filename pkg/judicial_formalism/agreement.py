#!/usr/bin/env python3
#
#  agreement.py
"""
Inter-annotator agreement for holistic labels and per-argument-type paragraph codings.
"""
#
#  Copyright © 2025 The judicial_formalism developers
#
#  Distributed under the MIT License. See LICENSE for details.
#

# stdlib
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Hashable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

# 3rd party
import numpy

# this package
from judicial_formalism.corpus import ARGUMENT_TYPES, ArgumentType, Corpus, CorpusSchemaError

__all__ = [
		"AnnotationMatrix",
		"AgreementRow",
		"HolisticAgreement",
		"cohen_kappa",
		"krippendorff_alpha",
		"per_type_agreement",
		"holistic_agreement",
		"agreement_table",
		]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnnotationMatrix:
	"""
	The codings of a set of units by a set of annotators. Missing codings are :py:obj:`None`.

	:param units: The unit identifiers, in order.
	:param annotators: The annotator identifiers, in order.
	:param values: Mapping of ``(unit, annotator)`` to a category, or :py:obj:`None` if the unit was not coded.
	:param categories: The declared categories. Inferred from ``values`` if not given.
	"""

	units: Tuple[Hashable, ...]
	annotators: Tuple[Hashable, ...]
	values: Mapping[Tuple[Hashable, Hashable], Optional[Hashable]]
	categories: Optional[Tuple[Hashable, ...]] = None

	def __post_init__(self) -> None:
		object.__setattr__(self, "units", tuple(self.units))
		object.__setattr__(self, "annotators", tuple(self.annotators))

		if len(self.annotators) < 2:
			raise ValueError("An annotation matrix needs at least two annotators")

		if self.categories is not None:
			declared = set(self.categories)
			for key, value in self.values.items():
				if value is not None and value not in declared:
					raise ValueError(f"Undeclared category {value!r} for unit {key[0]!r}")

	@classmethod
	def from_rows(
			cls,
			rows: Sequence[Sequence[Optional[Hashable]]],
			categories: Optional[Sequence[Hashable]] = None,
			) -> "AnnotationMatrix":
		"""
		Construct a matrix from one row of codings per annotator, with units as columns.

		:param rows:
		:param categories:
		"""

		if len({len(row) for row in rows}) > 1:
			raise ValueError("All annotators must code the same number of units")

		n_units = len(rows[0]) if rows else 0
		values = {(unit, annotator): row[unit] for annotator, row in enumerate(rows) for unit in range(n_units)}

		return cls(
				units=tuple(range(n_units)),
				annotators=tuple(range(len(rows))),
				values=values,
				categories=tuple(categories) if categories is not None else None,
				)

	def unit_values(self, unit: Hashable) -> List[Hashable]:
		"""
		Returns the non-missing codings of ``unit``, in annotator order.

		:param unit:
		"""

		values = (self.values.get((unit, annotator)) for annotator in self.annotators)
		return [v for v in values if v is not None]

	def pairable_units(self) -> List[Hashable]:
		"""
		Returns the units coded by at least two annotators.
		"""

		return [u for u in self.units if len(self.unit_values(u)) >= 2]


def cohen_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
	"""
	Cohen's kappa between two annotators.

	Computed with integer arithmetic as :math:`(n \\cdot a - s) / (n^2 - s)`, where ``a`` is the number
	of agreements and ``s`` the sum over categories of the products of the two annotators' marginals.
	Returns exactly 1.0 when chance agreement is 1.

	:param labels_a:
	:param labels_b:
	"""

	if len(labels_a) != len(labels_b):
		raise ValueError(f"Length mismatch: {len(labels_a)} != {len(labels_b)}")
	if not labels_a:
		raise ValueError("Cannot compute agreement on empty input")

	n = len(labels_a)
	agreements = sum(1 for a, b in zip(labels_a, labels_b) if a == b)

	marginals_a = Counter(labels_a)
	marginals_b = Counter(labels_b)
	chance = sum(count * marginals_b[category] for category, count in marginals_a.items())

	if chance == n * n:
		return 1.0

	return (n * agreements - chance) / (n * n - chance)


def _coincidences(matrix: AnnotationMatrix) -> Tuple[numpy.ndarray, List[Hashable]]:
	units = [matrix.unit_values(u) for u in matrix.units]
	units = [values for values in units if len(values) >= 2]

	categories = list(matrix.categories) if matrix.categories is not None else []
	for values in units:
		for value in values:
			if value not in categories:
				categories.append(value)

	index = {category: i for i, category in enumerate(categories)}
	coincidence = numpy.zeros((len(categories), len(categories)), dtype=numpy.float64)

	for values in units:
		counts = numpy.zeros(len(categories), dtype=numpy.float64)
		for value in values:
			counts[index[value]] += 1

		# Ordered pairs of codings from different annotators within the unit.
		pairs = numpy.outer(counts, counts) - numpy.diag(counts)
		coincidence += pairs / (len(values) - 1)

	return coincidence, categories


def krippendorff_alpha(matrix: AnnotationMatrix, metric: str = "nominal") -> float:
	"""
	Krippendorff's alpha for nominal data, computed from the coincidence matrix of pairable values.

	Units coded by fewer than two annotators are excluded. Returns 1.0 when there is no
	expected disagreement (every pairable value falls in one category).

	:param matrix:
	:param metric: Only ``'nominal'`` is supported.

	:raises ValueError: if there are fewer than two pairable values.
	"""

	if metric != "nominal":
		raise ValueError(f"Unsupported metric {metric!r}")

	coincidence, _ = _coincidences(matrix)
	n = coincidence.sum()

	if n < 2:
		raise ValueError("Krippendorff's alpha needs at least two pairable values")

	marginals = coincidence.sum(axis=1)
	observed = n - numpy.trace(coincidence)
	expected = n * n - numpy.dot(marginals, marginals)

	if expected == 0:
		return 1.0

	return float(1 - (n - 1) * observed / expected)


def _paragraph_keys(corpus: Corpus) -> List[Tuple[str, str]]:
	return [(d.doc_id, p.para_id) for d in corpus for p in d.paragraphs]


def _check_aligned(corpus_a: Corpus, corpus_b: Corpus) -> List[Tuple[str, str]]:
	keys_a = _paragraph_keys(corpus_a)
	keys_b = set(_paragraph_keys(corpus_b))

	missing = [k for k in keys_a if k not in keys_b]
	extra = keys_b - set(keys_a)

	if missing or extra:
		example = missing[0] if missing else sorted(extra)[0]
		raise CorpusSchemaError(
				f"The two annotations cover different paragraphs "
				f"({len(missing)} only in the first, {len(extra)} only in the second; e.g. {example[0]}#{example[1]})"
				)

	return keys_a


def _type_matrix(corpus_a: Corpus, corpus_b: Corpus, argument_type: ArgumentType) -> AnnotationMatrix:
	keys = _check_aligned(corpus_a, corpus_b)

	codings = []
	for corpus in (corpus_a, corpus_b):
		present = {(d.doc_id, p.para_id): argument_type in p.argument_types for d in corpus for p in d.paragraphs}
		codings.append([int(present[k]) for k in keys])

	return AnnotationMatrix.from_rows(codings, categories=(0, 1))


def per_type_agreement(corpus_a: Corpus, corpus_b: Corpus) -> Dict[ArgumentType, float]:
	"""
	Krippendorff's alpha for the presence of each argument type, with paragraphs as units.

	:param corpus_a: The first annotator's version of the corpus.
	:param corpus_b: The second annotator's version of the same corpus.

	:raises CorpusSchemaError: if the corpora do not contain the same paragraphs.
	"""

	_check_aligned(corpus_a, corpus_b)
	return {t: krippendorff_alpha(_type_matrix(corpus_a, corpus_b, t)) for t in ARGUMENT_TYPES}


class HolisticAgreement(NamedTuple):
	"""
	Agreement on the per-document holistic label.
	"""

	kappa: float
	alpha: float
	n_units: int


def holistic_agreement(corpus_a: Corpus, corpus_b: Corpus) -> HolisticAgreement:
	"""
	Cohen's kappa and Krippendorff's alpha on the holistic label of documents labelled in both corpora.

	:param corpus_a:
	:param corpus_b:
	"""

	labels_b = {d.doc_id: d.holistic_label for d in corpus_b if d.holistic_label is not None}
	pairs = [
			(d.holistic_label.value, labels_b[d.doc_id].value)
			for d in corpus_a
			if d.holistic_label is not None and d.doc_id in labels_b
			]

	if not pairs:
		raise ValueError("No documents carry a holistic label in both corpora")

	labels_a, labels_b_seq = zip(*pairs)
	matrix = AnnotationMatrix.from_rows([list(labels_a), list(labels_b_seq)])

	return HolisticAgreement(cohen_kappa(labels_a, labels_b_seq), krippendorff_alpha(matrix), len(pairs))


class AgreementRow(NamedTuple):
	"""
	A row of the agreement table.
	"""

	metric: str
	category: str
	value: float
	n_units: int


def agreement_table(corpus_a: Corpus, corpus_b: Corpus) -> List[AgreementRow]:
	"""
	Returns the holistic and per-type agreement of two annotations of a corpus as table rows.

	Holistic rows are omitted when neither corpus carries holistic labels.

	:param corpus_a:
	:param corpus_b:
	"""

	rows: List[AgreementRow] = []

	if any(d.holistic_label is not None for d in corpus_a):
		holistic = holistic_agreement(corpus_a, corpus_b)
		rows.append(AgreementRow("cohen_kappa", "holistic", holistic.kappa, holistic.n_units))
		rows.append(AgreementRow("krippendorff_alpha", "holistic", holistic.alpha, holistic.n_units))

	n_paragraphs = len(_check_aligned(corpus_a, corpus_b))
	for argument_type, alpha in per_type_agreement(corpus_a, corpus_b).items():
		rows.append(AgreementRow("krippendorff_alpha", argument_type.value, alpha, n_paragraphs))

	logger.info("Computed agreement over %d paragraphs", n_paragraphs)
	return rows
