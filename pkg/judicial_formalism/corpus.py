#!/usr/bin/env python3
#
#  corpus.py
"""
Data model, file ingestion and validation, statistics and stratified splitting
for corpora of annotated court decisions.

Corpus files are UTF-8 JSON lines, one decision per line:

.. code-block:: JSON

	{"format_version": 1, "provenance": {"source": "export-2024-05"}}
	{"doc_id": "22 Cdo 1/2010", "court": "SC", "decision_date": "2010-03-02",
	 "holistic_label": "formalistic",
	 "paragraphs": [{"para_id": "1", "text": "...", "argument_types": ["CL", "TI"]}]}

The first line may be a header record carrying ``format_version`` and free-form ``provenance``.
Unknown document and paragraph fields are kept in :attr:`Corpus.provenance` and written back on save.
"""
#
#  Copyright © 2025 The judicial_formalism developers
#
#  Distributed under the MIT License. See LICENSE for details.
#

# stdlib
import csv
import datetime
import io
import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from fractions import Fraction
from urllib.parse import unquote
from typing import (
		Any,
		Callable,
		Dict,
		FrozenSet,
		Hashable,
		Iterable,
		Iterator,
		List,
		Mapping,
		NamedTuple,
		Optional,
		Sequence,
		Tuple
		)

# 3rd party
import numpy
from domdf_python_tools.paths import PathPlus
from domdf_python_tools.typing import PathLike

# this package
from judicial_formalism import FORMAT_VERSION
from judicial_formalism.records import numbered_lines

__all__ = [
		"ArgumentType",
		"ARGUMENT_TYPES",
		"FORMALISTIC_TYPES",
		"NON_FORMALISTIC_TYPES",
		"HolisticLabel",
		"Court",
		"Split",
		"Paragraph",
		"Document",
		"Corpus",
		"CorpusStats",
		"SplitAssignment",
		"ParagraphInstance",
		"CorpusError",
		"CorpusParseError",
		"CorpusSchemaError",
		"UnlabeledDocumentError",
		"token_count",
		"load_corpus",
		"save_corpus",
		"corpus_stats",
		"token_histogram",
		"argument_histogram",
		"stratified_split",
		"stratified_sample",
		"save_split",
		"load_split",
		"apply_split",
		"paragraph_instances",
		"paragraph_key",
		"split_paragraph_key",
		"largest_remainder",
		]

logger = logging.getLogger(__name__)

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")
_DOCUMENT_FIELDS = ("doc_id", "court", "decision_date", "holistic_label", "paragraphs")
_PARAGRAPH_FIELDS = ("para_id", "text", "argument_types")


class CorpusError(ValueError):
	"""
	Base class for errors raised while reading, validating or partitioning a corpus.

	:param lineno: The 1-based line number in the corpus file, if known.
	"""

	#: The 1-based line number in the corpus file, if known.
	lineno: Optional[int]

	def __init__(self, *args, lineno: Optional[int] = None) -> None:
		super().__init__(*args)
		self.lineno = lineno

	def __str__(self) -> str:
		message = super().__str__()
		if self.lineno is not None:
			return f"line {self.lineno}: {message}"
		return message


class CorpusParseError(CorpusError):
	"""
	A line of a corpus file is not a well-formed record.
	"""


class CorpusSchemaError(CorpusError):
	"""
	A record is well-formed but violates the corpus schema.
	"""


class UnlabeledDocumentError(CorpusError):
	"""
	An operation which needs holistic labels was given unlabelled documents.

	:param doc_ids: The identifiers of the unlabelled documents.
	"""

	def __init__(self, doc_ids: Iterable[str]) -> None:
		self.doc_ids: Tuple[str, ...] = tuple(doc_ids)
		super().__init__(f"documents without a holistic label: {', '.join(self.doc_ids)}")


class HolisticLabel(str, Enum):
	"""
	The per-decision judgement of the whole reasoning style.
	"""

	FORMALISTIC = "formalistic"
	NON_FORMALISTIC = "non_formalistic"


class ArgumentType(str, Enum):
	"""
	The eight traditional legal argument types annotated at paragraph level.
	"""

	LIN = "LIN"  #: Linguistic interpretation
	SI = "SI"  #: Systemic interpretation
	CL = "CL"  #: Case law
	D = "D"  #: Doctrine
	HI = "HI"  #: Historical interpretation
	PL = "PL"  #: Principles of law and values
	TI = "TI"  #: Teleological interpretation
	PC = "PC"  #: Practical consequences

	@property
	def group(self) -> HolisticLabel:
		"""
		Whether the argument type is formalistic or non-formalistic.
		"""

		if self in FORMALISTIC_TYPES:
			return HolisticLabel.FORMALISTIC
		return HolisticLabel.NON_FORMALISTIC

	@property
	def is_formalistic(self) -> bool:  # noqa: D102
		return self in FORMALISTIC_TYPES


#: The argument type inventory, in its canonical order.
ARGUMENT_TYPES: Tuple[ArgumentType, ...] = tuple(ArgumentType)

FORMALISTIC_TYPES: FrozenSet[ArgumentType] = frozenset({
		ArgumentType.LIN,
		ArgumentType.SI,
		ArgumentType.CL,
		ArgumentType.D,
		})

NON_FORMALISTIC_TYPES: FrozenSet[ArgumentType] = frozenset(ARGUMENT_TYPES) - FORMALISTIC_TYPES


class Court(str, Enum):
	"""
	The issuing apex court.
	"""

	SC = "SC"  #: Supreme Court
	SAC = "SAC"  #: Supreme Administrative Court


class Split(str, Enum):
	"""
	The dataset partitions.
	"""

	TRAIN = "train"
	VALIDATION = "validation"
	TEST = "test"


def token_count(text: str) -> int:
	"""
	Returns the number of maximal runs of non-whitespace characters in ``text``.

	Any Unicode whitespace separates tokens.

	:param text:
	"""

	return len(text.split())


def _sorted_types(types: Iterable[ArgumentType]) -> List[ArgumentType]:
	return sorted(types, key=ARGUMENT_TYPES.index)


@dataclass(frozen=True)
class Paragraph:
	"""
	A paragraph of a decision with the set of argument types annotated in it.
	"""

	para_id: str
	text: str
	argument_types: FrozenSet[ArgumentType] = frozenset()

	def __post_init__(self) -> None:
		if not self.text.strip():
			raise CorpusSchemaError(f"paragraph {self.para_id!r} has no text")

		# Each type counts once per paragraph.
		object.__setattr__(self, "argument_types", frozenset(ArgumentType(t) for t in self.argument_types))

	@property
	def token_count(self) -> int:  # noqa: D102
		return token_count(self.text)

	@property
	def is_argumentative(self) -> bool:
		"""
		Whether at least one argument type is annotated in the paragraph.
		"""

		return bool(self.argument_types)


@dataclass(frozen=True)
class Document:
	"""
	An annotated court decision.
	"""

	doc_id: str
	court: Court
	decision_date: datetime.date
	holistic_label: Optional[HolisticLabel]
	paragraphs: Tuple[Paragraph, ...]

	def __post_init__(self) -> None:
		object.__setattr__(self, "court", Court(self.court))
		object.__setattr__(self, "paragraphs", tuple(self.paragraphs))

		if self.holistic_label is not None:
			object.__setattr__(self, "holistic_label", HolisticLabel(self.holistic_label))

		if not self.paragraphs:
			raise CorpusSchemaError(f"document {self.doc_id!r} has no paragraphs")

		seen = set()
		for paragraph in self.paragraphs:
			if paragraph.para_id in seen:
				raise CorpusSchemaError(f"duplicate para_id {paragraph.para_id!r} in document {self.doc_id!r}")
			seen.add(paragraph.para_id)

	@property
	def token_count(self) -> int:
		"""
		The number of whitespace-separated tokens over all paragraphs.
		"""

		return sum(p.token_count for p in self.paragraphs)

	@property
	def n_arguments(self) -> int:
		"""
		The number of (paragraph, argument type) annotations in the document.
		"""

		return sum(len(p.argument_types) for p in self.paragraphs)

	def type_counts(self) -> Counter:
		"""
		Returns the number of paragraphs annotated with each argument type.
		"""

		counts: Counter = Counter()
		for paragraph in self.paragraphs:
			counts.update(paragraph.argument_types)
		return counts

	def relabel(self, predicted_types: Mapping[str, Iterable[ArgumentType]]) -> "Document":
		"""
		Returns a copy of the document with paragraph argument types replaced.

		Paragraphs missing from ``predicted_types`` get the empty set.

		:param predicted_types: Mapping of ``para_id`` to the new argument types.
		"""

		paragraphs = tuple(
				replace(p, argument_types=frozenset(predicted_types.get(p.para_id, ()))) for p in self.paragraphs
				)
		return replace(self, paragraphs=paragraphs)


@dataclass(frozen=True)
class Corpus:
	"""
	An ordered collection of documents, with free-form provenance metadata.
	"""

	documents: Tuple[Document, ...]
	provenance: Mapping[str, Any] = field(default_factory=dict, compare=False)

	def __post_init__(self) -> None:
		object.__setattr__(self, "documents", tuple(self.documents))

		seen = set()
		for document in self.documents:
			if document.doc_id in seen:
				raise CorpusSchemaError(f"duplicate doc_id {document.doc_id!r}")
			seen.add(document.doc_id)

	def __len__(self) -> int:
		return len(self.documents)

	def __iter__(self) -> Iterator[Document]:
		return iter(self.documents)

	def __getitem__(self, doc_id: str) -> Document:
		for document in self.documents:
			if document.doc_id == doc_id:
				return document
		raise KeyError(doc_id)

	@property
	def doc_ids(self) -> List[str]:  # noqa: D102
		return [d.doc_id for d in self.documents]

	def filter(self, predicate: Callable[[Document], bool]) -> "Corpus":
		"""
		Returns a new corpus with the documents for which ``predicate`` is true, in the same order.

		:param predicate:
		"""

		return Corpus(tuple(d for d in self.documents if predicate(d)), self.provenance)

	def between(self, start: Optional[datetime.date] = None, end: Optional[datetime.date] = None) -> "Corpus":
		"""
		Returns the documents decided between ``start`` and ``end``, both inclusive.

		:param start:
		:param end:
		"""

		def in_range(document: Document) -> bool:
			if start is not None and document.decision_date < start:
				return False
			if end is not None and document.decision_date > end:
				return False
			return True

		return self.filter(in_range)

	def unlabeled(self) -> List[str]:
		"""
		Returns the ids of documents without a holistic label.
		"""

		return [d.doc_id for d in self.documents if d.holistic_label is None]

	def require_labels(self) -> None:
		"""
		Raise :exc:`~.UnlabeledDocumentError` if any document lacks a holistic label.
		"""

		unlabeled = self.unlabeled()
		if unlabeled:
			raise UnlabeledDocumentError(unlabeled)


def _parse_paragraph(record: Any, doc_id: str, extras: Dict[str, Any]) -> Paragraph:
	if not isinstance(record, dict):
		raise CorpusSchemaError(f"paragraphs of document {doc_id!r} must be objects")

	for key in _PARAGRAPH_FIELDS:
		if key not in record:
			raise CorpusSchemaError(f"missing field {key!r} in a paragraph of document {doc_id!r}")

	para_id, text, codes = record["para_id"], record["text"], record["argument_types"]

	if not isinstance(para_id, str):
		raise CorpusSchemaError(f"para_id must be a string in document {doc_id!r}, got {para_id!r}")
	if not isinstance(text, str):
		raise CorpusSchemaError(f"text of paragraph {para_id!r} must be a string")
	if not isinstance(codes, list):
		raise CorpusSchemaError(f"argument_types of paragraph {para_id!r} must be an array")

	types = set()
	for code in codes:
		try:
			types.add(ArgumentType(code))
		except ValueError:
			raise CorpusSchemaError(
					f"unknown argument type code {code!r} in paragraph {para_id!r} of document {doc_id!r}"
					) from None

	if len(types) != len(codes):
		logger.debug("Paragraph %r of %r lists an argument type more than once", para_id, doc_id)

	unknown = {k: v for k, v in record.items() if k not in _PARAGRAPH_FIELDS}
	if unknown:
		extras[para_id] = unknown

	return Paragraph(para_id, text, frozenset(types))


def _parse_document(record: Any, provenance: Dict[str, Any]) -> Document:
	if not isinstance(record, dict):
		raise CorpusSchemaError("each line must be a JSON object")

	for key in _DOCUMENT_FIELDS:
		if key not in record:
			raise CorpusSchemaError(f"missing field {key!r}")

	doc_id = record["doc_id"]
	if not isinstance(doc_id, str) or not doc_id:
		raise CorpusSchemaError(f"doc_id must be a non-empty string, got {doc_id!r}")

	try:
		court = Court(record["court"])
	except ValueError:
		raise CorpusSchemaError(f"unknown court {record['court']!r} in document {doc_id!r}") from None

	date_string = record["decision_date"]
	if not isinstance(date_string, str) or not _DATE_RE.match(date_string):
		raise CorpusSchemaError(f"decision_date must be YYYY-MM-DD in document {doc_id!r}, got {date_string!r}")
	try:
		decision_date = datetime.date.fromisoformat(date_string)
	except ValueError as e:
		raise CorpusSchemaError(f"invalid decision_date in document {doc_id!r}: {e}") from None

	label: Optional[HolisticLabel] = None
	if record["holistic_label"] is not None:
		try:
			label = HolisticLabel(record["holistic_label"])
		except ValueError:
			raise CorpusSchemaError(
					f"unknown holistic label {record['holistic_label']!r} in document {doc_id!r}"
					) from None

	if not isinstance(record["paragraphs"], list):
		raise CorpusSchemaError(f"paragraphs of document {doc_id!r} must be an array")

	paragraph_extras: Dict[str, Any] = {}
	paragraphs = tuple(_parse_paragraph(p, doc_id, paragraph_extras) for p in record["paragraphs"])
	document = Document(doc_id, court, decision_date, label, paragraphs)

	unknown = {k: v for k, v in record.items() if k not in _DOCUMENT_FIELDS}
	if unknown:
		provenance.setdefault("extra_fields", {})[doc_id] = unknown
	if paragraph_extras:
		provenance.setdefault("extra_paragraph_fields", {})[doc_id] = paragraph_extras

	return document


def load_corpus(path: PathLike) -> Corpus:
	"""
	Load and validate a corpus file.

	:param path:

	:raises CorpusParseError: if a line is not valid JSON.
	:raises CorpusSchemaError: if a record violates the schema. Both carry the line number.
	"""

	path = PathPlus(path)
	provenance: Dict[str, Any] = {}
	documents: List[Document] = []
	seen_ids: Dict[str, int] = {}
	first_record = True

	for lineno, line in numbered_lines(path):
		try:
			record = json.loads(line)
		except json.JSONDecodeError as e:
			raise CorpusParseError(f"malformed record: {e.msg} (column {e.colno})", lineno=lineno) from None

		if first_record and isinstance(record, dict) and "format_version" in record and "doc_id" not in record:
			first_record = False
			if record["format_version"] != FORMAT_VERSION:
				raise CorpusSchemaError(f"unsupported format_version {record['format_version']!r}", lineno=lineno)
			provenance.update(record.get("provenance", {}))
			continue

		first_record = False

		try:
			document = _parse_document(record, provenance)
		except CorpusSchemaError as e:
			e.lineno = lineno
			raise

		if document.doc_id in seen_ids:
			raise CorpusSchemaError(
					f"duplicate doc_id {document.doc_id!r} (first seen on line {seen_ids[document.doc_id]})",
					lineno=lineno,
					)

		seen_ids[document.doc_id] = lineno
		documents.append(document)

	logger.info("Loaded %d documents from %s", len(documents), path.as_posix())
	return Corpus(tuple(documents), provenance)


def _document_record(document: Document, provenance: Mapping[str, Any]) -> Dict[str, Any]:
	paragraph_extras = provenance.get("extra_paragraph_fields", {}).get(document.doc_id, {})

	paragraphs = []
	for paragraph in document.paragraphs:
		paragraph_record: Dict[str, Any] = {
				"para_id": paragraph.para_id,
				"text": paragraph.text,
				"argument_types": [t.value for t in _sorted_types(paragraph.argument_types)],
				}
		paragraph_record.update(paragraph_extras.get(paragraph.para_id, {}))
		paragraphs.append(paragraph_record)

	record: Dict[str, Any] = {
			"doc_id": document.doc_id,
			"court": document.court.value,
			"decision_date": document.decision_date.isoformat(),
			"holistic_label": document.holistic_label.value if document.holistic_label else None,
			"paragraphs": paragraphs,
			}
	record.update(provenance.get("extra_fields", {}).get(document.doc_id, {}))
	return record


def save_corpus(corpus: Corpus, path: PathLike) -> None:
	"""
	Write a corpus file which :func:`~.load_corpus` reads back to an identical corpus.

	:param corpus:
	:param path:
	"""

	path = PathPlus(path)
	path.parent.maybe_make(parents=True)

	header_provenance = {
			k: v
			for k, v in corpus.provenance.items()
			if k not in {"extra_fields", "extra_paragraph_fields"}
			}

	lines = [json.dumps({"format_version": FORMAT_VERSION, "provenance": header_provenance}, ensure_ascii=False)]
	lines.extend(
			json.dumps(_document_record(document, corpus.provenance), ensure_ascii=False)
			for document in corpus.documents
			)

	path.write_lines(lines, encoding="UTF-8")
	logger.info("Wrote %d documents to %s", len(corpus), path.as_posix())


@dataclass(frozen=True)
class CorpusStats:
	"""
	Size, annotation and length statistics of a corpus.

	Token statistics are over documents.
	"""

	n_documents: int
	n_paragraphs: int
	n_arguments: int
	paragraphs_with_0: int
	paragraphs_with_1_arg: int
	paragraphs_with_2plus: int
	token_min: int
	token_max: int
	token_mean: float
	args_per_doc_mean: float
	args_per_doc_max: int
	docs_with_zero_args: int

	def as_dict(self) -> Dict[str, Any]:  # noqa: D102
		return dict(self.__dict__)


def corpus_stats(corpus: Corpus) -> CorpusStats:
	"""
	Compute :class:`~.CorpusStats` for a corpus.

	:param corpus:
	"""

	paragraph_sizes = [len(p.argument_types) for d in corpus for p in d.paragraphs]
	doc_tokens = [d.token_count for d in corpus]
	doc_arguments = [d.n_arguments for d in corpus]

	return CorpusStats(
			n_documents=len(corpus),
			n_paragraphs=len(paragraph_sizes),
			n_arguments=sum(paragraph_sizes),
			paragraphs_with_0=sum(1 for n in paragraph_sizes if n == 0),
			paragraphs_with_1_arg=sum(1 for n in paragraph_sizes if n == 1),
			paragraphs_with_2plus=sum(1 for n in paragraph_sizes if n >= 2),
			token_min=min(doc_tokens, default=0),
			token_max=max(doc_tokens, default=0),
			token_mean=sum(doc_tokens) / len(doc_tokens) if doc_tokens else 0.0,
			args_per_doc_mean=sum(doc_arguments) / len(doc_arguments) if doc_arguments else 0.0,
			args_per_doc_max=max(doc_arguments, default=0),
			docs_with_zero_args=sum(1 for n in doc_arguments if n == 0),
			)


def token_histogram(corpus: Corpus, bin_width: int = 1000) -> Dict[int, int]:
	"""
	Returns the document length distribution as a mapping of bin start to document count.

	Empty bins between the shortest and longest document are included.

	:param corpus:
	:param bin_width: The width of each bin, in tokens.
	"""

	if bin_width <= 0:
		raise ValueError("bin_width must be positive")

	counts = Counter(d.token_count // bin_width * bin_width for d in corpus)
	if not counts:
		return {}

	return {start: counts.get(start, 0) for start in range(min(counts), max(counts) + 1, bin_width)}


def argument_histogram(corpus: Corpus) -> Dict[int, int]:
	"""
	Returns the distribution of the number of arguments per document, from zero to the maximum.

	:param corpus:
	"""

	counts = Counter(d.n_arguments for d in corpus)
	if not counts:
		return {}

	return {n: counts.get(n, 0) for n in range(0, max(counts) + 1)}


def _as_fractions(ratios: Sequence[float]) -> List[Fraction]:
	# The shortest decimal repr gives the fraction the user meant (0.7 -> 7/10).
	return [Fraction(repr(float(r))) for r in ratios]


def largest_remainder(total: int, weights: Sequence[Fraction]) -> List[int]:
	"""
	Apportion ``total`` items between parts in proportion to ``weights`` (which must sum to one).

	Each part first receives the floor of its quota. The leftover items go to the parts with
	the largest fractional remainders; equal remainders favour the part with the smaller weight,
	then the later part.

	:param total:
	:param weights:
	"""

	quotas = [total * w for w in weights]
	counts = [int(q) for q in quotas]
	leftover = total - sum(counts)

	order = sorted(
			range(len(weights)),
			key=lambda i: (-(quotas[i] - counts[i]), weights[i], -i),
			)

	for i in order[:leftover]:
		counts[i] += 1

	return counts


@dataclass(frozen=True)
class SplitAssignment:
	"""
	The assignment of every document to one of the train, validation and test partitions.
	"""

	assignment: Mapping[str, Split]

	def __post_init__(self) -> None:
		object.__setattr__(self, "assignment", {k: Split(v) for k, v in self.assignment.items()})

	def __getitem__(self, doc_id: str) -> Split:
		return self.assignment[doc_id]

	def __len__(self) -> int:
		return len(self.assignment)

	def sizes(self) -> Dict[Split, int]:
		"""
		Returns the number of documents in each split.
		"""

		counts = Counter(self.assignment.values())
		return {split: counts.get(split, 0) for split in Split}

	def doc_ids(self, split: Split) -> List[str]:
		"""
		Returns the ids of the documents in ``split``, in assignment order.

		:param split:
		"""

		return [doc_id for doc_id, s in self.assignment.items() if s == split]


def _check_ratios(ratios: Sequence[float]) -> List[Fraction]:
	if len(ratios) != 3:
		raise ValueError(f"expected three ratios (train, validation, test), got {len(ratios)}")

	if any(r < 0 for r in ratios):
		raise ValueError(f"ratios must be non-negative, got {tuple(ratios)}")

	if abs(sum(ratios) - 1) > 1e-9:
		raise ValueError(f"ratios must sum to 1, got {sum(ratios)}")

	fractions = _as_fractions(ratios)
	# Renormalise so quotas of a stratum always sum to its size.
	total = sum(fractions)
	return [f / total for f in fractions]


def stratified_split(
		corpus: Corpus,
		ratios: Sequence[float] = (0.7, 0.2, 0.1),
		seed: int = 0,
		) -> SplitAssignment:
	"""
	Partition a labelled corpus into train, validation and test sets, stratified by holistic label and court.

	Each stratum is apportioned with :func:`~.largest_remainder` and shuffled with a generator seeded by ``seed``.

	:param corpus:
	:param ratios: The (train, validation, test) fractions.
	:param seed:

	:raises UnlabeledDocumentError: if any document lacks a holistic label.
	"""

	weights = _check_ratios(ratios)
	corpus.require_labels()

	rng = numpy.random.default_rng(seed)
	splits = list(Split)
	placed: Dict[str, Split] = {}

	for label in HolisticLabel:
		for court in Court:
			members = [d.doc_id for d in corpus if d.holistic_label == label and d.court == court]
			if not members:
				continue

			counts = largest_remainder(len(members), weights)
			shuffled = [members[i] for i in rng.permutation(len(members))]

			start = 0
			for split, count in zip(splits, counts):
				for doc_id in shuffled[start:start + count]:
					placed[doc_id] = split
				start += count

			logger.debug("Stratum %s/%s: %d documents -> %s", label.value, court.value, len(members), counts)

	assignment = SplitAssignment({doc_id: placed[doc_id] for doc_id in corpus.doc_ids})
	logger.info("Split sizes: %s", {s.value: n for s, n in assignment.sizes().items()})
	return assignment


def _court_decade(document: Document) -> Tuple[str, int]:
	return document.court.value, document.decision_date.year // 10 * 10


def stratified_sample(
		corpus: Corpus,
		size: int,
		seed: int = 0,
		key: Callable[[Document], Hashable] = _court_decade,
		) -> Corpus:
	"""
	Draw ``size`` documents with proportional allocation across strata.

	Strata are apportioned with :func:`~.largest_remainder` in order of first appearance,
	then sampled without replacement. The sample keeps corpus order.

	:param corpus:
	:param size: The number of documents to draw.
	:param seed:
	:param key: Maps a document to its stratum. Defaults to court and decade of decision.
	"""

	if not 0 <= size <= len(corpus):
		raise ValueError(f"sample size must be between 0 and {len(corpus)}, got {size}")

	strata: Dict[Hashable, List[str]] = {}
	for document in corpus:
		strata.setdefault(key(document), []).append(document.doc_id)

	if not strata:
		return Corpus((), corpus.provenance)

	weights = [Fraction(len(members), len(corpus)) for members in strata.values()]
	allocation = largest_remainder(size, weights)

	rng = numpy.random.default_rng(seed)
	chosen = set()
	for members, count in zip(strata.values(), allocation):
		picks = rng.choice(len(members), size=count, replace=False)
		chosen.update(members[i] for i in picks)

	return corpus.filter(lambda d: d.doc_id in chosen)


def save_split(assignment: SplitAssignment, path: PathLike) -> None:
	"""
	Write a split file with header ``doc_id,split`` and one row per document.

	:param assignment:
	:param path:
	"""

	buffer = io.StringIO()
	writer = csv.writer(buffer, lineterminator='\n')
	writer.writerow(["doc_id", "split"])
	for doc_id, split in assignment.assignment.items():
		writer.writerow([doc_id, split.value])

	path = PathPlus(path)
	path.parent.maybe_make(parents=True)
	path.write_text(buffer.getvalue(), encoding="UTF-8")


def load_split(path: PathLike) -> SplitAssignment:
	"""
	Read a split file written by :func:`~.save_split`.

	:param path:
	"""

	rows = list(csv.reader(io.StringIO(PathPlus(path).read_text(encoding="UTF-8"))))

	if not rows or rows[0] != ["doc_id", "split"]:
		raise CorpusSchemaError("split files must start with the header 'doc_id,split'", lineno=1)

	assignment: Dict[str, Split] = {}
	for lineno, row in enumerate(rows[1:], start=2):
		if not row:
			continue
		if len(row) != 2:
			raise CorpusSchemaError(f"expected 2 columns, got {len(row)}", lineno=lineno)

		doc_id, split = row
		if doc_id in assignment:
			raise CorpusSchemaError(f"doc_id {doc_id!r} is assigned more than once", lineno=lineno)

		try:
			assignment[doc_id] = Split(split)
		except ValueError:
			raise CorpusSchemaError(f"unknown split {split!r}", lineno=lineno) from None

	return SplitAssignment(assignment)


def apply_split(corpus: Corpus, assignment: SplitAssignment) -> Dict[Split, Corpus]:
	"""
	Partition ``corpus`` according to ``assignment``.

	:param corpus:
	:param assignment:

	:raises CorpusSchemaError: unless every document is assigned exactly once and every assigned id exists.
	"""

	doc_ids = set(corpus.doc_ids)
	missing = [d for d in corpus.doc_ids if d not in assignment.assignment]
	extra = [d for d in assignment.assignment if d not in doc_ids]

	if missing:
		raise CorpusSchemaError(f"documents missing from the split: {', '.join(missing)}")
	if extra:
		raise CorpusSchemaError(f"split refers to unknown documents: {', '.join(extra)}")

	return {split: corpus.filter(lambda d, s=split: assignment[d.doc_id] == s) for split in Split}


class ParagraphInstance(NamedTuple):
	"""
	A paragraph-level classification instance (argument presence and argument type tasks).
	"""

	doc_id: str
	para_id: str
	text: str
	argument_types: FrozenSet[ArgumentType]

	@property
	def key(self) -> str:
		"""
		The identifier of the paragraph within the corpus (see :func:`~.paragraph_key`).
		"""

		return paragraph_key(self.doc_id, self.para_id)

	@property
	def is_argumentative(self) -> bool:  # noqa: D102
		return bool(self.argument_types)


def paragraph_instances(corpus: Corpus) -> List[ParagraphInstance]:
	"""
	Flatten a corpus into its paragraphs, in document order.

	:param corpus:
	"""

	return [
			ParagraphInstance(d.doc_id, p.para_id, p.text, p.argument_types)
			for d in corpus
			for p in d.paragraphs
			]


def _escape_key_part(part: str) -> str:
	return part.replace('%', "%25").replace('#', "%23")


def paragraph_key(doc_id: str, para_id: str) -> str:
	"""
	Returns the identifier of a paragraph within a corpus, ``<doc_id>#<para_id>``.

	``%`` and ``#`` inside either id are percent-encoded, so distinct pairs always give distinct keys.

	:param doc_id:
	:param para_id:
	"""

	return f"{_escape_key_part(doc_id)}#{_escape_key_part(para_id)}"


def split_paragraph_key(key: str) -> Tuple[str, str]:
	"""
	Split a key made by :func:`~.paragraph_key` back into ``(doc_id, para_id)``.

	:param key:
	"""

	doc_part, _, para_part = key.partition('#')
	return unquote(doc_part), unquote(para_part)
