#!/usr/bin/env python3
#
#  baselines.py
"""
Reference predictors for argument presence, argument types and the holistic label.
"""
#
#  Copyright © 2025 The judicial_formalism developers
#
#  Distributed under the MIT License. See LICENSE for details.
#

# stdlib
import logging
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import (
		Any,
		Callable,
		Dict,
		FrozenSet,
		Hashable,
		Iterable,
		List,
		Mapping,
		Optional,
		Pattern,
		Sequence,
		Tuple,
		Union
		)

# 3rd party
import numpy
from domdf_python_tools.paths import PathPlus
from domdf_python_tools.typing import PathLike

# this package
from judicial_formalism.corpus import (
		ARGUMENT_TYPES,
		ArgumentType,
		Corpus,
		Document,
		HolisticLabel,
		Paragraph,
		ParagraphInstance,
		paragraph_instances
		)
from judicial_formalism.records import numbered_lines

__all__ = [
		"LexiconError",
		"TriggerLexicon",
		"load_lexicon",
		"BUILTIN_LEXICONS",
		"trigger_classify",
		"ConstantPredictor",
		"RandomPredictor",
		"majority_predictor",
		"random_predictor",
		"presence_baseline",
		"types_baseline",
		"holistic_baseline",
		"predict_corpus",
		"BASELINE_KINDS",
		"RANDOM_MODES",
		]

logger = logging.getLogger(__name__)

#: The names of the lexicons shipped with the package.
BUILTIN_LEXICONS: Tuple[str, ...] = ("en", "cs")

BASELINE_KINDS: Tuple[str, ...] = ("majority", "random", "trigger")
RANDOM_MODES: Tuple[str, ...] = ("uniform", "marginal")

_LEXICON_DIR = PathPlus(__file__).parent / "lexicons"


class LexiconError(ValueError):
	"""
	Raised when a lexicon file is malformed.
	"""


def _compile(pattern: str) -> Pattern[str]:
	parts = pattern.casefold().split('*')
	return re.compile(r"\S*".join(re.escape(part) for part in parts))


@dataclass(frozen=True)
class TriggerLexicon:
	"""
	Cue patterns signalling each argument type.

	Patterns are matched case-insensitively as substrings of the paragraph text;
	``*`` matches any run of non-whitespace characters. No other character is special.
	"""

	patterns: Mapping[ArgumentType, Tuple[str, ...]] = field(default_factory=dict)

	def __post_init__(self) -> None:
		patterns: Dict[ArgumentType, Tuple[str, ...]] = {}

		for code, entries in self.patterns.items():
			try:
				argument_type = ArgumentType(code)
			except ValueError:
				raise LexiconError(f"Unknown argument type {code!r}") from None

			for entry in entries:
				if not entry.replace('*', '').strip():
					raise LexiconError(f"Empty pattern {entry!r} for {argument_type.value}")

			patterns[argument_type] = tuple(entries)

		object.__setattr__(self, "patterns", patterns)
		object.__setattr__(
				self,
				"_compiled",
				{t: tuple(_compile(p) for p in entries) for t, entries in patterns.items()},
				)

	def matches(self, text: str) -> FrozenSet[ArgumentType]:
		"""
		Returns the argument types with at least one pattern found in ``text``.

		:param text:
		"""

		folded = text.casefold()
		compiled: Dict[ArgumentType, Tuple[Pattern[str], ...]] = self._compiled  # type: ignore[attr-defined]
		return frozenset(t for t, regexes in compiled.items() if any(r.search(folded) for r in regexes))

	def __len__(self) -> int:
		return sum(len(entries) for entries in self.patterns.values())


def load_lexicon(source: Union[str, PathLike]) -> TriggerLexicon:
	"""
	Load a lexicon file with one ``TYPE<TAB>pattern`` entry per line.

	Blank lines and lines starting with ``#`` are ignored.

	:param source: The name of a built-in lexicon (see :data:`~.BUILTIN_LEXICONS`), or a path.

	:raises LexiconError: if a line is malformed.
	"""

	if isinstance(source, str) and source in BUILTIN_LEXICONS:
		path = _LEXICON_DIR / f"triggers_{source}.tsv"
	else:
		path = PathPlus(source)

	patterns: Dict[str, List[str]] = {}

	for lineno, line in numbered_lines(path):
		if line.startswith('#'):
			continue

		code, sep, pattern = line.partition('\t')
		if not sep:
			raise LexiconError(f"{path.name}:{lineno}: expected 'TYPE<TAB>pattern'")
		if code.strip() not in ArgumentType.__members__:
			raise LexiconError(f"{path.name}:{lineno}: unknown argument type {code.strip()!r}")
		if not pattern.replace('*', '').strip():
			raise LexiconError(f"{path.name}:{lineno}: empty pattern")

		patterns.setdefault(code.strip(), []).append(pattern)

	lexicon = TriggerLexicon({ArgumentType(code): tuple(entries) for code, entries in patterns.items()})
	logger.debug("Loaded %d trigger patterns from %s", len(lexicon), path.as_posix())
	return lexicon


def trigger_classify(paragraph: Union[Paragraph, ParagraphInstance, str], lexicon: TriggerLexicon) -> FrozenSet[ArgumentType]:
	"""
	Predict the argument types of a paragraph: those with a pattern occurring in its text.

	The paragraph is predicted argumentative iff the result is non-empty.

	:param paragraph: A paragraph, or its text.
	:param lexicon:
	"""

	text = paragraph if isinstance(paragraph, str) else paragraph.text
	return lexicon.matches(text)


def _declared_order(labels: Sequence[Hashable]) -> List[Hashable]:
	first = labels[0]
	if isinstance(first, Enum) and all(type(label) is type(first) for label in labels):
		return list(type(first))
	if all(isinstance(label, bool) for label in labels):
		return [False, True]
	return list(dict.fromkeys(labels))


@dataclass(frozen=True)
class ConstantPredictor:
	"""
	Predicts the same label for every input.
	"""

	label: Any

	def __call__(self, instance: Any = None) -> Any:
		return self.label

	def predict(self, instances: Iterable[Any]) -> List[Any]:  # noqa: D102
		return [self.label for _ in instances]


def majority_predictor(train_labels: Sequence[Hashable], order: Optional[Sequence[Hashable]] = None) -> ConstantPredictor:
	"""
	Returns a predictor of the most frequent training label.

	:param train_labels:
	:param order: The declared label order, which breaks ties. Defaults to the declaration order
		of an enumeration, ``(False, True)`` for booleans, or order of first appearance.
	"""

	if not len(train_labels):
		raise ValueError("The majority baseline needs training labels")

	counts = Counter(train_labels)
	order = list(order) if order is not None else _declared_order(train_labels)
	best = max(counts.values())
	return ConstantPredictor(next(label for label in order if counts.get(label) == best))


class RandomPredictor:
	"""
	Draws an independent label for every input from a fixed distribution.

	The draws come from a generator seeded with ``seed``, so the sequence of predictions is reproducible.

	:param classes:
	:param probabilities:
	:param seed:
	"""

	def __init__(self, classes: Sequence[Any], probabilities: Sequence[float], seed: int = 0) -> None:
		if len(classes) != len(probabilities) or not classes:
			raise ValueError("Each class needs a probability")

		self.classes = list(classes)
		self.probabilities = numpy.asarray(probabilities, dtype=numpy.float64)
		self.rng = numpy.random.default_rng(seed)

	def __call__(self, instance: Any = None) -> Any:
		return self.classes[self.rng.choice(len(self.classes), p=self.probabilities)]

	def predict(self, instances: Iterable[Any]) -> List[Any]:  # noqa: D102
		return [self(instance) for instance in instances]


def random_predictor(
		train_labels: Sequence[Hashable],
		mode: str = "uniform",
		seed: int = 0,
		classes: Optional[Sequence[Hashable]] = None,
		) -> RandomPredictor:
	"""
	Returns a predictor drawing labels uniformly, or with the training label frequencies.

	:param train_labels:
	:param mode: ``'uniform'`` or ``'marginal'``.
	:param seed:
	:param classes: The label set. Defaults to the declared order of ``train_labels``.
	"""

	if mode not in RANDOM_MODES:
		raise ValueError(f"Unknown random baseline mode {mode!r}")
	if not len(train_labels) and (mode == "marginal" or classes is None):
		raise ValueError("The random baseline needs training labels")

	classes = list(classes) if classes is not None else _declared_order(train_labels)

	if mode == "uniform":
		probabilities = [1 / len(classes)] * len(classes)
	else:
		counts = Counter(train_labels)
		probabilities = [counts.get(c, 0) / len(train_labels) for c in classes]

	return RandomPredictor(classes, probabilities, seed)


class _PerLabelRandom:

	def __init__(self, probabilities: Mapping[ArgumentType, float], seed: int) -> None:
		self.probabilities = dict(probabilities)
		self.rng = numpy.random.default_rng(seed)

	def __call__(self, instance: Any = None) -> FrozenSet[ArgumentType]:
		draws = self.rng.random(len(ARGUMENT_TYPES))
		return frozenset(t for t, u in zip(ARGUMENT_TYPES, draws) if u < self.probabilities[t])


def _lexicon_for(lexicon: Union[TriggerLexicon, str, PathLike, None]) -> TriggerLexicon:
	if lexicon is None:
		raise ValueError("The trigger baseline needs a lexicon")
	if isinstance(lexicon, TriggerLexicon):
		return lexicon
	return load_lexicon(lexicon)


def _check_kind(kind: str) -> None:
	if kind not in BASELINE_KINDS:
		raise ValueError(f"Unknown baseline kind {kind!r}; choose from {', '.join(BASELINE_KINDS)}")


def presence_baseline(
		kind: str,
		train: Corpus,
		mode: str = "uniform",
		seed: int = 0,
		lexicon: Union[TriggerLexicon, str, PathLike, None] = None,
		) -> Callable[[ParagraphInstance], bool]:
	"""
	Returns an argument presence predictor for paragraphs.

	:param kind: ``'majority'``, ``'random'`` or ``'trigger'``.
	:param train: The training corpus.
	:param mode: The random baseline's distribution.
	:param seed:
	:param lexicon: The trigger lexicon, a built-in lexicon name, or a path.
	"""

	_check_kind(kind)
	labels = [instance.is_argumentative for instance in paragraph_instances(train)]

	if kind == "majority":
		return majority_predictor(labels, order=[False, True])
	if kind == "random":
		return random_predictor(labels, mode, seed, classes=[False, True])

	trigger_lexicon = _lexicon_for(lexicon)
	return lambda instance: bool(trigger_classify(instance, trigger_lexicon))


def types_baseline(
		kind: str,
		train: Corpus,
		mode: str = "uniform",
		seed: int = 0,
		lexicon: Union[TriggerLexicon, str, PathLike, None] = None,
		) -> Callable[[ParagraphInstance], FrozenSet[ArgumentType]]:
	"""
	Returns an argument type predictor for paragraphs.

	The majority baseline predicts each type present in more than half of the training paragraphs
	(in practice, none). The random baseline draws each type independently, with probability
	one half or the type's training frequency.

	:param kind: ``'majority'``, ``'random'`` or ``'trigger'``.
	:param train: The training corpus.
	:param mode: The random baseline's distribution.
	:param seed:
	:param lexicon: The trigger lexicon, a built-in lexicon name, or a path.
	"""

	_check_kind(kind)
	instances = paragraph_instances(train)

	if kind == "majority":
		label_set = frozenset(
				t for t in ARGUMENT_TYPES
				if majority_predictor([t in i.argument_types for i in instances], order=[False, True]).label
				)
		return ConstantPredictor(label_set)

	if kind == "random":
		if mode == "uniform":
			probabilities = {t: 0.5 for t in ARGUMENT_TYPES}
		else:
			if not instances:
				raise ValueError("The random baseline needs training labels")
			probabilities = {t: sum(t in i.argument_types for i in instances) / len(instances) for t in ARGUMENT_TYPES}
		return _PerLabelRandom(probabilities, seed)

	trigger_lexicon = _lexicon_for(lexicon)
	return lambda instance: trigger_classify(instance, trigger_lexicon)


def holistic_baseline(
		kind: str,
		train: Corpus,
		mode: str = "uniform",
		seed: int = 0,
		lexicon: Union[TriggerLexicon, str, PathLike, None] = None,
		) -> Callable[[Document], HolisticLabel]:
	"""
	Returns a holistic label predictor for documents.

	The trigger baseline labels a document non-formalistic when more than half of the
	argument types triggered anywhere in it are non-formalistic.

	:param kind: ``'majority'``, ``'random'`` or ``'trigger'``.
	:param train: The training corpus, which must be fully labelled for the majority and marginal random baselines.
	:param mode: The random baseline's distribution.
	:param seed:
	:param lexicon: The trigger lexicon, a built-in lexicon name, or a path.
	"""

	_check_kind(kind)

	if kind == "trigger":
		trigger_lexicon = _lexicon_for(lexicon)

		def classify(document: Document) -> HolisticLabel:
			triggered = set()
			for paragraph in document.paragraphs:
				triggered.update(trigger_classify(paragraph, trigger_lexicon))

			non_formalistic = sum(1 for t in triggered if not t.is_formalistic)
			if triggered and non_formalistic / len(triggered) > 0.5:
				return HolisticLabel.NON_FORMALISTIC
			return HolisticLabel.FORMALISTIC

		return classify

	train.require_labels()
	labels = [d.holistic_label for d in train]

	if kind == "majority":
		return majority_predictor(labels, order=list(HolisticLabel))
	return random_predictor(labels, mode, seed, classes=list(HolisticLabel))


def predict_corpus(
		corpus: Corpus,
		task: int,
		predictor: Callable[[Any], Any],
		) -> Corpus:
	"""
	Apply a predictor to every instance of ``corpus`` and return the predictions as a corpus.

	* Task 1 stores each paragraph's decision in a ``presence`` field and leaves argument types empty.
	* Task 2 replaces each paragraph's argument types.
	* Task 3 replaces each document's holistic label.

	:param corpus:
	:param task: ``1``, ``2`` or ``3``.
	:param predictor: A predictor returned by one of the ``*_baseline`` functions.
	"""

	if task == 3:
		documents = tuple(replace(d, holistic_label=predictor(d)) for d in corpus)
		return Corpus(documents, corpus.provenance)

	if task not in (1, 2):
		raise ValueError(f"Unknown task {task!r}")

	provenance = dict(corpus.provenance)
	paragraph_fields: Dict[str, Dict[str, Dict[str, Any]]] = {
			doc_id: {para_id: dict(fields) for para_id, fields in paragraphs.items()}
			for doc_id, paragraphs in provenance.get("extra_paragraph_fields", {}).items()
			}

	documents = []
	for document in corpus:
		predicted = {}
		for paragraph in document.paragraphs:
			instance = ParagraphInstance(document.doc_id, paragraph.para_id, paragraph.text, paragraph.argument_types)
			if task == 1:
				presence = bool(predictor(instance))
				paragraph_fields.setdefault(document.doc_id, {}).setdefault(paragraph.para_id, {})["presence"] = presence
				predicted[paragraph.para_id] = frozenset()
			else:
				predicted[paragraph.para_id] = frozenset(predictor(instance))

		documents.append(document.relabel(predicted))

	provenance["extra_paragraph_fields"] = paragraph_fields
	return Corpus(tuple(documents), provenance)
