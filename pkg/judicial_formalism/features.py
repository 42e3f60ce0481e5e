#!/usr/bin/env python3
#
#  features.py
"""
The document-level feature vector and its standardization.

Each document is described by eleven numbers, always in this order:
its length in tokens, the number of annotated arguments, the mean length of
argumentative paragraphs, and the share (in percent) of each of the eight argument types.
"""
#
#  Copyright © 2025 The judicial_formalism developers
#
#  Distributed under the MIT License. See LICENSE for details.
#

# stdlib
from dataclasses import dataclass, field
from typing import AbstractSet, Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

# 3rd party
import numpy

# this package
from judicial_formalism.corpus import ARGUMENT_TYPES, ArgumentType, Corpus, Document, HolisticLabel
from judicial_formalism.records import decode_array, encode_array

__all__ = [
		"FEATURE_NAMES",
		"N_FEATURES",
		"FeatureVector",
		"Scaler",
		"extract_features",
		"feature_matrix",
		"fit_scaler",
		"apply_scaler",
		"labeled_vectors",
		"target",
		]

#: The names of the feature vector components, in order.
FEATURE_NAMES: Tuple[str, ...] = (
		"doc_length_tokens",
		"n_arguments",
		"avg_argument_length_tokens",
		*(f"rel_freq_{t.value}" for t in ARGUMENT_TYPES),
		)

N_FEATURES: int = len(FEATURE_NAMES)

_ArrayLike = Union["FeatureVector", Sequence[float], numpy.ndarray]


@dataclass(frozen=True)
class FeatureVector:
	"""
	The features of one document.
	"""

	doc_length_tokens: int
	n_arguments: int
	avg_argument_length_tokens: float
	rel_freq: Mapping[ArgumentType, float] = field(default_factory=dict)

	def __post_init__(self) -> None:
		object.__setattr__(self, "rel_freq", {t: float(self.rel_freq.get(t, 0.0)) for t in ARGUMENT_TYPES})

	def as_array(self) -> numpy.ndarray:
		"""
		Returns the eleven components as a float64 array in :data:`~.FEATURE_NAMES` order.
		"""

		return numpy.array(
				[
						self.doc_length_tokens,
						self.n_arguments,
						self.avg_argument_length_tokens,
						*(self.rel_freq[t] for t in ARGUMENT_TYPES),
						],
				dtype=numpy.float64,
				)

	@classmethod
	def from_array(cls, array: Sequence[float]) -> "FeatureVector":
		"""
		Construct a :class:`~.FeatureVector` from its eleven components.

		:param array:
		"""

		array = numpy.asarray(array, dtype=numpy.float64)
		if array.shape != (N_FEATURES, ):
			raise ValueError(f"Expected {N_FEATURES} components, got shape {array.shape}")

		return cls(
				doc_length_tokens=int(array[0]),
				n_arguments=int(array[1]),
				avg_argument_length_tokens=float(array[2]),
				rel_freq=dict(zip(ARGUMENT_TYPES, map(float, array[3:]))),
				)

	def as_dict(self) -> Dict[str, float]:  # noqa: D102
		return dict(zip(FEATURE_NAMES, map(float, self.as_array())))


def extract_features(document: Document, retained: Optional[AbstractSet[str]] = None) -> FeatureVector:
	"""
	Compute the feature vector of a document from its (gold or predicted) argument annotations.

	The average argument length is the mean token count of paragraphs with at least one argument.
	Relative frequencies are all zero when the document has no arguments.

	:param document:
	:param retained: If given, only paragraphs with these ids count towards the document length.
	"""

	paragraphs = document.paragraphs
	length_paragraphs = paragraphs if retained is None else [p for p in paragraphs if p.para_id in retained]

	counts = document.type_counts()
	n_arguments = sum(counts.values())
	argumentative = [p.token_count for p in paragraphs if p.argument_types]

	if n_arguments:
		rel_freq = {t: 100 * counts[t] / n_arguments for t in ARGUMENT_TYPES}
	else:
		rel_freq = {}

	return FeatureVector(
			doc_length_tokens=sum(p.token_count for p in length_paragraphs),
			n_arguments=n_arguments,
			avg_argument_length_tokens=sum(argumentative) / len(argumentative) if argumentative else 0.0,
			rel_freq=rel_freq,
			)


def feature_matrix(vectors: Sequence[_ArrayLike]) -> numpy.ndarray:
	"""
	Stack feature vectors (or raw rows of eleven numbers) into an ``(n, 11)`` float64 matrix.

	:param vectors:
	"""

	rows = [v.as_array() if isinstance(v, FeatureVector) else numpy.asarray(v, dtype=numpy.float64) for v in vectors]
	if not rows:
		return numpy.zeros((0, N_FEATURES), dtype=numpy.float64)

	matrix = numpy.vstack(rows)
	if matrix.shape[1] != N_FEATURES:
		raise ValueError(f"Expected {N_FEATURES} features per row, got {matrix.shape[1]}")

	return matrix


def target(label: Union[HolisticLabel, str]) -> int:
	"""
	Returns the training target of a holistic label: 1 for non-formalistic, 0 for formalistic.

	:param label:
	"""

	return int(HolisticLabel(label) is HolisticLabel.NON_FORMALISTIC)


def labeled_vectors(corpus: Corpus) -> List[Tuple[FeatureVector, HolisticLabel]]:
	"""
	Returns the gold-feature vector and holistic label of every document.

	:param corpus:

	:raises UnlabeledDocumentError: if any document lacks a holistic label.
	"""

	corpus.require_labels()
	return [(extract_features(d), d.holistic_label) for d in corpus]  # type: ignore[misc]


@dataclass(frozen=True, eq=False)
class Scaler:
	"""
	Per-component standardization fitted on training data.

	:param mean: The training mean of each component.
	:param scale: The training population standard deviation of each component, or 1 for constant components.
	"""

	mean: numpy.ndarray
	scale: numpy.ndarray

	def transform(self, matrix: numpy.ndarray) -> numpy.ndarray:
		"""
		Standardize the rows of ``matrix``.

		:param matrix:
		"""

		return (numpy.asarray(matrix, dtype=numpy.float64) - self.mean) / self.scale

	def inverse_transform(self, matrix: numpy.ndarray) -> numpy.ndarray:
		"""
		Map standardized rows back to feature space.

		:param matrix:
		"""

		return numpy.asarray(matrix, dtype=numpy.float64) * self.scale + self.mean

	def to_record(self) -> Dict[str, Any]:  # noqa: D102
		return {"mean": encode_array(self.mean), "scale": encode_array(self.scale)}

	@classmethod
	def from_record(cls, record: Mapping[str, Any]) -> "Scaler":  # noqa: D102
		return cls(decode_array(record["mean"]), decode_array(record["scale"]))


def fit_scaler(train_vectors: Sequence[_ArrayLike]) -> Scaler:
	"""
	Fit a :class:`~.Scaler` on the training vectors.

	:param train_vectors:

	:raises ValueError: if ``train_vectors`` is empty.
	"""

	matrix = feature_matrix(train_vectors)
	if not len(matrix):
		raise ValueError("Cannot fit a scaler on an empty training set")

	mean = matrix.mean(axis=0)
	scale = matrix.std(axis=0)

	constant = numpy.ptp(matrix, axis=0) == 0
	mean[constant] = matrix[0, constant]
	scale[constant] = 1.0

	return Scaler(mean, scale)


def apply_scaler(scaler: Scaler, vector: _ArrayLike) -> numpy.ndarray:
	"""
	Standardize a single feature vector with a scaler fitted on training data.

	:param scaler:
	:param vector:
	"""

	return scaler.transform(feature_matrix([vector]))[0]
