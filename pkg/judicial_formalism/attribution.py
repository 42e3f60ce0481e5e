#!/usr/bin/env python3
#
#  attribution.py
"""
Exact Shapley-value attribution of the formalism classifier's output to its input features.

With eleven features there are only 2048 coalitions, so every coalition is evaluated
(in a single batch) and no sampling is involved. Attributions are in raw feature space:
the model's scaler is applied inside the value function.
"""
#
#  Copyright © 2025 The judicial_formalism developers
#
#  Distributed under the MIT License. See LICENSE for details.
#

# stdlib
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

# 3rd party
import numpy

# this package
from judicial_formalism.features import FEATURE_NAMES, FeatureVector, feature_matrix
from judicial_formalism.mlp import MlpModel

__all__ = ["Attribution", "SummaryRow", "ShapSummary", "exact_shapley", "shap_summary", "coalition_weights"]

logger = logging.getLogger(__name__)

#: A model, or any function mapping an ``(n, d)`` matrix of raw features to ``n`` outputs.
ValueFunction = Union[MlpModel, Callable[[numpy.ndarray], numpy.ndarray]]


@dataclass(frozen=True, eq=False)
class Attribution:
	"""
	The Shapley values of one instance.
	"""

	#: One value per feature; they sum to ``instance_output - base_value``.
	values: numpy.ndarray

	#: The model output at the reference point.
	base_value: float

	#: The model output at the instance.
	instance_output: float

	feature_names: Tuple[str, ...] = FEATURE_NAMES

	def as_dict(self) -> Dict[str, float]:  # noqa: D102
		return dict(zip(self.feature_names, map(float, self.values)))


def coalition_weights(n_features: int) -> numpy.ndarray:
	"""
	The Shapley weight :math:`s! (d - s - 1)! / d!` of a coalition of each size ``s`` not containing the feature.

	:param n_features: The number of features ``d``.
	"""

	total = math.factorial(n_features)
	return numpy.array(
			[math.factorial(s) * math.factorial(n_features - s - 1) / total for s in range(n_features)],
			dtype=numpy.float64,
			)


def _as_row(vector: Union[FeatureVector, Sequence[float], numpy.ndarray]) -> numpy.ndarray:
	return feature_matrix([vector])[0]


def _evaluate(model: ValueFunction, matrix: numpy.ndarray) -> numpy.ndarray:
	if isinstance(model, MlpModel):
		return model.predict_proba(matrix)
	return numpy.asarray(model(matrix), dtype=numpy.float64).reshape(len(matrix))


def exact_shapley(
		model: ValueFunction,
		instance: Union[FeatureVector, Sequence[float], numpy.ndarray],
		reference: Union[FeatureVector, Sequence[float], numpy.ndarray, None] = None,
		) -> Attribution:
	"""
	Compute the exact Shapley values of ``instance`` relative to ``reference``.

	The value of a coalition is the model output with the coalition's features taken
	from the instance and every other feature from the reference.

	:param model: An :class:`~.MlpModel` (whose output is the non-formalistic probability),
		or a function of a raw feature matrix.
	:param instance:
	:param reference: Defaults to the training mean stored in the model's scaler.
	"""

	x = instance.as_array() if isinstance(instance, FeatureVector) else numpy.asarray(instance, dtype=numpy.float64)
	if reference is None:
		if not isinstance(model, MlpModel):
			raise TypeError("A reference point is required for models without a scaler")
		r = model.scaler.mean.copy()
	else:
		r = reference.as_array() if isinstance(reference, FeatureVector) else numpy.asarray(reference, dtype=numpy.float64)

	if x.shape != r.shape or x.ndim != 1:
		raise ValueError(f"Instance and reference shapes differ: {x.shape} != {r.shape}")

	d = len(x)
	coalitions = numpy.arange(2**d)
	members = ((coalitions[:, None] >> numpy.arange(d)) & 1).astype(bool)
	outputs = _evaluate(model, numpy.where(members, x, r))

	weights = coalition_weights(d)[members.sum(axis=1)]

	values = numpy.zeros(d, dtype=numpy.float64)
	for i in range(d):
		without = coalitions[~members[:, i]]
		values[i] = numpy.sum(weights[without] * (outputs[without | (1 << i)] - outputs[without]))

	names = FEATURE_NAMES if d == len(FEATURE_NAMES) else tuple(f"x{i}" for i in range(d))
	return Attribution(values, float(outputs[0]), float(outputs[-1]), names)


class SummaryRow(NamedTuple):
	"""
	One feature of a :class:`~.ShapSummary`.
	"""

	feature: str
	mean_abs: float

	#: Pearson correlation between the feature value and its Shapley value (0 if either is constant).
	correlation: float

	@property
	def sign(self) -> str:
		"""
		``'+'`` if higher feature values push towards non-formalism, ``'-'`` if away, ``'0'`` otherwise.
		"""

		if self.correlation > 0:
			return '+'
		if self.correlation < 0:
			return '-'
		return '0'


@dataclass(frozen=True, eq=False)
class ShapSummary:
	"""
	Features ranked by mean absolute Shapley value, together with the per-instance attributions.
	"""

	rows: Tuple[SummaryRow, ...]
	attributions: Tuple[Attribution, ...]
	instances: numpy.ndarray

	@property
	def ranking(self) -> List[str]:  # noqa: D102
		return [row.feature for row in self.rows]

	def table(self) -> List[List[Any]]:
		"""
		Returns the summary as rows of feature, mean absolute value and sign of association.
		"""

		table: List[List[Any]] = [["feature", "mean_abs_shap", "association"]]
		table.extend([row.feature, repr(row.mean_abs), row.sign] for row in self.rows)
		return table


def _correlation(a: numpy.ndarray, b: numpy.ndarray) -> float:
	if len(a) < 2 or numpy.ptp(a) == 0 or numpy.ptp(b) == 0:
		return 0.0
	return float(numpy.corrcoef(a, b)[0, 1])


def shap_summary(
		model: ValueFunction,
		dataset: Sequence[Union[FeatureVector, Sequence[float], numpy.ndarray]],
		reference: Optional[Union[FeatureVector, Sequence[float], numpy.ndarray]] = None,
		) -> ShapSummary:
	"""
	Attribute every instance of ``dataset`` and rank features by mean absolute Shapley value.

	Ties in the ranking keep feature order.

	:param model:
	:param dataset:
	:param reference: Defaults to the training mean stored in the model's scaler.

	:raises ValueError: if ``dataset`` is empty.
	"""

	if not len(dataset):
		raise ValueError("Cannot summarise attributions of an empty dataset")

	instances = feature_matrix(dataset)
	attributions = tuple(exact_shapley(model, row, reference) for row in instances)
	values = numpy.vstack([a.values for a in attributions])
	names = attributions[0].feature_names

	mean_abs = numpy.abs(values).mean(axis=0)
	rows = [
			SummaryRow(names[i], float(mean_abs[i]), _correlation(instances[:, i], values[:, i]))
			for i in range(len(names))
			]
	rows.sort(key=lambda row: -row.mean_abs)

	logger.info("Attributed %d instances; top feature %s", len(instances), rows[0].feature)
	return ShapSummary(tuple(rows), attributions, instances)
