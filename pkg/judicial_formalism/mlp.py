#!/usr/bin/env python3
#
#  mlp.py
"""
The multi-layer perceptron which predicts the holistic label from document features.

The network maps the eleven standardized features through rectified hidden layers
(20 and 50 units by default, each followed by dropout during training) to one logistic
output, the probability that the decision is non-formalistic. It is trained with Adam
on mini-batches and stopped early on the validation set.
"""
#
#  Copyright © 2025 The judicial_formalism developers
#
#  Distributed under the MIT License. See LICENSE for details.
#

# stdlib
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

# 3rd party
import numpy
from domdf_python_tools.paths import PathPlus
from domdf_python_tools.typing import PathLike

# this package
from judicial_formalism.config import BadConfigError
from judicial_formalism.corpus import HolisticLabel
from judicial_formalism.features import (
		FEATURE_NAMES,
		N_FEATURES,
		FeatureVector,
		Scaler,
		feature_matrix,
		fit_scaler,
		target
		)
from judicial_formalism.metrics import BinaryReport, binary_macro_prf, holistic_report
from judicial_formalism.records import RecordError, decode_array, dump_record, encode_array, load_record

__all__ = [
		"LOSSES",
		"MlpConfig",
		"MlpModel",
		"EpochRecord",
		"TrainingDivergedError",
		"train_mlp",
		"predict",
		"predict_label",
		"gradients",
		"loss_value",
		"gradient_check",
		"evaluate_mlp",
		"save_model",
		"load_model",
		"MODEL_KIND",
		]

logger = logging.getLogger(__name__)

#: The record kind of saved models.
MODEL_KIND = "mlp-model"

#: The available training losses.
LOSSES: Tuple[str, ...] = ("bce", "weighted_bce", "asymmetric")

#: Probabilities at or above this are classified non-formalistic.
THRESHOLD = 0.5

_ADAM_BETA1 = 0.9
_ADAM_BETA2 = 0.999
_ADAM_EPSILON = 1e-8

LabeledVectors = Sequence[Tuple[FeatureVector, HolisticLabel]]


class TrainingDivergedError(ArithmeticError):
	"""
	Raised when the training loss becomes infinite or NaN.

	:param epoch: The 1-based epoch in which the loss diverged.
	:param loss: The offending loss value.
	"""

	def __init__(self, epoch: int, loss: float) -> None:
		super().__init__(f"Training diverged in epoch {epoch}: loss is {loss}")
		self.epoch = epoch
		self.loss = loss


@dataclass(frozen=True)
class MlpConfig:
	"""
	Hyperparameters of the formalism classifier.
	"""

	hidden_sizes: Tuple[int, ...] = (20, 50)
	dropout_rates: Tuple[float, ...] = (0.1, 0.4)
	learning_rate: float = 1e-3
	batch_size: int = 8
	patience: int = 3
	max_epochs: int = 200
	seed: int = 0

	#: One of :data:`~.LOSSES`.
	loss: str = "bce"

	#: The early stopping criterion: validation ``'loss'`` or validation ``'macro_f1'``.
	monitor: str = "loss"

	#: Focusing exponents and probability margin of the asymmetric loss.
	gamma_pos: float = 0.0
	gamma_neg: float = 4.0
	margin: float = 0.05

	def __post_init__(self) -> None:
		object.__setattr__(self, "hidden_sizes", tuple(int(s) for s in self.hidden_sizes))
		object.__setattr__(self, "dropout_rates", tuple(float(r) for r in self.dropout_rates))

		if len(self.hidden_sizes) != len(self.dropout_rates):
			raise BadConfigError("'hidden-sizes' and 'dropout-rates' must have the same length")
		if any(s <= 0 for s in self.hidden_sizes):
			raise BadConfigError(f"Hidden layer sizes must be positive, got {self.hidden_sizes}")
		if any(not 0 <= r < 1 for r in self.dropout_rates):
			raise BadConfigError(f"Dropout rates must lie in [0, 1), got {self.dropout_rates}")
		if self.loss not in LOSSES:
			raise BadConfigError(f"Unknown loss {self.loss!r}; choose from {', '.join(LOSSES)}")
		if self.monitor not in ("loss", "macro_f1"):
			raise BadConfigError(f"Unknown early stopping monitor {self.monitor!r}")
		if not (self.learning_rate > 0 and self.batch_size > 0 and self.patience > 0 and self.max_epochs > 0):
			raise BadConfigError("learning rate, batch size, patience and max epochs must be positive")
		if self.gamma_pos < 0 or self.gamma_neg < 0 or not 0 <= self.margin < 1:
			raise BadConfigError("focusing exponents must be non-negative and the margin must lie in [0, 1)")

	@property
	def layer_sizes(self) -> Tuple[int, ...]:
		"""
		The number of units of every layer, input and output included.
		"""

		return (N_FEATURES, *self.hidden_sizes, 1)


class EpochRecord(NamedTuple):
	"""
	Training and validation performance after one epoch.
	"""

	epoch: int
	train_loss: float
	val_loss: float
	val_macro_f1: float


@dataclass(frozen=True, eq=False)
class MlpModel:
	"""
	A trained formalism classifier. Immutable; prediction is pure.
	"""

	weights: Tuple[numpy.ndarray, ...]
	biases: Tuple[numpy.ndarray, ...]
	scaler: Scaler
	config: MlpConfig = field(default_factory=MlpConfig)

	#: The weight of positive examples in the ``weighted_bce`` loss.
	pos_weight: float = 1.0
	history: Tuple[EpochRecord, ...] = ()

	#: The 1-based epoch whose parameters were kept, or 0 for an untrained model.
	best_epoch: int = 0

	def __post_init__(self) -> None:
		object.__setattr__(self, "weights", tuple(numpy.asarray(w, dtype=numpy.float64) for w in self.weights))
		object.__setattr__(self, "biases", tuple(numpy.asarray(b, dtype=numpy.float64) for b in self.biases))

		if len(self.weights) != len(self.biases):
			raise ValueError("Every layer needs weights and biases")

		for w, b in zip(self.weights, self.biases):
			if w.ndim != 2 or b.shape != (w.shape[1], ):
				raise ValueError(f"Inconsistent layer shapes {w.shape} and {b.shape}")
			if not (numpy.isfinite(w).all() and numpy.isfinite(b).all()):
				raise ValueError("Model parameters must be finite")

	@property
	def parameters(self) -> List[numpy.ndarray]:
		"""
		The weights and biases, interleaved layer by layer.
		"""

		return [p for layer in zip(self.weights, self.biases) for p in layer]

	def logits(self, matrix: numpy.ndarray) -> numpy.ndarray:
		"""
		The output logits for raw (unscaled) feature rows.

		:param matrix:
		"""

		return _forward(self.weights, self.biases, self.scaler.transform(matrix))[0]

	def predict_proba(self, vectors: Sequence[Any]) -> numpy.ndarray:
		"""
		The probability that each document is non-formalistic.

		:param vectors: :class:`~.FeatureVector` objects or raw rows of eleven numbers.
		"""

		return _sigmoid(self.logits(feature_matrix(vectors)))

	def __call__(self, matrix: numpy.ndarray) -> numpy.ndarray:
		return _sigmoid(self.logits(numpy.atleast_2d(matrix)))


def _sigmoid(z: numpy.ndarray) -> numpy.ndarray:
	# exactly 0.5 at z == 0
	e = numpy.exp(-numpy.abs(z))
	return numpy.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _softplus(z: numpy.ndarray) -> numpy.ndarray:
	return numpy.logaddexp(0.0, z)


def _forward(
		weights: Sequence[numpy.ndarray],
		biases: Sequence[numpy.ndarray],
		x: numpy.ndarray,
		masks: Optional[Sequence[numpy.ndarray]] = None,
		) -> Tuple[numpy.ndarray, List[numpy.ndarray], List[numpy.ndarray]]:
	# einsum keeps each row's arithmetic independent of the rest of the batch
	activations = [x]
	pre_activations = []
	h = x

	for layer, (w, b) in enumerate(zip(weights, biases)):
		z = numpy.einsum("ni,ij->nj", h, w) + b
		pre_activations.append(z)

		if layer == len(weights) - 1:
			return z[:, 0], activations, pre_activations

		h = numpy.maximum(z, 0.0)
		if masks is not None:
			h = h * masks[layer]
		activations.append(h)

	raise ValueError("A network needs at least one layer")  # pragma: no cover


def _loss_terms(
		z: numpy.ndarray,
		y: numpy.ndarray,
		config: MlpConfig,
		pos_weight: float,
		) -> Tuple[numpy.ndarray, numpy.ndarray]:
	"""
	Returns the per-example loss and its derivative with respect to the logit.
	"""

	p = _sigmoid(z)
	q = _sigmoid(-z)

	if config.loss == "bce":
		return _softplus(z) - y * z, p - y

	if config.loss == "weighted_bce":
		loss = pos_weight * y * _softplus(-z) + (1 - y) * _softplus(z)
		grad = numpy.where(y == 1, pos_weight * (p - 1), p)
		return loss, grad

	# asymmetric: focal weighting of positives, shifted and focused negatives
	g_pos, g_neg, m = config.gamma_pos, config.gamma_neg, config.margin

	log_p = -_softplus(-z)
	loss_pos = -(q**g_pos) * log_p
	grad_pos = g_pos * p * q**g_pos * log_p - q**(g_pos + 1)

	shifted = numpy.maximum(p - m, 0.0)
	active = shifted > 0
	safe = numpy.where(active, shifted, 1.0)
	log_q = numpy.log1p(-safe)
	loss_neg = numpy.where(active, -(safe**g_neg) * log_q, 0.0)
	d_shifted = numpy.where(g_neg > 0, g_neg * safe**(g_neg - 1), 0.0) * -log_q + safe**g_neg / (1 - safe)
	grad_neg = numpy.where(active, d_shifted * p * q, 0.0)

	return numpy.where(y == 1, loss_pos, loss_neg), numpy.where(y == 1, grad_pos, grad_neg)


def _backward(
		weights: Sequence[numpy.ndarray],
		activations: Sequence[numpy.ndarray],
		pre_activations: Sequence[numpy.ndarray],
		d_logits: numpy.ndarray,
		masks: Optional[Sequence[numpy.ndarray]] = None,
		) -> Tuple[List[numpy.ndarray], List[numpy.ndarray]]:
	grad_w: List[numpy.ndarray] = [numpy.empty(0)] * len(weights)
	grad_b: List[numpy.ndarray] = [numpy.empty(0)] * len(weights)

	delta = d_logits[:, None]
	for layer in reversed(range(len(weights))):
		grad_w[layer] = numpy.einsum("ni,nj->ij", activations[layer], delta)
		grad_b[layer] = delta.sum(axis=0)

		if layer:
			delta = numpy.einsum("nj,ij->ni", delta, weights[layer])
			if masks is not None:
				delta = delta * masks[layer - 1]
			delta = delta * (pre_activations[layer - 1] > 0)

	return grad_w, grad_b


def loss_value(model: MlpModel, vectors: Sequence[Any], labels: Sequence[Any]) -> float:
	"""
	The mean training loss of the model on labelled vectors, without dropout.

	:param model:
	:param vectors:
	:param labels: Holistic labels, or 0/1 targets.
	"""

	x = model.scaler.transform(feature_matrix(vectors))
	z = _forward(model.weights, model.biases, x)[0]
	return float(_loss_terms(z, _targets(labels), model.config, model.pos_weight)[0].mean())


def gradients(model: MlpModel, vectors: Sequence[Any], labels: Sequence[Any]) -> List[numpy.ndarray]:
	"""
	The analytic gradient of :func:`~.loss_value` with respect to each array of :attr:`MlpModel.parameters`.

	:param model:
	:param vectors:
	:param labels: Holistic labels, or 0/1 targets.
	"""

	x = model.scaler.transform(feature_matrix(vectors))
	y = _targets(labels)
	z, activations, pre_activations = _forward(model.weights, model.biases, x)
	d_logits = _loss_terms(z, y, model.config, model.pos_weight)[1] / len(y)
	grad_w, grad_b = _backward(model.weights, activations, pre_activations, d_logits)
	return [g for layer in zip(grad_w, grad_b) for g in layer]


def _targets(labels: Sequence[Any]) -> numpy.ndarray:
	return numpy.array([label if isinstance(label, (int, numpy.integer)) else target(label) for label in labels],
						dtype=numpy.float64)


def gradient_check(
		model: MlpModel,
		sample: Tuple[Sequence[Any], Sequence[Any]],
		epsilon: float = 1e-5,
		) -> float:
	"""
	Compare analytic gradients with central finite differences for every parameter.

	:param model:
	:param sample: ``(vectors, labels)``.
	:param epsilon: The finite difference step.

	:returns: The largest relative error :math:`|a - n| / \\max(|a|, |n|, 10^{-4})`.
	"""

	vectors, labels = sample
	analytic = gradients(model, vectors, labels)
	parameters = [p.copy() for p in model.parameters]

	def perturbed_loss(index: int, position: Tuple[int, ...], delta: float) -> float:
		params = [p.copy() for p in parameters]
		params[index][position] += delta
		candidate = MlpModel(
				tuple(params[0::2]),
				tuple(params[1::2]),
				model.scaler,
				model.config,
				pos_weight=model.pos_weight,
				)
		return loss_value(candidate, vectors, labels)

	worst = 0.0
	for index, array in enumerate(parameters):
		for position in numpy.ndindex(*array.shape):
			numeric = (perturbed_loss(index, position, epsilon) - perturbed_loss(index, position, -epsilon)) / (2 * epsilon)
			exact = analytic[index][position]
			error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-4)
			worst = max(worst, error)

	return worst


def _init_parameters(
		config: MlpConfig,
		rng: numpy.random.Generator,
		) -> Tuple[List[numpy.ndarray], List[numpy.ndarray]]:
	weights, biases = [], []
	sizes = config.layer_sizes

	for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
		weights.append(rng.standard_normal((fan_in, fan_out)) * math.sqrt(2.0 / fan_in))
		biases.append(numpy.zeros(fan_out))

	return weights, biases


class _Adam:

	def __init__(self, parameters: Sequence[numpy.ndarray], learning_rate: float) -> None:
		self.learning_rate = learning_rate
		self.first = [numpy.zeros_like(p) for p in parameters]
		self.second = [numpy.zeros_like(p) for p in parameters]
		self.steps = 0

	def step(self, parameters: List[numpy.ndarray], grads: Sequence[numpy.ndarray]) -> None:
		self.steps += 1
		correction1 = 1 - _ADAM_BETA1**self.steps
		correction2 = 1 - _ADAM_BETA2**self.steps

		for p, g, m, v in zip(parameters, grads, self.first, self.second):
			m *= _ADAM_BETA1
			m += (1 - _ADAM_BETA1) * g
			v *= _ADAM_BETA2
			v += (1 - _ADAM_BETA2) * g * g
			p -= self.learning_rate * (m / correction1) / (numpy.sqrt(v / correction2) + _ADAM_EPSILON)


def _split_xy(data: LabeledVectors, name: str) -> Tuple[numpy.ndarray, numpy.ndarray]:
	if not len(data):
		raise ValueError(f"The {name} set is empty")

	vectors, labels = zip(*data)
	return feature_matrix(vectors), _targets(labels)


def train_mlp(
		train: LabeledVectors,
		validation: LabeledVectors,
		config: Optional[MlpConfig] = None,
		) -> MlpModel:
	"""
	Train the formalism classifier.

	The scaler is fitted on the training vectors only. Each epoch shuffles the training set with the
	seeded generator and takes one Adam step per mini-batch, with dropout after each hidden layer.
	Training stops when the monitored validation score has not improved for ``patience`` epochs,
	and the parameters of the best epoch are returned.

	:param train: ``(vector, holistic label)`` pairs.
	:param validation: ``(vector, holistic label)`` pairs.
	:param config:

	:raises TrainingDivergedError: if the loss becomes non-finite.
	"""

	config = config or MlpConfig()
	x_train_raw, y_train = _split_xy(train, "training")
	x_val_raw, y_val = _split_xy(validation, "validation")

	scaler = fit_scaler(x_train_raw)
	x_train = scaler.transform(x_train_raw)
	x_val = scaler.transform(x_val_raw)

	n_pos = int(y_train.sum())
	pos_weight = (len(y_train) - n_pos) / n_pos if n_pos else 1.0

	rng = numpy.random.default_rng(config.seed)
	weights, biases = _init_parameters(config, rng)
	parameters = [p for layer in zip(weights, biases) for p in layer]
	optimiser = _Adam(parameters, config.learning_rate)

	def evaluate(x: numpy.ndarray, y: numpy.ndarray) -> Tuple[float, float]:
		z = _forward(weights, biases, x)[0]
		loss = float(_loss_terms(z, y, config, pos_weight)[0].mean())
		predicted = (_sigmoid(z) >= THRESHOLD).astype(int)
		return loss, binary_macro_prf(list(y.astype(int)), list(predicted), labels=[0, 1])[2]

	history: List[EpochRecord] = []
	best_score = -math.inf
	best_parameters = [p.copy() for p in parameters]
	best_epoch = 0
	stale = 0

	for epoch in range(1, config.max_epochs + 1):
		order = rng.permutation(len(y_train))

		for start in range(0, len(order), config.batch_size):
			batch = order[start:start + config.batch_size]
			masks = [
					(rng.random((len(batch), size)) >= rate) / (1 - rate)
					for size, rate in zip(config.hidden_sizes, config.dropout_rates)
					]

			z, activations, pre_activations = _forward(weights, biases, x_train[batch], masks)
			loss, d_logits = _loss_terms(z, y_train[batch], config, pos_weight)

			batch_loss = float(loss.mean())
			if not math.isfinite(batch_loss):
				raise TrainingDivergedError(epoch, batch_loss)

			grad_w, grad_b = _backward(weights, activations, pre_activations, d_logits / len(batch), masks)
			optimiser.step(parameters, [g for layer in zip(grad_w, grad_b) for g in layer])

		train_loss = evaluate(x_train, y_train)[0]
		val_loss, val_f1 = evaluate(x_val, y_val)
		if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
			raise TrainingDivergedError(epoch, train_loss if not math.isfinite(train_loss) else val_loss)

		history.append(EpochRecord(epoch, train_loss, val_loss, val_f1))
		logger.debug("Epoch %d: train loss %.6f, validation loss %.6f, macro F1 %.4f", epoch, train_loss, val_loss, val_f1)

		score = -val_loss if config.monitor == "loss" else val_f1
		if score > best_score:
			best_score = score
			best_parameters = [p.copy() for p in parameters]
			best_epoch = epoch
			stale = 0
		else:
			stale += 1
			if stale >= config.patience:
				logger.info("Early stopping after epoch %d; keeping epoch %d", epoch, best_epoch)
				break

	logger.info(
			"Trained MLP for %d epochs (best %d, validation loss %.6f)",
			len(history),
			best_epoch,
			history[best_epoch - 1].val_loss,
			)

	return MlpModel(
			weights=tuple(best_parameters[0::2]),
			biases=tuple(best_parameters[1::2]),
			scaler=scaler,
			config=config,
			pos_weight=pos_weight,
			history=tuple(history),
			best_epoch=best_epoch,
			)


def predict(model: MlpModel, vector: FeatureVector) -> float:
	"""
	The probability that a document with features ``vector`` is non-formalistic.

	:param model:
	:param vector:
	"""

	return float(model.predict_proba([vector])[0])


def predict_label(model: MlpModel, vector: FeatureVector) -> HolisticLabel:
	"""
	Classify a document, non-formalistic when :func:`~.predict` is at least 0.5.

	:param model:
	:param vector:
	"""

	if predict(model, vector) >= THRESHOLD:
		return HolisticLabel.NON_FORMALISTIC
	return HolisticLabel.FORMALISTIC


def evaluate_mlp(model: MlpModel, vectors: Sequence[FeatureVector], labels: Sequence[HolisticLabel]) -> BinaryReport:
	"""
	Macro precision, recall and F1 of the model's holistic predictions.

	:param model:
	:param vectors:
	:param labels: The gold holistic labels.
	"""

	predicted = [
			HolisticLabel.NON_FORMALISTIC if p >= THRESHOLD else HolisticLabel.FORMALISTIC
			for p in model.predict_proba(vectors)
			]
	return holistic_report(labels, predicted)


def save_model(model: MlpModel, filename: PathLike) -> str:
	"""
	Save a model as a self-describing TOML record.

	:param model:
	:param filename:

	:returns: The TOML text written.
	"""

	config = asdict(model.config)

	data: Dict[str, Any] = {
			"topology": {
					"layer-sizes": list(model.config.layer_sizes),
					"hidden-activation": "relu",
					"output-activation": "sigmoid",
					"optimizer": "adam",
					"features": list(FEATURE_NAMES),
					},
			"config": {key.replace('_', '-'): value for key, value in config.items()},
			"training": {
					"best-epoch": model.best_epoch,
					"pos-weight": model.pos_weight,
					"epoch": [r.epoch for r in model.history],
					"train-loss": [r.train_loss for r in model.history],
					"val-loss": [r.val_loss for r in model.history],
					"val-macro-f1": [r.val_macro_f1 for r in model.history],
					},
			"scaler": model.scaler.to_record(),
			"parameters": {
					"weights": [encode_array(w) for w in model.weights],
					"biases": [encode_array(b) for b in model.biases],
					},
			}

	return dump_record(MODEL_KIND, data, filename)


def load_model(filename: PathLike) -> MlpModel:
	"""
	Load a model saved with :func:`~.save_model`.

	:param filename:

	:raises RecordError: if the file is not a model record of the current format version,
		or lacks one of its tables or keys.
	"""

	record = load_record(filename, MODEL_KIND)

	try:
		config = MlpConfig(**{key.replace('-', '_'): value for key, value in record["config"].items()})
		training = record["training"]
		history = tuple(
				EpochRecord(*row) for row in zip(
						training["epoch"],
						training["train-loss"],
						training["val-loss"],
						training["val-macro-f1"],
						)
				)

		return MlpModel(
				weights=tuple(decode_array(w) for w in record["parameters"]["weights"]),
				biases=tuple(decode_array(b) for b in record["parameters"]["biases"]),
				scaler=Scaler.from_record(record["scaler"]),
				config=config,
				pos_weight=training["pos-weight"],
				history=history,
				best_epoch=training["best-epoch"],
				)
	except (KeyError, TypeError, AttributeError) as e:
		raise RecordError(f"{PathPlus(filename).as_posix()}: malformed model record ({type(e).__name__}: {e})") from e
