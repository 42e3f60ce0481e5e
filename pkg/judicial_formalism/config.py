#!/usr/bin/env python3
#
#  config.py
"""
Parsers for the TOML configuration of the pipeline and the MLP trainer.

A configuration file holds a ``[pipeline]`` table, an optional ``[mlp]`` table, or both:

.. code-block:: TOML

	[pipeline]
	filtering = true
	model = "models/mlp.toml"
	batch-size = 64

	[pipeline.stage1]
	kind = "external"
	command = ["python", "presence_adapter.py"]

	[pipeline.stage2]
	kind = "builtin_trigger"
	lexicon = "en"

	[mlp]
	loss = "asymmetric"
	seed = 7
"""
#
#  Copyright © 2025 The judicial_formalism developers
#
#  Distributed under the MIT License. See LICENSE for details.
#

# stdlib
import math
import os
import shlex
from abc import ABC, abstractmethod
from typing import Any, Callable, ClassVar, Dict, Iterable, List, Mapping, Optional, Tuple, Type, Union

# 3rd party
import toml
from domdf_python_tools.paths import PathPlus
from domdf_python_tools.typing import PathLike

__all__ = [
		"AbstractConfigParser",
		"BadConfigError",
		"construct_path",
		"load_config",
		"StageBackendParser",
		"PipelineConfigParser",
		"MlpConfigParser",
		"BACKEND_KINDS",
		"ENV_PREFIX",
		]

#: The stage backend kinds understood by :mod:`judicial_formalism.pipeline`.
BACKEND_KINDS: Tuple[str, ...] = (
		"builtin_majority",
		"builtin_random",
		"builtin_trigger",
		"external",
		"replay",
		"gold",
		)

#: Prefix of the environment variables which override external backend commands and endpoints.
ENV_PREFIX = "JUDICIAL_FORMALISM"


class BadConfigError(ValueError):
	"""
	Indicates an error in a configuration file or in configuration values passed on the command line.

	:param documentation: A pointer to the documentation of the problematic option.
		The intention is for code catching this exception to display it to the user.
	"""

	#: A pointer to the documentation of the problematic option.
	documentation: Optional[str]

	def __init__(self, *args, documentation: Optional[str] = None) -> None:
		super().__init__(*args)
		self.documentation = documentation


def construct_path(path: Iterable[str]) -> str:
	"""
	Construct the dotted TOML path to a key, quoting elements which are not bare keys.

	:param path: The path elements.
	"""

	return '.'.join([toml.dumps({elem: 0})[:-5] for elem in path])


def load_config(filename: PathLike) -> Dict[str, Any]:
	"""
	Read a TOML configuration file.

	:param filename:

	:raises BadConfigError: if the file is not valid TOML.
	"""

	filename = PathPlus(filename)

	try:
		return toml.loads(filename.read_text())
	except toml.TomlDecodeError as e:
		raise BadConfigError(f"{filename.as_posix()}: {e}") from e


class AbstractConfigParser(ABC):
	"""
	Abstract base class for parsers of a single configuration table.

	Subclasses list the keys they understand in :attr:`~.keys` and may provide a
	``parse_<key>`` method (dashes replaced by underscores) to validate and convert each value.
	"""

	#: The dotted path of the table being parsed, used in error messages.
	table: ClassVar[Tuple[str, ...]] = ()

	#: A mapping of key names to default values.
	defaults: ClassVar[Dict[str, Any]]

	#: A mapping of key names to default value factories. Factories take precedence over defaults.
	factories: ClassVar[Dict[str, Callable[..., Any]]]

	def __init_subclass__(cls, **kwargs) -> None:
		if not kwargs.get("inherit_defaults", False):
			if "defaults" not in cls.__dict__:
				cls.defaults = {}

			if "factories" not in cls.__dict__:
				cls.factories = {}

	def path_to(self, *elements: str) -> List[str]:
		"""
		Returns the path to a key within :attr:`~.table`.

		:param elements:
		"""

		return [*self.table, *elements]

	@staticmethod
	def assert_type(
			obj: Any,
			expected_type: Union[Type, Tuple[Type, ...]],
			path: Iterable[str],
			) -> None:
		"""
		Assert that ``obj`` is of type ``expected_type``, otherwise raise an error with a helpful message.

		Booleans are never accepted where a number is expected.

		:param obj: The object to check the type of.
		:param expected_type: The expected type.
		:param path: The elements of the path to ``obj`` in the TOML mapping.
		"""

		accepts_bool = expected_type is bool or (isinstance(expected_type, tuple) and bool in expected_type)

		if not isinstance(obj, expected_type) or (isinstance(obj, bool) and not accepts_bool):
			name = construct_path(path)
			raise TypeError(f"Invalid type for {name!r}: expected {expected_type!r}, got {type(obj)!r}")

	@staticmethod
	def assert_indexed_type(
			obj: Any,
			expected_type: Union[Type, Tuple[Type, ...]],
			path: Iterable[str],
			idx: int = 0,
			) -> None:
		"""
		Assert that the array element ``obj`` is of type ``expected_type``.

		:param obj: The object to check the type of.
		:param expected_type: The expected type.
		:param path: The elements of the path to the array in the TOML mapping.
		:param idx: The index of ``obj`` in the array.
		"""

		if not isinstance(obj, expected_type) or isinstance(obj, bool) and expected_type is not bool:
			name = construct_path(path) + f"[{idx}]"
			raise TypeError(f"Invalid type for {name!r}: expected {expected_type!r}, got {type(obj)!r}")

	def assert_choice(self, obj: Any, choices: Iterable[str], key: str) -> str:
		"""
		Assert that ``obj`` is one of the strings in ``choices``.

		:param obj:
		:param choices:
		:param key: The key ``obj`` was read from.
		"""

		self.assert_type(obj, str, self.path_to(key))
		choices = tuple(choices)

		if obj not in choices:
			name = construct_path(self.path_to(key))
			raise BadConfigError(f"Invalid value for {name!r}: expected one of {choices!r}, got {obj!r}")

		return obj

	def assert_positive(self, obj: Any, expected_type: Union[Type, Tuple[Type, ...]], key: str) -> Any:
		"""
		Assert that ``obj`` is a finite number strictly greater than zero.

		:param obj:
		:param expected_type: :class:`int` or ``(int, float)``.
		:param key: The key ``obj`` was read from.
		"""

		self.assert_type(obj, expected_type, self.path_to(key))

		if not math.isfinite(obj) or obj <= 0:
			name = construct_path(self.path_to(key))
			raise BadConfigError(f"Invalid value for {name!r}: expected a positive number, got {obj!r}")

		return obj

	@property
	@abstractmethod
	def keys(self) -> List[str]:  # pragma: no cover
		"""
		The keys to parse from the table.
		"""

		raise NotImplementedError

	def parse(
			self,
			config: Mapping[str, Any],
			set_defaults: bool = False,
			) -> Dict[str, Any]:
		r"""
		Parse the configuration table.

		For each key in :attr:`~.keys` present in ``config``, the method :file:`parse_{<key>}`
		is called with the whole table if it exists; otherwise the value is taken unchanged.
		Keys not in :attr:`~.keys` raise :exc:`~.BadConfigError`, so typos are caught early.

		:param config:
		:param set_defaults: If :py:obj:`True`, the values in :attr:`~.defaults`
			and :attr:`~.factories` are set for keys absent from ``config``.
		"""

		unknown = sorted(set(config) - set(self.keys))
		if unknown:
			name = construct_path(self.path_to(unknown[0]))
			raise BadConfigError(f"Unknown configuration key {name!r}")

		parsed_config = {}

		for key in self.keys:
			if key not in config:
				continue

			method_name = f"parse_{key.replace('-', '_')}"
			if hasattr(self, method_name):
				parsed_config[key] = getattr(self, method_name)(config)
			else:
				parsed_config[key] = config[key]

		if set_defaults:
			for key, value in self.defaults.items():
				parsed_config.setdefault(key, value)

			for key, factory in self.factories.items():
				parsed_config.setdefault(key, factory())

		return parsed_config


class StageBackendParser(AbstractConfigParser):
	"""
	Parser for a ``[pipeline.stage1]`` or ``[pipeline.stage2]`` table.

	:param stage: ``'stage1'`` or ``'stage2'``.
	"""

	defaults = {"threshold": 0.5, "mode": "uniform", "seed": 0}

	def __init__(self, stage: str) -> None:
		self.stage = stage
		self.table = ("pipeline", stage)  # type: ignore[misc]

	@property
	def keys(self) -> List[str]:
		"""
		The keys to parse from the table.
		"""

		return ["kind", "threshold", "command", "endpoint", "timeout", "seed", "mode", "lexicon", "replay", "gold"]

	def parse_kind(self, config: Mapping[str, Any]) -> str:  # noqa: D102
		return self.assert_choice(config["kind"], BACKEND_KINDS, "kind")

	def parse_threshold(self, config: Mapping[str, Any]) -> float:  # noqa: D102
		threshold = config["threshold"]
		self.assert_type(threshold, (int, float), self.path_to("threshold"))

		if not 0 < threshold < 1:
			name = construct_path(self.path_to("threshold"))
			raise BadConfigError(f"Invalid value for {name!r}: the threshold must lie strictly between 0 and 1")

		return float(threshold)

	def parse_command(self, config: Mapping[str, Any]) -> Tuple[str, ...]:  # noqa: D102
		command = config["command"]

		if isinstance(command, str):
			return tuple(shlex.split(command))

		self.assert_type(command, list, self.path_to("command"))
		for idx, arg in enumerate(command):
			self.assert_indexed_type(arg, str, self.path_to("command"), idx=idx)

		if not command:
			raise BadConfigError(f"{construct_path(self.path_to('command'))!r} may not be empty")

		return tuple(command)

	def parse_endpoint(self, config: Mapping[str, Any]) -> str:  # noqa: D102
		endpoint = config["endpoint"]
		self.assert_type(endpoint, str, self.path_to("endpoint"))

		host, sep, port = endpoint.rpartition(':')
		if not sep or not host or not port.isdigit():
			name = construct_path(self.path_to("endpoint"))
			raise BadConfigError(f"Invalid value for {name!r}: expected 'host:port', got {endpoint!r}")

		return endpoint

	def parse_timeout(self, config: Mapping[str, Any]) -> float:  # noqa: D102
		return float(self.assert_positive(config["timeout"], (int, float), "timeout"))

	def parse_seed(self, config: Mapping[str, Any]) -> int:  # noqa: D102
		self.assert_type(config["seed"], int, self.path_to("seed"))
		return config["seed"]

	def parse_mode(self, config: Mapping[str, Any]) -> str:  # noqa: D102
		return self.assert_choice(config["mode"], ("uniform", "marginal"), "mode")

	def parse_lexicon(self, config: Mapping[str, Any]) -> str:  # noqa: D102
		self.assert_type(config["lexicon"], str, self.path_to("lexicon"))
		return config["lexicon"]

	def parse_replay(self, config: Mapping[str, Any]) -> str:  # noqa: D102
		self.assert_type(config["replay"], str, self.path_to("replay"))
		return config["replay"]

	def parse_gold(self, config: Mapping[str, Any]) -> str:  # noqa: D102
		self.assert_type(config["gold"], str, self.path_to("gold"))
		return config["gold"]

	def parse(self, config: Mapping[str, Any], set_defaults: bool = False) -> Dict[str, Any]:
		"""
		Parse the backend table, applying environment overrides and checking the options each kind requires.

		The environment variables ``JUDICIAL_FORMALISM_<STAGE>_COMMAND`` and
		``JUDICIAL_FORMALISM_<STAGE>_ENDPOINT`` override ``command`` and ``endpoint``
		for ``external`` backends.

		:param config:
		:param set_defaults:
		"""

		self.assert_type(config, dict, self.table)

		if "kind" not in config:
			raise BadConfigError(f"{construct_path(self.path_to('kind'))!r} is required")

		parsed = super().parse(config, set_defaults=set_defaults)
		kind = parsed["kind"]

		if kind == "external":
			env_command = os.environ.get(f"{ENV_PREFIX}_{self.stage.upper()}_COMMAND")
			env_endpoint = os.environ.get(f"{ENV_PREFIX}_{self.stage.upper()}_ENDPOINT")

			if env_command:
				parsed["command"] = tuple(shlex.split(env_command))
				parsed.pop("endpoint", None)
			elif env_endpoint:
				parsed["endpoint"] = self.parse_endpoint({"endpoint": env_endpoint})
				parsed.pop("command", None)

			if "command" not in parsed and "endpoint" not in parsed:
				raise BadConfigError(
						f"External backend {construct_path(self.table)!r} needs a 'command' or an 'endpoint'",
						)

		required = {"builtin_trigger": "lexicon", "replay": "replay", "gold": "gold"}
		if kind in required and required[kind] not in parsed:
			name = construct_path(self.path_to(required[kind]))
			raise BadConfigError(f"{name!r} is required for backends of kind {kind!r}")

		return parsed


class PipelineConfigParser(AbstractConfigParser):
	"""
	Parser for the ``[pipeline]`` table.
	"""

	table = ("pipeline", )
	defaults = {"filtering": True, "batch-size": 32, "timeout": 120.0, "length-mode": "document"}

	@property
	def keys(self) -> List[str]:
		"""
		The keys to parse from the table.
		"""

		return ["filtering", "batch-size", "timeout", "length-mode", "model", "train", "stage1", "stage2"]

	def parse_filtering(self, config: Mapping[str, Any]) -> bool:  # noqa: D102
		self.assert_type(config["filtering"], bool, self.path_to("filtering"))
		return config["filtering"]

	def parse_batch_size(self, config: Mapping[str, Any]) -> int:  # noqa: D102
		return self.assert_positive(config["batch-size"], int, "batch-size")

	def parse_timeout(self, config: Mapping[str, Any]) -> float:  # noqa: D102
		return float(self.assert_positive(config["timeout"], (int, float), "timeout"))

	def parse_length_mode(self, config: Mapping[str, Any]) -> str:  # noqa: D102
		return self.assert_choice(config["length-mode"], ("document", "retained"), "length-mode")

	def parse_model(self, config: Mapping[str, Any]) -> str:  # noqa: D102
		self.assert_type(config["model"], str, self.path_to("model"))
		return config["model"]

	def parse_train(self, config: Mapping[str, Any]) -> str:  # noqa: D102
		self.assert_type(config["train"], str, self.path_to("train"))
		return config["train"]

	def parse_stage1(self, config: Mapping[str, Any]) -> Dict[str, Any]:  # noqa: D102
		return StageBackendParser("stage1").parse(config["stage1"], set_defaults=True)

	def parse_stage2(self, config: Mapping[str, Any]) -> Dict[str, Any]:  # noqa: D102
		return StageBackendParser("stage2").parse(config["stage2"], set_defaults=True)

	def parse(self, config: Mapping[str, Any], set_defaults: bool = True) -> Dict[str, Any]:
		"""
		Parse the ``[pipeline]`` table.

		``model`` and ``stage2`` are always required; ``stage1`` only when filtering is enabled.

		:param config:
		:param set_defaults:
		"""

		self.assert_type(config, dict, self.table)
		parsed = super().parse(config, set_defaults=set_defaults)

		for key in ("model", "stage2"):
			if key not in parsed:
				raise BadConfigError(f"{construct_path(self.path_to(key))!r} is required")

		if parsed.get("filtering", True) and "stage1" not in parsed:
			raise BadConfigError(
					f"{construct_path(self.path_to('stage1'))!r} is required when filtering is enabled",
					)

		return parsed


class MlpConfigParser(AbstractConfigParser):
	"""
	Parser for the ``[mlp]`` table, which overrides fields of :class:`judicial_formalism.mlp.MlpConfig`.
	"""

	table = ("mlp", )

	@property
	def keys(self) -> List[str]:
		"""
		The keys to parse from the table.
		"""

		return [
				"hidden-sizes",
				"dropout-rates",
				"learning-rate",
				"batch-size",
				"patience",
				"max-epochs",
				"seed",
				"loss",
				"monitor",
				"gamma-pos",
				"gamma-neg",
				"margin",
				]

	def _parse_sequence(self, config: Mapping[str, Any], key: str, item_type: Type) -> Tuple[Any, ...]:
		value = config[key]
		self.assert_type(value, list, self.path_to(key))

		for idx, item in enumerate(value):
			self.assert_indexed_type(item, item_type, self.path_to(key), idx=idx)

		return tuple(value)

	def parse_hidden_sizes(self, config: Mapping[str, Any]) -> Tuple[int, ...]:  # noqa: D102
		return self._parse_sequence(config, "hidden-sizes", int)

	def parse_dropout_rates(self, config: Mapping[str, Any]) -> Tuple[float, ...]:  # noqa: D102
		return tuple(float(rate) for rate in self._parse_sequence(config, "dropout-rates", (int, float)))

	def parse_learning_rate(self, config: Mapping[str, Any]) -> float:  # noqa: D102
		return float(self.assert_positive(config["learning-rate"], (int, float), "learning-rate"))

	def parse_batch_size(self, config: Mapping[str, Any]) -> int:  # noqa: D102
		return self.assert_positive(config["batch-size"], int, "batch-size")

	def parse_patience(self, config: Mapping[str, Any]) -> int:  # noqa: D102
		return self.assert_positive(config["patience"], int, "patience")

	def parse_max_epochs(self, config: Mapping[str, Any]) -> int:  # noqa: D102
		return self.assert_positive(config["max-epochs"], int, "max-epochs")

	def parse_seed(self, config: Mapping[str, Any]) -> int:  # noqa: D102
		self.assert_type(config["seed"], int, self.path_to("seed"))
		return config["seed"]

	def parse_loss(self, config: Mapping[str, Any]) -> str:  # noqa: D102
		return self.assert_choice(config["loss"], ("bce", "weighted_bce", "asymmetric"), "loss")

	def parse_monitor(self, config: Mapping[str, Any]) -> str:  # noqa: D102
		return self.assert_choice(config["monitor"], ("loss", "macro_f1"), "monitor")

	def parse_gamma_pos(self, config: Mapping[str, Any]) -> float:  # noqa: D102
		self.assert_type(config["gamma-pos"], (int, float), self.path_to("gamma-pos"))
		return float(config["gamma-pos"])

	def parse_gamma_neg(self, config: Mapping[str, Any]) -> float:  # noqa: D102
		self.assert_type(config["gamma-neg"], (int, float), self.path_to("gamma-neg"))
		return float(config["gamma-neg"])

	def parse_margin(self, config: Mapping[str, Any]) -> float:  # noqa: D102
		self.assert_type(config["margin"], (int, float), self.path_to("margin"))
		return float(config["margin"])

	def parse(self, config: Mapping[str, Any], set_defaults: bool = False) -> Dict[str, Any]:
		"""
		Parse the ``[mlp]`` table, returning keyword arguments for :class:`~judicial_formalism.mlp.MlpConfig`.

		:param config:
		:param set_defaults:
		"""

		self.assert_type(config, dict, self.table)
		parsed = super().parse(config, set_defaults=set_defaults)
		return {key.replace('-', '_'): value for key, value in parsed.items()}
