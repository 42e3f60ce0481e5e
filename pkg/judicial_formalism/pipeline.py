#!/usr/bin/env python3
#
#  pipeline.py
"""
The three-stage holistic formalism pipeline.

1. Stage 1 (optional filtering) decides which paragraphs contain arguments.
2. Stage 2 assigns argument types to the retained paragraphs.
3. Stage 3 extracts document features from the predicted types and classifies the
   document with the MLP.

Stages 1 and 2 are served by backends which all speak the same line-delimited JSON protocol.
A request is ``{"id": ..., "task": "presence" | "types", "text": ...}``; the answer is
``{"id": ..., "presence_prob": p}`` or ``{"id": ..., "type_probs": {"LIN": p, ...}}`` with
all eight codes. External backends are subprocesses reading requests on standard input
and writing answers on standard output, or TCP servers at ``host:port``. Answers may come
in any order; they are matched to requests by id.
"""
#
#  Copyright © 2025 The judicial_formalism developers
#
#  Distributed under the MIT License. See LICENSE for details.
#

# stdlib
import json
import logging
import math
import queue
import socket
import subprocess
import threading
import time
from contextlib import ExitStack
from dataclasses import dataclass, field
from typing import (
		IO,
		Any,
		Callable,
		Dict,
		FrozenSet,
		Iterable,
		List,
		Mapping,
		NamedTuple,
		Optional,
		Protocol,
		Sequence,
		Tuple,
		Union
		)

# 3rd party
from domdf_python_tools.paths import PathPlus
from domdf_python_tools.typing import PathLike

# this package
from judicial_formalism import FORMAT_VERSION
from judicial_formalism.baselines import BUILTIN_LEXICONS, load_lexicon, presence_baseline, types_baseline
from judicial_formalism.config import BadConfigError, PipelineConfigParser, load_config
from judicial_formalism.corpus import (
		ARGUMENT_TYPES,
		ArgumentType,
		Corpus,
		CorpusSchemaError,
		Document,
		HolisticLabel,
		ParagraphInstance,
		load_corpus,
		paragraph_key,
		split_paragraph_key
		)
from judicial_formalism.features import FeatureVector, extract_features
from judicial_formalism.metrics import BinaryReport, EvaluationReport, holistic_report, presence_report, types_report
from judicial_formalism.mlp import THRESHOLD, MlpModel, load_model
from judicial_formalism.records import numbered_lines

__all__ = [
		"TASKS",
		"Request",
		"Backend",
		"BackendProtocolError",
		"BackendTimeoutError",
		"StageBackend",
		"PipelineConfig",
		"PipelineResult",
		"PipelineEvaluation",
		"BuiltinBackend",
		"SubprocessBackend",
		"SocketBackend",
		"ReplayBackend",
		"GoldBackend",
		"open_backend",
		"external_classify_batch",
		"validate_responses",
		"run_pipeline",
		"save_results",
		"load_results",
		"evaluate_pipeline",
		"request_id",
		]

logger = logging.getLogger(__name__)

#: The request tasks of the wire protocol.
TASKS: Tuple[str, ...] = ("presence", "types")

_RESULTS_KIND = "pipeline-results"


class BackendProtocolError(RuntimeError):
	"""
	Raised when a stage backend violates the wire protocol.

	:param message:
	:param payload: The offending line or record, if any.
	"""

	def __init__(self, message: str, payload: Any = None) -> None:
		if payload is not None:
			message = f"{message}: {payload!r}"
		super().__init__(message)
		self.payload = payload


class BackendTimeoutError(BackendProtocolError):
	"""
	Raised when a backend does not answer a batch in time.
	"""


class Request(NamedTuple):
	"""
	A classification request sent to a stage backend.
	"""

	id: str
	task: str
	text: str

	def to_json(self) -> str:  # noqa: D102
		return json.dumps({"id": self.id, "task": self.task, "text": self.text}, ensure_ascii=False)


def request_id(doc_id: str, para_id: str) -> str:
	"""
	Returns the request id of a paragraph, ``<doc_id>#<para_id>`` (see :func:`~.paragraph_key`).

	:param doc_id:
	:param para_id:
	"""

	return paragraph_key(doc_id, para_id)


class Backend(Protocol):
	"""
	A stage backend: anything that answers a batch of requests.
	"""

	def classify_batch(self, requests: Sequence[Request]) -> Dict[str, Dict[str, Any]]:
		"""
		Answer every request, returning the validated response records keyed by request id.

		:param requests:
		"""

	def close(self) -> None:
		"""
		Release the backend's resources.
		"""


def _is_probability(value: Any) -> bool:
	return (
			isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
			and 0 <= value <= 1
			)


def validate_responses(requests: Sequence[Request], lines: Iterable[str]) -> Dict[str, Dict[str, Any]]:
	"""
	Parse and check the answers to a batch of requests.

	:param requests:
	:param lines: One JSON record per answer, in any order.

	:raises BackendProtocolError: on a malformed record, an unknown, duplicate or missing id,
		or a probability outside [0, 1].
	"""

	tasks = {r.id: r.task for r in requests}
	responses: Dict[str, Dict[str, Any]] = {}

	for line in lines:
		try:
			record = json.loads(line)
		except (TypeError, ValueError):
			raise BackendProtocolError("Malformed response line", line) from None

		if not isinstance(record, dict) or not isinstance(record.get("id"), str):
			raise BackendProtocolError("Response without a string 'id'", line)

		rid = record["id"]
		if rid not in tasks:
			raise BackendProtocolError("Response to an unknown request id", line)
		if rid in responses:
			raise BackendProtocolError("Duplicate response id", line)

		if tasks[rid] == "presence":
			if not _is_probability(record.get("presence_prob")):
				raise BackendProtocolError("'presence_prob' must be a number in [0, 1]", line)
		else:
			probs = record.get("type_probs")
			if not isinstance(probs, dict) or set(probs) != {t.value for t in ARGUMENT_TYPES}:
				raise BackendProtocolError("'type_probs' must give a probability for each of the eight codes", line)
			if not all(_is_probability(p) for p in probs.values()):
				raise BackendProtocolError("'type_probs' values must be numbers in [0, 1]", line)

		responses[rid] = record

	missing = [r.id for r in requests if r.id not in responses]
	if missing:
		raise BackendProtocolError(f"No response for {len(missing)} request(s)", missing[0])

	return responses


def _presence_response(rid: str, present: bool) -> Dict[str, Any]:
	return {"id": rid, "presence_prob": 1.0 if present else 0.0}


def _types_response(rid: str, types: Iterable[ArgumentType]) -> Dict[str, Any]:
	types = set(types)
	return {"id": rid, "type_probs": {t.value: 1.0 if t in types else 0.0 for t in ARGUMENT_TYPES}}


class BuiltinBackend:
	"""
	Serves a baseline predictor through the wire protocol.

	:param presence: Predicts whether a paragraph is argumentative.
	:param types: Predicts the argument types of a paragraph.
	"""

	def __init__(
			self,
			presence: Optional[Callable[[ParagraphInstance], bool]] = None,
			types: Optional[Callable[[ParagraphInstance], FrozenSet[ArgumentType]]] = None,
			) -> None:
		self.presence = presence
		self.types = types

	def classify_batch(self, requests: Sequence[Request]) -> Dict[str, Dict[str, Any]]:  # noqa: D102
		lines = []

		for request in requests:
			doc_id, para_id = split_paragraph_key(request.id)
			instance = ParagraphInstance(doc_id, para_id, request.text, frozenset())

			if request.task == "presence" and self.presence is not None:
				lines.append(json.dumps(_presence_response(request.id, self.presence(instance))))
			elif request.task == "types" and self.types is not None:
				lines.append(json.dumps(_types_response(request.id, self.types(instance))))
			else:
				raise BackendProtocolError(f"Backend cannot answer {request.task!r} requests", request.id)

		return validate_responses(requests, lines)

	def close(self) -> None:  # noqa: D102
		pass


class GoldBackend:
	"""
	Answers with the gold annotations of a corpus; for testing the pipeline plumbing.

	:param corpus:
	"""

	def __init__(self, corpus: Corpus) -> None:
		self.annotations = {
				request_id(d.doc_id, p.para_id): p.argument_types
				for d in corpus
				for p in d.paragraphs
				}

	def classify_batch(self, requests: Sequence[Request]) -> Dict[str, Dict[str, Any]]:  # noqa: D102
		lines = []

		for request in requests:
			if request.id not in self.annotations:
				raise BackendProtocolError("Gold corpus has no paragraph", request.id)

			types = self.annotations[request.id]
			if request.task == "presence":
				lines.append(json.dumps(_presence_response(request.id, bool(types))))
			else:
				lines.append(json.dumps(_types_response(request.id, types)))

		return validate_responses(requests, lines)

	def close(self) -> None:  # noqa: D102
		pass


class ReplayBackend:
	"""
	Answers from responses recorded during an earlier run (see :func:`~.run_pipeline`).

	:param filename: The recording, one ``{"task": ..., <response>}`` record per line.
	"""

	def __init__(self, filename: PathLike) -> None:
		self.filename = PathPlus(filename)
		self.recorded: Dict[Tuple[str, str], str] = {}

		for lineno, line in numbered_lines(self.filename):
			try:
				record = json.loads(line)
				key = (record.pop("task"), record["id"])
			except (ValueError, KeyError, TypeError, AttributeError):
				raise BackendProtocolError(f"{self.filename.name}:{lineno}: malformed recorded response", line) from None

			self.recorded[key] = json.dumps(record)

	def classify_batch(self, requests: Sequence[Request]) -> Dict[str, Dict[str, Any]]:  # noqa: D102
		lines = []

		for request in requests:
			key = (request.task, request.id)
			if key not in self.recorded:
				raise BackendProtocolError(f"No recorded {request.task!r} response", request.id)
			lines.append(self.recorded[key])

		return validate_responses(requests, lines)

	def close(self) -> None:  # noqa: D102
		pass


class _StreamBackend:
	"""
	Base class for backends which exchange protocol lines over a pair of text streams.

	A reader thread moves answer lines into a queue, so a batch can time out.
	"""

	def __init__(self, timeout: float = 120.0) -> None:
		self.timeout = timeout
		self._lines: "queue.Queue[Optional[str]]" = queue.Queue()
		self._lock = threading.Lock()
		self._reader: Optional[threading.Thread] = None

	def _start_reader(self, stream: IO[str]) -> None:

		def read() -> None:
			try:
				for line in stream:
					self._lines.put(line)
			except (OSError, ValueError):
				pass
			self._lines.put(None)

		self._reader = threading.Thread(target=read, name=f"{type(self).__name__}-reader", daemon=True)
		self._reader.start()

	def _write(self, text: str) -> None:  # pragma: no cover
		raise NotImplementedError

	def classify_batch(self, requests: Sequence[Request]) -> Dict[str, Dict[str, Any]]:
		"""
		Send a batch of requests and wait for one answer per request.

		:param requests:

		:raises BackendTimeoutError: if the answers do not arrive within :attr:`~.timeout` seconds.
		"""

		if not requests:
			return {}

		with self._lock:
			try:
				self._write(''.join(f"{r.to_json()}\n" for r in requests))
			except OSError as e:
				raise BackendProtocolError(f"Cannot send requests to the backend ({e})") from e

			deadline = time.monotonic() + self.timeout
			lines = []

			while len(lines) < len(requests):
				remaining = deadline - time.monotonic()
				try:
					if remaining <= 0:
						raise queue.Empty
					line = self._lines.get(timeout=remaining)
				except queue.Empty:
					raise BackendTimeoutError(
							f"Backend answered {len(lines)} of {len(requests)} requests within {self.timeout} s",
							) from None

				if line is None:
					raise BackendProtocolError(
							f"Backend closed its output after {len(lines)} of {len(requests)} answers",
							)

				if line.strip():
					lines.append(line)

			logger.debug("Backend answered a batch of %d requests", len(requests))

		return validate_responses(requests, lines)


class SubprocessBackend(_StreamBackend):
	"""
	An external backend process, started once and fed batches on its standard input.

	:param command: The command line of the backend process.
	:param timeout: Seconds to wait for the answers to one batch.
	"""

	def __init__(self, command: Sequence[str], timeout: float = 120.0) -> None:
		super().__init__(timeout)
		self.command = tuple(command)

		try:
			self.process = subprocess.Popen(
					self.command,
					stdin=subprocess.PIPE,
					stdout=subprocess.PIPE,
					encoding="UTF-8",
					bufsize=1,
					)
		except OSError as e:
			raise BackendProtocolError(f"Cannot start backend {' '.join(self.command)!r} ({e})") from e

		assert self.process.stdout is not None
		self._start_reader(self.process.stdout)
		logger.info("Started backend process %r (pid %d)", ' '.join(self.command), self.process.pid)

	def _write(self, text: str) -> None:
		assert self.process.stdin is not None
		self.process.stdin.write(text)
		self.process.stdin.flush()

	def close(self) -> None:  # noqa: D102
		if self.process.stdin is not None and not self.process.stdin.closed:
			try:
				self.process.stdin.close()
			except OSError:
				pass

		try:
			self.process.wait(timeout=5)
		except subprocess.TimeoutExpired:
			self.process.kill()
			self.process.wait()

		if self._reader is not None:
			self._reader.join(timeout=5)
		if self.process.stdout is not None:
			self.process.stdout.close()


class SocketBackend(_StreamBackend):
	"""
	An external backend listening on a TCP endpoint.

	:param endpoint: ``host:port``.
	:param timeout: Seconds to wait for the connection and for the answers to one batch.
	"""

	def __init__(self, endpoint: str, timeout: float = 120.0) -> None:
		super().__init__(timeout)
		host, _, port = endpoint.rpartition(':')

		try:
			self.socket = socket.create_connection((host, int(port)), timeout=timeout)
		except OSError as e:
			raise BackendProtocolError(f"Cannot connect to backend at {endpoint} ({e})") from e

		self.socket.settimeout(None)
		self.stream = self.socket.makefile("rw", encoding="UTF-8", newline='\n')
		self._start_reader(self.stream)
		logger.info("Connected to backend at %s", endpoint)

	def _write(self, text: str) -> None:
		self.stream.write(text)
		self.stream.flush()

	def close(self) -> None:  # noqa: D102
		try:
			self.socket.shutdown(socket.SHUT_RDWR)
		except OSError:
			pass
		self.stream.close()
		self.socket.close()


class _RecordingBackend:

	def __init__(self, inner: Backend, task: str, sink: List[Dict[str, Any]]) -> None:
		self.inner = inner
		self.task = task
		self.sink = sink

	def classify_batch(self, requests: Sequence[Request]) -> Dict[str, Dict[str, Any]]:
		responses = self.inner.classify_batch(requests)
		self.sink.extend({"task": self.task, **responses[r.id]} for r in requests)
		return responses

	def close(self) -> None:
		self.inner.close()


@dataclass(frozen=True)
class StageBackend:
	"""
	The declarative description of a stage 1 or stage 2 backend.
	"""

	#: One of :data:`judicial_formalism.config.BACKEND_KINDS`.
	kind: str

	#: Probabilities at or above the threshold count as positive decisions.
	threshold: float = 0.5

	command: Optional[Tuple[str, ...]] = None
	endpoint: Optional[str] = None

	#: Per-backend batch timeout; the pipeline's timeout applies when unset.
	timeout: Optional[float] = None

	#: Seed and distribution of the ``builtin_random`` backend.
	seed: int = 0
	mode: str = "uniform"

	#: A built-in lexicon name or lexicon path for ``builtin_trigger``.
	lexicon: Optional[str] = None

	#: A recording for ``replay``.
	replay: Optional[str] = None

	#: A gold corpus for ``gold``.
	gold: Optional[str] = None

	def __post_init__(self) -> None:
		if not 0 < self.threshold < 1:
			raise BadConfigError(f"The decision threshold must lie strictly between 0 and 1, got {self.threshold}")
		if self.command is not None:
			object.__setattr__(self, "command", tuple(self.command))

	@classmethod
	def from_config(cls, config: Mapping[str, Any], base: Optional[PathPlus] = None) -> "StageBackend":
		"""
		Construct a :class:`~.StageBackend` from a parsed ``[pipeline.stageN]`` table.

		:param config:
		:param base: The directory relative paths are resolved against.
		"""

		def resolve(value: Optional[str]) -> Optional[str]:
			if value is None or base is None or value in BUILTIN_LEXICONS:
				return value
			path = PathPlus(value)
			return (path if path.is_absolute() else base / path).as_posix()

		return cls(
				kind=config["kind"],
				threshold=config.get("threshold", 0.5),
				command=config.get("command"),
				endpoint=config.get("endpoint"),
				timeout=config.get("timeout"),
				seed=config.get("seed", 0),
				mode=config.get("mode", "uniform"),
				lexicon=resolve(config.get("lexicon")),
				replay=resolve(config.get("replay")),
				gold=resolve(config.get("gold")),
				)


@dataclass(frozen=True)
class PipelineConfig:
	"""
	The three stages, the filtering mode and the external call settings.
	"""

	stage2: StageBackend

	#: The stage 3 model, or the path to a saved model.
	model: Union[MlpModel, str]

	#: Stage 1 is ignored when filtering is disabled.
	filtering_enabled: bool = True
	stage1: Optional[StageBackend] = None

	#: The number of requests sent to a backend at once.
	batch_size: int = 32

	#: Seconds to wait for the answers to one batch.
	timeout: float = 120.0

	#: ``'document'`` counts every paragraph towards the document length feature,
	#: ``'retained'`` only the paragraphs kept by stage 1.
	length_mode: str = "document"

	#: Training corpus for the ``builtin_majority`` and ``builtin_random`` backends.
	train: Optional[str] = None

	def __post_init__(self) -> None:
		if self.filtering_enabled and self.stage1 is None:
			raise BadConfigError("Stage 1 must be configured when filtering is enabled")
		if self.batch_size <= 0 or self.timeout <= 0:
			raise BadConfigError("The batch size and timeout must be positive")
		if self.length_mode not in ("document", "retained"):
			raise BadConfigError(f"Unknown length mode {self.length_mode!r}")

	@classmethod
	def from_file(cls, filename: PathLike) -> "PipelineConfig":
		"""
		Read the ``[pipeline]`` table of a TOML configuration file.

		Relative paths are resolved against the file's directory.

		:param filename:
		"""

		filename = PathPlus(filename)
		config = load_config(filename)

		if "pipeline" not in config:
			raise BadConfigError(f"{filename.as_posix()}: no [pipeline] table")

		parsed = PipelineConfigParser().parse(config["pipeline"])
		base = filename.parent

		def resolve(value: Optional[str]) -> Optional[str]:
			if value is None:
				return None
			path = PathPlus(value)
			return (path if path.is_absolute() else base / path).as_posix()

		return cls(
				stage2=StageBackend.from_config(parsed["stage2"], base),
				model=resolve(parsed["model"]),  # type: ignore[arg-type]
				filtering_enabled=parsed["filtering"],
				stage1=StageBackend.from_config(parsed["stage1"], base) if "stage1" in parsed else None,
				batch_size=parsed["batch-size"],
				timeout=parsed["timeout"],
				length_mode=parsed["length-mode"],
				train=resolve(parsed.get("train")),
				)


def open_backend(stage: StageBackend, task: str, timeout: float = 120.0, train: Optional[Corpus] = None) -> Backend:
	"""
	Start the backend described by ``stage``.

	:param stage: The configuration of the backend.
	:param task: The task the backend will serve, ``'presence'`` or ``'types'``.
	:param timeout: The batch timeout of external backends, unless ``stage`` sets its own.
	:param train: The training corpus of the built-in baselines.
	"""

	if stage.kind == "external":
		batch_timeout = stage.timeout if stage.timeout is not None else timeout
		if stage.command:
			return SubprocessBackend(stage.command, batch_timeout)
		if stage.endpoint:
			return SocketBackend(stage.endpoint, batch_timeout)
		raise BadConfigError("External backends need a command or an endpoint")

	if stage.kind == "replay":
		if stage.replay is None:
			raise BadConfigError("Replay backends need a recording")
		return ReplayBackend(stage.replay)

	if stage.kind == "gold":
		if stage.gold is None:
			raise BadConfigError("Gold backends need a gold corpus")
		return GoldBackend(load_corpus(stage.gold))

	baseline_kind = {"builtin_majority": "majority", "builtin_random": "random", "builtin_trigger": "trigger"}
	if stage.kind not in baseline_kind:
		raise BadConfigError(f"Unknown backend kind {stage.kind!r}")

	kind = baseline_kind[stage.kind]
	if train is None:
		if kind == "majority" or (kind == "random" and stage.mode == "marginal"):
			raise BadConfigError(f"Backends of kind {stage.kind!r} need a training corpus ('pipeline.train')")
		train = Corpus(())

	lexicon = load_lexicon(stage.lexicon) if stage.lexicon is not None else None
	factory = presence_baseline if task == "presence" else types_baseline
	predictor = factory(kind, train, mode=stage.mode, seed=stage.seed, lexicon=lexicon)

	if task == "presence":
		return BuiltinBackend(presence=predictor)  # type: ignore[arg-type]
	return BuiltinBackend(types=predictor)  # type: ignore[arg-type]


def external_classify_batch(
		backend: Backend,
		requests: Sequence[Tuple[str, str, str]],
		batch_size: int = 32,
		) -> Dict[str, Dict[str, Any]]:
	"""
	Classify ``(id, task, text)`` requests with a backend, in batches.

	:param backend:
	:param requests:
	:param batch_size:

	:returns: The response records keyed by request id.
	"""

	requests = [Request(*r) for r in requests]
	for r in requests:
		if r.task not in TASKS:
			raise ValueError(f"Unknown task {r.task!r}")

	responses: Dict[str, Dict[str, Any]] = {}
	for start in range(0, len(requests), batch_size):
		responses.update(backend.classify_batch(requests[start:start + batch_size]))

	return responses


@dataclass(frozen=True)
class PipelineResult:
	"""
	The pipeline's output for one document.
	"""

	doc_id: str
	label: HolisticLabel

	#: The probability that the document is non-formalistic.
	probability: float

	#: The stage 3 input.
	features: FeatureVector

	#: Stage 1 decisions, by paragraph id (all true when filtering is disabled).
	presence: Mapping[str, bool]

	#: Stage 2 predictions, by paragraph id (empty for paragraphs filtered out).
	types: Mapping[str, FrozenSet[ArgumentType]]

	#: Wall-clock seconds spent in each stage of the run.
	timing: Mapping[str, float] = field(default_factory=dict, compare=False)

	@property
	def retained(self) -> FrozenSet[str]:  # noqa: D102
		return frozenset(para_id for para_id, kept in self.presence.items() if kept)


def run_pipeline(
		documents: Iterable[Document],
		config: PipelineConfig,
		record: Optional[PathLike] = None,
		) -> List[PipelineResult]:
	"""
	Classify documents with the three-stage pipeline. Gold labels in ``documents`` are ignored.

	:param documents:
	:param config:
	:param record: If given, every backend response is written to this file for later replay.

	:raises BackendProtocolError: if a backend violates the protocol.
	"""

	documents = list(documents)
	model = config.model if isinstance(config.model, MlpModel) else load_model(config.model)
	train = load_corpus(config.train) if config.train is not None else None
	recorded: List[Dict[str, Any]] = []
	timing: Dict[str, float] = {}

	with ExitStack() as stack:

		def start(stage: StageBackend, task: str) -> Backend:
			backend = open_backend(stage, task, config.timeout, train)
			stack.callback(backend.close)
			if record is not None:
				return _RecordingBackend(backend, task, recorded)
			return backend

		presence: Dict[str, Dict[str, bool]] = {d.doc_id: {} for d in documents}

		started = time.perf_counter()
		if config.filtering_enabled:
			assert config.stage1 is not None
			stage1 = start(config.stage1, "presence")
			requests = [
					(request_id(d.doc_id, p.para_id), "presence", p.text)
					for d in documents
					for p in d.paragraphs
					]
			responses = external_classify_batch(stage1, requests, config.batch_size)

			for d in documents:
				for p in d.paragraphs:
					probability = responses[request_id(d.doc_id, p.para_id)]["presence_prob"]
					presence[d.doc_id][p.para_id] = probability >= config.stage1.threshold
		else:
			for d in documents:
				for p in d.paragraphs:
					presence[d.doc_id][p.para_id] = True

		timing["stage1"] = time.perf_counter() - started
		logger.info(
				"Stage 1 kept %d of %d paragraphs",
				sum(sum(kept.values()) for kept in presence.values()),
				sum(len(kept) for kept in presence.values()),
				)

		started = time.perf_counter()
		stage2 = start(config.stage2, "types")
		requests = [
				(request_id(d.doc_id, p.para_id), "types", p.text)
				for d in documents
				for p in d.paragraphs
				if presence[d.doc_id][p.para_id]
				]
		responses = external_classify_batch(stage2, requests, config.batch_size)

		types: Dict[str, Dict[str, FrozenSet[ArgumentType]]] = {}
		for d in documents:
			types[d.doc_id] = {}
			for p in d.paragraphs:
				rid = request_id(d.doc_id, p.para_id)
				if rid in responses:
					probs = responses[rid]["type_probs"]
					types[d.doc_id][p.para_id] = frozenset(
							t for t in ARGUMENT_TYPES if probs[t.value] >= config.stage2.threshold
							)
				else:
					types[d.doc_id][p.para_id] = frozenset()

		timing["stage2"] = time.perf_counter() - started
		logger.info("Stage 2 classified %d paragraphs", len(requests))

	started = time.perf_counter()
	results = []
	for d in documents:
		relabeled = d.relabel(types[d.doc_id])
		retained = {para_id for para_id, kept in presence[d.doc_id].items() if kept}
		features = extract_features(relabeled, retained if config.length_mode == "retained" else None)

		probability = float(model.predict_proba([features])[0])
		if not math.isfinite(probability):
			raise ArithmeticError(f"Non-finite probability for document {d.doc_id!r}")

		label = HolisticLabel.NON_FORMALISTIC if probability >= THRESHOLD else HolisticLabel.FORMALISTIC
		results.append(
				PipelineResult(
						doc_id=d.doc_id,
						label=label,
						probability=probability,
						features=features,
						presence=dict(presence[d.doc_id]),
						types=types[d.doc_id],
						timing=timing,
						)
				)

	timing["stage3"] = time.perf_counter() - started
	logger.info("Stage 3 classified %d documents", len(results))

	if record is not None:
		record = PathPlus(record)
		record.parent.maybe_make(parents=True)
		record.write_lines([json.dumps(r, ensure_ascii=False) for r in recorded], encoding="UTF-8")

	return results


def save_results(results: Sequence[PipelineResult], filename: PathLike) -> None:
	"""
	Write pipeline results as JSON lines, after a header record.

	:param results:
	:param filename:
	"""

	lines = [json.dumps({"format_version": FORMAT_VERSION, "kind": _RESULTS_KIND})]

	for result in results:
		lines.append(
				json.dumps(
						{
								"doc_id": result.doc_id,
								"holistic_label": result.label.value,
								"probability": result.probability,
								"features": result.features.as_dict(),
								"paragraphs": [
										{
												"para_id": para_id,
												"presence": kept,
												"argument_types": [
														t.value for t in ARGUMENT_TYPES if t in result.types[para_id]
														],
												}
										for para_id, kept in result.presence.items()
										],
								"timing": dict(result.timing),
								},
						ensure_ascii=False,
						)
				)

	filename = PathPlus(filename)
	filename.parent.maybe_make(parents=True)
	filename.write_lines(lines, encoding="UTF-8")


def load_results(filename: PathLike) -> List[PipelineResult]:
	"""
	Read results written by :func:`~.save_results`.

	:param filename:
	"""

	filename = PathPlus(filename)
	lines = list(numbered_lines(filename))

	if not lines:
		raise CorpusSchemaError(f"{filename.as_posix()} is empty")

	header_lineno, header_line = lines[0]
	header = json.loads(header_line)
	if header.get("kind") != _RESULTS_KIND or header.get("format_version") != FORMAT_VERSION:
		raise CorpusSchemaError(
				f"{filename.as_posix()} is not a version {FORMAT_VERSION} results file",
				lineno=header_lineno,
				)

	results = []
	for lineno, line in lines[1:]:
		try:
			record = json.loads(line)
			features = record["features"]
			results.append(
					PipelineResult(
							doc_id=record["doc_id"],
							label=HolisticLabel(record["holistic_label"]),
							probability=record["probability"],
							features=FeatureVector(
									doc_length_tokens=features["doc_length_tokens"],
									n_arguments=features["n_arguments"],
									avg_argument_length_tokens=features["avg_argument_length_tokens"],
									rel_freq={t: features[f"rel_freq_{t.value}"] for t in ARGUMENT_TYPES},
									),
							presence={p["para_id"]: p["presence"] for p in record["paragraphs"]},
							types={
									p["para_id"]: frozenset(ArgumentType(t) for t in p["argument_types"])
									for p in record["paragraphs"]
									},
							timing=record.get("timing", {}),
							)
					)
		except (ValueError, KeyError, TypeError) as e:
			raise CorpusSchemaError(f"malformed result record ({e})", lineno=lineno) from None

	return results


@dataclass(frozen=True)
class PipelineEvaluation:
	"""
	Scores of the pipeline's final output and of its intermediate stages.
	"""

	holistic: BinaryReport
	presence: BinaryReport
	types: EvaluationReport


def evaluate_pipeline(results: Sequence[PipelineResult], gold_corpus: Corpus) -> PipelineEvaluation:
	"""
	Score pipeline results against a gold corpus.

	:param results:
	:param gold_corpus: Must contain every document of ``results``, with holistic labels.
	"""

	by_id = {r.doc_id: r for r in results}
	gold = gold_corpus.filter(lambda d: d.doc_id in by_id)

	missing = set(by_id) - set(gold.doc_ids)
	if missing:
		raise CorpusSchemaError(f"results for documents missing from the gold corpus: {', '.join(sorted(missing))}")
	gold.require_labels()

	predicted = Corpus(
			tuple(d.relabel(by_id[d.doc_id].types) for d in gold),
			{
					"extra_paragraph_fields": {
							d.doc_id: {para_id: {"presence": kept} for para_id, kept in by_id[d.doc_id].presence.items()}
							for d in gold
							},
					},
			)

	return PipelineEvaluation(
			holistic=holistic_report([d.holistic_label for d in gold], [by_id[d.doc_id].label for d in gold]),  # type: ignore[misc]
			presence=presence_report(gold, predicted),
			types=types_report(gold, predicted),
			)
