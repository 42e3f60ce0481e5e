# stdlib
import json
import socket
import sys
import threading
from typing import Iterator, List

# 3rd party
import numpy
import pytest
from domdf_python_tools.paths import PathPlus

# this package
from judicial_formalism.config import BadConfigError
from judicial_formalism.corpus import (
		ArgumentType,
		Corpus,
		CorpusSchemaError,
		HolisticLabel,
		save_corpus,
		split_paragraph_key
		)
from judicial_formalism.features import extract_features, fit_scaler
from judicial_formalism.mlp import MlpModel, save_model
from judicial_formalism.pipeline import (
		BackendProtocolError,
		BackendTimeoutError,
		GoldBackend,
		PipelineConfig,
		PipelineResult,
		Request,
		StageBackend,
		evaluate_pipeline,
		external_classify_batch,
		load_results,
		open_backend,
		request_id,
		run_pipeline,
		save_results,
		validate_responses
		)
from tests.builders import ANALYSIS_DOCUMENTS, corpus_of, document, paragraph

MOCK_BACKEND = PathPlus(__file__).parent / "mock_backend.py"

posix_only = pytest.mark.skipif(sys.platform == "win32", reason="The mock backend needs select() on pipes")


def mock(mode: str, **kwargs) -> StageBackend:
	return StageBackend("external", command=(sys.executable, str(MOCK_BACKEND), mode), **kwargs)


def coded_corpus() -> Corpus:
	"""
	The analysis corpus, with each paragraph's gold type codes written into its text.
	"""

	documents = []
	for doc_id, court, year, label, types in ANALYSIS_DOCUMENTS:
		paragraphs = [paragraph(str(i), t, f"paragraph {i} {t}".strip()) for i, t in enumerate(types, start=1)]
		documents.append(document(doc_id, paragraphs, court, f"{year}-06-01", label))
	return Corpus(tuple(documents))


@pytest.fixture()
def coded() -> Corpus:
	return coded_corpus()


@pytest.fixture()
def gold_file(tmp_pathplus: PathPlus, coded: Corpus) -> PathPlus:
	filename = tmp_pathplus / "gold.jsonl"
	save_corpus(coded, filename)
	return filename


@pytest.fixture()
def model(coded: Corpus) -> MlpModel:
	rng = numpy.random.default_rng(17)
	scaler = fit_scaler([extract_features(d) for d in coded])
	return MlpModel(
			(rng.normal(size=(11, 4)), rng.normal(size=(4, 1))),
			(rng.normal(size=4), rng.normal(size=1)),
			scaler,
			)


def gold_config(gold_file: PathPlus, model: MlpModel, **kwargs) -> PipelineConfig:
	gold = StageBackend("gold", gold=gold_file.as_posix())
	return PipelineConfig(stage2=gold, model=model, stage1=gold, **kwargs)


def test_gold_backends_reproduce_the_model(gold_file: PathPlus, model: MlpModel, coded: Corpus):
	results = run_pipeline(coded, gold_config(gold_file, model))

	assert [r.doc_id for r in results] == coded.doc_ids

	for result, doc in zip(results, coded):
		features = extract_features(doc)
		probability = model.predict_proba([features])[0]

		assert result.features == features
		assert result.probability == probability
		assert result.label is (HolisticLabel.NON_FORMALISTIC if probability >= 0.5 else HolisticLabel.FORMALISTIC)
		assert result.types == {p.para_id: p.argument_types for p in doc.paragraphs}
		assert result.retained == {p.para_id for p in doc.paragraphs if p.argument_types}

	assert set(results[0].timing) == {"stage1", "stage2", "stage3"}


def test_filtering_disabled(gold_file: PathPlus, model: MlpModel, coded: Corpus):
	filtered = run_pipeline(coded, gold_config(gold_file, model))
	unfiltered = run_pipeline(coded, gold_config(gold_file, model, filtering_enabled=False))

	for with_filter, without_filter, doc in zip(filtered, unfiltered, coded):
		assert without_filter.retained == {p.para_id for p in doc.paragraphs}

		# gold types are empty exactly where gold presence is false
		assert without_filter.types == with_filter.types
		assert without_filter.probability == with_filter.probability

	# stage 1 is not consulted at all
	config = PipelineConfig(
			stage2=StageBackend("gold", gold=gold_file.as_posix()),
			model=model,
			filtering_enabled=False,
			stage1=StageBackend("gold", gold="no-such-file.jsonl"),
			)
	assert [r.label for r in run_pipeline(coded, config)] == [r.label for r in unfiltered]


def test_retained_length_mode(gold_file: PathPlus, model: MlpModel, coded: Corpus):
	results = run_pipeline(coded, gold_config(gold_file, model, length_mode="retained"))

	for result, doc in zip(results, coded):
		expected = sum(p.token_count for p in doc.paragraphs if p.argument_types)
		assert result.features.doc_length_tokens == expected


@posix_only
@pytest.mark.parametrize("mode", [pytest.param("echo", id="in_order"), pytest.param("echo-shuffle", id="shuffled")])
@pytest.mark.parametrize("batch_size", [pytest.param(1, id="batch_1"), pytest.param(7, id="batch_7")])
def test_subprocess_backend(gold_file: PathPlus, model: MlpModel, coded: Corpus, mode: str, batch_size: int):
	expected = run_pipeline(coded, gold_config(gold_file, model))

	config = PipelineConfig(stage2=mock(mode), model=model, stage1=mock(mode), batch_size=batch_size, timeout=30)
	assert run_pipeline(coded, config) == expected


@posix_only
def test_thresholds(model: MlpModel, coded: Corpus):
	config = PipelineConfig(stage2=mock("cl"), model=model, stage1=mock("cl"), timeout=30)
	results = run_pipeline(coded, config)

	for result in results:
		assert all(result.presence.values())
		assert set(result.types.values()) == {frozenset({ArgumentType.CL})}
		assert result.features.rel_freq[ArgumentType.CL] == 100.0

	# 0.9 is below a stage 1 threshold of 0.95, so nothing reaches stage 2
	config = PipelineConfig(stage2=mock("cl"), model=model, stage1=mock("cl", threshold=0.95), timeout=30)
	for result in run_pipeline(coded, config):
		assert not result.retained
		assert result.features.n_arguments == 0
		assert set(result.types.values()) == {frozenset()}


@posix_only
@pytest.mark.parametrize(
		"mode, match",
		[
				pytest.param("bad-id", "Response to an unknown request id", id="bad_id"),
				pytest.param("duplicate", "Duplicate response id", id="duplicate"),
				pytest.param("out-of-range", r"'presence_prob' must be a number in \[0, 1\]", id="out_of_range"),
				pytest.param("crash", "Backend closed its output after 0 of 32 answers", id="crash"),
				]
		)
def test_protocol_violations(model: MlpModel, coded: Corpus, mode: str, match: str):
	config = PipelineConfig(stage2=mock("echo"), model=model, stage1=mock(mode), timeout=30)

	with pytest.raises(BackendProtocolError, match=match):
		run_pipeline(coded, config)


@posix_only
def test_timeout(model: MlpModel, coded: Corpus):
	config = PipelineConfig(stage2=mock("echo"), model=model, stage1=mock("silent", timeout=0.5))

	with pytest.raises(BackendTimeoutError, match=r"Backend answered 0 of 32 requests within 0.5 s"):
		run_pipeline(coded, config)


def test_missing_command():
	with pytest.raises(BackendProtocolError, match="Cannot start backend"):
		open_backend(StageBackend("external", command=("no-such-backend-executable", )), "presence")


@posix_only
def test_record_and_replay(tmp_pathplus: PathPlus, model: MlpModel, coded: Corpus):
	recording = tmp_pathplus / "responses" / "run.jsonl"
	config = PipelineConfig(stage2=mock("echo-shuffle"), model=model, stage1=mock("echo"), timeout=30)
	first = run_pipeline(coded, config, record=recording)

	records = [json.loads(line) for line in recording.read_lines() if line]
	assert {r["task"] for r in records} == {"presence", "types"}
	assert sum(r["task"] == "presence" for r in records) == 43

	replay = StageBackend("replay", replay=recording.as_posix())
	assert run_pipeline(coded, PipelineConfig(stage2=replay, model=model, stage1=replay)) == first

	# a corpus with an extra paragraph cannot be replayed
	extra = corpus_of(document("new", ["CL"]))
	with pytest.raises(BackendProtocolError, match="No recorded 'presence' response"):
		run_pipeline(extra, PipelineConfig(stage2=replay, model=model, stage1=replay))


def test_malformed_recording(tmp_pathplus: PathPlus):
	(tmp_pathplus / "run.jsonl").write_lines(['{"task": "presence", "id": "a#1", "presence_prob": 1.0}', "[1, 2]"])

	with pytest.raises(BackendProtocolError, match="run.jsonl:2: malformed recorded response"):
		open_backend(StageBackend("replay", replay=(tmp_pathplus / "run.jsonl").as_posix()), "presence")


class EchoServer:
	"""
	A TCP stage backend answering like the ``echo`` mock, with a thread per connection.
	"""

	codes = [t.value for t in ArgumentType]

	def __init__(self) -> None:
		self.listener = socket.create_server(("127.0.0.1", 0))
		self.listener.settimeout(0.1)
		self.port = self.listener.getsockname()[1]
		self.stopped = threading.Event()
		self.thread = threading.Thread(target=self.serve, daemon=True)
		self.thread.start()

	def serve(self) -> None:
		while not self.stopped.is_set():
			try:
				connection, _ = self.listener.accept()
			except socket.timeout:
				continue
			threading.Thread(target=self.answer, args=(connection, ), daemon=True).start()

	def answer(self, connection: socket.socket) -> None:
		with connection, connection.makefile("rw", encoding="UTF-8", newline='\n') as stream:
			for line in stream:
				request = json.loads(line)
				found = set(request["text"].split()) & set(self.codes)
				if request["task"] == "presence":
					response = {"id": request["id"], "presence_prob": 1.0 if found else 0.0}
				else:
					response = {"id": request["id"], "type_probs": {c: float(c in found) for c in self.codes}}
				stream.write(json.dumps(response) + '\n')
				stream.flush()

	def close(self) -> None:
		self.stopped.set()
		self.thread.join(timeout=5)
		self.listener.close()


@pytest.fixture()
def echo_server() -> Iterator[EchoServer]:
	server = EchoServer()
	yield server
	server.close()


def test_socket_backend(echo_server: EchoServer, gold_file: PathPlus, model: MlpModel, coded: Corpus):
	expected = run_pipeline(coded, gold_config(gold_file, model))

	endpoint = StageBackend("external", endpoint=f"127.0.0.1:{echo_server.port}")
	config = PipelineConfig(stage2=endpoint, model=model, stage1=endpoint, batch_size=5, timeout=30)
	assert run_pipeline(coded, config) == expected


def test_socket_backend_refused():
	with socket.create_server(("127.0.0.1", 0)) as listener:
		port = listener.getsockname()[1]

	with pytest.raises(BackendProtocolError, match="Cannot connect to backend at 127.0.0.1"):
		open_backend(StageBackend("external", endpoint=f"127.0.0.1:{port}"), "presence", timeout=5)


def test_builtin_backends(annotated: Corpus, model: MlpModel):
	corpus = corpus_of(
			document('a', [paragraph('1', '', "The purpose of the rule."), paragraph('2', '', "Costs follow.")]),
			)
	trigger = StageBackend("builtin_trigger", lexicon="en")
	results = run_pipeline(corpus, PipelineConfig(stage2=trigger, model=model, stage1=trigger))

	assert results[0].presence == {'1': True, '2': False}
	assert results[0].types == {'1': frozenset({ArgumentType.TI}), '2': frozenset()}

	with pytest.raises(BadConfigError, match="'builtin_majority' need a training corpus"):
		open_backend(StageBackend("builtin_majority"), "presence")

	with pytest.raises(BadConfigError, match="'builtin_random' need a training corpus"):
		open_backend(StageBackend("builtin_random", mode="marginal"), "types")

	majority = open_backend(StageBackend("builtin_majority"), "presence", train=annotated)
	responses = majority.classify_batch([Request("a#1", "presence", "Anything.")])
	assert responses == {"a#1": {"id": "a#1", "presence_prob": 1.0}}

	with pytest.raises(BackendProtocolError, match="Backend cannot answer 'types' requests"):
		majority.classify_batch([Request("a#1", "types", "Anything.")])

	with pytest.raises(BadConfigError, match="Unknown backend kind 'oracle'"):
		open_backend(StageBackend("oracle"), "types")


def test_builtin_backends_from_training_file(annotated_file: PathPlus, model: MlpModel, coded: Corpus):
	majority = StageBackend("builtin_majority")
	config = PipelineConfig(stage2=majority, model=model, stage1=majority, train=annotated_file.as_posix())

	for result in run_pipeline(coded, config):
		assert all(result.presence.values())
		assert set(result.types.values()) == {frozenset()}


def test_gold_backend_unknown_paragraph(coded: Corpus):
	backend = GoldBackend(coded)

	with pytest.raises(BackendProtocolError, match="Gold corpus has no paragraph: 'zz#1'"):
		backend.classify_batch([Request("zz#1", "presence", "text")])


def test_external_classify_batch(coded: Corpus):
	backend = GoldBackend(coded)
	requests = [(request_id("sc01", para_id), "types", "text") for para_id in "123"]
	responses = external_classify_batch(backend, requests, batch_size=2)

	assert list(responses) == ["sc01#1", "sc01#2", "sc01#3"]
	assert responses["sc01#1"]["type_probs"]["CL"] == 1.0
	assert responses["sc01#3"]["type_probs"]["LIN"] == 1.0

	with pytest.raises(ValueError, match="Unknown task 'holistic'"):
		external_classify_batch(backend, [("sc01#1", "holistic", "text")])


REQUESTS = [Request("d#1", "presence", "a"), Request("d#2", "types", "b")]
TYPES_OK = json.dumps({"id": "d#2", "type_probs": dict.fromkeys(["LIN", "SI", "CL", "D", "HI", "PL", "TI", "PC"], 0.5)})


@pytest.mark.parametrize(
		"lines, match",
		[
				pytest.param(["{not json", TYPES_OK], "Malformed response line", id="malformed"),
				pytest.param(['{"presence_prob": 1}', TYPES_OK], "Response without a string 'id'", id="no_id"),
				pytest.param(['{"id": 1, "presence_prob": 1}'], "Response without a string 'id'", id="numeric_id"),
				pytest.param(['[1]'], "Response without a string 'id'", id="not_an_object"),
				pytest.param(
						['{"id": "d#1", "presence_prob": 1}', '{"id": "d#1", "presence_prob": 1}'],
						"Duplicate response id",
						id="duplicate",
						),
				pytest.param(['{"id": "d#3", "presence_prob": 1}'], "Response to an unknown request id", id="unknown"),
				pytest.param(
						['{"id": "d#1", "presence_prob": -0.1}', TYPES_OK],
						r"'presence_prob' must be a number in \[0, 1\]",
						id="negative",
						),
				pytest.param(
						['{"id": "d#1", "presence_prob": true}', TYPES_OK],
						r"'presence_prob' must be a number in \[0, 1\]",
						id="boolean",
						),
				pytest.param(
						['{"id": "d#1", "presence_prob": NaN}', TYPES_OK],
						r"'presence_prob' must be a number in \[0, 1\]",
						id="nan",
						),
				pytest.param(
						['{"id": "d#1", "presence_prob": 1}', '{"id": "d#2", "type_probs": {"CL": 1}}'],
						"'type_probs' must give a probability for each of the eight codes",
						id="missing_codes",
						),
				pytest.param(
						['{"id": "d#1", "presence_prob": 1}', TYPES_OK.replace("0.5", "2", 1)],
						r"'type_probs' values must be numbers in \[0, 1\]",
						id="type_out_of_range",
						),
				pytest.param(['{"id": "d#1", "presence_prob": 1}'], r"No response for 1 request\(s\): 'd#2'", id="missing"),
				]
		)
def test_validate_responses_errors(lines: List[str], match: str):
	with pytest.raises(BackendProtocolError, match=match):
		validate_responses(REQUESTS, lines)


def test_validate_responses_any_order():
	responses = validate_responses(REQUESTS, [TYPES_OK, '{"id": "d#1", "presence_prob": 0}'])
	assert responses["d#1"]["presence_prob"] == 0
	assert responses["d#2"]["type_probs"]["PC"] == 0.5


def test_save_and_load_results(tmp_pathplus: PathPlus, gold_file: PathPlus, model: MlpModel, coded: Corpus):
	results = run_pipeline(coded, gold_config(gold_file, model))
	save_results(results, tmp_pathplus / "out" / "results.jsonl")

	lines = (tmp_pathplus / "out" / "results.jsonl").read_lines()
	assert json.loads(lines[0]) == {"format_version": 1, "kind": "pipeline-results"}
	assert json.loads(lines[1])["paragraphs"][0] == {"para_id": '1', "presence": True, "argument_types": ["CL"]}

	loaded = load_results(tmp_pathplus / "out" / "results.jsonl")
	assert loaded == results
	assert all(isinstance(r, PipelineResult) for r in loaded)
	assert set(loaded[0].timing) == {"stage1", "stage2", "stage3"}


UNUSUAL_TEXTS = [
		pytest.param("first\u2028second", id="line_separator"),
		pytest.param("first\u2029second", id="paragraph_separator"),
		pytest.param("first\x85second", id="next_line"),
		pytest.param("Ústavní soud \U0001F600", id="astral"),
		pytest.param("first\rsecond\r\nthird", id="carriage_return"),
		]


def unusual_corpus(text: str) -> Corpus:
	return corpus_of(
			document("a#b", [paragraph('c', "CL", text=f"{text} one")]),
			document('a', [paragraph("b#c", "PL TI", text=text), paragraph('1', '', text="plain")], label="non_formalistic"),
			document(f"x{text}%", [paragraph(f"%23{text}", "LIN", text=text)]),
			)


def test_request_ids_are_unambiguous():
	assert request_id("sc01", '1') == "sc01#1"
	assert request_id("a#b", 'c') != request_id('a', "b#c")
	assert request_id("a%23", 'b') != request_id("a#", 'b')

	pairs = [("a#b", 'c'), ('a', "b#c"), ("%23", "%"), ("x\u2028y", "1\r"), ('', '')]
	for doc_id, para_id in pairs:
		assert split_paragraph_key(request_id(doc_id, para_id)) == (doc_id, para_id)

	assert len({request_id(*pair) for pair in pairs}) == len(pairs)


@pytest.mark.parametrize("text", UNUSUAL_TEXTS)
def test_unusual_text_round_trips(tmp_pathplus: PathPlus, model: MlpModel, text: str):
	corpus = unusual_corpus(text)
	save_corpus(corpus, tmp_pathplus / "gold.jsonl")

	recording = tmp_pathplus / "run.jsonl"
	results = run_pipeline(corpus, gold_config(tmp_pathplus / "gold.jsonl", model), record=recording)

	assert [r.doc_id for r in results] == corpus.doc_ids
	for result, doc in zip(results, corpus):
		assert result.types == {p.para_id: p.argument_types for p in doc.paragraphs}

	save_results(results, tmp_pathplus / "results.jsonl")
	assert load_results(tmp_pathplus / "results.jsonl") == results

	replay = StageBackend("replay", replay=recording.as_posix())
	assert run_pipeline(corpus, PipelineConfig(stage2=replay, model=model, stage1=replay)) == results


@pytest.mark.parametrize(
		"lines, match",
		[
				pytest.param([], "is empty", id="empty"),
				pytest.param(['{"format_version": 2, "kind": "pipeline-results"}'], "is not a version 1 results file", id="version"),
				pytest.param(['{"format_version": 1, "kind": "corpus"}'], "is not a version 1 results file", id="kind"),
				pytest.param(
						['{"format_version": 1, "kind": "pipeline-results"}', '{"doc_id": "a"}'],
						"malformed result record",
						id="record",
						),
				]
		)
def test_load_results_errors(tmp_pathplus: PathPlus, lines: List[str], match: str):
	(tmp_pathplus / "results.jsonl").write_lines(lines)

	with pytest.raises(CorpusSchemaError, match=match):
		load_results(tmp_pathplus / "results.jsonl")


def test_evaluate_pipeline(gold_file: PathPlus, model: MlpModel, coded: Corpus):
	results = run_pipeline(coded, gold_config(gold_file, model))
	evaluation = evaluate_pipeline(results, coded)

	assert evaluation.presence.f1 == 1.0
	assert evaluation.types.macro_all == 1.0

	expected = sum(r.label is d.holistic_label for r, d in zip(results, coded))
	counts = evaluation.holistic.per_class
	assert sum(c.tp for c in counts.values()) == expected

	with pytest.raises(CorpusSchemaError, match="missing from the gold corpus: sc01, sc02"):
		evaluate_pipeline(results, coded.filter(lambda d: d.doc_id not in {"sc01", "sc02"}))


def test_evaluate_pipeline_predicted_presence(model: MlpModel, coded: Corpus):
	# stage 1 keeps everything, stage 2 finds nothing
	results = [
			PipelineResult(
					doc_id=d.doc_id,
					label=HolisticLabel.FORMALISTIC,
					probability=0.1,
					features=extract_features(d.relabel({})),
					presence={p.para_id: True for p in d.paragraphs},
					types={p.para_id: frozenset() for p in d.paragraphs},
					)
			for d in coded
			]
	evaluation = evaluate_pipeline(results, coded)

	assert evaluation.presence.per_class[True].tp == 32
	assert evaluation.presence.per_class[True].fp == 11
	assert all(m.f1_pos == 0.0 for m in evaluation.types.per_label)


def test_pipeline_config_errors(model: MlpModel):
	stage = StageBackend("builtin_trigger", lexicon="en")

	with pytest.raises(BadConfigError, match="Stage 1 must be configured when filtering is enabled"):
		PipelineConfig(stage2=stage, model=model)

	with pytest.raises(BadConfigError, match="Unknown length mode 'paragraph'"):
		PipelineConfig(stage2=stage, model=model, filtering_enabled=False, length_mode="paragraph")

	with pytest.raises(BadConfigError, match="The batch size and timeout must be positive"):
		PipelineConfig(stage2=stage, model=model, filtering_enabled=False, batch_size=0)

	with pytest.raises(BadConfigError, match="The decision threshold must lie strictly between 0 and 1"):
		StageBackend("gold", threshold=1.0)


def test_pipeline_config_from_file(tmp_pathplus: PathPlus, model: MlpModel, gold_file: PathPlus, coded: Corpus):
	save_model(model, tmp_pathplus / "models" / "mlp.toml")
	(tmp_pathplus / "pipeline.toml").write_lines([
			"[pipeline]",
			'model = "models/mlp.toml"',
			"batch-size = 8",
			'length-mode = "retained"',
			'',
			"[pipeline.stage1]",
			'kind = "gold"',
			'gold = "gold.jsonl"',
			"threshold = 0.4",
			'',
			"[pipeline.stage2]",
			'kind = "builtin_trigger"',
			'lexicon = "en"',
			])

	config = PipelineConfig.from_file(tmp_pathplus / "pipeline.toml")

	assert config.model == (tmp_pathplus / "models" / "mlp.toml").as_posix()
	assert config.batch_size == 8
	assert config.timeout == 120.0
	assert config.filtering_enabled is True
	assert config.length_mode == "retained"
	assert config.stage1 == StageBackend("gold", threshold=0.4, gold=gold_file.as_posix())
	assert config.stage2 == StageBackend("builtin_trigger", lexicon="en")

	assert len(run_pipeline(coded, config)) == 20


def test_pipeline_config_without_table(tmp_pathplus: PathPlus):
	(tmp_pathplus / "other.toml").write_lines(["[mlp]", "seed = 1"])

	with pytest.raises(BadConfigError, match=r"other.toml: no \[pipeline\] table"):
		PipelineConfig.from_file(tmp_pathplus / "other.toml")
