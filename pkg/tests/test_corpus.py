# stdlib
import datetime
import json
from fractions import Fraction

# 3rd party
import pytest
from domdf_python_tools.paths import PathPlus

# this package
from judicial_formalism.corpus import (
		ArgumentType,
		Corpus,
		CorpusParseError,
		CorpusSchemaError,
		Court,
		HolisticLabel,
		Paragraph,
		Split,
		UnlabeledDocumentError,
		apply_split,
		argument_histogram,
		corpus_stats,
		largest_remainder,
		load_corpus,
		load_split,
		paragraph_instances,
		save_corpus,
		save_split,
		stratified_sample,
		stratified_split,
		token_count,
		token_histogram
		)
from tests.builders import document, paragraph


def _record(**overrides):
	record = {
			"doc_id": "d1",
			"court": "SC",
			"decision_date": "2015-03-02",
			"holistic_label": "formalistic",
			"paragraphs": [{"para_id": "1", "text": "Some text.", "argument_types": ["CL"]}],
			}
	record.update(overrides)
	return record


def _write(tmp_pathplus: PathPlus, *records) -> PathPlus:
	filename = tmp_pathplus / "corpus.jsonl"
	filename.write_lines([r if isinstance(r, str) else json.dumps(r) for r in records])
	return filename


@pytest.mark.parametrize(
		"text, expected",
		[
				pytest.param("a  b\tc\nd", 4, id="mixed_whitespace"),
				pytest.param('', 0, id="empty"),
				pytest.param("  word  ", 1, id="padded"),
				pytest.param("jedna dvě tři", 3, id="unicode_spaces"),
				]
		)
def test_token_count(text: str, expected: int):
	assert token_count(text) == expected


def test_load_corpus(tmp_pathplus: PathPlus):
	filename = _write(
			tmp_pathplus,
			{"format_version": 1, "provenance": {"source": "unit test"}},
			_record(),
			_record(doc_id="d2", court="SAC", holistic_label=None),
			)

	corpus = load_corpus(filename)
	assert corpus.doc_ids == ["d1", "d2"]
	assert corpus.provenance == {"source": "unit test"}
	assert corpus["d1"].court is Court.SC
	assert corpus["d1"].decision_date == datetime.date(2015, 3, 2)
	assert corpus["d1"].holistic_label is HolisticLabel.FORMALISTIC
	assert corpus["d1"].paragraphs[0].argument_types == {ArgumentType.CL}
	assert corpus["d2"].holistic_label is None
	assert corpus.unlabeled() == ["d2"]


def test_load_corpus_without_header(tmp_pathplus: PathPlus):
	corpus = load_corpus(_write(tmp_pathplus, _record(), ''))
	assert len(corpus) == 1


def test_duplicate_types_collapse(tmp_pathplus: PathPlus):
	paragraphs = [{"para_id": "1", "text": "x", "argument_types": ["CL", "CL", "TI"]}]
	corpus = load_corpus(_write(tmp_pathplus, _record(paragraphs=paragraphs)))
	assert corpus["d1"].n_arguments == 2


@pytest.mark.parametrize(
		"lines, exception, match",
		[
				pytest.param(['{"doc_id": '], CorpusParseError, r"^line 1: malformed record", id="bad_json"),
				pytest.param(
						[_record(), _record()],
						CorpusSchemaError,
						r"^line 2: duplicate doc_id 'd1' \(first seen on line 1\)",
						id="duplicate_doc_id",
						),
				pytest.param(
						[_record(court="NSS")],
						CorpusSchemaError,
						r"^line 1: unknown court 'NSS' in document 'd1'",
						id="unknown_court",
						),
				pytest.param(
						[_record(decision_date="2015-3-2")],
						CorpusSchemaError,
						r"^line 1: decision_date must be YYYY-MM-DD",
						id="short_date",
						),
				pytest.param(
						[_record(decision_date="2015-02-30")],
						CorpusSchemaError,
						r"^line 1: invalid decision_date",
						id="impossible_date",
						),
				pytest.param(
						[_record(holistic_label="mixed")],
						CorpusSchemaError,
						r"^line 1: unknown holistic label 'mixed'",
						id="unknown_label",
						),
				pytest.param(
						[_record(paragraphs=[{"para_id": "1", "text": "x", "argument_types": ["XX"]}])],
						CorpusSchemaError,
						r"^line 1: unknown argument type code 'XX' in paragraph '1' of document 'd1'",
						id="unknown_type",
						),
				pytest.param(
						[_record(paragraphs=[{"para_id": "1", "text": "   ", "argument_types": []}])],
						CorpusSchemaError,
						r"^line 1: paragraph '1' has no text",
						id="empty_text",
						),
				pytest.param(
						[
								_record(
										paragraphs=[
												{"para_id": "1", "text": "x", "argument_types": []},
												{"para_id": "1", "text": "y", "argument_types": []},
												]
										)
								],
						CorpusSchemaError,
						r"^line 1: duplicate para_id '1' in document 'd1'",
						id="duplicate_para_id",
						),
				pytest.param(
						[_record(paragraphs=[])],
						CorpusSchemaError,
						r"^line 1: document 'd1' has no paragraphs",
						id="no_paragraphs",
						),
				pytest.param(
						[{"doc_id": "d1", "court": "SC"}],
						CorpusSchemaError,
						r"^line 1: missing field 'decision_date'",
						id="missing_field",
						),
				pytest.param(
						[{"format_version": 2}, _record()],
						CorpusSchemaError,
						r"^line 1: unsupported format_version 2",
						id="future_version",
						),
				]
		)
def test_load_corpus_errors(tmp_pathplus: PathPlus, lines, exception, match: str):
	with pytest.raises(exception, match=match):
		load_corpus(_write(tmp_pathplus, *lines))


def test_corpus_error_lineno(tmp_pathplus: PathPlus):
	with pytest.raises(CorpusSchemaError) as excinfo:
		load_corpus(_write(tmp_pathplus, _record(), '', _record(doc_id="d2", court="X")))

	assert excinfo.value.lineno == 3


def test_save_corpus_round_trip(tmp_pathplus: PathPlus):
	paragraphs = [
			{"para_id": "1", "text": "Článek 1 Listiny.", "argument_types": ["TI", "CL"], "presence": True},
			{"para_id": "2", "text": "Bez argumentu.", "argument_types": []},
			]
	filename = _write(
			tmp_pathplus,
			{"format_version": 1, "provenance": {"annotator": "A"}},
			_record(paragraphs=paragraphs, ecli="ECLI:CZ:NS:2015:1"),
			)

	corpus = load_corpus(filename)
	assert corpus.provenance["extra_fields"] == {"d1": {"ecli": "ECLI:CZ:NS:2015:1"}}

	save_corpus(corpus, tmp_pathplus / "copy.jsonl")
	copy = load_corpus(tmp_pathplus / "copy.jsonl")

	assert copy == corpus
	assert copy.provenance == corpus.provenance

	written = json.loads((tmp_pathplus / "copy.jsonl").read_lines()[1])
	assert written["ecli"] == "ECLI:CZ:NS:2015:1"
	assert written["paragraphs"][0]["argument_types"] == ["CL", "TI"]
	assert written["paragraphs"][0]["presence"] is True


@pytest.mark.parametrize(
		"text",
		[
				pytest.param("first\u2028second", id="line_separator"),
				pytest.param("first\u2029second", id="paragraph_separator"),
				pytest.param("first\x85second", id="next_line"),
				pytest.param("first\x1csecond\x1d", id="group_separators"),
				pytest.param("Ústavní soud \U0001F600 \U0001D11E", id="astral"),
				pytest.param("first\rsecond\r\nthird", id="carriage_return"),
				]
		)
def test_save_corpus_unusual_line_breaks(tmp_pathplus: PathPlus, text: str):
	corpus = Corpus((
			document(f"d{text}", [paragraph(f"p{text}", "CL", text=text)]),
			document("d2", [paragraph('1', '', text=text)], label="non_formalistic"),
			))

	save_corpus(corpus, tmp_pathplus / "corpus.jsonl")
	copy = load_corpus(tmp_pathplus / "corpus.jsonl")

	assert copy == corpus
	assert copy.documents[0].paragraphs[0].text == text
	assert [i.key for i in paragraph_instances(copy)] == [i.key for i in paragraph_instances(corpus)]


def test_load_corpus_crlf(tmp_pathplus: PathPlus):
	filename = tmp_pathplus / "crlf.jsonl"
	filename.write_bytes(b''.join(json.dumps(r).encode("UTF-8") + b"\r\n" for r in (_record(), _record(doc_id="d2"))))

	assert load_corpus(filename).doc_ids == ["d1", "d2"]


def test_between():
	corpus = Corpus((
			document("a", ["CL"], date="2003-01-01"),
			document("b", ["CL"], date="2010-06-30"),
			document("c", ["CL"], date="2023-12-31"),
			))

	assert corpus.between(datetime.date(2010, 6, 30), datetime.date(2023, 12, 31)).doc_ids == ["b", "c"]
	assert corpus.between(end=datetime.date(2010, 6, 29)).doc_ids == ["a"]
	assert corpus.between().doc_ids == ["a", "b", "c"]


def test_relabel():
	doc = document("a", ["CL", "PL TI", ''])
	relabeled = doc.relabel({"3": [ArgumentType.HI]})

	assert [p.argument_types for p in relabeled.paragraphs] == [frozenset(), frozenset(), {ArgumentType.HI}]
	assert relabeled.paragraphs[0].text == doc.paragraphs[0].text
	assert doc.n_arguments == 3


def test_corpus_stats(annotated: Corpus):
	stats = corpus_stats(annotated)

	assert stats.n_documents == 20
	assert stats.n_paragraphs == 43
	assert stats.n_arguments == 37
	assert stats.paragraphs_with_0 == 11
	assert stats.paragraphs_with_1_arg == 27
	assert stats.paragraphs_with_2plus == 5
	assert stats.token_min == 6
	assert stats.token_max == 9
	assert stats.args_per_doc_mean == pytest.approx(1.85)
	assert stats.args_per_doc_max == 3
	assert stats.docs_with_zero_args == 1


def test_corpus_stats_empty():
	stats = corpus_stats(Corpus(()))
	assert stats.n_documents == 0
	assert stats.token_mean == 0.0


def test_histograms():
	corpus = Corpus((
			document("a", [paragraph('1', "CL", "word " * 1500)]),
			document("b", [paragraph('1', '', "word " * 3100)]),
			document("c", [paragraph('1', "CL TI", "word " * 999)]),
			))

	assert token_histogram(corpus, 1000) == {0: 1, 1000: 1, 2000: 0, 3000: 1}
	assert argument_histogram(corpus) == {0: 1, 1: 1, 2: 1}

	with pytest.raises(ValueError, match="bin_width must be positive"):
		token_histogram(corpus, 0)


@pytest.mark.parametrize(
		"total, weights, expected",
		[
				pytest.param(116, (7, 2, 1), [81, 23, 12], id="sc_formalistic"),
				pytest.param(66, (7, 2, 1), [46, 13, 7], id="sc_non_formalistic"),
				pytest.param(45, (7, 2, 1), [31, 9, 5], id="sac_tie"),
				pytest.param(10, (7, 2, 1), [7, 2, 1], id="exact"),
				pytest.param(3, (5, 0, 5), [1, 0, 2], id="equal_weights_later_wins"),
				]
		)
def test_largest_remainder(total: int, weights, expected):
	fractions = [Fraction(w, sum(weights)) for w in weights]
	assert largest_remainder(total, fractions) == expected


def _split_fixture() -> Corpus:
	strata = [("SC", "formalistic", 116), ("SC", "non_formalistic", 66), ("SAC", "formalistic", 45)]
	strata.append(("SAC", "non_formalistic", 45))

	documents = []
	for court, label, size in strata:
		for idx in range(size):
			documents.append(document(f"{court}-{label}-{idx}", ["CL"], court=court, label=label))
	return Corpus(tuple(documents))


def test_stratified_split_sizes():
	corpus = _split_fixture()
	assignment = stratified_split(corpus, (0.7, 0.2, 0.1), seed=42)

	assert assignment.sizes() == {Split.TRAIN: 189, Split.VALIDATION: 54, Split.TEST: 29}

	# holistic and court marginals of the train split
	train = set(assignment.doc_ids(Split.TRAIN))
	train_docs = corpus.filter(lambda d: d.doc_id in train)
	assert sum(d.holistic_label is HolisticLabel.FORMALISTIC for d in train_docs) == 112
	assert sum(d.court is Court.SC for d in train_docs) == 127


def test_stratified_split_deterministic():
	corpus = _split_fixture()
	first = stratified_split(corpus, seed=7)

	assert stratified_split(corpus, seed=7) == first
	assert stratified_split(corpus, seed=8) != first
	assert list(first.assignment) == corpus.doc_ids


def test_stratified_split_errors():
	corpus = Corpus((document('a', ["CL"]), document('b', ["CL"], label=None), document('c', ["CL"], label=None)))

	with pytest.raises(UnlabeledDocumentError, match="documents without a holistic label: b, c"):
		stratified_split(corpus)

	with pytest.raises(ValueError, match="ratios must sum to 1"):
		stratified_split(corpus, (0.5, 0.2, 0.1))

	with pytest.raises(ValueError, match="expected three ratios"):
		stratified_split(corpus, (0.5, 0.5))


def test_stratified_sample(annotated: Corpus):
	sample = stratified_sample(annotated, 10, seed=1)

	assert len(sample) == 10
	assert sum(d.court is Court.SC for d in sample) == 5
	assert sample.doc_ids == [d for d in annotated.doc_ids if d in sample.doc_ids]
	assert stratified_sample(annotated, 10, seed=1) == sample

	with pytest.raises(ValueError, match="sample size must be between 0 and 20, got 21"):
		stratified_sample(annotated, 21)


def test_split_file_round_trip(tmp_pathplus: PathPlus, annotated: Corpus):
	assignment = stratified_split(annotated, seed=3)
	save_split(assignment, tmp_pathplus / "split.csv")

	assert (tmp_pathplus / "split.csv").read_lines()[0] == "doc_id,split"
	assert load_split(tmp_pathplus / "split.csv") == assignment

	parts = apply_split(annotated, assignment)
	assert sum(len(part) for part in parts.values()) == 20
	assert parts[Split.TRAIN].doc_ids == assignment.doc_ids(Split.TRAIN)


def test_split_file_errors(tmp_pathplus: PathPlus, annotated: Corpus):
	filename = tmp_pathplus / "split.csv"

	filename.write_lines(["doc_id,split", "sc01,train", "sc01,test"])
	with pytest.raises(CorpusSchemaError, match=r"^line 3: doc_id 'sc01' is assigned more than once"):
		load_split(filename)

	filename.write_lines(["doc_id,split", "sc01,holdout"])
	with pytest.raises(CorpusSchemaError, match=r"^line 2: unknown split 'holdout'"):
		load_split(filename)

	filename.write_lines(["doc_id,split", "sc01,train"])
	with pytest.raises(CorpusSchemaError, match="documents missing from the split: sc02"):
		apply_split(annotated, load_split(filename))


def test_paragraph_instances():
	corpus = Corpus((document('a', ["CL", '']), document('b', ["PL"])))
	instances = paragraph_instances(corpus)

	assert [i.key for i in instances] == ["a#1", "a#2", "b#1"]
	assert [i.is_argumentative for i in instances] == [True, False, True]


def test_paragraph_validation():
	with pytest.raises(CorpusSchemaError, match="paragraph 'p' has no text"):
		Paragraph('p', "\n")

	with pytest.raises(ValueError):
		Paragraph('p', "text", frozenset({"XX"}))  # type: ignore[arg-type]
