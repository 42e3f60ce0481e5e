# 3rd party
import pytest
from domdf_python_tools.paths import PathPlus

# this package
from judicial_formalism.corpus import Corpus, save_corpus
from tests.builders import analysis_corpus

pytest_plugins = ("coincidence", )


@pytest.fixture()
def annotated() -> Corpus:
	return analysis_corpus()


@pytest.fixture()
def annotated_file(tmp_pathplus: PathPlus, annotated: Corpus) -> PathPlus:
	filename = tmp_pathplus / "corpus.jsonl"
	save_corpus(annotated, filename)
	return filename
