# stdlib
import json
from typing import Any, Iterable, Type

# 3rd party
import pytest
from coincidence.regressions import AdvancedDataRegressionFixture
from domdf_python_tools.paths import PathPlus

# this package
from judicial_formalism.config import (
		BadConfigError,
		MlpConfigParser,
		PipelineConfigParser,
		StageBackendParser,
		construct_path,
		load_config
		)
from judicial_formalism.mlp import MlpConfig

MINIMAL_CONFIG = """\
[pipeline]
model = "m.toml"

[pipeline.stage1]
kind = "gold"
gold = "g.jsonl"

[pipeline.stage2]
kind = "builtin_trigger"
lexicon = "en"
"""

UNFILTERED = """\
[pipeline]
filtering = false
model = "m.toml"
batch-size = 8
timeout = 10
train = "train.jsonl"

[pipeline.stage2]
kind = "external"
command = "python adapter.py types"
timeout = 30
"""

MLP = """\
[mlp]
hidden-sizes = [32, 16]
dropout-rates = [0.2, 0]
loss = "asymmetric"
gamma-neg = 4
seed = 7
"""

STAGE2 = '[pipeline]\nmodel = "m.toml"\nfiltering = false\n\n[pipeline.stage2]\n'


def plain(config: Any) -> Any:
	# the regression files hold lists, not tuples
	return json.loads(json.dumps(config))


@pytest.mark.parametrize(
		"toml_config",
		[
				pytest.param(MINIMAL_CONFIG, id="minimal"),
				pytest.param(UNFILTERED, id="unfiltered"),
				]
		)
def test_parse_pipeline_config(
		toml_config: str,
		tmp_pathplus: PathPlus,
		advanced_data_regression: AdvancedDataRegressionFixture,
		monkeypatch,
		):
	monkeypatch.delenv("JUDICIAL_FORMALISM_STAGE2_COMMAND", raising=False)
	monkeypatch.delenv("JUDICIAL_FORMALISM_STAGE2_ENDPOINT", raising=False)

	(tmp_pathplus / "config.toml").write_clean(toml_config)
	config = PipelineConfigParser().parse(load_config(tmp_pathplus / "config.toml")["pipeline"])
	advanced_data_regression.check(plain(config))


def test_parse_mlp_config(tmp_pathplus: PathPlus, advanced_data_regression: AdvancedDataRegressionFixture):
	(tmp_pathplus / "config.toml").write_clean(MLP)
	config = MlpConfigParser().parse(load_config(tmp_pathplus / "config.toml")["mlp"])
	advanced_data_regression.check(plain(config))

	mlp_config = MlpConfig(**config)
	assert mlp_config.hidden_sizes == (32, 16)
	assert mlp_config.dropout_rates == (0.2, 0.0)
	assert mlp_config.gamma_neg == 4.0


@pytest.mark.parametrize(
		"config, expects, match",
		[
				pytest.param(
						MINIMAL_CONFIG.replace('"m.toml"', '1'),
						TypeError,
						r"Invalid type for 'pipeline.model': expected <class 'str'>, got <class 'int'>",
						id="model_wrong_type"
						),
				pytest.param(
						f"{MINIMAL_CONFIG}\n[pipeline.x]\ny = 1\n",
						BadConfigError,
						r"Unknown configuration key 'pipeline.x'",
						id="unknown_table"
						),
				pytest.param(
						MINIMAL_CONFIG.replace('model = "m.toml"', "batchsize = 3"),
						BadConfigError,
						r"Unknown configuration key 'pipeline.batchsize'",
						id="unknown_key"
						),
				pytest.param(
						MINIMAL_CONFIG.replace('model = "m.toml"', "batch-size = true"),
						TypeError,
						r"Invalid type for 'pipeline.batch-size': expected <class 'int'>, got <class 'bool'>",
						id="batch_size_bool"
						),
				pytest.param(
						MINIMAL_CONFIG.replace('model = "m.toml"', 'model = "m.toml"\nbatch-size = 0'),
						BadConfigError,
						r"Invalid value for 'pipeline.batch-size': expected a positive number, got 0",
						id="batch_size_zero"
						),
				pytest.param(
						MINIMAL_CONFIG.replace('model = "m.toml"', 'model = "m.toml"\nlength-mode = "paragraph"'),
						BadConfigError,
						r"Invalid value for 'pipeline.length-mode': expected one of \('document', 'retained'\)",
						id="length_mode"
						),
				pytest.param(
						MINIMAL_CONFIG.replace('model = "m.toml"', ''),
						BadConfigError,
						r"'pipeline.model' is required",
						id="no_model"
						),
				pytest.param(
						'[pipeline]\nmodel = "m.toml"\n\n[pipeline.stage2]\nkind = "builtin_trigger"\nlexicon = "en"\n',
						BadConfigError,
						r"'pipeline.stage1' is required when filtering is enabled",
						id="no_stage1"
						),
				pytest.param(
						f"{STAGE2}lexicon = \"en\"\n",
						BadConfigError,
						r"'pipeline.stage2.kind' is required",
						id="no_kind"
						),
				pytest.param(
						f"{STAGE2}kind = \"oracle\"\n",
						BadConfigError,
						r"Invalid value for 'pipeline.stage2.kind': expected one of \('builtin_majority', ",
						id="unknown_kind"
						),
				pytest.param(
						f"{STAGE2}kind = \"external\"\n",
						BadConfigError,
						r"External backend 'pipeline.stage2' needs a 'command' or an 'endpoint'",
						id="external_without_command"
						),
				pytest.param(
						f"{STAGE2}kind = \"external\"\nendpoint = \"localhost\"\n",
						BadConfigError,
						r"Invalid value for 'pipeline.stage2.endpoint': expected 'host:port', got 'localhost'",
						id="bad_endpoint"
						),
				pytest.param(
						f"{STAGE2}kind = \"external\"\ncommand = [\"python\", 1]\n",
						TypeError,
						r"Invalid type for 'pipeline.stage2.command\[1\]': expected <class 'str'>, got <class 'int'>",
						id="command_wrong_type"
						),
				pytest.param(
						f"{STAGE2}kind = \"external\"\ncommand = []\n",
						BadConfigError,
						r"'pipeline.stage2.command' may not be empty",
						id="empty_command"
						),
				pytest.param(
						f"{STAGE2}kind = \"gold\"\ngold = \"g.jsonl\"\nthreshold = 1\n",
						BadConfigError,
						r"the threshold must lie strictly between 0 and 1",
						id="threshold"
						),
				pytest.param(
						f"{STAGE2}kind = \"builtin_random\"\nseed = true\n",
						TypeError,
						r"Invalid type for 'pipeline.stage2.seed': expected <class 'int'>, got <class 'bool'>",
						id="seed_bool"
						),
				pytest.param(
						f"{STAGE2}kind = \"builtin_trigger\"\n",
						BadConfigError,
						r"'pipeline.stage2.lexicon' is required for backends of kind 'builtin_trigger'",
						id="trigger_without_lexicon"
						),
				pytest.param(
						f"{STAGE2}kind = \"replay\"\n",
						BadConfigError,
						r"'pipeline.stage2.replay' is required for backends of kind 'replay'",
						id="replay_without_recording"
						),
				pytest.param(
						'[pipeline]\nmodel = "m.toml"\nfiltering = false\nstage2 = 1\n',
						TypeError,
						r"Invalid type for 'pipeline.stage2': expected <class 'dict'>, got <class 'int'>",
						id="stage_not_a_table"
						),
				]
		)
def test_parse_pipeline_config_errors(
		config: str,
		expects: Type[Exception],
		match: str,
		tmp_pathplus: PathPlus,
		monkeypatch,
		):
	monkeypatch.delenv("JUDICIAL_FORMALISM_STAGE2_COMMAND", raising=False)
	monkeypatch.delenv("JUDICIAL_FORMALISM_STAGE2_ENDPOINT", raising=False)
	(tmp_pathplus / "config.toml").write_clean(config)

	with pytest.raises(expects, match=match):
		PipelineConfigParser().parse(load_config(tmp_pathplus / "config.toml")["pipeline"])


@pytest.mark.parametrize(
		"config, expects, match",
		[
				pytest.param(
						"hidden-sizes = [32, \"a\"]",
						TypeError,
						r"Invalid type for 'mlp.hidden-sizes\[1\]': expected <class 'int'>, got <class 'str'>",
						id="hidden_sizes_wrong_type"
						),
				pytest.param(
						"dropout-rates = 0.5",
						TypeError,
						r"Invalid type for 'mlp.dropout-rates': expected <class 'list'>, got <class 'float'>",
						id="dropout_not_a_list"
						),
				pytest.param(
						"loss = \"mse\"",
						BadConfigError,
						r"Invalid value for 'mlp.loss': expected one of \('bce', 'weighted_bce', 'asymmetric'\), got 'mse'",
						id="unknown_loss"
						),
				pytest.param(
						"learning-rate = -0.1",
						BadConfigError,
						r"Invalid value for 'mlp.learning-rate': expected a positive number, got -0.1",
						id="negative_learning_rate"
						),
				pytest.param(
						"patience = 2.5",
						TypeError,
						r"Invalid type for 'mlp.patience': expected <class 'int'>, got <class 'float'>",
						id="fractional_patience"
						),
				pytest.param(
						"epochs = 10",
						BadConfigError,
						r"Unknown configuration key 'mlp.epochs'",
						id="unknown_key"
						),
				]
		)
def test_parse_mlp_config_errors(config: str, expects: Type[Exception], match: str, tmp_pathplus: PathPlus):
	(tmp_pathplus / "config.toml").write_clean(f"[mlp]\n{config}\n")

	with pytest.raises(expects, match=match):
		MlpConfigParser().parse(load_config(tmp_pathplus / "config.toml")["mlp"])


def test_environment_overrides(monkeypatch):
	table = {"kind": "external", "command": ["python", "adapter.py"], "timeout": 5}

	monkeypatch.delenv("JUDICIAL_FORMALISM_STAGE1_COMMAND", raising=False)
	monkeypatch.setenv("JUDICIAL_FORMALISM_STAGE1_ENDPOINT", "localhost:9000")
	parsed = StageBackendParser("stage1").parse(table)
	assert parsed["endpoint"] == "localhost:9000"
	assert "command" not in parsed

	monkeypatch.setenv("JUDICIAL_FORMALISM_STAGE1_COMMAND", "python 'my adapter.py' --fast")
	parsed = StageBackendParser("stage1").parse(table)
	assert parsed["command"] == ("python", "my adapter.py", "--fast")
	assert "endpoint" not in parsed

	# only external backends are affected
	parsed = StageBackendParser("stage1").parse({"kind": "gold", "gold": "g.jsonl"})
	assert "command" not in parsed

	monkeypatch.delenv("JUDICIAL_FORMALISM_STAGE1_COMMAND")
	monkeypatch.setenv("JUDICIAL_FORMALISM_STAGE1_ENDPOINT", "nowhere")
	with pytest.raises(BadConfigError, match=r"Invalid value for 'pipeline.stage1.endpoint': .* got 'nowhere'"):
		StageBackendParser("stage1").parse(table)


def test_stage_defaults():
	parsed = StageBackendParser("stage2").parse({"kind": "builtin_random"}, set_defaults=True)
	assert parsed == {"kind": "builtin_random", "threshold": 0.5, "mode": "uniform", "seed": 0}

	parsed = StageBackendParser("stage2").parse({"kind": "builtin_random"})
	assert parsed == {"kind": "builtin_random"}


def test_load_config_invalid_toml(tmp_pathplus: PathPlus):
	(tmp_pathplus / "config.toml").write_clean("[pipeline\nmodel = 1")

	with pytest.raises(BadConfigError, match="config.toml: "):
		load_config(tmp_pathplus / "config.toml")


@pytest.mark.parametrize(
		"path, expected",
		[
				(["mlp"], "mlp"),
				(iter(["mlp"]), "mlp"),
				(("pipeline", "stage1"), "pipeline.stage1"),
				(iter(["pipeline", "stage1", "kind"]), "pipeline.stage1.kind"),
				(["pipeline", "batch-size"], "pipeline.batch-size"),
				(["pipeline", "hello world"], 'pipeline."hello world"'),
				]
		)
def test_construct_path(path: Iterable[str], expected: str):
	assert construct_path(path) == expected


def test_badconfigerror_documentation():

	with pytest.raises(BadConfigError, match="Hello World") as e:
		raise BadConfigError("Hello World", documentation="This is the documentation")

	assert e.value.documentation == "This is the documentation"
