#!/usr/bin/env python3
#
#  analysis.py
"""
Descriptive statistics of labelled corpora: argument distributions, holistic label
distributions, temporal trends and argument shares.

Every function here works the same way on gold annotations and on pipeline predictions.
:func:`~.write_report` writes them all as plot-ready CSV files:

``distribution.csv``
	``scope, argument_type, frequency, existence, n_documents``: paragraphs annotated with
	each type, and documents containing it, per court and overall (scope ``all``).

``holistic.csv``
	``court, formalistic, non_formalistic, total, formalistic_pct, non_formalistic_pct``.

``trends.csv``
	One row per court (and ``all``) per bucket of years, with the four trend series
	and their rolling means (see :class:`~.TrendPoint`). Undefined ratios are empty and
	``ratio_defined`` is ``false``.

``shares.csv``
	``argument_type, group, count, share_pct`` for the filtered period.

A ``manifest.toml`` beside them records the format version, the date filter and the
unfiltered shares.
"""
#
#  Copyright © 2025 The judicial_formalism developers
#
#  Distributed under the MIT License. See LICENSE for details.
#

# stdlib
import datetime
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

# 3rd party
from domdf_python_tools.paths import PathPlus
from domdf_python_tools.typing import PathLike

# this package
from judicial_formalism.corpus import ARGUMENT_TYPES, ArgumentType, Corpus, Court, Document, HolisticLabel
from judicial_formalism.metrics import format_percent
from judicial_formalism.records import dump_record, dumps_csv

__all__ = [
		"TypeCounts",
		"DistributionReport",
		"HolisticRow",
		"HolisticDistribution",
		"TrendPoint",
		"TrendSeries",
		"ShareReport",
		"PeriodChange",
		"SERIES",
		"argument_distribution",
		"holistic_distribution",
		"temporal_trends",
		"share_report",
		"period_comparison",
		"write_report",
		]

logger = logging.getLogger(__name__)

#: The names of the four trend series.
SERIES: Tuple[str, ...] = ("nf_f_ratio", "mean_nf_arguments", "nf_decision_share", "zero_nf_share")

#: A date, or a year standing for its first (as a start) or last (as an end) day.
DateBound = Union[datetime.date, int, None]

_ALL = "all"


def _bounds(start: DateBound, end: DateBound) -> Tuple[Optional[datetime.date], Optional[datetime.date]]:
	if isinstance(start, int):
		start = datetime.date(start, 1, 1)
	if isinstance(end, int):
		end = datetime.date(end, 12, 31)
	if start is not None and end is not None and start > end:
		raise ValueError(f"The date filter ends ({end}) before it starts ({start})")
	return start, end


def _scope_name(court: Optional[Court]) -> str:
	return _ALL if court is None else court.value


@dataclass(frozen=True)
class TypeCounts:
	"""
	Per argument type, the number of paragraphs annotated with it and the number of documents containing it.
	"""

	frequency: Mapping[ArgumentType, int]
	existence: Mapping[ArgumentType, int]
	n_documents: int

	@property
	def n_arguments(self) -> int:  # noqa: D102
		return sum(self.frequency.values())

	@classmethod
	def of(cls, documents: Iterable[Document]) -> "TypeCounts":
		"""
		Count the argument types of ``documents``.

		:param documents:
		"""

		frequency = dict.fromkeys(ARGUMENT_TYPES, 0)
		existence = dict.fromkeys(ARGUMENT_TYPES, 0)
		n_documents = 0

		for document in documents:
			n_documents += 1
			counts = document.type_counts()
			for argument_type in ARGUMENT_TYPES:
				frequency[argument_type] += counts[argument_type]
				existence[argument_type] += bool(counts[argument_type])

		return cls(frequency, existence, n_documents)


@dataclass(frozen=True)
class DistributionReport:
	"""
	Argument type counts, overall and per court.
	"""

	overall: TypeCounts
	courts: Mapping[Court, TypeCounts]
	date_from: Optional[datetime.date] = None
	date_to: Optional[datetime.date] = None

	def rows(self) -> List[List[Any]]:
		"""
		Returns the report as a table, starting with a header row.
		"""

		table: List[List[Any]] = [["scope", "argument_type", "frequency", "existence", "n_documents"]]

		for court, counts in [*self.courts.items(), (None, self.overall)]:
			for argument_type in ARGUMENT_TYPES:
				table.append([
						_scope_name(court),
						argument_type.value,
						counts.frequency[argument_type],
						counts.existence[argument_type],
						counts.n_documents,
						])

		return table


def argument_distribution(corpus: Corpus, date_from: DateBound = None, date_to: DateBound = None) -> DistributionReport:
	"""
	Count argument types by paragraph and by document, optionally within a date range.

	:param corpus:
	:param date_from: The first day (or year) included.
	:param date_to: The last day (or year) included.
	"""

	start, end = _bounds(date_from, date_to)
	documents = corpus.between(start, end)

	return DistributionReport(
			overall=TypeCounts.of(documents),
			courts={court: TypeCounts.of(d for d in documents if d.court is court) for court in Court},
			date_from=start,
			date_to=end,
			)


class HolisticRow(NamedTuple):
	"""
	Holistic label counts of one court, or of the whole corpus when ``court`` is :py:obj:`None`.
	"""

	court: Optional[Court]
	formalistic: int
	non_formalistic: int

	@property
	def total(self) -> int:  # noqa: D102
		return self.formalistic + self.non_formalistic

	@property
	def formalistic_share(self) -> float:  # noqa: D102
		return self.formalistic / self.total if self.total else 0.0

	@property
	def non_formalistic_share(self) -> float:  # noqa: D102
		return self.non_formalistic / self.total if self.total else 0.0


@dataclass(frozen=True)
class HolisticDistribution:
	"""
	Holistic label counts per court, followed by the total.
	"""

	rows: Tuple[HolisticRow, ...]

	def __getitem__(self, court: Optional[Court]) -> HolisticRow:
		for row in self.rows:
			if row.court == court:
				return row
		raise KeyError(court)

	@property
	def total(self) -> HolisticRow:  # noqa: D102
		return self[None]

	def table(self, rounding: str = "down") -> List[List[Any]]:
		"""
		Returns the counts and percentages (one decimal place) as a table with a header row.

		:param rounding: See :func:`judicial_formalism.metrics.format_percent`.
		"""

		table: List[List[Any]] = [[
				"court",
				"formalistic",
				"non_formalistic",
				"total",
				"formalistic_pct",
				"non_formalistic_pct",
				]]

		for row in self.rows:
			table.append([
					_scope_name(row.court),
					row.formalistic,
					row.non_formalistic,
					row.total,
					format_percent(row.formalistic_share, rounding),
					format_percent(row.non_formalistic_share, rounding),
					])

		return table


def _label_counts(court: Optional[Court], documents: Sequence[Document]) -> HolisticRow:
	return HolisticRow(
			court,
			sum(d.holistic_label is HolisticLabel.FORMALISTIC for d in documents),
			sum(d.holistic_label is HolisticLabel.NON_FORMALISTIC for d in documents),
			)


def holistic_distribution(corpus: Corpus) -> HolisticDistribution:
	"""
	Count formalistic and non-formalistic decisions per court.

	Both courts always get a row, so a single-court corpus has a row of zeros for the other.

	:param corpus:

	:raises UnlabeledDocumentError: if any document lacks a holistic label.
	"""

	corpus.require_labels()
	documents = list(corpus)

	rows = [_label_counts(court, [d for d in documents if d.court is court]) for court in Court]
	rows.append(_label_counts(None, documents))

	return HolisticDistribution(tuple(rows))


class _SeriesValues(NamedTuple):
	n_documents: int
	nf_f_ratio: Optional[float]
	mean_nf_arguments: float
	nf_decision_share: float
	zero_nf_share: float


def _series_values(documents: Sequence[Document]) -> _SeriesValues:
	formalistic_arguments = 0
	non_formalistic_arguments = 0
	zero_nf = 0

	for document in documents:
		f = sum(t.is_formalistic for p in document.paragraphs for t in p.argument_types)
		nf = document.n_arguments - f
		formalistic_arguments += f
		non_formalistic_arguments += nf
		zero_nf += nf == 0

	n = len(documents)
	if not n:
		return _SeriesValues(0, None, 0.0, 0.0, 0.0)

	return _SeriesValues(
			n_documents=n,
			nf_f_ratio=non_formalistic_arguments / formalistic_arguments if formalistic_arguments else None,
			mean_nf_arguments=non_formalistic_arguments / n,
			nf_decision_share=sum(d.holistic_label is HolisticLabel.NON_FORMALISTIC for d in documents) / n,
			zero_nf_share=zero_nf / n,
			)


@dataclass(frozen=True)
class TrendPoint:
	"""
	The four trend series of one court (or all courts) in one bucket of years.

	``nf_f_ratio`` is the number of non-formalistic arguments per formalistic argument,
	:py:obj:`None` when the bucket has no formalistic arguments. ``mean_nf_arguments`` is the
	mean number of non-formalistic arguments per decision, ``nf_decision_share`` the share
	of non-formalistic decisions and ``zero_nf_share`` the share of decisions without any
	non-formalistic argument.

	The ``rolling`` mapping holds each series averaged over this bucket and its two
	neighbours (those that exist and are defined).
	"""

	court: Optional[Court]
	first_year: int
	last_year: int
	n_documents: int
	nf_f_ratio: Optional[float]
	mean_nf_arguments: float
	nf_decision_share: float
	zero_nf_share: float
	rolling: Mapping[str, Optional[float]] = field(default_factory=dict)

	@property
	def ratio_defined(self) -> bool:  # noqa: D102
		return self.nf_f_ratio is not None

	def value(self, series: str) -> Optional[float]:
		"""
		Returns the value of one of the :data:`~.SERIES`.

		:param series:
		"""

		if series not in SERIES:
			raise KeyError(series)
		return getattr(self, series)


@dataclass(frozen=True)
class TrendSeries:
	"""
	Trend points ordered by court (``all`` last) and then by bucket.
	"""

	points: Tuple[TrendPoint, ...]
	bucket: int

	def for_court(self, court: Optional[Court]) -> List[TrendPoint]:
		"""
		Returns the points of one court, or of all courts together for :py:obj:`None`.

		:param court:
		"""

		return [p for p in self.points if p.court == court]

	def rows(self) -> List[List[Any]]:
		"""
		Returns the series as a table, starting with a header row.
		"""

		table: List[List[Any]] = [[
				"court",
				"first_year",
				"last_year",
				"n_documents",
				*SERIES,
				"ratio_defined",
				*(f"{name}_rolling3" for name in SERIES),
				]]

		def cell(value: Optional[float]) -> str:
			return '' if value is None else repr(float(value))

		for point in self.points:
			table.append([
					_scope_name(point.court),
					point.first_year,
					point.last_year,
					point.n_documents,
					*(cell(point.value(name)) for name in SERIES),
					str(point.ratio_defined).lower(),
					*(cell(point.rolling.get(name)) for name in SERIES),
					])

		return table


def _mean_defined(values: Iterable[Optional[float]]) -> Optional[float]:
	window = [v for v in values if v is not None]
	if not window:
		return None
	return sum(window) / len(window)


def temporal_trends(corpus: Corpus, bucket: int = 1, origin: Optional[int] = None) -> TrendSeries:
	"""
	Compute the four trend series per court and overall, in buckets of ``bucket`` years.

	Buckets without decisions are skipped. Rolling means run over consecutive buckets.

	:param corpus:
	:param bucket: The width of each bucket, in years.
	:param origin: The first year of the first bucket. Defaults to the earliest decision year.

	:raises UnlabeledDocumentError: if any document lacks a holistic label.
	"""

	if bucket < 1:
		raise ValueError(f"The bucket width must be at least one year, got {bucket}")

	corpus.require_labels()
	documents = list(corpus)
	points: List[TrendPoint] = []

	if not documents:
		return TrendSeries((), bucket)

	if origin is None:
		origin = min(d.decision_date.year for d in documents)

	def bucket_of(document: Document) -> int:
		return origin + (document.decision_date.year - origin) // bucket * bucket  # type: ignore[operator]

	for court in (*Court, None):
		selected = [d for d in documents if court is None or d.court is court]
		starts = sorted({bucket_of(d) for d in selected})
		values = [_series_values([d for d in selected if bucket_of(d) == start]) for start in starts]

		for index, (start, v) in enumerate(zip(starts, values)):
			neighbours = [
					values[j] for j in range(max(index - 1, 0), min(index + 2, len(values)))
					if abs(starts[j] - start) <= bucket
					]
			rolling = {name: _mean_defined(getattr(n, name) for n in neighbours) for name in SERIES}

			points.append(
					TrendPoint(
							court=court,
							first_year=start,
							last_year=start + bucket - 1,
							n_documents=v.n_documents,
							nf_f_ratio=v.nf_f_ratio,
							mean_nf_arguments=v.mean_nf_arguments,
							nf_decision_share=v.nf_decision_share,
							zero_nf_share=v.zero_nf_share,
							rolling=rolling,
							)
					)

	undefined = sum(not p.ratio_defined for p in points)
	if undefined:
		logger.info("%d trend bucket(s) have no formalistic arguments; their ratio is undefined", undefined)

	return TrendSeries(tuple(points), bucket)


@dataclass(frozen=True)
class ShareReport:
	"""
	The percentage of all arguments belonging to each type.
	"""

	counts: Mapping[ArgumentType, int]
	date_from: Optional[datetime.date] = None
	date_to: Optional[datetime.date] = None

	@property
	def n_arguments(self) -> int:  # noqa: D102
		return sum(self.counts.values())

	@property
	def shares(self) -> Dict[ArgumentType, float]:
		"""
		Per type, ``100 * count / n_arguments``.
		"""

		return {t: 100 * self.counts[t] / self.n_arguments for t in ARGUMENT_TYPES}

	def combined(self, *types: Union[ArgumentType, str]) -> float:
		"""
		Returns the combined percentage of several types.

		:param types:
		"""

		return 100 * sum(self.counts[ArgumentType(t)] for t in types) / self.n_arguments

	def rows(self, rounding: str = "down") -> List[List[Any]]:
		"""
		Returns the shares as a table with a header row.

		:param rounding: See :func:`judicial_formalism.metrics.format_percent`.
		"""

		table: List[List[Any]] = [["argument_type", "group", "count", "share_pct"]]
		for t in ARGUMENT_TYPES:
			share = format_percent(self.counts[t] / self.n_arguments, rounding)
			table.append([t.value, t.group.value, self.counts[t], share])
		return table


def share_report(corpus: Corpus, date_from: DateBound = None, date_to: DateBound = None) -> ShareReport:
	"""
	Compute the share of each argument type among all arguments within a date range.

	:param corpus:
	:param date_from: The first day (or year) included.
	:param date_to: The last day (or year) included.

	:raises ValueError: if there are no arguments within the range.
	"""

	start, end = _bounds(date_from, date_to)
	counts = TypeCounts.of(corpus.between(start, end)).frequency

	if not sum(counts.values()):
		raise ValueError(f"No arguments between {start or 'the start'} and {end or 'the end'} of the corpus")

	return ShareReport(counts, start, end)


class PeriodChange(NamedTuple):
	"""
	The change of one trend series between two periods.
	"""

	court: Optional[Court]
	series: str
	before: Optional[float]
	after: Optional[float]

	@property
	def relative_change(self) -> Optional[float]:
		"""
		``(after - before) / before``, or :py:obj:`None` when undefined.
		"""

		if self.before is None or self.after is None or self.before == 0:
			return None
		return (self.after - self.before) / self.before


def period_comparison(
		corpus: Corpus,
		periods: Tuple[Tuple[int, int], Tuple[int, int]] = ((2003, 2013), (2014, 2023)),
		) -> List[PeriodChange]:
	"""
	Compare the trend series between two periods, per court and overall.

	:param corpus:
	:param periods: Two inclusive ``(first_year, last_year)`` ranges.

	:raises UnlabeledDocumentError: if any document lacks a holistic label.
	"""

	corpus.require_labels()
	(first_before, last_before), (first_after, last_after) = periods
	before_corpus = corpus.between(*_bounds(first_before, last_before))
	after_corpus = corpus.between(*_bounds(first_after, last_after))

	changes = []
	for court in (*Court, None):
		before = _series_values([d for d in before_corpus if court is None or d.court is court])
		after = _series_values([d for d in after_corpus if court is None or d.court is court])

		for name in SERIES:
			changes.append(
					PeriodChange(
							court,
							name,
							getattr(before, name) if before.n_documents else None,
							getattr(after, name) if after.n_documents else None,
							)
					)

	return changes


def write_report(
		corpus: Corpus,
		directory: PathLike,
		date_from: DateBound = None,
		date_to: DateBound = None,
		bucket: int = 1,
		rounding: str = "down",
		) -> Dict[str, PathPlus]:
	"""
	Write the analysis tables of ``corpus`` to ``directory``.

	The distribution, holistic and share tables cover the date range; the trend series
	cover the same range, bucketed by ``bucket`` years.

	:param corpus:
	:param directory:
	:param date_from: The first day (or year) included.
	:param date_to: The last day (or year) included.
	:param bucket:
	:param rounding: See :func:`judicial_formalism.metrics.format_percent`.

	:returns: The paths written, keyed by file name.
	"""

	start, end = _bounds(date_from, date_to)
	filtered = corpus.between(start, end)

	directory = PathPlus(directory)
	directory.maybe_make(parents=True)

	shares = share_report(corpus, start, end)
	tables = {
			"distribution.csv": argument_distribution(corpus, start, end).rows(),
			"holistic.csv": holistic_distribution(filtered).table(rounding),
			"trends.csv": temporal_trends(filtered, bucket).rows(),
			"shares.csv": shares.rows(rounding),
			}

	written = {}
	for name, rows in tables.items():
		path = directory / name
		path.write_text(dumps_csv(rows), encoding="UTF-8")
		written[name] = path

	manifest: Dict[str, Any] = {
			"filter": {},
			"corpus": {"n_documents": len(filtered), "n_arguments": shares.n_arguments},
			"files": sorted(tables),
			"shares": {t.value: share for t, share in shares.shares.items()},
			}
	if start is not None:
		manifest["filter"]["from"] = start
	if end is not None:
		manifest["filter"]["to"] = end

	whole = TypeCounts.of(corpus)
	if whole.n_arguments:
		manifest["unfiltered-shares"] = {t.value: share for t, share in ShareReport(whole.frequency).shares.items()}

	written["manifest.toml"] = directory / "manifest.toml"
	dump_record("analysis-report", manifest, written["manifest.toml"])

	logger.info("Wrote the analysis of %d documents to %s", len(filtered), directory.as_posix())
	return written
