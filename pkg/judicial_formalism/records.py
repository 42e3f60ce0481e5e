#!/usr/bin/env python3
#
#  records.py
"""
Self-describing TOML records for trained models and report manifests, plus CSV report tables.

Every record carries ``format_version`` and ``kind`` keys.
Arrays are stored losslessly as base64-encoded little-endian bytes together with
their dtype and shape (see :func:`~.encode_array`).
"""
#
#  Copyright © 2025 The judicial_formalism developers
#
#  Distributed under the MIT License. See LICENSE for details.
#

# stdlib
import base64
import csv
import io
from typing import Any, Dict, Iterable, Iterator, Mapping, MutableMapping, Sequence, Tuple

# 3rd party
import numpy
import toml
from domdf_python_tools.paths import PathPlus
from domdf_python_tools.stringlist import StringList
from domdf_python_tools.typing import PathLike

# this package
from judicial_formalism import FORMAT_VERSION

__all__ = [
		"RecordEncoder",
		"RecordError",
		"encode_array",
		"decode_array",
		"dumps_record",
		"dump_record",
		"load_record",
		"dumps_csv",
		"numbered_lines",
		]


class RecordError(ValueError):
	"""
	Raised when a record file is malformed, of the wrong kind, or of an unsupported format version.
	"""


class RecordEncoder(toml.TomlEncoder):
	"""
	TOML encoder which understands numpy scalars and wraps long arrays onto one item per line.
	"""

	#: The maximum width of a single-line array, after which it will be wrapped.
	max_width: int = 100

	def __init__(self) -> None:
		super().__init__(dict)
		self.dump_funcs[numpy.float64] = lambda v: self.dump_value(float(v))
		self.dump_funcs[numpy.float32] = lambda v: self.dump_value(float(v))
		self.dump_funcs[numpy.int64] = lambda v: self.dump_value(int(v))
		self.dump_funcs[numpy.int32] = lambda v: self.dump_value(int(v))
		self.dump_funcs[numpy.bool_] = lambda v: self.dump_value(bool(v))
		self.dump_funcs[tuple] = self.dump_list

	def dump_list(self, v) -> str:
		"""
		Serialize an array, one element per line if it would not fit in :attr:`~.max_width`.

		:param v:
		"""

		single_line = super().dump_list(list(v))

		if len(single_line) <= self.max_width:
			return single_line

		lines = StringList(['['])

		with lines.with_indent("    ", 1):
			for item in v:
				lines.append(f"{self.dump_value(item)},")

		lines.append(']')

		return str(lines)


def encode_array(array: numpy.ndarray) -> Dict[str, Any]:
	"""
	Encode a numeric array as a TOML-friendly table with full precision and a fixed byte order.

	:param array:

	:returns: A mapping with ``dtype``, ``shape`` and base64 ``data`` keys.
	"""

	array = numpy.asarray(array)

	if array.dtype.kind == 'f':
		dtype = numpy.dtype("<f8")
	elif array.dtype.kind in "iub":
		dtype = numpy.dtype("<i8")
	else:
		raise TypeError(f"Cannot encode arrays of dtype {array.dtype}")

	data = numpy.ascontiguousarray(array, dtype=dtype).tobytes()

	return {
			"dtype": dtype.str,
			"shape": list(array.shape),
			"data": base64.b64encode(data).decode("ASCII"),
			}


def decode_array(table: Mapping[str, Any]) -> numpy.ndarray:
	"""
	Decode a table produced by :func:`~.encode_array`.

	:param table:
	"""

	try:
		dtype = numpy.dtype(table["dtype"])
		shape = tuple(int(dim) for dim in table["shape"])
		raw = base64.b64decode(table["data"].encode("ASCII"), validate=True)
	except (KeyError, TypeError, ValueError) as e:
		raise RecordError(f"Malformed array table: {e}") from e

	array = numpy.frombuffer(raw, dtype=dtype)

	if array.size != int(numpy.prod(shape, dtype=numpy.int64)):
		raise RecordError(f"Array data does not match the declared shape {shape}")

	return array.reshape(shape).astype(dtype.newbyteorder('='))


def dumps_record(kind: str, data: Mapping[str, Any]) -> str:
	"""
	Convert ``data`` to a TOML record of the given kind.

	:param kind: The record kind, e.g. ``'mlp-model'``.
	:param data:
	"""

	record: Dict[str, Any] = {"format_version": FORMAT_VERSION, "kind": kind}
	record.update(data)
	return toml.dumps(record, encoder=RecordEncoder())


def dump_record(kind: str, data: Mapping[str, Any], filename: PathLike) -> str:
	"""
	Write ``data`` as a TOML record of the given kind to ``filename``.

	:param kind: The record kind, e.g. ``'mlp-model'``.
	:param data:
	:param filename:

	:returns: The TOML text written.
	"""

	filename = PathPlus(filename)
	filename.parent.maybe_make(parents=True)

	as_toml = dumps_record(kind, data)
	filename.write_clean(as_toml)
	return as_toml


def load_record(filename: PathLike, kind: str) -> MutableMapping[str, Any]:
	"""
	Read a TOML record, checking its kind and format version.

	:param filename:
	:param kind: The expected record kind.

	:raises RecordError: if the file is not valid TOML, or is not a record of the expected kind and version.
	"""

	filename = PathPlus(filename)

	try:
		record = toml.loads(filename.read_text())
	except toml.TomlDecodeError as e:
		raise RecordError(f"{filename.as_posix()}: {e}") from e

	if record.get("kind") != kind:
		raise RecordError(f"{filename.as_posix()}: expected a {kind!r} record, got {record.get('kind')!r}")

	if record.get("format_version") != FORMAT_VERSION:
		raise RecordError(
				f"{filename.as_posix()}: unsupported format_version {record.get('format_version')!r} "
				f"(expected {FORMAT_VERSION})"
				)

	return record


def dumps_csv(rows: Iterable[Sequence[Any]]) -> str:
	"""
	Format rows as CSV text with ``\\n`` line endings. The first row is normally the header.

	:param rows:
	"""

	buffer = io.StringIO()
	writer = csv.writer(buffer, lineterminator='\n')
	writer.writerows(rows)
	return buffer.getvalue()


def numbered_lines(filename: PathLike) -> Iterator[Tuple[int, str]]:
	"""
	Iterate over the non-blank lines of a line-delimited file, with their line numbers.

	Only ``\\n`` ends a line; Unicode line and paragraph separators inside JSON strings
	stay part of the record. A trailing ``\\r`` is dropped.

	:param filename:
	"""

	for lineno, line in enumerate(PathPlus(filename).read_lines(encoding="UTF-8"), start=1):
		if line.endswith('\r'):
			line = line[:-1]
		if line.strip():
			yield lineno, line
