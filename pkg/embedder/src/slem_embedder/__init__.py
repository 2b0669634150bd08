"""slem-embedder: sentence-embedding export for the shotlocker engine."""

from .encoder import EncodingError, HFTextEncoder, encode_texts, resolve_max_length
from .export import ExportManifest, dataset_checksum, export_embeddings, manifest_path
from .records import Record, read_records
from .slemfile import SlemFormatError, read_matrix, write_matrix

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "EncodingError",
    "HFTextEncoder",
    "encode_texts",
    "resolve_max_length",
    "ExportManifest",
    "dataset_checksum",
    "export_embeddings",
    "manifest_path",
    "Record",
    "read_records",
    "SlemFormatError",
    "read_matrix",
    "write_matrix",
]
