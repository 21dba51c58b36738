"""Desk-scale librarian pipeline: spine perception, belief fusion, sorted re-shelving."""

from librarian.bookdb import BookRecord, SpineColorModel, load_database, lookup
from librarian.config import PipelineConfig

__all__ = ["BookRecord", "SpineColorModel", "PipelineConfig", "load_database", "lookup"]
__version__ = "0.1.0"
