"""Structural VAR toolkit: ingest, growth transforms, pooled VAR, NGML identification, IRFs."""

__version__ = "0.1.0"
