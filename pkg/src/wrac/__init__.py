"""Retrieval-aware chunking for web documents.

Documents are parsed into ID-addressable units, a planner groups unit IDs
into chunks, and the plan is resolved locally back to verbatim text.
"""

__version__ = "0.1.0"
