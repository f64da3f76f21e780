"""Knowledge-graph retrieval-augmented generation for chemical-process documents."""

__version__ = "0.1.0"
