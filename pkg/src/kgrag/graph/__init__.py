from .community import (
    Community,
    CommunityHierarchy,
    Partition,
    UndirectedGraph,
    detect_communities,
    leiden,
    modularity,
)
from .store import KnowledgeGraph, escape_literal, export_statements, load, plot_data, save
from .summaries import serialize_relations, summarize_all, summarize_community

__all__ = [
    "Community",
    "CommunityHierarchy",
    "KnowledgeGraph",
    "Partition",
    "UndirectedGraph",
    "detect_communities",
    "escape_literal",
    "export_statements",
    "leiden",
    "load",
    "modularity",
    "plot_data",
    "save",
    "serialize_relations",
    "summarize_all",
    "summarize_community",
]
