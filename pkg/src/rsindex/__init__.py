"""Regularised repeat-sales house price indexes and their principal components.

Modules
-------
ingest    sales CSV parsing and repeat-sale pairing
graph     region adjacency and path Laplacians, Kronecker penalty operator
solver    penalised least squares fit, cross-validated gamma search, batching
panel     balanced region-by-month index panel
pca       trends, loadings, explained variance and region scores
analysis  city means, rank correlations, composites, deflation, overlays
synth     synthetic markets with planted factor structure
cli       command line pipeline
"""

__version__ = "0.1.0"
