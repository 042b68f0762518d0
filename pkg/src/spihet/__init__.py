"""Structural-heterogeneity analysis for sparse X-ray single-particle-imaging data.

Subpackages cover the full landscape pipeline: synthetic data generation
(geometry, shapes, simulate), sparse-frame storage (frames), 2D classification
EMC (emc), common-line similarity (polar, commonline), CLPCA embedding and the
absolute-embedding regressor (embedding), orientation/gain fitting against a
reference volume (orientfit), iterative phase retrieval and size/volume
analysis (phasing), and pipeline orchestration (pipeline, cli).
"""

__version__ = "0.1.0"
