"""Grounding and semantic-quality evaluation of sentence representations.

CCA-based cross-modal retrieval, cosine/Spearman STS scoring, distance
correlation between representation spaces, and Pearson meta-correlation of
task metrics.
"""

__version__ = "0.1.0"
