"""Multidomain few-shot engagement modelling over precomputed embeddings.

Binary engagement labels are relabelled into disjoint per-game classes
(class = 2 * game_id + y), a single dense + ReLU + L2-normalise projection
head is trained with prototypical / matching / supervised-contrastive
episodic objectives, and models are evaluated episodically against a
conventional binary cross-entropy baseline.
"""

__version__ = "0.1.0"
