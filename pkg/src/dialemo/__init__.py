"""Dialogue emotion recognition with causal utterance pairs.

A desk-scale pipeline: EmotionLines-format ingestion, causal pair
construction with per-dataset text preparation, WordPiece-style encoding, a
miniature transformer encoder trained from scratch with exact analytic
gradients, both pre-training objectives (masked LM + next sentence, and
emotion-hashtag tweets), class-weight-warmed fine-tuning, and the matching
evaluation report plus a bag-of-words logistic-regression baseline.
"""

__version__ = "0.1.0"
