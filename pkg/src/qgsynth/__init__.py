"""qgsynth: synthetic-context toolkit for question generation.

Synthesizes background contexts for question-answer pairs through prompted
LLM endpoints, assembles and mixes question-generation training datasets,
profiles synthetic-context quality, and scores generated questions with
from-scratch reference metrics.
"""

__version__ = "0.1.0"
