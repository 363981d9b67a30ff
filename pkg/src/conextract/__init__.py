"""Present-concept extraction with LLMs, plus the evaluation harness around it."""

__version__ = "0.1.0"
