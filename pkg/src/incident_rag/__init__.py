"""Security-incident analysis: IOC aggregation, retrieval and LLM reporting."""

__version__ = "0.1.0"
