"""wordprobe: evaluate a chat LLM's knowledge of a word list.

Sends a battery of yes/no probe prompts for every word in a list,
parses the answers, and aggregates them into per-prompt positive rates
and answer-combination histograms. Runs headless from the CLI or behind
the HTTP service in :mod:`wordprobe.service`.
"""

__version__ = "0.1.0"
