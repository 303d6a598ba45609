"""shopq: grounded product question suggestions for shopping assistants.

Pipeline stages: ingest catalog/review corpora into bounded product
contexts, render generation prompts, call a text backend (remote or mock)
with caching and streaming, parse pipe-separated suggestion output, score
suggestion quality, measure human/auto agreement, curate SFT exports, and
serve ranked suggestions over HTTP.
"""

__version__ = "0.1.0"
