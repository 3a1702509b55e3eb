"""kernelsmith: sentence expansion toolkit.

Builds kernel/original parallel data by LM-scored deletion compression,
trains a small attention seq2seq with a novelty-focused objective, and
decodes expansions with controlled novelty-curve sampling.
"""

__version__ = "0.1.0"
