"""Lexical vulnerability detection for Python source code.

Pipeline: tokenize snippets, train skip-gram token embeddings, fit one of
five classifiers (GNB, decision tree, logistic regression, MLP, BiLSTM)
per vulnerability class, and evaluate with confusion metrics and ROC/AUC.
"""

__version__ = "0.1.0"

# Bumped whenever tokenization rules change; recorded in embedding sidecars.
LEXER_VERSION = 1
