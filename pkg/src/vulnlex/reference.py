"""Per-class reference figures for the full-scale comparison.

Values are fractions. ``ACCURACY_F`` holds (accuracy, f_score) for every
model kind; ``BILSTM`` adds precision and recall for the sequence model.
The macro averages these produce are checked by the acceptance suite.
"""
from __future__ import annotations

from .evaluation import ConfusionCounts, EvaluationReport

CLASSES = ("sql_injection", "xss", "command_injection", "xsrf", "remote_code_execution",
           "path_disclosure", "open_redirect")

ACCURACY_F = {
    "gnb": {"sql_injection": (0.810, 0.0063), "xss": (0.088, 0.160),
            "command_injection": (0.718, 0.245), "xsrf": (0.142, 0.236),
            "remote_code_execution": (0.095, 0.159), "path_disclosure": (0.118, 0.208),
            "open_redirect": (0.144, 0.237)},
    "tree": {"sql_injection": (0.805, 0.0097), "xss": (0.915, 0.158),
             "command_injection": (0.861, 0.036), "xsrf": (0.861, 0.018),
             "remote_code_execution": (0.907, 0.0074), "path_disclosure": (0.858, 0.051),
             "open_redirect": (0.866, 0.011)},
    "logreg": {"sql_injection": (0.837, 0.512), "xss": (0.948, 0.689),
               "command_injection": (0.960, 0.837), "xsrf": (0.896, 0.565),
               "remote_code_execution": (0.982, 0.895), "path_disclosure": (0.958, 0.813),
               "open_redirect": (0.867, 0.489)},
    "mlp": {"sql_injection": (0.876, 0.653), "xss": (0.954, 0.726),
            "command_injection": (0.931, 0.704), "xsrf": (0.939, 0.768),
            "remote_code_execution": (0.989, 0.938), "path_disclosure": (0.976, 0.898),
            "open_redirect": (0.890, 0.580)},
    "bilstm": {"sql_injection": (0.982, 0.953), "xss": (0.988, 0.930),
               "command_injection": (0.991, 0.967), "xsrf": (0.983, 0.936),
               "remote_code_execution": (0.994, 0.965), "path_disclosure": (0.993, 0.973),
               "open_redirect": (0.975, 0.907)},
}

# precision, recall for the sequence model
BILSTM_PR = {"sql_injection": (0.968, 0.938), "xss": (0.948, 0.913),
             "command_injection": (0.978, 0.957), "xsrf": (0.967, 0.907),
             "remote_code_execution": (0.972, 0.959), "path_disclosure": (0.977, 0.969),
             "open_redirect": (0.925, 0.890)}

# macro averages stated alongside the per-class figures, in percent
BILSTM_AVERAGES = {"accuracy": "98.6", "f_score": "94.7", "precision": "96.2", "recall": "93.3",
                   "auc": "99.3"}


def bilstm_reports() -> list[EvaluationReport]:
    """One report per class carrying the reference sequence-model metrics.

    Confusion counts are unknown for these figures and left at zero; AUC was
    only given as an average, so it is unset.
    """
    out = []
    for vc in CLASSES:
        acc, f = ACCURACY_F["bilstm"][vc]
        p, r = BILSTM_PR[vc]
        out.append(EvaluationReport(vc, "bilstm", "reference", acc, p, r, f, None,
                                    ConfusionCounts(0, 0, 0, 0)))
    return out
