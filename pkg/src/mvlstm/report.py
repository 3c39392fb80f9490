"""Interpretation report: attention distribution per variable vs. Granger tests."""

from __future__ import annotations

from .attention import rank_variables
from .data import SeriesFrame
from .granger import GrangerRanking, granger_rank
from .modelio import ModelFile
from .train import make_windows, predict


def agreement(attention_order: list[str], ranking: GrangerRanking, exogenous: list[str],
              top_k: int) -> dict:
    """Compare an attention ordering with Granger results over exogenous variables.

    ``top_k`` is clipped to the number of exogenous variables.
    """
    att_exo = [v for v in attention_order if v in exogenous]
    granger_order = [r.variable for r in ranking.results]
    k = max(0, min(top_k, len(att_exo)))
    causal = ranking.causal
    top_causal = att_exo[:len(causal)]
    return {
        "k": k,
        "attention_top_k": att_exo[:k],
        "granger_top_k": granger_order[:k],
        "top_k_overlap": len(set(att_exo[:k]) & set(granger_order[:k])),
        "granger_causal": causal,
        "causal_in_attention_top": len(set(top_causal) & set(causal)),
        "partition_match": set(top_causal) == set(causal),
    }


def build_report(model: ModelFile, frame: SeriesFrame, splits=(0.7, 0.15, 0.15),
                 bins: int = 20, lag: int = 5, level: float = 0.05, top_k: int = 4) -> dict:
    """Attention statistics on the test windows of ``frame`` plus Granger comparison."""
    ds = make_windows(frame, model.shape.window, splits, stats=(model.mean, model.std))
    _, alpha = predict(model.params, ds.test.x)
    ranks = rank_variables(alpha, frame.columns, bins)
    ranking = granger_rank(frame, lag, level)
    by_var = {r.variable: r for r in ranking.results}

    variables = []
    for r in ranks:
        g = by_var.get(r.name)
        variables.append({
            "variable": r.name,
            "mean": r.mean,
            "std": r.std,
            "bin_edges": [float(e) for e in r.bin_edges],
            "counts": [int(c) for c in r.counts],
            "granger_f": None if g is None else g.f_stat,
            "granger_p_value": None if g is None else g.p_value,
            "granger_causal": None if g is None else bool(g.causal),
            "granger_error": ranking.errors.get(r.name),
        })
    return {
        "target": frame.target,
        "n_test_windows": int(len(alpha)),
        "bins": bins,
        "granger_lag": lag,
        "granger_level": level,
        "attention_rank": [r.name for r in ranks],
        "variables": variables,
        "agreement": agreement([r.name for r in ranks], ranking, frame.exogenous, top_k),
    }

