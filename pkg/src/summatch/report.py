"""JSON evaluation reports and their self-consistency check."""

from __future__ import annotations

import math
from typing import Sequence

from . import __version__
from .metrics import SummaryScore, f_measure
from .protocol import CandidateEvaluation


def _score(s: SummaryScore, pairs: list) -> dict:
    return {
        "m": s.m,
        "n_candidate": s.n_candidate,
        "n_truth": s.n_truth,
        "f": s.f,
        "cus_a": s.cus_a,
        "cus_e": s.cus_e,
        "clipped": s.clipped,
        "pairs": pairs,
    }


def evaluation_entry(video_id: str, summarizer_id: str, ev: CandidateEvaluation, panel_size: int) -> dict:
    users = []
    for k, uid in enumerate(ev.user_ids):
        users.append({
            "user_id": uid,
            "ground_truth": list(ev.ground_truths[k]),
            "candidate": _score(ev.candidate_scores[k], ev.candidate_matches[k]),
            "uniform": _score(ev.uniform_scores[k], ev.uniform_matches[k]),
            "c_u": ev.record.c_u_per_user[k],
        })
    return {
        "video_id": video_id,
        "summarizer_id": summarizer_id,
        "config": ev.config.to_dict(),
        "theta_resolved": ev.theta,
        "candidate": list(ev.candidate),
        "uniform": list(ev.uniform),
        "n_users": len(ev.user_ids),
        "incomplete_panel": len(ev.user_ids) < panel_size,
        "users": users,
        "c_u_mean": ev.record.c_u_mean,
        "f_candidate_mean": ev.record.f_candidate_mean,
        "f_uniform_mean": ev.record.f_uniform_mean,
    }


def evaluation_report(entries: Sequence[dict], *, seed: int, config: dict | None = None) -> dict:
    return {
        "tool": "summatch",
        "version": __version__,
        "seed": seed,
        "config": config,
        "results": list(entries),
    }


def check_report(report: dict, tol: float = 0.0) -> list[str]:
    """Recompute every F from (m, sizes) and every c_U from its F pair.

    Returns a list of discrepancies (empty when the report is consistent).
    """
    problems = []
    for entry in report["results"]:
        where = f"{entry['video_id']}/{entry['summarizer_id']}"
        terms = []
        for user in entry["users"]:
            fs = []
            for side in ("candidate", "uniform"):
                s = user[side]
                f = f_measure(s["m"], s["n_candidate"], s["n_truth"])
                if abs(f - s["f"]) > tol:
                    problems.append(f"{where} user {user['user_id']} {side}: F {s['f']} != {f}")
                fs.append(s["f"])
            if abs((fs[0] - fs[1]) - user["c_u"]) > tol:
                problems.append(f"{where} user {user['user_id']}: c_U {user['c_u']} != {fs[0] - fs[1]}")
            terms.append(user["c_u"])
        mean = math.fsum(terms) / len(terms)
        if abs(mean - entry["c_u_mean"]) > max(tol, 1e-12):
            problems.append(f"{where}: C_U {entry['c_u_mean']} != {mean}")
    return problems
