"""Acceptance gate: the twelve end-to-end criteria at their stated tolerances.

Each test prints a single ``criterion N: PASS|FAIL`` line (visible without -s)
followed by the key measured values, then asserts the criterion's verdict.
Run just this gate with ``pytest tests/test_acceptance.py -v``.
"""

import pytest

from mlmc import verify

# keys worth echoing next to the verdict, per criterion
SHOW = {
    2: ("max_abs_error", "tolerance"),
    3: ("h_half_value", "h_half_expected", "ratios"),
    4: ("tau", "max_sample"),
    6: ("exact_rational", "float_max_error"),
    8: ("constant", "q_minus_half_l1_max"),
    9: ("max_cos_error", "two_state_phase"),
    10: ("C_total", "bound_with_slack", "gamma_hat"),
    12: ("identical", "returncodes"),
}


def _summary(i, res):
    parts = [f"{k}={res[k]!r}" for k in SHOW.get(i, ()) if k in res]
    if i == 11:
        parts += [f"d={d}: {v['multilevel_cost']} vs cold {v['cold_start_cost']} (ratio {v['ratio']:.4f})"
                  for d, v in res["per_d"].items()]
    if "seconds" in res:
        parts.append(f"{res['seconds']:.2f}s")
    return "; ".join(parts)


@pytest.mark.parametrize("i", range(1, 13))
def test_criterion(i, capsys):
    res = verify.CRITERIA[i]()
    line = f"criterion {i:2d} ({res.get('name', '')}): {'PASS' if res['pass'] else 'FAIL'}"
    with capsys.disabled():
        print(f"\n{line}\n    {_summary(i, res)}")
    assert res["pass"], f"{line}: {res}"
