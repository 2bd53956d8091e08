"""Acceptance criteria 1-8, each at its stated tolerance and runtime limit.

Every test prints one ``criterion N: PASS|FAIL ...`` line.  The lines are
also collected and repeated in pytest's terminal summary.
"""

import pytest

import criteria
from mutants import MUTANTS, mutant

TITLES = {
    1: "adjoint suite (dot <= 1e-10, dense <= 1e-12, <= 10 s)",
    2: "first-order gradient vs FD (rel <= 1e-6, <= 60 s)",
    3: "higher-order gradient vs FD (rel <= 1e-5, <= 120 s)",
    4: "mixed partials both orders (<= 1e-10)",
    5: "fully connected equivalence (forward <= 1e-12, gradients <= 1e-10)",
    6: "tangent forward vs directional FD (rel <= 1e-6)",
    7: "toy training decreases J and J + lam R (<= 30 s)",
}


def report(n, ok, detail, title=None):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {title or TITLES[n]} [{detail}]"
    criteria.RESULTS.append(line)
    print("\n" + line)


@pytest.mark.parametrize("n", sorted(TITLES))
def test_criterion(n):
    ok, detail, secs = getattr(criteria, f"criterion{n}")()
    report(n, ok, f"{detail}, {secs:.2f} s")
    assert ok


def test_criterion_8_mutation_sensitivity():
    caught = {}
    for name in MUTANTS:
        with mutant(name):
            caught[name] = criteria.first_failing()
    detail = ", ".join(f"{k} -> criterion {v}" for k, v in caught.items())
    ok = all(v is not None for v in caught.values())
    report(8, ok, detail, "five seeded defects each fail a criterion in 1-3")
    assert ok
