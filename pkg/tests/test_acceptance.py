"""The ten acceptance criteria on the shipped configurations.

Each test prints one PASS/FAIL line; run with ``pytest tests/test_acceptance.py -s``
or look for the ``criterion N`` lines in the verbose output.
"""
import pytest

from bergman_rays.acceptance import TITLES, run_acceptance


@pytest.fixture(scope="module")
def results(shipped_configs):
    return {r.number: r for r in run_acceptance(shipped_configs.values())}


@pytest.mark.parametrize("number", sorted(TITLES))
def test_criterion(results, number, capsys):
    r = results[number]
    with capsys.disabled():
        print("\n" + r.line())
    assert r.passed, r.detail
