"""Every acceptance criterion at its stated size and tolerance, one PASS/FAIL line each."""
import pytest

from lagfib import acceptance, jsonio

KEYS = [c.key for c in acceptance.CRITERIA]


@pytest.mark.slow
@pytest.mark.parametrize("key", KEYS)
def test_criterion(key, capsys):
    (res,) = acceptance.run_criteria([key], seed=0, quick=False)
    with capsys.disabled():
        print(f"\n{'PASS' if res.passed else 'FAIL'} {res.key}: {res.title}")
        if not res.passed:
            print(jsonio.dumps({"observed": res.observed, "error": res.error}))
    assert res.error is None, res.error
    assert res.passed, res.observed
