"""One test per acceptance criterion at its pinned tolerance.

Each check's verdict line is echoed in the terminal summary.
"""

import pytest

from sdsres.acceptance import CRITERIA, DESCRIPTIONS, Context
from sdsres.config import RunConfig

from .conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="module")
def ctx():
    return Context(RunConfig())


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA), ids=lambda k: f"criterion_{k}")
def test_criterion(ctx, number):
    checks = CRITERIA[number](ctx)
    passed = all(c.passed for c in checks)
    ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'} criterion {number} ({DESCRIPTIONS[number]})")
    for c in checks:
        ACCEPTANCE_LINES.append("    " + c.line())
    failed = [c.line() for c in checks if not c.passed]
    assert not failed, "\n".join(failed)


@pytest.mark.slow
def test_verify_reports_byte_identical(tmp_path, monkeypatch):
    from sdsres import cli

    blobs = []
    for k in range(2):
        monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / str(k)))
        cli.main(["verify", "--quiet"])
        blobs.append([(tmp_path / str(k) / "verify" / n).read_bytes() for n in ("report.json", "report.csv")])
    same = blobs[0] == blobs[1]
    ACCEPTANCE_LINES.append(f"{'PASS' if same else 'FAIL'} criterion 8 (two full verify runs byte-identical)")
    assert same
