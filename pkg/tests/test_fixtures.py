import shutil

import pytest

from dialmt.fixtures import FIXTURE_DIR, load_manifest, regenerate, verify_fixtures
from dialmt.fixtures.__main__ import main as fixtures_main


def test_all_fixtures_pass():
    results = verify_fixtures()
    assert results
    assert [r.name for r in results if not r.ok] == []


def test_manifest_covers_every_expected_file():
    names = {fx.name for fx in load_manifest()}
    on_disk = {p.name.removesuffix(".expected.txt") for p in FIXTURE_DIR.glob("*.expected.txt")}
    assert names == on_disk


def test_known_values():
    def expected(name):
        return (FIXTURE_DIR / f"{name}.expected.txt").read_text().splitlines()

    assert expected("segmentation")[0] == "H+ yktbw +hA"
    assert expected("connectivity")[0] == "0.75\t0.6"
    assert float(expected("bleu")[0]) == pytest.approx(77.88, abs=0.01)


@pytest.fixture
def scratch(tmp_path):
    d = tmp_path / "fx"
    shutil.copytree(FIXTURE_DIR, d, ignore=shutil.ignore_patterns("*.py", "__pycache__"))
    return d


def test_mismatch_is_reported_with_diff(scratch, capsys):
    (scratch / "connectivity.expected.txt").write_text("0.5\t0.6\n")
    results = {r.name: r for r in verify_fixtures(scratch)}
    bad = results["connectivity"]
    assert not bad.ok
    assert "line 1" in bad.diff[0] and "0.5" in bad.diff[0]
    assert any("<missing>" in line for line in bad.diff)
    assert fixtures_main(["--dir", str(scratch)]) == 1
    assert "FAIL connectivity" in capsys.readouterr().out


def test_tolerance_is_honoured(scratch):
    (scratch / "bleu.expected.txt").write_text("77.885\n")
    assert {r.name: r.ok for r in verify_fixtures(scratch)}["bleu"]
    (scratch / "bleu.expected.txt").write_text("77.9\n")
    assert not {r.name: r.ok for r in verify_fixtures(scratch)}["bleu"]


def test_regeneration_reproduces_checked_in_files(scratch):
    regenerate(scratch)
    for fx in load_manifest():
        assert (scratch / f"{fx.name}.expected.txt").read_bytes() == fx.path("expected.txt").read_bytes()
    assert fixtures_main(["--dir", str(scratch)]) == 0
