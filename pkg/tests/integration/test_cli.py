"""Integration tests for the command-line entry point."""

import json
import logging
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from patchroute.main import main
from patchroute.models.layout import GarmentCategory, PatchSlot
from patchroute.models.pose import Joint
from patchroute.repositories import artifact_repository
from patchroute.repositories.patchset_repository import load_patchset
from patchroute.services.warp_service import warp_patchset
from tests.conftest import CANVAS_FLAG, make_person, make_pose, seed_person, seed_script


@pytest.fixture(autouse=True)
def isolated_run(tmp_path, monkeypatch):
    """Run from an empty directory and restore root logging afterwards."""
    monkeypatch.chdir(tmp_path)
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)


@pytest.fixture
def run(people_root):
    """Invoke the CLI with the shared canvas and people root."""

    def invoke(*args: str) -> int:
        flags = ["--canvas", CANVAS_FLAG, "--people-root", str(people_root), "--log-level", "WARNING"]
        return main([*flags, *map(str, args)])

    return invoke


def last_diagnostic(stderr: str) -> dict:
    return json.loads(stderr.strip().splitlines()[-1])


def tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def write_manifest(path: Path, lines: list[str]) -> Path:
    path.write_text("\n".join(lines) + "\n")
    return path


# ─── decompose ───────────────────────────────────────────────────────────────


class TestDecompose:
    """Tests for the decompose subcommand."""

    def test_upper_garment_has_ten_slots(self, run, tmp_path, capsys):
        out = tmp_path / "alice.zip"
        assert run("decompose", "alice", out) == 0
        patches = load_patchset(out)
        assert patches.category is GarmentCategory.UPPER
        assert len(patches.patches) == 10
        assert "10 slots" in capsys.readouterr().out

    def test_occluded_wrist_gives_nine_slots(self, run, people_root, tmp_path):
        person = make_person(make_pose(confidence={Joint.L_WRIST: 0.0}), person_id="dan")
        seed_person(people_root, "dan", person=person)
        assert run("decompose", "dan", tmp_path / "dan") == 0
        patches = load_patchset(tmp_path / "dan")
        assert len(patches.patches) == 9
        assert PatchSlot.LEFT_LOWER_ARM not in patches.patches

    def test_outfit_defaults_to_upper(self, run, tmp_path):
        assert run("decompose", "bob", tmp_path / "bob.zip") == 0
        assert load_patchset(tmp_path / "bob.zip").category is GarmentCategory.UPPER

    def test_explicit_lower_category(self, run, tmp_path):
        assert run("decompose", "bob", tmp_path / "bob.zip", "--category", "lower") == 0
        assert len(load_patchset(tmp_path / "bob.zip").patches) == 5

    def test_missing_parsing(self, run, people_root, tmp_path, capsys):
        (people_root / "alice" / "parsing.png").unlink()
        assert run("decompose", "alice", tmp_path / "alice.zip") == 2
        assert last_diagnostic(capsys.readouterr().err)["code"] == "MissingFile"
        assert not (tmp_path / "alice.zip").exists()

    def test_canvas_mismatch(self, people_root, tmp_path, capsys):
        code = main(["--canvas", "256x256", "--people-root", str(people_root), "decompose", "alice", "x.zip"])
        assert code == 2
        assert last_diagnostic(capsys.readouterr().err)["code"] == "DimensionMismatch"

    def test_invalid_config(self, tmp_path, capsys):
        config = tmp_path / "run.toml"
        config.write_text("[erase]\nalpha = 2.0\n")
        assert main(["--config", str(config), "inspect", "anything"]) == 2
        assert last_diagnostic(capsys.readouterr().err)["code"] == "ConfigError"


# ─── retarget / masks ────────────────────────────────────────────────────────


class TestRetarget:
    """Tests for the retarget and masks subcommands."""

    @pytest.fixture
    def archive(self, run, tmp_path):
        path = tmp_path / "alice.zip"
        assert run("decompose", "alice", path) == 0
        return path

    def test_alpha_zero_keeps_the_full_warp(self, run, archive, tmp_path, people_root):
        out = tmp_path / "warp"
        assert run("--alpha", "0", "retarget", archive, "carol", out) == 0
        mask = artifact_repository.load_mask(out / "mask.png")
        expected = warp_patchset(load_patchset(archive), make_pose(dx=12.0, dy=6.0))[1]
        np.testing.assert_array_equal(mask, expected.mask)
        assert artifact_repository.load_warped_garment(out / "warped.png") == expected
        homographies = artifact_repository.load_homographies(out / "homographies.json")
        assert len(homographies) == 10

    def test_fixed_seed_is_reproducible(self, run, archive, tmp_path):
        for name in ("a", "b"):
            assert run("--alpha", "1", "retarget", archive, "carol", tmp_path / name, "--erase-seed", "5") == 0
        assert tree(tmp_path / "a") == tree(tmp_path / "b")
        assert run("--alpha", "0", "retarget", archive, "carol", tmp_path / "full") == 0
        erased = artifact_repository.load_mask(tmp_path / "a" / "mask.png").sum()
        full = artifact_repository.load_mask(tmp_path / "full" / "mask.png").sum()
        assert 0.75 * full <= erased < full

    def test_alpha_after_the_subcommand(self, run, archive, tmp_path):
        assert run("--alpha", "1", "retarget", archive, "carol", tmp_path / "global", "--erase-seed", "5") == 0
        assert run("retarget", archive, "carol", tmp_path / "local", "--alpha", "1", "--erase-seed", "5") == 0
        assert tree(tmp_path / "global") == tree(tmp_path / "local")
        assert run("--alpha", "1", "retarget", archive, "carol", tmp_path / "full", "--alpha", "0") == 0
        assert run("--alpha", "0", "retarget", archive, "carol", tmp_path / "plain") == 0
        assert tree(tmp_path / "full") == tree(tmp_path / "plain")

    def test_masks_partition_the_garment(self, run, archive, tmp_path, people_root):
        warp = tmp_path / "warp"
        assert run("--alpha", "0", "retarget", archive, "carol", warp) == 0
        out = tmp_path / "masks"
        parsing = people_root / "carol" / "parsing.png"
        assert run("masks", warp / "warped.png", warp / "mask.png", parsing, out) == 0
        m_g = artifact_repository.load_mask(out / "garment_mask.png")
        align = artifact_repository.load_mask(out / "align_mask.png")
        misalign = artifact_repository.load_mask(out / "misalign_mask.png")
        assert m_g.any()
        assert not (align & misalign).any()
        np.testing.assert_array_equal(align | misalign, m_g)
        clipped = artifact_repository.load_warped_garment(out / "warped_in_garment.png")
        assert not (clipped.mask & ~m_g).any()

    def test_masks_without_garment(self, run, archive, tmp_path, capsys):
        warp = tmp_path / "warp"
        assert run("retarget", archive, "carol", warp) == 0
        parsing = tmp_path / "bare.png"
        Image.fromarray(make_person(wear=()).parsing.labels).save(parsing)
        assert run("masks", warp / "warped.png", warp / "mask.png", parsing, tmp_path / "m") == 2
        assert last_diagnostic(capsys.readouterr().err)["code"] == "NoGarmentPixels"


# ─── edit ────────────────────────────────────────────────────────────────────


class TestEdit:
    """Tests for the edit subcommand."""

    @pytest.fixture
    def archives(self, run, tmp_path):
        assert run("decompose", "alice", tmp_path / "upper.zip") == 0
        assert run("decompose", "bob", tmp_path / "lower.zip", "--category", "lower") == 0
        return tmp_path / "upper.zip", tmp_path / "lower.zip"

    def test_empty_script_is_byte_identical(self, run, archives, tmp_path, capsys):
        upper, lower = archives
        script = seed_script(tmp_path / "script.json", [])
        out = tmp_path / "edited"
        assert run("edit", "carol", script, out, "--upper", upper, "--lower", lower) == 0
        assert (out / "upper.zip").read_bytes() == upper.read_bytes()
        assert (out / "lower.zip").read_bytes() == lower.read_bytes()
        assert (out / "preview.png").is_file()
        assert "dressing order none" in capsys.readouterr().out

    def test_script_edits_the_archives(self, run, archives, tmp_path, capsys):
        upper, lower = archives
        script = seed_script(
            tmp_path / "script.json",
            [
                {"op": "drop_patch", "slot": "left_lower_arm"},
                {"op": "trim_patch", "slot": "right_lower_arm", "fraction": 0.5},
                {"op": "set_dressing_order", "order": "tuck_in"},
            ],
        )
        out = tmp_path / "edited"
        assert run("edit", "carol", script, out, "--upper", upper, "--lower", lower) == 0
        edited = load_patchset(out / "upper.zip")
        assert PatchSlot.LEFT_LOWER_ARM not in edited.patches
        assert not edited.patches[PatchSlot.RIGHT_LOWER_ARM].valid_mask[64:].any()
        assert "tuck_in" in capsys.readouterr().out

    def test_replace_from_relative_donor(self, run, archives, tmp_path):
        upper, _ = archives
        assert run("decompose", "carol", tmp_path / "donor.zip") == 0
        script = seed_script(tmp_path / "script.json", [{"op": "replace_patch", "slot": "torso", "donor": "donor.zip"}])
        out = tmp_path / "edited"
        assert run("edit", "bob", script, out, "--upper", upper) == 0
        edited = load_patchset(out / "upper.zip")
        donor = load_patchset(tmp_path / "donor.zip")
        assert edited.patches[PatchSlot.TORSO].same_as(donor.patches[PatchSlot.TORSO])

    def test_person_directory_as_layer(self, run, people_root, tmp_path):
        script = seed_script(tmp_path / "script.json", [])
        out = tmp_path / "edited"
        assert run("edit", "carol", script, out, "--upper", people_root / "alice") == 0
        assert len(load_patchset(out / "alice.zip").patches) == 10

    def test_no_layer(self, run, tmp_path, capsys):
        script = seed_script(tmp_path / "script.json", [])
        assert run("edit", "carol", script, tmp_path / "edited") == 2
        assert last_diagnostic(capsys.readouterr().err)["code"] == "MissingLayer"

    def test_malformed_script(self, run, archives, tmp_path, capsys):
        upper, _ = archives
        script = seed_script(tmp_path / "script.json", [{"op": "stretch_patch"}])
        assert run("edit", "carol", script, tmp_path / "edited", "--upper", upper) == 2
        assert last_diagnostic(capsys.readouterr().err)["code"] == "MalformedJson"


# ─── inspect ─────────────────────────────────────────────────────────────────


class TestInspect:
    """Tests for the inspect subcommand."""

    def test_archive(self, run, tmp_path, capsys):
        assert run("decompose", "alice", tmp_path / "alice.zip") == 0
        capsys.readouterr()
        assert run("inspect", tmp_path / "alice.zip") == 0
        out = capsys.readouterr().out
        assert "category: upper" in out
        assert "slots: 10" in out
        assert "torso" in out

    def test_person(self, run, people_root, capsys):
        assert run("inspect", people_root / "bob") == 0
        out = capsys.readouterr().out
        assert "person: bob" in out
        assert "category: upper_and_lower" in out
        assert "confident joints: 18/18" in out


# ─── batch ───────────────────────────────────────────────────────────────────


class TestBatch:
    """Tests for the batch subcommand."""

    def test_empty_manifest(self, run, tmp_path, capsys):
        manifest = write_manifest(tmp_path / "jobs.jsonl", [])
        assert run("batch", manifest, tmp_path / "out") == 0
        assert "0 jobs" in capsys.readouterr().out

    def test_invalid_job_fails_the_run(self, run, tmp_path):
        manifest = write_manifest(
            tmp_path / "jobs.jsonl",
            [
                '{"id": "j1", "operation": "decompose", "source": "alice"}',
                '{"id": "j2", "operation": "warp", "source": "alice", "target": "carol"}',
                '{"id": "j3", "operation": "warp", "source": "alice"}',
            ],
        )
        out = tmp_path / "out"
        assert run("batch", manifest, out) == 1
        assert (out / "j1" / "patches.zip").is_file()
        assert (out / "j2" / "warped.png").is_file()
        assert sorted(p.name for p in out.iterdir()) == ["j1", "j2", "line-3"]

        failed = json.loads((out / "line-3" / "status.json").read_text())
        assert failed["status"] == "failed"
        assert failed["error"]["code"] == "MalformedJson"
        ok = json.loads((out / "j2" / "status.json").read_text())
        assert ok["status"] == "succeeded"
        assert ok["outputs"] == ["warped.png", "mask.png", "homographies.json"]

    def test_parallelism_does_not_change_outputs(self, run, tmp_path):
        manifest = write_manifest(
            tmp_path / "jobs.jsonl",
            [
                '{"id": "a", "operation": "warp", "source": "alice", "target": "carol"}',
                '{"id": "b", "operation": "warp", "source": "bob", "target": "alice", "category": "lower"}',
                '{"id": "c", "operation": "decompose", "source": "carol"}',
                '{"id": "d", "operation": "decompose", "source": "nobody"}',
                "",
                "not json",
            ],
        )
        assert run("--jobs", "1", "batch", manifest, tmp_path / "serial") == 1
        assert run("--jobs", "4", "batch", manifest, tmp_path / "parallel") == 1
        serial, parallel = tree(tmp_path / "serial"), tree(tmp_path / "parallel")
        assert serial == parallel
        assert "line-6/status.json" in serial


# ─── usage errors ────────────────────────────────────────────────────────────


class TestUsage:
    """Tests for argument errors reported as diagnostics."""

    def test_unknown_subcommand(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["frobnicate"])
        assert excinfo.value.code == 2
        diagnostic = last_diagnostic(capsys.readouterr().err)
        assert diagnostic["code"] == "UsageError"
        assert "frobnicate" in diagnostic["message"]

    def test_bad_alpha_value(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["retarget", "a.zip", "carol", "out", "--alpha", "high"])
        assert excinfo.value.code == 2
        diagnostic = last_diagnostic(capsys.readouterr().err)
        assert diagnostic["code"] == "UsageError"
        assert diagnostic["details"]["usage"].startswith("usage: patchroute retarget")

    def test_alpha_is_not_a_masks_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["masks", "g.png", "m.png", "p.png", "out", "--alpha", "0.5"])
        assert excinfo.value.code == 2
        assert last_diagnostic(capsys.readouterr().err)["code"] == "UsageError"
