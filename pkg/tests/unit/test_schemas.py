"""Unit tests for Pydantic schemas validation."""

import pytest
from pydantic import ValidationError

from patchroute.models.bundle import DressingOrder
from patchroute.models.layout import PatchSlot
from patchroute.schemas.archive import SlotEntry
from patchroute.schemas.batch import BatchJob, JobOperation
from patchroute.schemas.edit import DropPatch, ReplacePatch, SetDressingOrder, TrimEnd, TrimPatch, edit_script_adapter
from patchroute.schemas.person import LabelTableFile, PoseFile
from tests.conftest import make_pose


class TestEditScript:
    """Tests for the edit-script command union."""

    def test_commands_are_dispatched_on_op(self):
        """Test that each op name parses into its command model."""
        script = edit_script_adapter.validate_python(
            [
                {"op": "set_dressing_order", "order": "tuck_out"},
                {"op": "trim_patch", "slot": "left_lower_arm", "fraction": 0.5},
                {"op": "drop_patch", "slot": "neck"},
                {"op": "replace_patch", "slot": "torso", "donor": "donor.zip"},
            ]
        )
        assert [type(cmd) for cmd in script] == [SetDressingOrder, TrimPatch, DropPatch, ReplacePatch]
        assert script[0].order is DressingOrder.TUCK_OUT
        assert script[1].slot is PatchSlot.LEFT_LOWER_ARM
        assert script[1].keep_from is TrimEnd.PROXIMAL

    def test_empty_script(self):
        """Test that an empty list is a valid script."""
        assert edit_script_adapter.validate_json("[]") == []

    def test_unknown_op_is_rejected(self):
        """Test that an unknown op fails validation."""
        with pytest.raises(ValidationError):
            edit_script_adapter.validate_python([{"op": "stretch_patch", "slot": "neck"}])

    def test_trim_fraction_out_of_range(self):
        """Test that trim fractions outside [0, 1] are rejected."""
        with pytest.raises(ValidationError):
            TrimPatch(slot=PatchSlot.TORSO, fraction=1.5)
        with pytest.raises(ValidationError):
            TrimPatch(slot=PatchSlot.TORSO, fraction=-0.1)

    def test_extra_fields_are_rejected(self):
        with pytest.raises(ValidationError):
            edit_script_adapter.validate_python([{"op": "drop_patch", "slot": "neck", "scale": 2}])

    def test_unknown_slot(self):
        with pytest.raises(ValidationError):
            DropPatch(slot="tail")


class TestBatchJob:
    """Tests for batch manifest lines."""

    def test_valid_warp_job(self):
        """Test a warp job with defaults."""
        job = BatchJob.model_validate_json('{"id": "j1", "operation": "warp", "source": "alice", "target": "bob"}')
        assert job.operation is JobOperation.WARP
        assert job.category == "auto"
        assert job.erase is True

    def test_warp_needs_a_target(self):
        """Test that warp jobs without a target are rejected."""
        with pytest.raises(ValidationError):
            BatchJob(id="j1", operation="warp", source="alice")

    def test_decompose_without_target(self):
        job = BatchJob(id="j1", operation="decompose", source="alice", category="upper")
        assert job.target is None

    def test_id_must_be_a_safe_name(self):
        """Test that ids usable as directory names are the only ones accepted."""
        with pytest.raises(ValidationError):
            BatchJob(id="../escape", operation="decompose", source="alice")

    def test_unknown_category(self):
        with pytest.raises(ValidationError):
            BatchJob(id="j1", operation="decompose", source="alice", category="shoes")


class TestPersonFiles:
    """Tests for pose files and label tables."""

    def test_pose_round_trip(self):
        """Test that a skeleton survives conversion to the file schema and back."""
        pose = make_pose(dx=3.5)
        assert PoseFile.from_skeleton(pose).to_skeleton() == pose

    def test_pose_needs_eighteen_joints(self):
        """Test that a 17-joint pose is rejected."""
        with pytest.raises(ValidationError):
            PoseFile(canvas=(320, 512), joints=[(0.0, 0.0, 1.0)] * 17)

    def test_pose_canvas_must_be_positive(self):
        with pytest.raises(ValidationError):
            PoseFile(canvas=(0, 512), joints=[(0.0, 0.0, 1.0)] * 18)

    def test_label_table_values(self):
        table = LabelTableFile.model_validate({"labels": {"0": "background", "5": "upper_garment"}})
        assert table.labels[5].value == "upper_garment"

    def test_label_table_rejects_wide_labels(self):
        with pytest.raises(ValidationError):
            LabelTableFile(labels={300: "face"})


class TestSlotEntry:
    """Tests for archive manifest slot entries."""

    def test_homography_needs_nine_values(self):
        with pytest.raises(ValidationError):
            SlotEntry(
                quad=[(0, 0), (1, 0), (1, 1), (0, 1)],
                homography=["1"] * 8,
                file="torso.png",
                sha256="0" * 64,
            )

    def test_digest_must_be_hex(self):
        with pytest.raises(ValidationError):
            SlotEntry(
                quad=[(0, 0), (1, 0), (1, 1), (0, 1)],
                homography=["1"] * 9,
                file="torso.png",
                sha256="z" * 64,
            )
