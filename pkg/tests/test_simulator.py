"""Tests for the kitchen simulator."""

import numpy as np
import pytest

from skillbench.core.exceptions import DegenerateGeometryError, NoParticlesError, UnknownTaskError
from skillbench.models.skills import ForceLevel, ObjectGeometry, SkillLabel, TrajectoryKind
from skillbench.services.library import build_library, get_template, trajectory_waypoints
from skillbench.services.simulator import (
    APPEARANCE_SIZE,
    FLOW_SIZE,
    MAX_TOOL_SPEED,
    SCENE_SIZE,
    FlowVideo,
    execute_template,
    footprint_mask,
    generic_scene,
    make_scene,
    run_template,
    run_waypoints,
    scene_for_skill,
    scrape_cleared,
    stir_dispersion,
    task_for_verb,
    task_progress,
    wipe_coverage,
)

from tests.conftest import TEST_STEPS

SIDE_TO_SIDE_FIRM = get_template(TrajectoryKind.SIDE_TO_SIDE_LONG, ForceLevel.HIGH)


def test_footprint_mask_counts_cell_centers() -> None:
    mask = footprint_mask((32.0, 32.0), (2.0, 2.0))
    assert mask.sum() == 16
    assert mask[30:34, 30:34].all()


def test_flow_video_shape_is_checked() -> None:
    with pytest.raises(ValueError):
        FlowVideo(np.zeros((3, 32, 32)))


def test_episode_shapes(wipe_skill: SkillLabel) -> None:
    scene = scene_for_skill(wipe_skill, 0, seed=0)
    episode = run_template(scene, SIDE_TO_SIDE_FIRM, steps=21, seed=1)
    assert episode.video.frames.shape == (20, FLOW_SIZE, FLOW_SIZE, 2)
    assert episode.video.frames.dtype == np.float32
    assert len(episode.progress) == 21
    assert episode.appearance.shape == (21, APPEARANCE_SIZE, APPEARANCE_SIZE)
    assert np.all((episode.progress.values >= 0) & (episode.progress.values <= 1))


def test_execution_is_deterministic(wipe_skill: SkillLabel) -> None:
    scene = scene_for_skill(wipe_skill, 0, seed=0)
    first = run_template(scene, SIDE_TO_SIDE_FIRM, steps=21, seed=5)
    second = run_template(scene, SIDE_TO_SIDE_FIRM, steps=21, seed=5)
    np.testing.assert_array_equal(first.video.frames, second.video.frames)
    np.testing.assert_array_equal(first.progress.values, second.progress.values)


def test_execution_leaves_the_scene_alone(stir_skill: SkillLabel) -> None:
    scene = scene_for_skill(stir_skill, 0, seed=0)
    before = scene.particles.copy()
    video, progress, final = execute_template(
        scene, get_template(TrajectoryKind.LARGE_CIRCLE, ForceLevel.HIGH), steps=21, seed=2
    )
    np.testing.assert_array_equal(scene.particles, before)
    assert not scene.coverage.any()
    assert final is not scene
    assert video.frame_count == 20
    assert len(progress) == 21


def test_tool_speed_is_capped(wipe_skill: SkillLabel) -> None:
    """Coarse steps are clipped to the speed limit, so flow never exceeds it."""
    scene = scene_for_skill(wipe_skill, 0, seed=0)
    episode = run_template(scene, SIDE_TO_SIDE_FIRM, steps=5, seed=0)
    speed = np.hypot(episode.video.frames[..., 0], episode.video.frames[..., 1])
    assert speed.max() <= MAX_TOOL_SPEED + 1e-5


def test_still_tool_has_no_flow(wipe_skill: SkillLabel) -> None:
    scene = scene_for_skill(wipe_skill, 0, seed=0)
    waypoints = np.tile(np.asarray(scene.recipient.center), (6, 1))
    episode = run_waypoints(scene, waypoints, 0.9, seed=0)
    assert not episode.video.frames.any()


def test_wipe_without_force_cleans_nothing(wipe_skill: SkillLabel) -> None:
    scene = scene_for_skill(wipe_skill, 0, seed=0)
    waypoints = trajectory_waypoints(TrajectoryKind.SIDE_TO_SIDE_LONG, scene.recipient, 21)
    episode = run_waypoints(scene, waypoints, 0.0, seed=0)
    assert episode.progress.final == 0.0


def test_firm_wipe_makes_progress(wipe_skill: SkillLabel) -> None:
    scene = scene_for_skill(wipe_skill, 0, seed=0)
    episode = run_template(scene, SIDE_TO_SIDE_FIRM, steps=61, seed=0)
    assert episode.progress.final > 0.3
    assert np.all(np.diff(episode.progress.values) >= 0)


def test_spread_needs_sauce_under_the_tool() -> None:
    """Spreading only paints while the tool carries sauce."""
    recipient = ObjectGeometry(center=(32.0, 32.0), half_extents=(18.0, 12.0))
    scene = make_scene("spread", recipient, (4.0, 8.0))
    waypoints = trajectory_waypoints(TrajectoryKind.SIDE_TO_SIDE_LONG, recipient, 21)
    episode = run_waypoints(scene, waypoints, 0.9, seed=0)
    assert episode.progress.final == 0.0


def test_scrape_counts_particles_near_the_edge() -> None:
    recipient = ObjectGeometry(center=(32.0, 32.0), half_extents=(20.0, 14.0))
    particles = np.asarray([[32.0, 32.0], [50.0, 32.0]])
    scene = make_scene("scrape", recipient, (12.0, 2.0), particles=particles)
    assert scrape_cleared(scene) == 0.5


def test_stir_starts_at_zero(stir_skill: SkillLabel) -> None:
    scene = scene_for_skill(stir_skill, 0, seed=0)
    assert scene.initial_particle_count == 20
    assert stir_dispersion(scene) == 0.0


def test_particle_metrics_need_particles() -> None:
    recipient = ObjectGeometry(center=(32.0, 32.0), half_extents=(16.0, 16.0))
    scene = make_scene("stir", recipient, (3.0, 3.0))
    with pytest.raises(NoParticlesError):
        stir_dispersion(scene)
    with pytest.raises(NoParticlesError):
        scrape_cleared(scene)


def test_generic_scene_has_no_metric() -> None:
    scene = generic_scene("bowl", 0, seed=0)
    assert scene.task is None
    with pytest.raises(UnknownTaskError):
        task_progress(scene)
    episode = run_template(scene, SIDE_TO_SIDE_FIRM, steps=11, seed=0)
    assert not episode.progress.values.any()


def test_unknown_verb() -> None:
    with pytest.raises(UnknownTaskError):
        task_for_verb("juggle")


def test_scene_variations(wipe_skill: SkillLabel) -> None:
    """Same variation, same scene; another variation moves the recipient."""
    a = scene_for_skill(wipe_skill, 0, seed=0)
    b = scene_for_skill(wipe_skill, 0, seed=0)
    c = scene_for_skill(wipe_skill, 1, seed=0)
    assert a.recipient == b.recipient
    assert a.recipient != c.recipient
    assert a.recipient.label == "plate"


def test_wipe_coverage_counts_clean_recipient_cells() -> None:
    plate = ObjectGeometry(center=(32.0, 32.0), half_extents=(8.0, 4.0))
    scene = make_scene("wipe", plate, (3.0, 3.0))
    assert wipe_coverage(scene) == 0.0
    scene.coverage[28:32, :] = True
    assert wipe_coverage(scene) == 0.5
    scene.coverage[:] = True
    assert wipe_coverage(scene) == 1.0


def test_wipe_coverage_needs_a_footprint() -> None:
    sliver = ObjectGeometry(center=(32.0, 32.0), half_extents=(0.2, 0.2))
    with pytest.raises(DegenerateGeometryError):
        wipe_coverage(make_scene("wipe", sliver, (3.0, 3.0)))


@pytest.mark.parametrize("key", ["wipe:cloth:plate", "spread:spatula:bread"])
def test_coverage_never_decreases(key: str) -> None:
    scene = scene_for_skill(SkillLabel.parse(key), 0, seed=0)
    for template in build_library():
        episode = run_template(scene, template, steps=TEST_STEPS, seed=3)
        coverage = episode.progress.values
        assert np.all(np.diff(coverage) >= 0.0), template.id
        assert not (episode.scene.coverage & ~scene.recipient_mask()).any()


@pytest.mark.parametrize("key", ["scrape:scraper:board", "stir:spoon:pan", "spread:spatula:bread"])
@pytest.mark.parametrize(
    "kind", [TrajectoryKind.PUSH_AWAY, TrajectoryKind.LARGE_CIRCLE, TrajectoryKind.ZIGZAG_SWEEP]
)
def test_particles_are_conserved_every_frame(key: str, kind: TrajectoryKind) -> None:
    scene = scene_for_skill(SkillLabel.parse(key), 0, seed=0)
    count = scene.initial_particle_count
    assert count > 0
    waypoints = trajectory_waypoints(kind, scene.recipient, TEST_STEPS)
    for frames in range(2, TEST_STEPS + 1):
        state = run_waypoints(scene, waypoints[:frames], ForceLevel.HIGH.coefficient, seed=0).scene
        assert state.particles.shape == (count, 2)
        assert len(state.particle_kinds) == count
        assert np.all((state.particles >= 0.0) & (state.particles < SCENE_SIZE))


@pytest.mark.parametrize("force", list(ForceLevel))
def test_side_to_side_wipes_more_than_forward_back(
    wipe_skill: SkillLabel, force: ForceLevel
) -> None:
    """On the wide plate a lateral stroke covers more than a forward-back one."""
    scene = scene_for_skill(wipe_skill, 0, seed=0)
    side = run_template(scene, get_template(TrajectoryKind.SIDE_TO_SIDE_LONG, force), 61, seed=4)
    forward = run_template(
        scene, get_template(TrajectoryKind.FORWARD_BACK_LONG, force), 61, seed=4
    )
    assert side.progress.final > forward.progress.final
