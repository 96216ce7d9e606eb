import json
from dataclasses import replace

import numpy as np
import pytest

from sculpt.backbone.latents import SparseLatent, flatten_coords
from sculpt.errors import ConfigError, ContractViolationError, NumericError
from sculpt.hooks import (
    AttentionCounters,
    RunAttentionContext,
    StagePlan,
    install_hooks,
)
from sculpt.pipeline import (
    RunConfig,
    build_backbone,
    export_asset,
    noise_field,
    register_backbone,
    render_projection,
    run_plain_backbone,
    run_style_guided,
)
from sculpt.sgc import GuidanceConfig

from mock_host import MockHost


class TestRunConfig:
    def test_json_round_trip(self, small_config, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(small_config.to_dict()))
        loaded = RunConfig.from_json(path)
        assert loaded.to_dict() == small_config.to_dict()
        assert loaded.config_hash() == small_config.config_hash()

    def test_missing_config_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.from_json(tmp_path / "nope.json")

    def test_unknown_guidance_key_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"guidance": {"intensity": 3}})

    def test_backbone_kind_required(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"backbone": {}})

    def test_unknown_backbone_lists_registered(self, small_config):
        cfg = replace(small_config, backbone={"kind": "warehouse"})
        with pytest.raises(ConfigError, match="toy"):
            build_backbone(cfg)

    def test_backbone_registration(self, small_config):
        register_backbone("mock-test", lambda params: MockHost(**params))
        try:
            cfg = replace(small_config, backbone={"kind": "mock-test"})
            assert isinstance(build_backbone(cfg), MockHost)
        finally:
            from sculpt.pipeline import BACKBONE_BUILDERS
            BACKBONE_BUILDERS.pop("mock-test")

    def test_missing_content_image_rejected(self, small_config):
        cfg = replace(small_config, content_image="does/not/exist.png")
        with pytest.raises(ConfigError):
            run_style_guided(cfg)

    def test_style_images_required_outside_off_mode(self, small_config):
        cfg = replace(small_config, style_images=())
        with pytest.raises(ConfigError):
            run_style_guided(cfg)

    def test_bad_stage2_noise_value(self):
        with pytest.raises(ConfigError):
            RunConfig(stage2_noise="recycled")

    def test_output_root_env_var(self, small_config, monkeypatch, tmp_path):
        monkeypatch.setenv("SCULPT_ROOT", str(tmp_path))
        cfg = replace(small_config, output_dir="runs/a")
        assert cfg.resolved_output_dir() == tmp_path / "runs" / "a"
        monkeypatch.delenv("SCULPT_ROOT")
        assert replace(small_config, output_dir=None).resolved_output_dir() is None


class TestSharedNoise:
    def test_stage1_branches_share_the_noise_field(self, small_config, small_backbone):
        export = run_style_guided(small_config, backbone=small_backbone)
        noise = export.debug.final.stage1_noise
        np.testing.assert_array_equal(noise["content"], noise["style"])
        np.testing.assert_array_equal(noise["content"], noise["edge"])

    def test_stage2_noise_gathers_one_field_by_coordinate(self, small_config,
                                                          small_backbone):
        out = run_style_guided(small_config, backbone=small_backbone).debug.final
        r = small_backbone.grid_resolution
        field = out.stage2_field
        for branch in ("content", "style", "edge"):
            coords = out.stage2[branch].voxel_coords
            np.testing.assert_array_equal(
                out.stage2_noise[branch], field[flatten_coords(coords, r)])

    def test_stage2_reuse_stage1_noise_flag(self, small_config, small_backbone):
        cfg = replace(small_config, stage2_noise="reuse_stage1")
        out = run_style_guided(cfg, backbone=small_backbone).debug.final
        np.testing.assert_array_equal(out.stage2_field, out.stage1_field)

    def test_noise_is_pure_function_of_seed(self):
        a = noise_field(3, 1, 4, 8)
        b = noise_field(3, 1, 4, 8)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, noise_field(4, 1, 4, 8))
        assert not np.array_equal(a, noise_field(3, 2, 4, 8))


class TestLockStepRun:
    def test_stage_handoff_uses_decoded_structure_exactly(self, small_config,
                                                          small_backbone):
        out = run_style_guided(small_config, backbone=small_backbone).debug.final
        np.testing.assert_array_equal(
            out.voxel_coords["content"],
            small_backbone.decode_voxels(out.stage1["content"]))
        np.testing.assert_array_equal(
            out.voxel_coords["style"],
            small_backbone.decode_voxels(out.stage1["style"]))

    def test_edge_branch_rides_style_voxels_by_default(self, small_config,
                                                       small_backbone):
        out = run_style_guided(small_config, backbone=small_backbone).debug.final
        np.testing.assert_array_equal(out.voxel_coords["edge"],
                                      out.voxel_coords["style"])

    def test_edge_branch_voxels_config_switch(self, small_config, small_backbone):
        cfg = replace(small_config, edge_branch_voxels="content")
        out = run_style_guided(cfg, backbone=small_backbone).debug.final
        np.testing.assert_array_equal(out.voxel_coords["edge"],
                                      out.voxel_coords["content"])

    def test_all_branches_end_at_t0(self, small_config, small_backbone):
        out = run_style_guided(small_config, backbone=small_backbone).debug.final
        for latents in (out.stage1, out.stage2):
            for latent in latents.values():
                assert latent.timestep == 0.0

    def test_content_preserve_copied_once_per_guided_step(self, small_config,
                                                          small_backbone):
        out = run_style_guided(small_config, backbone=small_backbone).debug.final
        g = small_config.guidance
        expected = [("stage1", i) for i in range(g.steps_stage1)] + \
                   [("stage2", i) for i in range(g.steps_stage2)]
        assert out.cp_copies == expected

    def test_mode_off_runs_single_branch(self, small_config, small_backbone):
        cfg = replace(small_config,
                      guidance=replace(small_config.guidance, mode="off"))
        out = run_style_guided(cfg, backbone=small_backbone).debug.final
        assert set(out.stage1) == {"content"} and set(out.stage2) == {"content"}
        assert out.cp_copies == []
        assert out.context.counters.total("cross") == 0

    def test_off_mode_is_bitwise_identical_to_plain_backbone(self, small_config,
                                                             small_backbone):
        cfg = replace(small_config,
                      guidance=replace(small_config.guidance, mode="off"))
        off = run_style_guided(cfg, backbone=small_backbone)
        raw = run_plain_backbone(cfg, backbone=small_backbone)
        np.testing.assert_array_equal(off.voxel_coords, raw.voxel_coords)
        np.testing.assert_array_equal(
            off.debug.final.stage2["content"].features,
            raw.debug.final.stage2["content"].features)

    def test_repeat_runs_bitwise_identical(self, small_config, small_backbone):
        a = run_style_guided(small_config, backbone=small_backbone)
        b = run_style_guided(small_config, backbone=small_backbone)
        np.testing.assert_array_equal(a.debug.final.stage2["content"].features,
                                      b.debug.final.stage2["content"].features)
        np.testing.assert_array_equal(a.colors, b.colors)
        assert a.manifest == b.manifest


class TestCounters:
    def test_cross_counts_are_steps_times_sites(self, small_config, small_backbone):
        out = run_style_guided(small_config, backbone=small_backbone).debug.final
        g = small_config.guidance
        counters = out.context.counters
        s1 = small_backbone.stage_site_ids("stage1")
        s2 = small_backbone.stage_site_ids("stage2")
        assert counters.total("cross", s1) == g.steps_stage1 * len(s1)
        assert counters.total("cross", s2) == g.steps_stage2 * len(s2)

    def test_total_invocations_match_branch_arithmetic(self, small_config,
                                                       small_backbone):
        out = run_style_guided(small_config, backbone=small_backbone).debug.final
        g = small_config.guidance
        counters = out.context.counters
        # dual mode: per step and site, one cross (content) plus six plain
        # self passes (content_uncond, style, style_uncond, edge,
        # edge_uncond, cp)
        for stage, steps in (("stage1", g.steps_stage1), ("stage2", g.steps_stage2)):
            sites = small_backbone.stage_site_ids(stage)
            total = counters.total("cross", sites) + counters.total("self", sites)
            assert total == steps * len(sites) * 7

    def test_mask_trace_covers_every_guided_site_call(self, small_config,
                                                      small_backbone):
        cfg = replace(small_config, trace_masks=True)
        out = run_style_guided(cfg, backbone=small_backbone).debug.final
        g = small_config.guidance
        expected = g.steps_stage1 * 2 + g.steps_stage2 * 2   # depth-2 stages
        assert len(out.context.mask_trace) == expected
        entry = out.context.mask_trace[0]
        assert set(entry) == {"pass", "stage", "step", "site", "k", "policy", "selected"}

    def test_frozen_masks_reuse_step0_selection(self, small_config, small_backbone):
        cfg = replace(small_config, trace_masks=True,
                      guidance=replace(small_config.guidance, freeze_masks=True))
        out = run_style_guided(cfg, backbone=small_backbone).debug.final
        # only step-0 masks are built (and traced); later steps reuse them
        assert {e["step"] for e in out.context.mask_trace} == {0}


class TestHookInstallation:
    def test_install_binds_every_site_once(self, small_backbone):
        ctx = RunAttentionContext(channels=16, seed=0)
        registry = install_hooks(small_backbone, ctx,
                                 expected_sites=small_backbone.declared_site_count())
        assert len(registry.site_ids) == 4
        for sid in registry.site_ids:
            assert small_backbone.get_processor(sid) is registry.processor
        small_backbone.reset_processors()

    def test_site_count_mismatch_is_config_error(self, small_backbone):
        ctx = RunAttentionContext(channels=16, seed=0)
        with pytest.raises(ConfigError):
            install_hooks(small_backbone, ctx, expected_sites=99)

    def test_duplicate_site_ids_rejected(self, small_backbone):
        class DoubledHost:
            def attention_sites(self):
                return list(small_backbone.attention_sites()) * 2

            def set_processor(self, site_id, processor):
                small_backbone.set_processor(site_id, processor)

            def get_processor(self, site_id):
                return small_backbone.get_processor(site_id)

        with pytest.raises(ConfigError, match="duplicate"):
            install_hooks(DoubledHost(), RunAttentionContext(channels=16, seed=0))

    def test_counters_are_monotone_and_keyed_by_kind(self):
        counters = AttentionCounters()
        counters.count("a", "self")
        counters.count("a", "self")
        counters.count("a", "cross")
        assert counters.get("a", "self") == 2
        assert counters.snapshot() == {"a": {"self": 2, "cross": 1}}

    def test_missing_capture_is_a_pipeline_error(self, small_backbone):
        from sculpt.errors import PipelineError
        from sculpt.hooks import SiteCall, StyleGuidedProcessor

        ctx = RunAttentionContext(channels=16, seed=0)
        ctx.configure_stage("stage1", StagePlan(True, 2))
        proc = StyleGuidedProcessor(ctx)
        site = small_backbone.attention_sites()[0]
        with pytest.raises(PipelineError, match="style"):
            proc(site, np.zeros((4, 16)), SiteCall("stage1", 0, "content"))


class TestDefaultToyBinding:
    def test_depth4_two_stage_host_binds_eight_sites(self):
        from sculpt.backbone import ToyBackbone

        host = ToyBackbone()   # default dims: depth 4 per stage
        ctx = RunAttentionContext(channels=host.channels, seed=0)
        registry = install_hooks(host, ctx,
                                 expected_sites=host.declared_site_count())
        assert len(registry.site_ids) == 8
        assert len(ctx.counters.site_ids) == 8


class TestStyleEqualsContent:
    def test_dual_with_identical_inputs_degenerates_to_mode_off(self, small_config,
                                                                small_backbone):
        cfg = replace(small_config, style_images=(small_config.content_image,))
        dual = run_style_guided(cfg, backbone=small_backbone)
        off = run_style_guided(
            replace(small_config, guidance=replace(small_config.guidance, mode="off")),
            backbone=small_backbone)
        np.testing.assert_array_equal(dual.voxel_coords, off.voxel_coords)
        diff = np.abs(dual.debug.final.stage2["content"].features -
                      off.debug.final.stage2["content"].features)
        assert diff.max() <= 1e-5


class TestMockHostConformance:
    def test_full_dual_run_on_grouped_layout(self, image_dir):
        host = MockHost()
        cfg = RunConfig(
            guidance=GuidanceConfig(mode="dual", steps_stage1=4, steps_stage2=3, seed=1),
            content_image=str(image_dir / "content.png"),
            style_images=(str(image_dir / "style.png"),),
        )
        export = run_style_guided(cfg, backbone=host)
        counters = export.debug.final.context.counters
        assert counters.total("cross", host.stage_site_ids("stage1")) == 4 * 3
        assert counters.total("cross", host.stage_site_ids("stage2")) == 3 * 2
        assert export.manifest["voxel_count"] >= 1


class _ExplodingBackbone:
    """Delegates to a toy backbone but emits inf for one branch at one step."""

    def __init__(self, inner, stage, step, branch):
        self._inner = inner
        self._target = (stage, step, branch)

    def __getattr__(self, name):
        return getattr(self._inner, name)

    def velocity(self, stage, latent, cond_tokens, call):
        v = self._inner.velocity(stage, latent, cond_tokens, call)
        if (stage, call.step, call.branch) == self._target:
            v = v.copy()
            v[0, 0] = np.inf
        return v


class TestNumericAbort:
    def test_abort_names_stage_step_and_branch(self, small_config, small_backbone,
                                               tmp_path):
        exploding = _ExplodingBackbone(small_backbone, "stage1", 1, "style")
        cfg = replace(small_config, output_dir=str(tmp_path / "boom"))
        with pytest.raises(NumericError, match="stage1 step 1 branch style"):
            run_style_guided(cfg, backbone=exploding)
        assert not (tmp_path / "boom").exists()


class TestExport:
    def test_export_files_are_byte_identical_across_runs(self, small_config,
                                                         small_backbone, tmp_path):
        blobs = []
        for name in ("a", "b"):
            cfg = replace(small_config, output_dir=str(tmp_path / name),
                          trace_masks=True)
            export = run_style_guided(cfg, backbone=small_backbone)
            blobs.append({
                key: path.read_bytes() for key, path in export.files.items()
            })
        assert blobs[0].keys() == blobs[1].keys()
        for key in blobs[0]:
            assert blobs[0][key] == blobs[1][key], key

    def test_manifest_contents(self, small_config, small_backbone, tmp_path):
        cfg = replace(small_config, output_dir=str(tmp_path / "run"))
        export = run_style_guided(cfg, backbone=small_backbone)
        manifest = json.loads((tmp_path / "run" / "manifest.json").read_text())
        assert manifest["config_hash"] == cfg.config_hash()
        assert manifest["seed"] == cfg.guidance.seed
        assert manifest["k_stage1"] == 1 and manifest["k_stage2"] == 13
        assert manifest["voxel_count"] == export.voxel_coords.shape[0]
        assert (tmp_path / "run" / "voxels.bin").exists()
        assert (tmp_path / "run" / "colors.bin").exists()
        assert (tmp_path / "run" / "projection.png").exists()

    def test_binary_layout_little_endian(self, small_config, small_backbone, tmp_path):
        cfg = replace(small_config, output_dir=str(tmp_path / "run"))
        export = run_style_guided(cfg, backbone=small_backbone)
        count = export.manifest["voxel_count"]
        coords = np.frombuffer((tmp_path / "run" / "voxels.bin").read_bytes(),
                               dtype="<i4").reshape(count, 3)
        colors = np.frombuffer((tmp_path / "run" / "colors.bin").read_bytes(),
                               dtype="<f4").reshape(count, 3)
        np.testing.assert_array_equal(coords, export.voxel_coords)
        np.testing.assert_allclose(colors, export.colors, atol=1e-6)

    def test_single_voxel_projection_has_one_colored_cell(self, small_backbone,
                                                          tmp_path):
        features = np.full((1, 16), 2.0)
        latent = SparseLatent(np.array([[1, 2, 0]]), features, 0.0, grid_resolution=4)
        export = export_asset(latent, small_backbone, output_dir=tmp_path / "one")
        img = render_projection(latent.voxel_coords, export.colors, 4, cell=8)
        cells = img.reshape(4, 8, 4, 8, 3).mean(axis=(1, 3))
        colored = np.flatnonzero(np.abs(cells - 1.0).sum(axis=-1) > 1e-9)
        assert colored.tolist() == [1 * 4 + 2]

    def test_colors_match_readout_oracle(self, small_config, small_backbone):
        export = run_style_guided(small_config, backbone=small_backbone)
        feats = export.debug.final.stage2["content"].features
        w, b = small_backbone.color.w, small_backbone.color.b
        want = 1.0 / (1.0 + np.exp(-(feats @ w + b)))
        np.testing.assert_allclose(export.colors, want, atol=1e-6)

    def test_export_requires_denoised_latent(self, small_backbone):
        latent = SparseLatent(np.array([[0, 0, 0]]), np.ones((1, 16)), 0.5,
                              grid_resolution=4)
        with pytest.raises(ContractViolationError):
            export_asset(latent, small_backbone)
