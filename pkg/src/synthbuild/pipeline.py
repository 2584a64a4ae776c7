"""Dataset orchestration: class schedule, per-sample generation, stats and benchmark.

A sample is a pure function of ``(config, index)``; every random decision is
drawn from streams seeded by :func:`derive_sample_seed`, so the dataset bytes
do not depend on how many worker processes produced it.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .asset_io import (read_json, write_float_depth, write_json, write_manifest, write_metadata,
                       write_mtl, write_obj, write_ply, write_png)
from .config import DatasetConfig, derive_sample_seed, dump_config
from .detailing import ModuleLibrary, place_modules
from .geometry import ComponentClass, bounding_sphere, sample_point_cloud
from .massing import TypologyClass, build_massing, hidden_face_mask, massing_to_mesh
from .render import (DEFAULT_BACKEND, encode_normal_map, normalize_depth, rasterize,
                     segmentation_image)
from .rng import stream
from .scene import MaterialTable, assign_materials, build_material_table, sample_camera, sample_light

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STAGES = ("massing", "detailing", "sampling", "render", "io")


def plan_classes(n_samples: int, classes: Sequence[TypologyClass]) -> list[TypologyClass]:
    """Round-robin schedule in typology-code order; per-class counts differ by at most one."""
    if not classes:
        raise ValueError("classes must be non-empty")
    order = sorted(set(classes))
    return [order[i % len(order)] for i in range(n_samples)]


def sample_id(index: int) -> str:
    return f"{index:06d}"


@dataclass
class Assets:
    library: ModuleLibrary
    materials: MaterialTable


def load_assets(cfg: DatasetConfig) -> Assets:
    return Assets(ModuleLibrary.load(cfg.modules_dir),
                  build_material_table(cfg.use_materials, cfg.textures_dir))


@dataclass
class SampleRecord:
    index: int
    sample_id: str
    typology: TypologyClass
    seed: int
    status: str = "ok"
    error: str | None = None
    files: list[str] = field(default_factory=list)  # relative to the dataset root
    views: list[dict] = field(default_factory=list)
    n_triangles: int = 0
    component_triangles: dict[str, int] = field(default_factory=dict)
    timings_ms: dict[str, float] = field(default_factory=lambda: dict.fromkeys(STAGES, 0.0))

    def manifest_entry(self) -> dict:
        return {
            "index": self.index, "sample_id": self.sample_id, "class_code": int(self.typology),
            "class_name": self.typology.key, "seed": self.seed, "status": self.status,
            "error": self.error, "files": self.files, "triangles": self.n_triangles,
            "component_triangles": self.component_triangles,
        }


class _Timer:
    def __init__(self, record: SampleRecord):
        self.record = record

    def __call__(self, stage: str):
        return _Stage(self.record, stage)


class _Stage:
    def __init__(self, record: SampleRecord, stage: str):
        self.record, self.stage = record, stage

    def __enter__(self):
        self.t0 = time.perf_counter()

    def __exit__(self, *exc):
        self.record.timings_ms[self.stage] += (time.perf_counter() - self.t0) * 1e3


def generate_sample(cfg: DatasetConfig, index: int, out_dir: str | Path,
                    assets: Assets | None = None, backend: str | None = None) -> SampleRecord:
    """Build, annotate and write one building under ``out_dir/<sample_id>/``."""
    out_dir = Path(out_dir)
    seed = derive_sample_seed(cfg.seed, index)
    cls = plan_classes(index + 1, cfg.classes)[index]
    sid = sample_id(index)
    rec = SampleRecord(index, sid, cls, seed)
    timer = _Timer(rec)
    emit = cfg.emit
    sdir = out_dir / sid

    if assets is None:
        with timer("io"):
            assets = load_assets(cfg)

    with timer("massing"):
        massing = build_massing(cfg, cls, stream(seed, "massing"))
        envelope = massing_to_mesh(massing, cfg.lod)
    with timer("detailing"):
        mesh = place_modules(massing, envelope, assets.library, cfg.lod, stream(seed, "detailing"),
                             cfg.grammar.p_balcony, cfg.grammar)
    rec.n_triangles = mesh.n_triangles
    rec.component_triangles = {c.key: int((mesh.component == c).sum()) for c in ComponentClass}

    cloud = None
    if emit.cloud_ply:
        with timer("sampling"):
            mask = None
            if cfg.cull_hidden_faces:
                mask = ~hidden_face_mask(massing, mesh)
            cloud = sample_point_cloud(mesh, cfg.points_per_cloud, stream(seed, "cloud"), mask)

    table = assets.materials
    by_id = table.by_id()
    bsphere = bounding_sphere(mesh)
    files: list[str] = []
    view0_assignment = None
    for k in range(cfg.views_per_model):
        rng = stream(seed, "view", k)
        cam = sample_camera(bsphere, cfg.camera, rng, cfg.image_size)
        light = sample_light(cfg.light, rng)
        assignment = assign_materials(massing, table, cfg.p_uniform_texture, rng)
        if k == 0:
            view0_assignment = assignment
        view_files: dict[str, str] = {}
        if emit.any_view_output():
            with timer("render"):
                fb = rasterize(mesh, cam, light, by_id, assignment, backend=backend)
            with timer("io"):
                p = f"v{k}_"
                if emit.render_png:
                    write_png(fb.rgb, sdir / f"{p}render.png")
                    view_files["render"] = f"{p}render.png"
                if emit.segmentation_png:
                    write_png(segmentation_image(fb), sdir / f"{p}seg.png")
                    view_files["segmentation"] = f"{p}seg.png"
                if emit.depth_png:
                    write_png(normalize_depth(fb.depth_raw), sdir / f"{p}depth.png")
                    view_files["depth"] = f"{p}depth.png"
                if emit.depth_float:
                    name = f"{p}depth.{emit.depth_float_format}"
                    write_float_depth(fb.depth_raw, sdir / name, emit.depth_float_format)
                    view_files["depth_float"] = name
                if emit.normals_png:
                    write_png(encode_normal_map(fb), sdir / f"{p}normals.png")
                    view_files["normals"] = f"{p}normals.png"
        files += view_files.values()
        rec.views.append({"index": k, "camera": cam.to_dict(), "light": light.to_dict(),
                          "materials": assignment.to_dict(), "files": view_files})

    if view0_assignment is None:  # pragma: no cover - views_per_model >= 1
        raise AssertionError("no views generated")

    with timer("io"):
        sample_files = {}
        if emit.mesh_obj:
            obj_mesh = mesh.replace(material_id=view0_assignment.triangle_materials(mesh))
            write_obj(obj_mesh, sdir / "model.obj", mtl_name="model.mtl")
            write_mtl(table.all, sdir / "model.mtl")
            sample_files.update(mesh="model.obj", materials="model.mtl")
        if cloud is not None:
            write_ply(cloud, sdir / "cloud.ply", binary=emit.cloud_binary)
            sample_files["cloud"] = "cloud.ply"
        files = list(sample_files.values()) + files
        if emit.metadata_json:
            meta = {
                "schema": SCHEMA_VERSION,
                "sample_id": sid,
                "index": index,
                "class_code": int(cls),
                "class_name": cls.key,
                "seed": seed,
                "lod": cfg.lod,
                "params": massing.params.to_dict(),
                "volumes": [v.to_dict() for v in massing.volumes],
                "component_triangles": rec.component_triangles,
                "triangles": mesh.n_triangles,
                "points": cloud.count if cloud is not None else 0,
                "image_size": cfg.image_size,
                "materials": [m.to_dict() for m in table.all],
                "views": rec.views,
                "files": sample_files,
            }
            write_metadata(meta, sdir / "metadata.json")
            files.append("metadata.json")
    rec.files = [f"{sid}/{f}" for f in files]
    return rec


def _run_one(args) -> SampleRecord:
    cfg, index, out_dir, backend = args
    try:
        return generate_sample(cfg, index, out_dir, backend=backend)
    except Exception as exc:  # isolate per-sample failures
        log.error("sample %d failed: %s", index, exc)
        shutil.rmtree(Path(out_dir) / sample_id(index), ignore_errors=True)
        cls = plan_classes(index + 1, cfg.classes)[index]
        return SampleRecord(index, sample_id(index), cls, derive_sample_seed(cfg.seed, index),
                            status="failed", error=f"{type(exc).__name__}: {exc}")


@dataclass
class DatasetManifest:
    data: dict
    records: list[SampleRecord]

    @property
    def failed(self) -> list[SampleRecord]:
        return [r for r in self.records if r.status != "ok"]


def default_jobs() -> int:
    return os.cpu_count() or 1


def generate_dataset(cfg: DatasetConfig, out_dir: str | Path, jobs: int | None = None,
                     backend: str | None = None,
                     on_sample: Callable[[SampleRecord], None] | None = None) -> DatasetManifest:
    """Generate ``cfg.samples`` samples; the written tree is independent of ``jobs``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory {out_dir} is not writable")
    (out_dir / "config.json").write_text(dump_config(cfg), encoding="utf-8")
    jobs = jobs or default_jobs()
    tasks = [(cfg, i, str(out_dir), backend) for i in range(cfg.samples)]

    records: list[SampleRecord] = []
    if jobs == 1:
        for t in tasks:
            rec = _run_one(t)
            records.append(rec)
            if on_sample:
                on_sample(rec)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for rec in pool.map(_run_one, tasks, chunksize=1):
                records.append(rec)
                if on_sample:
                    on_sample(rec)
    records.sort(key=lambda r: r.index)

    manifest = {
        "schema": SCHEMA_VERSION,
        "generator": f"synthbuild {__version__}",
        "classes": [c.key for c in sorted(set(cfg.classes))],
        "samples": [r.manifest_entry() for r in records],
        "total": len(records),
        "failed": sum(r.status != "ok" for r in records),
    }
    write_manifest(manifest, out_dir / "dataset.json")
    write_json(stats_from_manifest(manifest).to_dict(), out_dir / "stats.json")
    return DatasetManifest(manifest, records)


# -- statistics --------------------------------------------------------------

def population_std(counts: Sequence[float]) -> float:
    if not counts:
        return 0.0
    mean = sum(counts) / len(counts)
    return math.sqrt(sum((c - mean) ** 2 for c in counts) / len(counts))


@dataclass
class DatasetStats:
    counts: dict[str, int]
    total: int
    std_dev: float
    mean_triangles: dict[str, float]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def stats_from_manifest(manifest: dict) -> DatasetStats:
    classes = manifest["classes"]
    counts = dict.fromkeys(classes, 0)
    tris: dict[str, list[int]] = {c: [] for c in classes}
    for s in manifest["samples"]:
        if s.get("status", "ok") != "ok":
            continue
        counts[s["class_name"]] = counts.get(s["class_name"], 0) + 1
        tris.setdefault(s["class_name"], []).append(s.get("triangles", 0))
    mean_tris = {c: (sum(v) / len(v) if v else 0.0) for c, v in tris.items()}
    return DatasetStats(counts, sum(counts.values()), population_std(list(counts.values())), mean_tris)


def compute_stats(dataset_dir: str | Path) -> DatasetStats:
    path = Path(dataset_dir) / "dataset.json"
    try:
        manifest = read_json(path)
        return stats_from_manifest(manifest)
    except FileNotFoundError:
        raise FileNotFoundError(f"no manifest at {path}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise ValueError(f"corrupt manifest {path}: {exc}") from None


# -- benchmark ---------------------------------------------------------------

@dataclass
class BenchRow:
    float_depth: bool
    multiview: bool
    samples: int
    views: int
    wall_s: float
    stage_totals_ms: dict[str, float]
    stage_means_ms: dict[str, float]
    failed: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class BenchReport:
    rows: list[BenchRow]
    image_size: int
    backend: str
    jobs: int

    def to_dict(self) -> dict:
        return {"image_size": self.image_size, "backend": self.backend, "jobs": self.jobs,
                "rows": [r.to_dict() for r in self.rows]}

    def row(self, float_depth: bool, multiview: bool) -> BenchRow:
        return next(r for r in self.rows if r.float_depth == float_depth and r.multiview == multiview)


def run_bench(cfg: DatasetConfig, out_dir: str | Path, samples: int = 100, views: int = 3,
              jobs: int = 1, backend: str | None = None, image_size: int = 500,
              keep_outputs: bool = False) -> BenchReport:
    """Time the float-depth x multiview matrix and write ``bench.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for k, (float_depth, multiview) in enumerate([(False, False), (False, True), (True, False), (True, True)]):
        n_views = views if multiview else 1
        row_cfg = dataclasses.replace(
            cfg, samples=samples, views_per_model=n_views, image_size=image_size,
            emit=dataclasses.replace(cfg.emit, depth_float=float_depth))
        run_dir = out_dir / "bench_runs" / f"row{k}"
        t0 = time.perf_counter()
        result = generate_dataset(row_cfg, run_dir, jobs=jobs, backend=backend)
        wall = time.perf_counter() - t0
        totals = {s: sum(r.timings_ms[s] for r in result.records) for s in STAGES}
        means = {s: v / samples for s, v in totals.items()}
        rows.append(BenchRow(float_depth, multiview, samples, n_views, wall, totals, means, len(result.failed)))
        log.info("bench row float_depth=%s multiview=%s: %.2fs", float_depth, multiview, wall)
    if not keep_outputs:
        shutil.rmtree(out_dir / "bench_runs", ignore_errors=True)
    report = BenchReport(rows, image_size, backend or DEFAULT_BACKEND, jobs)
    write_json(report.to_dict(), out_dir / "bench.json")
    return report
