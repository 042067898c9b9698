"""Sequence bundles: frames, coarse saliency, proposals and optional ground truth.

On disk a bundle is a directory::

    frames/000000.pgm ...       8-bit grayscale frames
    saliency/000000.ksal ...    coarse saliency in [0, 1]
    proposals.jsonl             detections, keyed by 0-based frame index
    fixations/000000.pgm ...    optional binary fixation maps (0 or 255)
    density/000000.ksal ...     optional fixation density maps
    scene.json                  optional generator metadata

Frame indices are 0-based everywhere.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ksora.errors import CodecError, IngestionError
from ksora.harness.codecs import (
    read_ksal,
    read_pgm,
    read_proposals,
    write_ksal,
    write_pgm,
    write_proposals,
)

log = logging.getLogger(__name__)


def frame_name(t, ext):
    return f"{t:06d}.{ext}"


@dataclass
class SequenceBundle:
    frames: list
    saliency: list
    proposals: list
    fixations: list = None
    density: list = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.frames)

    @property
    def shape(self):
        return self.frames[0].shape if self.frames else None

    @property
    def has_ground_truth(self):
        return self.fixations is not None

    def validate(self):
        """Raise :class:`IngestionError` naming the first inconsistent frame."""
        n = len(self.frames)
        for name in ("saliency", "proposals", "fixations", "density"):
            seq = getattr(self, name)
            if seq is not None and len(seq) != n:
                raise IngestionError(min(len(seq), n), f"{name} has {len(seq)} entries for {n} frames")
        if not n:
            return self
        shape = self.frames[0].shape
        for t in range(n):
            f = self.frames[t]
            if f.ndim != 2 or f.dtype != np.uint8:
                raise IngestionError(t, f"frame must be 2-D uint8, got {f.dtype} {f.shape}")
            if f.shape != shape:
                raise IngestionError(t, f"frame is {f.shape}, first frame is {shape}")
            s = self.saliency[t]
            if s.shape != shape:
                raise IngestionError(t, f"saliency is {s.shape}, frame is {shape}")
            if not np.all(np.isfinite(s)) or s.min() < 0 or s.max() > 1:
                raise IngestionError(t, "saliency values must lie in [0, 1]")
            for p in self.proposals[t]:
                if not p.inside(*shape):
                    raise IngestionError(t, f"proposal bbox {p.bbox} outside {shape[1]}x{shape[0]} frame")
            if self.fixations is not None and self.fixations[t].shape != shape:
                raise IngestionError(t, f"fixation map is {self.fixations[t].shape}, frame is {shape}")
            if self.density is not None and self.density[t].shape != shape:
                raise IngestionError(t, f"density map is {self.density[t].shape}, frame is {shape}")
        return self

    def prefix(self, n):
        """The first ``n`` frames as a new bundle."""
        cut = lambda seq: None if seq is None else seq[:n]
        return SequenceBundle(
            self.frames[:n], self.saliency[:n], self.proposals[:n],
            cut(self.fixations), cut(self.density), dict(self.meta),
        )


def _sorted_files(directory, ext):
    if not directory.is_dir():
        return []
    return sorted(directory.glob(f"*.{ext}"))


def read_bundle(path):
    """Load and validate a bundle directory; an empty directory yields zero frames."""
    root = Path(path)
    if not root.is_dir():
        raise IngestionError(None, f"bundle directory {root} does not exist")
    frame_files = _sorted_files(root / "frames", "pgm")
    for t, fp in enumerate(frame_files):
        if fp.name != frame_name(t, "pgm"):
            raise IngestionError(t, f"expected {frame_name(t, 'pgm')}, found {fp.name}")
    n = len(frame_files)
    frames = [read_pgm(fp) for fp in frame_files]

    def per_frame(sub, ext, reader, required):
        d = root / sub
        if not d.is_dir():
            if required and n:
                raise IngestionError(0, f"missing {sub}/ directory")
            return None
        out = []
        for t in range(n):
            fp = d / frame_name(t, ext)
            if not fp.exists():
                raise IngestionError(t, f"missing {sub}/{fp.name}")
            out.append(reader(fp))
        return out

    saliency = per_frame("saliency", "ksal", lambda fp: read_ksal(fp).astype(np.float64), True) or []
    fixations = per_frame("fixations", "pgm", lambda fp: read_pgm(fp) > 0, False)
    density = per_frame("density", "ksal", lambda fp: read_ksal(fp).astype(np.float64), False)

    by_frame = {}
    prop_file = root / "proposals.jsonl"
    if prop_file.exists():
        by_frame = read_proposals(prop_file)
    for t in by_frame:
        if not 0 <= t < n:
            raise IngestionError(t, f"proposals.jsonl refers to frame {t} but the bundle has {n} frames")
    proposals = [list(by_frame.get(t, [])) for t in range(n)]
    for t in range(n):
        h, w = frames[t].shape
        kept = []
        for p in proposals[t]:
            if p.inside(h, w):
                kept.append(p)
                continue
            q = p.clipped(h, w)
            log.warning("frame %d: bbox %s clipped to the frame", t, p.bbox)
            if q is not None:
                kept.append(q)
        proposals[t] = kept

    meta = {}
    scene = root / "scene.json"
    if scene.exists():
        try:
            meta = json.loads(scene.read_text(encoding="utf-8"))
        except ValueError as exc:
            raise CodecError(scene, f"invalid JSON: {exc}") from exc
    return SequenceBundle(frames, saliency, proposals, fixations, density, meta).validate()


def write_bundle(bundle, path):
    bundle.validate()
    root = Path(path)
    (root / "frames").mkdir(parents=True, exist_ok=True)
    (root / "saliency").mkdir(exist_ok=True)
    for t, (f, s) in enumerate(zip(bundle.frames, bundle.saliency)):
        write_pgm(root / "frames" / frame_name(t, "pgm"), f)
        write_ksal(root / "saliency" / frame_name(t, "ksal"), s)
    if bundle.fixations is not None:
        (root / "fixations").mkdir(exist_ok=True)
        for t, fx in enumerate(bundle.fixations):
            write_pgm(root / "fixations" / frame_name(t, "pgm"), np.where(np.asarray(fx) > 0, 255, 0).astype(np.uint8))
    if bundle.density is not None:
        (root / "density").mkdir(exist_ok=True)
        for t, d in enumerate(bundle.density):
            write_ksal(root / "density" / frame_name(t, "ksal"), d)
    write_proposals(root / "proposals.jsonl", {t: ps for t, ps in enumerate(bundle.proposals) if ps})
    if bundle.meta:
        (root / "scene.json").write_text(json.dumps(bundle.meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return root
