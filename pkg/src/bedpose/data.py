"""Synthetic paired-modality in-bed pose data.

Each sample is a 14-joint stick figure lying on a bed, rendered twice:

* modality 1 ("lwir", 1x64x64): bright-on-dark heat blobs along the limbs.
  Bedding never hides the body here; a heavy cover only attenuates the whole
  image by 20%.  Right-side limbs glow slightly hotter than left-side ones,
  which is the weak lateral cue this modality carries.
* modality 2 ("rgb", 3x64x64): colored limbs with a strong lateral cue
  (right limbs tinted red, left tinted blue).  Under light cover an opaque
  solid-color rectangle hides everything below the hips; under heavy cover it
  hides everything below the shoulders.

Every pose is emitted under all three cover conditions with identical joint
annotations, so ground truth is cover-invariant by construction.

On-disk layout (all little-endian):

    root/subject_{:03d}/pose_{:03d}_{cover}_{modality}.f64
        header: 4 uint32 extents (1, C, H, W), then C*H*W float64 row-major
    root/subject_{:03d}/annot.txt
        one line per (pose, cover): pose_id cover x y v (x14) head_size
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from . import rng

IMAGE_SIZE = 64
NUM_JOINTS = 14

JOINT_NAMES = ("R_Ankle", "R_Knee", "R_Hip", "L_Hip", "L_Knee", "L_Ankle",
               "R_Wrist", "R_Elbow", "R_Shoulder", "L_Shoulder", "L_Elbow",
               "L_Wrist", "Thorax", "Head")
COVERS = ("uncovered", "light", "heavy")
MODALITIES = ("lwir", "rgb")

R_ANKLE, R_KNEE, R_HIP, L_HIP, L_KNEE, L_ANKLE = 0, 1, 2, 3, 4, 5
R_WRIST, R_ELBOW, R_SHO, L_SHO, L_ELBOW, L_WRIST = 6, 7, 8, 9, 10, 11
THORAX, HEAD = 12, 13

# (a, b, side) with side -1 = right, +1 = left, 0 = center.
BONES = (
    (HEAD, THORAX, 0),
    (THORAX, R_SHO, -1), (R_SHO, R_ELBOW, -1), (R_ELBOW, R_WRIST, -1),
    (THORAX, L_SHO, +1), (L_SHO, L_ELBOW, +1), (L_ELBOW, L_WRIST, +1),
    (THORAX, R_HIP, -1), (THORAX, L_HIP, +1), (R_HIP, L_HIP, 0),
    (R_HIP, R_KNEE, -1), (R_KNEE, R_ANKLE, -1),
    (L_HIP, L_KNEE, +1), (L_KNEE, L_ANKLE, +1),
)

BED_X0, BED_X1, BED_Y0, BED_Y1 = 5, 59, 2, 62   # bed rectangle, half-open


@dataclass
class Sample:
    subject_id: int
    pose_id: int
    cover: str
    image_m1: np.ndarray     # (1, 64, 64) float64 in [0, 1]
    image_m2: np.ndarray     # (3, 64, 64) float64 in [0, 1]
    joints: np.ndarray       # (14, 2) float64, (x, y) pixel coords
    visible: np.ndarray      # (14,) bool
    head_size: float         # head->thorax distance, > 0


@dataclass
class DatasetSplit:
    train: list
    val: list
    test: list
    seed: int


# ---------------------------------------------------------------------------
# Skeleton sampling
# ---------------------------------------------------------------------------

def _rot(v: np.ndarray, a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([v[0] * c - v[1] * s, v[0] * s + v[1] * c])


def _sample_skeleton(ps: np.random.Generator, scale: float) -> np.ndarray:
    """Draw one lying pose; joints ordered as JOINT_NAMES, coords (x, y)."""
    torso = 16.0 * scale
    shoulder_w = 11.0 * scale
    hip_w = 8.5 * scale
    head_len = 7.0 * scale
    upper_arm, forearm = 7.5 * scale, 7.0 * scale
    thigh, shin = 9.0 * scale, 8.5 * scale

    for _ in range(25):
        j = np.zeros((NUM_JOINTS, 2))
        thorax = np.array([32.0 + ps.uniform(-3, 3), 21.0 + ps.uniform(-2, 2)])
        tilt = ps.uniform(-0.25, 0.25)
        dirv = np.array([np.sin(tilt), np.cos(tilt)])      # body axis, head->feet
        perp = np.array([np.cos(tilt), -np.sin(tilt)])     # left of the axis

        j[THORAX] = thorax
        j[HEAD] = thorax - head_len * _rot(dirv, ps.uniform(-0.15, 0.15))
        hipc = thorax + torso * dirv
        j[R_SHO] = thorax - (shoulder_w / 2) * perp
        j[L_SHO] = thorax + (shoulder_w / 2) * perp
        j[R_HIP] = hipc - (hip_w / 2) * perp
        j[L_HIP] = hipc + (hip_w / 2) * perp

        for sign, sho, elb, wri in ((-1, R_SHO, R_ELBOW, R_WRIST),
                                    (+1, L_SHO, L_ELBOW, L_WRIST)):
            theta_u = sign * ps.uniform(0.25, 1.5)
            j[elb] = j[sho] + upper_arm * _rot(dirv, theta_u)
            j[wri] = j[elb] + forearm * _rot(dirv, theta_u + ps.uniform(-1.1, 1.1))

        for sign, hip, knee, ank in ((-1, R_HIP, R_KNEE, R_ANKLE),
                                     (+1, L_HIP, L_KNEE, L_ANKLE)):
            theta_t = sign * ps.uniform(0.03, 0.45)
            j[knee] = j[hip] + thigh * _rot(dirv, theta_t)
            j[ank] = j[knee] + shin * _rot(dirv, theta_t + ps.uniform(-0.55, 0.55))

        if np.all(j >= 3.0) and np.all(j <= 60.0):
            return j
    return np.clip(j, 3.0, 60.0)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_GY, _GX = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE]


def _seg_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from every pixel center to segment a-b."""
    ab = b - a
    denom = max(float(ab @ ab), 1e-12)
    t = np.clip(((_GX - a[0]) * ab[0] + (_GY - a[1]) * ab[1]) / denom, 0.0, 1.0)
    dx = _GX - (a[0] + t * ab[0])
    dy = _GY - (a[1] + t * ab[1])
    return np.sqrt(dx * dx + dy * dy)


def cover_rect(joints: np.ndarray, cover: str) -> tuple | None:
    """The opaque cover rectangle (x0, x1, y0, y1), half-open, or None."""
    if cover == "uncovered":
        return None
    if cover == "light":
        y0 = int(np.floor(min(joints[R_HIP, 1], joints[L_HIP, 1]))) - 2
    elif cover == "heavy":
        y0 = int(np.floor(min(joints[R_SHO, 1], joints[L_SHO, 1]))) - 3
    else:
        raise ValueError(f"unknown cover condition '{cover}'")
    y0 = int(np.clip(y0, BED_Y0, BED_Y1 - 1))
    return (BED_X0 + 2, BED_X1 - 2, y0, BED_Y1)


@dataclass
class _SubjectStyle:
    scale: float
    skin: np.ndarray
    shirt: np.ndarray
    pants: np.ndarray
    light_cover: np.ndarray
    heavy_cover: np.ndarray


def _subject_style(seed: int, subject_id: int) -> _SubjectStyle:
    g = rng.stream(seed, "subject", subject_id)
    return _SubjectStyle(
        scale=g.uniform(0.9, 1.1),
        skin=np.array([0.87, 0.68, 0.53]) * g.uniform(0.85, 1.0),
        shirt=g.uniform(0.25, 0.85, 3),
        pants=g.uniform(0.08, 0.45, 3),
        light_cover=np.clip(0.72 + g.uniform(-0.06, 0.06, 3), 0, 1),
        heavy_cover=np.clip(np.array([0.18, 0.30, 0.52]) + g.uniform(-0.08, 0.08, 3), 0, 1),
    )


def _side_tint(color: np.ndarray, side: int) -> np.ndarray:
    if side == 0:
        return color
    shift = np.array([0.18, 0.0, -0.06]) if side < 0 else np.array([-0.06, 0.0, 0.18])
    return np.clip(color + shift, 0.0, 1.0)


def _render_m1(joints: np.ndarray, noise: np.ndarray) -> np.ndarray:
    img = np.full((IMAGE_SIZE, IMAGE_SIZE), 0.02)
    img[BED_Y0:BED_Y1, BED_X0:BED_X1] = 0.08
    torso_bones = {(THORAX, R_HIP), (THORAX, L_HIP), (R_HIP, L_HIP)}
    field = np.zeros_like(img)
    for a, b, side in BONES:
        width = 2.2 if (a, b) in torso_bones else 1.4
        amp = 0.95 if side == 0 else (0.9 if side < 0 else 0.72)
        d = _seg_dist(joints[a], joints[b])
        field += amp * np.exp(-d * d / (2 * width * width))
    for k in range(NUM_JOINTS):
        dx, dy = _GX - joints[k, 0], _GY - joints[k, 1]
        field += 0.35 * np.exp(-(dx * dx + dy * dy) / (2 * 1.1 * 1.1))
    # Head mass
    dx, dy = _GX - joints[HEAD, 0], _GY - joints[HEAD, 1]
    field += 0.9 * np.exp(-(dx * dx + dy * dy) / (2 * 2.0 * 2.0))
    return np.clip(img + field + noise, 0.0, 1.0)[None]


def _paint_capsule(img: np.ndarray, a: np.ndarray, b: np.ndarray,
                   radius: float, color: np.ndarray) -> None:
    d = _seg_dist(a, b)
    alpha = np.clip((radius - d) / 0.75, 0.0, 1.0)
    img += alpha[None] * (color[:, None, None] - img)


def _render_m2(joints: np.ndarray, style: _SubjectStyle, cover: str) -> np.ndarray:
    img = np.empty((3, IMAGE_SIZE, IMAGE_SIZE))
    img[:] = np.array([0.10, 0.10, 0.12])[:, None, None]
    bed = np.array([0.32, 0.27, 0.24])
    img[:, BED_Y0:BED_Y1, BED_X0:BED_X1] = bed[:, None, None]

    hipc = 0.5 * (joints[R_HIP] + joints[L_HIP])
    _paint_capsule(img, joints[THORAX], hipc, 4.6 * style.scale, style.shirt)
    _paint_capsule(img, joints[R_SHO], joints[L_SHO], 1.9, style.shirt)
    _paint_capsule(img, joints[R_HIP], joints[L_HIP], 1.7, style.shirt)
    arm_bones = {(R_SHO, R_ELBOW), (R_ELBOW, R_WRIST), (L_SHO, L_ELBOW), (L_ELBOW, L_WRIST)}
    leg_bones = {(R_HIP, R_KNEE), (R_KNEE, R_ANKLE), (L_HIP, L_KNEE), (L_KNEE, L_ANKLE)}
    for a, b, side in BONES:
        if side == 0:
            continue
        if (a, b) in arm_bones:
            base = style.skin
        elif (a, b) in leg_bones:
            base = style.pants
        else:
            base = style.shirt
        _paint_capsule(img, joints[a], joints[b], 1.6, _side_tint(base, side))
    dx, dy = _GX - joints[HEAD, 0], _GY - joints[HEAD, 1]
    head_alpha = np.clip((2.8 * style.scale - np.sqrt(dx * dx + dy * dy)) / 0.75, 0, 1)
    img += head_alpha[None] * (style.skin[:, None, None] - img)
    for k in range(NUM_JOINTS):
        dx, dy = _GX - joints[k, 0], _GY - joints[k, 1]
        mark = np.sqrt(dx * dx + dy * dy) <= 1.0
        img[:, mark] = (img[:, mark] * 0.7)

    rect = cover_rect(joints, cover)
    if rect is not None:
        x0, x1, y0, y1 = rect
        color = style.light_cover if cover == "light" else style.heavy_cover
        img[:, y0:y1, x0:x1] = color[:, None, None]
    return np.clip(img, 0.0, 1.0)


def generate_subject(seed: int, subject_id: int, poses_per_subject: int) -> list[Sample]:
    """All samples for one subject: poses_per_subject poses x 3 cover conditions."""
    if poses_per_subject < 1:
        raise ValueError(f"poses_per_subject must be >= 1, got {poses_per_subject}")
    style = _subject_style(seed, subject_id)
    samples = []
    for pose_id in range(poses_per_subject):
        ps = rng.stream(seed, "pose", subject_id, pose_id)
        joints = _sample_skeleton(ps, style.scale)
        noise = rng.stream(seed, "m1noise", subject_id, pose_id).uniform(
            -0.03, 0.03, (IMAGE_SIZE, IMAGE_SIZE))
        m1_base = _render_m1(joints, noise)
        head_size = float(np.linalg.norm(joints[HEAD] - joints[THORAX]))
        visible = np.ones(NUM_JOINTS, dtype=bool)
        for cover in COVERS:
            m1 = m1_base * 0.8 if cover == "heavy" else m1_base.copy()
            m2 = _render_m2(joints, style, cover)
            samples.append(Sample(subject_id, pose_id, cover, m1, m2,
                                  joints.copy(), visible.copy(), head_size))
    return samples


def generate_dataset(seed: int, subjects: int, poses_per_subject: int) -> list[Sample]:
    out = []
    for sid in range(subjects):
        out.extend(generate_subject(seed, sid, poses_per_subject))
    return out


# ---------------------------------------------------------------------------
# Pairing and splits
# ---------------------------------------------------------------------------

def uncovered_sibling_indices(samples: list[Sample]) -> np.ndarray:
    """For each sample, the index of the uncovered sample with the same pose."""
    uncovered = {}
    for i, s in enumerate(samples):
        if s.cover == "uncovered":
            uncovered[(s.subject_id, s.pose_id)] = i
    idx = np.empty(len(samples), dtype=np.int64)
    for i, s in enumerate(samples):
        sib = uncovered.get((s.subject_id, s.pose_id))
        if sib is None:
            raise ValueError(f"no uncovered sibling for pose {s.pose_id} "
                             f"(subject {s.subject_id})")
        idx[i] = sib
    return idx


def pair_for_vae(samples: list[Sample]) -> list[tuple[np.ndarray, np.ndarray]]:
    """(m1 at any cover, uncovered m2 of the same pose) for every sample."""
    sib = uncovered_sibling_indices(samples)
    return [(s.image_m1, samples[k].image_m2) for s, k in zip(samples, sib)]


def split_by_subject(samples: list[Sample], seed: int) -> DatasetSplit:
    """Disjoint subject-wise 70/15/15 split of sample indices."""
    subject_ids = sorted({s.subject_id for s in samples})
    n = len(subject_ids)
    if n < 3:
        raise ValueError(f"need at least 3 subjects to split, got {n}")
    order = [subject_ids[i] for i in rng.stream(seed, "split").permutation(n)]
    n_val = max(1, int(round(n * 0.15)))
    n_test = max(1, int(round(n * 0.15)))
    val_set = set(order[:n_val])
    test_set = set(order[n_val:n_val + n_test])
    split = DatasetSplit([], [], [], seed)
    for i, s in enumerate(samples):
        if s.subject_id in val_set:
            split.val.append(i)
        elif s.subject_id in test_set:
            split.test.append(i)
        else:
            split.train.append(i)
    return split


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------

@dataclass
class AugmentConfig:
    rotation_deg: float = 10.0
    shift_frac: float = 0.05
    scale_min: float = 0.9
    scale_max: float = 1.1
    jitter: float = 0.1
    occlusion_frac: float = 0.1

    def validate(self) -> None:
        if not 0.0 <= self.rotation_deg <= 30.0:
            raise ValueError(f"rotation_deg must be in [0, 30], got {self.rotation_deg}")
        if not 0.0 <= self.shift_frac <= 0.10:
            raise ValueError(f"shift_frac must be in [0, 0.10], got {self.shift_frac}")
        if not (0.8 <= self.scale_min <= self.scale_max <= 1.2):
            raise ValueError(f"scale range [{self.scale_min}, {self.scale_max}] "
                             "must lie inside [0.8, 1.2]")
        if not 0.0 <= self.jitter <= 0.2:
            raise ValueError(f"jitter must be in [0, 0.2], got {self.jitter}")
        if not 0.0 <= self.occlusion_frac <= 0.25:
            raise ValueError(f"occlusion_frac must be in [0, 0.25], got {self.occlusion_frac}")

    @staticmethod
    def identity() -> "AugmentConfig":
        return AugmentConfig(0.0, 0.0, 1.0, 1.0, 0.0, 0.0)


def transform_points(points: np.ndarray, theta: float, scale: float,
                     shift: np.ndarray) -> np.ndarray:
    """Rotate by theta (radians), scale, then shift, all about the image center."""
    c = (IMAGE_SIZE - 1) / 2.0
    ct, st = np.cos(theta), np.sin(theta)
    fwd = scale * np.array([[ct, -st], [st, ct]])            # acts on (x, y)
    return (points - c) @ fwd.T + c + np.asarray(shift, dtype=np.float64)


def affine_warp(img: np.ndarray, theta: float, scale: float, shift) -> np.ndarray:
    """Warp [C,H,W] image so pixels move exactly like transform_points does."""
    c = (IMAGE_SIZE - 1) / 2.0
    ct, st = np.cos(theta), np.sin(theta)
    fwd = scale * np.array([[ct, -st], [st, ct]])
    inv_xy = np.linalg.inv(fwd)
    # scipy indexes (y, x): input_coord = M @ output_coord + offset.
    inv_yx = np.array([[inv_xy[1, 1], inv_xy[1, 0]],
                       [inv_xy[0, 1], inv_xy[0, 0]]])
    target = np.array([c + shift[1], c + shift[0]])          # (y, x)
    offset_yx = np.array([c, c]) - inv_yx @ target
    out = np.empty_like(img)
    for ch in range(img.shape[0]):
        ndimage.affine_transform(img[ch], inv_yx, offset=offset_yx, output=out[ch],
                                 order=1, mode="nearest")
    return out


def augment(sample: Sample, seed: int, config: AugmentConfig) -> Sample:
    """Shared geometric transform on both modalities and the joints; photometric
    jitter on modality 2 only; one noise patch occluding both modalities."""
    config.validate()
    g = rng.stream(seed, "augment")
    theta = np.deg2rad(g.uniform(-config.rotation_deg, config.rotation_deg))
    scale = g.uniform(config.scale_min, config.scale_max)
    shift = g.uniform(-config.shift_frac, config.shift_frac, 2) * IMAGE_SIZE

    m1, m2 = sample.image_m1, sample.image_m2
    joints = sample.joints
    visible = sample.visible.copy()

    geometric = not (theta == 0.0 and scale == 1.0 and shift[0] == 0.0 and shift[1] == 0.0)
    if geometric:
        joints = transform_points(joints, theta, scale, shift)
        m1 = affine_warp(m1, theta, scale, shift)
        m2 = affine_warp(m2, theta, scale, shift)
        visible &= np.all((joints >= 0.0) & (joints <= IMAGE_SIZE - 1.0), axis=1)
    else:
        joints = joints.copy()
        m1 = m1.copy()
        m2 = m2.copy()

    if config.jitter > 0.0:
        m2 = np.clip(m2 + g.uniform(-config.jitter, config.jitter, 3)[:, None, None], 0, 1)

    area_cap = int(config.occlusion_frac * IMAGE_SIZE * IMAGE_SIZE)
    if area_cap >= 1:
        w = min(int(g.uniform(4, 25)), area_cap)
        h = min(24, max(1, area_cap // w))
        x0 = int(g.uniform(0, IMAGE_SIZE - w))
        y0 = int(g.uniform(0, IMAGE_SIZE - h))
        m1[:, y0:y0 + h, x0:x0 + w] = g.uniform(0, 1, (1, h, w))
        m2[:, y0:y0 + h, x0:x0 + w] = g.uniform(0, 1, (3, h, w))

    head_size = float(np.linalg.norm(joints[HEAD] - joints[THORAX]))
    return replace(sample, image_m1=m1, image_m2=m2, joints=joints,
                   visible=visible, head_size=head_size)


# ---------------------------------------------------------------------------
# Disk layout
# ---------------------------------------------------------------------------

def write_tensor_f64(path: str, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"expected a rank-3 array, got shape {arr.shape}")
    header = np.array((1,) + arr.shape, dtype="<u4")
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(arr.astype("<f8").tobytes())


def read_tensor_f64(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < 16:
        raise ValueError(f"truncated tensor file: {path}")
    extents = np.frombuffer(raw[:16], dtype="<u4")
    count = int(np.prod(extents))
    data = np.frombuffer(raw[16:], dtype="<f8")
    if data.size != count:
        raise ValueError(f"tensor file {path}: header promises {count} values, "
                         f"found {data.size}")
    return data.reshape(tuple(int(e) for e in extents))[0].copy()


def save_dataset(root: str, samples: list[Sample]) -> None:
    by_subject: dict[int, list[Sample]] = {}
    for s in samples:
        by_subject.setdefault(s.subject_id, []).append(s)
    cover_order = {c: k for k, c in enumerate(COVERS)}
    for sid in sorted(by_subject):
        sdir = os.path.join(root, f"subject_{sid:03d}")
        os.makedirs(sdir, exist_ok=True)
        subj = sorted(by_subject[sid], key=lambda s: (s.pose_id, cover_order[s.cover]))
        lines = []
        for s in subj:
            write_tensor_f64(os.path.join(
                sdir, f"pose_{s.pose_id:03d}_{s.cover}_lwir.f64"), s.image_m1)
            write_tensor_f64(os.path.join(
                sdir, f"pose_{s.pose_id:03d}_{s.cover}_rgb.f64"), s.image_m2)
            parts = [str(s.pose_id), s.cover]
            for (x, y), v in zip(s.joints, s.visible):
                parts += [repr(float(x)), repr(float(y)), str(int(v))]
            parts.append(repr(float(s.head_size)))
            lines.append(" ".join(parts))
        with open(os.path.join(sdir, "annot.txt"), "w") as f:
            f.write("\n".join(lines) + "\n")


def _parse_annot_line(line: str, path: str):
    parts = line.split()
    if len(parts) != 2 + 3 * NUM_JOINTS + 1:
        raise ValueError(f"{path}: malformed annotation line "
                         f"({len(parts)} fields): {line[:60]}")
    pose_id = int(parts[0])
    cover = parts[1]
    if cover not in COVERS:
        raise ValueError(f"{path}: unknown cover condition '{cover}'")
    vals = parts[2:2 + 3 * NUM_JOINTS]
    joints = np.array([[float(vals[3 * k]), float(vals[3 * k + 1])]
                       for k in range(NUM_JOINTS)])
    visible = np.array([bool(int(vals[3 * k + 2])) for k in range(NUM_JOINTS)])
    head_size = float(parts[-1])
    return pose_id, cover, joints, visible, head_size


def load_slp_layout(root: str) -> list[Sample]:
    """Read a dataset directory back; only lwir and rgb files are consumed."""
    if not os.path.isdir(root):
        raise ValueError(f"no subjects found under '{root}' (not a directory)")
    subject_dirs = sorted(d for d in os.listdir(root)
                          if re.fullmatch(r"subject_\d{3}", d))
    if not subject_dirs:
        raise ValueError(f"no subjects found under '{root}'")
    samples = []
    for d in subject_dirs:
        sid = int(d.split("_")[1])
        sdir = os.path.join(root, d)
        annot = os.path.join(sdir, "annot.txt")
        if not os.path.isfile(annot):
            raise ValueError(f"missing annotation file: {annot}")
        with open(annot) as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                pose_id, cover, joints, visible, head_size = _parse_annot_line(line, annot)
                if head_size <= 0:
                    raise ValueError(f"{annot}: head_size must be > 0 for pose {pose_id}")
                bad = visible & ~np.all((joints >= 0) & (joints <= IMAGE_SIZE - 1), axis=1)
                if np.any(bad):
                    k = int(np.argmax(bad))
                    raise ValueError(
                        f"{annot}: pose {pose_id} violates the coordinate invariant: "
                        f"visible joint {JOINT_NAMES[k]} at {tuple(joints[k])} "
                        f"outside [0, {IMAGE_SIZE - 1}]")
                images = {}
                for modality, channels in (("lwir", 1), ("rgb", 3)):
                    path = os.path.join(sdir, f"pose_{pose_id:03d}_{cover}_{modality}.f64")
                    if not os.path.isfile(path):
                        raise ValueError(f"missing image file: {path}")
                    arr = read_tensor_f64(path)
                    if arr.shape != (channels, IMAGE_SIZE, IMAGE_SIZE):
                        raise ValueError(f"{path}: expected shape "
                                         f"{(channels, IMAGE_SIZE, IMAGE_SIZE)}, got {arr.shape}")
                    if arr.min() < 0.0 or arr.max() > 1.0:
                        raise ValueError(f"{path}: image values outside [0, 1]")
                    images[modality] = arr
                samples.append(Sample(sid, pose_id, cover, images["lwir"],
                                      images["rgb"], joints, visible, head_size))
    return samples
