"""End-to-end multimodal system: enrollment, identification, verification,
score-level fusion, and model persistence.

Face chain: pixels -> PCA -> LDA -> KNN gallery. Voice chain: MFCC summary
-> LDA -> one-vs-one SVM. Scores from both chains are mapped to [0, 1]
(1/(1+distance) for faces, vote fractions for voices) and fused by a convex
combination. A probe is rejected as unknown when its face distance exceeds
tau_dist AND its fused score falls below tau_fused; both thresholds are
calibrated from the enrollment data and stored in the model file.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import knn as knn_mod
from . import lda as lda_mod
from . import mfcc as mfcc_mod
from . import pca as pca_mod
from . import svm as svm_mod
from .errors import ClassError, DatasetError, EnrollmentError, FormatError, IdentityError
from .ingest import AudioRecord, ImageRecord, LabeledDataset, image_to_vector

MAGIC = "BIOMM 1"
DIST_HEADROOM = 6.0

MODE_IDENTIFY = "identification"
MODE_VERIFY = "verification"
VERDICT_ACCEPT = "accept"
VERDICT_REJECT = "reject"


@dataclass(frozen=True)
class PipelineConfig:
    """Every tunable of both chains, with the module defaults."""

    pca_retained: int | None = None     # default: samples - classes
    lda_retained: int | None = None     # default: classes - 1
    reg: float | None = None            # default: 1e-6 * trace(S_W)/d
    knn_k: int = 2
    mfcc: mfcc_mod.MfccConfig = mfcc_mod.MfccConfig()
    svm_kernel: str = "rbf"
    svm_gamma: float = 2.0
    svm_c: float = 10.0
    svm_tol: float = 1e-3
    w_face: float = 0.5

    def kernel(self) -> svm_mod.KernelSpec:
        gamma = self.svm_gamma if self.svm_kernel == "rbf" else None
        return svm_mod.KernelSpec(self.svm_kernel, gamma)


@dataclass(frozen=True)
class BiometricTemplate:
    """Per-client stored reference: LDA-space gallery mean + SVM class id."""

    client_id: str
    face_coords: np.ndarray
    voice_class_id: int


@dataclass(frozen=True)
class Thresholds:
    tau_dist: float
    tau_fused: float


@dataclass(frozen=True)
class Decision:
    mode: str
    claimed_id: str | None
    face_score: float
    voice_score: float
    fused_score: float
    verdict: str
    client_id: str | None
    face_id: str | None = None
    voice_id: str | None = None

    @property
    def accepted(self) -> bool:
        return self.verdict == VERDICT_ACCEPT


@dataclass(frozen=True)
class SystemModel:
    face_pca: pca_mod.Subspace
    face_lda: pca_mod.Subspace
    face_gallery: knn_mod.KnnModel
    voice_lda: pca_mod.Subspace
    voice_svm: svm_mod.SvmModel
    templates: tuple
    thresholds: Thresholds
    config: PipelineConfig

    @property
    def class_names(self) -> tuple:
        return tuple(t.client_id for t in self.templates)

    @property
    def num_classes(self) -> int:
        return len(self.templates)

    def with_thresholds(self, tau_dist=None, tau_fused=None) -> "SystemModel":
        t = Thresholds(
            self.thresholds.tau_dist if tau_dist is None else float(tau_dist),
            self.thresholds.tau_fused if tau_fused is None else float(tau_fused),
        )
        return replace(self, thresholds=t)


class Enrollment:
    """Accumulates per-client raw biometrics until the batch fit."""

    def __init__(self):
        self._clients: dict[str, tuple[list, list]] = {}

    def add(self, client_id: str, face_images, voice_recordings) -> "Enrollment":
        if not client_id or any(ch.isspace() for ch in client_id):
            raise EnrollmentError(f"client id {client_id!r} must be non-empty without whitespace")
        if client_id in self._clients:
            raise EnrollmentError(f"client {client_id!r} is already enrolled")
        faces = list(face_images)
        voices = list(voice_recordings)
        if len(faces) < 2 or len(voices) < 2:
            raise EnrollmentError(
                f"client {client_id!r} needs >= 2 face images and >= 2 recordings"
            )
        self._clients[client_id] = (faces, voices)
        return self

    @property
    def client_ids(self) -> tuple:
        return tuple(self._clients)

    def items(self):
        return self._clients.items()


def _face_dataset(enrollment: Enrollment) -> LabeledDataset:
    columns, labels = [], []
    shape = None
    for label, (client_id, (faces, _)) in enumerate(enrollment.items()):
        for img in faces:
            if shape is None:
                shape = (img.width, img.height)
            elif (img.width, img.height) != shape:
                raise DatasetError(
                    f"client {client_id!r} image is {img.width}x{img.height}, "
                    f"expected {shape[0]}x{shape[1]}"
                )
            columns.append(image_to_vector(img))
            labels.append(label)
    return LabeledDataset(
        np.column_stack(columns), labels, enrollment.client_ids
    )


def _voice_dataset(enrollment: Enrollment, cfg: mfcc_mod.MfccConfig) -> LabeledDataset:
    columns, labels = [], []
    for label, (_, (_, voices)) in enumerate(enrollment.items()):
        for rec in voices:
            columns.append(mfcc_mod.extract(rec, cfg).summary)
            labels.append(label)
    return LabeledDataset(
        np.column_stack(columns), labels, enrollment.client_ids
    )


def _distance_score(distance: float) -> float:
    return 1.0 / (1.0 + distance)


def _loo_face_distances(points: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """Leave-one-out mean distance of each gallery point vs the rest."""
    n = points.shape[1]
    out = np.zeros(n)
    for i in range(n):
        keep = np.arange(n) != i
        model = knn_mod.KnnModel(points[:, keep], labels[keep], k=min(k, n - 1))
        out[i] = knn_mod.classify(model, points[:, i]).mean_distance
    return out


def fit_system(enrollment: Enrollment, config: PipelineConfig | None = None) -> SystemModel:
    """Batch fit of both chains over everything enrolled so far.

    Refits from scratch (PCA/LDA/SVM are batch learners) and calibrates the
    rejection thresholds from the genuine enrollment scores: tau_dist is the
    99th percentile of leave-one-out gallery distances, tau_fused the 1st
    percentile of genuine fused scores.
    """
    config = config or PipelineConfig()
    if len(enrollment.client_ids) < 2:
        raise ClassError("at least two enrolled clients are required to fit")

    face_ds = _face_dataset(enrollment)
    face_pca = pca_mod.fit_pca(face_ds, config.pca_retained)
    pca_coords = pca_mod.project(face_pca, face_ds.features)
    pca_ds = LabeledDataset(pca_coords, face_ds.labels, face_ds.class_names)
    face_lda = lda_mod.fit_lda(pca_ds, config.lda_retained, config.reg)
    gallery_coords = pca_mod.project(face_lda, pca_coords)
    face_gallery = knn_mod.KnnModel(
        gallery_coords,
        face_ds.labels,
        k=min(config.knn_k, face_ds.num_samples),
    )

    voice_ds = _voice_dataset(enrollment, config.mfcc)
    voice_lda = lda_mod.fit_lda(voice_ds, config.lda_retained, config.reg)
    voice_coords = pca_mod.project(voice_lda, voice_ds.features)
    voice_proj_ds = LabeledDataset(voice_coords, voice_ds.labels, voice_ds.class_names)
    voice_svm = svm_mod.train_multiclass(
        voice_proj_ds, config.kernel(), config.svm_c, config.svm_tol
    )

    templates = tuple(
        BiometricTemplate(
            client_id=name,
            face_coords=gallery_coords[:, face_ds.labels == label].mean(axis=1),
            voice_class_id=label,
        )
        for label, name in enumerate(face_ds.class_names)
    )

    # Threshold calibration from genuine enrollment data. The leave-one-out
    # distances are measured in a subspace fit on the full gallery, which
    # understates held-out genuine distances; the headroom factor compensates
    # (impostor distances sit more than an order of magnitude higher).
    loo = _loo_face_distances(gallery_coords, face_ds.labels, config.knn_k)
    tau_dist = DIST_HEADROOM * float(np.percentile(loo, 99.0))
    # the fused gate is the distance gate mapped into score space under a
    # unanimous voice vote: anything farther than tau_dist scores below it
    tau_fused = (
        config.w_face * _distance_score(tau_dist) + (1.0 - config.w_face) * 1.0
    )

    return SystemModel(
        face_pca=face_pca,
        face_lda=face_lda,
        face_gallery=face_gallery,
        voice_lda=voice_lda,
        voice_svm=voice_svm,
        templates=templates,
        thresholds=Thresholds(tau_dist, tau_fused),
        config=config,
    )


def enroll_and_fit(gallery: dict, config: PipelineConfig | None = None) -> SystemModel:
    """Convenience: enroll {client_id: (faces, voices)} in dict order and fit."""
    enrollment = Enrollment()
    for client_id, (faces, voices) in gallery.items():
        enrollment.add(client_id, faces, voices)
    return fit_system(enrollment, config)


def _face_probe(m: SystemModel, face_image: ImageRecord):
    x = image_to_vector(face_image)
    return pca_mod.project(m.face_lda, pca_mod.project(m.face_pca, x))


def _voice_probe(m: SystemModel, voice_recording: AudioRecord):
    summary = mfcc_mod.extract(voice_recording, m.config.mfcc).summary
    return pca_mod.project(m.voice_lda, summary)


def identify(m: SystemModel, face_image: ImageRecord, voice_recording: AudioRecord) -> Decision:
    """1-of-N identification with fraud rejection.

    Face and voice verdicts that agree name that client; on disagreement
    the modality with the larger weighted score wins (so w_face of 0 or 1
    reduces exactly to a single-modality system). The probe is rejected as
    unknown when the face distance exceeds tau_dist AND the fused score
    falls below tau_fused.
    """
    q_face = _face_probe(m, face_image)
    face_result = knn_mod.classify(m.face_gallery, q_face)
    face_score = _distance_score(face_result.mean_distance)

    q_voice = _voice_probe(m, voice_recording)
    voice_label, votes = svm_mod.predict_multiclass(m.voice_svm, q_voice)
    voice_score = votes[voice_label] / (m.num_classes - 1)

    w = m.config.w_face
    fused = w * face_score + (1.0 - w) * voice_score
    if face_result.label == voice_label:
        candidate = face_result.label
    elif w * face_score >= (1.0 - w) * voice_score:
        candidate = face_result.label
    else:
        candidate = voice_label

    rejected = (
        face_result.mean_distance > m.thresholds.tau_dist
        and fused < m.thresholds.tau_fused
    )
    names = m.class_names
    return Decision(
        mode=MODE_IDENTIFY,
        claimed_id=None,
        face_score=face_score,
        voice_score=float(voice_score),
        fused_score=fused,
        verdict=VERDICT_REJECT if rejected else VERDICT_ACCEPT,
        client_id=None if rejected else names[candidate],
        face_id=names[face_result.label],
        voice_id=names[voice_label],
    )


def verify(
    m: SystemModel,
    face_image: ImageRecord,
    voice_recording: AudioRecord,
    claimed_id: str,
) -> Decision:
    """Accept or reject a claimed identity: fused score against tau_fused.

    The face score uses only the claimed client's gallery points; the voice
    score is the fraction of the claimed client's pairwise machines that
    vote for it.
    """
    names = m.class_names
    if claimed_id not in names:
        raise IdentityError(f"claimed id {claimed_id!r} is not enrolled")
    cid = names.index(claimed_id)

    mask = m.face_gallery.labels == cid
    client_points = m.face_gallery.points[:, mask]
    client_model = knn_mod.KnnModel(
        client_points,
        np.zeros(client_points.shape[1], dtype=np.int64),
        k=min(m.config.knn_k, client_points.shape[1]),
    )
    q_face = _face_probe(m, face_image)
    face_score = _distance_score(knn_mod.classify(client_model, q_face).mean_distance)

    q_voice = _voice_probe(m, voice_recording)
    wins = 0
    involved = 0
    for (i, j), machine in zip(m.voice_svm.class_pairs, m.voice_svm.machines):
        if cid not in (i, j):
            continue
        involved += 1
        _, sign = svm_mod.predict_binary(machine, q_voice)
        if (sign > 0 and i == cid) or (sign < 0 and j == cid):
            wins += 1
    voice_score = wins / involved

    w = m.config.w_face
    fused = w * face_score + (1.0 - w) * voice_score
    accepted = fused >= m.thresholds.tau_fused
    return Decision(
        mode=MODE_VERIFY,
        claimed_id=claimed_id,
        face_score=face_score,
        voice_score=voice_score,
        fused_score=fused,
        verdict=VERDICT_ACCEPT if accepted else VERDICT_REJECT,
        client_id=claimed_id if accepted else None,
    )


# ---------------------------------------------------------------------------
# model file format: UTF-8 text, magic "BIOMM 1", named sections, matrices as
# "rows cols" headers with 17-significant-digit decimal entries, and a
# trailing CRC32 line over all prior bytes.
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _emit_matrix(lines: list, name: str, matrix: np.ndarray) -> None:
    matrix = np.atleast_2d(matrix)
    lines.append(f"{name} {matrix.shape[0]} {matrix.shape[1]}")
    for row in matrix:
        lines.append(" ".join(_fmt(v) for v in row))


def _emit_subspace(lines: list, section: str, s: pca_mod.Subspace) -> None:
    lines.append(f"SECTION {section}")
    lines.append(f"KIND {s.kind}")
    _emit_matrix(lines, "MEAN", s.mean[None, :])
    _emit_matrix(lines, "BASIS", s.basis)


def save_model(m: SystemModel, path) -> None:
    cfg = m.config
    lines = [MAGIC, "SECTION CONFIG"]
    mf = cfg.mfcc
    for key, value in (
        ("frame_ms", mf.frame_ms),
        ("shift_ms", mf.shift_ms),
        ("fft_size", mf.fft_size),
        ("num_filters", mf.num_filters),
        ("num_ceps", mf.num_ceps),
        ("fmin_hz", mf.fmin_hz),
        ("fmax_hz", mf.fmax_hz),
        ("pca_retained", cfg.pca_retained),
        ("lda_retained", cfg.lda_retained),
        ("reg", cfg.reg),
        ("knn_k", cfg.knn_k),
        ("svm_kernel", cfg.svm_kernel),
        ("svm_gamma", cfg.svm_gamma),
        ("svm_c", cfg.svm_c),
        ("svm_tol", cfg.svm_tol),
        ("w_face", cfg.w_face),
    ):
        if value is None:
            lines.append(f"{key} -")
        elif isinstance(value, (int, np.integer)) or key in ("knn_k",):
            lines.append(f"{key} {int(value)}")
        elif isinstance(value, str):
            lines.append(f"{key} {value}")
        else:
            lines.append(f"{key} {_fmt(value)}")

    _emit_subspace(lines, "FACE_PCA", m.face_pca)
    _emit_subspace(lines, "FACE_LDA", m.face_lda)

    lines.append("SECTION GALLERY")
    lines.append(f"K {m.face_gallery.k}")
    _emit_matrix(lines, "POINTS", m.face_gallery.points)
    lines.append(
        "LABELS " + " ".join(str(int(v)) for v in m.face_gallery.labels)
    )

    _emit_subspace(lines, "VOICE_LDA", m.voice_lda)

    lines.append("SECTION VOICE_SVM")
    lines.append(f"CLASSES {m.voice_svm.num_classes}")
    lines.append(f"PAIRS {len(m.voice_svm.machines)}")
    for (i, j), machine in zip(m.voice_svm.class_pairs, m.voice_svm.machines):
        lines.append(f"PAIR {i} {j}")
        lines.append(f"BIAS {_fmt(machine.bias)}")
        _emit_matrix(lines, "COEFS", machine.dual_coefs[None, :])
        _emit_matrix(lines, "SVS", machine.support_vectors)

    lines.append("SECTION TEMPLATES")
    lines.append(f"COUNT {len(m.templates)}")
    for t in m.templates:
        lines.append(f"TEMPLATE {t.client_id} {t.voice_class_id}")
        _emit_matrix(lines, "FACE_COORDS", t.face_coords[None, :])

    lines.append("SECTION THRESHOLDS")
    lines.append(f"TAU_DIST {_fmt(m.thresholds.tau_dist)}")
    lines.append(f"TAU_FUSED {_fmt(m.thresholds.tau_fused)}")

    body = "\n".join(lines) + "\n"
    crc = zlib.crc32(body.encode("utf-8")) & 0xFFFFFFFF
    Path(path).write_text(body + f"CRC32 {crc:08x}\n", encoding="utf-8")


class _Reader:
    def __init__(self, lines, section="header"):
        self.lines = lines
        self.pos = 0
        self.section = section

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise FormatError(f"truncated model file in section {self.section}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def expect_section(self, name: str) -> None:
        line = self.next()
        if line != f"SECTION {name}":
            raise FormatError(f"expected section {name}, found {line!r}")
        self.section = name

    def keyword(self, name: str) -> list:
        parts = self.next().split()
        if not parts or parts[0] != name:
            raise FormatError(f"expected {name} in section {self.section}")
        return parts[1:]

    def matrix(self, name: str) -> np.ndarray:
        rows, cols = (int(v) for v in self.keyword(name))
        data = np.empty((rows, cols))
        for r in range(rows):
            values = self.next().split()
            if len(values) != cols:
                raise FormatError(
                    f"matrix {name} row {r} has {len(values)} values, expected {cols}"
                )
            data[r] = [float(v) for v in values]
        return data


def _read_subspace(reader: _Reader, section: str) -> pca_mod.Subspace:
    reader.expect_section(section)
    kind = reader.keyword("KIND")[0]
    mean = reader.matrix("MEAN")[0]
    basis = reader.matrix("BASIS")
    return pca_mod.Subspace(kind, mean, basis)


def _opt(token: str, cast):
    return None if token == "-" else cast(token)


def load_model(path) -> SystemModel:
    """Parse a model file; the CRC is verified before any section parsing."""
    raw = Path(path).read_text(encoding="utf-8")
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[-1].startswith("CRC32 "):
        raise FormatError("missing CRC32 trailer (file truncated?)")
    stated = lines[-1][len("CRC32 "):].strip()
    body = "\n".join(lines[:-1]) + "\n"
    actual = zlib.crc32(body.encode("utf-8")) & 0xFFFFFFFF
    if stated != f"{actual:08x}":
        raise FormatError(f"checksum mismatch: stated {stated}, computed {actual:08x}")

    reader = _Reader(lines[:-1])
    if reader.next() != MAGIC:
        raise FormatError(f"bad magic line (expected {MAGIC!r})")

    reader.expect_section("CONFIG")
    kv = {}
    for _ in range(16):
        key, value = reader.next().split(" ", 1)
        kv[key] = value
    config = PipelineConfig(
        pca_retained=_opt(kv["pca_retained"], int),
        lda_retained=_opt(kv["lda_retained"], int),
        reg=_opt(kv["reg"], float),
        knn_k=int(kv["knn_k"]),
        mfcc=mfcc_mod.MfccConfig(
            frame_ms=float(kv["frame_ms"]),
            shift_ms=float(kv["shift_ms"]),
            fft_size=_opt(kv["fft_size"], int),
            num_filters=int(kv["num_filters"]),
            num_ceps=int(kv["num_ceps"]),
            fmin_hz=float(kv["fmin_hz"]),
            fmax_hz=_opt(kv["fmax_hz"], float),
        ),
        svm_kernel=kv["svm_kernel"],
        svm_gamma=float(kv["svm_gamma"]),
        svm_c=float(kv["svm_c"]),
        svm_tol=float(kv["svm_tol"]),
        w_face=float(kv["w_face"]),
    )

    face_pca = _read_subspace(reader, "FACE_PCA")
    face_lda = _read_subspace(reader, "FACE_LDA")

    reader.expect_section("GALLERY")
    k = int(reader.keyword("K")[0])
    points = reader.matrix("POINTS")
    labels = np.array([int(v) for v in reader.keyword("LABELS")], dtype=np.int64)
    face_gallery = knn_mod.KnnModel(points, labels, k=k)

    voice_lda = _read_subspace(reader, "VOICE_LDA")

    reader.expect_section("VOICE_SVM")
    num_classes = int(reader.keyword("CLASSES")[0])
    num_pairs = int(reader.keyword("PAIRS")[0])
    if num_pairs != num_classes * (num_classes - 1) // 2:
        raise FormatError(
            f"expected {num_classes * (num_classes - 1) // 2} pairwise machines, "
            f"found {num_pairs}"
        )
    pairs = []
    machines = []
    for _ in range(num_pairs):
        i, j = (int(v) for v in reader.keyword("PAIR"))
        bias = float(reader.keyword("BIAS")[0])
        coefs = reader.matrix("COEFS")[0]
        svs = reader.matrix("SVS")
        pairs.append((i, j))
        machines.append(
            svm_mod.BinarySvm(svs, coefs, bias, config.kernel(), config.svm_c)
        )
    voice_svm = svm_mod.SvmModel(num_classes, tuple(pairs), tuple(machines))

    reader.expect_section("TEMPLATES")
    count = int(reader.keyword("COUNT")[0])
    templates = []
    for _ in range(count):
        name, voice_class = reader.keyword("TEMPLATE")
        coords = reader.matrix("FACE_COORDS")[0]
        templates.append(BiometricTemplate(name, coords, int(voice_class)))

    reader.expect_section("THRESHOLDS")
    tau_dist = float(reader.keyword("TAU_DIST")[0])
    tau_fused = float(reader.keyword("TAU_FUSED")[0])

    return SystemModel(
        face_pca=face_pca,
        face_lda=face_lda,
        face_gallery=face_gallery,
        voice_lda=voice_lda,
        voice_svm=voice_svm,
        templates=tuple(templates),
        thresholds=Thresholds(tau_dist, tau_fused),
        config=config,
    )
