"""Gallery data model and on-disk formats.

A gallery lives in a directory with a ``manifest.tsv`` (columns
``set_id <TAB> identity <TAB> relative_path``, identity ``-`` when
unlabelled) and one descriptor file per set. Set files are CSV with one
exemplar per row, or a binary alternative starting with the magic
``QTS1`` followed by two little-endian uint32 counts (n, d) and n*d
little-endian float32 values in row-major order.

Identity labels, when present, are deliberately gated behind
:meth:`Gallery.evaluation_labels` so that training and retrieval code
never sees them.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CorpusError

MANIFEST_NAME = "manifest.tsv"
BINARY_MAGIC = b"QTS1"
UNLABELLED = "-"


def _readonly(a: np.ndarray) -> np.ndarray:
    # always copy so freezing never locks a caller-owned array
    out = np.array(a, dtype=np.float64, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class FaceSet:
    """One descriptor set: n_r exemplars of dimension d, rows of `exemplars`."""

    set_id: str
    exemplars: np.ndarray
    source_path: str = ""

    def __post_init__(self):
        arr = np.asarray(self.exemplars, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise CorpusError(f"set {self.set_id!r}: exemplars must be a non-empty 2-D matrix")
        if not np.all(np.isfinite(arr)):
            row = int(np.where(~np.isfinite(arr).all(axis=1))[0][0])
            raise CorpusError(f"set {self.set_id!r}: non-finite value in exemplar row {row}")
        norms = np.linalg.norm(arr, axis=1)
        if np.any(norms == 0.0):
            row = int(np.where(norms == 0.0)[0][0])
            raise CorpusError(f"set {self.set_id!r}: zero-norm exemplar at row {row}")
        object.__setattr__(self, "exemplars", _readonly(arr))

    @property
    def size(self) -> int:
        return self.exemplars.shape[0]

    @property
    def dim(self) -> int:
        return self.exemplars.shape[1]

    def __eq__(self, other):
        if not isinstance(other, FaceSet):
            return NotImplemented
        return (
            self.set_id == other.set_id
            and self.exemplars.shape == other.exemplars.shape
            and np.array_equal(self.exemplars, other.exemplars)
        )

    def __repr__(self):
        return f"FaceSet({self.set_id!r}, n={self.size}, d={self.dim})"


@dataclass(frozen=True, eq=False)
class Gallery:
    """Immutable ordered collection of sets sharing one descriptor dimension."""

    sets: tuple[FaceSet, ...]
    labels: dict[str, str] | None = None

    def __post_init__(self):
        if not self.sets:
            raise CorpusError("gallery has no sets")
        object.__setattr__(self, "sets", tuple(self.sets))
        ids = [s.set_id for s in self.sets]
        if len(set(ids)) != len(ids):
            dup = next(i for i in ids if ids.count(i) > 1)
            raise CorpusError(f"duplicate set_id {dup!r} in gallery")
        dims = {s.dim for s in self.sets}
        if len(dims) != 1:
            raise CorpusError(f"dimension mismatch across sets: found dims {sorted(dims)}")
        if self.labels is not None:
            missing = [i for i in ids if i not in self.labels]
            if missing:
                raise CorpusError(f"label map does not cover set_id {missing[0]!r}")
            object.__setattr__(self, "labels", dict(self.labels))
        object.__setattr__(self, "_index", {sid: i for i, sid in enumerate(ids)})

    @property
    def dim(self) -> int:
        return self.sets[0].dim

    @property
    def set_ids(self) -> list[str]:
        return [s.set_id for s in self.sets]

    @property
    def labelled(self) -> bool:
        return self.labels is not None

    def index_of(self, set_id: str) -> int:
        try:
            return self._index[set_id]
        except KeyError:
            raise CorpusError(f"unknown set_id {set_id!r}") from None

    def get(self, set_id: str) -> FaceSet:
        return self.sets[self.index_of(set_id)]

    def evaluation_labels(self) -> dict[str, str]:
        """Identity labels, for evaluation only. Raises if the gallery is unlabelled."""
        if self.labels is None:
            raise CorpusError("gallery is unlabelled: identity labels unavailable")
        return dict(self.labels)

    def __len__(self):
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    def __eq__(self, other):
        if not isinstance(other, Gallery):
            return NotImplemented
        return self.sets == other.sets and self.labels == other.labels


@dataclass(frozen=True, eq=False)
class ProxyTable:
    """Per-set lists of the k_p nearest other sets under a baseline measure.

    Sets whose proxy list is empty (k_p = 0) carry no entry at all, so an
    empty table and a k_p = 0 table round-trip identically through disk.
    """

    k_p: int
    entries: dict[str, tuple[tuple[str, float], ...]]

    def __post_init__(self):
        if self.k_p < 0:
            raise CorpusError("k_p must be >= 0")
        clean: dict[str, tuple[tuple[str, float], ...]] = {}
        for sid, plist in self.entries.items():
            plist = tuple((str(p), float(s)) for p, s in plist)
            if any(p == sid for p, _ in plist):
                raise CorpusError(f"proxy list of {sid!r} contains itself")
            scores = [s for _, s in plist]
            if any(a < b for a, b in zip(scores, scores[1:])):
                raise CorpusError(f"proxy list of {sid!r} not sorted by descending score")
            if plist:
                clean[sid] = plist
        object.__setattr__(self, "entries", clean)

    def proxies_of(self, set_id: str, k: int | None = None) -> tuple[tuple[str, float], ...]:
        plist = self.entries.get(set_id, ())
        return plist if k is None else plist[:k]

    def __eq__(self, other):
        if not isinstance(other, ProxyTable):
            return NotImplemented
        return self.k_p == other.k_p and self.entries == other.entries


# ---------------------------------------------------------------------------
# gallery I/O


def _load_set_file(path: Path, set_id: str) -> np.ndarray:
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CorpusError(f"set {set_id!r}: cannot read {path}: {exc}") from exc
    if blob[:4] == BINARY_MAGIC:
        if len(blob) < 12:
            raise CorpusError(f"set {set_id!r}: truncated binary header in {path}")
        n, d = struct.unpack("<II", blob[4:12])
        expected = 12 + 4 * n * d
        if len(blob) != expected:
            raise CorpusError(
                f"set {set_id!r}: binary payload size mismatch in {path} "
                f"(expected {expected} bytes, found {len(blob)})"
            )
        data = np.frombuffer(blob, dtype="<f4", offset=12)
        return data.reshape(n, d).astype(np.float64)
    try:
        text = blob.decode("utf-8")
        rows = [
            [float(tok) for tok in line.replace(",", " ").split()]
            for line in text.splitlines()
            if line.strip()
        ]
    except (UnicodeDecodeError, ValueError) as exc:
        raise CorpusError(f"set {set_id!r}: cannot parse {path} as a numeric matrix: {exc}") from exc
    if not rows:
        raise CorpusError(f"set {set_id!r}: {path} contains no exemplars")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise CorpusError(f"set {set_id!r}: ragged rows in {path}")
    return np.asarray(rows, dtype=np.float64)


def load_gallery(path: str | Path) -> Gallery:
    """Load a gallery directory; sets come back in manifest order."""
    root = Path(path)
    manifest = root / MANIFEST_NAME
    if not manifest.is_file():
        raise CorpusError(f"missing {MANIFEST_NAME} in {root}")
    sets: list[FaceSet] = []
    labels: dict[str, str] = {}
    unlabelled = 0
    for lineno, line in enumerate(manifest.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 3:
            raise CorpusError(f"{manifest}:{lineno}: expected 3 tab-separated columns")
        set_id, identity, rel = parts
        exemplars = _load_set_file(root / rel, set_id)
        if sets and exemplars.shape[1] != sets[0].dim:
            raise CorpusError(
                f"set {set_id!r}: dimension {exemplars.shape[1]} does not match "
                f"gallery dimension {sets[0].dim} (from set {sets[0].set_id!r})"
            )
        sets.append(FaceSet(set_id=set_id, exemplars=exemplars, source_path=str(root / rel)))
        if identity == UNLABELLED:
            unlabelled += 1
        else:
            labels[set_id] = identity
    if not sets:
        raise CorpusError(f"{manifest}: no sets listed")
    if unlabelled and labels:
        raise CorpusError(f"{manifest}: mixed labelled and unlabelled rows")
    return Gallery(sets=tuple(sets), labels=labels if labels else None)


def save_gallery(gallery: Gallery, path: str | Path, binary: bool = False) -> None:
    """Write a gallery directory (manifest + one set file per set)."""
    root = Path(path)
    (root / "sets").mkdir(parents=True, exist_ok=True)
    lines = []
    for s in gallery.sets:
        ext = "qtsb" if binary else "csv"
        rel = f"sets/{s.set_id}.{ext}"
        target = root / rel
        if binary:
            n, d = s.exemplars.shape
            payload = struct.pack("<II", n, d) + s.exemplars.astype("<f4").tobytes()
            target.write_bytes(BINARY_MAGIC + payload)
        else:
            target.write_text(
                "\n".join(",".join(repr(v) for v in row) for row in s.exemplars.tolist()) + "\n"
            )
        identity = gallery.labels[s.set_id] if gallery.labels else UNLABELLED
        lines.append(f"{s.set_id}\t{identity}\t{rel}")
    (root / MANIFEST_NAME).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# proxy table I/O


def save_proxies(table: ProxyTable, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# k_p={table.k_p}\n")
        for sid, plist in table.entries.items():
            for rank, (pid, score) in enumerate(plist, start=1):
                fh.write(f"{sid}\t{rank}\t{pid}\t{repr(score)}\n")


def load_proxies(path: str | Path) -> ProxyTable:
    entries: dict[str, list[tuple[str, float]]] = {}
    k_p = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            if line.startswith("#"):
                if "k_p=" in line:
                    k_p = int(line.split("k_p=")[1])
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise CorpusError(f"{path}:{lineno}: expected 4 tab-separated columns")
            sid, rank, pid, score = parts
            plist = entries.setdefault(sid, [])
            if int(rank) != len(plist) + 1:
                raise CorpusError(f"{path}:{lineno}: rank {rank} out of order for {sid!r}")
            plist.append((pid, float(score)))
    table = ProxyTable(k_p=k_p, entries={k: tuple(v) for k, v in entries.items()})
    return table


# ---------------------------------------------------------------------------
# transitivity feature I/O


def save_features(features, path: str | Path) -> None:
    """Write features as TSV: label, s1..s5, ref_id, proxy_id."""
    with open(path, "w") as fh:
        for f in features:
            label = "" if f.label is None else repr(float(f.label))
            svals = "\t".join(repr(float(v)) for v in f.s)
            ref_id, proxy_id = f.provenance[0], f.provenance[1]
            fh.write(f"{label}\t{svals}\t{ref_id}\t{proxy_id}\n")


def load_features(path: str | Path):
    from .metafeat import TransitivityFeature

    out = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 8:
                raise CorpusError(f"{path}:{lineno}: expected 8 tab-separated columns")
            label = None if parts[0] == "" else float(parts[0])
            s = np.array([float(v) for v in parts[1:6]], dtype=np.float64)
            out.append(TransitivityFeature(s=s, label=label, provenance=(parts[6], parts[7])))
    return out


# ---------------------------------------------------------------------------
# regression model I/O


def save_model(model, path: str | Path) -> None:
    """Persist a trained regression model as plain text."""
    cfg = model.config
    lines = [
        f"gamma={repr(float(cfg.kernel_gamma))}",
        f"epsilon={repr(float(cfg.epsilon))}",
        f"cost={repr(float(cfg.cost))}",
        f"bias={repr(float(model.bias))}",
    ]
    for beta, sv in zip(model.coefficients, model.support_vectors):
        lines.append(", ".join([repr(float(beta))] + [repr(float(v)) for v in sv]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path: str | Path):
    from .svr import SvrConfig, SvrModel

    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    header: dict[str, float] = {}
    body_start = 0
    for ln in lines[:4]:
        if "=" not in ln:
            break
        key, _, val = ln.partition("=")
        try:
            header[key.strip()] = float(val)
        except ValueError as exc:
            raise CorpusError(f"{path}: malformed header line {ln!r}") from exc
        body_start += 1
    for key in ("gamma", "epsilon", "cost", "bias"):
        if key not in header:
            raise CorpusError(f"{path}: missing header line {key}=")
    betas, vecs = [], []
    for ln in lines[body_start:]:
        toks = [t.strip() for t in ln.split(",")]
        if len(toks) != 6:
            raise CorpusError(f"{path}: support vector line needs 6 comma-separated values: {ln!r}")
        try:
            vals = [float(t) for t in toks]
        except ValueError as exc:
            raise CorpusError(f"{path}: non-numeric support vector line {ln!r}") from exc
        betas.append(vals[0])
        vecs.append(vals[1:])
    coeff = np.asarray(betas, dtype=np.float64)
    sv = np.asarray(vecs, dtype=np.float64).reshape(len(betas), 5)
    config = SvrConfig(
        epsilon=header["epsilon"], cost=header["cost"], kernel_gamma=header["gamma"]
    )
    try:
        return SvrModel(
            support_vectors=sv, coefficients=coeff, bias=header["bias"], config=config
        )
    except Exception as exc:
        raise CorpusError(f"{path}: {exc}") from exc
