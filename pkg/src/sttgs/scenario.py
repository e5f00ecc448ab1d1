"""Scenario configuration, client datasets, and the allocation record.

Scenario files are flat ``key = value`` documents under a single
``[scenario]`` header. Per-client vectors are comma separated; a single
value is broadcast to all ``K`` clients. Keys ending in ``_db`` are read in
decibels (``sigma2_dbm`` in dBm) and stored linearly.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "ScenarioError",
    "ScenarioConfig",
    "ClientDataset",
    "Allocation",
    "load_scenario",
    "loads_scenario",
    "dumps_scenario",
    "default_scenario_path",
    "reference_losses_path",
    "pilot_size",
    "generate_synthetic_datasets",
    "SyntheticSpec",
    "load_manifest",
    "load_loss_manifest",
    "read_image",
    "write_image",
]

SECTION = "scenario"

# Data volumes of clients 1-5 in MB, 280 images each.
_DATASET_VOLUMES_MB = (2091.26, 2103.93, 1906.72, 1891.08, 1544.17)
_DATASET_IMAGES = 280


class ScenarioError(ValueError):
    """Raised for unreadable scenario files or invariant violations."""

    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def pilot_size(rho: float, d_size: int) -> int:
    """Pilot cardinality ``ceil(rho * |D|)``.

    A 1e-9 guard keeps products like ``0.1 * 280`` from rounding up.
    """
    return int(math.ceil(rho * d_size - 1e-9))


def _or(value, default):
    return value if np.size(value) else default


def _vec(value, K, name, cast=float):
    vals = tuple(cast(v) for v in np.atleast_1d(value).tolist())
    if len(vals) == 1:
        vals = vals * K
    if len(vals) != K:
        raise ScenarioError(name, f"expected {K} entries, got {len(vals)}")
    return vals


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical and algorithmic parameters of one STT-GS run.

    Vector fields are tuples of length ``K``. dB-valued quantities are
    stored linearly. ``gamma=None`` selects the default ``100 / P_max**2``.
    """

    K: int
    N: int
    T: float
    P_max: float
    P_sum: float
    sigma2: float
    B: tuple = ()
    V: tuple = ()
    D_sizes: tuple = ()
    rho: tuple = ()
    h0: float = db_to_linear(-30.0)
    alpha: float = 3.0
    omega: tuple = ()
    K_ric: float = db_to_linear(-26.0)
    lambda_loss: float = 0.2
    beta: float = 0.1
    gamma: Optional[float] = None
    I_max: int = 60
    J_max: int = 20
    T_epsilon: float = 1e-3
    seed: int = 0
    client_positions: tuple = ()
    server_position: tuple = (0.0, 0.0)

    def __post_init__(self):
        K = self.K
        if int(K) != K or K < 1:
            raise ScenarioError("K", f"must be a positive integer, got {K}")
        if int(self.N) != self.N or self.N < 1:
            raise ScenarioError("N", f"must be a positive integer, got {self.N}")
        for name in ("T", "P_max", "P_sum", "sigma2", "T_epsilon", "h0", "K_ric"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ScenarioError(name, f"must be positive, got {v}")
        if not self.alpha > 0:
            raise ScenarioError("alpha", f"must be positive, got {self.alpha}")
        if not 0.0 <= self.lambda_loss <= 1.0:
            raise ScenarioError("lambda_loss", f"must lie in [0, 1], got {self.lambda_loss}")
        if not self.beta > 0:
            raise ScenarioError("beta", f"must be positive, got {self.beta}")
        if self.gamma is not None and not self.gamma > 0:
            raise ScenarioError("gamma", f"must be positive, got {self.gamma}")
        for name in ("I_max", "J_max"):
            if getattr(self, name) < 1:
                raise ScenarioError(name, "must be at least 1")

        def setf(name, value):
            object.__setattr__(self, name, value)

        setf("K", int(K))
        setf("N", int(self.N))
        setf("B", _vec(_or(self.B, 10e6), K, "B"))
        setf("V", _vec(_or(self.V, _default_volumes(K)), K, "V"))
        setf("D_sizes", _vec(_or(self.D_sizes, _DATASET_IMAGES), K, "D_sizes", int))
        setf("rho", _vec(_or(self.rho, 0.1), K, "rho"))
        setf("omega", _vec(_or(self.omega, db_to_linear(-20.0)), K, "omega"))
        for name in ("B", "V", "omega"):
            if any(not (np.isfinite(v) and v > 0) for v in getattr(self, name)):
                raise ScenarioError(name, "entries must be positive")
        if any(d < 1 for d in self.D_sizes):
            raise ScenarioError("D_sizes", "entries must be at least 1")
        if any(not 0.0 < r < 1.0 for r in self.rho):
            raise ScenarioError("rho", f"entries must lie in (0, 1), got {self.rho}")

        server = tuple(float(v) for v in self.server_position)
        if len(server) != 2:
            raise ScenarioError("server_position", "expected two coordinates")
        setf("server_position", server)
        if self.client_positions:
            pos = tuple(tuple(float(c) for c in p) for p in self.client_positions)
        else:
            pos = _draw_positions(K, self.seed, server)
        if len(pos) != K or any(len(p) != 2 for p in pos):
            raise ScenarioError("client_positions", f"expected {K} coordinate pairs")
        setf("client_positions", pos)

    @property
    def distances(self) -> np.ndarray:
        """Client-server distances, floored at the 1 m path-loss reference."""
        d = np.linalg.norm(
            np.asarray(self.client_positions) - np.asarray(self.server_position), axis=1
        )
        return np.maximum(d, 1.0)

    @property
    def gamma_eff(self) -> float:
        return self.gamma if self.gamma is not None else 100.0 / self.P_max**2

    @property
    def pilot_sizes(self) -> np.ndarray:
        return np.array([pilot_size(r, d) for r, d in zip(self.rho, self.D_sizes)])

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def reseeded(self, seed: int, redraw_positions: bool = True) -> "ScenarioConfig":
        """Same scenario under another seed; positions are redrawn by default."""
        if redraw_positions:
            return replace(self, seed=seed, client_positions=())
        return replace(self, seed=seed)


def _default_volumes(K):
    vols = [mb * 8e6 / _DATASET_IMAGES for mb in _DATASET_VOLUMES_MB]
    return tuple(vols[k % len(vols)] for k in range(K))


def _draw_positions(K, seed, server):
    rng = np.random.default_rng([seed, 0])
    xy = rng.uniform(-50.0, 50.0, size=(K, 2)) + np.asarray(server)
    return tuple(tuple(float(c) for c in p) for p in xy)


# ---------------------------------------------------------------- file format

_INT_KEYS = {"K", "N", "I_max", "J_max", "seed"}
_VEC_KEYS = {"B", "V", "D_sizes", "rho", "omega"}
_DB_KEYS = {"h0_db": "h0", "omega_db": "omega", "K_ric_db": "K_ric", "sigma2_db": "sigma2"}
_FIELD_NAMES = {f.name for f in fields(ScenarioConfig)}


def _parse_floats(text, key):
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError as exc:
        raise ScenarioError(key, f"cannot parse {text!r}") from exc


def _parse_points(text, key):
    pts = []
    for chunk in text.split(";"):
        if chunk.strip():
            pts.append(tuple(_parse_floats(chunk, key)))
    return tuple(pts)


def loads_scenario(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError("<file>", str(exc)) from exc
    if not parser.has_section(SECTION):
        raise ScenarioError("<file>", f"missing [{SECTION}] section")

    kw = {}
    for key, raw in parser.items(SECTION):
        if key in _DB_KEYS:
            name = _DB_KEYS[key]
            vals = [db_to_linear(v) for v in _parse_floats(raw, key)]
            kw[name] = vals if name in _VEC_KEYS else vals[0]
        elif key == "sigma2_dbm":
            kw["sigma2"] = db_to_linear(_parse_floats(raw, key)[0] - 30.0)
        elif key in ("client_positions", "server_position"):
            pts = _parse_points(raw, key)
            kw[key] = pts if key == "client_positions" else (pts[0] if pts else ())
        elif key in _INT_KEYS:
            try:
                kw[key] = int(raw)
            except ValueError as exc:
                raise ScenarioError(key, f"expected an integer, got {raw!r}") from exc
        elif key in _VEC_KEYS:
            kw[key] = _parse_floats(raw, key)
        elif key == "gamma" and raw.strip().lower() in ("", "none", "auto"):
            kw[key] = None
        elif key in _FIELD_NAMES:
            vals = _parse_floats(raw, key)
            if len(vals) != 1:
                raise ScenarioError(key, f"expected a scalar, got {raw!r}")
            kw[key] = vals[0]
        else:
            raise ScenarioError(key, "unknown key")
    for required in ("K", "N", "T", "P_max", "P_sum", "sigma2"):
        if required not in kw:
            raise ScenarioError(required, "missing required key")
    return ScenarioConfig(**kw)


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError("<file>", str(exc)) from exc
    return loads_scenario(text)


def dumps_scenario(cfg: ScenarioConfig) -> str:
    """Serialize with every value explicit and linear (exact float repr)."""
    lines = [f"[{SECTION}]"]
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if f.name == "client_positions":
            text = "; ".join(f"{x!r}, {y!r}" for x, y in v)
        elif f.name == "server_position":
            text = f"{v[0]!r}, {v[1]!r}"
        elif isinstance(v, tuple):
            text = ", ".join(repr(e) for e in v)
        else:
            text = repr(v)
        lines.append(f"{f.name} = {text}")
    return "\n".join(lines) + "\n"


def default_scenario_path(noise_dbm: int = -100) -> Path:
    """Bundled default scenario (``noise_dbm`` -100 or -120)."""
    name = {-100: "default.scn", -120: "default_noise120.scn"}[noise_dbm]
    return Path(str(resources.files("sttgs") / "data" / name))


def reference_losses_path() -> Path:
    return Path(str(resources.files("sttgs") / "data" / "reference_losses.json"))


# ---------------------------------------------------------------- datasets


@dataclass
class ClientDataset:
    """Images, poses and (optionally) per-image render targets of one client.

    ``rendered`` holds images produced by the prior model; alternatively
    ``precomputed_loss`` holds one loss per image. With neither, only
    sampling is possible.
    """

    images: list
    poses: list
    rendered: Optional[list] = None
    precomputed_loss: Optional[np.ndarray] = None

    def __post_init__(self):
        if len(self.images) != len(self.poses):
            raise ValueError("images and poses must have equal length")
        if self.rendered is not None and self.precomputed_loss is not None:
            raise ValueError("give rendered images or precomputed losses, not both")
        if self.rendered is not None:
            if len(self.rendered) != len(self.images):
                raise ValueError("rendered must match images in length")
            for a, b in zip(self.rendered, self.images):
                if np.shape(a) != np.shape(b):
                    raise ValueError("rendered image shape mismatch")
        if self.precomputed_loss is not None:
            self.precomputed_loss = np.asarray(self.precomputed_loss, dtype=float)
            if self.precomputed_loss.shape != (len(self.images),):
                raise ValueError("precomputed_loss must hold one value per image")

    def __len__(self):
        return len(self.images)

    @property
    def has_losses(self) -> bool:
        return self.rendered is not None or self.precomputed_loss is not None


@dataclass
class Allocation:
    """Selection ``x``, powers ``p`` and split variable ``xi``."""

    x: np.ndarray
    p: np.ndarray
    xi: np.ndarray
    feasible: bool = False
    objective: float = 0.0
    info: dict = field(default_factory=dict)

    def selected(self) -> list:
        return [int(k) for k in np.flatnonzero(np.asarray(self.x) > 0.5)]

    def as_dict(self) -> dict:
        return {
            "x": [float(v) for v in self.x],
            "p": [float(v) for v in self.p],
            "xi": [float(v) for v in self.xi],
            "feasible": bool(self.feasible),
            "objective": float(self.objective),
            "selected": [k + 1 for k in self.selected()],
        }


def _hsv_to_rgb(h, s, v):
    """Vectorized HSV -> RGB for arrays of equal shape (hue in [0, 1))."""
    i = np.floor(h * 6.0).astype(int) % 6
    f = h * 6.0 - np.floor(h * 6.0)
    p, q, t = v * (1 - s), v * (1 - s * f), v * (1 - s * (1 - f))
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def generate_synthetic_datasets(
    config: ScenarioConfig,
    cluster_count: int,
    noise: float,
    shape: Sequence[int] = (8, 8),
    layout: str = "clusters",
    loss_jitter: float = 0.0,
) -> list:
    """Clustered synthetic imagery with a ground-truth loss per image.

    ``layout="clusters"``: image ``i`` of client ``k`` is prototype
    ``i % cluster_count`` (independent random colours).
    ``layout="path"``: the prototypes lie on a smooth closed loop in colour
    space (hue turning once around the wheel), as frames along a camera
    trajectory would, and image ``i`` uses prototype
    ``floor(i * cluster_count / n)``.

    Each image adds a uniform per-pixel perturbation bounded by ``noise``.
    Its loss is an affine function of its mean intensity with a
    client-specific scale, so similar images have similar losses.
    ``loss_jitter`` adds an independent Gaussian term (relative to that
    scale) standing for view-specific difficulty the colours do not reveal;
    losses are floored at zero.
    """
    if cluster_count < 1:
        raise ValueError("cluster_count must be >= 1")
    if noise < 0 or loss_jitter < 0:
        raise ValueError("noise and loss_jitter must be >= 0")
    if layout not in ("clusters", "path"):
        raise ValueError(f"unknown layout {layout!r}")
    H, W = shape
    out = []
    for k in range(config.K):
        rng = np.random.default_rng([config.seed, 1000 + k])
        n = config.D_sizes[k]
        if layout == "clusters":
            base = rng.uniform(0.1, 0.9, size=(cluster_count, 1, 1, 3))
            texture = rng.uniform(-0.1, 0.1, size=(cluster_count, H, W, 3))
            labels = np.arange(n) % cluster_count
        else:
            # hue turns once around the colour wheel at fixed saturation/value
            s0 = rng.uniform(0.4, 0.7) + rng.uniform(-0.05, 0.05, size=(H, W))
            v0 = rng.uniform(0.5, 0.8) + rng.uniform(-0.05, 0.05, size=(H, W))
            h0 = rng.uniform() + rng.uniform(-0.01, 0.01, size=(H, W))
            t = np.arange(cluster_count) / cluster_count
            hue = (h0[None] + t[:, None, None]) % 1.0
            base = _hsv_to_rgb(hue, np.broadcast_to(s0, hue.shape), np.broadcast_to(v0, hue.shape))
            texture = 0.0
            labels = np.arange(n) * cluster_count // n
        protos = np.clip(base + texture, 0.0, 1.0)
        scale = rng.uniform(0.05, 0.5)
        pert = rng.uniform(-1.0, 1.0, size=(n, H, W, 3)) * noise
        imgs = np.clip(protos[labels] + pert, 0.0, 1.0)
        losses = scale * (0.25 + 0.75 * imgs.mean(axis=(1, 2, 3)))
        poses = rng.normal(size=(n, 6))
        if loss_jitter > 0:
            losses = np.maximum(losses + scale * loss_jitter * rng.standard_normal(n), 0.0)
        out.append(
            ClientDataset(
                images=list(imgs),
                poses=list(poses),
                precomputed_loss=losses,
            )
        )
    return out


@dataclass(frozen=True)
class SyntheticSpec:
    """Settings of the synthetic corpus used when no imagery is supplied.

    The defaults describe a camera loop of 56 viewpoints with five frames
    each, light sensor noise, and a small view-specific loss component.
    """

    cluster_count: int = 56
    noise: float = 0.02
    layout: str = "path"
    loss_jitter: float = 0.01

    def generate(self, config: ScenarioConfig) -> list:
        return generate_synthetic_datasets(
            config, self.cluster_count, self.noise, layout=self.layout, loss_jitter=self.loss_jitter
        )


# ---------------------------------------------------------------- image I/O


def read_image(path) -> np.ndarray:
    """Load a P6 PPM or ``.f32`` tensor as an ``H x W x 3`` float array in [0, 1].

    ``.f32`` files start with an ASCII line ``H W C`` followed by raw
    little-endian float32 data.
    """
    path = Path(path)
    if path.suffix == ".f32":
        with open(path, "rb") as fh:
            header = fh.readline().split()
            shape = tuple(int(v) for v in header)
            data = np.frombuffer(fh.read(), dtype="<f4")
        return data.reshape(shape).astype(float)
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=float) / 255.0


def write_image(path, img) -> None:
    path = Path(path)
    img = np.asarray(img, dtype=float)
    if path.suffix == ".f32":
        with open(path, "wb") as fh:
            fh.write((" ".join(str(s) for s in img.shape) + "\n").encode())
            fh.write(img.astype("<f4").tobytes())
        return
    from PIL import Image

    Image.fromarray(np.round(np.clip(img, 0, 1) * 255).astype(np.uint8)).save(path, format="PPM")


def load_manifest(path) -> list:
    """Read a JSON dataset manifest.

    Layout::

        {"clients": [{"images": [...], "poses": [[6 floats], ...],
                      "rendered": [...] | null, "losses": [...] | null}]}

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    root = path.parent
    out = []
    for entry in doc["clients"]:
        images = [read_image(root / p) for p in entry["images"]]
        poses = entry.get("poses") or [[0.0] * 6 for _ in images]
        rendered = entry.get("rendered")
        if rendered is not None:
            rendered = [read_image(root / p) for p in rendered]
        out.append(
            ClientDataset(
                images=images,
                poses=[np.asarray(p, dtype=float) for p in poses],
                rendered=rendered,
                precomputed_loss=entry.get("losses"),
            )
        )
    return out


def load_loss_manifest(path, config: ScenarioConfig) -> np.ndarray:
    """Per-image mean losses from a JSON loss manifest.

    Accepts ``{"mean_loss": [...]}`` (per-image mean of each client) or
    ``{"pi_tilde": [...]}`` (client totals, divided back by ``|D_k|``).
    """
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "mean_loss" in doc:
        vals = np.asarray(doc["mean_loss"], dtype=float)
    elif "pi_tilde" in doc:
        vals = np.asarray(doc["pi_tilde"], dtype=float) / np.asarray(config.D_sizes)
    else:
        raise ScenarioError("<manifest>", "expected 'mean_loss' or 'pi_tilde'")
    if vals.shape != (config.K,):
        raise ScenarioError("<manifest>", f"expected {config.K} client losses")
    if np.any(vals < 0):
        raise ScenarioError("<manifest>", "losses must be nonnegative")
    return vals
